//! Canonicalization, IQC rate certification and projected-variant synthesis
//! for first-order methods written as Lur'e systems.

pub mod canonical;
pub mod catalog;
pub mod certify;
pub mod error;
pub mod iqclift;
pub mod linalg;
pub mod oracles;
pub mod projection;
pub mod projsynth;
pub mod sdp;
pub mod sssys;

pub use error::{LureError, Result};
