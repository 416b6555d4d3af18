use lure_forge::canonical::{self, BranchChoice};
use lure_forge::iqclift::{self, build_filter, is_doubly_hyperdominant, lifted_stack};
use lure_forge::oracles::{quadratic, ObjectiveOracle, Sector};
use lure_forge::projection::{project_euclidean, ConstraintSet};
use lure_forge::sssys::{reduce, ReducedLti};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

fn vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-2.0..2.0f64, n).prop_map(DVector::from_vec)
}

fn system() -> impl Strategy<Value = ReducedLti> {
    (1usize..5, 1usize..4).prop_flat_map(|(n, d)| {
        (matrix(n, n), vector(n), vector(n)).prop_filter_map("needs b and c nonzero", move |(a, b, c)| {
            (b.norm() > 0.1 && c.norm() > 0.1).then(|| ReducedLti::new(a, b, c, d).unwrap())
        })
    })
}

/// Random doubly hyperdominant matrix of size `k`.
fn cone_element(k: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (prop::collection::vec(0.0..1.0f64, k * k), prop::collection::vec(0.0..1.0f64, k)).prop_map(move |(off, extra)| {
        let mut q = DMatrix::from_fn(k, k, |i, j| if i == j { 0.0 } else { -off[i * k + j] });
        for i in 0..k {
            let row: f64 = -q.row(i).sum();
            let col: f64 = -q.column(i).sum();
            q[(i, i)] = row.max(col) + extra[i];
        }
        q
    })
}

fn constraint_set(d: usize) -> impl Strategy<Value = ConstraintSet> {
    prop_oneof![
        (vector(d), prop::collection::vec(0.0..2.0f64, d)).prop_map(|(lo, w)| {
            let hi = &lo + DVector::from_vec(w);
            ConstraintSet::boxed(lo, hi).unwrap()
        }),
        (vector(d), -1.0..1.0f64).prop_map(|(a, b)| ConstraintSet::halfspace(a, b).unwrap()),
        (vector(d), 0.0..2.0f64).prop_map(|(c, r)| ConstraintSet::ball(c, r).unwrap()),
        (matrix(d, d), 0.1..5.0f64)
            .prop_map(move |(l, c)| ConstraintSet::ellipsoid(&l * l.transpose() + DMatrix::identity(d, d) * 0.2, c).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduce_inverts_expand(sys in system()) {
        let (a, b, c) = sys.expand();
        let back = reduce(&a, &b, &c, sys.d()).unwrap();
        prop_assert_eq!(back, sys);
    }

    #[test]
    fn relative_degree_survives_similarity(sys in system(), noise in matrix(4, 4)) {
        let n = sys.n();
        let t = DMatrix::identity(n, n) + noise.view((0, 0), (n, n)) * 0.2;
        prop_assume!(t.clone().svd(false, false).singular_values.min() > 0.3);
        let Ok(rd) = sys.relative_degree() else { return Ok(()) };
        // well separated from the threshold so that rounding cannot flip the decision
        let prev: Vec<f64> = (1..rd.r).map(|k| sys.c().dot(&(sys.a().pow(k as u32 - 1) * sys.b())).abs()).collect();
        prop_assume!(prev.iter().all(|v| *v < 1e-14) && rd.g.abs() > 1e-3);
        let moved = sys.transformed(&t).unwrap().relative_degree().unwrap();
        prop_assert_eq!(moved.r, rd.r);
        prop_assert!((moved.g - rd.g).abs() <= 1e-9 * (1.0 + rd.g.abs()));
    }

    #[test]
    fn canonical_form_keeps_the_output_sequence(alpha in 0.05..0.3f64, beta in 0.0..0.9f64, y0 in vector(2), y1 in vector(2)) {
        let sys = lure_forge::catalog::heavy_ball(alpha, beta).with_dimension(2).unwrap();
        let canon = canonical::canonicalize_system(&sys, BranchChoice::Auto).unwrap();
        let f = quadratic(DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 1.5]), DVector::from_vec(vec![1.0, -1.0])).unwrap();
        let x0 = DMatrix::from_rows(&[y0.transpose(), y1.transpose()]);
        let dev = canonical::io_deviation(&sys, &canon, &f, &x0, 100).unwrap();
        prop_assert!(dev <= 1e-9 * x0.amax().max(1.0), "deviation {}", dev);
    }

    #[test]
    fn projections_are_nonexpansive_and_idempotent(set in constraint_set(3), x in vector(3), y in vector(3)) {
        let (x, y) = (x * 3.0, y * 3.0);
        let px = project_euclidean(&set, &x).unwrap();
        let py = project_euclidean(&set, &y).unwrap();
        prop_assert!((&px - &py).norm() <= (&x - &y).norm() * (1.0 + 1e-12) + 1e-12);
        let ppx = project_euclidean(&set, &px).unwrap();
        prop_assert!((ppx - &px).norm() <= 1e-10);
        prop_assert!(set.violation(&px) <= 1e-9);
    }

    #[test]
    fn hyperdominant_cone_is_convex(a in cone_element(4), b in cone_element(4), t in 0.0..1.0f64) {
        prop_assert!(is_doubly_hyperdominant(&a) && is_doubly_hyperdominant(&b));
        prop_assert!(is_doubly_hyperdominant(&(a * t + b * (1.0 - t))));
    }

    #[test]
    fn filter_output_is_the_lifted_stack(ell in 0usize..6, ys in prop::collection::vec(-3.0..3.0f64, 12), us in prop::collection::vec(-3.0..3.0f64, 12)) {
        let f = build_filter(ell);
        let outs: Vec<DVector<f64>> = ys.iter().map(|v| DVector::from_element(1, *v)).collect();
        let ins: Vec<DVector<f64>> = us.iter().map(|v| DVector::from_element(1, *v)).collect();
        let mut zeta = DVector::zeros(f.a.nrows());
        for k in 0..ys.len() {
            let z = &f.c * &zeta + &f.d_y * ys[k] + &f.d_u * us[k];
            let stack = lifted_stack(&outs, &ins, k, ell);
            prop_assert_eq!(z, stack.column(0).into_owned());
            zeta = &f.a * &zeta + &f.b_y * ys[k] + &f.b_u * us[k];
        }
    }

    #[test]
    fn pointwise_multiplier_is_nonnegative(q in cone_element(3), eig in prop::collection::vec(1.0..10.0f64, 2), rot in -3.0..3.0f64, ys in prop::collection::vec(-5.0..5.0f64, 8)) {
        let sector = Sector::new(1.0, 10.0).unwrap();
        let (c, s) = (rot.cos(), rot.sin());
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let h = &r * DMatrix::from_diagonal(&DVector::from_vec(eig)) * r.transpose();
        let f = quadratic((&h + h.transpose()) * 0.5, DVector::from_vec(vec![1.0, -2.0])).unwrap();
        let y_star = f.minimizer().unwrap();
        let u_star = f.gradient(&y_star);
        let outs: Vec<DVector<f64>> = ys.chunks(2).map(|p| DVector::from_column_slice(p) - &y_star).collect();
        let ins: Vec<DVector<f64>> = ys.chunks(2).map(|p| f.gradient(&DVector::from_column_slice(p)) - &u_star).collect();
        let m = iqclift::build_multiplier(q, DMatrix::zeros(3, 3), 0.9, sector, 2).unwrap();
        for k in 0..outs.len() {
            let z = lifted_stack(&outs, &ins, k, 2);
            let val = iqclift::quadratic_form(&m.m_q, &z, &DMatrix::zeros(z.nrows(), 2));
            prop_assert!(val >= -1e-8, "k = {}, value {}", k, val);
        }
    }
}
