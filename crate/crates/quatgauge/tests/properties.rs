//! Property-based tests for the algebraic building blocks.

use proptest::prelude::*;
use quatgauge::gauge::{eta_of_nu, xi_of_lambda};
use quatgauge::geometry::{chart_from_quaternions, z_matrix, z_pm, ConePoint, HarmonicPoint};
use quatgauge::quatlin::{embed, exp2x2, CMatrix, Quaternion};
use quatgauge::C;

type Q = Quaternion<f64>;

fn quat() -> impl Strategy<Value = Q> {
    (
        -10.0f64..10.0,
        -10.0f64..10.0,
        -10.0f64..10.0,
        -10.0f64..10.0,
    )
        .prop_map(|(w, x, y, z)| Q::new(w, x, y, z))
}

fn small_cmatrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix<f64>> {
    proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), rows * cols).prop_map(
        move |entries| {
            CMatrix::from_fn(rows, cols, |i, j| {
                let (re, im) = entries[i * cols + j];
                C::new(re, im)
            })
        },
    )
}

proptest! {
    #[test]
    fn embedding_is_anti_homomorphism(a in quat(), b in quat()) {
        let lhs = embed(&a).mul(&embed(&b));
        let rhs = embed(&(b * a));
        prop_assert!(lhs.sub(&rhs).max_abs() < 1e-10);
    }

    #[test]
    fn embedding_dagger_is_conjugate(q in quat()) {
        let lhs = embed(&q).dagger();
        let rhs = embed(&q.conj());
        prop_assert!(lhs.sub(&rhs).max_abs() < 1e-12);
    }

    #[test]
    fn embedding_determinant_is_norm_square(q in quat()) {
        let m = embed(&q);
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let norm_sq = q.norm() * q.norm();
        prop_assert!((det.re - norm_sq).abs() < 1e-9 * (1.0 + norm_sq));
        prop_assert!(det.im.abs() < 1e-9 * (1.0 + norm_sq));
    }

    #[test]
    fn frame_isometry_and_orthogonality(lam in small_cmatrix(2, 2)) {
        let xi = xi_of_lambda(&lam).unwrap();
        let m = lam.cols;
        let isometry = xi.dagger().mul(&xi).sub(&CMatrix::identity(m)).max_abs();
        prop_assert!(isometry < 1e-12);
        // the complementary frame built from nu = -lambda^dagger
        let nu = lam.dagger().scale(C::new(-1.0, 0.0));
        let eta = eta_of_nu(&nu).unwrap();
        let cross = xi.dagger().mul(&eta).max_abs();
        prop_assert!(cross < 1e-12);
        // the combined square frame is unitary
        let full = xi.hstack(&eta);
        let defect = full
            .dagger()
            .mul(&full)
            .sub(&CMatrix::identity(full.cols))
            .max_abs();
        prop_assert!(defect < 1e-12);
    }

    #[test]
    fn chart_reality_on_real_slice(q0 in quat(), q1 in quat()) {
        prop_assume!(q0.norm() > 0.3);
        let p = chart_from_quaternions(&[q0, q1]).unwrap();
        prop_assert!(p.reality_residual() < 1e-12);
    }

    #[test]
    fn z_pm_is_u_inverse_times_z(q1 in quat(), t in -0.4f64..0.4) {
        let p = chart_from_quaternions(&[Q::one(), q1]).unwrap();
        // a traceless generator keeps det(exp) = 1
        let u = exp2x2(&CMatrix::two_by_two(
            C::new(t, 0.1 * t),
            C::new(0.2 * t, -0.1 * t),
            C::new(-0.3 * t, 0.05 * t),
            C::new(-t, -0.1 * t),
        ));
        let hp = HarmonicPoint::new(p.clone(), u.clone()).unwrap();
        let u_inv = CMatrix::two_by_two(u[(1, 1)], -u[(0, 1)], -u[(1, 0)], u[(0, 0)]);
        let want = u_inv.mul(&z_matrix(&p));
        prop_assert!(z_pm(&hp).sub(&want).max_abs() < 1e-10);
    }
}

#[test]
fn cone_point_formal_conjugates_are_independent() {
    let p = ConePoint::from_parts(
        vec![C::new(1.0, 0.0), C::new(0.5, 0.25), C::new(0.0, 0.0), C::new(0.0, 0.0)],
        vec![C::new(2.0, 1.0), C::new(-0.5, 0.25), C::new(0.0, 0.0), C::new(0.0, 0.0)],
    );
    assert!(p.reality_residual() > 0.5);
}
