use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use pnrate::gaussian::{log_wrapped_normal, FoldedGaussian, GaussianNd, ProcessCov};
use pnrate::model::{ArmaSpec, StateVector};
use pnrate::quadrature::GaussHermite;
use pnrate::Error;
use proptest::prelude::*;

fn spd(dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim * dim).prop_map(move |v| {
        let a = DMatrix::from_vec(dim, dim, v);
        &a * a.transpose() + DMatrix::identity(dim, dim) * 0.05
    })
}

/// `-½ (x-μ)ᵀ Σ⁻¹ (x-μ) - ½ log det(2π Σ)` through an explicit inverse.
fn reference_log_density(mean: &DVector<f64>, cov: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let d = x - mean;
    let inv = cov.clone().try_inverse().unwrap();
    let q = (d.transpose() * inv * &d)[(0, 0)];
    -0.5 * q - 0.5 * (cov * TAU).determinant().ln()
}

proptest! {
    #[test]
    fn log_density_matches_reference(cov in spd(3), m in prop::collection::vec(-2.0f64..2.0, 6)) {
        let mean = DVector::from_row_slice(&m[..3]);
        let x = DVector::from_row_slice(&m[3..]);
        let g = GaussianNd::new(mean.clone(), cov.clone()).unwrap();
        let a = g.log_density(&x).unwrap();
        let b = reference_log_density(&mean, &cov, &x);
        prop_assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn propagate_is_f_sigma_ft_plus_q(cov in spd(4), gamma in 0.01f64..0.5) {
        let spec = ArmaSpec::sm_oscillator(gamma).unwrap();
        let f = spec.transition_matrix();
        let q = ProcessCov::new(4, gamma);
        let g = GaussianNd::new(DVector::from_element(4, 0.3), cov.clone()).unwrap();
        let p = g.propagate(&f, &q).unwrap();
        let mut expect = &f * &cov * f.transpose();
        for i in 0..2 {
            for j in 0..2 {
                expect[(i, j)] += gamma * gamma;
            }
        }
        prop_assert!((p.cov() - &expect).amax() < 1e-12 * expect.amax());
        prop_assert!((p.cov() - p.cov().transpose()).amax() == 0.0);
        prop_assert!((p.mean() - &f * DVector::from_element(4, 0.3)).amax() < 1e-14);
    }

    #[test]
    fn folded_density_is_2pi_periodic(
        cov in spd(2),
        mu in -10.0f64..10.0,
        phi in 0.0..TAU,
        w in -2.0f64..2.0,
        shift in -3i32..3,
    ) {
        let g = GaussianNd::new(DVector::from_vec(vec![mu, 0.1]), cov.clone()).unwrap();
        let moved = GaussianNd::new(DVector::from_vec(vec![mu + TAU * shift as f64, 0.1]), cov).unwrap();
        let a = FoldedGaussian::new(g).log_density(&StateVector::new(phi, vec![w])).unwrap();
        let b = FoldedGaussian::new(moved).log_density(&StateVector::new(phi, vec![w])).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn wrapped_normal_integrates_to_one(s in 0.02f64..6.0) {
        let n = 2000;
        let h = TAU / n as f64;
        let total: f64 = (0..n).map(|i| log_wrapped_normal(-PI + i as f64 * h, s).0.exp()).sum::<f64>() * h;
        prop_assert!((total - 1.0).abs() < 1e-9, "{s}: {total}");
    }
}

#[test]
fn series_forms_meet_at_the_switch() {
    for &d in &[0.0, 0.5, 1.5, 3.0, -2.0] {
        let (a, ia) = log_wrapped_normal(d, 2.0);
        let (b, ib) = log_wrapped_normal(d, 2.0f64.next_up());
        assert!(!ia.fourier && ib.fourier);
        assert!((a - b).abs() < 1e-12, "{d}: {a} vs {b}");
    }
}

#[test]
fn narrow_fold_equals_plain_gaussian() {
    let cov = DMatrix::from_row_slice(2, 2, &[0.01, 0.002, 0.002, 0.04]);
    let mean = DVector::from_vec(vec![1.0, 0.0]);
    let g = GaussianNd::new(mean.clone(), cov.clone()).unwrap();
    let f = FoldedGaussian::new(g.clone());
    for &(phi, w) in &[(1.0, 0.0), (1.2, 0.1), (0.9, -0.3)] {
        let a = f.log_density(&StateVector::new(phi, vec![w])).unwrap();
        let b = reference_log_density(&mean, &cov, &DVector::from_vec(vec![phi, w]));
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn folded_normalization_in_three_dimensions() {
    // phase by the trapezoid rule, the two register coordinates by product
    // Gauss-Hermite on their marginal; the integrand is smooth in both
    let cov = DMatrix::from_row_slice(3, 3, &[1.5, 0.3, -0.2, 0.3, 0.5, 0.1, -0.2, 0.1, 0.3]);
    let mean = DVector::from_vec(vec![2.0, 0.2, -0.1]);
    let f = FoldedGaussian::new(GaussianNd::new(mean.clone(), cov.clone()).unwrap());
    let sub = cov.view((1, 1), (2, 2)).clone_owned();
    let l = sub.clone().cholesky().unwrap().l();
    let gh = GaussHermite::new(40);
    let np = 256;
    let h = TAU / np as f64;
    let mut total = 0.0;
    for (ti, wi) in gh.nodes.iter().zip(&gh.weights) {
        for (tj, wj) in gh.nodes.iter().zip(&gh.weights) {
            let z = DVector::from_vec(vec![ti * 2f64.sqrt(), tj * 2f64.sqrt()]);
            let w = DVector::from_vec(vec![mean[1], mean[2]]) + &l * &z;
            // divide out the marginal weight the rule supplies
            let log_marg = -0.5 * z.norm_squared() - 0.5 * (sub.determinant() * TAU * TAU).ln();
            let mut inner = 0.0;
            for k in 0..np {
                let s = StateVector::new(k as f64 * h, vec![w[0], w[1]]);
                inner += (f.log_density(&s).unwrap() - log_marg).exp();
            }
            total += wi * wj / PI * inner * h;
        }
    }
    assert!((total - 1.0).abs() < 1e-8, "{total}");
}

#[test]
fn covariance_validation() {
    let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
    assert!(matches!(
        GaussianNd::new(DVector::zeros(2), bad),
        Err(Error::AsymmetricCovariance { .. })
    ));
    let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(matches!(
        GaussianNd::new(DVector::zeros(2), indefinite),
        Err(Error::NotPositiveSemiDefinite { .. })
    ));
    assert!(matches!(
        GaussianNd::new(DVector::zeros(3), DMatrix::identity(2, 2)),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn process_noise_is_rank_one_on_the_head() {
    let q = ProcessCov::new(4, 0.2).matrix();
    for i in 0..4 {
        for j in 0..4 {
            let expect = if i < 2 && j < 2 { 0.04 } else { 0.0 };
            assert!((q[(i, j)] - expect).abs() < 1e-17);
        }
    }
}
