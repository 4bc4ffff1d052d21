//! Evaluates a Gaussian whose phase coordinate is folded onto the circle.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use pnrate::gaussian::{log_wrapped_normal, FoldedGaussian, GaussianNd};
use pnrate::model::StateVector;

fn main() -> pnrate::Result<()> {
    for s in [0.1, 1.0, 2.0, 4.0, 10.0] {
        let (lp, info) = log_wrapped_normal(PI, s);
        println!(
            "variance {s:>5}: density at π = {:.6e} ({} {} terms)",
            lp.exp(),
            info.terms,
            if info.fourier { "Fourier" } else { "direct" }
        );
    }

    let cov = DMatrix::from_row_slice(2, 2, &[3.0, 0.4, 0.4, 0.5]);
    let f = FoldedGaussian::new(GaussianNd::new(DVector::from_vec(vec![5.5, 0.0]), cov)?);
    let n = 512;
    let h = TAU / n as f64;
    for w in [-1.0, 0.0, 1.0] {
        let slice: f64 = (0..n)
            .map(|i| f.log_density(&StateVector::new(i as f64 * h, vec![w])).map(f64::exp))
            .sum::<pnrate::Result<f64>>()?
            * h;
        println!("∫ p(φ, w={w}) dφ = {slice:.6}");
    }
    Ok(())
}
