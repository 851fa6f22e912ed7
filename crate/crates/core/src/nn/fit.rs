//! Least-squares polynomial fits of activation functions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ring::RingParams;

use super::NnError;

/// Degree-6 ReLU approximation on [-5, 5], raw at scale 2^16, lowest degree
/// first.
pub const RELU_DEG6_RAW: [i128; 7] = [14014, 32768, 15105, 0, -737, 0, 15];

/// Published MSE of [`RELU_DEG6_RAW`].
pub const RELU_DEG6_MSE: f64 = 0.0036;

/// Points used to score a fit.
pub const MSE_GRID: usize = 20_001;

/// Default fitting grid: step 0.01 over a width-10 interval.
pub const FIT_GRID: usize = 1001;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub degree: usize,
    pub lo: f64,
    pub hi: f64,
    /// Raw fixed-point coefficients at scale `2^d`, lowest degree first.
    pub coeffs: Vec<i128>,
    pub d: u32,
    /// Mean squared error of the rounded polynomial over [`MSE_GRID`] points.
    pub mse: f64,
}

impl PolyFit {
    /// Value of the rounded polynomial.
    pub fn eval(&self, x: f64) -> f64 {
        let scale = (-(self.d as f64)).exp2();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * x + c as f64 * scale)
    }

    /// Largest absolute error against `target` over the scoring grid.
    pub fn max_residual(&self, target: impl Fn(f64) -> f64) -> f64 {
        grid(self.lo, self.hi, MSE_GRID)
            .map(|x| (self.eval(x) - target(x)).abs())
            .fold(0.0, f64::max)
    }

    /// The stored degree-6 ReLU fit rescaled to `params.d`.
    pub fn relu_deg6(params: &RingParams) -> Self {
        let coeffs: Vec<i128> = RELU_DEG6_RAW
            .iter()
            .map(|&c| {
                if params.d >= 16 {
                    c << (params.d - 16)
                } else {
                    (c as f64 / (1u64 << (16 - params.d)) as f64).round() as i128
                }
            })
            .collect();
        let mut fit = Self {
            degree: 6,
            lo: -5.0,
            hi: 5.0,
            coeffs,
            d: params.d,
            mse: 0.0,
        };
        fit.mse = mse(&fit, relu);
        fit
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(move |i| lo + step * i as f64)
}

fn mse(fit: &PolyFit, target: impl Fn(f64) -> f64) -> f64 {
    let sum: f64 = grid(fit.lo, fit.hi, MSE_GRID)
        .map(|x| (fit.eval(x) - target(x)).powi(2))
        .sum();
    sum / MSE_GRID as f64
}

/// Least-squares fit of `target` on `points` uniform samples of `[lo, hi]`,
/// solved by SVD and rounded to the grid `2^-d`.
pub fn fit_activation(
    target: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    degree: usize,
    points: usize,
    d: u32,
) -> Result<PolyFit, NnError> {
    if degree == 0 {
        return Err(NnError::Fit("degree must be at least 1".into()));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(NnError::Fit(format!("degenerate interval [{lo}, {hi}]")));
    }
    if points <= degree {
        return Err(NnError::Fit(format!("{points} points cannot fit degree {degree}")));
    }
    if d > 60 {
        return Err(NnError::Fit(format!("scale 2^{d} too fine")));
    }
    let xs: Vec<f64> = grid(lo, hi, points).collect();
    // columns in a centered, scaled variable keep the system well conditioned
    let mid = (lo + hi) / 2.0;
    let half = (hi - lo) / 2.0;
    let design = DMatrix::from_fn(points, degree + 1, |r, c| ((xs[r] - mid) / half).powi(c as i32));
    let rhs = DVector::from_iterator(points, xs.iter().map(|&x| target(x)));
    let svd = design.svd(true, true);
    let scaled = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| NnError::Fit(e.to_string()))?;
    let coeffs = expand(scaled.as_slice(), mid, half);
    let scale = (d as f64).exp2();
    let mut fit = PolyFit {
        degree,
        lo,
        hi,
        coeffs: coeffs.iter().map(|c| (c * scale).round() as i128).collect(),
        d,
        mse: 0.0,
    };
    fit.mse = mse(&fit, target);
    Ok(fit)
}

/// Coefficients in `x` of `Σ b_j ((x - mid)/half)^j`.
fn expand(b: &[f64], mid: f64, half: f64) -> Vec<f64> {
    let mut out = vec![0.0; b.len()];
    // (x - mid)^j by repeated multiplication
    let mut basis = vec![1.0];
    for (j, &bj) in b.iter().enumerate() {
        let f = bj / half.powi(j as i32);
        for (i, &p) in basis.iter().enumerate() {
            out[i] += f * p;
        }
        let mut next = vec![0.0; basis.len() + 1];
        for (i, &p) in basis.iter().enumerate() {
            next[i + 1] += p;
            next[i] -= mid * p;
        }
        basis = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_fit_is_exact() {
        let fit = fit_activation(|x| x, -5.0, 5.0, 1, FIT_GRID, 16).unwrap();
        assert_eq!(fit.coeffs, vec![0, 65536]);
        assert!(fit.mse < 1e-12);
    }

    #[test]
    fn relu_deg6_matches_stored_coefficients() {
        let fit = fit_activation(relu, -5.0, 5.0, 6, FIT_GRID, 16).unwrap();
        assert_eq!(fit.coeffs, RELU_DEG6_RAW.to_vec());
        assert!(fit.mse <= 0.004, "mse {}", fit.mse);
    }

    #[test]
    fn fit_is_deterministic() {
        let a = fit_activation(relu, -5.01, 5.01, 6, 10_001, 16).unwrap();
        let b = fit_activation(relu, -5.01, 5.01, 6, 10_001, 16).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cubic_target_recovered() {
        let fit = fit_activation(|x| 0.5 * x * x * x - x + 0.25, -2.0, 3.0, 3, 500, 16).unwrap();
        assert_eq!(fit.coeffs, vec![16384, -65536, 0, 32768]);
    }

    #[test]
    fn bad_arguments_rejected() {
        assert!(fit_activation(relu, 1.0, 1.0, 2, 100, 16).is_err());
        assert!(fit_activation(relu, -1.0, 1.0, 0, 100, 16).is_err());
        assert!(fit_activation(relu, -1.0, 1.0, 5, 4, 16).is_err());
    }

    #[test]
    fn stored_fit_values() {
        let fit = PolyFit::relu_deg6(&RingParams::default());
        assert_eq!(fit.eval(0.0), 0.213836669921875);
        assert_eq!(fit.eval(1.0), 0.9333038330078125);
        assert!(fit.mse <= 0.004);
    }
}
