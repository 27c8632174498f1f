//! Polynomial graph filters `H(S) = Σ_k h_k S^k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gso::ShiftOperator;
use crate::spectral::symmetric_op_norm;

/// Number of grid points used for the dense integral Lipschitz estimate.
pub const LIPSCHITZ_GRID: usize = 1024;
/// Default coefficient of the second-order slack term `a·ε²`.
pub const DEFAULT_SLACK: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFilter {
    pub coeffs: Vec<f64>,
}

impl GraphFilter {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a filter needs at least h_0");
        Self { coeffs }
    }

    pub fn identity() -> Self {
        Self::new(vec![1.0])
    }

    /// Highest power `K`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `Σ_k h_k S^k X` by repeated shifts.
    pub fn apply_matrix(&self, s: &ShiftOperator, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != s.size() {
            return Err(Error::DimensionMismatch {
                expected: s.size(),
                found: x.nrows(),
            });
        }
        let mut z = x.clone();
        let mut out = x * self.coeffs[0];
        for &h in &self.coeffs[1..] {
            z = s.shift(&z);
            out += &z * h;
        }
        Ok(out)
    }

    pub fn apply(&self, s: &ShiftOperator, x: &DVector<f64>) -> Result<DVector<f64>> {
        let x = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
        Ok(self.apply_matrix(s, &x)?.column(0).into_owned())
    }

    /// `h(λ) = Σ_k h_k λ^k`.
    pub fn frequency_response(&self, lambda: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &h| acc * lambda + h)
    }

    /// `λ h'(λ) = Σ_k k h_k λ^k`.
    pub fn lambda_derivative(&self, lambda: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (k, &h)| acc * lambda + k as f64 * h)
    }

    /// Dense `H(S)` of a dense symmetric matrix, by Horner's rule.
    pub fn matrix_of(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        let n = s.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let mut iter = self.coeffs.iter().rev();
        let mut h = &id * *iter.next().unwrap();
        for &c in iter {
            h = &h * s + &id * c;
        }
        h
    }

    pub fn matrix(&self, s: &ShiftOperator) -> DMatrix<f64> {
        self.matrix_of(s.matrix())
    }

    /// `max_i |h(λ_i)|` over the given eigenvalues.
    pub fn max_response(&self, eigenvalues: &[f64]) -> f64 {
        eigenvalues
            .iter()
            .map(|&l| self.frequency_response(l).abs())
            .fold(0.0, f64::max)
    }

    /// Divides the coefficients by `max_i |h(λ_i)|` when that exceeds one.
    pub fn normalized_on(&self, eigenvalues: &[f64]) -> Self {
        let mut peak = self.max_response(eigenvalues);
        if peak <= 1.0 {
            return self.clone();
        }
        // Rounding can leave the rescaled peak an ulp above one, which would
        // make a second normalization change the coefficients again.
        loop {
            let f = Self::new(self.coeffs.iter().map(|h| h / peak).collect());
            if f.max_response(eigenvalues) <= 1.0 {
                return f;
            }
            peak *= 1.0 + f64::EPSILON;
        }
    }

    pub fn normalize(&self, s: &ShiftOperator) -> Self {
        self.normalized_on(&s.spectrum().eigenvalues)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.coeffs.iter().map(|h| h * factor).collect())
    }
}

/// Integral Lipschitz constant of a filter over `[λ_min, λ_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzConstant {
    /// `max(|λ_min h'(λ_min)|, |λ_max h'(λ_max)|)`.
    pub endpoint: f64,
    /// `max |λ h'(λ)|` over a uniform grid covering the interval.
    pub grid: f64,
}

impl LipschitzConstant {
    /// The value used in downstream bounds.
    pub fn value(&self) -> f64 {
        self.endpoint.max(self.grid)
    }
}

pub fn integral_lipschitz_constant(f: &GraphFilter, lambda_min: f64, lambda_max: f64) -> LipschitzConstant {
    assert!(lambda_min <= lambda_max, "empty interval");
    let endpoint = f
        .lambda_derivative(lambda_min)
        .abs()
        .max(f.lambda_derivative(lambda_max).abs());
    let step = (lambda_max - lambda_min) / (LIPSCHITZ_GRID - 1) as f64;
    let grid = (0..LIPSCHITZ_GRID)
        .map(|i| f.lambda_derivative(lambda_min + step * i as f64).abs())
        .fold(endpoint, f64::max);
    LipschitzConstant { endpoint, grid }
}

/// Gradient of the endpoint constant with respect to the coefficients.
/// At a tie between the endpoints the larger endpoint is used.
pub fn endpoint_lipschitz_gradient(f: &GraphFilter, lambda_min: f64, lambda_max: f64) -> Vec<f64> {
    let g_lo = f.lambda_derivative(lambda_min);
    let g_hi = f.lambda_derivative(lambda_max);
    let (lambda, g) = if g_hi.abs() >= g_lo.abs() {
        (lambda_max, g_hi)
    } else {
        (lambda_min, g_lo)
    };
    let sign = if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    };
    (0..f.coeffs.len())
        .map(|k| sign * k as f64 * lambda.powi(k as i32))
        .collect()
}

/// Outcome of comparing `‖H(S̃) − H(S)‖_op` with its first-order bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub difference: f64,
    pub lipschitz: LipschitzConstant,
    pub epsilon: f64,
    /// `Cε`, plus `a·ε²` unless the filter has a single tap.
    pub bound: f64,
    /// Single-tap filters are held to `Cε` with no second-order slack.
    pub strict: bool,
    pub holds: bool,
}

/// Tolerance used on the strict single-tap bound.
pub const STRICT_TOL: f64 = 1e-8;

pub fn check_prop1_bound(
    f: &GraphFilter,
    s: &ShiftOperator,
    s_tilde: &ShiftOperator,
    epsilon: f64,
    slack: f64,
) -> Prop1Report {
    let lo = s.spectrum().lambda_min().min(s_tilde.spectrum().lambda_min());
    let hi = s.spectrum().lambda_max().max(s_tilde.spectrum().lambda_max());
    let lipschitz = integral_lipschitz_constant(f, lo, hi);
    let difference = symmetric_op_norm(&(f.matrix(s_tilde) - f.matrix(s)));
    let strict = f.order() <= 1;
    let first = lipschitz.value() * epsilon;
    let (bound, tol) = if strict {
        (first, STRICT_TOL)
    } else {
        (first + slack * epsilon * epsilon, 0.0)
    };
    Prop1Report {
        difference,
        lipschitz,
        epsilon,
        bound,
        strict,
        holds: difference <= bound + tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gso::GsoKind;

    fn ones2() -> ShiftOperator {
        ShiftOperator::new(DMatrix::from_element(2, 2, 1.0), GsoKind::Custom).unwrap()
    }

    #[test]
    fn apply_cases() {
        let s = ones2();
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(GraphFilter::identity().apply(&s, &x).unwrap(), x);
        assert_eq!(
            GraphFilter::new(vec![0.0, 1.0]).apply(&s, &x).unwrap(),
            DVector::from_vec(vec![1.0, 1.0])
        );
        assert_eq!(
            GraphFilter::new(vec![0.0, 0.0, 1.0]).apply(&s, &x).unwrap(),
            DVector::from_vec(vec![2.0, 2.0])
        );
        assert!(GraphFilter::identity()
            .apply(&s, &DVector::zeros(3))
            .is_err());
    }

    #[test]
    fn frequency_response_cases() {
        assert_eq!(GraphFilter::new(vec![1.0]).frequency_response(7.0), 1.0);
        assert_eq!(GraphFilter::new(vec![0.0, 1.0]).frequency_response(2.0), 2.0);
        assert_eq!(GraphFilter::new(vec![1.0, 2.0, 3.0]).frequency_response(2.0), 17.0);
    }

    #[test]
    fn lipschitz_cases() {
        let c = integral_lipschitz_constant(&GraphFilter::new(vec![3.0]), 0.0, 2.0);
        assert_eq!(c.value(), 0.0);
        let c = integral_lipschitz_constant(&GraphFilter::new(vec![0.0, 1.0]), 0.0, 2.0);
        assert_eq!(c.endpoint, 2.0);
        let c = integral_lipschitz_constant(&GraphFilter::new(vec![0.0, 0.0, 1.0]), 0.0, 1.0);
        assert_eq!(c.endpoint, 2.0);
        assert!((c.grid - 2.0).abs() < 1e-12);
    }

    #[test]
    fn grid_exceeds_endpoint_for_interior_peak() {
        // λh'(λ) = λ - λ² peaks at λ = 1/2 with value 1/4 and vanishes at 0 and 1.
        let f = GraphFilter::new(vec![0.0, 1.0, -0.5]);
        let c = integral_lipschitz_constant(&f, 0.0, 1.0);
        assert_eq!(c.endpoint, 0.0);
        assert!((c.grid - 0.25).abs() < 1e-6);
        assert_eq!(c.value(), c.grid);
    }

    #[test]
    fn endpoint_gradient_matches_differences() {
        let f = GraphFilter::new(vec![0.3, -0.7, 0.4, 0.2]);
        let g = endpoint_lipschitz_gradient(&f, 0.1, 1.8);
        let h = 1e-6;
        for k in 0..4 {
            let mut up = f.clone();
            up.coeffs[k] += h;
            let mut dn = f.clone();
            dn.coeffs[k] -= h;
            let fd = (integral_lipschitz_constant(&up, 0.1, 1.8).endpoint
                - integral_lipschitz_constant(&dn, 0.1, 1.8).endpoint)
                / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn normalize_cases() {
        let s = ShiftOperator::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 2.0])),
            GsoKind::Custom,
        )
        .unwrap();
        assert_eq!(GraphFilter::new(vec![2.0]).normalize(&s).coeffs, vec![1.0]);
        assert_eq!(GraphFilter::new(vec![0.0, 1.0]).normalize(&s).coeffs, vec![0.0, 0.5]);
        assert_eq!(GraphFilter::new(vec![0.1]).normalize(&s).coeffs, vec![0.1]);
        assert_eq!(GraphFilter::new(vec![0.0, 0.0]).normalize(&s).coeffs, vec![0.0, 0.0]);
    }

    #[test]
    fn spectral_mapping() {
        let s = ShiftOperator::new(
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]),
            GsoKind::Custom,
        )
        .unwrap();
        let f = GraphFilter::new(vec![0.5, -0.3, 0.1, 0.02]);
        let mut got = crate::spectral::symmetric_eigenvalues(&f.matrix(&s));
        let mut want: Vec<f64> = s
            .spectrum()
            .eigenvalues
            .iter()
            .map(|&l| f.frequency_response(l))
            .collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn prop1_dilation_is_tight() {
        let s = ShiftOperator::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0, 2.0])),
            GsoKind::Custom,
        )
        .unwrap();
        let eps = 0.01;
        let st = s.scaled(1.0 + eps).unwrap();
        let r = check_prop1_bound(&GraphFilter::new(vec![0.0, 1.0]), &s, &st, eps, DEFAULT_SLACK);
        assert!(r.strict && r.holds);
        assert!((r.difference - eps * 2.0).abs() < 1e-14);
        // C uses the hull of both spectra, so the bound sits at (1+ε)λ_max ε.
        assert!((r.bound - eps * 2.0 * (1.0 + eps)).abs() < 1e-14);

        let r = check_prop1_bound(&GraphFilter::identity(), &s, &st, eps, DEFAULT_SLACK);
        assert_eq!(r.difference, 0.0);
    }
}
