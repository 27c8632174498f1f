use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::symmetric_op_norm;
use crate::error::{Error, Result};
use crate::gso::{symmetrize, GsoKind, ShiftOperator, SYMMETRY_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    Relative,
    Additive,
    Combined,
}

/// A perturbed operator with the similarity bound claimed for it.
#[derive(Clone, Debug)]
pub struct Perturbed {
    pub operator: ShiftOperator,
    pub kind: PerturbationKind,
    /// `δ_R + δ_A / λ̄(S)`.
    pub bound: f64,
    /// `δ_R √(λ_max/λ̄) + δ_A / λ̄`, valid without commutation assumptions.
    pub general_bound: f64,
}

/// Relative slack on the stated norm bounds.
const NORM_SLACK: f64 = 1e-12;
const KERNEL_TOL: f64 = 1e-9;

fn check_symmetric_bounded(m: &DMatrix<f64>, n: usize, delta: f64) -> Result<DMatrix<f64>> {
    if m.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.nrows(),
        });
    }
    let sym = symmetrize(m);
    let norm = symmetric_op_norm(&sym);
    let asymmetry = (m - &sym).norm();
    if asymmetry > SYMMETRY_TOL * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric {
            asymmetry,
            tolerance: SYMMETRY_TOL * norm,
        });
    }
    if norm > delta * (1.0 + NORM_SLACK) {
        return Err(Error::PerturbationTooLarge { norm, delta });
    }
    Ok(sym)
}

fn check_kernel(s: &ShiftOperator, d: &DMatrix<f64>) -> Result<()> {
    let sp = s.spectrum();
    if sp.zero_multiplicity == 0 {
        return Ok(());
    }
    let residual = (d * sp.kernel_basis()).norm();
    if residual > KERNEL_TOL * sp.lambda_max().max(1.0) {
        return Err(Error::KernelCondition { residual });
    }
    Ok(())
}

fn lambda_bar(s: &ShiftOperator) -> Result<f64> {
    s.spectrum()
        .lambda_bar()
        .ok_or_else(|| Error::InvalidArgument("operator has no nonzero eigenvalue".into()))
}

fn finish(
    s: &ShiftOperator,
    m: DMatrix<f64>,
    kind: PerturbationKind,
    delta_r: f64,
    delta_a: f64,
) -> Result<Perturbed> {
    let lbar = lambda_bar(s)?;
    let operator = ShiftOperator::new(m, GsoKind::Custom)?;
    if !operator.spectrum().is_psd() {
        return Err(Error::PerturbedNotPsd {
            min_eigenvalue: operator.spectrum().lambda_min(),
        });
    }
    Ok(Perturbed {
        operator,
        kind,
        bound: delta_r + delta_a / lbar,
        general_bound: relative_bound_general(s, delta_r)? + delta_a / lbar,
    })
}

fn relative_term(s: &DMatrix<f64>, e: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&(s * e)) // ½(SE + ES) since (SE)ᵀ = ES
}

/// `S̃ = S + ½(SE + ES)` with `‖E‖_op ≤ δ`, claimed bound `δ`.
pub fn perturb_relative(s: &ShiftOperator, e: &DMatrix<f64>, delta: f64) -> Result<Perturbed> {
    let e = check_symmetric_bounded(e, s.size(), delta)?;
    let m = s.matrix() + relative_term(s.matrix(), &e);
    finish(s, m, PerturbationKind::Relative, delta, 0.0)
}

/// `S̃ = S + D` with `‖D‖_op ≤ δ` and `ker(D) ⊇ ker(S)`, bound `δ / λ̄(S)`.
pub fn perturb_additive(s: &ShiftOperator, d: &DMatrix<f64>, delta: f64) -> Result<Perturbed> {
    let d = check_symmetric_bounded(d, s.size(), delta)?;
    check_kernel(s, &d)?;
    finish(s, s.matrix() + d, PerturbationKind::Additive, 0.0, delta)
}

/// `S̃ = S + ½(SE + ES) + D`, bound `δ_R + δ_A / λ̄(S)`.
pub fn perturb_combined(
    s: &ShiftOperator,
    e: &DMatrix<f64>,
    delta_r: f64,
    d: &DMatrix<f64>,
    delta_a: f64,
) -> Result<Perturbed> {
    let e = check_symmetric_bounded(e, s.size(), delta_r)?;
    let d = check_symmetric_bounded(d, s.size(), delta_a)?;
    check_kernel(s, &d)?;
    let m = s.matrix() + relative_term(s.matrix(), &e) + d;
    finish(s, m, PerturbationKind::Combined, delta_r, delta_a)
}

/// `δ √(λ_max / λ̄)`: a relative-perturbation bound that holds for any
/// symmetric `E` with `‖E‖_op ≤ δ` acting on the range of `S`.
///
/// On the range, `Λ^{-1/2} (ΛE + EΛ) Λ^{-1/2} / 2` is a Schur product of `E`
/// with `(√(λᵢ/λⱼ) + √(λⱼ/λᵢ)) / 2`, whose multiplier norm is at most
/// `√(λ_max/λ̄)`.
pub fn relative_bound_general(s: &ShiftOperator, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Ok(0.0);
    }
    let lbar = lambda_bar(s)?;
    Ok(delta * (s.spectrum().lambda_max() / lbar).sqrt())
}

/// Symmetric Gaussian matrix (GOE-like), unscaled.
pub fn random_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    symmetrize(&g)
}

fn rescale(m: DMatrix<f64>, target: f64) -> DMatrix<f64> {
    let norm = symmetric_op_norm(&m);
    if norm == 0.0 {
        m
    } else {
        // Stay a hair inside the bound so rounding never trips the norm check.
        m * (target / norm * (1.0 - 1e-14))
    }
}

/// Random relative perturbation with `‖E‖_op = δ`.
///
/// The block of `E` coupling `ker(S)` with its complement is removed, so `S̃`
/// keeps the kernel of `S`.
pub fn random_relative<R: Rng + ?Sized>(s: &ShiftOperator, delta: f64, rng: &mut R) -> DMatrix<f64> {
    let g = random_symmetric(s.size(), rng);
    let sp = s.spectrum();
    let e = if sp.zero_multiplicity == 0 {
        g
    } else {
        let pr = sp.range_projector();
        let pk = DMatrix::identity(s.size(), s.size()) - &pr;
        symmetrize(&(&pr * &g * &pr + &pk * &g * &pk))
    };
    rescale(e, delta)
}

/// Random additive perturbation supported on the range of `S`, `‖D‖_op = δ`.
pub fn random_additive<R: Rng + ?Sized>(s: &ShiftOperator, delta: f64, rng: &mut R) -> DMatrix<f64> {
    let g = random_symmetric(s.size(), rng);
    let sp = s.spectrum();
    let d = if sp.zero_multiplicity == 0 {
        g
    } else {
        let pr = sp.range_projector();
        symmetrize(&(&pr * g * &pr))
    };
    rescale(d, delta)
}
