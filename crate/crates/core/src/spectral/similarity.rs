use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    eigendecompose_in_order, joint_canonical_order, refined_colours, reorder, symmetric_eigenvalues,
    Spectrum,
};
use crate::error::{Error, Result};
use crate::gso::ShiftOperator;

/// Slack added to ε when certifying the PSD sandwich.
pub const CERTIFY_TOL: f64 = 1e-9;
/// Relative tolerance for `S̃` annihilating `ker(S)`.
const KERNEL_ALIGN_TOL: f64 = 1e-8;

/// Spectral similarity of a pair of shift operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    /// Smallest ε with `(1−ε) S ⪯ S̃ ⪯ (1+ε) S` on the range of `S`.
    /// Infinite when the kernel dimensions differ.
    #[serde(with = "crate::serde_inf")]
    pub epsilon: f64,
    pub mu_max: Option<f64>,
    pub mu_min: Option<f64>,
    pub zero_mult_s: usize,
    pub zero_mult_s_tilde: usize,
    /// Whether `S̃` vanishes on `ker(S)`. When false the sandwich fails on the
    /// kernel and `epsilon` only describes the range of `S`.
    pub kernel_aligned: bool,
    /// Both `(1+ε+τ)S − S̃` and `S̃ − (1−ε−τ)S` were verified PSD.
    pub certified: bool,
    /// Rayleigh quotients `vᵢᵀ S̃ vᵢ / λᵢ` over the nonzero eigenpairs of `S`.
    pub per_eigen_ratios: Vec<f64>,
}

impl SimilarityReport {
    fn unsatisfiable(zero_mult_s: usize, zero_mult_s_tilde: usize) -> Self {
        Self {
            epsilon: f64::INFINITY,
            mu_max: None,
            mu_min: None,
            zero_mult_s,
            zero_mult_s_tilde,
            kernel_aligned: false,
            certified: false,
            per_eigen_ratios: Vec::new(),
        }
    }
}

fn require_psd(s: &ShiftOperator) -> Result<()> {
    if s.spectrum().is_psd() {
        Ok(())
    } else {
        Err(Error::NotPsd {
            min_eigenvalue: s.spectrum().lambda_min(),
        })
    }
}

/// Computes ε from the generalized eigenvalues of the pencil `(S̃, S)` on the
/// range of `S`.
///
/// The pencil is formed from `S̃ − S` rather than `S̃` so that a dilation
/// `(1+δ)S` yields δ to near machine precision.
pub fn spectral_similarity(s: &ShiftOperator, s_tilde: &ShiftOperator) -> Result<SimilarityReport> {
    if s.size() != s_tilde.size() {
        return Err(Error::DimensionMismatch {
            expected: s.size(),
            found: s_tilde.size(),
        });
    }
    require_psd(s)?;
    require_psd(s_tilde)?;
    let sp = s.spectrum();
    let spt = s_tilde.spectrum();
    if sp.zero_multiplicity != spt.zero_multiplicity {
        return Ok(SimilarityReport::unsatisfiable(
            sp.zero_multiplicity,
            spt.zero_multiplicity,
        ));
    }

    // Everything below runs in the canonical order of the pair, so
    // relabelling both operators by one permutation gives bit-identical
    // results. The cached spectrum of `S` is reused when colour refinement
    // alone fixes its labelling; otherwise a tie could have been broken in a
    // way that does not respect `S̃`, and `S` is decomposed again.
    let order = joint_canonical_order(s.matrix(), s_tilde.matrix());
    let s_c = reorder(s.matrix(), &order);
    let st_c = reorder(s_tilde.matrix(), &order);
    let colours = refined_colours(s.matrix());
    let discrete = colours.iter().collect::<std::collections::BTreeSet<_>>().len() == s.size();
    let sp_c = if discrete || s.size() == 0 {
        Spectrum {
            eigenvectors: sp.eigenvectors.select_rows(&order),
            ..sp.clone()
        }
    } else {
        eigendecompose_in_order(&s_c)
    };
    let sp = &sp_c;
    let kernel_aligned = sp.zero_multiplicity == 0 || {
        let leak = (&st_c * sp.kernel_basis()).norm();
        leak <= KERNEL_ALIGN_TOL * spt.lambda_max().max(1.0)
    };

    let idx = sp.range_indices();
    let u = sp.eigenvectors.select_columns(&idx);
    let scale: Vec<f64> = idx.iter().map(|&i| sp.eigenvalues[i].sqrt().recip()).collect();
    let diff = &st_c - &s_c;
    let t = u.transpose() * diff * &u;
    let r = idx.len();
    let m = DMatrix::from_fn(r, r, |i, j| {
        0.5 * (t[(i, j)] + t[(j, i)]) * (scale[i] * scale[j])
    });
    let nu = symmetric_eigenvalues(&m);
    let (nu_min, nu_max) = match (nu.first(), nu.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (0.0, 0.0),
    };
    let epsilon = nu_max.max(-nu_min).max(0.0);
    let per_eigen_ratios = (0..r).map(|i| 1.0 + m[(i, i)]).collect();

    let certified = kernel_aligned && {
        let (upper, lower) = sandwich_min_eigenvalues(&s_c, &st_c, epsilon + CERTIFY_TOL);
        let floor = -CERTIFY_TOL * sp.lambda_max().max(1.0);
        upper >= floor && lower >= floor
    };

    Ok(SimilarityReport {
        epsilon,
        mu_max: Some(1.0 + nu_max),
        mu_min: Some(1.0 + nu_min),
        zero_mult_s: sp.zero_multiplicity,
        zero_mult_s_tilde: spt.zero_multiplicity,
        kernel_aligned,
        certified,
        per_eigen_ratios,
    })
}

/// Smallest eigenvalues of `(1+ε)S − S̃` and `S̃ − (1−ε)S`.
pub fn sandwich_min_eigenvalues(s: &DMatrix<f64>, s_tilde: &DMatrix<f64>, epsilon: f64) -> (f64, f64) {
    let upper = s * (1.0 + epsilon) - s_tilde;
    let lower = s_tilde - s * (1.0 - epsilon);
    let min = |m: DMatrix<f64>| symmetric_eigenvalues(&m)[0];
    (min(upper), min(lower))
}

/// `max_i |λᵢ(S̃)/λᵢ(S) − 1|` over the nonzero eigenvalues of `S`, paired in
/// ascending order. A lower bound on the spectral similarity coefficient.
pub fn eigenvalue_similarity(s: &Spectrum, s_tilde: &Spectrum) -> f64 {
    s.eigenvalues
        .iter()
        .zip(&s_tilde.eigenvalues)
        .filter(|(l, _)| l.abs() > s.zero_tol)
        .map(|(l, lt)| (lt / l - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Checks `(1−ε)λᵢ(S) − tol ≤ λᵢ(S̃) ≤ (1+ε)λᵢ(S) + tol` for every `i`.
pub fn satisfies_eigenvalue_sandwich(s: &Spectrum, s_tilde: &Spectrum, epsilon: f64, tol: f64) -> bool {
    s.eigenvalues
        .iter()
        .zip(&s_tilde.eigenvalues)
        .all(|(&l, &lt)| (1.0 - epsilon) * l - tol <= lt && lt <= (1.0 + epsilon) * l + tol)
}
