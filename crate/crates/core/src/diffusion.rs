//! The max-pair hypergraph energy, its (sub)gradient, and explicit diffusion.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;

pub const DEFAULT_STEP_SIZE: f64 = 0.05;
pub const DEFAULT_STEPS: usize = 30;

/// Positions of the largest and smallest entries of `x` over `e`, taking the
/// smallest node index among equal values.
fn extreme_pair(e: &[usize], x: &DVector<f64>) -> (usize, usize) {
    let mut hi = e[0];
    let mut lo = e[0];
    for &i in &e[1..] {
        if x[i] > x[hi] || (x[i] == x[hi] && i < hi) {
            hi = i;
        }
        if x[i] < x[lo] || (x[i] == x[lo] && i < lo) {
            lo = i;
        }
    }
    (hi, lo)
}

/// `Q(x) = Σ_e max_{i,j ∈ e} (x_i − x_j)²`.
pub fn energy(h: &Hypergraph, x: &DVector<f64>) -> f64 {
    h.edges()
        .iter()
        .map(|e| {
            let (hi, lo) = extreme_pair(e, x);
            (x[hi] - x[lo]).powi(2)
        })
        .sum()
}

/// `½∇Q`: each hyperedge pushes `+(x_hi − x_lo)` onto its largest entry and
/// the negative onto its smallest.
pub fn hypergraph_laplacian(h: &Hypergraph, x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    for e in h.edges() {
        let (hi, lo) = extreme_pair(e, x);
        let d = x[hi] - x[lo];
        if d > 0.0 {
            out[hi] += d;
            out[lo] -= d;
        }
    }
    out
}

/// Explicit Euler steps `x_{t+1} = x_t − η 𝓛(x_t)`. Returns `steps + 1`
/// states, starting with `x0`.
pub fn diffuse(h: &Hypergraph, x0: &DVector<f64>, steps: usize, step_size: f64) -> Result<Vec<DVector<f64>>> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {step_size}"
        )));
    }
    if x0.len() != h.n() {
        return Err(Error::DimensionMismatch {
            expected: h.n(),
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: 0 });
    }
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(x0.clone());
    let mut q = energy(h, x0);
    let mut warned = false;
    for t in 1..=steps {
        let x = traj.last().unwrap();
        let next = x - hypergraph_laplacian(h, x) * step_size;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: t });
        }
        let qn = energy(h, &next);
        if qn > q * (1.0 + 1e-12) && !warned {
            log::warn!("energy increased at step {t} ({q:e} -> {qn:e}); step size {step_size} may be too large");
            warned = true;
        }
        q = qn;
        traj.push(next);
    }
    Ok(traj)
}
