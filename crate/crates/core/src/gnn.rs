//! Multi-layer polynomial-filter GNNs on a single shift operator.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{integral_lipschitz_constant, GraphFilter, LipschitzConstant};
use crate::gso::ShiftOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nonlinearity {
    Relu,
    Tanh,
    /// `1/(1+e^{-x}) − 1/2`, so that σ(0) = 0.
    SigmoidNormalized,
    Identity,
}

impl Nonlinearity {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Relu => x.max(0.0),
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::SigmoidNormalized => 1.0 / (1.0 + (-x).exp()) - 0.5,
            Nonlinearity::Identity => x,
        }
    }

    /// Derivative at `x`; ReLU uses 0 at the kink.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Relu => (x > 0.0) as u8 as f64,
            Nonlinearity::Tanh => 1.0 - x.tanh().powi(2),
            Nonlinearity::SigmoidNormalized => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
            Nonlinearity::Identity => 1.0,
        }
    }
}

/// One layer: `X_out = σ(Σ_k S^k X_in H_k)` with `H_k` of shape `f_in × f_out`.
///
/// Entry `(j, i)` of `taps[k]` is the coefficient `h_k^{ij}` of the filter
/// from input feature `j` to output feature `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnnLayer {
    pub taps: Vec<DMatrix<f64>>,
}

impl GnnLayer {
    pub fn zeros(f_in: usize, f_out: usize, taps: usize) -> Self {
        Self {
            taps: vec![DMatrix::zeros(f_in, f_out); taps],
        }
    }

    pub fn f_in(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn f_out(&self) -> usize {
        self.taps[0].ncols()
    }

    pub fn filter(&self, i: usize, j: usize) -> GraphFilter {
        GraphFilter::new(self.taps.iter().map(|h| h[(j, i)]).collect())
    }

    pub fn set_filter(&mut self, i: usize, j: usize, f: &GraphFilter) {
        for (h, &c) in self.taps.iter_mut().zip(&f.coeffs) {
            h[(j, i)] = c;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnnModel {
    pub layers: Vec<GnnLayer>,
    pub nonlinearity: Nonlinearity,
    /// Apply σ after the final layer too. On by default; turn off for logits.
    pub activate_output: bool,
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `shifts[l][k] = S^k X_l`.
    shifts: Vec<Vec<DMatrix<f64>>>,
    pre: Vec<DMatrix<f64>>,
    pub output: DMatrix<f64>,
}

impl GnnModel {
    pub fn new(layers: Vec<GnnLayer>, nonlinearity: Nonlinearity) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a GNN needs at least one layer".into()));
        }
        for (l, w) in layers.windows(2).enumerate() {
            if w[0].f_out() != w[1].f_in() {
                return Err(Error::InvalidArgument(format!(
                    "layer {} outputs {} features but layer {} expects {}",
                    l,
                    w[0].f_out(),
                    l + 1,
                    w[1].f_in()
                )));
            }
        }
        for (l, layer) in layers.iter().enumerate() {
            let shape = layer.taps[0].shape();
            if layer.taps.iter().any(|h| h.shape() != shape) {
                return Err(Error::InvalidArgument(format!("layer {l} has ragged taps")));
            }
        }
        Ok(Self {
            layers,
            nonlinearity,
            activate_output: true,
        })
    }

    /// All-zero model with the given feature widths `(f_0, …, f_L)` and
    /// `taps = K + 1` coefficients per filter.
    pub fn zeros(widths: &[usize], taps: usize, nonlinearity: Nonlinearity) -> Result<Self> {
        if widths.len() < 2 || taps == 0 {
            return Err(Error::InvalidArgument(
                "need at least two widths and one tap".into(),
            ));
        }
        let layers = widths
            .windows(2)
            .map(|w| GnnLayer::zeros(w[0], w[1], taps))
            .collect();
        Self::new(layers, nonlinearity)
    }

    /// Coefficients drawn uniformly from `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(
        widths: &[usize],
        taps: usize,
        nonlinearity: Nonlinearity,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut m = Self::zeros(widths, taps, nonlinearity)?;
        for layer in &mut m.layers {
            for h in &mut layer.taps {
                h.iter_mut().for_each(|c| *c = rng.random_range(-scale..=scale));
            }
        }
        Ok(m)
    }

    pub fn with_output_activation(mut self, on: bool) -> Self {
        self.activate_output = on;
        self
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn feature_counts(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].f_in())
            .chain(self.layers.iter().map(GnnLayer::f_out))
            .collect()
    }

    pub fn taps(&self) -> usize {
        self.layers[0].taps.len()
    }

    fn activated(&self, l: usize) -> bool {
        self.activate_output || l + 1 < self.layers.len()
    }

    /// Every per-(layer, output, input) filter.
    pub fn filters(&self) -> impl Iterator<Item = GraphFilter> + '_ {
        self.layers.iter().flat_map(|layer| {
            (0..layer.f_out()).flat_map(move |i| (0..layer.f_in()).map(move |j| layer.filter(i, j)))
        })
    }

    pub fn map_filters(&mut self, mut f: impl FnMut(&GraphFilter) -> GraphFilter) {
        for layer in &mut self.layers {
            for i in 0..layer.f_out() {
                for j in 0..layer.f_in() {
                    let g = f(&layer.filter(i, j));
                    layer.set_filter(i, j, &g);
                }
            }
        }
    }

    /// Rescales every filter so that `|h(λ)| ≤ 1` on the given eigenvalues.
    pub fn normalize_on(&mut self, eigenvalues: &[f64]) {
        self.map_filters(|f| f.normalized_on(eigenvalues));
    }

    /// Largest integral Lipschitz constant over all filters.
    pub fn max_lipschitz(&self, lambda_min: f64, lambda_max: f64) -> f64 {
        self.filters()
            .map(|f| integral_lipschitz_constant(&f, lambda_min, lambda_max).value())
            .fold(0.0, f64::max)
    }

    pub fn lipschitz_constants(&self, lambda_min: f64, lambda_max: f64) -> Vec<LipschitzConstant> {
        self.filters()
            .map(|f| integral_lipschitz_constant(&f, lambda_min, lambda_max))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.taps.len() * l.f_in() * l.f_out())
            .sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.taps.iter().flat_map(|h| h.iter().copied()))
            .collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut it = p.iter();
        for layer in &mut self.layers {
            for h in &mut layer.taps {
                h.iter_mut().for_each(|c| *c = *it.next().unwrap());
            }
        }
    }

    fn check_input(&self, s: &ShiftOperator, x: &DMatrix<f64>) -> Result<()> {
        if x.nrows() != s.size() {
            return Err(Error::DimensionMismatch {
                expected: s.size(),
                found: x.nrows(),
            });
        }
        if x.ncols() != self.layers[0].f_in() {
            return Err(Error::DimensionMismatch {
                expected: self.layers[0].f_in(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, s: &ShiftOperator, x0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.forward_cached(s, x0)?.output)
    }

    pub fn forward_cached(&self, s: &ShiftOperator, x0: &DMatrix<f64>) -> Result<ForwardCache> {
        self.check_input(s, x0)?;
        let mut shifts = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = x0.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.taps.len());
            z.push(x);
            for _ in 1..layer.taps.len() {
                let next = s.shift(z.last().unwrap());
                z.push(next);
            }
            let mut p = DMatrix::zeros(s.size(), layer.f_out());
            for (zk, hk) in z.iter().zip(&layer.taps) {
                p += zk * hk;
            }
            x = if self.activated(l) {
                p.map(|v| self.nonlinearity.apply(v))
            } else {
                p.clone()
            };
            shifts.push(z);
            pre.push(p);
        }
        Ok(ForwardCache {
            shifts,
            pre,
            output: x,
        })
    }

    /// Reverse-mode gradients given `∂loss/∂output`. Returns the parameter
    /// gradient (same layout as [`GnnModel::params`]) and `∂loss/∂x0`.
    pub fn backward(
        &self,
        s: &ShiftOperator,
        cache: &ForwardCache,
        upstream: &DMatrix<f64>,
    ) -> (Vec<f64>, DMatrix<f64>) {
        let mut grads: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(self.layers.len());
        let mut g = upstream.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let d_pre = if self.activated(l) {
                g.zip_map(&cache.pre[l], |a, p| a * self.nonlinearity.derivative(p))
            } else {
                g
            };
            let layer_grads: Vec<DMatrix<f64>> =
                cache.shifts[l].iter().map(|z| z.tr_mul(&d_pre)).collect();
            // Σ_k S^k d_pre H_kᵀ by Horner in S.
            let mut acc = &d_pre * layer.taps.last().unwrap().transpose();
            for hk in layer.taps.iter().rev().skip(1) {
                acc = s.shift(&acc) + &d_pre * hk.transpose();
            }
            g = acc;
            grads.push(layer_grads);
        }
        grads.reverse();
        let flat = grads
            .iter()
            .flat_map(|l| l.iter().flat_map(|h| h.iter().copied()))
            .collect();
        (flat, g)
    }
}

/// `C·L·f^L·ε` for uniform widths, otherwise `C·L·ε·Π_{s=0}^{L} f_s`.
pub fn transferability_bound(widths: &[usize], epsilon: f64, c: f64) -> f64 {
    let l = widths.len().saturating_sub(1);
    let uniform = widths.windows(2).all(|w| w[0] == w[1]);
    let width_factor = if uniform {
        (widths[0] as f64).powi(l as i32)
    } else {
        widths.iter().map(|&f| f as f64).product()
    };
    c * l as f64 * width_factor * epsilon
}

/// Monte Carlo comparison of `‖Φ(x; S) − Φ(x; S̃)‖` with the bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub trials: usize,
    pub max_deviation: f64,
    pub lipschitz: f64,
    pub epsilon: f64,
    pub bound: f64,
    /// Bound plus `slack · ε²`.
    pub threshold: f64,
    pub violations: usize,
}

impl Theorem1Report {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

pub fn check_theorem1<R: Rng + ?Sized>(
    model: &GnnModel,
    s: &ShiftOperator,
    s_tilde: &ShiftOperator,
    epsilon: f64,
    trials: usize,
    slack: f64,
    rng: &mut R,
) -> Result<Theorem1Report> {
    let lo = s.spectrum().lambda_min().min(s_tilde.spectrum().lambda_min());
    let hi = s.spectrum().lambda_max().max(s_tilde.spectrum().lambda_max());
    let lipschitz = model.max_lipschitz(lo, hi);
    let bound = transferability_bound(&model.feature_counts(), epsilon, lipschitz);
    let threshold = bound + slack * epsilon * epsilon;
    let f0 = model.layers[0].f_in();
    let mut max_deviation: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..trials {
        let x = random_unit(s.size(), f0, rng);
        let d = (model.forward(s, &x)? - model.forward(s_tilde, &x)?).norm();
        max_deviation = max_deviation.max(d);
        violations += (d > threshold) as usize;
    }
    Ok(Theorem1Report {
        trials,
        max_deviation,
        lipschitz,
        epsilon,
        bound,
        threshold,
        violations,
    })
}

/// Gaussian direction scaled to unit Frobenius norm.
pub fn random_unit<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let x = DMatrix::<f64>::from_fn(rows, cols, |_, _| rng.sample(rand_distr::StandardNormal));
    let n = x.norm();
    x / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gso::GsoKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ones2() -> ShiftOperator {
        ShiftOperator::new(DMatrix::from_element(2, 2, 1.0), GsoKind::Custom).unwrap()
    }

    fn scalar_model(coeffs: &[&[f64]], nl: Nonlinearity) -> GnnModel {
        let layers = coeffs
            .iter()
            .map(|c| GnnLayer {
                taps: c.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
            })
            .collect();
        GnnModel::new(layers, nl).unwrap()
    }

    #[test]
    fn forward_cases() {
        let s = ones2();
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let id = scalar_model(&[&[1.0]], Nonlinearity::Identity);
        assert_eq!(id.forward(&s, &x).unwrap(), x);

        let shift = scalar_model(&[&[0.0, 1.0]], Nonlinearity::Relu);
        let xp = DMatrix::from_column_slice(2, 1, &[0.3, 2.0]);
        assert_eq!(shift.forward(&s, &xp).unwrap(), s.matrix() * &xp);

        let two = scalar_model(&[&[0.0, 1.0], &[0.0, 1.0]], Nonlinearity::Identity);
        assert_eq!(
            two.forward(&s, &x).unwrap(),
            DMatrix::from_column_slice(2, 1, &[2.0, 2.0])
        );
        assert!(two.forward(&s, &DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn nonlinearities_are_normalized() {
        for nl in [
            Nonlinearity::Relu,
            Nonlinearity::Tanh,
            Nonlinearity::SigmoidNormalized,
            Nonlinearity::Identity,
        ] {
            assert_eq!(nl.apply(0.0), 0.0);
        }
    }

    #[test]
    fn single_parameter_gradient_closed_form() {
        let s = ShiftOperator::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]),
            GsoKind::Custom,
        )
        .unwrap();
        let x = DMatrix::from_column_slice(2, 1, &[1.0, -2.0]);
        let t = DMatrix::from_column_slice(2, 1, &[0.5, 0.25]);
        let h1 = 0.7;
        let m = scalar_model(&[&[0.0, h1]], Nonlinearity::Identity);
        let cache = m.forward_cached(&s, &x).unwrap();
        let (g, _) = m.backward(&s, &cache, &(&cache.output - &t));
        let sx = s.matrix() * &x;
        let want = (&sx * h1 - &t).dot(&sx);
        assert!((g[1] - want).abs() < 1e-12);
    }

    #[test]
    fn identity_network_at_optimum_has_zero_gradient() {
        let s = ones2();
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 0.5]);
        let m = scalar_model(&[&[1.0, 0.0]], Nonlinearity::Identity);
        let cache = m.forward_cached(&s, &x).unwrap();
        let (g, _) = m.backward(&s, &cache, &(&cache.output - &x));
        assert!(g.iter().all(|&v| v == 0.0));
    }

    fn finite_difference_check(nl: Nonlinearity, activate_output: bool, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 6;
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
        let s = ShiftOperator::new(&a * a.transpose() / n as f64, GsoKind::Custom).unwrap();
        let m = GnnModel::random(&[2, 3, 2], 3, nl, 0.8, &mut rng)
            .unwrap()
            .with_output_activation(activate_output);
        let x = DMatrix::<f64>::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let w = DMatrix::<f64>::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let loss = |m: &GnnModel| m.forward(&s, &x).unwrap().dot(&w);
        let cache = m.forward_cached(&s, &x).unwrap();
        let (g, gx) = m.backward(&s, &cache, &w);
        let p = m.params();
        let h = 1e-5;
        for i in 0..p.len() {
            let mut up = m.clone();
            let mut q = p.clone();
            q[i] += h;
            up.set_params(&q);
            let mut dn = m.clone();
            q[i] -= 2.0 * h;
            dn.set_params(&q);
            let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
            let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6);
            assert!(err < 1e-4, "param {i}: fd {fd} vs {}", g[i]);
        }
        for r in 0..n {
            for c in 0..2 {
                let mut xp = x.clone();
                xp[(r, c)] += h;
                let mut xm = x.clone();
                xm[(r, c)] -= h;
                let fd = (m.forward(&s, &xp).unwrap().dot(&w) - m.forward(&s, &xm).unwrap().dot(&w))
                    / (2.0 * h);
                assert!((fd - gx[(r, c)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        finite_difference_check(Nonlinearity::Tanh, true, 1);
        finite_difference_check(Nonlinearity::SigmoidNormalized, false, 2);
        finite_difference_check(Nonlinearity::Identity, true, 3);
        finite_difference_check(Nonlinearity::Relu, false, 4);
    }

    #[test]
    fn bound_formula() {
        assert!((transferability_bound(&[3, 3, 3], 0.01, 2.0) - 0.36).abs() < 1e-15);
        assert_eq!(transferability_bound(&[3, 3, 3], 0.0, 2.0), 0.0);
        assert_eq!(transferability_bound(&[1, 1], 0.1, 2.0), 0.2);
        assert_eq!(transferability_bound(&[1, 2, 3], 0.1, 1.0), 0.1 * 2.0 * 6.0);
    }

    #[test]
    fn params_round_trip_and_filters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = GnnModel::random(&[1, 2, 3], 2, Nonlinearity::Relu, 1.0, &mut rng).unwrap();
        let mut z = GnnModel::zeros(&[1, 2, 3], 2, Nonlinearity::Relu).unwrap();
        z.set_params(&m.params());
        assert_eq!(z, m);
        assert_eq!(m.filters().count(), 2 + 6);
        assert_eq!(m.feature_counts(), vec![1, 2, 3]);
        assert!(GnnModel::new(
            vec![GnnLayer::zeros(1, 2, 2), GnnLayer::zeros(3, 1, 2)],
            Nonlinearity::Relu
        )
        .is_err());
    }

    #[test]
    fn theorem1_identical_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = ones2();
        let m = GnnModel::random(&[2, 2, 2], 3, Nonlinearity::Tanh, 0.5, &mut rng).unwrap();
        let r = check_theorem1(&m, &s, &s, 0.0, 10, 2.0, &mut rng).unwrap();
        assert_eq!(r.max_deviation, 0.0);
        assert!(r.holds());
    }
}
