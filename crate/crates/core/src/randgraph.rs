//! Random graph models, empirical spectral distributions, and Monte Carlo
//! studies of how spectral similarity decays with graph size.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::gso::{normalized_laplacian, ShiftOperator};
use crate::hypergraph::Graph;
use crate::spectral::spectral_similarity;

pub const MAX_RETRIES: usize = 100;
pub const DEFAULT_SIZES: [usize; 4] = [64, 128, 256, 512];
pub const DEFAULT_TRIALS: usize = 20;

/// Erdős–Rényi `G(n, p)`.
pub fn gen_er<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("edge probability {p} outside [0, 1]")));
    }
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                g.adjacency[(i, j)] = 1.0;
                g.adjacency[(j, i)] = 1.0;
            }
        }
    }
    Ok(g)
}

/// Chung–Lu graph with `P(i ~ j) = min(1, wᵢwⱼ / Σw)`.
pub fn gen_chung_lu<R: Rng + ?Sized>(expected_degrees: &[f64], rng: &mut R) -> Result<Graph> {
    if let Some(w) = expected_degrees.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidArgument(format!("expected degree {w} must be positive")));
    }
    let total: f64 = expected_degrees.iter().sum();
    let max = expected_degrees.iter().copied().fold(0.0, f64::max);
    if max * max > total {
        return Err(Error::InvalidArgument(format!(
            "max expected degree squared {} exceeds the degree sum {total}",
            max * max
        )));
    }
    let n = expected_degrees.len();
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            let p = (expected_degrees[i] * expected_degrees[j] / total).min(1.0);
            if rng.random::<f64>() < p {
                g.adjacency[(i, j)] = 1.0;
                g.adjacency[(j, i)] = 1.0;
            }
        }
    }
    Ok(g)
}

/// Graph sampled from a kernel `W` on `[0,1]²` at sorted uniform latent points.
pub fn gen_graphon<R, F>(n: usize, kernel: F, rng: &mut R) -> Result<Graph>
where
    R: Rng + ?Sized,
    F: Fn(f64, f64) -> f64,
{
    let mut xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    xs.sort_by(f64::total_cmp);
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            let value = kernel(xs[i], xs[j]);
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidKernel {
                    value,
                    x: xs[i],
                    y: xs[j],
                });
            }
            if rng.random::<f64>() < value {
                g.adjacency[(i, j)] = 1.0;
                g.adjacency[(j, i)] = 1.0;
            }
        }
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RandomGraphModel {
    Er {
        p: f64,
    },
    /// Expected degrees `n·pᵢ` with `pᵢ` evenly spaced over `[p_min, p_max]`.
    ChungLu {
        p_min: f64,
        p_max: f64,
    },
    /// `W(x, y) = a + b·x·y`.
    Graphon {
        a: f64,
        b: f64,
    },
}

impl RandomGraphModel {
    pub fn name(&self) -> &'static str {
        match self {
            RandomGraphModel::Er { .. } => "er",
            RandomGraphModel::ChungLu { .. } => "chung-lu",
            RandomGraphModel::Graphon { .. } => "graphon",
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Graph> {
        match *self {
            RandomGraphModel::Er { p } => gen_er(n, p, rng),
            RandomGraphModel::ChungLu { p_min, p_max } => {
                let step = if n > 1 { (p_max - p_min) / (n - 1) as f64 } else { 0.0 };
                let w: Vec<f64> = (0..n).map(|i| n as f64 * (p_min + step * i as f64)).collect();
                gen_chung_lu(&w, rng)
            }
            RandomGraphModel::Graphon { a, b } => gen_graphon(n, |x, y| a + b * x * y, rng),
        }
    }

    /// Resamples until the graph is connected.
    pub fn sample_connected<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Graph> {
        for _ in 0..MAX_RETRIES {
            let g = self.sample(n, rng)?;
            if g.is_connected() {
                return Ok(g);
            }
        }
        Err(Error::RetriesExhausted {
            attempts: MAX_RETRIES,
        })
    }
}

/// Mixes a base seed with indices into an independent stream seed.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut z = seed;
    for &p in parts {
        z = splitmix(z ^ splitmix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    z
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// How eigenvalues are mapped before comparing with the semicircle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scaling", rename_all = "kebab-case")]
pub enum EsdScaling {
    /// Eigenvalues as they are.
    None,
    /// `(1 − λ)·√w̄/2` for a normalized Laplacian with mean degree `w̄`.
    ChungLu { mean_degree: f64 },
    /// `(1 − λ)·√(w̄/(1 − p̂))/2` with `p̂ = w̄/(n − 1)`, which accounts for the
    /// `p(1 − p)` entry variance of dense graphs.
    VarianceCorrected { mean_degree: f64, n: usize },
}

impl EsdScaling {
    pub fn for_graph(g: &Graph) -> Self {
        let n = g.n();
        let mean_degree = g.degrees().iter().sum::<f64>() / n as f64;
        EsdScaling::VarianceCorrected { mean_degree, n }
    }

    fn map(&self, lambda: f64) -> f64 {
        match *self {
            EsdScaling::None => lambda,
            EsdScaling::ChungLu { mean_degree } => (1.0 - lambda) * mean_degree.sqrt() / 2.0,
            EsdScaling::VarianceCorrected { mean_degree, n } => {
                let p = mean_degree / (n as f64 - 1.0);
                (1.0 - lambda) * (mean_degree / (1.0 - p)).sqrt() / 2.0
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsdSample {
    pub eigenvalues: Vec<f64>,
    pub n: usize,
    pub scaling: EsdScaling,
}

pub fn esd(s: &ShiftOperator, scaling: &EsdScaling) -> EsdSample {
    esd_of(&s.spectrum().eigenvalues, scaling)
}

pub fn esd_of(eigenvalues: &[f64], scaling: &EsdScaling) -> EsdSample {
    let mut ev: Vec<f64> = eigenvalues.iter().map(|&l| scaling.map(l)).collect();
    ev.sort_by(f64::total_cmp);
    EsdSample {
        n: ev.len(),
        eigenvalues: ev,
        scaling: scaling.clone(),
    }
}

/// `(2/π)√(1 − x²)` on `[-1, 1]`.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        2.0 / std::f64::consts::PI * (1.0 - x * x).sqrt()
    }
}

pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) / std::f64::consts::PI
    }
}

/// Kolmogorov–Smirnov distance between the ESD and the semicircle law.
pub fn semicircle_distance(e: &EsdSample) -> f64 {
    let n = e.eigenvalues.len() as f64;
    e.eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let g = semicircle_cdf(x);
            (g - i as f64 / n).max((i + 1) as f64 / n - g)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub trial: usize,
    pub epsilon: f64,
    pub min_nonzero_eig: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub mean_epsilon: f64,
    pub sd_epsilon: f64,
    /// Smallest nonzero eigenvalue seen at this size.
    pub spectral_gap: f64,
    /// `max |λᵢ − γᵢ|` with `γᵢ` the per-index mean spectrum over trials.
    pub concentration_half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDecayStudy {
    pub model: RandomGraphModel,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<SizeSummary>,
    /// Least-squares slope of `log(mean ε)` against `log n`.
    pub slope: f64,
    /// 95% confidence interval of the slope; empty with fewer than 3 sizes.
    pub slope_ci: Option<(f64, f64)>,
}

impl SimilarityDecayStudy {
    pub fn strictly_decreasing(&self) -> bool {
        self.summaries
            .windows(2)
            .all(|w| w[1].mean_epsilon < w[0].mean_epsilon)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,trial,epsilon,min_nonzero_eig\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{:?},{:?}", r.n, r.trial, r.epsilon, r.min_nonzero_eig);
        }
        s
    }

    /// Log-log plot of mean ε with ±sd bars.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (480.0, 360.0, 50.0);
        let pts: Vec<(f64, f64, f64)> = self
            .summaries
            .iter()
            .map(|s| (s.n as f64, s.mean_epsilon, s.sd_epsilon))
            .collect();
        let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = pts
            .iter()
            .flat_map(|p| [(p.1 - p.2).max(p.1 * 0.1).ln(), (p.1 + p.2).ln()])
            .collect();
        let range = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 1.0, hi + 1.0)
            }
        };
        let (x0, x1) = range(&xs);
        let (y0, y1) = range(&ys);
        let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        );
        let _ = writeln!(
            svg,
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<line x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{}\" stroke=\"black\"/>",
            h - pad,
            w - pad,
            h - pad,
            h - pad
        );
        let path: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.0.ln()), py(p.1.ln())))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>",
            path.join(" ")
        );
        for p in &pts {
            let (cx, cy) = (px(p.0.ln()), py(p.1.ln()));
            let lo = py((p.1 - p.2).max(p.1 * 0.1).ln());
            let hi = py((p.1 + p.2).ln());
            let _ = writeln!(
                svg,
                "<line x1=\"{cx:.2}\" y1=\"{lo:.2}\" x2=\"{cx:.2}\" y2=\"{hi:.2}\" stroke=\"steelblue\"/>\n<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3\" fill=\"steelblue\"/>\n<text x=\"{cx:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
                h - pad + 16.0,
                p.0
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">n (log scale)</text>\n<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">mean epsilon (log scale)</text>\n<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{} similarity decay, slope {:.3}</text>\n</svg>",
            w / 2.0,
            h - 10.0,
            h / 2.0,
            h / 2.0,
            w / 2.0,
            self.model.name(),
            self.slope
        );
        svg
    }
}

/// Least-squares slope with a 95% confidence interval.
pub fn regression_slope(x: &[f64], y: &[f64]) -> (f64, Option<(f64, f64)>) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() < 3 {
        return (slope, None);
    }
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let df = k - 2.0;
    let se = (rss / df / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(f64::NAN);
    (slope, Some((slope - t * se, slope + t * se)))
}

/// For each size, samples independent connected pairs, compares their
/// normalized Laplacians, and summarizes the decay of ε. Trials run in
/// parallel with seeds derived from `(seed, n, trial)`.
pub fn similarity_decay(
    model: &RandomGraphModel,
    sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<SimilarityDecayStudy> {
    if trials == 0 || sizes.is_empty() {
        return Err(Error::InvalidArgument("need at least one size and one trial".into()));
    }
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for &n in sizes {
        let per_trial = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[n as u64, t as u64]));
                let a = normalized_laplacian(&model.sample_connected(n, &mut rng)?)?;
                let b = normalized_laplacian(&model.sample_connected(n, &mut rng)?)?;
                let report = spectral_similarity(&a, &b)?;
                let gap = a.spectrum().lambda_bar().unwrap_or(0.0);
                Ok((
                    TrialRecord {
                        n,
                        trial: t,
                        epsilon: report.epsilon,
                        min_nonzero_eig: gap,
                    },
                    a.spectrum().eigenvalues.clone(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let eps: Vec<f64> = per_trial.iter().map(|(r, _)| r.epsilon).collect();
        let mean = eps.iter().sum::<f64>() / trials as f64;
        let sd = if trials > 1 {
            (eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt()
        } else {
            0.0
        };
        let gamma: Vec<f64> = (0..n)
            .map(|i| per_trial.iter().map(|(_, ev)| ev[i]).sum::<f64>() / trials as f64)
            .collect();
        let half_width = per_trial
            .iter()
            .flat_map(|(_, ev)| ev.iter().zip(&gamma).map(|(l, g)| (l - g).abs()))
            .fold(0.0, f64::max);
        summaries.push(SizeSummary {
            n,
            mean_epsilon: mean,
            sd_epsilon: sd,
            spectral_gap: per_trial
                .iter()
                .map(|(r, _)| r.min_nonzero_eig)
                .fold(f64::INFINITY, f64::min),
            concentration_half_width: half_width,
        });
        records.extend(per_trial.into_iter().map(|(r, _)| r));
    }
    let lx: Vec<f64> = summaries.iter().map(|s| (s.n as f64).ln()).collect();
    let ly: Vec<f64> = summaries.iter().map(|s| s.mean_epsilon.ln()).collect();
    let (slope, slope_ci) = if sizes.len() >= 2 {
        regression_slope(&lx, &ly)
    } else {
        (f64::NAN, None)
    };
    Ok(SimilarityDecayStudy {
        model: model.clone(),
        sizes: sizes.to_vec(),
        trials,
        seed,
        records,
        summaries,
        slope,
        slope_ci,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(gen_er(10, 1.0, &mut rng).unwrap().edge_count(), 45);
        assert_eq!(gen_er(10, 0.0, &mut rng).unwrap().edge_count(), 0);
        assert!(gen_er(10, 1.5, &mut rng).is_err());
        let empty = RandomGraphModel::Er { p: 0.0 };
        assert!(matches!(
            empty.sample_connected(5, &mut rng),
            Err(Error::RetriesExhausted { attempts: 100 })
        ));
    }

    #[test]
    fn er_edge_count_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 200;
        let pairs = 50.0 * 49.0 / 2.0;
        let mean = (0..draws)
            .map(|_| gen_er(50, 0.2, &mut rng).unwrap().edge_count() as f64)
            .sum::<f64>()
            / draws as f64;
        let sd_of_mean = (pairs * 0.2 * 0.8 / draws as f64).sqrt();
        assert!((mean - 0.2 * pairs).abs() < 3.0 * sd_of_mean);
    }

    #[test]
    fn chung_lu_validation_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(gen_chung_lu(&[10.0, 1.0, 1.0], &mut rng).is_err());
        assert!(gen_chung_lu(&[1.0, -1.0], &mut rng).is_err());
        let w: Vec<f64> = (0..100).map(|i| 5.0 + 10.0 * i as f64 / 99.0).collect();
        let draws = 50;
        let mean = (0..draws)
            .map(|_| gen_chung_lu(&w, &mut rng).unwrap().edge_count() as f64)
            .sum::<f64>()
            / draws as f64;
        let total: f64 = w.iter().sum();
        let mut want = 0.0;
        for i in 0..100 {
            for j in i + 1..100 {
                want += (w[i] * w[j] / total).min(1.0);
            }
        }
        assert!((mean - want).abs() / want < 0.02, "{mean} vs {want}");
    }

    #[test]
    fn constant_graphon_matches_er() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws = 200;
        let pairs = 40.0 * 39.0 / 2.0;
        let mean = (0..draws)
            .map(|_| gen_graphon(40, |_, _| 0.3, &mut rng).unwrap().edge_count() as f64)
            .sum::<f64>()
            / draws as f64;
        let sd_of_mean = (pairs * 0.3 * 0.7 / draws as f64).sqrt();
        assert!((mean - 0.3 * pairs).abs() < 3.0 * sd_of_mean);
        assert!(matches!(
            gen_graphon(5, |_, _| 1.5, &mut rng),
            Err(Error::InvalidKernel { .. })
        ));
    }

    #[test]
    fn graphon_degree_trend() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 60;
        let mut deg = vec![0.0; n];
        for _ in 0..100 {
            let g = gen_graphon(n, |x, y| 0.5 + 0.4 * x * y, &mut rng).unwrap();
            for (d, v) in deg.iter_mut().zip(g.degrees()) {
                *d += v;
            }
        }
        // Spearman correlation between node rank and mean degree.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| deg[a].total_cmp(&deg[b]));
        let mut rank = vec![0.0; n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r as f64;
        }
        let m = (n as f64 - 1.0) / 2.0;
        let num: f64 = (0..n).map(|i| (i as f64 - m) * (rank[i] - m)).sum();
        let den: f64 = (0..n).map(|i| (i as f64 - m).powi(2)).sum();
        assert!(num / den > 0.8, "rank correlation {}", num / den);
    }

    #[test]
    fn seeds_are_deterministic() {
        let m = RandomGraphModel::Graphon { a: 0.3, b: 0.5 };
        let a = m.sample(30, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = m.sample(30, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
    }

    #[test]
    fn semicircle_basics() {
        assert!((semicircle_density(0.0) - 2.0 / std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(semicircle_cdf(0.0), 0.5);
        assert_eq!(semicircle_cdf(-1.0), 0.0);
        assert_eq!(semicircle_cdf(1.0), 1.0);
        // The CDF integrates the density.
        let steps = 20_000;
        let h = 2.0 / steps as f64;
        let mut acc = 0.0;
        for i in 0..steps {
            let x = -1.0 + (i as f64 + 0.5) * h;
            acc += semicircle_density(x) * h;
            if i % 5000 == 4999 {
                assert!((acc - semicircle_cdf(x + 0.5 * h)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identity_esd_distances() {
        let ones = vec![1.0; 10];
        let raw = esd_of(&ones, &EsdScaling::None);
        assert!((semicircle_distance(&raw) - 1.0).abs() < 1e-12);
        // As a Laplacian the identity maps every eigenvalue to 0 = the median.
        let dev = esd_of(&ones, &EsdScaling::ChungLu { mean_degree: 4.0 });
        assert!((semicircle_distance(&dev) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn regression_recovers_slope() {
        let x: Vec<f64> = (1..6).map(|v| v as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (s, ci) = regression_slope(&x, &y);
        assert!((s + 0.5).abs() < 1e-12);
        let (lo, hi) = ci.unwrap();
        assert!(lo <= s && s <= hi);
    }

    #[test]
    fn identical_pair_has_zero_epsilon() {
        let m = RandomGraphModel::Er { p: 0.5 };
        let g = m.sample_connected(30, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let h = m.sample_connected(30, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let r = spectral_similarity(&normalized_laplacian(&g).unwrap(), &normalized_laplacian(&h).unwrap()).unwrap();
        assert_eq!(r.epsilon, 0.0);
    }

    #[test]
    fn small_study_outputs() {
        let study = similarity_decay(&RandomGraphModel::Er { p: 0.5 }, &[16, 32], 3, 1).unwrap();
        assert_eq!(study.records.len(), 6);
        assert!(study.records.iter().all(|r| r.epsilon >= 0.0 && r.min_nonzero_eig > 0.0));
        let csv = study.to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(study.to_svg().starts_with("<svg"));
        let again = similarity_decay(&RandomGraphModel::Er { p: 0.5 }, &[16, 32], 3, 1).unwrap();
        assert_eq!(study, again);
    }
}
