//! Adam training of hypergraph models on source-localization data, with an
//! integral Lipschitz penalty, per-epoch filter normalization, and
//! cross-validated model selection.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::filters::{endpoint_lipschitz_gradient, integral_lipschitz_constant};
use crate::henn::{argmax, Architecture, HennContext, HennModel, ModelShape};
use crate::randgraph::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    /// `w·max(0, C − C_max)²`.
    HingeSquared,
    /// `−w·log(C_max − C)`, infinite at or above the cap.
    LogBarrier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub decay_rate: f64,
    pub decay_period: usize,
    pub il_cap: f64,
    pub il_penalty_weight: f64,
    pub penalty: PenaltyKind,
    /// After each epoch, scale down any filter whose dense-grid constant
    /// exceeds `il_cap`.
    pub enforce_cap: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.0005,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            decay_rate: 0.99,
            decay_period: 20,
            il_cap: 10.0,
            il_penalty_weight: 1.0,
            penalty: PenaltyKind::HingeSquared,
            enforce_cap: true,
            epochs: 200,
            batch_size: 32,
            folds: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0 < b1 && b1 < 1.0 && 0.0 < b2 && b2 < 1.0) {
            return bad("adam_betas must lie in (0, 1)");
        }
        if !(self.il_cap > 0.0) {
            return bad("il_cap must be positive");
        }
        if self.batch_size == 0 || self.decay_period == 0 {
            return bad("batch_size and decay_period must be positive");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        Ok(())
    }
}

/// Adam moments and step counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Updates applied so far.
    pub step: usize,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// Learning rate for the next update, decayed every `decay_period` steps.
    pub fn lr(&self, cfg: &TrainConfig) -> f64 {
        cfg.lr * cfg.decay_rate.powi((self.step / cfg.decay_period) as i32)
    }
}

/// One bias-corrected Adam update. Fails on the first non-finite gradient,
/// reporting its flat index.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient {
            path: format!("parameter {i}"),
        });
    }
    let (b1, b2) = cfg.adam_betas;
    let lr = state.lr(cfg);
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_eps);
    }
    Ok(())
}

/// `w·max(0, c − cap)²`.
pub fn hinge_penalty(c: f64, cap: f64, weight: f64) -> f64 {
    weight * (c - cap).max(0.0).powi(2)
}

/// Penalty value, its gradient, and the largest endpoint constant.
#[derive(Clone, Debug)]
pub struct PenaltyTerm {
    pub value: f64,
    pub grad: Vec<f64>,
    pub max_c: f64,
}

/// Sums the penalty over every filter, using the endpoint constant on the
/// spectrum of the filter's stage operator.
pub fn lipschitz_penalty(model: &HennModel, ctx: &HennContext, cfg: &TrainConfig) -> PenaltyTerm {
    let mut grad = vec![0.0; model.param_count()];
    let mut value = 0.0;
    let mut max_c: f64 = 0.0;
    let mut offset = 0;
    for stage in &model.stages {
        let sp = ctx.operator(stage.side, model.architecture).spectrum();
        let (lo, hi) = (sp.lambda_min(), sp.lambda_max());
        for layer in &stage.gnn.layers {
            let (f_in, f_out) = (layer.f_in(), layer.f_out());
            for i in 0..f_out {
                for j in 0..f_in {
                    let f = layer.filter(i, j);
                    let c = integral_lipschitz_constant(&f, lo, hi).endpoint;
                    max_c = max_c.max(c);
                    let w = cfg.il_penalty_weight;
                    let dv_dc = match cfg.penalty {
                        PenaltyKind::HingeSquared => {
                            value += hinge_penalty(c, cfg.il_cap, w);
                            2.0 * w * (c - cfg.il_cap).max(0.0)
                        }
                        PenaltyKind::LogBarrier => {
                            if c >= cfg.il_cap {
                                value = f64::INFINITY;
                                0.0
                            } else {
                                value -= w * (cfg.il_cap - c).ln();
                                w / (cfg.il_cap - c)
                            }
                        }
                    };
                    if dv_dc != 0.0 {
                        let dc = endpoint_lipschitz_gradient(&f, lo, hi);
                        for (k, d) in dc.iter().enumerate() {
                            grad[offset + k * f_in * f_out + i * f_in + j] += dv_dc * d;
                        }
                    }
                }
            }
            offset += layer.taps.len() * f_in * f_out;
        }
    }
    PenaltyTerm { value, grad, max_c }
}

/// Softmax cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() + max - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / z).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

pub fn signal_matrix(sample: &Sample) -> DMatrix<f64> {
    DMatrix::from_column_slice(sample.signal.len(), 1, &sample.signal)
}

#[derive(Clone, Debug)]
pub struct LossValue {
    pub loss: f64,
    pub ce: f64,
    pub penalty: f64,
    pub max_c: f64,
    pub grad: Vec<f64>,
}

/// Mean cross-entropy over the batch plus the Lipschitz penalty.
///
/// Per-sample gradients are computed in parallel and summed in batch order,
/// so the result does not depend on the thread count.
pub fn loss(model: &HennModel, ctx: &HennContext, batch: &[&Sample], cfg: &TrainConfig) -> Result<LossValue> {
    let per_sample = batch
        .par_iter()
        .map(|s| {
            let x = signal_matrix(s);
            let cache = model.forward_cached(ctx, &x)?;
            let (ce, d_logits) = cross_entropy(&cache.logits, s.label);
            Ok((ce, model.backward(ctx, &cache, &d_logits)))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut grad = vec![0.0; model.param_count()];
    let mut ce = 0.0;
    for (c, g) in &per_sample {
        ce += c * scale;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b * scale;
        }
    }
    let pen = lipschitz_penalty(model, ctx, cfg);
    for (a, b) in grad.iter_mut().zip(&pen.grad) {
        *a += b;
    }
    Ok(LossValue {
        loss: ce + pen.value,
        ce,
        penalty: pen.value,
        max_c: pen.max_c,
        grad,
    })
}

/// Normalizes every filter on its stage spectrum. Idempotent.
pub fn normalize_all(model: &mut HennModel, ctx: &HennContext) {
    model.normalize(ctx);
}

/// Scales each filter whose dense-grid constant exceeds `cap` down to it.
/// Scaling keeps `|h(λ)| ≤ 1`.
pub fn project_lipschitz(model: &mut HennModel, ctx: &HennContext, cap: f64) {
    let arch = model.architecture;
    for stage in &mut model.stages {
        let sp = ctx.operator(stage.side, arch).spectrum();
        let (lo, hi) = (sp.lambda_min(), sp.lambda_max());
        stage.gnn.map_filters(|f| {
            let c = integral_lipschitz_constant(f, lo, hi).value();
            if c > cap {
                f.scaled(cap / c)
            } else {
                f.clone()
            }
        });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    pub ce: f64,
    pub penalty: f64,
    pub lr: f64,
    pub max_c: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepLog>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,loss,ce,penalty,lr,max_C\n");
        for r in &self.steps {
            s.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{:?}\n",
                r.step, r.loss, r.ce, r.penalty, r.lr, r.max_c
            ));
        }
        s
    }
}

/// Trains `model` in place. Filters are normalized (and, if configured,
/// capped) before training and after every epoch.
pub fn train(
    model: &mut HennModel,
    ctx: &HennContext,
    samples: &[&Sample],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainLog> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = AdamState::new(model.param_count());
    let mut log = TrainLog::default();
    let settle = |model: &mut HennModel| {
        normalize_all(model, ctx);
        if cfg.enforce_cap {
            project_lipschitz(model, ctx, cfg.il_cap);
        }
    };
    settle(model);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| samples[i]).collect();
            let lv = loss(model, ctx, &batch, cfg)?;
            let lr = state.lr(cfg);
            let mut p = model.params();
            adam_step(&mut p, &lv.grad, &mut state, cfg).map_err(|e| match e {
                Error::NonFiniteGradient { path } => {
                    let idx = path.trim_start_matches("parameter ").parse().unwrap_or(0);
                    Error::NonFiniteGradient {
                        path: model.param_path(idx),
                    }
                }
                other => other,
            })?;
            model.set_params(&p);
            log.steps.push(StepLog {
                step: state.step,
                loss: lv.loss,
                ce: lv.ce,
                penalty: lv.penalty,
                lr,
                max_c: lv.max_c,
            });
        }
        settle(model);
    }
    Ok(log)
}

/// Fraction of samples whose arg-max logit is the true label.
pub fn evaluate(model: &HennModel, ctx: &HennContext, samples: &[&Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let correct = samples
        .par_iter()
        .map(|s| Ok((argmax(&model.forward(ctx, &signal_matrix(s))?) == s.label) as usize))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / samples.len() as f64)
}

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Contiguous fold sizes for `n` items, differing by at most one.
pub fn fold_sizes(n: usize, folds: usize) -> Vec<usize> {
    (0..folds)
        .map(|f| n / folds + (f < n % folds) as usize)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub shape: ModelShape,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl CandidateScore {
    pub fn upper_confidence(&self) -> f64 {
        self.mean + self.sd
    }
}

/// Index of the candidate with the highest mean + sd, first on ties.
pub fn select_ucb(scores: &[CandidateScore]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::EmptyModelSpace);
    }
    Ok(argmax(
        &scores.iter().map(CandidateScore::upper_confidence).collect::<Vec<_>>(),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub architecture: Architecture,
    pub candidates: Vec<CandidateScore>,
    pub selected: usize,
}

/// k-fold cross-validation of every candidate shape on `samples`.
pub fn cross_validate(
    arch: Architecture,
    ctx: &HennContext,
    samples: &[&Sample],
    model_space: &[ModelShape],
    cfg: &TrainConfig,
) -> Result<CvReport> {
    if model_space.is_empty() {
        return Err(Error::EmptyModelSpace);
    }
    let sizes = fold_sizes(samples.len(), cfg.folds);
    let mut candidates = Vec::with_capacity(model_space.len());
    for (c, shape) in model_space.iter().enumerate() {
        let mut accs = Vec::with_capacity(cfg.folds);
        let mut start = 0;
        for (f, &size) in sizes.iter().enumerate() {
            let val: Vec<&Sample> = samples[start..start + size].to_vec();
            let fit: Vec<&Sample> = samples[..start]
                .iter()
                .chain(&samples[start + size..])
                .copied()
                .collect();
            start += size;
            let seed = derive_seed(cfg.seed, &[c as u64, f as u64, arch as u64]);
            let mut model = HennModel::build(arch, shape, &mut ChaCha8Rng::seed_from_u64(seed))?;
            train(&mut model, ctx, &fit, cfg, seed)?;
            accs.push(evaluate(&model, ctx, &val)?);
        }
        let (mean, sd) = mean_sd(&accs);
        candidates.push(CandidateScore {
            shape: shape.clone(),
            fold_accuracies: accs,
            mean,
            sd,
        });
    }
    let selected = select_ucb(&candidates)?;
    Ok(CvReport {
        architecture: arch,
        candidates,
        selected,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub architectures: Vec<Architecture>,
    pub model_space: Vec<ModelShape>,
    /// Skip cross-validation and use the first shape of the model space.
    pub skip_cv: bool,
    pub shuffles: usize,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            architectures: Architecture::ALL.to_vec(),
            model_space: vec![ModelShape::default()],
            skip_cv: false,
            shuffles: 5,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShuffleResult {
    pub shuffle: usize,
    pub selected: ModelShape,
    pub validation: Option<f64>,
    pub test: f64,
    pub max_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureResult {
    pub architecture: Architecture,
    pub validation_mean: Option<f64>,
    pub validation_sd: Option<f64>,
    pub test_mean: f64,
    pub test_sd: f64,
    pub max_c: f64,
    pub runs: Vec<ShuffleResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub results: Vec<ArchitectureResult>,
}

impl ExperimentReport {
    pub fn get(&self, arch: Architecture) -> Option<&ArchitectureResult> {
        self.results.iter().find(|r| r.architecture == arch)
    }
}

/// Reshuffles the pooled samples `shuffles` times, re-splitting them with
/// the dataset's train/test sizes, and for every architecture selects a
/// shape by cross-validation, retrains on the full training split and
/// measures test accuracy.
pub fn run_experiment(
    dataset: &LabeledDataset,
    ctx: &HennContext,
    cfg: &ExperimentConfig,
    mut on_result: impl FnMut(Architecture, &ShuffleResult, &HennModel, &TrainLog),
) -> Result<ExperimentReport> {
    cfg.train.validate()?;
    if cfg.model_space.is_empty() {
        return Err(Error::EmptyModelSpace);
    }
    let n_train = dataset.train.len();
    let mut per_arch: Vec<Vec<ShuffleResult>> = vec![Vec::new(); cfg.architectures.len()];
    for shuffle in 0..cfg.shuffles {
        let mut order: Vec<usize> = (0..dataset.samples.len()).collect();
        if shuffle > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.train.seed, &[shuffle as u64]));
            order.shuffle(&mut rng);
        }
        let pool: Vec<&Sample> = order.iter().map(|&i| &dataset.samples[i]).collect();
        let (train_set, test_set) = pool.split_at(n_train);
        for (a, &arch) in cfg.architectures.iter().enumerate() {
            let mut tc = cfg.train.clone();
            tc.seed = derive_seed(cfg.train.seed, &[shuffle as u64, 1000 + arch as u64]);
            let (shape, validation) = if cfg.skip_cv {
                (cfg.model_space[0].clone(), None)
            } else {
                let cv = cross_validate(arch, ctx, train_set, &cfg.model_space, &tc)?;
                let best = &cv.candidates[cv.selected];
                (best.shape.clone(), Some(best.mean))
            };
            let mut model = HennModel::build(arch, &shape, &mut ChaCha8Rng::seed_from_u64(tc.seed))?;
            let log = train(&mut model, ctx, train_set, &tc, tc.seed)?;
            let result = ShuffleResult {
                shuffle,
                selected: shape,
                validation,
                test: evaluate(&model, ctx, test_set)?,
                max_c: model.max_lipschitz(ctx),
            };
            log::info!(
                "shuffle {shuffle} {arch}: test accuracy {:.3}, max C {:.3}",
                result.test,
                result.max_c
            );
            on_result(arch, &result, &model, &log);
            per_arch[a].push(result);
        }
    }
    let results = cfg
        .architectures
        .iter()
        .zip(per_arch)
        .map(|(&architecture, runs)| {
            let tests: Vec<f64> = runs.iter().map(|r| r.test).collect();
            let (test_mean, test_sd) = mean_sd(&tests);
            let vals: Option<Vec<f64>> = runs.iter().map(|r| r.validation).collect();
            let (validation_mean, validation_sd) = match vals {
                Some(v) if !v.is_empty() => {
                    let (m, s) = mean_sd(&v);
                    (Some(m), Some(s))
                }
                _ => (None, None),
            };
            ArchitectureResult {
                architecture,
                validation_mean,
                validation_sd,
                test_mean,
                test_sd,
                max_c: runs.iter().map(|r| r.max_c).fold(0.0, f64::max),
                runs,
            }
        })
        .collect();
    Ok(ExperimentReport { results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::Hypergraph;

    #[test]
    fn adam_zero_gradient() {
        let cfg = TrainConfig::default();
        let mut p = vec![0.5, -1.0];
        let mut st = AdamState::new(2);
        st.m = vec![0.2, 0.1];
        st.v = vec![0.04, 0.01];
        adam_step(&mut p, &[0.0, 0.0], &mut st, &cfg).unwrap();
        assert!((st.m[0] - 0.18).abs() < 1e-15 && (st.v[1] - 0.00999).abs() < 1e-15);
        // Moments still move the parameters; with zero moments they do not.
        let mut q = vec![0.5, -1.0];
        let mut fresh = AdamState::new(2);
        adam_step(&mut q, &[0.0, 0.0], &mut fresh, &cfg).unwrap();
        assert_eq!(q, vec![0.5, -1.0]);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let cfg = TrainConfig::default();
        for g in [3.0, -0.02, 1e3] {
            let mut p = vec![1.0];
            let mut st = AdamState::new(1);
            adam_step(&mut p, &[g], &mut st, &cfg).unwrap();
            let want = 1.0 - cfg.lr * g.signum();
            assert!((p[0] - want).abs() < cfg.lr * 1e-5);
        }
    }

    #[test]
    fn lr_decays_every_period() {
        let cfg = TrainConfig::default();
        let mut st = AdamState::new(1);
        st.step = 19;
        let a = st.lr(&cfg);
        st.step = 20;
        let b = st.lr(&cfg);
        assert!((b / a - 0.99).abs() < 1e-15);
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut st = AdamState::new(2);
        let err = adam_step(&mut [0.0, 0.0], &[0.0, f64::NAN], &mut st, &TrainConfig::default());
        assert!(matches!(err, Err(Error::NonFiniteGradient { path }) if path == "parameter 1"));
    }

    #[test]
    fn hinge_arithmetic() {
        assert_eq!(hinge_penalty(12.0, 10.0, 1.0), 4.0);
        assert_eq!(hinge_penalty(9.0, 10.0, 1.0), 0.0);
    }

    #[test]
    fn cross_entropy_perfect_logits() {
        let (l, g) = cross_entropy(&[50.0, 0.0, 0.0], 0);
        assert!(l < 1e-20);
        assert!(g.iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn fold_arithmetic() {
        assert_eq!(fold_sizes(500, 5), vec![100; 5]);
        assert_eq!(fold_sizes(7, 3), vec![3, 2, 2]);
    }

    #[test]
    fn ucb_selection() {
        let score = |mean, sd| CandidateScore {
            shape: ModelShape::default(),
            fold_accuracies: vec![],
            mean,
            sd,
        };
        assert_eq!(select_ucb(&[score(0.6, 0.3), score(0.7, 0.1)]).unwrap(), 0);
        assert_eq!(select_ucb(&[score(0.5, 0.0)]).unwrap(), 0);
        assert!(matches!(select_ucb(&[]), Err(Error::EmptyModelSpace)));
    }

    fn toy_ctx() -> HennContext {
        let edges = (0..10).map(|i| vec![2 * i, 2 * i + 1, (2 * i + 2) % 20]).collect();
        let h = Hypergraph::unweighted(20, edges).unwrap();
        HennContext::new(h, (0..10).collect()).unwrap()
    }

    fn toy_samples(ctx: &HennContext) -> Vec<Sample> {
        (0..40)
            .map(|k| {
                let label = k % 10;
                let mut signal = vec![0.0; ctx.n()];
                for &i in &ctx.hypergraph.edges()[label] {
                    signal[i] = 1.0;
                }
                Sample {
                    label,
                    time: 0,
                    signal,
                }
            })
            .collect()
    }

    #[test]
    fn penalty_gradient_matches_differences() {
        let ctx = toy_ctx();
        let cfg = TrainConfig {
            il_cap: 0.05,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = HennModel::build(Architecture::Henn, &ModelShape::default(), &mut rng).unwrap();
        let pen = lipschitz_penalty(&model, &ctx, &cfg);
        assert!(pen.value > 0.0);
        let p = model.params();
        let h = 1e-6;
        for i in 0..p.len() {
            let mut m = model.clone();
            let mut q = p.clone();
            q[i] += h;
            m.set_params(&q);
            let up = lipschitz_penalty(&m, &ctx, &cfg).value;
            q[i] -= 2.0 * h;
            m.set_params(&q);
            let dn = lipschitz_penalty(&m, &ctx, &cfg).value;
            let fd = (up - dn) / (2.0 * h);
            let err = (fd - pen.grad[i]).abs() / fd.abs().max(pen.grad[i].abs()).max(1e-6);
            assert!(err < 1e-4, "{i}: {fd} vs {}", pen.grad[i]);
        }
    }

    #[test]
    fn normalize_is_idempotent() {
        let ctx = toy_ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = HennModel::build(Architecture::Henn, &ModelShape::default(), &mut rng).unwrap();
        m.set_params(&m.params().iter().map(|p| p * 10.0).collect::<Vec<_>>());
        normalize_all(&mut m, &ctx);
        let once = m.clone();
        normalize_all(&mut m, &ctx);
        assert_eq!(m, once);
    }

    #[test]
    fn training_is_deterministic_and_decreases_loss() {
        let ctx = toy_ctx();
        let samples = toy_samples(&ctx);
        let refs: Vec<&Sample> = samples.iter().collect();
        let cfg = TrainConfig {
            lr: 0.01,
            epochs: 3,
            batch_size: 40,
            ..Default::default()
        };
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = HennModel::build(Architecture::Henn, &ModelShape::default(), &mut rng).unwrap();
            let mut b = a.clone();
            let log = train(&mut a, &ctx, &refs, &cfg, seed).unwrap();
            train(&mut b, &ctx, &refs, &cfg, seed).unwrap();
            assert_eq!(a, b);
            assert!(log.steps.last().unwrap().loss <= log.steps[0].loss);
        }
    }

    #[test]
    fn cap_projection_bounds_grid_constant() {
        let ctx = toy_ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = HennModel::build(Architecture::CliqueOnly, &ModelShape::default(), &mut rng).unwrap();
        m.set_params(&m.params().iter().map(|p| p * 100.0).collect::<Vec<_>>());
        project_lipschitz(&mut m, &ctx, 0.5);
        assert!(m.max_lipschitz(&ctx) <= 0.5 + 1e-12);
    }
}
