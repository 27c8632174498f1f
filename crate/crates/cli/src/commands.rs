use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use henn::checkpoint::{Checkpoint, CHECKPOINT_VERSION};
use henn::dataset::{generate_dataset, DatasetConfig, LabeledDataset, Sample};
use henn::filters::{check_prop1_bound, GraphFilter, Prop1Report, DEFAULT_SLACK};
use henn::gnn::{check_theorem1, GnnModel, Nonlinearity, Theorem1Report};
use henn::gso::{gso, normalized_laplacian_matrix, GsoKind, ShiftOperator};
use henn::henn::{check_theorem2, Architecture, HennContext, Theorem2Report};
use henn::hypergraph::Hypergraph;
use henn::randgraph::{
    derive_seed, esd_of, semicircle_distance, similarity_decay, EsdScaling, RandomGraphModel,
};
use henn::spectral::{
    perturb_additive, perturb_combined, perturb_relative, random_additive, random_relative,
    spectral_similarity, symmetric_eigenvalues, PerturbationKind, SimilarityReport,
};
use henn::torus::{sample_torus_vr, DEFAULT_POINTS, DEFAULT_RADIUS};
use henn::train::{evaluate, run_experiment, ExperimentConfig};

use crate::{CliError, Format};

const DATASET_FORMAT: &str = "henn-dataset v1";

pub struct RunContext {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub formats: Vec<Format>,
}

impl RunContext {
    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn prepare(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| CliError::config(format!("{}: {e}", self.out.display())))
    }

    /// Relative paths in configs resolve against the output directory when
    /// they do not exist relative to the working directory.
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_relative() && !p.exists() {
            self.out.join(p)
        } else {
            p.to_path_buf()
        }
    }
}

/// Deterministic JSON text with a trailing newline.
fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

struct Manifest {
    command: &'static str,
    config: Value,
    artifacts: Vec<String>,
}

impl Manifest {
    fn new(command: &'static str, config: &impl Serialize) -> Self {
        Self {
            command,
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            artifacts: Vec::new(),
        }
    }

    fn add(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    fn write(&self, ctx: &RunContext, seed: u64) -> Result<(), CliError> {
        let started = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = json!({
            "tool": "henn",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": seed,
            "config": self.config,
            "artifacts": self.artifacts,
            "formats": {
                "dataset": DATASET_FORMAT,
                "checkpoint": CHECKPOINT_VERSION,
            },
            "timestamp": started,
        });
        write_json(&ctx.path(&format!("manifest-{}.json", self.command)), &manifest)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenDataConfig {
    pub points: usize,
    pub radius: f64,
    pub geometry_seed: u64,
    pub dataset: DatasetConfig,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        Self {
            points: DEFAULT_POINTS,
            radius: DEFAULT_RADIUS,
            geometry_seed: 0,
            dataset: DatasetConfig::default(),
        }
    }
}

pub fn gen_data(ctx: &RunContext, cfg: Result<GenDataConfig, CliError>) -> Result<(), CliError> {
    let mut cfg = cfg?;
    if let Some(seed) = ctx.seed {
        cfg.geometry_seed = seed;
        cfg.dataset.seed = derive_seed(seed, &[1]);
    }
    ctx.prepare()?;
    let geometry = sample_torus_vr(cfg.points, cfg.radius, cfg.geometry_seed)?;
    let data = generate_dataset(&geometry.hypergraph, &cfg.dataset)?;
    let mut manifest = Manifest::new("gen-data", &cfg);

    geometry.hypergraph.write_hg(ctx.path("hypergraph.hg"))?;
    manifest.add("hypergraph.hg");
    data.write(ctx.path("dataset.txt"))?;
    manifest.add("dataset.txt");
    if ctx.wants(Format::Csv) {
        let mut csv = String::from("node,point,x,y,z\n");
        for (node, &p) in geometry.nodes.iter().enumerate() {
            let [x, y, z] = geometry.points[p];
            csv.push_str(&format!("{node},{p},{x:?},{y:?},{z:?}\n"));
        }
        std::fs::write(ctx.path("points.csv"), csv)?;
        manifest.add("points.csv");
    }
    log::info!(
        "hypergraph with {} nodes and {} hyperedges; {} train / {} test samples",
        data.n,
        data.m,
        data.train.len(),
        data.test.len()
    );
    manifest.write(ctx, cfg.geometry_seed)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCmdConfig {
    pub hypergraph: PathBuf,
    pub dataset: PathBuf,
    pub experiment: ExperimentConfig,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        Self {
            hypergraph: "hypergraph.hg".into(),
            dataset: "dataset.txt".into(),
            experiment: ExperimentConfig::default(),
        }
    }
}

fn load_problem(ctx: &RunContext, hg: &Path, ds: &Path) -> Result<(HennContext, LabeledDataset), CliError> {
    let h = Hypergraph::read_hg(ctx.resolve(hg))?;
    let data = LabeledDataset::read(ctx.resolve(ds))?;
    if data.n != h.n() || data.m != h.m() {
        return Err(CliError::config(format!(
            "dataset is for {}x{} but the hypergraph is {}x{}",
            data.n,
            data.m,
            h.n(),
            h.m()
        )));
    }
    Ok((HennContext::new(h, data.sources.clone())?, data))
}

pub fn train(ctx: &RunContext, cfg: Result<TrainCmdConfig, CliError>) -> Result<(), CliError> {
    let mut cfg = cfg?;
    if let Some(seed) = ctx.seed {
        cfg.experiment.train.seed = seed;
    }
    ctx.prepare()?;
    let (problem, data) = load_problem(ctx, &cfg.hypergraph, &cfg.dataset)?;
    let mut manifest = Manifest::new("train", &cfg);
    let mut artifacts = Vec::new();
    let report = run_experiment(&data, &problem, &cfg.experiment, |arch, run, model, log| {
        if run.shuffle == 0 {
            artifacts.push((arch, Checkpoint::new(model.clone(), Some(cfg.experiment.train.clone())), log.to_csv()));
        }
    })?;
    for (arch, checkpoint, log) in artifacts {
        let name = format!("checkpoint-{arch}.json");
        checkpoint.save(ctx.path(&name))?;
        manifest.add(&name);
        if ctx.wants(Format::Csv) {
            let name = format!("log-{arch}.csv");
            std::fs::write(ctx.path(&name), log)?;
            manifest.add(&name);
        }
    }
    if ctx.wants(Format::Json) {
        write_json(&ctx.path("report.json"), &report)?;
        manifest.add("report.json");
    }
    if ctx.wants(Format::Csv) {
        let mut csv = String::from("architecture,validation_mean,validation_sd,test_mean,test_sd,max_C\n");
        for r in &report.results {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
            csv.push_str(&format!(
                "{},{},{},{:?},{:?},{:?}\n",
                r.architecture,
                opt(r.validation_mean),
                opt(r.validation_sd),
                r.test_mean,
                r.test_sd,
                r.max_c
            ));
        }
        std::fs::write(ctx.path("report.csv"), csv)?;
        manifest.add("report.csv");
    }
    for r in &report.results {
        log::info!("{}: test {:.3} ± {:.3}", r.architecture, r.test_mean, r.test_sd);
    }
    manifest.write(ctx, cfg.experiment.train.seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Test,
    All,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub hypergraph: PathBuf,
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub split: Split,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            hypergraph: "hypergraph.hg".into(),
            dataset: "dataset.txt".into(),
            checkpoint: "checkpoint-henn.json".into(),
            split: Split::Test,
        }
    }
}

pub fn eval(ctx: &RunContext, cfg: Result<EvalConfig, CliError>) -> Result<(), CliError> {
    let cfg = cfg?;
    ctx.prepare()?;
    let (problem, data) = load_problem(ctx, &cfg.hypergraph, &cfg.dataset)?;
    let checkpoint = Checkpoint::load(ctx.resolve(&cfg.checkpoint))?;
    let samples: Vec<&Sample> = match cfg.split {
        Split::Train => data.train_samples().collect(),
        Split::Test => data.test_samples().collect(),
        Split::All => data.samples.iter().collect(),
    };
    let accuracy = evaluate(&checkpoint.model, &problem, &samples)?;
    let arch = checkpoint.model.architecture;
    let mut manifest = Manifest::new("eval", &cfg);
    let name = format!("eval-{arch}.json");
    write_json(
        &ctx.path(&name),
        &json!({
            "architecture": arch,
            "split": cfg.split,
            "samples": samples.len(),
            "accuracy": accuracy,
            "max_C": checkpoint.model.max_lipschitz(&problem),
        }),
    )?;
    manifest.add(&name);
    log::info!("{arch}: accuracy {accuracy:.3} on {} samples", samples.len());
    manifest.write(ctx, ctx.seed.unwrap_or(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorInput {
    /// Dense CSV matrices.
    Csv,
    /// `.hg` hypergraphs turned into operators of `kind`.
    Hypergraph,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorPair {
    pub s: PathBuf,
    pub s_tilde: PathBuf,
    pub input: OperatorInput,
    pub kind: GsoKind,
}

impl Default for OperatorPair {
    fn default() -> Self {
        Self {
            s: PathBuf::new(),
            s_tilde: PathBuf::new(),
            input: OperatorInput::Csv,
            kind: GsoKind::CliqueHenn,
        }
    }
}

impl OperatorPair {
    fn load_one(&self, ctx: &RunContext, p: &Path, key: &str) -> Result<ShiftOperator, CliError> {
        if p.as_os_str().is_empty() {
            return Err(CliError::config(format!("config key `{key}` is required")));
        }
        let p = ctx.resolve(p);
        Ok(match self.input {
            OperatorInput::Csv => ShiftOperator::read_csv(p, GsoKind::Custom)?,
            OperatorInput::Hypergraph => gso(&Hypergraph::read_hg(p)?, self.kind)?,
        })
    }

    fn load(&self, ctx: &RunContext, prefix: &str) -> Result<(ShiftOperator, ShiftOperator), CliError> {
        Ok((
            self.load_one(ctx, &self.s, &format!("{prefix}s"))?,
            self.load_one(ctx, &self.s_tilde, &format!("{prefix}s_tilde"))?,
        ))
    }
}

fn check_similarity_assumptions(r: &SimilarityReport) -> Result<(), CliError> {
    if !r.epsilon.is_finite() {
        return Err(CliError::assumption(format!(
            "kernel dimensions differ ({} vs {}); no finite epsilon exists",
            r.zero_mult_s, r.zero_mult_s_tilde
        )));
    }
    if !r.kernel_aligned {
        return Err(CliError::assumption(
            "the second operator does not vanish on the kernel of the first",
        ));
    }
    Ok(())
}

pub fn similarity(ctx: &RunContext, cfg: Result<OperatorPair, CliError>) -> Result<(), CliError> {
    let cfg = cfg?;
    ctx.prepare()?;
    let (s, st) = cfg.load(ctx, "")?;
    let report = spectral_similarity(&s, &st)?;
    let mut manifest = Manifest::new("similarity", &cfg);
    write_json(&ctx.path("similarity.json"), &report)?;
    manifest.add("similarity.json");
    manifest.write(ctx, ctx.seed.unwrap_or(0))?;
    log::info!("epsilon = {}", report.epsilon);
    check_similarity_assumptions(&report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    #[serde(default)]
    pub delta_r: f64,
    /// Additive norm as a fraction of the smallest nonzero eigenvalue.
    #[serde(default)]
    pub delta_a_relative: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GnnSpec {
    pub widths: Vec<usize>,
    pub taps: usize,
    pub nonlinearity: Nonlinearity,
    pub models: usize,
    pub trials: usize,
}

impl Default for GnnSpec {
    fn default() -> Self {
        Self {
            widths: vec![1, 2, 2],
            taps: 3,
            nonlinearity: Nonlinearity::Relu,
            models: 10,
            trials: 20,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HennSpec {
    pub hypergraph: PathBuf,
    pub hypergraph_tilde: PathBuf,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub shape: henn::henn::ModelShape,
}

fn default_trials() -> usize {
    20
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    /// The pair to certify. When `perturbation` is set only `operators.s`
    /// is read and the second operator is generated from it.
    pub operators: OperatorPair,
    pub perturbation: Option<PerturbationSpec>,
    /// Coefficient lists of filters to certify.
    pub filters: Vec<Vec<f64>>,
    /// Additional random filters, normalized on the first operator.
    pub random_filters: usize,
    pub max_taps: usize,
    pub gnn: GnnSpec,
    pub henn: Option<HennSpec>,
    pub slack: f64,
    pub seed: u64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            operators: OperatorPair::default(),
            perturbation: None,
            filters: Vec::new(),
            random_filters: 20,
            max_taps: 4,
            gnn: GnnSpec::default(),
            henn: None,
            slack: DEFAULT_SLACK,
            seed: 0,
        }
    }
}

#[derive(Debug, Serialize)]
struct PerturbationCertificate {
    kind: PerturbationKind,
    bound: f64,
    general_bound: f64,
    measured: f64,
    holds: bool,
}

#[derive(Debug, Serialize)]
struct Certificates {
    similarity: SimilarityReport,
    perturbation: Option<PerturbationCertificate>,
    filters: Vec<Prop1Report>,
    gnn: Vec<Theorem1Report>,
    henn: Option<Theorem2Report>,
    all_pass: bool,
}

pub fn bounds(ctx: &RunContext, cfg: Result<BoundsConfig, CliError>) -> Result<(), CliError> {
    let mut cfg = cfg?;
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    if cfg.max_taps == 0 || cfg.gnn.taps == 0 || cfg.gnn.widths.len() < 2 {
        return Err(CliError::config("max_taps, gnn.taps and gnn.widths must be nonempty"));
    }
    ctx.prepare()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s = cfg.operators.load_one(ctx, &cfg.operators.s, "operators.s")?;
    let (st, perturbation_bound) = match &cfg.perturbation {
        None => (cfg.operators.load_one(ctx, &cfg.operators.s_tilde, "operators.s_tilde")?, None),
        Some(p) => {
            let lbar = s
                .spectrum()
                .lambda_bar()
                .ok_or_else(|| CliError::assumption("operator has no nonzero eigenvalue"))?;
            let da = p.delta_a_relative * lbar;
            let e = random_relative(&s, p.delta_r, &mut rng);
            let d = random_additive(&s, da, &mut rng);
            let out = match p.kind {
                PerturbationKind::Relative => perturb_relative(&s, &e, p.delta_r)?,
                PerturbationKind::Additive => perturb_additive(&s, &d, da)?,
                PerturbationKind::Combined => perturb_combined(&s, &e, p.delta_r, &d, da)?,
            };
            (out.operator, Some((p.kind, out.bound, out.general_bound)))
        }
    };
    let sim = spectral_similarity(&s, &st)?;
    check_similarity_assumptions(&sim)?;
    let eps = sim.epsilon;

    let perturbation = perturbation_bound.map(|(kind, bound, general_bound)| PerturbationCertificate {
        kind,
        bound,
        general_bound,
        measured: eps,
        holds: eps <= bound + 1e-8,
    });

    let mut filters: Vec<GraphFilter> = cfg.filters.iter().cloned().map(GraphFilter::new).collect();
    for _ in 0..cfg.random_filters {
        let taps = rng.random_range(1..=cfg.max_taps);
        let f = GraphFilter::new((0..taps).map(|_| rng.random_range(-1.0..1.0)).collect());
        filters.push(f.normalize(&s));
    }
    let prop1: Vec<Prop1Report> = filters
        .iter()
        .map(|f| check_prop1_bound(f, &s, &st, eps, cfg.slack))
        .collect();

    let mut gnn = Vec::with_capacity(cfg.gnn.models);
    for _ in 0..cfg.gnn.models {
        let mut model = GnnModel::random(&cfg.gnn.widths, cfg.gnn.taps, cfg.gnn.nonlinearity, 1.0, &mut rng)?;
        model.normalize_on(&s.spectrum().eigenvalues);
        gnn.push(check_theorem1(&model, &s, &st, eps, cfg.gnn.trials, cfg.slack, &mut rng)?);
    }

    let henn = match &cfg.henn {
        None => None,
        Some(spec) => {
            let a = Hypergraph::read_hg(ctx.resolve(&spec.hypergraph))?;
            let b = Hypergraph::read_hg(ctx.resolve(&spec.hypergraph_tilde))?;
            if a.n() != b.n() || a.m() != b.m() {
                return Err(CliError::config("henn hypergraphs must have equal node and hyperedge counts"));
            }
            let ca = HennContext::new(a, vec![])?;
            let cb = HennContext::new(b, vec![])?;
            let mut model = henn::henn::HennModel::build(Architecture::Henn, &spec.shape, &mut rng)?;
            model.normalize(&ca);
            let eps_node = spectral_similarity(&ca.clique, &cb.clique)?;
            let eps_edge = spectral_similarity(&ca.line, &cb.line)?;
            check_similarity_assumptions(&eps_node)?;
            check_similarity_assumptions(&eps_edge)?;
            Some(check_theorem2(
                &model,
                &ca,
                &cb,
                &[eps_node.epsilon, eps_edge.epsilon],
                spec.trials,
                cfg.slack,
                &mut rng,
            )?)
        }
    };

    let all_pass = prop1.iter().all(|r| r.holds)
        && gnn.iter().all(Theorem1Report::holds)
        && henn.as_ref().is_none_or(Theorem2Report::holds)
        && perturbation.as_ref().is_none_or(|p| p.holds);
    let certs = Certificates {
        similarity: sim,
        perturbation,
        filters: prop1,
        gnn,
        henn,
        all_pass,
    };
    let mut manifest = Manifest::new("bounds", &cfg);
    write_json(&ctx.path("bounds.json"), &certs)?;
    manifest.add("bounds.json");
    manifest.write(ctx, cfg.seed)?;
    if all_pass {
        log::info!("all certificates hold (epsilon = {eps})");
        Ok(())
    } else {
        Err(CliError::assumption("at least one bound certificate failed; see bounds.json"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandStudyConfig {
    pub model: RandomGraphModel,
    pub sizes: Vec<usize>,
    pub trials: usize,
    /// Also compare the ESD of one graph of this size with the semicircle.
    pub semicircle_n: Option<usize>,
    pub seed: u64,
}

impl Default for RandStudyConfig {
    fn default() -> Self {
        Self {
            model: RandomGraphModel::Er { p: 0.5 },
            sizes: vec![64, 128, 256, 512],
            trials: 20,
            semicircle_n: None,
            seed: 0,
        }
    }
}

pub fn rand_study(ctx: &RunContext, cfg: Result<RandStudyConfig, CliError>) -> Result<(), CliError> {
    let mut cfg = cfg?;
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    ctx.prepare()?;
    let study = similarity_decay(&cfg.model, &cfg.sizes, cfg.trials, cfg.seed)?;
    let mut manifest = Manifest::new("rand-study", &cfg);
    if ctx.wants(Format::Csv) {
        std::fs::write(ctx.path("decay.csv"), study.to_csv())?;
        manifest.add("decay.csv");
    }
    if ctx.wants(Format::Svg) {
        std::fs::write(ctx.path("decay.svg"), study.to_svg())?;
        manifest.add("decay.svg");
    }
    if ctx.wants(Format::Json) {
        write_json(
            &ctx.path("decay.json"),
            &json!({
                "model": study.model,
                "sizes": study.sizes,
                "trials": study.trials,
                "summaries": study.summaries,
                "slope": study.slope,
                "slope_ci": study.slope_ci,
                "strictly_decreasing": study.strictly_decreasing(),
            }),
        )?;
        manifest.add("decay.json");
    }
    if let Some(n) = cfg.semicircle_n {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[n as u64, u64::MAX]));
        let g = cfg.model.sample_connected(n, &mut rng)?;
        let ev = symmetric_eigenvalues(&normalized_laplacian_matrix(&g)?);
        let sample = esd_of(&ev, &EsdScaling::for_graph(&g));
        let ks = semicircle_distance(&sample);
        write_json(
            &ctx.path("semicircle.json"),
            &json!({ "n": n, "scaling": sample.scaling, "ks_distance": ks }),
        )?;
        manifest.add("semicircle.json");
        log::info!("semicircle KS distance at n = {n}: {ks:.4}");
    }
    log::info!("log-log slope {:.3}", study.slope);
    manifest.write(ctx, cfg.seed)
}
