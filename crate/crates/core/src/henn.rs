//! The HENN model: node-side convolutions on the clique expansion, incidence
//! max-pooling, hyperedge-side convolutions on the line graph, and a fixed
//! readout over candidate hyperedges. Single-representation baselines share
//! the same machinery.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{random_unit, transferability_bound, ForwardCache, GnnModel, Nonlinearity};
use crate::gso::{gso, GsoKind, ShiftOperator};
use crate::hypergraph::Hypergraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Henn,
    CliqueOnly,
    LineOnly,
    Hgnn,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::Henn,
        Architecture::CliqueOnly,
        Architecture::LineOnly,
        Architecture::Hgnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Henn => "henn",
            Architecture::CliqueOnly => "clique",
            Architecture::LineOnly => "line",
            Architecture::Hgnn => "hgnn",
        }
    }

    /// Operator used by node-side stages.
    pub fn node_kind(self) -> GsoKind {
        match self {
            Architecture::Hgnn => GsoKind::Hgnn,
            _ => GsoKind::CliqueHenn,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "henn" => Ok(Architecture::Henn),
            "clique" | "clique-only" => Ok(Architecture::CliqueOnly),
            "line" | "line-only" => Ok(Architecture::LineOnly),
            "hgnn" => Ok(Architecture::Hgnn),
            _ => Err(Error::InvalidArgument(format!("unknown architecture `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Node,
    Edge,
}

/// A hypergraph with its shift operators and readout candidates.
#[derive(Clone, Debug)]
pub struct HennContext {
    pub hypergraph: Hypergraph,
    pub clique: ShiftOperator,
    pub line: ShiftOperator,
    pub hgnn: ShiftOperator,
    /// Hyperedge indices read out as class logits, in class order.
    pub candidates: Vec<usize>,
    memberships: Vec<Vec<usize>>,
}

impl HennContext {
    pub fn new(hypergraph: Hypergraph, candidates: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = candidates.iter().find(|&&c| c >= hypergraph.m()) {
            return Err(Error::InvalidArgument(format!(
                "candidate hyperedge {bad} out of range"
            )));
        }
        Ok(Self {
            clique: gso(&hypergraph, GsoKind::CliqueHenn)?,
            line: gso(&hypergraph, GsoKind::LineHenn)?,
            hgnn: gso(&hypergraph, GsoKind::Hgnn)?,
            memberships: hypergraph.node_memberships(),
            hypergraph,
            candidates,
        })
    }

    /// Relabels nodes (`node_perm[old] = new`) and hyperedges consistently.
    pub fn permuted(&self, node_perm: &[usize], edge_perm: &[usize]) -> Result<Self> {
        let h = self
            .hypergraph
            .permute_nodes(node_perm)?
            .permute_edges(edge_perm)?;
        let candidates = self.candidates.iter().map(|&c| edge_perm[c]).collect();
        Self::new(h, candidates)
    }

    pub fn operator(&self, side: Side, arch: Architecture) -> &ShiftOperator {
        match (side, arch.node_kind()) {
            (Side::Edge, _) => &self.line,
            (Side::Node, GsoKind::Hgnn) => &self.hgnn,
            (Side::Node, _) => &self.clique,
        }
    }

    pub fn n(&self) -> usize {
        self.hypergraph.n()
    }

    pub fn m(&self) -> usize {
        self.hypergraph.m()
    }
}

/// Max-pooling between node and hyperedge signals, with the winning index
/// of every output entry kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Pooled {
    pub values: DMatrix<f64>,
    argmax: Vec<usize>,
}

impl Pooled {
    /// Routes `grad` (shaped like `values`) back to the pooled input rows.
    pub fn backward(&self, grad: &DMatrix<f64>, input_rows: usize) -> DMatrix<f64> {
        let (rows, cols) = grad.shape();
        let mut out = DMatrix::zeros(input_rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                out[(self.argmax[c * rows + r], c)] += grad[(r, c)];
            }
        }
        out
    }
}

fn max_pool(x: &DMatrix<f64>, groups: &[Vec<usize>]) -> Pooled {
    let cols = x.ncols();
    let rows = groups.len();
    let mut values = DMatrix::zeros(rows, cols);
    let mut argmax = vec![0; rows * cols];
    for c in 0..cols {
        for (r, g) in groups.iter().enumerate() {
            let mut best = g[0];
            for &i in &g[1..] {
                if x[(i, c)] > x[(best, c)] {
                    best = i;
                }
            }
            values[(r, c)] = x[(best, c)];
            argmax[c * rows + r] = best;
        }
    }
    Pooled { values, argmax }
}

/// `out[j][c] = max_{i ∈ e_j} x[i][c]`.
pub fn pool_node_to_edge(x: &DMatrix<f64>, h: &Hypergraph) -> Pooled {
    max_pool(x, h.edges())
}

/// `out[i][c] = max_{j ∋ i} x[j][c]`.
pub fn pool_edge_to_node(x: &DMatrix<f64>, h: &Hypergraph) -> Pooled {
    max_pool(x, &h.node_memberships())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub side: Side,
    pub gnn: GnnModel,
}

/// A sequence of node- or hyperedge-side GNN stages. Between stages on
/// different sides the signal is max-pooled along the incidence; a trailing
/// node-side signal is pooled to hyperedges, and a leading hyperedge-side
/// stage receives the input pooled to hyperedges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HennModel {
    pub architecture: Architecture,
    pub stages: Vec<Stage>,
}

/// Layer widths and filter taps shared by all architectures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub hidden: usize,
    pub taps: usize,
    /// Filtering layers per stage. HENN splits them between its two stages.
    pub layers: usize,
    pub nonlinearity: Nonlinearity,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            hidden: 4,
            taps: 3,
            layers: 2,
            nonlinearity: Nonlinearity::Relu,
        }
    }
}

fn stack_widths(f_in: usize, hidden: usize, f_out: usize, layers: usize) -> Vec<usize> {
    let mut w = vec![f_in];
    w.extend(std::iter::repeat_n(hidden, layers.saturating_sub(1)));
    w.push(f_out);
    w
}

impl HennModel {
    pub fn new(architecture: Architecture, stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidArgument("model has no stages".into()));
        }
        for w in stages.windows(2) {
            let (a, b) = (&w[0].gnn, &w[1].gnn);
            if a.feature_counts().last() != b.feature_counts().first() {
                return Err(Error::InvalidArgument(
                    "stage widths do not chain".into(),
                ));
            }
        }
        if *stages.last().unwrap().gnn.feature_counts().last().unwrap() != 1 {
            return Err(Error::InvalidArgument(
                "the final stage must output one feature".into(),
            ));
        }
        Ok(Self {
            architecture,
            stages,
        })
    }

    /// Randomly initialized model with the standard stage layout of `arch`:
    /// HENN gets one node stage and one hyperedge stage of `ceil(layers/2)`
    /// and `floor(layers/2)` layers (at least one each); baselines get one
    /// stage of `layers` layers.
    pub fn build<R: Rng + ?Sized>(arch: Architecture, shape: &ModelShape, rng: &mut R) -> Result<Self> {
        let scale = 1.0 / shape.taps as f64;
        let make = |widths: &[usize], rng: &mut R| {
            GnnModel::random(widths, shape.taps, shape.nonlinearity, scale, rng)
                .map(|g| g.with_output_activation(false))
        };
        let stages = match arch {
            Architecture::Henn => {
                let node_layers = shape.layers.div_ceil(2).max(1);
                let edge_layers = (shape.layers / 2).max(1);
                let mut node = make(&stack_widths(1, shape.hidden, shape.hidden, node_layers), rng)?;
                node.activate_output = true;
                let edge = make(&stack_widths(shape.hidden, shape.hidden, 1, edge_layers), rng)?;
                vec![
                    Stage {
                        side: Side::Node,
                        gnn: node,
                    },
                    Stage {
                        side: Side::Edge,
                        gnn: edge,
                    },
                ]
            }
            Architecture::CliqueOnly | Architecture::Hgnn => vec![Stage {
                side: Side::Node,
                gnn: make(&stack_widths(1, shape.hidden, 1, shape.layers), rng)?,
            }],
            Architecture::LineOnly => vec![Stage {
                side: Side::Edge,
                gnn: make(&stack_widths(1, shape.hidden, 1, shape.layers), rng)?,
            }],
        };
        Self::new(arch, stages)
    }

    pub fn param_count(&self) -> usize {
        self.stages.iter().map(|s| s.gnn.param_count()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.stages.iter().flat_map(|s| s.gnn.params()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut offset = 0;
        for s in &mut self.stages {
            let k = s.gnn.param_count();
            s.gnn.set_params(&p[offset..offset + k]);
            offset += k;
        }
    }

    /// Human-readable location of a flat parameter index.
    pub fn param_path(&self, mut idx: usize) -> String {
        for (s, stage) in self.stages.iter().enumerate() {
            for (l, layer) in stage.gnn.layers.iter().enumerate() {
                let per_tap = layer.f_in() * layer.f_out();
                let count = per_tap * layer.taps.len();
                if idx < count {
                    let (k, r) = (idx / per_tap, idx % per_tap);
                    let (j, i) = (r % layer.f_in(), r / layer.f_in());
                    return format!("stage {s} layer {l} tap {k} output {i} input {j}");
                }
                idx -= count;
            }
        }
        format!("parameter {idx} (out of range)")
    }

    /// Normalizes every filter on the spectrum of its stage's operator.
    pub fn normalize(&mut self, ctx: &HennContext) {
        let arch = self.architecture;
        for s in &mut self.stages {
            s.gnn
                .normalize_on(&ctx.operator(s.side, arch).spectrum().eigenvalues);
        }
    }

    /// Largest integral Lipschitz constant over all filters, each measured
    /// on its stage's spectrum.
    pub fn max_lipschitz(&self, ctx: &HennContext) -> f64 {
        self.stages
            .iter()
            .map(|s| {
                let sp = ctx.operator(s.side, self.architecture).spectrum();
                s.gnn.max_lipschitz(sp.lambda_min(), sp.lambda_max())
            })
            .fold(0.0, f64::max)
    }

    /// Hyperedge signals (m × 1) before readout.
    pub fn edge_output(&self, ctx: &HennContext, x0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.forward_cached(ctx, x0)?.edge_output)
    }

    /// Logits over the candidate hyperedges.
    pub fn forward(&self, ctx: &HennContext, x0: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.forward_cached(ctx, x0)?.logits)
    }

    pub fn predict(&self, ctx: &HennContext, x0: &DMatrix<f64>) -> Result<usize> {
        Ok(argmax(&self.forward(ctx, x0)?))
    }

    pub fn forward_cached(&self, ctx: &HennContext, x0: &DMatrix<f64>) -> Result<HennCache> {
        if x0.nrows() != ctx.n() {
            return Err(Error::DimensionMismatch {
                expected: ctx.n(),
                found: x0.nrows(),
            });
        }
        let mut steps = Vec::with_capacity(2 * self.stages.len() + 1);
        let mut side = Side::Node;
        let mut x = x0.clone();
        for stage in &self.stages {
            if stage.side != side {
                let p = pool(&x, side, ctx);
                x = p.values.clone();
                steps.push(Step::Pool(p, side));
                side = stage.side;
            }
            let s = ctx.operator(side, self.architecture);
            let cache = stage.gnn.forward_cached(s, &x)?;
            x = cache.output.clone();
            steps.push(Step::Gnn(cache));
        }
        if side == Side::Node {
            let p = pool(&x, side, ctx);
            x = p.values.clone();
            steps.push(Step::Pool(p, side));
        }
        let logits = ctx.candidates.iter().map(|&c| x[(c, 0)]).collect();
        Ok(HennCache {
            steps,
            edge_output: x,
            logits,
        })
    }

    /// Parameter gradient given `∂loss/∂logits`.
    pub fn backward(&self, ctx: &HennContext, cache: &HennCache, d_logits: &[f64]) -> Vec<f64> {
        let mut g = DMatrix::zeros(ctx.m(), 1);
        for (&c, &d) in ctx.candidates.iter().zip(d_logits) {
            g[(c, 0)] += d;
        }
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(self.stages.len());
        let mut stage_idx = self.stages.len();
        let mut side = Side::Edge;
        for step in cache.steps.iter().rev() {
            match step {
                Step::Pool(p, from) => {
                    let rows = if *from == Side::Node { ctx.n() } else { ctx.m() };
                    g = p.backward(&g, rows);
                    side = *from;
                }
                Step::Gnn(c) => {
                    stage_idx -= 1;
                    let stage = &self.stages[stage_idx];
                    let s = ctx.operator(stage.side, self.architecture);
                    let (pg, dx) = stage.gnn.backward(s, c, &g);
                    grads.push(pg);
                    g = dx;
                    side = stage.side;
                }
            }
        }
        debug_assert_eq!(side, Side::Node);
        grads.reverse();
        grads.concat()
    }
}

fn pool(x: &DMatrix<f64>, from: Side, ctx: &HennContext) -> Pooled {
    match from {
        Side::Node => max_pool(x, ctx.hypergraph.edges()),
        Side::Edge => max_pool(x, &ctx.memberships),
    }
}

#[derive(Clone, Debug)]
enum Step {
    Gnn(ForwardCache),
    /// Pooling away from the given side.
    Pool(Pooled, Side),
}

#[derive(Clone, Debug)]
pub struct HennCache {
    steps: Vec<Step>,
    pub edge_output: DMatrix<f64>,
    pub logits: Vec<f64>,
}

/// Index of the largest entry, first on ties.
pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// `Σ_i C·L_i·ε_i·Π_j f_j^{L_j}` over `r` representations.
pub fn theorem2_bound(depths: &[usize], widths: &[usize], epsilons: &[f64], c: f64) -> f64 {
    let product: f64 = depths
        .iter()
        .zip(widths)
        .map(|(&l, &f)| (f as f64).powi(l as i32))
        .product();
    depths
        .iter()
        .zip(epsilons)
        .map(|(&l, &e)| c * l as f64 * e * product)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub trials: usize,
    pub epsilons: Vec<f64>,
    pub lipschitz: f64,
    pub bound: f64,
    pub threshold: f64,
    pub max_deviation: f64,
    pub violations: usize,
}

impl Theorem2Report {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Compares the hyperedge outputs of `model` on two contexts over random
/// unit-norm node inputs. `epsilons` holds one coefficient per stage.
pub fn check_theorem2<R: Rng + ?Sized>(
    model: &HennModel,
    ctx: &HennContext,
    ctx_tilde: &HennContext,
    epsilons: &[f64],
    trials: usize,
    slack: f64,
    rng: &mut R,
) -> Result<Theorem2Report> {
    if epsilons.len() != model.stages.len() {
        return Err(Error::DimensionMismatch {
            expected: model.stages.len(),
            found: epsilons.len(),
        });
    }
    let lipschitz = model
        .stages
        .iter()
        .map(|s| {
            let a = ctx.operator(s.side, model.architecture).spectrum();
            let b = ctx_tilde.operator(s.side, model.architecture).spectrum();
            s.gnn.max_lipschitz(
                a.lambda_min().min(b.lambda_min()),
                a.lambda_max().max(b.lambda_max()),
            )
        })
        .fold(0.0, f64::max);
    let depths: Vec<usize> = model.stages.iter().map(|s| s.gnn.depth()).collect();
    let widths: Vec<usize> = model
        .stages
        .iter()
        .map(|s| s.gnn.feature_counts().into_iter().max().unwrap())
        .collect();
    let bound = if model.stages.len() == 1 {
        transferability_bound(&model.stages[0].gnn.feature_counts(), epsilons[0], lipschitz)
    } else {
        theorem2_bound(&depths, &widths, epsilons, lipschitz)
    };
    let threshold = bound + slack * epsilons.iter().map(|e| e * e).sum::<f64>();
    let mut max_deviation: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..trials {
        let x = random_unit(ctx.n(), 1, rng);
        let d = (model.edge_output(ctx, &x)? - model.edge_output(ctx_tilde, &x)?).norm();
        max_deviation = max_deviation.max(d);
        violations += (d > threshold) as usize;
    }
    Ok(Theorem2Report {
        trials,
        epsilons: epsilons.to_vec(),
        lipschitz,
        bound,
        threshold,
        max_deviation,
        violations,
    })
}
