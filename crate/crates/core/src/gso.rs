//! Graph shift operators built from hypergraphs and graphs.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{check_permutation, Graph, Hypergraph};
use crate::spectral::{eigendecompose_matrix, refined_colours, Spectrum};

/// Relative symmetry tolerance, as a fraction of the operator norm.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Relative PSD tolerance, as a fraction of the largest eigenvalue.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GsoKind {
    CliqueHenn,
    LineHenn,
    Hgnn,
    HgnnPlus,
    NormalizedLaplacian,
    AdjacencyNormalized,
    Custom,
}

impl GsoKind {
    pub const HYPERGRAPH_KINDS: [GsoKind; 4] = [
        GsoKind::CliqueHenn,
        GsoKind::LineHenn,
        GsoKind::Hgnn,
        GsoKind::HgnnPlus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GsoKind::CliqueHenn => "clique-henn",
            GsoKind::LineHenn => "line-henn",
            GsoKind::Hgnn => "hgnn",
            GsoKind::HgnnPlus => "hgnn-plus",
            GsoKind::NormalizedLaplacian => "normalized-laplacian",
            GsoKind::AdjacencyNormalized => "adjacency-normalized",
            GsoKind::Custom => "custom",
        }
    }

    /// Whether the operator acts on hyperedge signals rather than node signals.
    pub fn is_edge_side(self) -> bool {
        self == GsoKind::LineHenn
    }
}

impl fmt::Display for GsoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GsoKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            GsoKind::CliqueHenn,
            GsoKind::LineHenn,
            GsoKind::Hgnn,
            GsoKind::HgnnPlus,
            GsoKind::NormalizedLaplacian,
            GsoKind::AdjacencyNormalized,
            GsoKind::Custom,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown shift operator kind `{s}`")))
    }
}

/// A symmetric matrix tagged with its construction recipe, with its spectrum
/// computed at construction.
#[derive(Clone)]
pub struct ShiftOperator {
    matrix: DMatrix<f64>,
    kind: GsoKind,
    spectrum: Spectrum,
    rows: OnceLock<SparseRows>,
}

impl fmt::Debug for ShiftOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShiftOperator")
            .field("kind", &self.kind)
            .field("size", &self.size())
            .field("lambda_min", &self.spectrum.lambda_min())
            .field("lambda_max", &self.spectrum.lambda_max())
            .finish()
    }
}

impl ShiftOperator {
    /// Checks symmetry (and PSD-ness unless `kind` is `Custom`), symmetrizes
    /// exactly and caches the spectrum.
    pub fn new(matrix: DMatrix<f64>, kind: GsoKind) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let sym = symmetrize(&matrix);
        let asymmetry = (&matrix - &sym).norm();
        let spectrum = eigendecompose_matrix(&sym);
        let tolerance = SYMMETRY_TOL * spectrum.op_norm();
        if asymmetry > tolerance {
            return Err(Error::NotSymmetric {
                asymmetry,
                tolerance,
            });
        }
        if kind != GsoKind::Custom && !spectrum.is_psd() {
            return Err(Error::NotPsd {
                min_eigenvalue: spectrum.lambda_min(),
            });
        }
        Ok(Self {
            matrix: sym,
            kind,
            spectrum,
            rows: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> GsoKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// `S · X`, exactly permutation equivariant: relabelling `S` and the rows
    /// of `X` together relabels the output without changing a bit.
    pub fn shift(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.rows.get_or_init(|| SparseRows::new(&self.matrix)).mul(x)
    }

    /// `P S Pᵀ` with `perm[old] = new`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.size())?;
        Self::new(permute_symmetric(&self.matrix, perm), self.kind)
    }

    /// Builds an operator from a scaled copy, e.g. `(1 + δ) S`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.matrix * factor, self.kind)
    }

    pub fn read_csv(path: impl AsRef<Path>, kind: GsoKind) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (k, line) in std::io::BufReader::new(f).lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let row = t
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: k + 1,
                        message: format!("cannot parse `{}`", v.trim()),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: rows[bad].len(),
            });
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(m, kind)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for row in self.matrix.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(f, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Nonzeros of each row, ordered by the refined colour of their column and
/// then by value, so the summation order does not depend on labels.
#[derive(Clone, Debug)]
struct SparseRows {
    starts: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    /// Half-open runs of entries with equal colour and value. Their order
    /// is set per input by sorting the multiplied values.
    ties: Vec<(usize, usize)>,
}

impl SparseRows {
    fn new(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let colour = refined_colours(m);
        let key = |i: usize, j: usize| (colour[j], m[(i, j)]);
        let mut starts = vec![0];
        let mut cols = Vec::new();
        let mut ties = Vec::new();
        for i in 0..n {
            let mut row: Vec<usize> = (0..n).filter(|&j| m[(i, j)] != 0.0).collect();
            row.sort_by(|&a, &b| {
                let (ka, kb) = (key(i, a), key(i, b));
                ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
            });
            let base = cols.len();
            let mut k = 0;
            while k < row.len() {
                let mut end = k + 1;
                while end < row.len() && key(i, row[end]).0 == key(i, row[k]).0
                    && key(i, row[end]).1.to_bits() == key(i, row[k]).1.to_bits()
                {
                    end += 1;
                }
                if end - k > 1 {
                    ties.push((base + k, base + end));
                }
                k = end;
            }
            cols.extend(row);
            starts.push(cols.len());
        }
        let vals = (0..n)
            .flat_map(|i| cols[starts[i]..starts[i + 1]].iter().map(move |&j| m[(i, j)]))
            .collect();
        Self {
            starts,
            cols,
            vals,
            ties,
        }
    }

    fn mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.starts.len() - 1;
        let mut out = DMatrix::zeros(n, x.ncols());
        let mut buf = Vec::new();
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut tie = 0;
            for i in 0..n {
                let mut acc = 0.0;
                let mut k = self.starts[i];
                while k < self.starts[i + 1] {
                    if tie < self.ties.len() && self.ties[tie].0 == k {
                        let (lo, hi) = self.ties[tie];
                        buf.clear();
                        buf.extend(self.cols[lo..hi].iter().map(|&j| xc[j]));
                        buf.sort_by(f64::total_cmp);
                        for &v in &buf {
                            acc += self.vals[k] * v;
                        }
                        tie += 1;
                        k = hi;
                    } else {
                        acc += self.vals[k] * xc[self.cols[k]];
                        k += 1;
                    }
                }
                out[(i, c)] = acc;
            }
        }
        out
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

pub(crate) fn permute_symmetric(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(perm[i], perm[j])] = m[(i, j)];
        }
    }
    out
}

/// Builds the shift operator of `kind` for `h`.
///
/// `Hgnn` and `HgnnPlus` produce the same matrix: the random-walk form
/// `D_v⁻¹ B W D_e⁻¹ Bᵀ` is similar to the symmetric one via `D_v^{1/2}`.
pub fn gso(h: &Hypergraph, kind: GsoKind) -> Result<ShiftOperator> {
    let m = match kind {
        GsoKind::CliqueHenn => clique_matrix(h, false),
        GsoKind::Hgnn | GsoKind::HgnnPlus => clique_matrix(h, true),
        GsoKind::LineHenn => line_matrix(h),
        GsoKind::NormalizedLaplacian => return normalized_laplacian(&h.clique_expansion()),
        GsoKind::AdjacencyNormalized => return normalized_adjacency(&h.clique_expansion()),
        GsoKind::Custom => {
            return Err(Error::InvalidArgument(
                "a custom operator cannot be derived from a hypergraph".into(),
            ))
        }
    };
    ShiftOperator::new(m, kind)
}

/// `D_v^{-1/2} B W Bᵀ D_v^{-1/2}`, or with `D_e⁻¹` inserted when `per_size`.
fn clique_matrix(h: &Hypergraph, per_size: bool) -> DMatrix<f64> {
    let n = h.n();
    let mut a = DMatrix::zeros(n, n);
    let weight = |w: f64, size: usize| if per_size { w / size as f64 } else { w };
    for j in h.edges_by_weight(weight) {
        let e = &h.edges()[j];
        let w = weight(h.weights()[j], e.len());
        for &i in e {
            for &j in e {
                a[(i, j)] += w;
            }
        }
    }
    let scale: Vec<f64> = h
        .degrees()
        .node_degrees
        .iter()
        .map(|d| 1.0 / d.sqrt())
        .collect();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] *= scale[i] * scale[j];
        }
    }
    a
}

/// Exact overlap counts `Bᵀ B`.
fn overlap_matrix(h: &Hypergraph) -> DMatrix<f64> {
    let m = h.m();
    let mut o = DMatrix::zeros(m, m);
    for es in h.node_memberships() {
        for &j in &es {
            for &k in &es {
                o[(j, k)] += 1.0;
            }
        }
    }
    o
}

/// `D_ee^{-1/2} W^{1/2} Bᵀ B W^{1/2} D_ee^{-1/2}`.
fn line_matrix(h: &Hypergraph) -> DMatrix<f64> {
    let mut o = overlap_matrix(h);
    let dee = h.degrees().edge_intersection_degrees;
    let scale: Vec<f64> = h
        .weights()
        .iter()
        .zip(&dee)
        .map(|(w, d)| (w / d).sqrt())
        .collect();
    let m = h.m();
    for j in 0..m {
        for k in 0..m {
            o[(j, k)] *= scale[j] * scale[k];
        }
    }
    o
}

/// The unsymmetrized line-side operator `D_ee^{-1/2} Bᵀ B W D_ee^{-1/2}`.
/// Equals the `LineHenn` matrix when all weights are one.
pub fn line_gso_literal(h: &Hypergraph) -> DMatrix<f64> {
    let mut o = overlap_matrix(h);
    let dee = h.degrees().edge_intersection_degrees;
    let w = h.weights();
    let m = h.m();
    for j in 0..m {
        for k in 0..m {
            o[(j, k)] *= w[k] / (dee[j] * dee[k]).sqrt();
        }
    }
    o
}

fn inv_sqrt_degrees(g: &Graph) -> Result<Vec<f64>> {
    let degrees = g.degrees();
    if let Some(node) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedNode { node });
    }
    Ok(degrees.iter().map(|d| 1.0 / d.sqrt()).collect())
}

fn normalized_adjacency_matrix(g: &Graph) -> Result<DMatrix<f64>> {
    let s = inv_sqrt_degrees(g)?;
    let n = g.n();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        g.adjacency[(i, j)] * (s[i] * s[j])
    }))
}

/// `I − D^{-1/2} A D^{-1/2}` of a connected graph.
pub fn normalized_laplacian(g: &Graph) -> Result<ShiftOperator> {
    ShiftOperator::new(normalized_laplacian_matrix(g)?, GsoKind::NormalizedLaplacian)
}

/// The matrix of [`normalized_laplacian`] without the eigendecomposition.
pub fn normalized_laplacian_matrix(g: &Graph) -> Result<DMatrix<f64>> {
    let components = g.component_count();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    let a = normalized_adjacency_matrix(g)?;
    let n = g.n();
    Ok(DMatrix::from_fn(n, n, |i, j| (i == j) as u8 as f64 - a[(i, j)]))
}

/// `I + D^{-1/2} A D^{-1/2}`, the PSD shift of the normalized adjacency.
pub fn normalized_adjacency(g: &Graph) -> Result<ShiftOperator> {
    let a = normalized_adjacency_matrix(g)?;
    let n = g.n();
    let m = DMatrix::from_fn(n, n, |i, j| (i == j) as u8 as f64 + a[(i, j)]);
    ShiftOperator::new(m, GsoKind::AdjacencyNormalized)
}
