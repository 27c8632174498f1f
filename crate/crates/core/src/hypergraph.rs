//! Hypergraphs, incidence and degree matrices, and their graph expansions.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A weighted hypergraph on nodes `0..n`.
///
/// Hyperedges keep the node order they were given in; membership is what matters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypergraph {
    n: usize,
    edges: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

impl Hypergraph {
    /// Validates and builds a hypergraph. Every node must lie in some hyperedge.
    pub fn new(n: usize, edges: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidHypergraph("no nodes".into()));
        }
        if edges.is_empty() {
            return Err(Error::InvalidHypergraph("no hyperedges".into()));
        }
        if weights.len() != edges.len() {
            return Err(Error::DimensionMismatch {
                expected: edges.len(),
                found: weights.len(),
            });
        }
        let mut covered = vec![false; n];
        for (j, e) in edges.iter().enumerate() {
            if e.len() < 2 {
                return Err(Error::InvalidHypergraph(format!(
                    "hyperedge {j} has {} node(s), need at least 2",
                    e.len()
                )));
            }
            let mut seen = e.clone();
            seen.sort_unstable();
            for w in seen.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::InvalidHypergraph(format!(
                        "hyperedge {j} repeats node {}",
                        w[0]
                    )));
                }
            }
            for &i in e {
                if i >= n {
                    return Err(Error::InvalidHypergraph(format!(
                        "hyperedge {j} references node {i} but n = {n}"
                    )));
                }
                covered[i] = true;
            }
            let w = weights[j];
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidHypergraph(format!(
                    "hyperedge {j} has non-positive weight {w}"
                )));
            }
        }
        if let Some(node) = covered.iter().position(|&c| !c) {
            return Err(Error::IsolatedNode { node });
        }
        Ok(Self { n, edges, weights })
    }

    /// Unit-weight hypergraph.
    pub fn unweighted(n: usize, edges: Vec<Vec<usize>>) -> Result<Self> {
        let m = edges.len();
        Self::new(n, edges, vec![1.0; m])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same structure, new hyperedge weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.n, self.edges.clone(), weights)
    }

    /// Hyperedges containing each node, in increasing hyperedge order.
    pub fn node_memberships(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for (j, e) in self.edges.iter().enumerate() {
            for &i in e {
                out[i].push(j);
            }
        }
        out
    }

    pub fn incidence(&self) -> IncidenceMatrix {
        let mut b = DMatrix::zeros(self.n, self.m());
        for (j, e) in self.edges.iter().enumerate() {
            for &i in e {
                b[(i, j)] = 1.0;
            }
        }
        IncidenceMatrix { entries: b }
    }

    pub fn degrees(&self) -> DegreeMatrices {
        // Sums run in an order fixed by the summands alone, so relabelling
        // nodes or hyperedges cannot change a bit of the result.
        let mut node_degrees = vec![0.0; self.n];
        for j in self.edges_by_weight(|w, _| w) {
            for &i in &self.edges[j] {
                node_degrees[i] += self.weights[j];
            }
        }
        let edge_sizes = self.edges.iter().map(|e| e.len() as f64).collect();
        let overlaps = self.incidence().overlaps();
        let m = self.m();
        let edge_intersection_degrees = (0..m)
            .map(|j| sorted_sum((0..m).map(|k| self.weights[k] * overlaps[(j, k)]).collect()))
            .collect();
        DegreeMatrices {
            node_degrees,
            edge_sizes,
            edge_intersection_degrees,
        }
    }

    /// Hyperedge indices in increasing order of `key(weight, size)`; ties
    /// keep index order.
    pub(crate) fn edges_by_weight(&self, key: impl Fn(f64, usize) -> f64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.m()).collect();
        order.sort_by(|&a, &b| {
            key(self.weights[a], self.edges[a].len()).total_cmp(&key(self.weights[b], self.edges[b].len()))
        });
        order
    }

    /// Dual hypergraph: hyperedges become nodes and each node `i` becomes the
    /// hyperedge of all hyperedges containing it. Nodes in a single hyperedge
    /// give singleton dual edges, which are not representable, so they are
    /// dropped; the dual weights are all one.
    pub fn dual(&self) -> Result<Self> {
        let edges: Vec<Vec<usize>> = self
            .node_memberships()
            .into_iter()
            .filter(|e| e.len() >= 2)
            .collect();
        Self::unweighted(self.m(), edges)
    }

    /// Relabels nodes with `perm[old] = new`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let edges = self
            .edges
            .iter()
            .map(|e| e.iter().map(|&i| perm[i]).collect())
            .collect();
        Self::new(self.n, edges, self.weights.clone())
    }

    /// Reorders hyperedges so that old hyperedge `j` becomes hyperedge `perm[j]`.
    pub fn permute_edges(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.m())?;
        let mut edges = vec![Vec::new(); self.m()];
        let mut weights = vec![0.0; self.m()];
        for (j, e) in self.edges.iter().enumerate() {
            edges[perm[j]] = e.clone();
            weights[perm[j]] = self.weights[j];
        }
        Self::new(self.n, edges, weights)
    }

    pub fn clique_expansion(&self) -> Graph {
        let b = self.incidence().entries;
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(&self.weights));
        let mut a = &b * w * b.transpose();
        a.fill_diagonal(0.0);
        Graph { adjacency: a }
    }

    pub fn line_graph(&self) -> Graph {
        let mut a = self.incidence().overlaps();
        a.fill_diagonal(0.0);
        Graph { adjacency: a }
    }

    /// One vertex per incident (node, hyperedge) pair, listed in hyperedge
    /// order; two pair-vertices are adjacent when they share the node or the
    /// hyperedge.
    pub fn star_expansion(&self) -> (Vec<(usize, usize)>, Graph) {
        let pairs: Vec<(usize, usize)> = self
            .edges
            .iter()
            .enumerate()
            .flat_map(|(j, e)| e.iter().map(move |&i| (i, j)))
            .collect();
        let p = pairs.len();
        let mut a = DMatrix::zeros(p, p);
        for s in 0..p {
            for t in s + 1..p {
                if pairs[s].0 == pairs[t].0 || pairs[s].1 == pairs[t].1 {
                    a[(s, t)] = 1.0;
                    a[(t, s)] = 1.0;
                }
            }
        }
        (pairs, Graph { adjacency: a })
    }

    /// Vertices `0..n` are nodes and `n..n+m` are hyperedges.
    pub fn bipartite_expansion(&self) -> Graph {
        let n = self.n;
        let size = n + self.m();
        let mut a = DMatrix::zeros(size, size);
        for (j, e) in self.edges.iter().enumerate() {
            for &i in e {
                a[(i, n + j)] = 1.0;
                a[(n + j, i)] = 1.0;
            }
        }
        Graph { adjacency: a }
    }

    /// Parses the `.hg` text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing `n m` header".into(),
        })?;
        let head: Vec<usize> = parse_fields(hl, header)?;
        let [n, m] = head[..] else {
            return Err(Error::Parse {
                line: hl,
                message: format!("header needs 2 fields, found {}", head.len()),
            });
        };
        let mut edges = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for (line, l) in lines.by_ref().take(m) {
            let mut it = l.split_whitespace();
            let w: f64 = parse_one(line, it.next())?;
            let k: usize = parse_one(line, it.next())?;
            let nodes: Vec<usize> = it
                .map(|t| parse_one(line, Some(t)))
                .collect::<Result<_>>()?;
            if nodes.len() != k {
                return Err(Error::Parse {
                    line,
                    message: format!("declared {k} nodes, found {}", nodes.len()),
                });
            }
            edges.push(nodes);
            weights.push(w);
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: format!("expected {m} hyperedges, found {}", edges.len()),
            });
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::Parse {
                line,
                message: "trailing content after last hyperedge".into(),
            });
        }
        Self::new(n, edges, weights)
    }

    pub fn to_hg_string(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.m());
        for (e, w) in self.edges.iter().zip(&self.weights) {
            let _ = write!(s, "{w:?} {}", e.len());
            for i in e {
                let _ = write!(s, " {i}");
            }
            s.push('\n');
        }
        s
    }

    pub fn read_hg(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut text = String::new();
        for line in std::io::BufReader::new(f).lines() {
            text.push_str(&line?);
            text.push('\n');
        }
        Self::parse(&text)
    }

    pub fn write_hg(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_hg_string().as_bytes())?;
        Ok(())
    }
}

fn parse_fields<T: std::str::FromStr>(line: usize, s: &str) -> Result<Vec<T>> {
    s.split_whitespace()
        .map(|t| parse_one(line, Some(t)))
        .collect()
}

fn parse_one<T: std::str::FromStr>(line: usize, tok: Option<&str>) -> Result<T> {
    let tok = tok.ok_or(Error::Parse {
        line,
        message: "missing field".into(),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{tok}`"),
    })
}

/// Sum of `v` taken in ascending order.
pub(crate) fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: perm.len(),
        });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument(format!(
                "not a permutation of 0..{n}"
            )));
        }
    }
    Ok(())
}

/// The n×m 0/1 node–hyperedge membership matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct IncidenceMatrix {
    pub entries: DMatrix<f64>,
}

impl IncidenceMatrix {
    /// Bᵀ B: entry (j, k) is |e_j ∩ e_k|.
    pub fn overlaps(&self) -> DMatrix<f64> {
        self.entries.tr_mul(&self.entries)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.entries.column_iter().map(|c| c.sum()).collect()
    }
}

/// Diagonals of D_v, D_e and D_ee.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeMatrices {
    pub node_degrees: Vec<f64>,
    pub edge_sizes: Vec<f64>,
    /// `Σ_k w_k |e_j ∩ e_k|`, self term included.
    pub edge_intersection_degrees: Vec<f64>,
}

/// Undirected weighted graph stored as a dense symmetric adjacency matrix
/// with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub adjacency: DMatrix<f64>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: DMatrix::zeros(n, n),
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidArgument(format!("bad edge ({i}, {j})")));
            }
            g.adjacency[(i, j)] += w;
            g.adjacency[(j, i)] += w;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.adjacency.row_iter().map(|r| r.sum()).collect()
    }

    /// Edges `(i, j, w)` with `i < j`, row-major.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let w = self.adjacency[(i, j)];
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Connected-component label per vertex, labels in order of first vertex.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if self.adjacency[(u, v)] != 0.0 && label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.components().iter().max().map_or(0, |&c| c + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.n() > 0 && self.component_count() == 1
    }

    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n())?;
        let n = self.n();
        let adjacency = DMatrix::from_fn(n, n, |_, _| 0.0);
        let mut g = Self { adjacency };
        for i in 0..n {
            for j in 0..n {
                g.adjacency[(perm[i], perm[j])] = self.adjacency[(i, j)];
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> Hypergraph {
        // v1..v7 -> 0..6
        Hypergraph::unweighted(7, vec![vec![0, 1, 2, 3], vec![3, 5, 6], vec![3, 4]]).unwrap()
    }

    #[test]
    fn incidence_small_cases() {
        let h = Hypergraph::unweighted(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let b = h.incidence().entries;
        assert_eq!(b, DMatrix::from_row_slice(3, 2, &[1., 0., 1., 1., 0., 1.]));

        let h = Hypergraph::unweighted(3, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(h.incidence().entries, DMatrix::from_element(3, 1, 1.0));

        let h = Hypergraph::unweighted(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let b = h.incidence().entries;
        assert_eq!(
            b,
            DMatrix::from_row_slice(4, 2, &[1., 0., 1., 0., 0., 1., 0., 1.])
        );
        assert_eq!(h.incidence().column_sums(), vec![2.0, 2.0]);
    }

    #[test]
    fn rejects_invalid() {
        assert!(matches!(
            Hypergraph::unweighted(3, vec![vec![0, 1]]),
            Err(Error::IsolatedNode { node: 2 })
        ));
        assert!(Hypergraph::unweighted(2, vec![vec![0]]).is_err());
        assert!(Hypergraph::unweighted(2, vec![vec![0, 0, 1]]).is_err());
        assert!(Hypergraph::unweighted(2, vec![vec![0, 2]]).is_err());
        assert!(Hypergraph::new(2, vec![vec![0, 1]], vec![0.0]).is_err());
        assert!(Hypergraph::new(2, vec![vec![0, 1]], vec![f64::NAN]).is_err());
    }

    #[test]
    fn clique_expansion_cases() {
        let h = Hypergraph::unweighted(3, vec![vec![0, 1, 2]]).unwrap();
        let g = h.clique_expansion();
        assert_eq!(g.edges(), vec![(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]);

        let h = Hypergraph::new(2, vec![vec![0, 1], vec![0, 1]], vec![1.0, 2.0]).unwrap();
        assert_eq!(h.clique_expansion().edges(), vec![(0, 1, 3.0)]);

        let g = fig1().clique_expansion();
        for (a, b) in [(3, 5), (3, 6), (5, 6)] {
            assert!(g.adjacency[(a, b)] > 0.0);
        }
    }

    #[test]
    fn line_graph_cases() {
        let h = Hypergraph::unweighted(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        assert_eq!(h.line_graph().edges(), vec![(0, 1, 1.0)]);
        let h = Hypergraph::unweighted(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(h.line_graph().edge_count(), 0);
        let lg = fig1().line_graph();
        assert_eq!(lg.edges(), vec![(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]);
    }

    #[test]
    fn star_and_bipartite() {
        let h = Hypergraph::unweighted(2, vec![vec![0, 1]]).unwrap();
        let bip = h.bipartite_expansion();
        assert_eq!(bip.edges(), vec![(0, 2, 1.0), (1, 2, 1.0)]);
        let (pairs, star) = h.star_expansion();
        assert_eq!(pairs.len(), 2);
        assert_eq!(star.edge_count(), 1);

        let bip = fig1().bipartite_expansion();
        assert_eq!(bip.n(), 10);
        assert_eq!(bip.edge_count(), 9);
    }

    #[test]
    fn degrees_match_definitions() {
        let h = Hypergraph::new(3, vec![vec![0, 1], vec![1, 2]], vec![2.0, 3.0]).unwrap();
        let d = h.degrees();
        assert_eq!(d.node_degrees, vec![2.0, 5.0, 3.0]);
        assert_eq!(d.edge_sizes, vec![2.0, 2.0]);
        // D_ee[0] = w0*2 + w1*1, D_ee[1] = w0*1 + w1*2
        assert_eq!(d.edge_intersection_degrees, vec![7.0, 8.0]);
    }

    #[test]
    fn two_uniform_reduces_to_graph() {
        let h = Hypergraph::new(
            4,
            vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]],
            vec![1.0, 2.0, 0.5, 1.5],
        )
        .unwrap();
        let a = h.clique_expansion().adjacency;
        let b = h.incidence().entries;
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(h.weights()));
        let bwbt = &b * w * b.transpose();
        let dv = DMatrix::from_diagonal(&DVector::from_vec(h.degrees().node_degrees));
        assert_eq!(bwbt, a + dv);
    }

    #[test]
    fn dual_clique_is_line_graph_on_fig1() {
        let h = fig1();
        let d = h.dual().unwrap();
        assert_eq!(
            d.clique_expansion().adjacency.map(|x| (x > 0.0) as u8),
            h.line_graph().adjacency.map(|x| (x > 0.0) as u8)
        );
    }

    #[test]
    fn hg_round_trip() {
        let h = Hypergraph::new(4, vec![vec![0, 1, 2], vec![2, 3]], vec![0.1, 2.5]).unwrap();
        let text = h.to_hg_string();
        assert_eq!(Hypergraph::parse(&text).unwrap(), h);
        let commented = format!("# a comment\n{}# trailing\n", text.replace('\n', " # x\n"));
        assert_eq!(Hypergraph::parse(&commented).unwrap(), h);
    }

    #[test]
    fn hg_parse_errors_name_line() {
        let err = Hypergraph::parse("3 1\n1 3 0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(Hypergraph::parse("3 2\n1 2 0 1\n").is_err());
        assert!(Hypergraph::parse("").is_err());
    }

    #[test]
    fn components_and_permute() {
        let g = Graph::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(g.components(), vec![0, 0, 1, 1]);
        assert!(!g.is_connected());
        let p = g.permute(&[1, 2, 3, 0]).unwrap();
        assert_eq!(p.edges(), vec![(0, 3, 1.0), (1, 2, 1.0)]);
    }
}
