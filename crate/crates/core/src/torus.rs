//! Random point clouds on a torus and their Vietoris–Rips hypergraphs.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;

/// Distance from the torus center to the tube center.
pub const MAJOR_RADIUS: f64 = 1.5;
/// Tube radius; inner and outer radii are 1 and 2.
pub const MINOR_RADIUS: f64 = 0.5;
pub const DEFAULT_POINTS: usize = 500;
pub const DEFAULT_RADIUS: f64 = 0.4;
/// Source localization needs this many hyperedges to choose from.
pub const MIN_HYPEREDGES: usize = 10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeometricHypergraph {
    pub points: Vec<[f64; 3]>,
    pub radius: f64,
    /// Point index of each hypergraph node. Points within `radius` of no other
    /// point are left out of the hypergraph.
    pub nodes: Vec<usize>,
    pub hypergraph: Hypergraph,
}

/// Area-uniform samples: the tube angle is drawn by rejection against the
/// local area element `R + r cos θ`.
pub fn sample_torus<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<[f64; 3]> {
    let (big, small) = (MAJOR_RADIUS, MINOR_RADIUS);
    (0..n)
        .map(|_| {
            let theta = loop {
                let t = rng.random_range(0.0..TAU);
                if rng.random_range(0.0..big + small) <= big + small * t.cos() {
                    break t;
                }
            };
            let phi = rng.random_range(0.0..TAU);
            let ring = big + small * theta.cos();
            [ring * phi.cos(), ring * phi.sin(), small * theta.sin()]
        })
        .collect()
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Maximal cliques of a graph given by sorted adjacency lists, each sorted,
/// in lexicographic order. Bron–Kerbosch with Tomita pivoting.
pub fn maximal_cliques(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    fn expand(
        r: &mut Vec<usize>,
        mut p: Vec<usize>,
        mut x: Vec<usize>,
        adj: &[Vec<usize>],
        out: &mut Vec<Vec<usize>>,
    ) {
        if p.is_empty() {
            if x.is_empty() {
                let mut c = r.clone();
                c.sort_unstable();
                out.push(c);
            }
            return;
        }
        let pivot = p
            .iter()
            .chain(&x)
            .copied()
            .max_by_key(|&u| (intersect(&p, &adj[u]).len(), std::cmp::Reverse(u)))
            .unwrap();
        let candidates: Vec<usize> = p
            .iter()
            .copied()
            .filter(|v| adj[pivot].binary_search(v).is_err())
            .collect();
        for v in candidates {
            r.push(v);
            expand(r, intersect(&p, &adj[v]), intersect(&x, &adj[v]), adj, out);
            r.pop();
            p.retain(|&u| u != v);
            let pos = x.binary_search(&v).unwrap_or_else(|e| e);
            x.insert(pos, v);
        }
    }
    let mut out = Vec::new();
    expand(
        &mut Vec::new(),
        (0..adj.len()).collect(),
        Vec::new(),
        adj,
        &mut out,
    );
    out.sort();
    out
}

/// Hyperedges are the maximal cliques (size ≥ 2) of the graph joining points
/// at Euclidean distance ≤ `radius`. Returns the hypergraph and the point
/// index of each node.
pub fn vietoris_rips_hypergraph(points: &[[f64; 3]], radius: f64) -> Result<(Hypergraph, Vec<usize>)> {
    let n = points.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dist(&points[i], &points[j]) <= radius {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let cliques: Vec<Vec<usize>> = maximal_cliques(&adj)
        .into_iter()
        .filter(|c| c.len() >= 2)
        .collect();
    if cliques.is_empty() {
        return Err(Error::TooFewHyperedges {
            found: 0,
            needed: 1,
        });
    }
    let nodes: Vec<usize> = (0..n).filter(|&i| !adj[i].is_empty()).collect();
    let mut relabel = vec![usize::MAX; n];
    for (new, &old) in nodes.iter().enumerate() {
        relabel[old] = new;
    }
    let edges = cliques
        .into_iter()
        .map(|c| c.into_iter().map(|i| relabel[i]).collect())
        .collect();
    Ok((Hypergraph::unweighted(nodes.len(), edges)?, nodes))
}

pub fn sample_torus_vr(n_points: usize, radius: f64, seed: u64) -> Result<GeometricHypergraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = sample_torus(n_points, &mut rng);
    let (hypergraph, nodes) = match vietoris_rips_hypergraph(&points, radius) {
        Ok(v) => v,
        Err(Error::TooFewHyperedges { found, .. }) => {
            return Err(Error::TooFewHyperedges {
                found,
                needed: MIN_HYPEREDGES,
            })
        }
        Err(e) => return Err(e),
    };
    if hypergraph.m() < MIN_HYPEREDGES {
        return Err(Error::TooFewHyperedges {
            found: hypergraph.m(),
            needed: MIN_HYPEREDGES,
        });
    }
    if nodes.len() < n_points {
        log::info!(
            "dropped {} isolated point(s) from the hypergraph",
            n_points - nodes.len()
        );
    }
    Ok(GeometricHypergraph {
        points,
        radius,
        nodes,
        hypergraph,
    })
}
