//! Random-cluster model with edge weight `p` and cluster weight `q`.
//!
//! Each site `x` carries a state in `E = {0,1}^d` whose bit `i` opens the
//! edge `{x, x + e_{i+1}}`. The kernel weight is
//! `w(ζ, ω, Λ) = p^{‖ζ‖} (1-p)^{d|Λ|-‖ζ‖} q^{C(ζω, Λ)}`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{RollbackUnionFind, UnionFind};
use crate::error::{Error, Result};
use crate::lattice::{Adjacency, Alphabet, Guard, Site, Tail, Window};
use crate::measures::{log_sum_exp, Envelope};

use super::{enumerate_classes, Prepared};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomClusterParams {
    pub p: f64,
    pub q: f64,
}

impl RandomClusterParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        let params = RandomClusterParams { p, q };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Domain(format!("edge weight p = {} must lie in (0, 1)", self.p)));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::Domain(format!("cluster weight q = {} must be positive", self.q)));
        }
        Ok(())
    }
}

/// Labels are bit strings, character `i` giving the edge along `e_{i+1}`.
pub fn rc_alphabet(dim: usize) -> Result<Alphabet> {
    if dim == 0 || dim > crate::lattice::MAX_DIM {
        return Err(Error::Domain(format!("unsupported dimension {dim}")));
    }
    Ok(Alphabet::uniform((0..1u32 << dim).map(|m| {
        (0..dim)
            .map(|i| if m >> i & 1 == 1 { '1' } else { '0' })
            .collect::<String>()
    })))
}

pub(crate) struct PreparedRandomCluster {
    params: RandomClusterParams,
    lambda: Window,
    frame: Window,
    outside: Window,
    alphabet: Alphabet,
    dim: usize,
    node_count: usize,
    /// Edges encoded by each boundary site, per axis.
    omega_edges: Vec<Vec<Option<(usize, usize)>>>,
    /// Endpoints of the `d|Λ|` edges encoded inside `Λ`, in code-bit order.
    lambda_edges: Vec<(usize, usize)>,
    qualifying: Vec<usize>,
    rim: Option<Vec<usize>>,
}

impl PreparedRandomCluster {
    pub(crate) fn new(params: RandomClusterParams, lambda: &Window, frame: &Window, tail: Tail, guard: &Guard) -> Result<Self> {
        let dim = lambda.dim();
        let alphabet = rc_alphabet(dim)?;
        guard.entries(alphabet.size(), lambda.len(), "random-cluster kernel")?;
        let closed = match tail {
            Tail::Fixed(0) => true,
            Tail::Fixed(s) => {
                return Err(Error::Domain(format!(
                    "tail state {s} opens infinitely many edges; only the closed tail is supported"
                )))
            }
            Tail::Unknown => false,
        };
        let neighbours = lambda.outer_boundary(Adjacency::Square);
        if !closed && !neighbours.is_subset(frame) {
            return Err(Error::Ambiguity("frame does not contain every neighbour of the window".into()));
        }
        let mut index: HashMap<Site, usize> = frame.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let node = |s: Site, index: &mut HashMap<Site, usize>| -> usize {
            let n = index.len();
            *index.entry(s).or_insert(n)
        };
        for y in neighbours.iter() {
            node(y.clone(), &mut index);
        }
        let outside = frame.difference(lambda);
        let units: Vec<Site> = (0..dim).map(|i| Site::unit(dim, i)).collect();
        let mut omega_edges = Vec::with_capacity(outside.len());
        for x in outside.iter() {
            let a = index[x];
            let row = units
                .iter()
                .map(|e| {
                    let y = x.add(e);
                    if closed || frame.contains(&y) {
                        Some((a, node(y, &mut index)))
                    } else {
                        None
                    }
                })
                .collect();
            omega_edges.push(row);
        }
        let mut lambda_edges = Vec::with_capacity(dim * lambda.len());
        for x in lambda.iter() {
            for e in &units {
                lambda_edges.push((index[x], index[&x.add(e)]));
            }
        }
        let qualifying = lambda
            .closed_neighborhood(Adjacency::Square)
            .iter()
            .map(|x| index[x])
            .collect();
        let rim = (!closed).then(|| frame.rim(Adjacency::Square));
        Ok(PreparedRandomCluster {
            params,
            lambda: lambda.clone(),
            frame: frame.clone(),
            outside,
            alphabet,
            dim,
            node_count: index.len(),
            omega_edges,
            lambda_edges,
            qualifying,
            rim,
        })
    }

    /// Partition of the endpoints of `Λ`-encoded edges induced by the
    /// boundary, and the number of boundary clusters meeting `Λ ∪ N(Λ)`.
    pub(crate) fn boundary_partition(&self, outside: &[usize]) -> Result<(Vec<u32>, usize)> {
        let mut uf = UnionFind::new(self.node_count);
        for (o, &mask) in outside.iter().enumerate() {
            for axis in 0..self.dim {
                if mask >> axis & 1 == 1 {
                    if let Some((a, b)) = self.omega_edges[o][axis] {
                        uf.union(a, b);
                    }
                }
            }
        }
        let mut roots: Vec<usize> = self.qualifying.iter().map(|&q| uf.find(q)).collect();
        roots.sort_unstable();
        roots.dedup();
        if let Some(rim) = &self.rim {
            if rim.iter().any(|&r| roots.binary_search(&uf.find(r)).is_ok()) {
                return Err(Error::Ambiguity("a counted cluster reaches the rim of the frame".into()));
            }
        }
        let mut relabel: HashMap<usize, u32> = HashMap::new();
        let mut labels = Vec::with_capacity(2 * self.lambda_edges.len());
        for &(a, b) in &self.lambda_edges {
            for v in [a, b] {
                let r = uf.find(v);
                let next = relabel.len() as u32;
                labels.push(*relabel.entry(r).or_insert(next));
            }
        }
        Ok((labels, roots.len()))
    }

    fn edge_count(&self) -> usize {
        self.lambda_edges.len()
    }
}

/// For every `ζ` (as a bitmask over the `Λ`-encoded edges), the number of
/// boundary classes merged by the open edges of `ζ`.
pub(crate) fn merge_counts(labels: &[u32], m: usize) -> Vec<u8> {
    let classes = labels.iter().copied().max().map(|x| x as usize + 1).unwrap_or(0);
    let mut uf = RollbackUnionFind::new(classes);
    let mut out = vec![0u8; 1 << m];
    fn walk(k: usize, m: usize, code: usize, merged: u8, uf: &mut RollbackUnionFind, labels: &[u32], out: &mut [u8]) {
        if k == m {
            out[code] = merged;
            return;
        }
        walk(k + 1, m, code, merged, uf, labels, out);
        let cp = uf.checkpoint();
        let joined = uf.union(labels[2 * k] as usize, labels[2 * k + 1] as usize);
        walk(k + 1, m, code | 1 << k, merged + joined as u8, uf, labels, out);
        uf.rollback(cp);
    }
    walk(0, m, 0, 0, &mut uf, labels, &mut out);
    out
}

fn log_weights_from(params: RandomClusterParams, c0: usize, merges: &[u8], m: usize) -> Vec<f64> {
    let (lp, lnp, lq) = (params.p.ln(), (1.0 - params.p).ln(), params.q.ln());
    merges
        .iter()
        .enumerate()
        .map(|(code, &mg)| {
            let open = (code as u64).count_ones() as f64;
            open * lp + (m as f64 - open) * lnp + (c0 as f64 - mg as f64) * lq
        })
        .collect()
}

impl Prepared for PreparedRandomCluster {
    fn lambda(&self) -> &Window {
        &self.lambda
    }

    fn frame(&self) -> &Window {
        &self.frame
    }

    fn outside(&self) -> &Window {
        &self.outside
    }

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn relevant(&self) -> Vec<usize> {
        (0..self.outside.len()).collect()
    }

    fn signature(&self, outside: &[usize]) -> Result<Vec<u32>> {
        Ok(self.boundary_partition(outside)?.0)
    }

    fn log_weights(&self, outside: &[usize]) -> Result<Vec<f64>> {
        let (labels, c0) = self.boundary_partition(outside)?;
        let m = self.edge_count();
        Ok(log_weights_from(self.params, c0, &merge_counts(&labels, m), m))
    }
}

/// Max-diameters of the random-cluster kernel families on `Λ` for several
/// parameter pairs, sharing one boundary enumeration.
pub fn diam_grid(
    lambda: &Window,
    frame: &Window,
    tail: Tail,
    grid: &[RandomClusterParams],
    guard: &Guard,
) -> Result<Vec<f64>> {
    for g in grid {
        g.validate()?;
    }
    let first = grid.first().copied().unwrap_or(RandomClusterParams { p: 0.5, q: 1.0 });
    let prepared = PreparedRandomCluster::new(first, lambda, frame, tail, guard)?;
    let (reps, _) = enumerate_classes(&prepared, 0, None, guard)?;
    let m = prepared.edge_count();
    let len = 1usize << m;
    let fresh = || vec![Envelope::new(len); grid.len()];
    let envs = reps
        .par_iter()
        .try_fold(fresh, |mut envs, rep| {
            let (labels, c0) = prepared.boundary_partition(rep)?;
            let merges = merge_counts(&labels, m);
            for (env, params) in envs.iter_mut().zip(grid) {
                let mut lw = log_weights_from(*params, c0, &merges, m);
                let z = log_sum_exp(&lw);
                for w in &mut lw {
                    *w -= z;
                }
                env.add(&lw);
            }
            Ok::<_, Error>(envs)
        })
        .try_reduce(fresh, |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                x.merge(y);
            }
            Ok(a)
        })?;
    Ok(envs.iter().map(Envelope::spread).collect())
}
