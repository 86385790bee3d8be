//! Loop O(n) model written as `{0,1}`-valued functions on the faces of the
//! hexagonal lattice; loops are the interfaces between level sets.
//!
//! The weight is `n^{L(ζω, Λ)} x^{‖ζω‖_nc}`, where `L` counts level sets
//! meeting `Λ` or adjacent to it and `‖·‖_nc` counts adjacent face pairs
//! with different values and at least one face in `Λ` (loop edges). This
//! mirrors the random-cluster weight with level sets in place of clusters.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cluster::UnionFind;
use crate::error::{Error, Result};
use crate::lattice::{decode_states, Adjacency, Alphabet, Guard, Tail, Window};

use super::Prepared;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopOnParams {
    /// Loop weight.
    pub n: f64,
    /// Loop-edge weight.
    pub x: f64,
}

impl LoopOnParams {
    pub fn new(n: f64, x: f64) -> Result<Self> {
        let p = LoopOnParams { n, x };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0 && self.n.is_finite() && self.x > 0.0 && self.x.is_finite()) {
            return Err(Error::Domain("loop weights n and x must be positive".into()));
        }
        Ok(())
    }
}

pub fn loop_alphabet() -> Alphabet {
    Alphabet::uniform(["0", "1"])
}

#[derive(Clone, Copy, Debug)]
enum Face {
    Outside(usize),
    Beyond,
}

pub(crate) struct PreparedLoop {
    params: LoopOnParams,
    lambda: Window,
    frame: Window,
    outside: Window,
    alphabet: Alphabet,
    beyond: Option<u8>,
    outside_nbrs: Vec<Vec<usize>>,
    outside_rim: Vec<usize>,
    /// Faces adjacent to `Λ`, in canonical order.
    boundary_faces: Vec<Face>,
    inner_pairs: Vec<(usize, usize)>,
    /// `(Λ index, boundary face index)` for each adjacent pair.
    cross_pairs: Vec<(usize, usize)>,
    total: usize,
}

impl PreparedLoop {
    pub(crate) fn new(params: LoopOnParams, lambda: &Window, frame: &Window, tail: Tail, guard: &Guard) -> Result<Self> {
        if lambda.dim() != 2 {
            return Err(Error::Domain("the loop model lives on two-dimensional face grids".into()));
        }
        let total = guard.entries(2, lambda.len(), "loop kernel")?;
        let adj = Adjacency::Triangular;
        let beyond = match tail {
            Tail::Fixed(v) if v <= 1 => Some(v as u8),
            Tail::Fixed(v) => return Err(Error::Invalid(format!("face value {v} is not 0 or 1"))),
            Tail::Unknown => None,
        };
        let neighbours = lambda.outer_boundary(adj);
        if beyond.is_none() && !neighbours.is_subset(frame) {
            return Err(Error::Ambiguity("frame does not contain every face next to the window".into()));
        }
        let outside = frame.difference(lambda);
        let outside_nbrs = outside.neighbor_table(adj);
        let offsets = adj.offsets(2);
        let outside_rim = outside
            .iter()
            .enumerate()
            .filter(|(_, x)| offsets.iter().any(|o| !frame.contains(&x.add(o))))
            .map(|(i, _)| i)
            .collect();
        let boundary_faces: Vec<Face> = neighbours
            .iter()
            .map(|y| match outside.position(y) {
                Some(i) => Face::Outside(i),
                None => Face::Beyond,
            })
            .collect();
        let mut inner_pairs = Vec::new();
        let mut cross_pairs = Vec::new();
        for (i, x) in lambda.iter().enumerate() {
            for o in &offsets {
                let y = x.add(o);
                if let Some(j) = lambda.position(&y) {
                    if i < j {
                        inner_pairs.push((i, j));
                    }
                } else {
                    cross_pairs.push((i, neighbours.position(&y).unwrap()));
                }
            }
        }
        Ok(PreparedLoop {
            params,
            lambda: lambda.clone(),
            frame: frame.clone(),
            outside,
            alphabet: loop_alphabet(),
            beyond,
            outside_nbrs,
            outside_rim,
            boundary_faces,
            inner_pairs,
            cross_pairs,
            total,
        })
    }

    /// Value and level-set label of every face adjacent to `Λ`, where level
    /// sets are taken in the complement of `Λ`.
    fn boundary_levels(&self, outside: &[usize]) -> Result<(Vec<u8>, Vec<u32>)> {
        let n = self.outside.len();
        let mut uf = UnionFind::new(n + 1);
        for (i, nb) in self.outside_nbrs.iter().enumerate() {
            for &j in nb {
                if outside[i] == outside[j] {
                    uf.union(i, j);
                }
            }
        }
        if let Some(v) = self.beyond {
            for &r in &self.outside_rim {
                if outside[r] as u8 == v {
                    uf.union(r, n);
                }
            }
        }
        let mut values = Vec::with_capacity(self.boundary_faces.len());
        let mut roots = Vec::with_capacity(self.boundary_faces.len());
        for f in &self.boundary_faces {
            match *f {
                Face::Outside(i) => {
                    values.push(outside[i] as u8);
                    roots.push(uf.find(i));
                }
                Face::Beyond => {
                    values.push(self.beyond.expect("faces beyond the frame need a known tail"));
                    roots.push(uf.find(n));
                }
            }
        }
        if self.beyond.is_none() && self.outside_rim.iter().any(|&r| roots.contains(&uf.find(r))) {
            return Err(Error::Ambiguity("a counted level set reaches the rim of the frame".into()));
        }
        let mut relabel: HashMap<usize, u32> = HashMap::new();
        let labels = roots
            .iter()
            .map(|r| {
                let next = relabel.len() as u32;
                *relabel.entry(*r).or_insert(next)
            })
            .collect();
        Ok((values, labels))
    }
}

impl Prepared for PreparedLoop {
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
        let (values, labels) = self.boundary_levels(outside)?;
        Ok(values.iter().map(|&v| v as u32).chain(labels).collect())
    }

    fn log_weights(&self, outside: &[usize]) -> Result<Vec<f64>> {
        let (values, labels) = self.boundary_levels(outside)?;
        let m = self.lambda.len();
        let comps = labels.iter().copied().max().map(|c| c as usize + 1).unwrap_or(0);
        let (ln_n, ln_x) = (self.params.n.ln(), self.params.x.ln());
        let mut out = Vec::with_capacity(self.total);
        for code in 0..self.total {
            let zeta = decode_states(code as u64, m, 2);
            let mut uf = UnionFind::new(m + comps);
            let mut unequal = 0usize;
            for &(i, j) in &self.inner_pairs {
                if zeta[i] == zeta[j] {
                    uf.union(i, j);
                } else {
                    unequal += 1;
                }
            }
            for &(i, f) in &self.cross_pairs {
                if zeta[i] as u8 == values[f] {
                    uf.union(i, m + labels[f] as usize);
                } else {
                    unequal += 1;
                }
            }
            let mut roots: Vec<usize> = (0..m + comps).map(|v| uf.find(v)).collect();
            roots.sort_unstable();
            roots.dedup();
            out.push(roots.len() as f64 * ln_n + unequal as f64 * ln_x);
        }
        Ok(out)
    }
}
