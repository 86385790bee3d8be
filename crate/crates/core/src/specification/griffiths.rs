//! Griffiths singularity random field: site percolation with parameter `p`
//! and an independent Ising model at inverse temperature `β` on every open
//! cluster.
//!
//! States are `-1`, `0` (closed) and `+1`, with indices 0, 1, 2.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cluster::UnionFind;
use crate::error::{Error, Result};
use crate::lattice::{decode_states, Adjacency, Alphabet, Guard, Site, Tail, Window};
use crate::measures::{log_sum_exp, DensityTable};

use super::ising::{log_partition, pair_sum, spin, PartitionCache};
use super::{kernel_from_log_weights, BoundaryCondition, KernelTable, Prepared};

pub const CLOSED: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GriffithsParams {
    pub p: f64,
    pub beta: f64,
}

impl GriffithsParams {
    pub fn new(p: f64, beta: f64) -> Result<Self> {
        let g = GriffithsParams { p, beta };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Domain(format!("percolation parameter p = {} must lie in (0, 1)", self.p)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain(format!("inverse temperature {} must be nonnegative", self.beta)));
        }
        Ok(())
    }
}

pub fn griffiths_alphabet() -> Alphabet {
    Alphabet::uniform(["-1", "0", "+1"])
}

/// An open cluster of the boundary that touches `N(Λ)`.
struct OuterCluster {
    sites: Vec<Site>,
    spins: Vec<i8>,
}

struct OuterClusters {
    clusters: Vec<OuterCluster>,
    /// For each face adjacent to `Λ`: its cluster and spin when open.
    faces: Vec<Option<(usize, i8)>>,
}

pub(crate) struct PreparedGriffiths {
    params: GriffithsParams,
    lambda: Window,
    frame: Window,
    outside: Window,
    alphabet: Alphabet,
    closed_tail: bool,
    outside_nbrs: Vec<Vec<usize>>,
    outside_rim: Vec<usize>,
    /// Sites adjacent to `Λ`, as positions in `outside` (None beyond the frame).
    boundary_sites: Vec<Option<usize>>,
    inner_pairs: Vec<(usize, usize)>,
    cross_pairs: Vec<(usize, usize)>,
    total: usize,
}

impl PreparedGriffiths {
    pub(crate) fn new(params: GriffithsParams, lambda: &Window, frame: &Window, tail: Tail, guard: &Guard) -> Result<Self> {
        let total = guard.entries(3, lambda.len(), "Griffiths kernel")?;
        let closed_tail = match tail {
            Tail::Fixed(CLOSED) => true,
            Tail::Fixed(s) => {
                return Err(Error::Domain(format!(
                    "tail state {s} makes every outside site open; only the closed tail is supported"
                )))
            }
            Tail::Unknown => false,
        };
        let adj = Adjacency::Square;
        let neighbours = lambda.outer_boundary(adj);
        if !closed_tail && !neighbours.is_subset(frame) {
            return Err(Error::Ambiguity("frame does not contain every neighbour of the window".into()));
        }
        let outside = frame.difference(lambda);
        let offsets = adj.offsets(lambda.dim());
        let outside_rim = outside
            .iter()
            .enumerate()
            .filter(|(_, x)| offsets.iter().any(|o| !frame.contains(&x.add(o))))
            .map(|(i, _)| i)
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
        Ok(PreparedGriffiths {
            params,
            lambda: lambda.clone(),
            frame: frame.clone(),
            outside_nbrs: outside.neighbor_table(adj),
            boundary_sites: neighbours.iter().map(|y| outside.position(y)).collect(),
            outside,
            alphabet: griffiths_alphabet(),
            closed_tail,
            outside_rim,
            inner_pairs,
            cross_pairs,
            total,
        })
    }

    fn outer_clusters(&self, outside: &[usize]) -> Result<OuterClusters> {
        let n = self.outside.len();
        let open: Vec<bool> = outside.iter().map(|&s| s != CLOSED).collect();
        let mut uf = UnionFind::new(n);
        for (i, nb) in self.outside_nbrs.iter().enumerate() {
            if open[i] {
                for &j in nb {
                    if open[j] {
                        uf.union(i, j);
                    }
                }
            }
        }
        let mut cluster_of: HashMap<usize, usize> = HashMap::new();
        let mut faces = Vec::with_capacity(self.boundary_sites.len());
        for b in &self.boundary_sites {
            match b {
                Some(i) if open[*i] => {
                    let r = uf.find(*i);
                    let next = cluster_of.len();
                    let c = *cluster_of.entry(r).or_insert(next);
                    faces.push(Some((c, spin(outside[*i]))));
                }
                _ => faces.push(None),
            }
        }
        if !self.closed_tail {
            for &r in &self.outside_rim {
                if open[r] && cluster_of.contains_key(&uf.find(r)) {
                    return Err(Error::Ambiguity("an open boundary cluster reaches the rim of the frame".into()));
                }
            }
        }
        let mut clusters: Vec<OuterCluster> = (0..cluster_of.len())
            .map(|_| OuterCluster {
                sites: Vec::new(),
                spins: Vec::new(),
            })
            .collect();
        for i in 0..n {
            if open[i] {
                if let Some(&c) = cluster_of.get(&uf.find(i)) {
                    clusters[c].sites.push(self.outside.sites()[i].clone());
                    clusters[c].spins.push(spin(outside[i]));
                }
            }
        }
        Ok(OuterClusters { clusters, faces })
    }

    fn percolation_weight(&self, zeta: &[usize]) -> f64 {
        let open = zeta.iter().filter(|&&s| s != CLOSED).count() as f64;
        open * self.params.p.ln() + (zeta.len() as f64 - open) * (1.0 - self.params.p).ln()
    }
}

impl Prepared for PreparedGriffiths {
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

    /// The boundary restricted to open clusters touching `N(Λ)`.
    fn signature(&self, outside: &[usize]) -> Result<Vec<u32>> {
        let outer = self.outer_clusters(outside)?;
        let mut sig = vec![CLOSED as u32; self.outside.len()];
        for c in &outer.clusters {
            for (x, &s) in c.sites.iter().zip(&c.spins) {
                sig[self.outside.position(x).unwrap()] = (s + 1) as u32;
            }
        }
        Ok(sig)
    }

    /// `p^{‖ζ‖} (1-p)^{|Λ|-‖ζ‖} α_{Γ(ζω, Λ)}(ζω)`.
    fn log_weights(&self, outside: &[usize]) -> Result<Vec<f64>> {
        let outer = self.outer_clusters(outside)?;
        let beta = self.params.beta;
        let m = self.lambda.len();
        let nk = outer.clusters.len();
        let mut cache = PartitionCache::new(beta);
        let outer_energy: f64 = outer
            .clusters
            .iter()
            .map(|c| pair_sum(&c.sites, &c.spins) as f64)
            .sum();
        let mut out = Vec::with_capacity(self.total);
        for code in 0..self.total {
            let zeta = decode_states(code as u64, m, 3);
            let mut uf = UnionFind::new(m + nk);
            let mut energy = outer_energy;
            for &(i, j) in &self.inner_pairs {
                if zeta[i] != CLOSED && zeta[j] != CLOSED {
                    uf.union(i, j);
                    energy += (spin(zeta[i]) * spin(zeta[j])) as f64;
                }
            }
            for &(i, f) in &self.cross_pairs {
                if let (true, Some((c, t))) = (zeta[i] != CLOSED, outer.faces[f]) {
                    uf.union(i, m + c);
                    energy += (spin(zeta[i]) * t) as f64;
                }
            }
            // group the sites of Γ by component
            let mut groups: HashMap<usize, Vec<Site>> = HashMap::new();
            for (i, x) in self.lambda.iter().enumerate() {
                if zeta[i] != CLOSED {
                    groups.entry(uf.find(i)).or_default().push(x.clone());
                }
            }
            for (c, cl) in outer.clusters.iter().enumerate() {
                groups.entry(uf.find(m + c)).or_default().extend(cl.sites.iter().cloned());
            }
            let mut log_z = 0.0;
            for sites in groups.values_mut() {
                sites.sort_unstable();
                log_z += cache.log_z(sites);
            }
            out.push(self.percolation_weight(&zeta) - beta * energy - log_z);
        }
        Ok(out)
    }
}

/// The kernel through the decoupled form
/// `p^{‖ζ‖}(1-p)^{|Λ|-‖ζ‖} α_{Π(ζ)}(ζ) f_Λ(ξ) / (α_{Π(ζ)} × κ⁺)(f_Λ)`,
/// where `κ⁺` on the open boundary clusters is a product of finite-cluster
/// Ising measures and only its marginal on `N(Λ)` is needed.
pub fn griffiths_kernel_simplified(
    params: GriffithsParams,
    lambda: &Window,
    bc: &BoundaryCondition,
    guard: &Guard,
) -> Result<KernelTable> {
    params.validate()?;
    let prep = PreparedGriffiths::new(params, lambda, bc.frame(), bc.tail(), guard)?;
    let outside = bc.outside().states();
    let outer = prep.outer_clusters(outside)?;
    let beta = params.beta;
    let m = lambda.len();

    // open faces next to Λ, grouped by boundary cluster
    let open_faces: Vec<usize> = (0..outer.faces.len()).filter(|&f| outer.faces[f].is_some()).collect();
    let t_len = open_faces.len();
    guard.entries(2, t_len + m, "boundary marginal enumeration")?;
    let face_slot: HashMap<usize, usize> = open_faces.iter().enumerate().map(|(k, &f)| (f, k)).collect();
    let neighbours = lambda.outer_boundary(Adjacency::Square);

    // log of the joint law of the open face spins under Π_K α_K
    let mut marginal = vec![0.0f64; 1 << t_len];
    for (c, cl) in outer.clusters.iter().enumerate() {
        let members: Vec<(usize, usize)> = open_faces
            .iter()
            .enumerate()
            .filter(|(_, &f)| outer.faces[f].unwrap().0 == c)
            .map(|(k, &f)| {
                let pos = cl.sites.binary_search(&neighbours.sites()[f]).unwrap();
                (k, pos)
            })
            .collect();
        let log_zk = log_partition(&cl.sites, beta, &[], &[]);
        let mut clamp = vec![None; cl.sites.len()];
        let mut cache: HashMap<u64, f64> = HashMap::new();
        for (t, slot) in marginal.iter_mut().enumerate() {
            let key: u64 = members
                .iter()
                .enumerate()
                .map(|(b, &(k, _))| ((t >> k & 1) as u64) << b)
                .sum();
            let v = *cache.entry(key).or_insert_with(|| {
                for &(k, pos) in &members {
                    clamp[pos] = Some(if t >> k & 1 == 1 { 1 } else { -1 });
                }
                log_partition(&cl.sites, beta, &[], &clamp) - log_zk
            });
            *slot += v;
        }
    }

    // log D(S) for every open subset S of Λ
    let mut log_d = vec![0.0f64; 1 << m];
    let mut log_zs = vec![0.0f64; 1 << m];
    for (set, (d_slot, z_slot)) in log_d.iter_mut().zip(log_zs.iter_mut()).enumerate() {
        let members: Vec<usize> = (0..m).filter(|&i| set >> i & 1 == 1).collect();
        let sites: Vec<Site> = members.iter().map(|&i| lambda.sites()[i].clone()).collect();
        let zs = log_partition(&sites, beta, &[], &[]);
        *z_slot = zs;
        if members.is_empty() {
            continue;
        }
        let terms: Vec<f64> = (0..1usize << t_len)
            .map(|t| {
                let mut fields = vec![0.0; sites.len()];
                for &(i, f) in &prep.cross_pairs {
                    if let (Some(pos), Some(&k)) = (members.iter().position(|&x| x == i), face_slot.get(&f)) {
                        let tv = if t >> k & 1 == 1 { 1.0 } else { -1.0 };
                        fields[pos] -= beta * tv;
                    }
                }
                marginal[t] + log_partition(&sites, beta, &fields, &[]) - zs
            })
            .collect();
        *d_slot = log_sum_exp(&terms);
    }

    let mut lw = Vec::with_capacity(prep.total);
    for code in 0..prep.total {
        let zeta = decode_states(code as u64, m, 3);
        let set: usize = (0..m).filter(|&i| zeta[i] != CLOSED).map(|i| 1 << i).sum();
        let open_sites: Vec<Site> = (0..m)
            .filter(|&i| zeta[i] != CLOSED)
            .map(|i| lambda.sites()[i].clone())
            .collect();
        let open_spins: Vec<i8> = (0..m).filter(|&i| zeta[i] != CLOSED).map(|i| spin(zeta[i])).collect();
        let log_alpha = -beta * pair_sum(&open_sites, &open_spins) as f64 - log_zs[set];
        let log_f: f64 = prep
            .cross_pairs
            .iter()
            .filter_map(|&(i, f)| outer.faces[f].map(|(_, t)| -beta * (spin(zeta[i]) * t) as f64))
            .sum();
        lw.push(prep.percolation_weight(&zeta) + log_alpha + log_f - log_d[set]);
    }
    kernel_from_log_weights(lambda, &prep.alphabet, lw)
}

/// `γ̂_F(·, ω)` with everything outside `F` closed: site percolation on
/// `F` with an independent Ising model on each open cluster. This is the
/// restriction to `F`-measurable events of the Griffiths field whose
/// exterior is closed, and the window stand-in for `K_{p,β}`.
pub fn griffiths_window(params: GriffithsParams, window: &Window, guard: &Guard) -> Result<DensityTable> {
    let bc = BoundaryCondition::tail_only(window, Tail::Fixed(CLOSED));
    let prep = PreparedGriffiths::new(params, window, bc.frame(), bc.tail(), guard)?;
    Ok(prep.kernel(&[])?.table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_box;
    use crate::measures::total_variation;

    #[test]
    fn singleton_closed_boundary() {
        let g = Guard::default();
        let params = GriffithsParams::new(0.3, 0.8).unwrap();
        let origin = Window::singleton(Site::origin(2));
        let frame = make_box(1, 2).unwrap();
        let bc = BoundaryCondition::constant(&origin, frame, CLOSED, Tail::Fixed(CLOSED)).unwrap();
        let model = super::super::SpecificationModel::Griffiths(params);
        let t = model.kernel(&origin, &bc, &g).unwrap().table;
        assert!((t.prob(CLOSED) - 0.7).abs() < 1e-14);
        assert!((t.prob(0) - 0.15).abs() < 1e-14);
        assert!((t.prob(2) - 0.15).abs() < 1e-14);
        let s = griffiths_kernel_simplified(params, &origin, &bc, &g).unwrap().table;
        assert!(total_variation(&t, &s).unwrap() < 1e-14);
    }

    #[test]
    fn window_marginal_of_open_sites_is_bernoulli() {
        let g = Guard::default();
        let params = GriffithsParams::new(0.6, 0.5).unwrap();
        let w = Window::rect(&[0, 0], &[1, 1]).unwrap();
        let k = griffiths_window(params, &w, &g).unwrap();
        for x in w.iter() {
            let m = k.marginal(&Window::singleton(x.clone())).unwrap();
            assert!((m.prob(CLOSED) - 0.4).abs() < 1e-14);
        }
    }
}
