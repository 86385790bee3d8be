//! Percolation clusters and level sets on finite frames.
//!
//! A frame is a finite window carrying states; what lies beyond it is
//! described by an [`Exterior`]. Counting functions follow the
//! "intersects `Λ` or contains a vertex adjacent to `Λ`" rule.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Adjacency, Configuration, Site, Window};

/// Union-find with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true when two distinct components were merged.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}

/// Union-find without path compression whose unions can be undone.
#[derive(Clone, Debug)]
pub struct RollbackUnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
    history: Vec<u32>,
}

impl RollbackUnionFind {
    pub fn new(n: usize) -> Self {
        RollbackUnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            history: Vec::new(),
        }
    }

    pub fn find(&self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            x = self.parent[x] as usize;
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a as u32;
        self.size[a] += self.size[b];
        self.history.push(b as u32);
        true
    }

    pub fn checkpoint(&self) -> usize {
        self.history.len()
    }

    pub fn rollback(&mut self, checkpoint: usize) {
        while self.history.len() > checkpoint {
            let b = self.history.pop().unwrap() as usize;
            let a = self.parent[b] as usize;
            self.size[a] -= self.size[b];
            self.parent[b] = b as u32;
        }
    }
}

/// What lies beyond a frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exterior {
    /// All bonds and sites outside the frame are closed.
    Closed,
    /// Every face outside the frame carries this value.
    Constant(u8),
    /// Unknown; counts that could see past the frame are ambiguous.
    Unknown,
}

/// Bond configuration encoded per site: bit `i` of a site's mask is the
/// state of the edge `{x, x + e_{i+1}}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BondFrame {
    frame: Window,
    masks: Vec<u32>,
}

impl BondFrame {
    pub fn new(frame: Window, masks: Vec<u32>) -> Result<Self> {
        if masks.len() != frame.len() {
            return Err(Error::Shape("one edge mask per frame site expected".into()));
        }
        let limit = 1u32 << frame.dim();
        if masks.iter().any(|&m| m >= limit) {
            return Err(Error::Invalid(format!("edge masks must be below {limit}")));
        }
        Ok(BondFrame { frame, masks })
    }

    /// Random-cluster states are the edge masks themselves.
    pub fn from_configuration(config: &Configuration) -> Result<Self> {
        Self::new(
            config.window().clone(),
            config.states().iter().map(|&s| s as u32).collect(),
        )
    }

    pub fn closed(frame: Window) -> Self {
        let n = frame.len();
        BondFrame {
            frame,
            masks: vec![0; n],
        }
    }

    pub fn frame(&self) -> &Window {
        &self.frame
    }

    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    pub fn set(&mut self, x: &Site, mask: u32) {
        let i = self.frame.position(x).expect("site in frame");
        self.masks[i] = mask;
    }

    /// Opens the edge between two neighbouring frame sites.
    pub fn open(&mut self, x: &Site, y: &Site) {
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        let diff = b.sub(a);
        let axis = diff
            .coords()
            .iter()
            .position(|&c| c == 1)
            .expect("neighbouring sites");
        let i = self.frame.position(a).expect("site in frame");
        self.masks[i] |= 1 << axis;
    }

    /// Number of open edges encoded by sites of `sub`.
    pub fn open_count(&self, sub: &Window) -> u32 {
        sub.iter()
            .filter_map(|x| self.frame.position(x))
            .map(|i| self.masks[i].count_ones())
            .sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "frame": self.frame, "edge_masks": self.masks })
    }

    /// Labels every node of the graph spanned by the frame, the neighbours
    /// of `lambda`, and the far endpoints of open edges.
    fn components(&self, lambda: &Window, exterior: Exterior) -> Result<(Vec<Site>, HashMap<Site, usize>, UnionFind)> {
        let d = self.frame.dim();
        let mut nodes: Vec<Site> = self.frame.sites().to_vec();
        let mut index: HashMap<Site, usize> = nodes.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut add = |s: Site, nodes: &mut Vec<Site>| {
            let len = index.len();
            *index.entry(s.clone()).or_insert_with(|| {
                nodes.push(s);
                len
            })
        };
        let keep_outside = exterior == Exterior::Closed;
        if keep_outside {
            for y in lambda.outer_boundary(Adjacency::Square).iter() {
                add(y.clone(), &mut nodes);
            }
        }
        let mut edges = Vec::new();
        for (i, x) in self.frame.iter().enumerate() {
            for axis in 0..d {
                if self.masks[i] >> axis & 1 == 1 {
                    let y = x.add(&Site::unit(d, axis));
                    if keep_outside || self.frame.contains(&y) {
                        let j = add(y, &mut nodes);
                        edges.push((i, j));
                    }
                }
            }
        }
        let mut uf = UnionFind::new(nodes.len());
        for (a, b) in edges {
            uf.union(a, b);
        }
        let index = nodes.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok((nodes, index, uf))
    }
}

fn check_exterior_bonds(exterior: Exterior) -> Result<()> {
    match exterior {
        Exterior::Constant(_) => Err(Error::Domain(
            "bond and site frames take a closed or unknown exterior".into(),
        )),
        _ => Ok(()),
    }
}

fn require_neighbourhood(frame: &Window, lambda: &Window, adj: Adjacency) -> Result<()> {
    if !lambda.is_subset(frame) {
        return Err(Error::Shape("window is not contained in the frame".into()));
    }
    if !lambda.outer_boundary(adj).is_subset(frame) {
        return Err(Error::Ambiguity(
            "frame does not contain every neighbour of the window".into(),
        ));
    }
    Ok(())
}

/// `C(ω, Λ)`: clusters meeting `Λ` or containing a neighbour of `Λ`.
pub fn count_clusters(bf: &BondFrame, lambda: &Window, exterior: Exterior) -> Result<usize> {
    check_exterior_bonds(exterior)?;
    if !lambda.is_subset(&bf.frame) {
        return Err(Error::Shape("window is not contained in the frame".into()));
    }
    if exterior == Exterior::Unknown {
        require_neighbourhood(&bf.frame, lambda, Adjacency::Square)?;
    }
    let (_, index, mut uf) = bf.components(lambda, exterior)?;
    let closure = lambda.closed_neighborhood(Adjacency::Square);
    let mut roots: Vec<usize> = closure.iter().map(|x| uf.find(index[x])).collect();
    roots.sort_unstable();
    roots.dedup();
    if exterior == Exterior::Unknown {
        let rim: Vec<usize> = bf.frame.rim(Adjacency::Square);
        if rim.iter().any(|&r| roots.binary_search(&uf.find(r)).is_ok()) {
            return Err(Error::Ambiguity(
                "a counted cluster reaches the rim of the frame".into(),
            ));
        }
    }
    Ok(roots.len())
}

/// Site percolation frame for the Griffiths model; values in `{-1, 0, 1}`,
/// with `0` closed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteFrame {
    frame: Window,
    values: Vec<i8>,
}

impl SiteFrame {
    pub fn new(frame: Window, values: Vec<i8>) -> Result<Self> {
        if values.len() != frame.len() {
            return Err(Error::Shape("one value per frame site expected".into()));
        }
        if values.iter().any(|v| !(-1..=1).contains(v)) {
            return Err(Error::Invalid("site values must lie in {-1, 0, 1}".into()));
        }
        Ok(SiteFrame { frame, values })
    }

    pub fn frame(&self) -> &Window {
        &self.frame
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "frame": self.frame, "site_values": self.values })
    }

    /// `Π(ω)` within the frame.
    pub fn open_sites(&self) -> Window {
        Window::new(
            self.frame.dim(),
            self.frame
                .iter()
                .zip(&self.values)
                .filter(|(_, v)| **v != 0)
                .map(|(s, _)| s.clone()),
        )
        .expect("frame sites share a dimension")
    }
}

/// Labels open sites of a frame by connected component.
fn open_components(frame: &Window, open: &[bool], adj: Adjacency) -> UnionFind {
    let table = frame.neighbor_table(adj);
    let mut uf = UnionFind::new(frame.len());
    for (i, nb) in table.iter().enumerate() {
        if !open[i] {
            continue;
        }
        for &j in nb {
            if open[j] {
                uf.union(i, j);
            }
        }
    }
    uf
}

/// `Γ(ω, Λ)`: union of open clusters containing a vertex in or next to `Λ`.
pub fn cluster_hull(sf: &SiteFrame, lambda: &Window, exterior: Exterior) -> Result<Window> {
    check_exterior_bonds(exterior)?;
    if !lambda.is_subset(&sf.frame) {
        return Err(Error::Shape("window is not contained in the frame".into()));
    }
    if exterior == Exterior::Unknown {
        require_neighbourhood(&sf.frame, lambda, Adjacency::Square)?;
    }
    let open: Vec<bool> = sf.values.iter().map(|&v| v != 0).collect();
    let mut uf = open_components(&sf.frame, &open, Adjacency::Square);
    let closure = lambda.closed_neighborhood(Adjacency::Square);
    let mut roots: Vec<usize> = closure
        .iter()
        .filter_map(|x| sf.frame.position(x))
        .filter(|&i| open[i])
        .map(|i| uf.find(i))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    if exterior == Exterior::Unknown {
        for r in sf.frame.rim(Adjacency::Square) {
            if open[r] && roots.binary_search(&uf.find(r)).is_ok() {
                return Err(Error::Ambiguity("an open cluster reaches the rim of the frame".into()));
            }
        }
    }
    let sites: Vec<Site> = (0..sf.frame.len())
        .filter(|&i| open[i] && roots.binary_search(&uf.find(i)).is_ok())
        .map(|i| sf.frame.sites()[i].clone())
        .collect();
    Window::new(sf.frame.dim(), sites)
}

/// `{0,1}`-valued faces of the hexagonal lattice, indexed by a
/// two-dimensional window under the triangular adjacency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaceFrame {
    frame: Window,
    values: Vec<u8>,
}

impl FaceFrame {
    pub fn new(frame: Window, values: Vec<u8>) -> Result<Self> {
        if frame.dim() != 2 {
            return Err(Error::Domain("face frames are two-dimensional".into()));
        }
        if values.len() != frame.len() {
            return Err(Error::Shape("one value per face expected".into()));
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::Invalid("face values must be 0 or 1".into()));
        }
        Ok(FaceFrame { frame, values })
    }

    pub fn frame(&self) -> &Window {
        &self.frame
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "frame": self.frame, "face_values": self.values })
    }
}

/// Number of level sets (connected constant-value regions) meeting `Λ` or
/// adjacent to it.
pub fn count_level_sets(ff: &FaceFrame, lambda: &Window, exterior: Exterior) -> Result<usize> {
    if !lambda.is_subset(&ff.frame) {
        return Err(Error::Shape("window is not contained in the frame".into()));
    }
    let adj = Adjacency::Triangular;
    let n = ff.frame.len();
    let table = ff.frame.neighbor_table(adj);
    // node n is the exterior when its value is known
    let mut uf = UnionFind::new(n + 1);
    for (i, nb) in table.iter().enumerate() {
        for &j in nb {
            if ff.values[i] == ff.values[j] {
                uf.union(i, j);
            }
        }
    }
    let rim = ff.frame.rim(adj);
    let outside_value = match exterior {
        Exterior::Constant(v) if v <= 1 => Some(v),
        Exterior::Constant(_) => return Err(Error::Invalid("face values must be 0 or 1".into())),
        Exterior::Closed => Some(0),
        Exterior::Unknown => None,
    };
    if let Some(v) = outside_value {
        for &r in &rim {
            if ff.values[r] == v {
                uf.union(r, n);
            }
        }
    } else {
        require_neighbourhood(&ff.frame, lambda, adj)?;
    }
    let closure = lambda.closed_neighborhood(adj);
    let mut roots: Vec<usize> = closure
        .iter()
        .map(|x| match ff.frame.position(x) {
            Some(i) => uf.find(i),
            None => uf.find(n),
        })
        .collect();
    roots.sort_unstable();
    roots.dedup();
    if outside_value.is_none() && rim.iter().any(|&r| roots.binary_search(&uf.find(r)).is_ok()) {
        return Err(Error::Ambiguity("a counted level set reaches the rim of the frame".into()));
    }
    Ok(roots.len())
}

/// Frames whose counts near a window can be checked for truncation effects.
pub trait ClusterFrame {
    /// True iff no cluster or level set qualifying for `Λ` contains a rim
    /// site, so that the count does not depend on the unknown exterior.
    fn is_frame_sufficient(&self, lambda: &Window) -> bool;
}

impl ClusterFrame for BondFrame {
    fn is_frame_sufficient(&self, lambda: &Window) -> bool {
        count_clusters(self, lambda, Exterior::Unknown).is_ok()
    }
}

impl ClusterFrame for SiteFrame {
    fn is_frame_sufficient(&self, lambda: &Window) -> bool {
        cluster_hull(self, lambda, Exterior::Unknown).is_ok()
    }
}

impl ClusterFrame for FaceFrame {
    fn is_frame_sufficient(&self, lambda: &Window) -> bool {
        count_level_sets(self, lambda, Exterior::Unknown).is_ok()
    }
}

pub fn is_frame_sufficient<F: ClusterFrame>(frame: &F, lambda: &Window) -> bool {
    frame.is_frame_sufficient(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_box;

    fn s(c: &[i64]) -> Site {
        Site::new(c)
    }

    #[test]
    fn cluster_count_examples() {
        let origin = Window::singleton(Site::origin(2));
        let d1 = make_box(1, 2).unwrap();
        let d2 = make_box(2, 2).unwrap();
        assert_eq!(count_clusters(&BondFrame::closed(d1.clone()), &origin, Exterior::Closed).unwrap(), 5);
        let full = BondFrame::new(d2.clone(), vec![3; d2.len()]).unwrap();
        assert_eq!(count_clusters(&full, &origin, Exterior::Closed).unwrap(), 1);
        let mut bf = BondFrame::closed(d1);
        bf.open(&s(&[0, 0]), &s(&[1, 0]));
        bf.open(&s(&[0, 1]), &s(&[1, 1]));
        assert_eq!(count_clusters(&bf, &origin, Exterior::Closed).unwrap(), 4);
    }

    #[test]
    fn closed_exterior_needs_no_neighbourhood() {
        let origin = Window::singleton(Site::origin(2));
        let bf = BondFrame::new(origin.clone(), vec![3]).unwrap();
        // origin joined to (1,0) and (0,1); (-1,0) and (0,-1) isolated
        assert_eq!(count_clusters(&bf, &origin, Exterior::Closed).unwrap(), 3);
        assert!(matches!(
            count_clusters(&bf, &origin, Exterior::Unknown),
            Err(Error::Ambiguity(_))
        ));
    }

    #[test]
    fn hull_examples() {
        let d2 = make_box(2, 2).unwrap();
        let origin = Window::singleton(Site::origin(2));
        let closed = SiteFrame::new(d2.clone(), vec![0; d2.len()]).unwrap();
        assert!(cluster_hull(&closed, &origin, Exterior::Unknown).unwrap().is_empty());
        let mut vals = vec![0i8; d2.len()];
        vals[d2.position(&s(&[0, 0])).unwrap()] = 1;
        let single = SiteFrame::new(d2.clone(), vals.clone()).unwrap();
        assert_eq!(cluster_hull(&single, &origin, Exterior::Unknown).unwrap(), origin);
        vals[d2.position(&s(&[1, 0])).unwrap()] = -1;
        vals[d2.position(&s(&[2, 0])).unwrap()] = 1;
        let path = SiteFrame::new(d2.clone(), vals).unwrap();
        assert!(matches!(
            cluster_hull(&path, &origin, Exterior::Unknown),
            Err(Error::Ambiguity(_))
        ));
        assert_eq!(cluster_hull(&path, &origin, Exterior::Closed).unwrap().len(), 3);
        let d3 = make_box(3, 2).unwrap();
        let mut v3 = vec![0i8; d3.len()];
        for c in 0..3 {
            v3[d3.position(&s(&[c, 0])).unwrap()] = 1;
        }
        let h = cluster_hull(&SiteFrame::new(d3, v3).unwrap(), &origin, Exterior::Unknown).unwrap();
        assert_eq!(h, Window::from_coords(2, &[&[0, 0], &[1, 0], &[2, 0]]).unwrap());
    }

    #[test]
    fn level_set_examples() {
        let d2 = make_box(2, 2).unwrap();
        let origin = Window::singleton(Site::origin(2));
        let zero = FaceFrame::new(d2.clone(), vec![0; d2.len()]).unwrap();
        assert_eq!(count_level_sets(&zero, &origin, Exterior::Constant(0)).unwrap(), 1);
        let mut vals = vec![0u8; d2.len()];
        vals[d2.position(&Site::origin(2)).unwrap()] = 1;
        let flip = FaceFrame::new(d2, vals).unwrap();
        assert_eq!(count_level_sets(&flip, &origin, Exterior::Constant(0)).unwrap(), 2);
        // the background touches the rim, so an unknown exterior is ambiguous
        assert!(count_level_sets(&flip, &origin, Exterior::Unknown).is_err());
    }

    #[test]
    fn sufficiency_examples() {
        let d2 = make_box(2, 2).unwrap();
        let origin = Window::singleton(Site::origin(2));
        assert!(is_frame_sufficient(&SiteFrame::new(d2.clone(), vec![0; 25]).unwrap(), &origin));
        assert!(is_frame_sufficient(&BondFrame::closed(d2.clone()), &origin));
        let mut bf = BondFrame::closed(d2.clone());
        bf.open(&s(&[0, 0]), &s(&[1, 0]));
        assert!(is_frame_sufficient(&bf, &origin));
        bf.open(&s(&[1, 0]), &s(&[2, 0]));
        assert!(!is_frame_sufficient(&bf, &origin));
    }

    #[test]
    fn rollback_union_find() {
        let mut uf = RollbackUnionFind::new(4);
        let cp = uf.checkpoint();
        assert!(uf.union(0, 1));
        assert!(uf.union(1, 2));
        assert!(!uf.union(0, 2));
        assert_eq!(uf.find(2), uf.find(0));
        uf.rollback(cp);
        assert_ne!(uf.find(2), uf.find(0));
        assert_ne!(uf.find(1), uf.find(0));
    }
}
