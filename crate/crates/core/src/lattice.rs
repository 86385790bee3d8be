//! Finite windows of `Z^d`, lattice edges, and the mixed-radix encoding of
//! configurations on a window.
//!
//! Every window keeps its sites in lexicographic order of coordinates (the
//! last coordinate varies fastest). Configuration codes, table indices and
//! CSV column orders are all derived from that order, with the first site of
//! the window as the least-significant digit.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 4;

/// Limits on exhaustive enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guard {
    /// Largest admissible `|E|^|Λ|`.
    pub max_entries: u64,
    /// Largest admissible window produced by [`make_box`].
    pub max_sites: usize,
}

impl Default for Guard {
    fn default() -> Self {
        Guard {
            max_entries: 1 << 24,
            max_sites: 1 << 16,
        }
    }
}

impl Guard {
    pub fn with_max_entries(max_entries: u64) -> Self {
        Guard {
            max_entries,
            ..Guard::default()
        }
    }

    /// Returns `radix^len` if it fits under the guard.
    pub fn entries(&self, radix: usize, len: usize, what: &str) -> Result<usize> {
        match checked_pow(radix, len) {
            Some(n) if n as u128 <= self.max_entries as u128 => Ok(n),
            other => Err(Error::capacity(
                what,
                other.map(|n| n as u128).unwrap_or(u128::MAX),
                self.max_entries as u128,
            )),
        }
    }
}

fn checked_pow(radix: usize, len: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..len {
        acc = acc.checked_mul(radix)?;
    }
    Some(acc)
}

/// A point of `Z^d`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub SmallVec<[i64; MAX_DIM]>);

impl Site {
    pub fn new(coords: &[i64]) -> Self {
        Site(SmallVec::from_slice(coords))
    }

    pub fn origin(d: usize) -> Self {
        Site(SmallVec::from_elem(0, d))
    }

    /// The unit vector `e_i`, with `i` counted from zero.
    pub fn unit(d: usize, i: usize) -> Self {
        let mut s = Site::origin(d);
        s.0[i] = 1;
        s
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn add(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(other.0.iter()).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> Site {
        Site(self.0.iter().map(|a| -a).collect())
    }

    /// L1 distance.
    pub fn l1(&self, other: &Site) -> i64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

/// Neighbourhood structure used for clusters, level sets and boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjacency {
    /// Nearest neighbours of the hypercubic lattice.
    Square,
    /// Six-neighbour adjacency on `Z^2`; faces of the hexagonal lattice.
    Triangular,
}

impl Adjacency {
    pub fn offsets(self, d: usize) -> Vec<Site> {
        match self {
            Adjacency::Square => {
                let mut out = Vec::with_capacity(2 * d);
                for i in 0..d {
                    let e = Site::unit(d, i);
                    out.push(e.neg());
                    out.push(e);
                }
                out
            }
            Adjacency::Triangular => {
                assert_eq!(d, 2, "triangular adjacency is two-dimensional");
                [(-1, -1), (-1, 0), (0, -1), (0, 1), (1, 0), (1, 1)]
                    .iter()
                    .map(|&(a, b)| Site::new(&[a, b]))
                    .collect()
            }
        }
    }

    pub fn neighbors(self, x: &Site) -> Vec<Site> {
        self.offsets(x.dim()).iter().map(|o| x.add(o)).collect()
    }
}

/// A finite set of sites in canonical (lexicographic) order.
#[derive(Clone)]
pub struct Window {
    dim: usize,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
}

impl PartialEq for Window {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.sites == other.sites
    }
}

impl Eq for Window {}

impl fmt::Debug for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.sites.iter()).finish()
    }
}

impl Window {
    /// Builds a window from any collection of sites. Duplicates collapse.
    pub fn new(dim: usize, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Domain(format!(
                "dimension must lie in 1..={MAX_DIM}, got {dim}"
            )));
        }
        let set: BTreeSet<Site> = sites.into_iter().collect();
        if let Some(bad) = set.iter().find(|s| s.dim() != dim) {
            return Err(Error::Shape(format!(
                "site {bad:?} does not have dimension {dim}"
            )));
        }
        Ok(Self::from_sorted(dim, set.into_iter().collect()))
    }

    fn from_sorted(dim: usize, sites: Vec<Site>) -> Self {
        let index = sites
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Window { dim, sites, index }
    }

    pub fn empty(dim: usize) -> Self {
        Self::from_sorted(dim, Vec::new())
    }

    pub fn singleton(x: Site) -> Self {
        let dim = x.dim();
        Self::from_sorted(dim, vec![x])
    }

    /// Convenience constructor from coordinate slices.
    pub fn from_coords(dim: usize, coords: &[&[i64]]) -> Result<Self> {
        Self::new(dim, coords.iter().map(|c| Site::new(c)))
    }

    /// Axis-aligned box `lo ≤ x ≤ hi` (coordinate-wise, inclusive).
    pub fn rect(lo: &[i64], hi: &[i64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Shape("rect corners differ in dimension".into()));
        }
        let d = lo.len();
        let mut sites = vec![Site::origin(d)];
        for i in 0..d {
            let mut next = Vec::new();
            for s in &sites {
                for c in lo[i]..=hi[i] {
                    let mut t = s.clone();
                    t.0[i] = c;
                    next.push(t);
                }
            }
            sites = next;
        }
        Self::new(d, sites)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Site> {
        self.sites.iter()
    }

    pub fn contains(&self, x: &Site) -> bool {
        self.index.contains_key(x)
    }

    /// Position of `x` in the canonical order.
    pub fn position(&self, x: &Site) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn is_subset(&self, other: &Window) -> bool {
        self.sites.iter().all(|s| other.contains(s))
    }

    pub fn is_disjoint(&self, other: &Window) -> bool {
        self.sites.iter().all(|s| !other.contains(s))
    }

    pub fn union(&self, other: &Window) -> Window {
        let set: BTreeSet<Site> = self.sites.iter().chain(other.sites.iter()).cloned().collect();
        Self::from_sorted(self.dim, set.into_iter().collect())
    }

    pub fn difference(&self, other: &Window) -> Window {
        Self::from_sorted(
            self.dim,
            self.sites
                .iter()
                .filter(|s| !other.contains(s))
                .cloned()
                .collect(),
        )
    }

    pub fn intersection(&self, other: &Window) -> Window {
        Self::from_sorted(
            self.dim,
            self.sites
                .iter()
                .filter(|s| other.contains(s))
                .cloned()
                .collect(),
        )
    }

    /// `Λ + x`.
    pub fn translate(&self, x: &Site) -> Window {
        // translation preserves lexicographic order
        Self::from_sorted(self.dim, self.sites.iter().map(|s| s.add(x)).collect())
    }

    /// Sites outside the window adjacent to some site inside.
    pub fn outer_boundary(&self, adj: Adjacency) -> Window {
        let offsets = adj.offsets(self.dim);
        let set: BTreeSet<Site> = self
            .sites
            .iter()
            .flat_map(|s| offsets.iter().map(move |o| s.add(o)))
            .filter(|y| !self.contains(y))
            .collect();
        Self::from_sorted(self.dim, set.into_iter().collect())
    }

    /// The window together with its outer boundary.
    pub fn closed_neighborhood(&self, adj: Adjacency) -> Window {
        self.union(&self.outer_boundary(adj))
    }

    /// Positions of sites that have a neighbour outside the window.
    pub fn rim(&self, adj: Adjacency) -> Vec<usize> {
        let offsets = adj.offsets(self.dim);
        (0..self.sites.len())
            .filter(|&i| offsets.iter().any(|o| !self.contains(&self.sites[i].add(o))))
            .collect()
    }

    /// For each site, positions of its in-window neighbours.
    pub fn neighbor_table(&self, adj: Adjacency) -> Vec<Vec<usize>> {
        let offsets = adj.offsets(self.dim);
        self.sites
            .iter()
            .map(|s| {
                offsets
                    .iter()
                    .filter_map(|o| self.position(&s.add(o)))
                    .collect()
            })
            .collect()
    }
}

impl Serialize for Window {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            dim: usize,
            sites: &'a [Site],
        }
        Repr {
            dim: self.dim,
            sites: &self.sites,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            dim: usize,
            sites: Vec<Site>,
        }
        let r = Repr::deserialize(deserializer)?;
        Window::new(r.dim, r.sites).map_err(serde::de::Error::custom)
    }
}

/// The box `Δ_n = {-n,…,n}^d` under the default guard.
pub fn make_box(n: usize, d: usize) -> Result<Window> {
    make_box_with(n, d, &Guard::default())
}

pub fn make_box_with(n: usize, d: usize, guard: &Guard) -> Result<Window> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::capacity("box dimension", d as u128, MAX_DIM as u128));
    }
    let side = 2 * n + 1;
    match checked_pow(side, d) {
        Some(k) if k <= guard.max_sites => {}
        other => {
            return Err(Error::capacity(
                "box sites",
                other.map(|k| k as u128).unwrap_or(u128::MAX),
                guard.max_sites as u128,
            ))
        }
    }
    let n = n as i64;
    Window::rect(&vec![-n; d], &vec![n; d])
}

/// What the configuration looks like beyond a finite frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// Every site outside the frame is in the given state.
    Fixed(usize),
    /// Nothing is known beyond the frame; quantities that could depend on
    /// it are reported as ambiguous.
    Unknown,
}

impl Default for Tail {
    fn default() -> Self {
        Tail::Fixed(0)
    }
}

/// An unordered nearest-neighbour pair, stored with `a < b`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub a: Site,
    pub b: Site,
}

impl Edge {
    pub fn new(x: Site, y: Site) -> Self {
        if x <= y {
            Edge { a: x, b: y }
        } else {
            Edge { a: y, b: x }
        }
    }
}

/// Square-lattice edges with exactly one endpoint in `Λ`.
pub fn edge_boundary(window: &Window) -> Vec<Edge> {
    edge_boundary_with(window, Adjacency::Square)
}

pub fn edge_boundary_with(window: &Window, adj: Adjacency) -> Vec<Edge> {
    let offsets = adj.offsets(window.dim());
    let set: BTreeSet<Edge> = window
        .iter()
        .flat_map(|x| {
            offsets
                .iter()
                .map(move |o| x.add(o))
                .filter(|y| !window.contains(y))
                .map(move |y| Edge::new(x.clone(), y))
        })
        .collect();
    set.into_iter().collect()
}

/// Edges with both endpoints in the window.
pub fn internal_edges(window: &Window, adj: Adjacency) -> Vec<(usize, usize)> {
    let table = window.neighbor_table(adj);
    let mut out = Vec::new();
    for (i, nb) in table.iter().enumerate() {
        for &j in nb {
            if i < j {
                out.push((i, j));
            }
        }
    }
    out
}

/// A finite state space with a reference probability measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    labels: Vec<String>,
    reference: Vec<f64>,
}

impl Alphabet {
    pub fn new(labels: Vec<String>, reference: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Invalid("alphabet needs at least one label".into()));
        }
        if labels.len() != reference.len() {
            return Err(Error::Shape(format!(
                "{} labels but {} reference weights",
                labels.len(),
                reference.len()
            )));
        }
        if reference.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Invalid("reference weights must be finite and nonnegative".into()));
        }
        let total: f64 = reference.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("reference weights sum to {total}, not 1")));
        }
        let distinct: BTreeSet<&String> = labels.iter().collect();
        if distinct.len() != labels.len() {
            return Err(Error::Invalid("duplicate labels".into()));
        }
        Ok(Alphabet { labels, reference })
    }

    pub fn uniform<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let k = labels.len();
        Alphabet::new(labels, vec![1.0 / k as f64; k]).expect("uniform alphabet")
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    pub fn state_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Mixed-radix code of a state vector, first entry least significant.
pub fn encode_states(states: &[usize], radix: usize) -> u64 {
    states
        .iter()
        .rev()
        .fold(0u64, |acc, &s| acc * radix as u64 + s as u64)
}

pub fn decode_states(mut code: u64, len: usize, radix: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push((code % radix as u64) as usize);
        code /= radix as u64;
    }
    out
}

/// Steps a mixed-radix odometer; returns false after the last state.
pub(crate) fn advance(states: &mut [usize], radix: usize) -> bool {
    for s in states.iter_mut() {
        *s += 1;
        if *s < radix {
            return true;
        }
        *s = 0;
    }
    false
}

/// An assignment of a state index to every site of a window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    window: Window,
    states: Vec<usize>,
}

impl Configuration {
    pub fn new(window: Window, states: Vec<usize>) -> Result<Self> {
        if window.len() != states.len() {
            return Err(Error::Shape(format!(
                "{} states for a window of {} sites",
                states.len(),
                window.len()
            )));
        }
        Ok(Configuration { window, states })
    }

    pub fn constant(window: Window, state: usize) -> Self {
        let n = window.len();
        Configuration {
            window,
            states: vec![state; n],
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn state_at(&self, x: &Site) -> Option<usize> {
        self.window.position(x).map(|i| self.states[i])
    }

    pub fn validate(&self, alphabet: &Alphabet) -> Result<()> {
        match self.states.iter().find(|&&s| s >= alphabet.size()) {
            Some(s) => Err(Error::Invalid(format!(
                "state {s} outside an alphabet of size {}",
                alphabet.size()
            ))),
            None => Ok(()),
        }
    }

    /// `σ_Λ ω` for `Λ` contained in the window.
    pub fn restrict(&self, sub: &Window) -> Result<Configuration> {
        let states = sub
            .iter()
            .map(|x| {
                self.state_at(x)
                    .ok_or_else(|| Error::Shape(format!("site {x:?} outside configuration")))
            })
            .collect::<Result<Vec<_>>>()?;
        Configuration::new(sub.clone(), states)
    }

    /// The concatenation `ωζ` of configurations on disjoint windows.
    pub fn concat(&self, other: &Configuration) -> Result<Configuration> {
        if !self.window.is_disjoint(&other.window) {
            return Err(Error::Shape("concatenated windows overlap".into()));
        }
        let window = self.window.union(&other.window);
        let states = window
            .iter()
            .map(|x| self.state_at(x).or_else(|| other.state_at(x)).unwrap())
            .collect();
        Configuration::new(window, states)
    }

    pub fn encode(&self, alphabet: &Alphabet, guard: &Guard) -> Result<u64> {
        guard.entries(alphabet.size(), self.window.len(), "configuration code")?;
        self.validate(alphabet)?;
        Ok(encode_states(&self.states, alphabet.size()))
    }

    pub fn decode(code: u64, window: &Window, alphabet: &Alphabet, guard: &Guard) -> Result<Self> {
        let total = guard.entries(alphabet.size(), window.len(), "configuration code")?;
        if code >= total as u64 {
            return Err(Error::Domain(format!("code {code} out of range 0..{total}")));
        }
        Configuration::new(window.clone(), decode_states(code, window.len(), alphabet.size()))
    }

    pub fn to_json(&self, alphabet: &Alphabet) -> serde_json::Value {
        serde_json::json!({
            "sites": self.window.sites(),
            "states": self.states.iter().map(|&s| alphabet.label(s)).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &serde_json::Value, alphabet: &Alphabet) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            sites: Vec<Site>,
            states: Vec<String>,
        }
        let r: Repr = serde_json::from_value(value.clone()).map_err(|e| Error::Invalid(e.to_string()))?;
        if r.sites.len() != r.states.len() {
            return Err(Error::Shape("sites and states differ in length".into()));
        }
        let dim = r.sites.first().map(Site::dim).unwrap_or(1);
        let pairs: HashMap<Site, usize> = r
            .sites
            .into_iter()
            .zip(r.states.iter())
            .map(|(s, l)| {
                alphabet
                    .state_of(l)
                    .map(|st| (s, st))
                    .ok_or_else(|| Error::Invalid(format!("unknown label {l}")))
            })
            .collect::<Result<_>>()?;
        let window = Window::new(dim, pairs.keys().cloned())?;
        let states = window.iter().map(|s| pairs[s]).collect();
        Configuration::new(window, states)
    }
}

/// `θ_x ω`, defined by `(θ_x ω)_y = ω_{y+x}`; it lives on `Λ - x`.
pub fn shift(config: &Configuration, x: &Site) -> Configuration {
    Configuration {
        window: config.window.translate(&x.neg()),
        states: config.states.clone(),
    }
}

/// `θ_x Λ = Λ + x`.
pub fn shift_window(window: &Window, x: &Site) -> Window {
    window.translate(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_sizes() {
        assert_eq!(make_box(0, 3).unwrap().len(), 1);
        assert_eq!(make_box(0, 3).unwrap().sites()[0], Site::origin(3));
        assert_eq!(make_box(1, 2).unwrap().len(), 9);
        let b = make_box(2, 1).unwrap();
        let xs: Vec<i64> = b.iter().map(|s| s.coords()[0]).collect();
        assert_eq!(xs, vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn box_guard() {
        assert!(matches!(make_box(1, 5), Err(Error::Capacity { .. })));
        let g = Guard { max_entries: 1 << 24, max_sites: 8 };
        assert!(matches!(make_box_with(1, 2, &g), Err(Error::Capacity { .. })));
        assert!(make_box_with(1, 1, &g).is_ok());
    }

    #[test]
    fn canonical_order_last_coordinate_fastest() {
        let b = make_box(1, 2).unwrap();
        assert_eq!(b.sites()[0], Site::new(&[-1, -1]));
        assert_eq!(b.sites()[1], Site::new(&[-1, 0]));
        assert_eq!(b.sites()[3], Site::new(&[0, -1]));
    }

    #[test]
    fn edge_boundary_examples() {
        let origin = Window::singleton(Site::origin(2));
        assert_eq!(edge_boundary(&origin).len(), 4);
        assert_eq!(edge_boundary(&make_box(1, 2).unwrap()).len(), 12);
        let seg = Window::rect(&[0], &[4]).unwrap();
        assert_eq!(edge_boundary(&seg).len(), 2);
    }

    #[test]
    fn edge_boundary_one_endpoint_inside() {
        // every window inside a 5x5 square drawn from a fixed pattern family
        let square = Window::rect(&[0, 0], &[4, 4]).unwrap();
        for mask in (1u32..(1 << 25)).step_by(99_991) {
            let sites = square
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, s)| s.clone());
            let w = Window::new(2, sites).unwrap();
            let boundary = edge_boundary(&w);
            for e in &boundary {
                assert!(w.contains(&e.a) ^ w.contains(&e.b));
                assert_eq!(e.a.l1(&e.b), 1);
            }
            let expected: usize = w
                .iter()
                .map(|x| Adjacency::Square.neighbors(x).iter().filter(|y| !w.contains(y)).count())
                .sum();
            assert_eq!(boundary.len(), expected);
        }
    }

    #[test]
    fn encode_examples() {
        let alpha = Alphabet::uniform(["0", "1"]);
        let w = Window::rect(&[0], &[2]).unwrap();
        let g = Guard::default();
        let zero = Configuration::constant(w.clone(), 0);
        assert_eq!(zero.encode(&alpha, &g).unwrap(), 0);
        let c = Configuration::new(w.clone(), vec![1, 0, 1]).unwrap();
        assert_eq!(c.encode(&alpha, &g).unwrap(), 5);
        let alpha3 = Alphabet::uniform(["a", "b", "c"]);
        let w2 = Window::rect(&[0], &[1]).unwrap();
        for code in 0..9 {
            let c = Configuration::decode(code, &w2, &alpha3, &g).unwrap();
            assert_eq!(c.encode(&alpha3, &g).unwrap(), code);
        }
    }

    #[test]
    fn encode_guard() {
        let alpha = Alphabet::uniform(["0", "1"]);
        let w = Window::rect(&[0], &[30]).unwrap();
        let g = Guard::with_max_entries(1 << 20);
        let c = Configuration::constant(w.clone(), 0);
        assert!(matches!(c.encode(&alpha, &g), Err(Error::Capacity { .. })));
        assert!(matches!(Configuration::decode(0, &w, &alpha, &g), Err(Error::Capacity { .. })));
    }

    #[test]
    fn encode_decode_exhaustive_bijection() {
        // |E|^|Λ| = 2^20
        let w = Window::rect(&[0, 0], &[1, 4]).unwrap();
        let mut seen = vec![false; 1 << 20];
        let mut states = vec![0; w.len()];
        loop {
            let code = encode_states(&states, 4) as usize;
            assert!(!seen[code]);
            seen[code] = true;
            assert_eq!(decode_states(code as u64, w.len(), 4), states);
            if !advance(&mut states, 4) {
                break;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn shift_roundtrip() {
        let w = Window::rect(&[0, 0], &[1, 2]).unwrap();
        let c = Configuration::new(w, vec![0, 1, 2, 1, 0, 2]).unwrap();
        let zero = Site::origin(2);
        assert_eq!(shift(&c, &zero), c);
        let x = Site::new(&[3, -1]);
        let s = shift(&c, &x);
        // (θ_x ω)_y = ω_{y+x}
        for y in s.window().iter() {
            assert_eq!(s.state_at(y), c.state_at(&y.add(&x)));
        }
        assert_eq!(shift(&s, &x.neg()), c);
        assert_eq!(shift_window(&make_box(1, 2).unwrap(), &x).len(), 9);
    }

    #[test]
    fn configuration_json_roundtrip() {
        let alpha = Alphabet::uniform(["-1", "0", "+1"]);
        let w = Window::rect(&[0, 0], &[1, 1]).unwrap();
        let c = Configuration::new(w, vec![0, 2, 1, 2]).unwrap();
        let v = c.to_json(&alpha);
        assert_eq!(v["states"][1], "+1");
        assert_eq!(Configuration::from_json(&v, &alpha).unwrap(), c);
        let ws = serde_json::to_string(c.window()).unwrap();
        let back: Window = serde_json::from_str(&ws).unwrap();
        assert_eq!(&back, c.window());
    }

    #[test]
    fn alphabet_validation() {
        assert!(Alphabet::new(vec![], vec![]).is_err());
        assert!(Alphabet::new(vec!["a".into()], vec![0.5]).is_err());
        assert!(Alphabet::new(vec!["a".into(), "b".into()], vec![0.25, 0.75]).is_ok());
        assert!(Alphabet::new(vec!["a".into(), "b".into()], vec![-0.5, 1.5]).is_err());
    }

    #[test]
    fn triangular_neighbors_symmetric() {
        let offs = Adjacency::Triangular.offsets(2);
        for o in &offs {
            assert!(offs.contains(&o.neg()));
        }
        assert_eq!(offs.len(), 6);
    }
}
