//! Specifications: finite-volume kernels `γ̂_Λ(·, ω)` for four model
//! families, the consistency check `γ_Δ = γ_Δ γ_Λ`, and max-diameters of
//! the families of kernels obtained by varying deterministic boundaries.
//!
//! A boundary condition is a configuration on `frame ∖ Λ` together with a
//! [`Tail`]. With a fixed tail the boundary is a complete deterministic
//! configuration and no truncation happens; with an unknown tail, anything
//! that could see past the frame is reported as ambiguous.

pub mod griffiths;
pub mod ising;
pub mod loop_on;
pub mod potential;
pub mod random_cluster;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{advance, decode_states, Adjacency, Alphabet, Configuration, Guard, Tail, Window};
use crate::measures::{log_sum_exp, total_variation, DensityTable, Envelope};

pub use griffiths::{griffiths_kernel_simplified, griffiths_window, GriffithsParams};
pub use ising::{ising_alpha, ising_decompose_check};
pub use loop_on::LoopOnParams;
pub use potential::{eps, hamiltonian, Potential, PotentialSpec, Term};
pub use random_cluster::RandomClusterParams;

/// A frame `Δ ⊇ Λ`, the configuration on `Δ ∖ Λ`, and the tail beyond `Δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCondition {
    frame: Window,
    outside: Configuration,
    tail: Tail,
}

impl BoundaryCondition {
    pub fn new(lambda: &Window, frame: Window, outside: Configuration, tail: Tail) -> Result<Self> {
        if !lambda.is_subset(&frame) {
            return Err(Error::Shape("frame does not contain the window".into()));
        }
        if outside.window() != &frame.difference(lambda) {
            return Err(Error::Shape("boundary configuration must live on frame minus window".into()));
        }
        Ok(BoundaryCondition { frame, outside, tail })
    }

    pub fn from_states(lambda: &Window, frame: Window, states: Vec<usize>, tail: Tail) -> Result<Self> {
        let outside = Configuration::new(frame.difference(lambda), states)?;
        Self::new(lambda, frame, outside, tail)
    }

    /// Every site of `frame ∖ Λ` in `state`.
    pub fn constant(lambda: &Window, frame: Window, state: usize, tail: Tail) -> Result<Self> {
        let outside = Configuration::constant(frame.difference(lambda), state);
        Self::new(lambda, frame, outside, tail)
    }

    /// No sites between `Λ` and the tail.
    pub fn tail_only(lambda: &Window, tail: Tail) -> Self {
        Self::constant(lambda, lambda.clone(), 0, tail).expect("empty boundary")
    }

    pub fn frame(&self) -> &Window {
        &self.frame
    }

    pub fn outside(&self) -> &Configuration {
        &self.outside
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }
}

/// A normalized kernel together with its log normalization constant.
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub table: DensityTable,
    pub log_z: f64,
}

/// One of the four model families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpecificationModel {
    Potential(PotentialSpec),
    RandomCluster(RandomClusterParams),
    LoopOn(LoopOnParams),
    Griffiths(GriffithsParams),
}

/// A model specialised to one window and frame, ready to produce kernels
/// for many boundary configurations.
pub trait Prepared: Send + Sync {
    fn lambda(&self) -> &Window;
    fn frame(&self) -> &Window;
    /// `frame ∖ Λ`, the index space of boundary states.
    fn outside(&self) -> &Window;
    fn alphabet(&self) -> &Alphabet;
    /// Positions of `outside` that can influence the kernel.
    fn relevant(&self) -> Vec<usize>;
    /// Two boundaries with equal signatures yield equal kernels.
    fn signature(&self, outside: &[usize]) -> Result<Vec<u32>>;
    /// Unnormalized log-weights over `E^Λ`.
    fn log_weights(&self, outside: &[usize]) -> Result<Vec<f64>>;

    fn kernel(&self, outside: &[usize]) -> Result<KernelTable> {
        let lw = self.log_weights(outside)?;
        kernel_from_log_weights(self.lambda(), self.alphabet(), lw)
    }
}

pub(crate) fn kernel_from_log_weights(lambda: &Window, alphabet: &Alphabet, lw: Vec<f64>) -> Result<KernelTable> {
    let log_z = log_sum_exp(&lw);
    if log_z == f64::NEG_INFINITY {
        return Err(Error::Domain("kernel has no admissible configuration".into()));
    }
    let table = DensityTable::from_log_weights(lambda.clone(), alphabet.clone(), lw)?.normalize();
    Ok(KernelTable { table, log_z })
}

impl SpecificationModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpecificationModel::Potential(p) => p.validate(),
            SpecificationModel::RandomCluster(p) => p.validate(),
            SpecificationModel::LoopOn(p) => p.validate(),
            SpecificationModel::Griffiths(p) => p.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpecificationModel::Potential(_) => "potential",
            SpecificationModel::RandomCluster(_) => "random_cluster",
            SpecificationModel::LoopOn(_) => "loop_on",
            SpecificationModel::Griffiths(_) => "griffiths",
        }
    }

    pub fn alphabet(&self, dim: usize) -> Result<Alphabet> {
        match self {
            SpecificationModel::Potential(p) => Ok(p.alphabet.clone()),
            SpecificationModel::RandomCluster(_) => random_cluster::rc_alphabet(dim),
            SpecificationModel::LoopOn(_) => Ok(loop_on::loop_alphabet()),
            SpecificationModel::Griffiths(_) => Ok(griffiths::griffiths_alphabet()),
        }
    }

    pub fn adjacency(&self) -> Adjacency {
        match self {
            SpecificationModel::LoopOn(_) => Adjacency::Triangular,
            _ => Adjacency::Square,
        }
    }

    /// The state playing the role of "closed" or "reference" beyond a frame.
    pub fn closed_state(&self) -> usize {
        match self {
            SpecificationModel::Griffiths(_) => griffiths::CLOSED,
            _ => 0,
        }
    }

    pub fn default_tail(&self) -> Tail {
        Tail::Fixed(self.closed_state())
    }

    /// Smallest frame that determines every kernel on `Λ` without a tail.
    pub fn required_frame(&self, lambda: &Window) -> Window {
        match self {
            SpecificationModel::Potential(p) => p.potential.reach(lambda),
            _ => lambda.closed_neighborhood(self.adjacency()),
        }
    }

    /// Edge boundary `|∂Λ|` in the model's adjacency.
    pub fn boundary_size(&self, lambda: &Window) -> usize {
        crate::lattice::edge_boundary_with(lambda, self.adjacency()).len()
    }

    pub fn prepare(&self, lambda: &Window, frame: &Window, tail: Tail, guard: &Guard) -> Result<Box<dyn Prepared>> {
        self.validate()?;
        if lambda.is_empty() {
            return Err(Error::Invalid("window is empty".into()));
        }
        if !lambda.is_subset(frame) {
            return Err(Error::Shape("frame does not contain the window".into()));
        }
        Ok(match self {
            SpecificationModel::Potential(p) => Box::new(potential::PreparedPotential::new(p, lambda, frame, tail, guard)?),
            SpecificationModel::RandomCluster(p) => {
                Box::new(random_cluster::PreparedRandomCluster::new(*p, lambda, frame, tail, guard)?)
            }
            SpecificationModel::LoopOn(p) => Box::new(loop_on::PreparedLoop::new(*p, lambda, frame, tail, guard)?),
            SpecificationModel::Griffiths(p) => Box::new(griffiths::PreparedGriffiths::new(*p, lambda, frame, tail, guard)?),
        })
    }

    /// `γ̂_Λ(·, ω)` for the boundary `bc`.
    pub fn kernel(&self, lambda: &Window, bc: &BoundaryCondition, guard: &Guard) -> Result<KernelTable> {
        check_bc(lambda, bc)?;
        let prepared = self.prepare(lambda, &bc.frame, bc.tail, guard)?;
        bc.outside.validate(prepared.alphabet())?;
        prepared.kernel(bc.outside.states())
    }
}

fn check_bc(lambda: &Window, bc: &BoundaryCondition) -> Result<()> {
    if bc.outside.window() != &bc.frame.difference(lambda) {
        return Err(Error::Shape("boundary condition does not match the window".into()));
    }
    Ok(())
}

/// `γ̂_Λ(·, ω)`.
pub fn kernel(model: &SpecificationModel, lambda: &Window, bc: &BoundaryCondition, guard: &Guard) -> Result<DensityTable> {
    Ok(model.kernel(lambda, bc, guard)?.table)
}

/// TV distance between `γ̂_Δ(·, ω)` and the composition `γ_Δ γ_Λ`, where
/// `bc` is a boundary for `Δ`.
pub fn check_consistency(
    model: &SpecificationModel,
    lambda: &Window,
    delta: &Window,
    bc: &BoundaryCondition,
    guard: &Guard,
) -> Result<f64> {
    if !lambda.is_subset(delta) {
        return Err(Error::Shape("inner window must be contained in the outer one".into()));
    }
    let outer = model.kernel(delta, bc, guard)?.table;
    if lambda == delta {
        return Ok(0.0);
    }
    let alphabet = outer.alphabet().clone();
    let k = alphabet.size();
    let frame = &bc.frame;
    let prepared = model.prepare(lambda, frame, bc.tail, guard)?;
    let mid = delta.difference(lambda);
    let mid_marginal = outer.marginal(&mid)?;
    let lambda_out = prepared.outside().clone();

    // place values of Λ-states and mid-states inside a Δ code
    let place = |w: &Window| -> Vec<usize> {
        w.iter().map(|x| k.pow(delta.position(x).unwrap() as u32)).collect()
    };
    let lambda_place = place(lambda);
    let mid_place = place(&mid);
    // outside-of-Λ slots filled from the mid configuration or from bc
    let mut base = vec![0usize; lambda_out.len()];
    let mut mid_slot = vec![usize::MAX; mid.len()];
    for (i, x) in lambda_out.iter().enumerate() {
        if let Some(j) = mid.position(x) {
            mid_slot[j] = i;
        } else {
            base[i] = bc.outside.state_at(x).expect("frame site outside Δ");
        }
    }
    let mut composed = vec![f64::NEG_INFINITY; outer.len()];
    let mut mid_states = vec![0usize; mid.len()];
    let lambda_total = k.pow(lambda.len() as u32);
    for mid_code in 0..mid_marginal.len() {
        let lm = mid_marginal.log_weights()[mid_code];
        if lm > f64::NEG_INFINITY {
            let mut outside = base.clone();
            for (j, &s) in mid_states.iter().enumerate() {
                outside[mid_slot[j]] = s;
            }
            let inner = prepared.kernel(&outside)?.table;
            let offset: usize = mid_states.iter().zip(&mid_place).map(|(s, p)| s * p).sum();
            for lcode in 0..lambda_total {
                let states = decode_states(lcode as u64, lambda.len(), k);
                let code = offset + states.iter().zip(&lambda_place).map(|(s, p)| s * p).sum::<usize>();
                composed[code] = lm + inner.log_weights()[lcode];
            }
        }
        advance(&mut mid_states, k);
    }
    let composed = DensityTable::from_log_weights(delta.clone(), alphabet, composed)?.normalize();
    total_variation(&outer, &composed)
}

/// Representatives of the distinct kernels reachable by deterministic
/// boundaries on `frame ∖ Λ`.
pub struct BoundaryClasses {
    pub prepared: Box<dyn Prepared>,
    /// One boundary per class, in first-seen enumeration order.
    pub representatives: Vec<Vec<usize>>,
    /// Number of boundary configurations enumerated.
    pub enumerated: u64,
}

impl BoundaryClasses {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn kernels(&self) -> Result<Vec<KernelTable>> {
        self.representatives
            .par_iter()
            .map(|r| self.prepared.kernel(r))
            .collect()
    }

    /// Max-diameter of the class kernels.
    pub fn diameter(&self) -> Result<f64> {
        let len = self.prepared.alphabet().size().pow(self.prepared.lambda().len() as u32);
        let env = self
            .representatives
            .par_iter()
            .try_fold(
                || Envelope::new(len),
                |mut env, r| {
                    env.add(self.prepared.kernel(r)?.table.log_weights());
                    Ok::<_, Error>(env)
                },
            )
            .try_reduce(
                || Envelope::new(len),
                |mut a, b| {
                    a.merge(&b);
                    Ok(a)
                },
            )?;
        Ok(env.spread())
    }
}

/// Enumerates boundary configurations on `frame ∖ Λ` that agree with
/// `pinned` where it is defined, grouped by kernel signature.
pub fn boundary_classes(
    model: &SpecificationModel,
    lambda: &Window,
    frame: &Window,
    tail: Tail,
    pinned: Option<&Configuration>,
    guard: &Guard,
) -> Result<BoundaryClasses> {
    let prepared = model.prepare(lambda, frame, tail, guard)?;
    let (representatives, enumerated) = enumerate_classes(prepared.as_ref(), model.closed_state(), pinned, guard)?;
    Ok(BoundaryClasses {
        prepared,
        representatives,
        enumerated,
    })
}

pub(crate) fn enumerate_classes(
    prepared: &dyn Prepared,
    filler: usize,
    pinned: Option<&Configuration>,
    guard: &Guard,
) -> Result<(Vec<Vec<usize>>, u64)> {
    let outside = prepared.outside();
    let lambda = prepared.lambda();
    let frame = prepared.frame();
    let k = prepared.alphabet().size();
    let mut base = vec![filler; outside.len()];
    let mut fixed = vec![false; outside.len()];
    if let Some(pin) = pinned {
        pin.validate(prepared.alphabet())?;
        for (x, &s) in pin.window().iter().zip(pin.states()) {
            if let Some(i) = outside.position(x) {
                base[i] = s;
                fixed[i] = true;
            } else if !frame.contains(x) || lambda.contains(x) {
                return Err(Error::Shape(format!("pinned site {x:?} is not a boundary site")));
            }
        }
    }
    let free: Vec<usize> = prepared.relevant().into_iter().filter(|&i| !fixed[i]).collect();
    let total = guard.entries(k, free.len(), "boundary enumeration")?;
    let mut seen: HashMap<Vec<u32>, ()> = HashMap::new();
    let mut representatives = Vec::new();
    let mut states = vec![0usize; free.len()];
    let mut current = base;
    loop {
        for (slot, &s) in free.iter().zip(&states) {
            current[*slot] = s;
        }
        let sig = prepared.signature(&current)?;
        if seen.insert(sig, ()).is_none() {
            representatives.push(current.clone());
        }
        if !advance(&mut states, k) {
            break;
        }
    }
    Ok((representatives, total as u64))
}

/// `Diam^∞` of `{γ̂_Λ(·, ω)}` over deterministic boundaries on `frame ∖ Λ`.
pub fn diam_b(model: &SpecificationModel, lambda: &Window, frame: &Window, tail: Tail, guard: &Guard) -> Result<f64> {
    boundary_classes(model, lambda, frame, tail, None, guard)?.diameter()
}

/// Closed-form upper bound on [`diam_b`] for any frame:
/// `4|∂Λ||ln q|` (random-cluster), `8|∂Λ|β` (Griffiths),
/// `4|∂Λ||ln n| + 2|∂Λ||ln x|` (loop), `4ε_{Λ,Λ}` (potential).
pub fn diam_bound(model: &SpecificationModel, lambda: &Window) -> f64 {
    let b = model.boundary_size(lambda) as f64;
    match model {
        SpecificationModel::RandomCluster(p) => 4.0 * b * p.q.ln().abs(),
        SpecificationModel::Griffiths(p) => 8.0 * b * p.beta.abs(),
        SpecificationModel::LoopOn(p) => 4.0 * b * p.n.ln().abs() + 2.0 * b * p.x.ln().abs(),
        SpecificationModel::Potential(spec) => 4.0 * eps(&spec.potential, lambda, lambda),
    }
}

/// As [`diam_b`], with the boundary pinned to `pinned` on `Δ ∖ Λ` and only
/// the sites of `frame ∖ Δ` varying.
pub fn diam_b_restricted(
    model: &SpecificationModel,
    lambda: &Window,
    delta: &Window,
    pinned: &Configuration,
    frame: &Window,
    tail: Tail,
    guard: &Guard,
) -> Result<f64> {
    if !lambda.is_subset(delta) || !delta.is_subset(frame) {
        return Err(Error::Shape("expected Λ ⊆ Δ ⊆ frame".into()));
    }
    if pinned.window() != &delta.difference(lambda) {
        return Err(Error::Shape("pinned configuration must live on Δ minus Λ".into()));
    }
    boundary_classes(model, lambda, frame, tail, Some(pinned), guard)?.diameter()
}
