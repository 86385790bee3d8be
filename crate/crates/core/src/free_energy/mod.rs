//! Specific free energy: the finite-`n` terms `|Δ_n|⁻¹ ℋ_{Δ_n}(μ | νγ_{Δ_n})`
//! and `|Δ_n|⁻¹ inf_ρ ℋ_{Δ_n}(μ | ργ_{Δ_n})`, superadditivity, finite
//! energy, DLR residuals and a heat-bath sampler.
//!
//! Mixed boundaries are mixtures of deterministic ones, so the infimum over
//! `ρ` is a convex minimization over the simplex spanned by the kernels of
//! the enumerated boundary classes.

pub mod field;
pub mod optimize;
pub mod sampler;

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{advance, decode_states, make_box_with, Configuration, Guard, Tail, Window};
use crate::measures::{format_number, mixture, rel_entropy, total_variation, DensityTable, Envelope, MeasureFamily};
use crate::specification::{boundary_classes, diam_b, BoundaryCondition, Prepared, SpecificationModel};

pub use field::ShiftInvariantField;
pub use optimize::{minimize_mixture, MixtureFit, MixtureOptions};
pub use sampler::{heat_bath_sweep, run_chains, HeatBath};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SfeOptions {
    pub mixture: MixtureOptions,
    pub guard: Guard,
}

/// The boundary `ν` used by the fixed-boundary term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryRule {
    /// Every site of `frame ∖ Δ_n` in `state`.
    Constant { state: usize },
    /// Equal-weight mixture of `draws` uniformly random deterministic boundaries.
    Random { seed: u64, draws: usize },
}

impl Default for BoundaryRule {
    fn default() -> Self {
        BoundaryRule::Constant { state: 0 }
    }
}

/// The frame and tail used for `Δ_n`.
pub fn box_frame(model: &SpecificationModel, lambda: &Window) -> (Window, Tail) {
    (model.required_frame(lambda), model.default_tail())
}

/// `νγ_Λ` for the rule, with frame and tail from [`box_frame`].
pub fn boundary_kernel(model: &SpecificationModel, lambda: &Window, rule: &BoundaryRule, guard: &Guard) -> Result<DensityTable> {
    let (frame, tail) = box_frame(model, lambda);
    boundary_kernel_on(model, lambda, &frame, tail, rule, guard)
}

/// `νγ_Λ` with `ν` living on `frame ∖ Λ`.
pub fn boundary_kernel_on(
    model: &SpecificationModel,
    lambda: &Window,
    frame: &Window,
    tail: Tail,
    rule: &BoundaryRule,
    guard: &Guard,
) -> Result<DensityTable> {
    let prepared = model.prepare(lambda, frame, tail, guard)?;
    let k = prepared.alphabet().size();
    let n = prepared.outside().len();
    match rule {
        BoundaryRule::Constant { state } => {
            if *state >= k {
                return Err(Error::Invalid(format!("boundary state {state} is not in the alphabet")));
            }
            Ok(prepared.kernel(&vec![*state; n])?.table)
        }
        BoundaryRule::Random { seed, draws } => {
            if *draws == 0 {
                return Err(Error::Invalid("a random boundary needs at least one draw".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let members = (0..*draws)
                .map(|_| {
                    let states: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
                    Ok(prepared.kernel(&states)?.table)
                })
                .collect::<Result<Vec<_>>>()?;
            mixture(&vec![1.0 / *draws as f64; *draws], &MeasureFamily::new(members)?)
        }
    }
}

fn check_field(mu: &ShiftInvariantField, model: &SpecificationModel) -> Result<()> {
    if mu.alphabet() != model.alphabet(mu.dim())? {
        return Err(Error::Shape("field and model use different alphabets".into()));
    }
    Ok(())
}

/// `|Δ_n|⁻¹ ℋ_{Δ_n}(μ | νγ_{Δ_n})`.
pub fn sfe_term(mu: &ShiftInvariantField, model: &SpecificationModel, n: usize, rule: &BoundaryRule, guard: &Guard) -> Result<f64> {
    check_field(mu, model)?;
    let lambda = make_box_with(n, mu.dim(), guard)?;
    let target = mu.marginal(&lambda, guard)?;
    let k = boundary_kernel(model, &lambda, rule, guard)?;
    Ok(rel_entropy(&target, &k)? / lambda.len() as f64)
}

/// `inf_ρ ℋ_Λ(μ | ργ_Λ)` over mixtures of deterministic boundaries on
/// `frame ∖ Λ`. The value never exceeds the best single boundary.
pub fn inf_entropy(
    target: &DensityTable,
    model: &SpecificationModel,
    lambda: &Window,
    frame: &Window,
    tail: Tail,
    opts: &SfeOptions,
) -> Result<MixtureFit> {
    let classes = boundary_classes(model, lambda, frame, tail, None, &opts.guard)?;
    let kernels: Vec<DensityTable> = classes.kernels()?.into_iter().map(|k| k.table).collect();
    fit_with_vertices(target, &kernels, opts.mixture)
}

fn fit_with_vertices(target: &DensityTable, kernels: &[DensityTable], opts: MixtureOptions) -> Result<MixtureFit> {
    let mut fit = minimize_mixture(target, kernels, opts)?;
    for (i, k) in kernels.iter().enumerate() {
        let v = rel_entropy(target, k)?;
        if v < fit.value {
            fit.value = v;
            fit.weights = (0..kernels.len()).map(|j| if j == i { 1.0 } else { 0.0 }).collect();
        }
    }
    Ok(fit)
}

/// `|Δ_n|⁻¹ inf_ρ ℋ_{Δ_n}(μ | ργ_{Δ_n})` with the frame of [`box_frame`].
pub fn sfe_inf_term(mu: &ShiftInvariantField, model: &SpecificationModel, n: usize, opts: &SfeOptions) -> Result<f64> {
    check_field(mu, model)?;
    let lambda = make_box_with(n, mu.dim(), &opts.guard)?;
    let (frame, tail) = box_frame(model, &lambda);
    let target = mu.marginal(&lambda, &opts.guard)?;
    Ok(inf_entropy(&target, model, &lambda, &frame, tail, opts)?.value / lambda.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SfeRow {
    pub n: usize,
    pub box_size: usize,
    pub term_fixed: f64,
    pub term_inf: f64,
    /// `Diam^∞ ℬ_{Δ_n}` (not divided by the volume).
    pub diam: f64,
    pub running_sup: f64,
    pub gap: f64,
}

impl SfeRow {
    /// `0 ≤ term_fixed − term_inf ≤ diam/|Δ_n|` up to `tol`, vacuous when
    /// both terms are infinite.
    pub fn sandwich_holds(&self, tol: f64) -> bool {
        if self.term_fixed.is_infinite() && self.term_inf.is_infinite() {
            return true;
        }
        let d = self.term_fixed - self.term_inf;
        d >= -tol && d <= self.diam / self.box_size as f64 + tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SfeReport {
    pub rows: Vec<SfeRow>,
}

impl SfeReport {
    pub const HEADER: &'static str = "n,box_size,term_fixed,term_inf,diam,running_sup";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n,
                r.box_size,
                format_number(r.term_fixed),
                format_number(r.term_inf),
                format_number(r.diam),
                format_number(r.running_sup)
            )?;
        }
        Ok(())
    }

    /// Sup of the infimum terms: the best finite-`n` lower estimate of `h(μ|γ)`.
    pub fn best_lower(&self) -> f64 {
        self.rows.last().map(|r| r.running_sup).unwrap_or(0.0)
    }

    pub fn check_sandwich(&self, tol: f64) -> Result<()> {
        for r in &self.rows {
            if !r.sandwich_holds(tol) {
                return Err(Error::Invariant(format!(
                    "n = {}: term_fixed {} and term_inf {} violate the diameter sandwich (diam {})",
                    r.n, r.term_fixed, r.term_inf, r.diam
                )));
            }
        }
        Ok(())
    }
}

fn sfe_row(mu: &ShiftInvariantField, model: &SpecificationModel, n: usize, rule: &BoundaryRule, opts: &SfeOptions) -> Result<SfeRow> {
    let lambda = make_box_with(n, mu.dim(), &opts.guard)?;
    let (frame, tail) = box_frame(model, &lambda);
    let target = mu.marginal(&lambda, &opts.guard)?;
    let classes = boundary_classes(model, &lambda, &frame, tail, None, &opts.guard)?;
    let kernels: Vec<DensityTable> = classes.kernels()?.into_iter().map(|k| k.table).collect();
    let mut env = Envelope::new(target.len());
    for k in &kernels {
        env.add(k.log_weights());
    }
    let fit = fit_with_vertices(&target, &kernels, opts.mixture)?;
    let fixed = rel_entropy(&target, &boundary_kernel(model, &lambda, rule, &opts.guard)?)?;
    let v = lambda.len() as f64;
    Ok(SfeRow {
        n,
        box_size: lambda.len(),
        term_fixed: fixed / v,
        term_inf: fit.value / v,
        diam: env.spread(),
        running_sup: 0.0,
        gap: fit.gap,
    })
}

/// Terms for `n = 0..=n_max`, computed in parallel.
pub fn sfe_report(mu: &ShiftInvariantField, model: &SpecificationModel, n_max: usize, rule: &BoundaryRule, opts: &SfeOptions) -> Result<SfeReport> {
    check_field(mu, model)?;
    let mut rows = (0..=n_max)
        .into_par_iter()
        .map(|n| sfe_row(mu, model, n, rule, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut sup = f64::NEG_INFINITY;
    for r in &mut rows {
        sup = sup.max(r.term_inf);
        r.running_sup = sup;
    }
    Ok(SfeReport { rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Superadditivity {
    pub union: f64,
    pub parts: Vec<f64>,
    /// `union − Σ parts`; nonnegative up to optimizer tolerance.
    pub slack: f64,
}

/// `inf_ρ ℋ_∪(μ|ργ_∪) − Σ_k inf_ρ ℋ_{Λ_k}(μ|ργ_{Λ_k})`, every infimum taken
/// over boundaries on a common `frame` with a common tail.
pub fn superadditivity_check(
    mu: &ShiftInvariantField,
    model: &SpecificationModel,
    parts: &[Window],
    frame: &Window,
    tail: Tail,
    opts: &SfeOptions,
) -> Result<Superadditivity> {
    check_field(mu, model)?;
    let first = parts.first().ok_or_else(|| Error::Invalid("no parts given".into()))?;
    let mut union = Window::empty(first.dim());
    for p in parts {
        if p.is_empty() {
            return Err(Error::Invalid("parts must be nonempty".into()));
        }
        if !p.is_disjoint(&union) {
            return Err(Error::Invalid("parts must be pairwise disjoint".into()));
        }
        union = union.union(p);
    }
    if !union.is_subset(frame) {
        return Err(Error::Shape("frame must contain every part".into()));
    }
    let inf = |w: &Window| -> Result<f64> {
        let target = mu.marginal(w, &opts.guard)?;
        Ok(inf_entropy(&target, model, w, frame, tail, opts)?.value)
    };
    let u = inf(&union)?;
    let ps = parts.par_iter().map(inf).collect::<Result<Vec<_>>>()?;
    let total: f64 = ps.iter().sum();
    let slack = if u.is_infinite() && total.is_infinite() { 0.0 } else { u - total };
    Ok(Superadditivity { union: u, parts: ps, slack })
}

/// Outcome of [`finite_energy_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteEnergy {
    /// `exp(−max_x Diam^∞ ℬ_{{x}})`.
    pub eps: f64,
    /// Single-site reference law `λ`.
    pub reference: Vec<f64>,
    /// `min log(μ(ζ|ω) / Π_x ελ(ζ_x))` over charged conditionings.
    pub margin: f64,
    pub pass: bool,
}

/// Checks `μ(· on Λ | ω) ≥ (ελ)^Λ` for every configuration `ω` on
/// `frame ∖ Λ` charged by `μ`. `λ` is the single-site kernel under the
/// boundary that agrees with the tail, and `ε` comes from the single-site
/// kernel families with the same frame.
pub fn finite_energy_check(
    mu: &ShiftInvariantField,
    model: &SpecificationModel,
    lambda: &Window,
    frame: &Window,
    tail: Tail,
    guard: &Guard,
) -> Result<FiniteEnergy> {
    check_field(mu, model)?;
    if lambda.is_empty() || !lambda.is_subset(frame) {
        return Err(Error::Shape("expected a nonempty window inside the frame".into()));
    }
    let diam = lambda
        .sites()
        .par_iter()
        .map(|x| diam_b(model, &Window::singleton(x.clone()), frame, tail, guard))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let eps = (-diam).exp();
    let quiet = match tail {
        Tail::Fixed(s) => s,
        Tail::Unknown => model.closed_state(),
    };
    let x0 = Window::singleton(lambda.sites()[0].clone());
    let bc = BoundaryCondition::constant(&x0, frame.clone(), quiet, tail)?;
    let reference = model.kernel(&x0, &bc, guard)?.table.probs();
    let log_floor: Vec<f64> = reference.iter().map(|r| (eps * r).ln()).collect();

    let table = mu.marginal(frame, guard)?;
    let k = table.alphabet().size();
    let outside = frame.difference(lambda);
    let place = |w: &Window| -> Vec<usize> { w.iter().map(|x| k.pow(frame.position(x).unwrap() as u32)).collect() };
    let lambda_place = place(lambda);
    let out_place = place(&outside);
    let lambda_total = guard.entries(k, lambda.len(), "finite-energy window")?;
    let lambda_codes: Vec<(usize, f64)> = (0..lambda_total)
        .map(|c| {
            let s = decode_states(c as u64, lambda.len(), k);
            let off = s.iter().zip(&lambda_place).map(|(a, b)| a * b).sum();
            let floor = s.iter().map(|&v| log_floor[v]).sum();
            (off, floor)
        })
        .collect();
    let mut margin = f64::INFINITY;
    let mut states = vec![0usize; outside.len()];
    loop {
        let off: usize = states.iter().zip(&out_place).map(|(a, b)| a * b).sum();
        let lws: Vec<f64> = lambda_codes.iter().map(|(o, _)| table.log_weights()[off + o]).collect();
        let z = crate::measures::log_sum_exp(&lws);
        if z > f64::NEG_INFINITY {
            for ((_, floor), lw) in lambda_codes.iter().zip(&lws) {
                if *floor > f64::NEG_INFINITY {
                    margin = margin.min(lw - z - floor);
                }
            }
        }
        if !advance(&mut states, k) {
            break;
        }
    }
    Ok(FiniteEnergy {
        eps,
        reference,
        margin,
        pass: margin >= -1e-12,
    })
}

/// `μ_F(ω) γ_Λ(ζ | ω)`: the law obtained by resampling `Λ` from the kernel
/// under the boundary drawn from `table` on `frame ∖ Λ`.
pub fn resample(table: &DensityTable, prepared: &dyn Prepared) -> Result<DensityTable> {
    let frame = table.window();
    let lambda = prepared.lambda();
    if prepared.frame() != frame {
        return Err(Error::Shape("table must live on the kernel frame".into()));
    }
    let k = table.alphabet().size();
    let outside = prepared.outside();
    let out_marginal = table.marginal(outside)?;
    let place = |w: &Window| -> Vec<usize> { w.iter().map(|x| k.pow(frame.position(x).unwrap() as u32)).collect() };
    let lambda_place = place(lambda);
    let out_place = place(outside);
    let lambda_offsets: Vec<usize> = (0..k.pow(lambda.len() as u32))
        .map(|c| {
            decode_states(c as u64, lambda.len(), k)
                .iter()
                .zip(&lambda_place)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    let mut cache: HashMap<Vec<u32>, Vec<f64>> = HashMap::new();
    let mut out = vec![f64::NEG_INFINITY; table.len()];
    let mut states = vec![0usize; outside.len()];
    for code in 0..out_marginal.len() {
        let lm = out_marginal.log_weights()[code];
        if lm > f64::NEG_INFINITY {
            let sig = prepared.signature(&states)?;
            let kernel = match cache.get(&sig) {
                Some(v) => v.clone(),
                None => {
                    let v = prepared.kernel(&states)?.table.log_weights().to_vec();
                    cache.insert(sig, v.clone());
                    v
                }
            };
            let off: usize = states.iter().zip(&out_place).map(|(a, b)| a * b).sum();
            for (lo, kv) in lambda_offsets.iter().zip(&kernel) {
                out[off + lo] = lm + kv;
            }
        }
        advance(&mut states, k);
    }
    Ok(DensityTable::from_log_weights(frame.clone(), table.alphabet().clone(), out)?.normalize())
}

/// TV distance on `frame` between `μ` and `μγ_Λ`.
pub fn dlr_residual(
    mu: &ShiftInvariantField,
    model: &SpecificationModel,
    lambda: &Window,
    frame: &Window,
    tail: Tail,
    guard: &Guard,
) -> Result<f64> {
    check_field(mu, model)?;
    let table = mu.marginal(frame, guard)?;
    let prepared = model.prepare(lambda, frame, tail, guard)?;
    total_variation(&table, &resample(&table, prepared.as_ref())?)
}

/// A Gibbs table on `window` under the model's default tail, as a field.
pub fn gibbs_window_field(model: &SpecificationModel, window: &Window, guard: &Guard) -> Result<ShiftInvariantField> {
    let bc = BoundaryCondition::tail_only(window, model.default_tail());
    ShiftInvariantField::tables(vec![model.kernel(window, &bc, guard)?.table])
}

/// Samples a uniformly random deterministic boundary on `frame ∖ Λ`.
pub fn random_boundary(model: &SpecificationModel, lambda: &Window, frame: &Window, tail: Tail, rng: &mut ChaCha8Rng) -> Result<BoundaryCondition> {
    let k = model.alphabet(lambda.dim())?.size();
    let n = frame.difference(lambda).len();
    let states = (0..n).map(|_| rng.gen_range(0..k)).collect();
    BoundaryCondition::new(lambda, frame.clone(), Configuration::new(frame.difference(lambda), states)?, tail)
}

#[cfg(test)]
mod tests;
