//! The desk-scale invariant suite: one check per acceptance criterion, each
//! reporting the worst observed quantity next to the bound it must respect.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cluster::{count_clusters, BondFrame, Exterior};
use crate::error::{Error, Result};
use crate::free_energy::{
    dlr_residual, finite_energy_check, gibbs_window_field, inf_entropy, minimize_mixture, run_chains, sfe_report,
    superadditivity_check, BoundaryRule, HeatBath, MixtureOptions, SfeOptions, ShiftInvariantField,
};
use crate::lattice::{advance, edge_boundary, make_box, Adjacency, Alphabet, Configuration, Guard, Site, Tail, Window};
use crate::measures::{ext_abs_diff, max_diameter, rel_entropy, total_variation, DensityTable, MeasureFamily};
use crate::specification::{
    check_consistency, diam_b, diam_b_restricted, eps, griffiths, griffiths_kernel_simplified, griffiths_window,
    random_cluster, BoundaryCondition, GriffithsParams, LoopOnParams, Potential, PotentialSpec, RandomClusterParams,
    SpecificationModel, Term,
};

/// Outcome of one criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    /// Worst observed value of the checked quantity.
    pub measured: f64,
    /// The value it is compared against.
    pub bound: f64,
    pub detail: String,
}

impl Check {
    fn new(id: u8, name: &str, pass: bool, measured: f64, bound: f64, detail: String) -> Self {
        Check {
            id,
            name: name.into(),
            pass,
            measured,
            bound,
            detail,
        }
    }

    /// One human-readable line.
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: measured {:.6e} vs bound {:.6e}; {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.bound,
            self.detail
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub seed: u64,
    pub guard: Guard,
    pub mixture_tol: f64,
    pub mixture_max_iter: usize,
    pub sampler_sweeps: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        let m = MixtureOptions::default();
        VerifyOptions {
            seed: 20_240_601,
            guard: Guard::default(),
            mixture_tol: m.tol,
            mixture_max_iter: m.max_iter,
            sampler_sweeps: 100_000,
        }
    }
}

impl VerifyOptions {
    fn sfe(&self) -> SfeOptions {
        SfeOptions {
            mixture: MixtureOptions {
                tol: self.mixture_tol,
                max_iter: self.mixture_max_iter,
            },
            guard: self.guard,
        }
    }

    fn rng(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }
}

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "specification consistency"),
    (2, "weak-dependence bounds"),
    (3, "cluster boundary bound"),
    (4, "max-entropy difference bound"),
    (5, "superadditivity"),
    (6, "free-energy sandwich"),
    (7, "zero free-energy witnesses"),
    (8, "Griffiths dual forms"),
    (9, "Griffiths window is DLR"),
    (10, "finite energy"),
    (11, "heat-bath sampler"),
    (12, "oracle equivalence"),
];

/// Runs one criterion by number.
pub fn run(id: u8, opts: &VerifyOptions) -> Result<Check> {
    match id {
        1 => consistency(opts),
        2 => weak_dependence(opts),
        3 => cluster_bound(opts),
        4 => obvious_bound(opts),
        5 => superadditivity(opts),
        6 => sandwich(opts),
        7 => zero_witnesses(opts),
        8 => griffiths_dual(opts),
        9 => griffiths_dlr(opts),
        10 => finite_energy(opts),
        11 => sampler(opts),
        12 => oracles(opts),
        _ => Err(Error::Invalid(format!("no criterion {id}"))),
    }
}

pub fn run_all(opts: &VerifyOptions) -> Result<Vec<Check>> {
    CRITERIA.iter().map(|(id, _)| run(*id, opts)).collect()
}

fn name(id: u8) -> &'static str {
    CRITERIA[id as usize - 1].1
}

fn origin(d: usize) -> Window {
    Window::singleton(Site::origin(d))
}

fn pm_alphabet() -> Alphabet {
    Alphabet::uniform(["-1", "+1"])
}

/// One instance of each model family at moderate parameters.
pub fn reference_models() -> Vec<SpecificationModel> {
    vec![
        SpecificationModel::Potential(
            PotentialSpec::new(Potential::ising(2, 0.5).with_field(0.2), pm_alphabet()).expect("valid Ising potential"),
        ),
        SpecificationModel::RandomCluster(RandomClusterParams { p: 0.4, q: 2.5 }),
        SpecificationModel::LoopOn(LoopOnParams { n: 1.5, x: 0.7 }),
        SpecificationModel::Griffiths(GriffithsParams { p: 0.6, beta: 0.7 }),
    ]
}

/// Tails a model accepts as exact boundaries.
fn fixed_tails(model: &SpecificationModel, k: usize) -> Vec<usize> {
    match model {
        SpecificationModel::RandomCluster(_) => vec![0],
        SpecificationModel::Griffiths(_) => vec![griffiths::CLOSED],
        _ => (0..k).collect(),
    }
}

/// Constant boundaries in every state, then uniformly random ones, up to `count`.
fn boundaries(
    model: &SpecificationModel,
    lambda: &Window,
    frame: &Window,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<BoundaryCondition>> {
    let k = model.alphabet(lambda.dim())?.size();
    let tails = fixed_tails(model, k);
    let tail_for = |s: usize| Tail::Fixed(if tails.contains(&s) { s } else { tails[0] });
    let mut out = Vec::with_capacity(count);
    for s in 0..k {
        out.push(BoundaryCondition::constant(lambda, frame.clone(), s, tail_for(s))?);
    }
    let n = frame.difference(lambda).len();
    while out.len() < count {
        let states = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let tail = Tail::Fixed(tails[rng.gen_range(0..tails.len())]);
        out.push(BoundaryCondition::from_states(lambda, frame.clone(), states, tail)?);
    }
    Ok(out)
}

fn consistency(opts: &VerifyOptions) -> Result<Check> {
    let g = &opts.guard;
    let mut rng = opts.rng(1);
    let delta1 = make_box(1, 2)?;
    let frame = make_box(2, 2)?;
    let inners = [origin(2), Window::rect(&[0, 0], &[1, 0])?, Window::rect(&[0, 0], &[1, 1])?];
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;
    for model in reference_models() {
        for inner in &inners {
            for delta in [inner, &delta1] {
                let bcs = boundaries(&model, delta, &frame, 20, &mut rng)?;
                let res = bcs
                    .par_iter()
                    .map(|bc| check_consistency(&model, inner, delta, bc, g))
                    .collect::<Result<Vec<_>>>()?;
                cases += res.len();
                worst = res.into_iter().fold(worst, f64::max);
            }
        }
    }
    let bound = 1e-10;
    Ok(Check::new(1, name(1), worst <= bound, worst, bound, format!("{cases} (model, Λ, Δ, boundary) cases, TV residual")))
}

fn weak_dependence(opts: &VerifyOptions) -> Result<Check> {
    let g = &opts.guard;
    let mut detail = Vec::new();
    // largest diam/bound; a zero bound demands a zero diameter
    let mut worst: f64 = 0.0;
    let mut record = |d: f64, b: f64| {
        let ratio = if b > 0.0 {
            d / b
        } else if d <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
    };

    let grid: Vec<RandomClusterParams> = [0.3, 0.5, 0.7]
        .iter()
        .flat_map(|&p| [0.5, 2.0, 4.0].map(|q| RandomClusterParams { p, q }))
        .collect();
    for n in 0..=1 {
        let lambda = make_box(n, 2)?;
        let frame = lambda.closed_neighborhood(Adjacency::Square);
        let frame = if n == 0 { make_box(1, 2)? } else { frame };
        let diams = random_cluster::diam_grid(&lambda, &frame, Tail::Fixed(0), &grid, g)?;
        let boundary = edge_boundary(&lambda).len() as f64;
        for (params, d) in grid.iter().zip(diams) {
            record(d, 4.0 * boundary * params.q.ln().abs());
        }
    }
    detail.push(format!("random-cluster 2x{} grid, n in {{0,1}}", grid.len()));

    let lambda = origin(2);
    let frame = make_box(1, 2)?;
    let boundary = edge_boundary(&lambda).len() as f64;
    for beta in [0.2, 0.5, 1.0] {
        let model = SpecificationModel::Griffiths(GriffithsParams { p: 0.5, beta });
        let d = diam_b(&model, &lambda, &frame, Tail::Fixed(griffiths::CLOSED), g)?;
        record(d, 8.0 * boundary * beta);
    }
    detail.push("Griffiths beta in {0.2,0.5,1}".into());

    for (n, x) in [(0.5, 1.0), (2.0, 1.0), (3.0, 0.6)] {
        let model = SpecificationModel::LoopOn(LoopOnParams { n, x });
        let frame = lambda.closed_neighborhood(Adjacency::Triangular);
        let d = diam_b(&model, &lambda, &frame, Tail::Fixed(0), g)?;
        let db = model.boundary_size(&lambda) as f64;
        record(d, 4.0 * db * f64::ln(n).abs() + 2.0 * db * f64::ln(x).abs());
    }
    detail.push("loop O(n) 3 cases".into());

    // restricted diameters of finite-range potentials against 4ε_{Λ,Δ}
    let delta = make_box(1, 2)?;
    let frame = make_box(2, 2)?;
    let next = Term {
        support: vec![Site::new(&[0, 0]), Site::new(&[2, 0])],
        table: vec![-0.15, 0.15, 0.15, -0.15],
    };
    let mut long = Potential::ising(2, 0.3);
    long.terms.push(next);
    let long = Potential::new(2, long.terms, 2)?;
    let mut rng = opts.rng(2);
    let pins_len = delta.difference(&lambda).len();
    for potential in [Potential::ising(2, 0.3), long] {
        let spec = PotentialSpec::new(potential, pm_alphabet())?;
        let bound = 4.0 * eps(&spec.potential, &lambda, &delta);
        let model = SpecificationModel::Potential(spec);
        let mut pins = vec![vec![0; pins_len], vec![1; pins_len]];
        pins.extend((0..3).map(|_| (0..pins_len).map(|_| rng.gen_range(0..2)).collect()));
        for pin in pins {
            let pinned = Configuration::new(delta.difference(&lambda), pin)?;
            let d = diam_b_restricted(&model, &lambda, &delta, &pinned, &frame, Tail::Fixed(0), g)?;
            record(d, bound);
        }
    }
    detail.push("Ising potentials, 5 pins each".into());
    Ok(Check::new(2, name(2), worst <= 1.0 + 1e-12, worst, 1.0, format!("{}; largest diameter/bound ratio", detail.join(", "))))
}

fn cluster_bound(_opts: &VerifyOptions) -> Result<Check> {
    let frame = make_box(1, 2)?;
    let lambda = origin(2);
    let pos0 = frame.position(&Site::origin(2)).expect("origin in box");
    let outside: Vec<usize> = (0..frame.len()).filter(|&i| i != pos0).collect();
    let spread = (0..4u32)
        .into_par_iter()
        .map(|inner| {
            let mut lo = usize::MAX;
            let mut hi = 0;
            let mut states = vec![0usize; outside.len()];
            loop {
                let mut masks = vec![0u32; frame.len()];
                masks[pos0] = inner;
                for (&i, &s) in outside.iter().zip(&states) {
                    masks[i] = s as u32;
                }
                let c = count_clusters(&BondFrame::new(frame.clone(), masks)?, &lambda, Exterior::Closed)?;
                lo = lo.min(c);
                hi = hi.max(c);
                if !advance(&mut states, 4) {
                    break;
                }
            }
            Ok(hi - lo)
        })
        .collect::<Result<Vec<usize>>>()?;
    let worst = spread.into_iter().max().unwrap_or(0) as f64;
    let bound = 2.0 * edge_boundary(&lambda).len() as f64;
    Ok(Check::new(
        3,
        name(3),
        worst <= bound,
        worst,
        bound,
        "all 4^9 bond configurations on the 3x3 box".into(),
    ))
}

fn random_table(window: &Window, alphabet: &Alphabet, rng: &mut ChaCha8Rng, zeros: bool) -> Result<DensityTable> {
    let len = alphabet.size().pow(window.len() as u32);
    let w: Vec<f64> = (0..len)
        .map(|_| {
            if zeros && rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen::<f64>().powi(3) + 1e-9
            }
        })
        .collect();
    let w = if w.iter().all(|&x| x == 0.0) { vec![1.0; len] } else { w };
    Ok(DensityTable::from_weights(window.clone(), alphabet.clone(), &w)?.normalize())
}

fn obvious_bound(opts: &VerifyOptions) -> Result<Check> {
    let mut rng = opts.rng(4);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut at = (0.0, 0.0);
    let alphabets = [Alphabet::uniform(["a", "b"]), Alphabet::uniform(["a", "b", "c"])];
    for _ in 0..10_000 {
        let alphabet = &alphabets[rng.gen_range(0..2)];
        let window = Window::rect(&[0], &[rng.gen_range(0..3)])?;
        let mu = random_table(&window, alphabet, &mut rng, true)?;
        let nu = random_table(&window, alphabet, &mut rng, false)?;
        let nu2 = random_table(&window, alphabet, &mut rng, false)?;
        let diff = ext_abs_diff(rel_entropy(&mu, &nu)?, rel_entropy(&mu, &nu2)?);
        let diam = max_diameter(&MeasureFamily::new(vec![nu, nu2])?);
        if diff - diam > worst_excess {
            worst_excess = diff - diam;
            at = (diff, diam);
        }
    }
    let pass = worst_excess <= 1e-12;
    Ok(Check::new(4, name(4), pass, at.0, at.1, "10^4 random triples; tightest shown".into()))
}

fn bond_product(p: f64) -> Result<ShiftInvariantField> {
    let alphabet = random_cluster::rc_alphabet(2)?;
    let probs = (0..4u32)
        .map(|s| p.powi(s.count_ones() as i32) * (1.0 - p).powi(2 - s.count_ones() as i32))
        .collect();
    ShiftInvariantField::product(2, alphabet, probs)
}

/// Every split of `window` into two nonempty parts.
fn two_part_splits(window: &Window) -> Vec<[Window; 2]> {
    let n = window.len();
    (1..(1u64 << (n - 1)))
        .map(|mask| {
            let a = window.sites().iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| s.clone());
            let a = Window::new(window.dim(), a).expect("subset of a window");
            let b = window.difference(&a);
            [a, b]
        })
        .collect()
}

fn superadditivity(opts: &VerifyOptions) -> Result<Check> {
    let sfe = opts.sfe();
    let g = &opts.guard;
    let mut worst = f64::INFINITY;
    let mut cases = 0;

    let ising1 = SpecificationModel::Potential(PotentialSpec::ising(1, 0.6));
    let chain = ShiftInvariantField::IsingChain { beta: 0.6, field: 0.0 };
    let box1 = make_box(1, 1)?;
    for parts in two_part_splits(&box1) {
        let s = superadditivity_check(&chain, &ising1, &parts, &make_box(2, 1)?, Tail::Fixed(0), &sfe)?;
        worst = worst.min(s.slack);
        cases += 1;
    }

    // in d = 2 the frame is the union itself, so one kernel per part boundary
    let box2 = make_box(1, 2)?;
    let ising2 = SpecificationModel::Potential(PotentialSpec::ising(2, 0.4));
    let gibbs = gibbs_window_field(&ising2, &Window::rect(&[-1, -1], &[2, 2])?, g)?;
    let rc = SpecificationModel::RandomCluster(RandomClusterParams { p: 0.5, q: 2.0 });
    let bonds = bond_product(0.3)?;
    for (model, mu) in [(&ising2, &gibbs), (&rc, &bonds)] {
        let splits = two_part_splits(&box2);
        // each part appears in exactly one split, so infima are computed once
        let union = inf_entropy(&mu.marginal(&box2, g)?, model, &box2, &box2, Tail::Fixed(0), &sfe)?.value;
        let slacks = splits
            .par_iter()
            .map(|parts| {
                let total = parts
                    .iter()
                    .map(|p| Ok(inf_entropy(&mu.marginal(p, g)?, model, p, &box2, Tail::Fixed(0), &sfe)?.value))
                    .sum::<Result<f64>>()?;
                Ok(union - total)
            })
            .collect::<Result<Vec<f64>>>()?;
        cases += slacks.len();
        worst = slacks.into_iter().fold(worst, f64::min);
    }
    let bound = -1e-8;
    Ok(Check::new(
        5,
        name(5),
        worst >= bound,
        worst,
        bound,
        format!("{cases} two-part splits of the unit box; smallest slack"),
    ))
}

fn sandwich(opts: &VerifyOptions) -> Result<Check> {
    let sfe = opts.sfe();
    let tol = 1e-9;
    let cases: Vec<(SpecificationModel, ShiftInvariantField, usize)> = vec![
        (
            SpecificationModel::Potential(PotentialSpec::ising(1, 0.4)),
            ShiftInvariantField::IsingChain { beta: 0.4, field: 0.0 },
            6,
        ),
        (
            SpecificationModel::Potential(PotentialSpec::ising(2, 0.3)),
            ShiftInvariantField::product(2, pm_alphabet(), vec![0.6, 0.4])?,
            1,
        ),
        (SpecificationModel::RandomCluster(RandomClusterParams { p: 0.5, q: 2.0 }), bond_product(0.3)?, 0),
        (
            SpecificationModel::Griffiths(GriffithsParams { p: 0.6, beta: 0.5 }),
            ShiftInvariantField::product(2, griffiths::griffiths_alphabet(), vec![0.3, 0.3, 0.4])?,
            0,
        ),
        (
            SpecificationModel::LoopOn(LoopOnParams { n: 1.5, x: 0.7 }),
            ShiftInvariantField::product(2, crate::specification::loop_on::loop_alphabet(), vec![0.8, 0.2])?,
            0,
        ),
    ];
    // excess over the allowed band; ≤ 0 means the row is fine
    let mut worst = f64::NEG_INFINITY;
    let mut rows = 0;
    for (i, (model, mu, n_max)) in cases.iter().enumerate() {
        let a = sfe_report(mu, model, *n_max, &BoundaryRule::Constant { state: model.closed_state() }, &sfe)?;
        let other = BoundaryRule::Random {
            seed: opts.seed ^ i as u64,
            draws: 3,
        };
        let b = sfe_report(mu, model, *n_max, &other, &sfe)?;
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            let band = ra.diam / ra.box_size as f64;
            for r in [ra, rb] {
                if !(r.term_fixed.is_infinite() && r.term_inf.is_infinite()) {
                    let d = r.term_fixed - r.term_inf;
                    worst = worst.max(-d).max(d - band);
                }
            }
            worst = worst.max(ext_abs_diff(ra.term_fixed, rb.term_fixed) - band);
            rows += 1;
        }
    }
    Ok(Check::new(
        6,
        name(6),
        worst <= tol,
        worst,
        tol,
        format!("{rows} rows over 5 models, 2 boundary choices; largest excess over the diameter band"),
    ))
}

/// Terms of the 1d Ising witness at `β = 0.4`, `n = 0..=6`.
pub fn ising_chain_witness(opts: &VerifyOptions) -> Result<Vec<(f64, f64)>> {
    let model = SpecificationModel::Potential(PotentialSpec::ising(1, 0.4));
    let mu = ShiftInvariantField::IsingChain { beta: 0.4, field: 0.0 };
    let report = sfe_report(&mu, &model, 6, &BoundaryRule::Constant { state: 0 }, &opts.sfe())?;
    Ok(report.rows.iter().map(|r| (r.term_fixed, r.term_inf)).collect())
}

fn zero_witnesses(opts: &VerifyOptions) -> Result<Check> {
    let sfe = opts.sfe();
    let mut worst_product: f64 = 0.0;
    let three = Alphabet::new(vec!["a".into(), "b".into(), "c".into()], vec![0.2, 0.3, 0.5])?;
    for (d, n_max, alphabet) in [(1, 6, three.clone()), (2, 1, Alphabet::new(vec!["a".into(), "b".into()], vec![0.3, 0.7])?)] {
        let model = SpecificationModel::Potential(PotentialSpec::free(d, alphabet.clone()));
        let mu = ShiftInvariantField::reference(d, alphabet);
        let rep = sfe_report(&mu, &model, n_max, &BoundaryRule::Constant { state: 1 }, &sfe)?;
        for r in &rep.rows {
            worst_product = worst_product.max(r.term_fixed.abs()).max(r.term_inf.abs());
        }
    }
    let terms = ising_chain_witness(opts)?;
    let fixed_decreasing = terms.windows(2).all(|w| w[1].0 < w[0].0);
    let inf_nonincreasing = terms.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);
    let last_inf = terms.last().map(|t| t.1).unwrap_or(f64::INFINITY);
    let bound = 0.02;
    let pass = worst_product == 0.0 && fixed_decreasing && inf_nonincreasing && last_inf <= bound;
    let fixed: Vec<String> = terms.iter().map(|t| format!("{:.3e}", t.0)).collect();
    Ok(Check::new(
        7,
        name(7),
        pass,
        last_inf,
        bound,
        format!(
            "product terms max {worst_product:e}; Ising chain term_fixed [{}], decreasing {fixed_decreasing}, term_inf nonincreasing {inf_nonincreasing}",
            fixed.join(", ")
        ),
    ))
}

fn griffiths_dual(opts: &VerifyOptions) -> Result<Check> {
    let g = &opts.guard;
    let mut rng = opts.rng(8);
    let cells = make_box(1, 2)?;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (p, beta) in [(0.4, 0.3), (0.4, 0.8), (0.6, 0.3), (0.6, 0.8)] {
        let params = GriffithsParams { p, beta };
        let model = SpecificationModel::Griffiths(params);
        for _ in 0..50 {
            let size = rng.gen_range(1..=4);
            let mut picked: Vec<Site> = Vec::new();
            while picked.len() < size {
                let x = cells.sites()[rng.gen_range(0..cells.len())].clone();
                if !picked.contains(&x) {
                    picked.push(x);
                }
            }
            let lambda = Window::new(2, picked)?;
            let frame = lambda.closed_neighborhood(Adjacency::Square).closed_neighborhood(Adjacency::Square);
            let n = frame.difference(&lambda).len();
            let states = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let bc = BoundaryCondition::from_states(&lambda, frame, states, Tail::Fixed(griffiths::CLOSED))?;
            let direct = model.kernel(&lambda, &bc, g)?.table;
            let simple = griffiths_kernel_simplified(params, &lambda, &bc, g)?.table;
            worst = worst.max(total_variation(&direct, &simple)?);
            cases += 1;
        }
    }
    let bound = 1e-10;
    Ok(Check::new(8, name(8), worst <= bound, worst, bound, format!("{cases} random windows and boundaries, TV")))
}

fn griffiths_dlr(opts: &VerifyOptions) -> Result<Check> {
    let g = &opts.guard;
    let frame = make_box(1, 2)?;
    let lambdas = [origin(2), Window::rect(&[0, 0], &[1, 0])?, Window::rect(&[0, 0], &[1, 1])?];
    let mut worst_dlr: f64 = 0.0;
    let mut worst_perc: f64 = 0.0;
    for (p, beta) in [(0.4, 0.3), (0.4, 0.8), (0.6, 0.3), (0.6, 0.8)] {
        let params = GriffithsParams { p, beta };
        let model = SpecificationModel::Griffiths(params);
        let table = griffiths_window(params, &frame, g)?;
        // percolation structure: open iff the state is not closed
        let mut perc = vec![0.0; 1 << frame.len()];
        for code in 0..table.len() {
            let states = crate::lattice::decode_states(code as u64, frame.len(), 3);
            let bits = states.iter().enumerate().filter(|(_, &s)| s != griffiths::CLOSED).fold(0usize, |a, (i, _)| a | 1 << i);
            perc[bits] += table.prob(code);
        }
        for (bits, mass) in perc.iter().enumerate() {
            let open = (bits as u32).count_ones() as i32;
            let expect = p.powi(open) * (1.0 - p).powi(frame.len() as i32 - open);
            worst_perc = worst_perc.max((mass - expect).abs());
        }
        let mu = ShiftInvariantField::tables(vec![table])?;
        for lambda in &lambdas {
            worst_dlr = worst_dlr.max(dlr_residual(&mu, &model, lambda, &frame, Tail::Fixed(griffiths::CLOSED), g)?);
        }
    }
    let bound = 1e-10;
    Ok(Check::new(
        9,
        name(9),
        worst_dlr <= bound && worst_perc <= 1e-12,
        worst_dlr,
        bound,
        format!("4 parameter pairs x 3 windows; percolation marginal deviation {worst_perc:.3e}"),
    ))
}

fn finite_energy(opts: &VerifyOptions) -> Result<Check> {
    let g = &opts.guard;
    let frame = make_box(1, 2)?;
    let lambda = origin(2);
    let mut worst: f64 = f64::INFINITY;
    let mut positives = 0;
    for (p, beta) in [(0.4, 0.3), (0.4, 0.8), (0.6, 0.3), (0.6, 0.8)] {
        let params = GriffithsParams { p, beta };
        let model = SpecificationModel::Griffiths(params);
        let mu = ShiftInvariantField::tables(vec![griffiths_window(params, &frame, g)?])?;
        let fe = finite_energy_check(&mu, &model, &lambda, &frame, Tail::Fixed(griffiths::CLOSED), g)?;
        worst = worst.min(fe.margin);
        positives += 1;
    }
    let mut negatives_failed = true;
    for model in reference_models() {
        let tail = model.default_tail();
        let mu = gibbs_window_field(&model, &frame, g)?;
        let fe = finite_energy_check(&mu, &model, &lambda, &frame, tail, g)?;
        worst = worst.min(fe.margin);
        positives += 1;
        let pm = ShiftInvariantField::PointMass {
            dim: 2,
            alphabet: model.alphabet(2)?,
            state: model.closed_state(),
        };
        negatives_failed &= !finite_energy_check(&pm, &model, &lambda, &frame, tail, g)?.pass;
    }
    let bound = -1e-12;
    Ok(Check::new(
        10,
        name(10),
        worst >= bound && negatives_failed,
        worst,
        bound,
        format!("{positives} fields must pass (smallest log margin shown); point masses fail: {negatives_failed}"),
    ))
}

/// Chi-square p-value of observed counts against probabilities.
pub fn chi_square_p(counts: &[u64], probs: &[f64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0;
    for (&c, &p) in counts.iter().zip(probs) {
        if p > 0.0 {
            let e = p * total as f64;
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        } else if c > 0 {
            return Ok(0.0);
        }
    }
    if cells < 2 {
        return Ok(1.0);
    }
    let dist = ChiSquared::new((cells - 1) as f64).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(1.0 - dist.cdf(stat))
}

fn sampler(opts: &VerifyOptions) -> Result<Check> {
    let g = &opts.guard;
    let frame = Window::rect(&[-1], &[3])?;
    let region = Window::rect(&[0], &[2])?;
    let stride = 5;
    let ising = SpecificationModel::Potential(PotentialSpec::new(Potential::ising(1, 0.5).with_field(0.2), pm_alphabet())?);
    let free = SpecificationModel::Potential(PotentialSpec::free(1, Alphabet::new(vec!["a".into(), "b".into()], vec![0.3, 0.7])?));
    let mut worst_p: f64 = 1.0;
    let mut identical = true;
    for model in [&ising, &free] {
        let init = Configuration::new(frame.clone(), vec![0, 1, 0, 1, 1])?;
        let bc = BoundaryCondition::new(&region, frame.clone(), init.restrict(&frame.difference(&region))?, Tail::Fixed(0))?;
        let exact = model.kernel(&region, &bc, g)?.table;
        let hb = HeatBath::new(model, &frame, &region, Tail::Fixed(0), g)?;
        let chains = run_chains(&hb, &init, opts.seed, 1, opts.sampler_sweeps, stride)?;
        let mut counts = vec![0u64; exact.len()];
        for snap in &chains[0] {
            let states: Vec<usize> = region.iter().map(|x| snap.state_at(x).expect("region in frame")).collect();
            counts[crate::lattice::encode_states(&states, 2) as usize] += 1;
        }
        worst_p = worst_p.min(chi_square_p(&counts, &exact.probs())?);

        // byte-identical across runs and thread counts
        let dump = |threads: usize| -> Result<Vec<u8>> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Invalid(e.to_string()))?;
            let runs = pool.install(|| run_chains(&hb, &init, opts.seed, 3, 500, 50))?;
            let alphabet = model.alphabet(1)?;
            let json: Vec<Vec<serde_json::Value>> = runs.iter().map(|c| c.iter().map(|s| s.to_json(&alphabet)).collect()).collect();
            serde_json::to_vec(&json).map_err(|e| Error::Invalid(e.to_string()))
        };
        let one = dump(1)?;
        identical &= one == dump(1)? && one == dump(3)?;
    }
    let bound = 0.01;
    Ok(Check::new(
        11,
        name(11),
        worst_p > bound && identical,
        worst_p,
        bound,
        format!(
            "{} sweeps on 3 sites, every {stride}th kept; smallest chi-square p-value; reproducible {identical}",
            opts.sampler_sweeps
        ),
    ))
}

/// Components of the bond graph on `frame` (edges leave the frame into
/// closed sites), counted over vertices of `Λ ∪ N(Λ)`, by breadth-first search.
pub fn bfs_cluster_count(frame: &Window, masks: &[u32], lambda: &Window) -> usize {
    let d = frame.dim();
    let mut adj: HashMap<Site, Vec<Site>> = HashMap::new();
    for (x, &m) in frame.iter().zip(masks) {
        for axis in 0..d {
            if m >> axis & 1 == 1 {
                let y = x.add(&Site::unit(d, axis));
                adj.entry(x.clone()).or_default().push(y.clone());
                adj.entry(y).or_default().push(x.clone());
            }
        }
    }
    let mut seen: HashSet<Site> = HashSet::new();
    let mut count = 0;
    for start in lambda.closed_neighborhood(Adjacency::Square).iter() {
        if seen.insert(start.clone()) {
            count += 1;
            let mut queue = VecDeque::from([start.clone()]);
            while let Some(v) = queue.pop_front() {
                for w in adj.get(&v).into_iter().flatten() {
                    if seen.insert(w.clone()) {
                        queue.push_back(w.clone());
                    }
                }
            }
        }
    }
    count
}

/// Best objective over the simplex grid of spacing `1/steps`.
pub fn grid_search(target: &DensityTable, kernels: &[DensityTable], steps: usize) -> Result<f64> {
    let family = MeasureFamily::new(kernels.to_vec())?;
    let eval = |w: &[f64]| -> Result<f64> { rel_entropy(target, &crate::measures::mixture(w, &family)?) };
    let mut best = f64::INFINITY;
    let s = steps as f64;
    match kernels.len() {
        1 => best = eval(&[1.0])?,
        2 => {
            for i in 0..=steps {
                let a = i as f64 / s;
                best = best.min(eval(&[a, 1.0 - a])?);
            }
        }
        3 => {
            for i in 0..=steps {
                for j in 0..=steps - i {
                    let (a, b) = (i as f64 / s, j as f64 / s);
                    best = best.min(eval(&[a, b, (1.0 - a - b).max(0.0)])?);
                }
            }
        }
        _ => return Err(Error::Invalid("grid search takes at most three kernels".into())),
    }
    Ok(best)
}

fn oracles(opts: &VerifyOptions) -> Result<Check> {
    let mut rng = opts.rng(12);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let (w, h) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let frame = Window::rect(&[0, 0], &[w - 1, h - 1])?;
        let masks: Vec<u32> = (0..frame.len()).map(|_| rng.gen_range(0..4)).collect();
        let picked = frame.iter().filter(|_| rng.gen_bool(0.4)).cloned();
        let mut lambda = Window::new(2, picked)?;
        if lambda.is_empty() {
            lambda = Window::singleton(frame.sites()[rng.gen_range(0..frame.len())].clone());
        }
        let uf = count_clusters(&BondFrame::new(frame.clone(), masks.clone())?, &lambda, Exterior::Closed)?;
        if uf != bfs_cluster_count(&frame, &masks, &lambda) {
            mismatches += 1;
        }
    }

    // random μ against boundary kernels of the Ising chain at β = 0.5
    let ising = SpecificationModel::Potential(PotentialSpec::ising(1, 0.5));
    let opt = MixtureOptions::default();
    let mut families = Vec::new();
    for n in 0..=1 {
        let lambda = make_box(n, 1)?;
        let frame = make_box(n + 1, 1)?;
        let classes = crate::specification::boundary_classes(&ising, &lambda, &frame, Tail::Fixed(0), None, &opts.guard)?;
        families.push(classes.kernels()?.into_iter().map(|k| k.table).collect::<Vec<_>>());
    }
    let instances: Vec<(DensityTable, Vec<DensityTable>)> = (0..40)
        .map(|i| {
            let family = &families[i % 2];
            let size = rng.gen_range(1..=3.min(family.len()));
            let mut pool: Vec<usize> = (0..family.len()).collect();
            let kernels = (0..size).map(|_| family[pool.swap_remove(rng.gen_range(0..pool.len()))].clone()).collect();
            let target = random_table(family[0].window(), family[0].alphabet(), &mut rng, false)?;
            Ok((target, kernels))
        })
        .collect::<Result<_>>()?;
    let gaps = instances
        .par_iter()
        .map(|(target, kernels)| {
            let fit = minimize_mixture(target, kernels, opt)?;
            Ok((grid_search(target, kernels, 1000)? - fit.value).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst = gaps.into_iter().fold(0.0, f64::max);
    let bound = 1e-6;
    Ok(Check::new(
        12,
        name(12),
        mismatches == 0 && worst <= bound,
        worst,
        bound,
        format!("union-find vs BFS on 10^4 frames: {mismatches} mismatches; optimizer vs 1e-3 grid on 40 Ising-chain instances"),
    ))
}
