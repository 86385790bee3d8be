use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use gibbslab::free_energy::{
    boundary_kernel_on, dlr_residual, finite_energy_check, random_boundary, run_chains, sfe_report, sfe_term,
    superadditivity_check, HeatBath,
};
use gibbslab::lattice::{Configuration, Tail, Window};
use gibbslab::measures::format_number as fmt;
use gibbslab::specification::{check_consistency, diam_b, diam_bound, BoundaryCondition};
use gibbslab::verify::run_all;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{ConfigError, ExperimentConfig};
use crate::manifest::{num, write_json, Invariant, RunManifest};

pub struct Ctx {
    pub out: PathBuf,
    pub seed: Option<u64>,
}

impl Ctx {
    fn seed(&self, cfg: &ExperimentConfig) -> u64 {
        self.seed.or(cfg.seed).unwrap_or(0)
    }

    fn path(&self, m: &mut RunManifest, name: &str) -> PathBuf {
        m.artifacts.push(name.into());
        self.out.join(name)
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn site_label(coords: &[i64]) -> String {
    format!("\"({})\"", coords.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
}

pub fn kernel(cfg: &ExperimentConfig, ctx: &Ctx, m: &mut RunManifest) -> anyhow::Result<()> {
    let model = cfg.model()?;
    let lambda = cfg.window()?;
    let frame = cfg.frame_for(&lambda)?;
    let tail = cfg.tail()?;
    let rule = cfg.boundary.clone().unwrap_or_default();
    let table = m.stage("kernel", || Ok(boundary_kernel_on(model, &lambda, &frame, tail, &rule, &cfg.guard)?))?;
    let (csv_path, bin_path) = (ctx.path(m, "kernel.csv"), ctx.path(m, "kernel.bin"));
    m.stage("write", || {
        let mut csv = create(&csv_path)?;
        table.write_csv(&mut csv)?;
        csv.flush()?;
        let mut bin = create(&bin_path)?;
        table.write_binary(&mut bin)?;
        bin.flush()?;
        Ok(())
    })?;
    let total: f64 = table.probs().iter().sum();
    m.invariants
        .push(Invariant::at_most("kernel normalization", (total - 1.0).abs(), cfg.tolerances.normalization));
    Ok(())
}

pub fn diam(cfg: &ExperimentConfig, ctx: &Ctx, m: &mut RunManifest) -> anyhow::Result<()> {
    let model = cfg.model()?;
    let lambda = cfg.window()?;
    let frame = cfg.frame_for(&lambda)?;
    let tail = cfg.tail()?;
    let d = m.stage("diameter", || Ok(diam_b(model, &lambda, &frame, tail, &cfg.guard)?))?;
    let bound = diam_bound(model, &lambda);
    let slack = if bound == f64::INFINITY { f64::INFINITY } else { bound - d };
    let edges = model.boundary_size(&lambda);
    let mut csv = String::from("window_size,frame_size,boundary_edges,diam,bound,slack\n");
    writeln!(csv, "{},{},{},{},{},{}", lambda.len(), frame.len(), edges, fmt(d), fmt(bound), fmt(slack))?;
    write_text(&ctx.path(m, "diam.csv"), &csv)?;
    write_json(
        &ctx.path(m, "diam.json"),
        &json!({
            "model": model.name(),
            "window_size": lambda.len(),
            "frame_size": frame.len(),
            "boundary_edges": edges,
            "diam": num(d),
            "bound": num(bound),
            "slack": num(slack),
        }),
    )?;
    m.invariants.push(Invariant::at_least("diameter bound slack", slack, -cfg.tolerances.bound));
    Ok(())
}

pub fn consistency(cfg: &ExperimentConfig, ctx: &Ctx, m: &mut RunManifest) -> anyhow::Result<()> {
    let model = cfg.model()?;
    let lambda = cfg.window()?;
    let delta = cfg
        .outer
        .as_ref()
        .ok_or_else(|| ConfigError("`outer` is required".into()))?
        .build(cfg.dim()?, &cfg.guard)?;
    if !lambda.is_subset(&delta) {
        return Err(ConfigError("`window` must lie inside `outer`".into()).into());
    }
    let frame = cfg.frame_for(&delta)?;
    let tail = cfg.tail()?;
    let k = model.alphabet(cfg.dim()?)?.size();
    let mut cases: Vec<(String, BoundaryCondition)> = (0..k)
        .map(|s| Ok((format!("constant {s}"), BoundaryCondition::constant(&delta, frame.clone(), s, tail)?)))
        .collect::<anyhow::Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed(cfg));
    for i in 0..cfg.boundaries.unwrap_or(20) {
        cases.push((format!("random {i}"), random_boundary(model, &delta, &frame, tail, &mut rng)?));
    }
    let residuals = m.stage("consistency", || {
        Ok(cases
            .par_iter()
            .map(|(_, bc)| check_consistency(model, &lambda, &delta, bc, &cfg.guard))
            .collect::<gibbslab::Result<Vec<f64>>>()?)
    })?;
    let mut csv = String::from("case,boundary,residual\n");
    for (i, ((name, _), r)) in cases.iter().zip(&residuals).enumerate() {
        writeln!(csv, "{i},{name},{}", fmt(*r))?;
    }
    write_text(&ctx.path(m, "consistency.csv"), &csv)?;
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    let mut inv = Invariant::at_most("consistency residual", worst, cfg.tolerances.consistency);
    inv.detail = format!("{} boundaries", cases.len());
    m.invariants.push(inv);
    Ok(())
}

pub fn sfe(cfg: &ExperimentConfig, ctx: &Ctx, m: &mut RunManifest) -> anyhow::Result<()> {
    let model = cfg.model()?;
    let mu = cfg.field()?;
    let rule = cfg.boundary.clone().unwrap_or_default();
    let n_max = cfg.n_max.unwrap_or(2);
    let opts = cfg.sfe_options();
    let report = m.stage("sfe", || Ok(sfe_report(&mu, model, n_max, &rule, &opts)?))?;
    let mut csv = create(&ctx.path(m, "sfe.csv"))?;
    report.write_csv(&mut csv)?;
    csv.flush()?;

    let tol = cfg.tolerances.sandwich;
    let mut worst: f64 = 0.0;
    for r in &report.rows {
        if r.term_fixed.is_infinite() && r.term_inf.is_infinite() {
            continue;
        }
        let d = r.term_fixed - r.term_inf;
        worst = worst.max(-d).max(d - r.diam / r.box_size as f64);
    }
    m.invariants.push(Invariant::at_most("sfe sandwich violation", worst, tol));

    if let Some(alt) = &cfg.alt_boundary {
        let terms = m.stage("sfe alternative boundary", || {
            Ok((0..=n_max)
                .map(|n| sfe_term(&mu, model, n, alt, &cfg.guard))
                .collect::<gibbslab::Result<Vec<_>>>()?)
        })?;
        let mut csv = String::from("n,term_fixed,term_fixed_alt,difference,bound\n");
        let mut worst: f64 = 0.0;
        for (r, alt) in report.rows.iter().zip(&terms) {
            let diff = if r.term_fixed == *alt { 0.0 } else { (r.term_fixed - alt).abs() };
            let bound = r.diam / r.box_size as f64;
            if bound.is_finite() {
                worst = worst.max(diff - bound);
            }
            writeln!(csv, "{},{},{},{},{}", r.n, fmt(r.term_fixed), fmt(*alt), fmt(diff), fmt(bound))?;
        }
        write_text(&ctx.path(m, "sfe_alt.csv"), &csv)?;
        m.invariants.push(Invariant::at_most("boundary independence excess", worst, tol));
    }
    Ok(())
}

pub fn superadd(cfg: &ExperimentConfig, ctx: &Ctx, m: &mut RunManifest) -> anyhow::Result<()> {
    let model = cfg.model()?;
    let mu = cfg.field()?;
    let dim = cfg.dim()?;
    let parts = cfg
        .parts
        .as_ref()
        .ok_or_else(|| ConfigError("`parts` is required".into()))?
        .iter()
        .map(|p| p.build(dim, &cfg.guard))
        .collect::<anyhow::Result<Vec<Window>>>()?;
    let union = parts.iter().fold(Window::empty(dim), |u, p| u.union(p));
    let frame = cfg.frame_for(&union)?;
    let tail = cfg.tail()?;
    let opts = cfg.sfe_options();
    let s = m.stage("superadditivity", || Ok(superadditivity_check(&mu, model, &parts, &frame, tail, &opts)?))?;
    let mut csv = String::from("region,size,inf_entropy\n");
    writeln!(csv, "union,{},{}", union.len(), fmt(s.union))?;
    for (i, (p, v)) in parts.iter().zip(&s.parts).enumerate() {
        writeln!(csv, "part {i},{},{}", p.len(), fmt(*v))?;
    }
    write_text(&ctx.path(m, "superadd.csv"), &csv)?;
    write_json(
        &ctx.path(m, "superadd.json"),
        &json!({
            "union": num(s.union),
            "parts": s.parts.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "slack": num(s.slack),
        }),
    )?;
    m.invariants.push(Invariant::at_least("superadditivity slack", s.slack, -cfg.tolerances.superadd));
    Ok(())
}

pub fn finite_energy(cfg: &ExperimentConfig, ctx: &Ctx, m: &mut RunManifest) -> anyhow::Result<()> {
    let model = cfg.model()?;
    let mu = cfg.field()?;
    let lambda = cfg.window()?;
    let frame = cfg.frame_for(&lambda)?;
    let tail = cfg.tail()?;
    let fe = m.stage("finite energy", || Ok(finite_energy_check(&mu, model, &lambda, &frame, tail, &cfg.guard)?))?;
    write_json(
        &ctx.path(m, "finite_energy.json"),
        &json!({
            "eps": num(fe.eps),
            "reference": fe.reference.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "margin": num(fe.margin),
            "pass": fe.pass,
        }),
    )?;
    m.invariants.push(Invariant {
        pass: fe.pass,
        ..Invariant::at_least("finite energy log margin", fe.margin, 0.0)
    });
    Ok(())
}

pub fn dlr(cfg: &ExperimentConfig, ctx: &Ctx, m: &mut RunManifest) -> anyhow::Result<()> {
    let model = cfg.model()?;
    let mu = cfg.field()?;
    let lambda = cfg.window()?;
    let frame = cfg.frame_for(&lambda)?;
    let tail = cfg.tail()?;
    let r = m.stage("dlr", || Ok(dlr_residual(&mu, model, &lambda, &frame, tail, &cfg.guard)?))?;
    write_text(
        &ctx.path(m, "dlr.csv"),
        &format!("window_size,frame_size,residual\n{},{},{}\n", lambda.len(), frame.len(), fmt(r)),
    )?;
    m.invariants.push(Invariant::at_most("DLR residual", r, cfg.tolerances.dlr));
    Ok(())
}

pub fn sample(cfg: &ExperimentConfig, ctx: &Ctx, m: &mut RunManifest) -> anyhow::Result<()> {
    let model = cfg.model()?;
    let region = cfg.window()?;
    let frame = cfg.frame_for(&region)?;
    let tail = cfg.tail()?;
    let sc = cfg.sampler.as_ref().ok_or_else(|| ConfigError("`sampler` is required".into()))?;
    let alphabet = model.alphabet(cfg.dim()?)?;
    let init_state = sc.init_state.unwrap_or(match tail {
        Tail::Fixed(s) => s,
        Tail::Unknown => model.closed_state(),
    });
    if init_state >= alphabet.size() {
        return Err(ConfigError(format!("initial state {init_state} is not in the alphabet")).into());
    }
    let hb = HeatBath::new(model, &frame, &region, tail, &cfg.guard)?;
    let init = Configuration::constant(frame.clone(), init_state);
    let chains = m.stage("sampling", || Ok(run_chains(&hb, &init, ctx.seed(cfg), sc.chains, sc.sweeps, sc.stride)?))?;

    let (samples_path, occupancy_path) = (ctx.path(m, "samples.jsonl"), ctx.path(m, "occupancy.csv"));
    m.stage("write", || {
        let mut out = create(&samples_path)?;
        for (c, snaps) in chains.iter().enumerate() {
            for (i, snap) in snaps.iter().enumerate() {
                let line = json!({ "chain": c, "sweep": (i + 1) * sc.stride, "config": snap.to_json(&alphabet) });
                writeln!(out, "{line}")?;
            }
        }
        out.flush()?;

        // per-site state frequencies over every snapshot
        let k = alphabet.size();
        let mut counts = vec![vec![0u64; k]; region.len()];
        let mut total = 0u64;
        for snap in chains.iter().flatten() {
            total += 1;
            for (j, x) in region.iter().enumerate() {
                counts[j][snap.state_at(x).expect("region lies in the frame")] += 1;
            }
        }
        let mut csv = String::from("site,state,frequency\n");
        for (x, row) in region.iter().zip(&counts) {
            for (s, &c) in row.iter().enumerate() {
                let f = if total == 0 { 0.0 } else { c as f64 / total as f64 };
                writeln!(csv, "{},{},{}", site_label(x.coords()), alphabet.label(s), fmt(f))?;
            }
        }
        write_text(&occupancy_path, &csv)
    })?;
    Ok(())
}

pub fn verify_all(cfg: &ExperimentConfig, ctx: &Ctx, m: &mut RunManifest) -> anyhow::Result<()> {
    let opts = cfg.verify_options(ctx.seed);
    let checks = m.stage("verify", || Ok(run_all(&opts)?))?;
    let mut csv = String::from("id,name,pass,measured,bound\n");
    for c in &checks {
        println!("{}", c.line());
        writeln!(csv, "{},{},{},{},{}", c.id, c.name, c.pass, fmt(c.measured), fmt(c.bound))?;
        m.invariants.push(Invariant {
            name: format!("{} {}", c.id, c.name),
            pass: c.pass,
            measured: c.measured,
            bound: c.bound,
            detail: c.detail.clone(),
        });
    }
    write_text(&ctx.path(m, "verify.csv"), &csv)?;
    write_json(&ctx.path(m, "verify.json"), &checks)?;
    Ok(())
}
