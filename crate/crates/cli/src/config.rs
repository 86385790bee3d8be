//! Experiment configuration: one JSON document, unknown keys rejected.

use std::fmt;
use std::path::PathBuf;

use gibbslab::free_energy::{gibbs_window_field, BoundaryRule, MixtureOptions, SfeOptions, ShiftInvariantField};
use gibbslab::lattice::{make_box_with, Guard, Site, Tail, Window};
use gibbslab::specification::SpecificationModel;
use gibbslab::verify::VerifyOptions;
use serde::{Deserialize, Serialize};

/// A malformed or inconsistent configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<SpecificationModel>,
    /// Lattice dimension for non-potential models (default 2).
    pub dim: Option<usize>,
    /// The window `Λ`.
    pub window: Option<WindowSpec>,
    /// The outer window `Δ` of `consistency`.
    pub outer: Option<WindowSpec>,
    /// Finite frame carrying boundary configurations; defaults to the
    /// window's neighbourhood in the model's adjacency.
    pub frame: Option<WindowSpec>,
    pub tail: Option<Tail>,
    /// `ν` for `kernel` and `sfe`.
    pub boundary: Option<BoundaryRule>,
    /// A second `ν` for the `sfe` independence check.
    pub alt_boundary: Option<BoundaryRule>,
    /// Number of random boundaries drawn by `consistency` (besides constants).
    pub boundaries: Option<usize>,
    /// The shift-invariant field `μ`.
    pub field: Option<FieldSpec>,
    pub n_max: Option<usize>,
    /// Disjoint parts for `superadd`.
    pub parts: Option<Vec<WindowSpec>>,
    pub sampler: Option<SamplerConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub guard: Guard,
    pub seed: Option<u64>,
    pub verify: Option<VerifyOptions>,
    /// Output directory, overridden by `--out-dir`.
    pub out_dir: Option<PathBuf>,
}

/// A finite window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowSpec {
    /// `Δ_n = [−n, n]^d`.
    Box(usize),
    Rect { lo: Vec<i64>, hi: Vec<i64> },
    Sites(Vec<Vec<i64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// I.i.d. sites with the given single-site law.
    Product { probs: Vec<f64> },
    /// I.i.d. sites with the alphabet's reference law.
    Reference,
    PointMass { state: usize },
    /// Stationary nearest-neighbour Ising chain (d = 1, alphabet ±1).
    IsingChain { beta: f64, field: f64 },
    /// The model's own Gibbs table on a window under its default tail.
    Gibbs { window: WindowSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "one")]
    pub chains: usize,
    pub sweeps: usize,
    #[serde(default = "one")]
    pub stride: usize,
    /// Uniform initial state on the frame (default: the tail state).
    pub init_state: Option<usize>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub mixture: f64,
    pub max_iter: usize,
    pub consistency: f64,
    pub superadd: f64,
    pub sandwich: f64,
    pub dlr: f64,
    pub bound: f64,
    pub normalization: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let m = MixtureOptions::default();
        Tolerances {
            mixture: m.tol,
            max_iter: m.max_iter,
            consistency: 1e-10,
            superadd: 1e-8,
            sandwich: 1e-9,
            dlr: 1e-10,
            bound: 1e-12,
            normalization: 1e-12,
        }
    }
}

impl WindowSpec {
    pub fn build(&self, dim: usize, guard: &Guard) -> anyhow::Result<Window> {
        let w = match self {
            WindowSpec::Box(n) => make_box_with(*n, dim, guard)?,
            WindowSpec::Rect { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(bad(format!("rect corners must have {dim} coordinates")));
                }
                Window::rect(lo, hi).map_err(|e| bad(e.to_string()))?
            }
            WindowSpec::Sites(sites) => {
                if sites.iter().any(|s| s.len() != dim) {
                    return Err(bad(format!("every site must have {dim} coordinates")));
                }
                Window::new(dim, sites.iter().map(|s| Site::new(s))).map_err(|e| bad(e.to_string()))?
            }
        };
        if w.is_empty() {
            return Err(bad("windows must be nonempty"));
        }
        Ok(w)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn model(&self) -> anyhow::Result<&SpecificationModel> {
        let m = self.model.as_ref().ok_or_else(|| bad("`model` is required"))?;
        m.validate().map_err(|e| bad(e.to_string()))?;
        Ok(m)
    }

    pub fn dim(&self) -> anyhow::Result<usize> {
        let d = match (&self.model, self.dim) {
            (Some(SpecificationModel::Potential(spec)), Some(d)) if d != spec.potential.dim => {
                return Err(bad("`dim` disagrees with the potential's dimension"))
            }
            (Some(SpecificationModel::Potential(spec)), _) => spec.potential.dim,
            (_, Some(d)) => d,
            (_, None) => 2,
        };
        if d == 0 || d > gibbslab::lattice::MAX_DIM {
            return Err(bad(format!("dimension must be in 1..={}", gibbslab::lattice::MAX_DIM)));
        }
        Ok(d)
    }

    pub fn window(&self) -> anyhow::Result<Window> {
        self.window
            .as_ref()
            .ok_or_else(|| bad("`window` is required"))?
            .build(self.dim()?, &self.guard)
    }

    /// The configured frame, or the window's closed neighbourhood.
    pub fn frame_for(&self, lambda: &Window) -> anyhow::Result<Window> {
        let frame = match &self.frame {
            Some(spec) => spec.build(self.dim()?, &self.guard)?,
            None => self.model()?.required_frame(lambda),
        };
        if !lambda.is_subset(&frame) {
            return Err(bad("the frame must contain the window"));
        }
        Ok(frame)
    }

    pub fn tail(&self) -> anyhow::Result<Tail> {
        Ok(self.tail.unwrap_or_else(|| self.model.as_ref().map(|m| m.default_tail()).unwrap_or_default()))
    }

    pub fn field(&self) -> anyhow::Result<ShiftInvariantField> {
        let spec = self.field.as_ref().ok_or_else(|| bad("`field` is required"))?;
        let model = self.model()?;
        let dim = self.dim()?;
        let alphabet = model.alphabet(dim).map_err(|e| bad(e.to_string()))?;
        Ok(match spec {
            FieldSpec::Product { probs } => {
                ShiftInvariantField::product(dim, alphabet, probs.clone()).map_err(|e| bad(e.to_string()))?
            }
            FieldSpec::Reference => ShiftInvariantField::reference(dim, alphabet),
            FieldSpec::PointMass { state } => {
                if *state >= alphabet.size() {
                    return Err(bad(format!("state {state} is not in the alphabet")));
                }
                ShiftInvariantField::PointMass { dim, alphabet, state: *state }
            }
            FieldSpec::IsingChain { beta, field } => {
                if dim != 1 {
                    return Err(bad("the Ising chain field needs dim = 1"));
                }
                if !beta.is_finite() || !field.is_finite() {
                    return Err(bad("Ising chain parameters must be finite"));
                }
                ShiftInvariantField::IsingChain { beta: *beta, field: *field }
            }
            FieldSpec::Gibbs { window } => gibbs_window_field(model, &window.build(dim, &self.guard)?, &self.guard)?,
        })
    }

    pub fn sfe_options(&self) -> SfeOptions {
        SfeOptions {
            mixture: MixtureOptions {
                tol: self.tolerances.mixture,
                max_iter: self.tolerances.max_iter,
            },
            guard: self.guard,
        }
    }

    pub fn verify_options(&self, seed: Option<u64>) -> VerifyOptions {
        let mut opts = self.verify.unwrap_or_default();
        if let Some(s) = seed.or(self.seed) {
            opts.seed = s;
        }
        opts
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> anyhow::Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("mixture", t.mixture),
            ("consistency", t.consistency),
            ("superadd", t.superadd),
            ("sandwich", t.sandwich),
            ("dlr", t.dlr),
            ("bound", t.bound),
            ("normalization", t.normalization),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(format!("tolerance `{name}` must be finite and nonnegative")));
            }
        }
        if self.model.is_some() {
            self.model()?;
            let dim = self.dim()?;
            self.model()?.alphabet(dim).map_err(|e| bad(e.to_string()))?;
        } else {
            self.dim()?;
        }
        if let Some(Tail::Fixed(s)) = self.tail {
            if let Some(m) = &self.model {
                if s >= m.alphabet(self.dim()?).map_err(|e| bad(e.to_string()))?.size() {
                    return Err(bad(format!("tail state {s} is not in the alphabet")));
                }
            }
        }
        if let Some(s) = &self.sampler {
            if s.chains == 0 || s.stride == 0 {
                return Err(bad("sampler chains and stride must be positive"));
            }
        }
        Ok(())
    }
}
