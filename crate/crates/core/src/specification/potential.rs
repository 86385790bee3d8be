//! Specifications defined by a finite-range, shift-invariant potential
//! `Φ`, with kernels `γ̂_Λ(ζ, ω) ∝ λ^Λ(ζ) e^{-H_Λ(ζω)}`.

use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{decode_states, Alphabet, Configuration, Guard, Site, Tail, Window};

use super::Prepared;

/// One shift class `{Φ_{A+x}}` of interactions, given by a representative
/// support `A` and the table of `Φ_A` on `E^A` (sites of `A` in canonical
/// order, first site least significant). Entries may be `+∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub support: Vec<Site>,
    #[serde(serialize_with = "ser_ext", deserialize_with = "de_ext")]
    pub table: Vec<f64>,
}

fn ser_ext<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    #[serde(untagged)]
    enum Ext {
        Num(f64),
        Tok(&'static str),
    }
    let items: Vec<Ext> = v
        .iter()
        .map(|&x| if x == f64::INFINITY { Ext::Tok("inf") } else { Ext::Num(x) })
        .collect();
    items.serialize(s)
}

fn de_ext<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Ext {
        Num(f64),
        Tok(String),
    }
    let items: Vec<Ext> = Vec::deserialize(d)?;
    items
        .into_iter()
        .map(|e| match e {
            Ext::Num(x) => Ok(x),
            Ext::Tok(t) if t == "inf" => Ok(f64::INFINITY),
            Ext::Tok(t) => Err(serde::de::Error::custom(format!("unexpected table entry {t}"))),
        })
        .collect()
}

impl Term {
    fn sup_abs(&self) -> f64 {
        self.table.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// A truncated, finite family of shift-invariant interactions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Potential {
    pub dim: usize,
    pub terms: Vec<Term>,
}

impl Potential {
    pub fn new(dim: usize, mut terms: Vec<Term>, states: usize) -> Result<Self> {
        for t in &mut terms {
            let before = t.support.len();
            let w = Window::new(dim, t.support.iter().cloned())?;
            if w.len() != before || before == 0 {
                return Err(Error::Invalid("term supports must be nonempty sets of distinct sites".into()));
            }
            if w.sites() != t.support.as_slice() {
                return Err(Error::Invalid("term support sites must be listed in canonical order".into()));
            }
            let expected = Guard::default().entries(states, w.len(), "potential table")?;
            if t.table.len() != expected {
                return Err(Error::Shape(format!(
                    "term table has {} entries, expected {}",
                    t.table.len(),
                    expected
                )));
            }
            if t.table.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
                return Err(Error::Invalid("potential values must be real or +inf".into()));
            }
        }
        Ok(Potential { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        Potential { dim, terms: Vec::new() }
    }

    /// `Φ_{x,x+e_i}(ω) = -β ω_x ω_{x+e_i}` on states `{-1, +1}`.
    pub fn ising(dim: usize, beta: f64) -> Self {
        let terms = (0..dim)
            .map(|i| Term {
                support: vec![Site::origin(dim), Site::unit(dim, i)],
                table: vec![-beta, beta, beta, -beta],
            })
            .collect();
        Potential { dim, terms }
    }

    /// Adds `Φ_{x}(ω) = -h ω_x` on states `{-1, +1}`.
    pub fn with_field(mut self, h: f64) -> Self {
        self.terms.push(Term {
            support: vec![Site::origin(self.dim)],
            table: vec![h, -h],
        });
        self
    }

    /// `‖Φ‖ = Σ_{A ∋ 0} ‖Φ_A‖_∞`.
    pub fn norm(&self) -> f64 {
        self.terms.iter().map(|t| t.support.len() as f64 * t.sup_abs()).sum()
    }

    /// Every `(term, shift)` whose shifted support meets `Λ`.
    pub fn instances(&self, lambda: &Window) -> Vec<(usize, Site)> {
        let mut set = BTreeSet::new();
        for (ti, t) in self.terms.iter().enumerate() {
            for a in &t.support {
                for y in lambda.iter() {
                    set.insert((ti, y.sub(a)));
                }
            }
        }
        set.into_iter().collect()
    }

    pub fn shifted_support(&self, term: usize, shift: &Site) -> Vec<Site> {
        self.terms[term].support.iter().map(|a| a.add(shift)).collect()
    }

    /// `Λ` together with every site of a support that meets it.
    pub fn reach(&self, lambda: &Window) -> Window {
        let extra: Vec<Site> = self
            .instances(lambda)
            .iter()
            .flat_map(|(t, x)| self.shifted_support(*t, x))
            .collect();
        lambda.union(&Window::new(lambda.dim(), extra).expect("supports share the dimension"))
    }
}

/// A potential together with its single-site state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub potential: Potential,
    pub alphabet: Alphabet,
}

impl PotentialSpec {
    pub fn new(potential: Potential, alphabet: Alphabet) -> Result<Self> {
        let spec = PotentialSpec { potential, alphabet };
        spec.validate()?;
        Ok(spec)
    }

    /// Nearest-neighbour Ising model with uniform reference measure on ±1.
    pub fn ising(dim: usize, beta: f64) -> Self {
        PotentialSpec {
            potential: Potential::ising(dim, beta),
            alphabet: Alphabet::uniform(["-1", "+1"]),
        }
    }

    /// `Φ = 0` over the given state space.
    pub fn free(dim: usize, alphabet: Alphabet) -> Self {
        PotentialSpec {
            potential: Potential::zero(dim),
            alphabet,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Alphabet::new(self.alphabet.labels().to_vec(), self.alphabet.reference().to_vec())?;
        Potential::new(self.potential.dim, self.potential.terms.clone(), self.alphabet.size()).map(|_| ())
    }
}

fn table_value(term: &Term, states: impl Iterator<Item = usize>, k: usize) -> f64 {
    let mut code = 0usize;
    let mut mult = 1usize;
    for s in states {
        code += s * mult;
        mult *= k;
    }
    term.table[code]
}

/// `H_{Λ,Δ}(ω) = Σ_{A∩Λ≠∅, A⊂Δ} Φ_A(ω)`; with `delta = None` every support
/// meeting `Λ` contributes (`H_Λ`). Sites missing from `ω` take the tail.
pub fn hamiltonian(
    spec: &PotentialSpec,
    lambda: &Window,
    delta: Option<&Window>,
    omega: &Configuration,
    tail: Tail,
) -> Result<f64> {
    omega.validate(&spec.alphabet)?;
    let k = spec.alphabet.size();
    let mut h = 0.0;
    for (t, x) in spec.potential.instances(lambda) {
        let support = spec.potential.shifted_support(t, &x);
        if let Some(d) = delta {
            if !support.iter().all(|s| d.contains(s)) {
                continue;
            }
        }
        let states = support
            .iter()
            .map(|s| match (omega.state_at(s), tail) {
                (Some(v), _) => Ok(v),
                (None, Tail::Fixed(v)) => Ok(v),
                (None, Tail::Unknown) => Err(Error::Ambiguity(format!(
                    "interaction reaches {s:?}, outside the configuration"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        h += table_value(&spec.potential.terms[t], states.into_iter(), k);
    }
    Ok(h)
}

/// `ε_{Λ,Δ} = Σ_{A∩Λ≠∅, A⊄Δ} ‖Φ_A‖_∞`.
pub fn eps(potential: &Potential, lambda: &Window, delta: &Window) -> f64 {
    potential
        .instances(lambda)
        .iter()
        .filter(|(t, x)| !potential.shifted_support(*t, x).iter().all(|s| delta.contains(s)))
        .map(|(t, _)| potential.terms[*t].sup_abs())
        .sum()
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Inside(usize),
    Outside(usize),
    Fixed(usize),
}

pub(crate) struct PreparedPotential {
    lambda: Window,
    frame: Window,
    outside: Window,
    alphabet: Alphabet,
    terms: Vec<Term>,
    instances: Vec<(usize, Vec<Slot>)>,
    relevant: Vec<usize>,
    total: usize,
}

impl PreparedPotential {
    pub(crate) fn new(spec: &PotentialSpec, lambda: &Window, frame: &Window, tail: Tail, guard: &Guard) -> Result<Self> {
        if lambda.dim() != spec.potential.dim {
            return Err(Error::Shape("window and potential differ in dimension".into()));
        }
        let total = guard.entries(spec.alphabet.size(), lambda.len(), "potential kernel")?;
        let outside = frame.difference(lambda);
        let instances = spec
            .potential
            .instances(lambda)
            .into_iter()
            .map(|(t, x)| {
                let slots = spec
                    .potential
                    .shifted_support(t, &x)
                    .iter()
                    .map(|s| {
                        if let Some(i) = lambda.position(s) {
                            Ok(Slot::Inside(i))
                        } else if let Some(i) = outside.position(s) {
                            Ok(Slot::Outside(i))
                        } else {
                            match tail {
                                Tail::Fixed(v) if v < spec.alphabet.size() => Ok(Slot::Fixed(v)),
                                Tail::Fixed(v) => Err(Error::Invalid(format!("tail state {v} outside the alphabet"))),
                                Tail::Unknown => Err(Error::Ambiguity(format!(
                                    "interaction reaches {s:?}, beyond the frame"
                                ))),
                            }
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((t, slots))
            })
            .collect::<Result<Vec<_>>>()?;
        let relevant: BTreeSet<usize> = instances
            .iter()
            .flat_map(|(_, slots): &(usize, Vec<Slot>)| slots.iter())
            .filter_map(|s| match s {
                Slot::Outside(i) => Some(*i),
                _ => None,
            })
            .collect();
        Ok(PreparedPotential {
            lambda: lambda.clone(),
            frame: frame.clone(),
            outside,
            alphabet: spec.alphabet.clone(),
            terms: spec.potential.terms.clone(),
            instances,
            relevant: relevant.into_iter().collect(),
            total,
        })
    }
}

impl Prepared for PreparedPotential {
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
        self.relevant.clone()
    }

    fn signature(&self, outside: &[usize]) -> Result<Vec<u32>> {
        Ok(self.relevant.iter().map(|&i| outside[i] as u32).collect())
    }

    fn log_weights(&self, outside: &[usize]) -> Result<Vec<f64>> {
        let k = self.alphabet.size();
        let n = self.lambda.len();
        let log_ref: Vec<f64> = self.alphabet.reference().iter().map(|w| w.ln()).collect();
        let mut out = Vec::with_capacity(self.total);
        for code in 0..self.total {
            let zeta = decode_states(code as u64, n, k);
            let mut lw: f64 = zeta.iter().map(|&s| log_ref[s]).sum();
            for (t, slots) in &self.instances {
                let states = slots.iter().map(|s| match *s {
                    Slot::Inside(i) => zeta[i],
                    Slot::Outside(i) => outside[i],
                    Slot::Fixed(v) => v,
                });
                lw -= table_value(&self.terms[*t], states, k);
            }
            out.push(if lw.is_nan() { f64::NEG_INFINITY } else { lw });
        }
        Ok(out)
    }
}
