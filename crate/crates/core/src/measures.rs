//! Finite measures on `E^Λ` stored as log-weights, and the entropy
//! functionals built on them.
//!
//! Extended reals are plain `f64`: `+∞` is `f64::INFINITY`, zero mass is
//! `f64::NEG_INFINITY` in log-domain, and NaN never escapes a public function.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::lattice::{decode_states, Alphabet, Guard, Window};

/// Absolute tolerance used to decide that two measures coincide.
pub const EQUAL_TV: f64 = 1e-10;
const NORMALIZED_TOL: f64 = 1e-10;

/// `log Σ exp(x_i)` with a max shift. Returns `-∞` for an empty or all-null input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// `|a - b|` on extended reals with `|∞ - ∞| = 0`.
pub fn ext_abs_diff(a: f64, b: f64) -> f64 {
    if a.is_infinite() && b.is_infinite() && a.signum() == b.signum() {
        0.0
    } else {
        (a - b).abs()
    }
}

/// A finite measure on `E^Λ`, one log-weight per configuration code.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityTable {
    window: Window,
    alphabet: Alphabet,
    log_weights: Vec<f64>,
    normalized: bool,
}

impl DensityTable {
    pub fn from_log_weights(window: Window, alphabet: Alphabet, log_weights: Vec<f64>) -> Result<Self> {
        let expected = Guard::with_max_entries(u64::MAX).entries(alphabet.size(), window.len(), "density table")?;
        if log_weights.len() != expected {
            return Err(Error::Shape(format!(
                "{} log-weights for {} configurations",
                log_weights.len(),
                expected
            )));
        }
        if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::Invalid("log-weights must be finite or -inf".into()));
        }
        if log_weights.iter().all(|w| *w == f64::NEG_INFINITY) {
            return Err(Error::Invalid("measure has no mass".into()));
        }
        let normalized = (log_sum_exp(&log_weights)).abs() <= NORMALIZED_TOL;
        Ok(DensityTable {
            window,
            alphabet,
            log_weights,
            normalized,
        })
    }

    pub fn from_weights(window: Window, alphabet: Alphabet, weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Invalid("weights must be finite and nonnegative".into()));
        }
        Self::from_log_weights(window, alphabet, weights.iter().map(|w| w.ln()).collect())
    }

    /// The product reference measure `λ^Λ`.
    pub fn product(window: Window, alphabet: Alphabet, guard: &Guard) -> Result<Self> {
        let single: Vec<f64> = alphabet.reference().iter().map(|w| w.ln()).collect();
        Self::product_of(window, alphabet, &single, guard)
    }

    /// Product measure with the given single-site log-weights (normalized per site).
    pub fn product_of(window: Window, alphabet: Alphabet, single_log: &[f64], guard: &Guard) -> Result<Self> {
        if single_log.len() != alphabet.size() {
            return Err(Error::Shape("single-site weights do not match alphabet".into()));
        }
        let total = guard.entries(alphabet.size(), window.len(), "product measure")?;
        let k = alphabet.size();
        let n = window.len();
        let lw = (0..total)
            .map(|code| {
                decode_states(code as u64, n, k)
                    .iter()
                    .map(|&s| single_log[s])
                    .sum()
            })
            .collect();
        Ok(Self::from_log_weights(window, alphabet, lw)?.normalize())
    }

    pub fn uniform(window: Window, alphabet: Alphabet, guard: &Guard) -> Result<Self> {
        let total = guard.entries(alphabet.size(), window.len(), "uniform measure")?;
        let v = -(total as f64).ln();
        Self::from_log_weights(window, alphabet, vec![v; total])
    }

    pub fn point_mass(window: Window, alphabet: Alphabet, code: u64, guard: &Guard) -> Result<Self> {
        let total = guard.entries(alphabet.size(), window.len(), "point mass")?;
        if code as usize >= total {
            return Err(Error::Domain(format!("code {code} out of range")));
        }
        let mut lw = vec![f64::NEG_INFINITY; total];
        lw[code as usize] = 0.0;
        Self::from_log_weights(window, alphabet, lw)
    }

    /// Rescales so that the total mass is one.
    pub fn normalize(mut self) -> Self {
        let z = log_sum_exp(&self.log_weights);
        for w in &mut self.log_weights {
            *w -= z;
        }
        self.normalized = true;
        self
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// `log` of the total mass.
    pub fn log_mass(&self) -> f64 {
        log_sum_exp(&self.log_weights)
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn prob(&self, code: usize) -> f64 {
        self.log_weights[code].exp()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.log_weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > f64::NEG_INFINITY)
            .map(|(i, _)| i)
    }

    fn same_space(&self, other: &DensityTable) -> Result<()> {
        if self.window != other.window {
            return Err(Error::Shape("measures live on different windows".into()));
        }
        if self.alphabet.size() != other.alphabet.size() {
            return Err(Error::Shape("measures use different alphabets".into()));
        }
        Ok(())
    }

    fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::Invalid("measure is not normalized".into()))
        }
    }

    /// The image under `σ_Λ` for `Λ` contained in the table's window.
    pub fn marginal(&self, sub: &Window) -> Result<DensityTable> {
        let positions = sub
            .iter()
            .map(|x| {
                self.window
                    .position(x)
                    .ok_or_else(|| Error::Shape(format!("site {x:?} outside the table window")))
            })
            .collect::<Result<Vec<_>>>()?;
        let k = self.alphabet.size();
        let sub_total = k.pow(sub.len() as u32);
        let mut place = vec![0usize; self.window.len()];
        let mut mult = 1usize;
        for &p in &positions {
            place[p] = mult;
            mult *= k;
        }
        let n = self.window.len();
        let top = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sums = vec![0.0f64; sub_total];
        let mut states = vec![0usize; n];
        for &w in self.log_weights.iter() {
            let target: usize = states.iter().zip(place.iter()).map(|(s, m)| s * m).sum();
            sums[target] += (w - top).exp();
            crate::lattice::advance(&mut states, k);
        }
        let lw = sums.iter().map(|s| s.ln() + top).collect();
        let mut out = DensityTable::from_log_weights(sub.clone(), self.alphabet.clone(), lw)?;
        out.normalized = self.normalized || out.normalized;
        Ok(out)
    }

    /// CSV with columns `code`, one column per site, `weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["code".to_string()];
        header.extend(self.window.iter().map(|s| {
            format!(
                "s({})",
                s.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
            )
        }));
        header.push("weight".into());
        writeln!(out, "{}", header.iter().map(|h| csv_quote(h)).collect::<Vec<_>>().join(","))?;
        let n = self.window.len();
        let k = self.alphabet.size();
        for (code, w) in self.log_weights.iter().enumerate() {
            let states = decode_states(code as u64, n, k);
            let mut row = vec![code.to_string()];
            row.extend(states.iter().map(|&s| csv_quote(self.alphabet.label(s))));
            row.push(format_number(w.exp()));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Little-endian probabilities in code order.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for w in &self.log_weights {
            out.write_all(&w.exp().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R, window: Window, alphabet: Alphabet) -> Result<Self> {
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::Invalid(e.to_string()))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Invalid("binary dump length is not a multiple of 8".into()));
        }
        let weights: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_weights(window, alphabet, &weights)
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Seventeen significant digits, `inf` for infinities; NaN is a bug upstream.
pub fn format_number(x: f64) -> String {
    assert!(!x.is_nan(), "NaN reached an output writer");
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

/// A nonempty family of normalized measures on a common space.
#[derive(Clone, Debug)]
pub struct MeasureFamily {
    members: Vec<DensityTable>,
}

impl MeasureFamily {
    pub fn new(members: Vec<DensityTable>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Invalid("measure family is empty".into()))?;
        for m in &members {
            first.same_space(m)?;
            m.require_normalized()?;
        }
        Ok(MeasureFamily { members })
    }

    pub fn members(&self) -> &[DensityTable] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `ℋ(μ|ν) = Σ μ log(μ/ν)`, `+∞` without absolute continuity.
pub fn rel_entropy(mu: &DensityTable, nu: &DensityTable) -> Result<f64> {
    mu.same_space(nu)?;
    mu.require_normalized()?;
    nu.require_normalized()?;
    let mut acc = 0.0;
    for (&a, &b) in mu.log_weights.iter().zip(nu.log_weights.iter()) {
        if a == f64::NEG_INFINITY {
            continue;
        }
        if b == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        acc += a.exp() * (a - b);
    }
    Ok(acc.max(0.0))
}

/// `ℋ^∞(μ|ν) = ess sup_μ log(dμ/dν)`.
pub fn max_entropy(mu: &DensityTable, nu: &DensityTable) -> Result<f64> {
    mu.same_space(nu)?;
    mu.require_normalized()?;
    nu.require_normalized()?;
    let mut best = f64::NEG_INFINITY;
    for (&a, &b) in mu.log_weights.iter().zip(nu.log_weights.iter()) {
        if a == f64::NEG_INFINITY {
            continue;
        }
        if b == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        best = best.max(a - b);
    }
    Ok(best.max(0.0))
}

/// Running pointwise minimum and maximum of log-densities; the diameter of a
/// family is the largest spread of its envelope.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Envelope {
    pub fn new(len: usize) -> Self {
        Envelope {
            lower: vec![f64::INFINITY; len],
            upper: vec![f64::NEG_INFINITY; len],
        }
    }

    pub fn add(&mut self, log_density: &[f64]) {
        for ((lo, hi), &w) in self.lower.iter_mut().zip(self.upper.iter_mut()).zip(log_density) {
            if w < *lo {
                *lo = w;
            }
            if w > *hi {
                *hi = w;
            }
        }
    }

    pub fn merge(&mut self, other: &Envelope) {
        for (a, b) in self.lower.iter_mut().zip(&other.lower) {
            *a = a.min(*b);
        }
        for (a, b) in self.upper.iter_mut().zip(&other.upper) {
            *a = a.max(*b);
        }
    }

    /// `max_ζ (upper − lower)` over configurations charged by some member.
    pub fn spread(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (&lo, &hi) in self.lower.iter().zip(&self.upper) {
            if hi == f64::NEG_INFINITY {
                continue;
            }
            if lo == f64::NEG_INFINITY {
                return f64::INFINITY;
            }
            best = best.max(hi - lo);
        }
        best
    }
}

/// `sup_{μ,ν ∈ ℬ} ℋ^∞(μ|ν)`.
pub fn max_diameter(family: &MeasureFamily) -> f64 {
    let mut env = Envelope::new(family.members[0].len());
    for m in &family.members {
        env.add(&m.log_weights);
    }
    env.spread()
}

/// Lower and upper envelopes `λ⁻ = f⁻ λ_ref`, `λ⁺ = f⁺ λ_ref` of a family.
pub fn envelope(family: &MeasureFamily, reference: &DensityTable) -> Result<(DensityTable, DensityTable)> {
    family.members[0].same_space(reference)?;
    if !family.members.iter().any(|m| m == reference) {
        return Err(Error::Domain("reference measure is not a member of the family".into()));
    }
    if max_diameter(family).is_infinite() {
        return Err(Error::Domain("family has infinite diameter".into()));
    }
    let mut env = Envelope::new(reference.len());
    for m in &family.members {
        env.add(&m.log_weights);
    }
    // the densities f = μ/λ_ref multiply back against λ_ref, so the
    // envelope of weights is the envelope of the members themselves
    let mk = |lw: Vec<f64>| {
        let mut t = DensityTable::from_log_weights(reference.window.clone(), reference.alphabet.clone(), lw)?;
        t.normalized = false;
        Ok::<_, Error>(t)
    };
    Ok((mk(env.lower)?, mk(env.upper)?))
}

/// `½ Σ |μ − ν|`.
pub fn total_variation(mu: &DensityTable, nu: &DensityTable) -> Result<f64> {
    mu.same_space(nu)?;
    mu.require_normalized()?;
    nu.require_normalized()?;
    let s: f64 = mu
        .log_weights
        .iter()
        .zip(nu.log_weights.iter())
        .map(|(a, b)| (a.exp() - b.exp()).abs())
        .sum();
    Ok((0.5 * s).min(1.0))
}

/// Convex combination `Σ w_i μ_i`.
pub fn mixture(weights: &[f64], family: &MeasureFamily) -> Result<DensityTable> {
    if weights.len() != family.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} members",
            weights.len(),
            family.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Invalid("mixture weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("mixture weights sum to {total}")));
    }
    let logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let len = family.members[0].len();
    let mut buf = Vec::with_capacity(family.len());
    let lw = (0..len)
        .map(|c| {
            buf.clear();
            buf.extend(
                family
                    .members
                    .iter()
                    .zip(&logs)
                    .map(|(m, lw)| lw + m.log_weights[c]),
            );
            log_sum_exp(&buf)
        })
        .collect();
    let first = &family.members[0];
    Ok(DensityTable::from_log_weights(first.window.clone(), first.alphabet.clone(), lw)?.normalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Window;

    fn two_point(p: f64) -> DensityTable {
        let w = Window::rect(&[0], &[0]).unwrap();
        DensityTable::from_weights(w, Alphabet::uniform(["a", "b"]), &[p, 1.0 - p])
            .unwrap()
            .normalize()
    }

    #[test]
    fn entropy_examples() {
        let mu = two_point(0.75);
        let nu = two_point(0.5);
        assert_eq!(rel_entropy(&mu, &mu).unwrap(), 0.0);
        assert!((max_entropy(&mu, &nu).unwrap() - 1.5f64.ln()).abs() < 1e-15);
        let w = Window::rect(&[0], &[1]).unwrap();
        let a = Alphabet::uniform(["0", "1"]);
        let g = Guard::default();
        let delta = DensityTable::point_mass(w.clone(), a.clone(), 2, &g).unwrap();
        let unif = DensityTable::uniform(w.clone(), a.clone(), &g).unwrap();
        assert!((rel_entropy(&delta, &unif).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!((max_entropy(&delta, &unif).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert_eq!(rel_entropy(&unif, &delta).unwrap(), f64::INFINITY);
    }

    #[test]
    fn diameter_examples() {
        let fam = MeasureFamily::new(vec![two_point(0.75), two_point(0.5)]).unwrap();
        assert!((max_diameter(&fam) - 2f64.ln()).abs() < 1e-15);
        let single = MeasureFamily::new(vec![two_point(0.3)]).unwrap();
        assert_eq!(max_diameter(&single), 0.0);
        let w = Window::rect(&[0], &[0]).unwrap();
        let a = Alphabet::uniform(["a", "b"]);
        let g = Guard::default();
        let singular = MeasureFamily::new(vec![
            DensityTable::point_mass(w.clone(), a.clone(), 0, &g).unwrap(),
            DensityTable::point_mass(w, a, 1, &g).unwrap(),
        ])
        .unwrap();
        assert_eq!(max_diameter(&singular), f64::INFINITY);
    }

    #[test]
    fn envelope_example() {
        let fam = MeasureFamily::new(vec![two_point(0.75), two_point(0.5)]).unwrap();
        let (lo, hi) = envelope(&fam, &two_point(0.5)).unwrap();
        let lo = lo.probs();
        let hi = hi.probs();
        assert!((lo[0] - 0.5).abs() < 1e-15 && (lo[1] - 0.25).abs() < 1e-15);
        assert!((hi[0] - 0.75).abs() < 1e-15 && (hi[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tv_and_mixture() {
        let w = Window::rect(&[0], &[0]).unwrap();
        let a = Alphabet::uniform(["a", "b", "c"]);
        let g = Guard::default();
        let d0 = DensityTable::point_mass(w.clone(), a.clone(), 0, &g).unwrap();
        let d1 = DensityTable::point_mass(w.clone(), a.clone(), 1, &g).unwrap();
        assert_eq!(total_variation(&d0, &d0).unwrap(), 0.0);
        assert_eq!(total_variation(&d0, &d1).unwrap(), 1.0);
        let fam = MeasureFamily::new(vec![d0.clone(), d1]).unwrap();
        assert!(total_variation(&mixture(&[1.0, 0.0], &fam).unwrap(), &d0).unwrap() < 1e-15);
        let half = mixture(&[0.5, 0.5], &fam).unwrap();
        assert!((half.prob(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn marginal_sums_out() {
        let w = Window::rect(&[0], &[2]).unwrap();
        let a = Alphabet::uniform(["0", "1"]);
        let weights: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let t = DensityTable::from_weights(w, a, &weights).unwrap().normalize();
        let sub = Window::rect(&[2], &[2]).unwrap();
        let m = t.marginal(&sub).unwrap();
        // last site is the most significant digit
        assert!((m.prob(0) - 10.0 / 36.0).abs() < 1e-14);
        assert!((m.prob(1) - 26.0 / 36.0).abs() < 1e-14);
    }

    #[test]
    fn binary_roundtrip() {
        let t = two_point(0.3);
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        let back = DensityTable::read_binary(&buf[..], t.window().clone(), t.alphabet().clone()).unwrap();
        assert!(total_variation(&back.normalize(), &t).unwrap() < 1e-15);
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("code,s(0),weight\n0,a,"));
    }

    #[test]
    fn lse_edge_cases() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(ext_abs_diff(f64::INFINITY, f64::INFINITY), 0.0);
    }
}
