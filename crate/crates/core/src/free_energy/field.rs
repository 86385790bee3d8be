//! Shift-invariant random fields given through their finite-window marginals.

use crate::error::{Error, Result};
use crate::lattice::{decode_states, Alphabet, Guard, Window};
use crate::measures::{total_variation, DensityTable};

#[derive(Clone, Debug)]
pub enum ShiftInvariantField {
    /// I.i.d. sites with the given single-site law.
    Product { dim: usize, alphabet: Alphabet, probs: Vec<f64> },
    /// Infinite-volume nearest-neighbour Ising chain with weight
    /// `exp(β Σ s_x s_{x+1} + h Σ s_x)`, built from the transfer matrix.
    IsingChain { beta: f64, field: f64 },
    /// Every site in `state`.
    PointMass { dim: usize, alphabet: Alphabet, state: usize },
    /// Explicit tables; a marginal comes from the first table whose window
    /// contains the request.
    Tables(Vec<DensityTable>),
}

fn two_state() -> Alphabet {
    Alphabet::uniform(["-1", "+1"])
}

impl ShiftInvariantField {
    pub fn product(dim: usize, alphabet: Alphabet, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != alphabet.size() {
            return Err(Error::Shape("one probability per state is required".into()));
        }
        let s: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid("single-site law must be a probability vector".into()));
        }
        Ok(ShiftInvariantField::Product { dim, alphabet, probs })
    }

    /// The product of the alphabet's reference measure.
    pub fn reference(dim: usize, alphabet: Alphabet) -> Self {
        let probs = alphabet.reference().to_vec();
        ShiftInvariantField::Product { dim, alphabet, probs }
    }

    pub fn tables(tables: Vec<DensityTable>) -> Result<Self> {
        let first = tables.first().ok_or_else(|| Error::Invalid("no tables given".into()))?;
        for t in &tables {
            if t.alphabet() != first.alphabet() || t.window().dim() != first.window().dim() {
                return Err(Error::Shape("tables must share alphabet and dimension".into()));
            }
            if !t.is_normalized() {
                return Err(Error::Invalid("field tables must be normalized".into()));
            }
        }
        Ok(ShiftInvariantField::Tables(tables))
    }

    pub fn dim(&self) -> usize {
        match self {
            ShiftInvariantField::Product { dim, .. } | ShiftInvariantField::PointMass { dim, .. } => *dim,
            ShiftInvariantField::IsingChain { .. } => 1,
            ShiftInvariantField::Tables(t) => t[0].window().dim(),
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        match self {
            ShiftInvariantField::Product { alphabet, .. } | ShiftInvariantField::PointMass { alphabet, .. } => alphabet.clone(),
            ShiftInvariantField::IsingChain { .. } => two_state(),
            ShiftInvariantField::Tables(t) => t[0].alphabet().clone(),
        }
    }

    /// The law of the configuration on `window`.
    pub fn marginal(&self, window: &Window, guard: &Guard) -> Result<DensityTable> {
        if window.dim() != self.dim() {
            return Err(Error::Shape("window dimension differs from the field".into()));
        }
        match self {
            ShiftInvariantField::Product { alphabet, probs, .. } => {
                let logs: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
                Ok(DensityTable::product_of(window.clone(), alphabet.clone(), &logs, guard)?.normalize())
            }
            ShiftInvariantField::PointMass { alphabet, state, .. } => {
                let k = alphabet.size() as u64;
                let code = (0..window.len()).fold(0u64, |acc, _| acc * k + *state as u64);
                DensityTable::point_mass(window.clone(), alphabet.clone(), code, guard)
            }
            ShiftInvariantField::IsingChain { beta, field } => ising_chain_marginal(*beta, *field, window, guard),
            ShiftInvariantField::Tables(tables) => {
                let t = tables
                    .iter()
                    .find(|t| window.is_subset(t.window()))
                    .ok_or_else(|| Error::Domain("no stored table covers the requested window".into()))?;
                t.marginal(window)
            }
        }
    }

    /// Largest TV distance between a stored table and the projection of a
    /// larger stored table onto its window.
    pub fn projection_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        if let ShiftInvariantField::Tables(tables) = self {
            for small in tables {
                for big in tables {
                    if small.window() != big.window() && small.window().is_subset(big.window()) {
                        worst = worst.max(total_variation(small, &big.marginal(small.window())?)?);
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Stationary Markov chain of the Ising transfer matrix
/// `T(s,t) = exp(β s t + h (s + t)/2)`: with Perron pair `(λ, v)`,
/// `P(s,t) = T(s,t) v_t / (λ v_s)` and `π(s) ∝ v_s²`.
fn ising_chain_marginal(beta: f64, h: f64, window: &Window, guard: &Guard) -> Result<DensityTable> {
    let total = guard.entries(2, window.len(), "Ising chain marginal")?;
    let spins = [-1.0, 1.0];
    let t = |a: usize, b: usize| (beta * spins[a] * spins[b] + 0.5 * h * (spins[a] + spins[b])).exp();
    let (a, b, c) = (t(0, 0), t(0, 1), t(1, 1));
    let lambda = 0.5 * (a + c) + (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let v = if b == 0.0 {
        if a >= c {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    } else {
        [b, lambda - a]
    };
    let norm = v[0] * v[0] + v[1] * v[1];
    let pi = [v[0] * v[0] / norm, v[1] * v[1] / norm];
    let p = [[t(0, 0) * v[0] / (lambda * v[0]), t(0, 1) * v[1] / (lambda * v[0])], [
        t(1, 0) * v[0] / (lambda * v[1]),
        t(1, 1) * v[1] / (lambda * v[1]),
    ]];
    let power = |g: i64| {
        let mut m = [[1.0, 0.0], [0.0, 1.0]];
        for _ in 0..g {
            m = [
                [m[0][0] * p[0][0] + m[0][1] * p[1][0], m[0][0] * p[0][1] + m[0][1] * p[1][1]],
                [m[1][0] * p[0][0] + m[1][1] * p[1][0], m[1][0] * p[0][1] + m[1][1] * p[1][1]],
            ];
        }
        m
    };
    let xs: Vec<i64> = window.iter().map(|s| s.coords()[0]).collect();
    let steps: Vec<[[f64; 2]; 2]> = xs.windows(2).map(|w| power(w[1] - w[0])).collect();
    let lw = (0..total)
        .map(|code| {
            let s = decode_states(code as u64, xs.len(), 2);
            let mut l = pi[s[0]].ln();
            for (k, m) in steps.iter().enumerate() {
                l += m[s[k]][s[k + 1]].ln();
            }
            l
        })
        .collect();
    Ok(DensityTable::from_log_weights(window.clone(), two_state(), lw)?.normalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_box, Site};

    #[test]
    fn ising_chain_is_consistent_and_symmetric() {
        let g = Guard::default();
        let mu = ShiftInvariantField::IsingChain { beta: 0.4, field: 0.0 };
        let big = mu.marginal(&make_box(3, 1).unwrap(), &g).unwrap();
        let small = mu.marginal(&make_box(1, 1).unwrap(), &g).unwrap();
        assert!(total_variation(&big.marginal(small.window()).unwrap(), &small).unwrap() < 1e-14);
        let one = mu.marginal(&Window::singleton(Site::origin(1)), &g).unwrap();
        assert!((one.prob(0) - 0.5).abs() < 1e-15);
        // neighbour correlation tanh β
        let pair = mu.marginal(&Window::rect(&[0], &[1]).unwrap(), &g).unwrap();
        let corr = pair.prob(0) + pair.prob(3) - pair.prob(1) - pair.prob(2);
        assert!((corr - 0.4f64.tanh()).abs() < 1e-14);
        // gaps: correlation tanh(β)^3 at distance 3
        let gap = mu.marginal(&Window::from_coords(1, &[&[0], &[3]]).unwrap(), &g).unwrap();
        let corr = gap.prob(0) + gap.prob(3) - gap.prob(1) - gap.prob(2);
        assert!((corr - 0.4f64.tanh().powi(3)).abs() < 1e-14);
        // shift invariance
        let moved = mu.marginal(&Window::rect(&[5], &[6]).unwrap(), &g).unwrap();
        assert_eq!(moved.log_weights(), pair.log_weights());
    }

    #[test]
    fn ising_chain_with_field_magnetizes() {
        let g = Guard::default();
        let mu = ShiftInvariantField::IsingChain { beta: 0.3, field: 0.5 };
        let one = mu.marginal(&Window::singleton(Site::origin(1)), &g).unwrap();
        // m = sinh h / sqrt(sinh² h + e^{-4β})
        let (b, h): (f64, f64) = (0.3, 0.5);
        let m = h.sinh() / (h.sinh().powi(2) + (-4.0 * b).exp()).sqrt();
        assert!((one.prob(1) - one.prob(0) - m).abs() < 1e-14);
    }

    #[test]
    fn product_and_point_mass() {
        let g = Guard::default();
        let a = Alphabet::uniform(["0", "1"]);
        let mu = ShiftInvariantField::product(2, a.clone(), vec![0.25, 0.75]).unwrap();
        let w = Window::rect(&[0, 0], &[0, 1]).unwrap();
        assert!((mu.marginal(&w, &g).unwrap().prob(3) - 0.5625).abs() < 1e-15);
        let pm = ShiftInvariantField::PointMass { dim: 2, alphabet: a, state: 1 };
        assert_eq!(pm.marginal(&w, &g).unwrap().prob(3), 1.0);
        let tables = ShiftInvariantField::tables(vec![mu.marginal(&make_box(1, 2).unwrap(), &g).unwrap(), mu.marginal(&w, &g).unwrap()]).unwrap();
        assert!(tables.projection_residual().unwrap() < 1e-15);
    }
}
