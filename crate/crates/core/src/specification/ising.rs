//! The Ising model `α_Λ(ω) ∝ Π_{xy⊂Λ} e^{-β ω_x ω_y}` on finite subsets of
//! the square lattice.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lattice::{decode_states, Adjacency, Guard, Site, Window};
use crate::measures::{log_sum_exp, DensityTable};

use super::griffiths::griffiths_alphabet;

/// Spin of a Griffiths state index (`0 ↦ -1`, `1 ↦ 0`, `2 ↦ +1`).
pub fn spin(state: usize) -> i8 {
    state as i8 - 1
}

/// `log Z` of the Ising model on `sites` with optional external fields
/// (adding `h_x s_x` to the exponent) and clamped spins.
///
/// Sites are eliminated in the given order while only the frontier of
/// processed sites with unprocessed neighbours is kept, so the cost is
/// exponential in the frontier width rather than in `|sites|`.
pub fn log_partition(sites: &[Site], beta: f64, fields: &[f64], clamp: &[Option<i8>]) -> f64 {
    let n = sites.len();
    if n == 0 {
        return 0.0;
    }
    let index: HashMap<&Site, usize> = sites.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let offsets = Adjacency::Square.offsets(sites[0].dim());
    let nbrs: Vec<Vec<usize>> = sites
        .iter()
        .map(|s| offsets.iter().filter_map(|o| index.get(&s.add(o)).copied()).collect())
        .collect();
    let last_nbr: Vec<usize> = (0..n)
        .map(|i| nbrs[i].iter().copied().chain(std::iter::once(i)).max().unwrap())
        .collect();

    // active[b] is the site held in bit b of the table index
    let mut active: Vec<usize> = Vec::new();
    let mut table: Vec<f64> = vec![0.0];
    for v in 0..n {
        let earlier: Vec<usize> = nbrs[v]
            .iter()
            .filter(|&&u| u < v)
            .map(|&u| active.iter().position(|&a| a == u).expect("frontier holds earlier neighbours"))
            .collect();
        let bit = active.len();
        active.push(v);
        let mut next = vec![f64::NEG_INFINITY; table.len() * 2];
        for (state, &w) in table.iter().enumerate() {
            if w == f64::NEG_INFINITY {
                continue;
            }
            let local: i32 = earlier
                .iter()
                .map(|&b| if state >> b & 1 == 1 { 1 } else { -1 })
                .sum();
            for (sv, flag) in [(-1i8, 0usize), (1i8, 1usize)] {
                if let Some(c) = clamp.get(v).copied().flatten() {
                    if c != sv {
                        continue;
                    }
                }
                let h = fields.get(v).copied().unwrap_or(0.0);
                let e = -beta * sv as f64 * local as f64 + h * sv as f64;
                next[state | flag << bit] = w + e;
            }
        }
        table = next;
        // retire sites whose neighbours are all processed
        let mut b = 0;
        while b < active.len() {
            if last_nbr[active[b]] <= v {
                table = sum_out(&table, b);
                active.remove(b);
            } else {
                b += 1;
            }
        }
    }
    debug_assert_eq!(table.len(), 1);
    table[0]
}

fn sum_out(table: &[f64], bit: usize) -> Vec<f64> {
    let half = table.len() / 2;
    let low = (1usize << bit) - 1;
    (0..half)
        .map(|i| {
            let base = (i & low) | ((i & !low) << 1);
            let a = table[base];
            let b = table[base | 1 << bit];
            log_sum_exp(&[a, b])
        })
        .collect()
}

/// `Σ_{xy⊂A} s_x s_y` for spins given per site.
pub fn pair_sum(sites: &[Site], spins: &[i8]) -> i32 {
    let index: HashMap<&Site, usize> = sites.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let d = sites.first().map(Site::dim).unwrap_or(1);
    let mut total = 0;
    for (i, s) in sites.iter().enumerate() {
        for axis in 0..d {
            if let Some(&j) = index.get(&s.add(&Site::unit(d, axis))) {
                total += spins[i] as i32 * spins[j] as i32;
            }
        }
    }
    total
}

/// Memoizes `log Z` by translated shape.
#[derive(Default, Debug)]
pub struct PartitionCache {
    beta: f64,
    map: HashMap<Vec<Site>, f64>,
}

impl PartitionCache {
    pub fn new(beta: f64) -> Self {
        PartitionCache {
            beta,
            map: HashMap::new(),
        }
    }

    /// `log Z` for sorted `sites`.
    pub fn log_z(&mut self, sites: &[Site]) -> f64 {
        if sites.is_empty() {
            return 0.0;
        }
        let origin = sites[0].clone();
        let key: Vec<Site> = sites.iter().map(|s| s.sub(&origin)).collect();
        if let Some(&v) = self.map.get(&key) {
            return v;
        }
        let v = log_partition(&key, self.beta, &[], &[]);
        self.map.insert(key, v);
        v
    }

    /// `log α_A(s)` for sorted `sites` carrying spins `s`.
    pub fn log_alpha(&mut self, sites: &[Site], spins: &[i8]) -> f64 {
        -self.beta * pair_sum(sites, spins) as f64 - self.log_z(sites)
    }
}

/// `α_Λ` as a table on `{-1, 0, +1}^Λ`, null on any configuration with a 0.
pub fn ising_alpha(lambda: &Window, beta: f64, guard: &Guard) -> Result<DensityTable> {
    if !beta.is_finite() {
        return Err(Error::Domain("inverse temperature must be finite".into()));
    }
    let total = guard.entries(3, lambda.len(), "Ising table")?;
    let mut cache = PartitionCache::new(beta);
    let log_z = cache.log_z(lambda.sites());
    let lw = (0..total)
        .map(|code| {
            let states = decode_states(code as u64, lambda.len(), 3);
            if states.contains(&1) {
                return f64::NEG_INFINITY;
            }
            let spins: Vec<i8> = states.iter().map(|&s| spin(s)).collect();
            -beta * pair_sum(lambda.sites(), &spins) as f64 - log_z
        })
        .collect();
    Ok(DensityTable::from_log_weights(lambda.clone(), griffiths_alphabet(), lw)?.normalize())
}

/// Largest pointwise gap between `α_Λ(ω)` and
/// `f_{Λ,Δ}(ω) α_{Λ∩Δ}(ω) α_{Λ∖Δ}(ω) / Z` over all `ω ∈ {±1}^Λ`.
pub fn ising_decompose_check(lambda: &Window, delta: &Window, beta: f64, guard: &Guard) -> Result<f64> {
    guard.entries(2, lambda.len(), "Ising decomposition")?;
    let inner = lambda.intersection(delta);
    let outer = lambda.difference(delta);
    let n = lambda.len();
    let mut cache = PartitionCache::new(beta);
    let d = lambda.dim();
    // edges of Λ that cross ∂Δ
    let mut crossing = Vec::new();
    for (i, x) in lambda.iter().enumerate() {
        for axis in 0..d {
            let y = x.add(&Site::unit(d, axis));
            if let Some(j) = lambda.position(&y) {
                if delta.contains(x) != delta.contains(&y) {
                    crossing.push((i, j));
                }
            }
        }
    }
    let configs: Vec<Vec<i8>> = (0..1u64 << n)
        .map(|c| (0..n).map(|i| if c >> i & 1 == 1 { 1 } else { -1 }).collect())
        .collect();
    let restrict = |w: &Window, s: &[i8]| -> Vec<i8> {
        w.iter().map(|x| s[lambda.position(x).unwrap()]).collect()
    };
    let mut lhs = Vec::with_capacity(configs.len());
    let mut rhs_log = Vec::with_capacity(configs.len());
    for s in &configs {
        lhs.push(cache.log_alpha(lambda.sites(), s).exp());
        let f: f64 = crossing.iter().map(|&(i, j)| -beta * (s[i] * s[j]) as f64).sum();
        let a = cache.log_alpha(inner.sites(), &restrict(&inner, s));
        let b = cache.log_alpha(outer.sites(), &restrict(&outer, s));
        rhs_log.push(f + a + b);
    }
    // Z = ∫ f d(α_{Λ∩Δ} × α_{Λ∖Δ})
    let z = log_sum_exp(&rhs_log);
    Ok(lhs
        .iter()
        .zip(&rhs_log)
        .map(|(l, r)| (l - (r - z).exp()).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_box;

    fn brute_log_z(sites: &[Site], beta: f64, fields: &[f64]) -> f64 {
        let n = sites.len();
        let terms: Vec<f64> = (0..1u64 << n)
            .map(|c| {
                let s: Vec<i8> = (0..n).map(|i| if c >> i & 1 == 1 { 1 } else { -1 }).collect();
                let h: f64 = s.iter().zip(fields).map(|(&a, &h)| a as f64 * h).sum();
                -beta * pair_sum(sites, &s) as f64 + h
            })
            .collect();
        log_sum_exp(&terms)
    }

    #[test]
    fn elimination_matches_brute_force() {
        let b = make_box(1, 2).unwrap();
        let fields: Vec<f64> = (0..9).map(|i| 0.1 * i as f64 - 0.3).collect();
        for beta in [0.0, 0.3, -0.7, 1.1] {
            let a = log_partition(b.sites(), beta, &fields, &[]);
            let e = brute_log_z(b.sites(), beta, &fields);
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
        let l = Window::from_coords(2, &[&[0, 0], &[1, 0], &[1, 1], &[3, 3], &[0, 2]]).unwrap();
        let a = log_partition(l.sites(), 0.4, &[], &[]);
        assert!((a - brute_log_z(l.sites(), 0.4, &[0.0; 5])).abs() < 1e-12);
        let c = Window::rect(&[0, 0, 0], &[1, 1, 2]).unwrap();
        let z = vec![0.0; c.len()];
        assert!((log_partition(c.sites(), 0.2, &[], &[]) - brute_log_z(c.sites(), 0.2, &z)).abs() < 1e-10);
    }

    #[test]
    fn clamping_restricts_the_sum() {
        let w = Window::rect(&[0], &[2]).unwrap();
        let clamp = [Some(1i8), None, Some(-1)];
        // s0 = +, s2 = -, sum over s1 of exp(-β(s1 - s1)) = 2
        let v = log_partition(w.sites(), 0.9, &[], &clamp);
        assert!((v - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn alpha_examples() {
        let g = Guard::default();
        let one = ising_alpha(&Window::singleton(Site::origin(2)), 0.8, &g).unwrap();
        assert!((one.prob(0) - 0.5).abs() < 1e-15);
        assert_eq!(one.prob(1), 0.0);
        assert!((one.prob(2) - 0.5).abs() < 1e-15);
        let pair = Window::from_coords(1, &[&[0], &[1]]).unwrap();
        let beta: f64 = 0.6;
        let t = ising_alpha(&pair, beta, &g).unwrap();
        let z = 2.0 * (-beta).exp() + 2.0 * beta.exp();
        // codes: (s0,s1) with s0 least significant; index 2 is +1
        assert!((t.prob(2 + 3 * 2) - (-beta).exp() / z).abs() < 1e-15);
        assert!((t.prob(2) - beta.exp() / z).abs() < 1e-15);
    }

    #[test]
    fn decomposition_examples() {
        let g = Guard::default();
        let block = Window::rect(&[0, 0], &[1, 1]).unwrap();
        let col = Window::rect(&[0, 0], &[1, 0]).unwrap();
        assert!(ising_decompose_check(&block, &col, 0.7, &g).unwrap() <= 1e-12);
        assert!(ising_decompose_check(&block, &block, 0.7, &g).unwrap() <= 1e-12);
        assert_eq!(ising_decompose_check(&block, &col, 0.0, &g).unwrap(), 0.0);
        let split = Window::from_coords(2, &[&[0, 0], &[5, 5]]).unwrap();
        let a = ising_alpha(&split, 0.9, &g).unwrap();
        // disconnected window: product of independent fair coins
        for c in a.support() {
            assert!((a.prob(c) - 0.25).abs() < 1e-15);
        }
    }
}
