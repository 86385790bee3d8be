//! Minimizing `ℋ(μ | Σ w_i K_i)` over the probability simplex.
//!
//! The objective is convex in `w`. With `m = Σ w_i K_i` and
//! `D_i = Σ_ζ μ(ζ) K_i(ζ)/m(ζ)`, concavity of `log` gives
//! `f(w) − min f ≤ log max_i D_i`; with `min f ≥ 0` the gap certificate is
//! `min(f, log max_i D_i)`. Steps are exponentiated-gradient updates with
//! backtracking, falling back to the monotone multiplicative step
//! `w_i ← w_i D_i`. Every few iterations a projected Newton step on the
//! face spanned by the non-negligible weights is tried, which gives fast
//! local convergence once the optimal face is found. A vertex whose weight
//! has collapsed is revived by an exact line search toward it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measures::DensityTable;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        MixtureOptions {
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureFit {
    /// `min_w ℋ(μ | Σ w_i K_i)` up to `gap`.
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
    /// One weight per input kernel; duplicates share the first copy's weight.
    pub weights: Vec<f64>,
}

const WEIGHT_FLOOR: f64 = 1e-280;
/// Iterations between Newton attempts.
const NEWTON_EVERY: usize = 10;
/// Work limit `|active|² · codes` for one Newton step.
const NEWTON_WORK: usize = 200_000_000;

struct Problem {
    mu: Vec<f64>,
    mu_log: Vec<f64>,
    /// Per-code shift so that the largest scaled entry is 1.
    shift: Vec<f64>,
    /// Row-major: `a[i * codes + c]`.
    a: Vec<f64>,
    codes: usize,
}

impl Problem {
    fn mix(&self, w: &[f64], m: &mut [f64]) {
        m.iter_mut().for_each(|x| *x = 0.0);
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            let row = &self.a[i * self.codes..(i + 1) * self.codes];
            for (mc, &aic) in m.iter_mut().zip(row) {
                *mc += wi * aic;
            }
        }
    }

    fn objective(&self, m: &[f64]) -> f64 {
        let mut f = 0.0;
        for c in 0..self.codes {
            f += self.mu[c] * (self.mu_log[c] - m[c].ln() - self.shift[c]);
        }
        f
    }

    /// Newton direction for the weights in `active`, tangent to the simplex.
    fn newton_direction(&self, m: &[f64], d: &[f64], active: &[usize]) -> Option<Vec<f64>> {
        let s = active.len();
        let r: Vec<f64> = self.mu.iter().zip(m).map(|(u, v)| u / (v * v)).collect();
        let mut kkt = DMatrix::<f64>::zeros(s + 1, s + 1);
        for (x, &i) in active.iter().enumerate() {
            let ri = &self.a[i * self.codes..(i + 1) * self.codes];
            for (y, &j) in active.iter().enumerate().skip(x) {
                let rj = &self.a[j * self.codes..(j + 1) * self.codes];
                let h: f64 = ri.iter().zip(rj).zip(&r).map(|((p, q), t)| p * q * t).sum();
                kkt[(x, y)] = h;
                kkt[(y, x)] = h;
            }
            kkt[(x, s)] = 1.0;
            kkt[(s, x)] = 1.0;
        }
        let ridge = 1e-12 * (0..s).map(|x| kkt[(x, x)]).fold(0.0, f64::max);
        for x in 0..s {
            kkt[(x, x)] += ridge;
        }
        let mut rhs = DVector::<f64>::zeros(s + 1);
        for (x, &i) in active.iter().enumerate() {
            rhs[x] = d[i];
        }
        let sol = kkt.lu().solve(&rhs)?;
        let dir: Vec<f64> = (0..s).map(|x| sol[x]).collect();
        dir.iter().all(|v| v.is_finite()).then_some(dir)
    }

    /// Minimizer over `t ∈ [0, 1]` of `f((1 − t) w + t e_j)`, by bisection on
    /// the monotone derivative.
    fn toward_vertex(&self, m: &[f64], j: usize) -> f64 {
        let row = &self.a[j * self.codes..(j + 1) * self.codes];
        let slope = |t: f64| -> f64 {
            self.mu
                .iter()
                .zip(m)
                .zip(row)
                .map(|((u, v), a)| -u * (a - v) / (v + t * (a - v)))
                .sum()
        };
        if slope(1.0) <= 0.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn ratios(&self, m: &[f64], d: &mut [f64]) {
        let r: Vec<f64> = self.mu.iter().zip(m).map(|(u, v)| u / v).collect();
        for (i, di) in d.iter_mut().enumerate() {
            let row = &self.a[i * self.codes..(i + 1) * self.codes];
            *di = row.iter().zip(&r).map(|(x, y)| x * y).sum();
        }
    }
}

fn normalize(w: &mut [f64]) {
    for x in w.iter_mut() {
        *x = x.max(WEIGHT_FLOOR);
    }
    let s: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= s;
    }
}

/// Best mixture of `kernels` against `target`.
pub fn minimize_mixture(target: &DensityTable, kernels: &[DensityTable], opts: MixtureOptions) -> Result<MixtureFit> {
    if kernels.is_empty() {
        return Err(Error::Invalid("no kernels to mix".into()));
    }
    let mut distinct: Vec<usize> = Vec::new();
    let mut owner = Vec::with_capacity(kernels.len());
    for (i, k) in kernels.iter().enumerate() {
        if k.window() != target.window() || k.alphabet() != target.alphabet() {
            return Err(Error::Shape("kernel and target live on different spaces".into()));
        }
        match distinct.iter().position(|&j| kernels[j].log_weights() == k.log_weights()) {
            Some(p) => owner.push(p),
            None => {
                owner.push(distinct.len());
                distinct.push(i);
            }
        }
    }
    let support: Vec<usize> = target.support().collect();
    let codes = support.len();
    let rows = distinct.len();
    let mut shift = vec![f64::NEG_INFINITY; codes];
    for &i in &distinct {
        let lw = kernels[i].log_weights();
        for (s, &c) in shift.iter_mut().zip(&support) {
            *s = s.max(lw[c]);
        }
    }
    let expand = |w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; kernels.len()];
        for (i, o) in owner.iter().enumerate() {
            if distinct[*o] == i {
                out[i] = w[*o];
            }
        }
        out
    };
    if shift.contains(&f64::NEG_INFINITY) {
        return Ok(MixtureFit {
            value: f64::INFINITY,
            gap: 0.0,
            iterations: 0,
            weights: expand(&vec![1.0 / rows as f64; rows]),
        });
    }
    let mut a = Vec::with_capacity(rows * codes);
    for &i in &distinct {
        let lw = kernels[i].log_weights();
        a.extend(support.iter().zip(&shift).map(|(&c, &s)| (lw[c] - s).exp()));
    }
    let mu_log: Vec<f64> = support.iter().map(|&c| target.log_weights()[c]).collect();
    let problem = Problem {
        mu: mu_log.iter().map(|x| x.exp()).collect(),
        mu_log,
        shift,
        a,
        codes,
    };

    let mut w = vec![1.0 / rows as f64; rows];
    let mut m = vec![0.0; codes];
    let mut trial_m = vec![0.0; codes];
    let mut d = vec![0.0; rows];
    problem.mix(&w, &mut m);
    let mut f = problem.objective(&m);
    let mut eta = 1.0;
    for it in 0..=opts.max_iter {
        problem.ratios(&m, &mut d);
        let dmax = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gap = dmax.ln().max(0.0).min(f.max(0.0));
        if gap <= opts.tol || rows == 1 {
            return Ok(MixtureFit {
                value: f.max(0.0),
                gap,
                iterations: it,
                weights: expand(&w),
            });
        }
        if it == opts.max_iter {
            return Err(Error::Optimization {
                best: f.max(0.0),
                gap,
                iterations: it,
            });
        }
        let (jmax, _) = d.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let wmax = w.iter().copied().fold(0.0, f64::max);
        if w[jmax] < 1e-6 * wmax {
            let t = problem.toward_vertex(&m, jmax);
            if t > 0.0 {
                let mut trial: Vec<f64> = w.iter().map(|x| (1.0 - t) * x).collect();
                trial[jmax] += t;
                normalize(&mut trial);
                problem.mix(&trial, &mut trial_m);
                let ft = problem.objective(&trial_m);
                if ft < f {
                    w = trial;
                    std::mem::swap(&mut m, &mut trial_m);
                    f = ft;
                    continue;
                }
            }
        }
        if it % NEWTON_EVERY == NEWTON_EVERY - 1 {
            let active: Vec<usize> = (0..rows).filter(|&i| w[i] > 1e-9 * wmax).collect();
            if active.len() > 1 && active.len() * active.len() * codes <= NEWTON_WORK {
                if let Some(dir) = problem.newton_direction(&m, &d, &active) {
                    let limit = active
                        .iter()
                        .zip(&dir)
                        .filter(|(_, v)| **v < 0.0)
                        .map(|(&i, v)| -w[i] / v)
                        .fold(1.0, f64::min);
                    let mut t = limit;
                    while t > 1e-8 * limit {
                        let mut trial = w.clone();
                        for (&i, v) in active.iter().zip(&dir) {
                            trial[i] = (trial[i] + t * v).max(0.0);
                        }
                        normalize(&mut trial);
                        problem.mix(&trial, &mut trial_m);
                        let ft = problem.objective(&trial_m);
                        if ft < f {
                            w = trial;
                            std::mem::swap(&mut m, &mut trial_m);
                            f = ft;
                            break;
                        }
                        t *= 0.5;
                    }
                    continue;
                }
            }
        }
        let mut accepted = false;
        while eta > 1e-12 {
            let mut trial: Vec<f64> = w.iter().zip(&d).map(|(wi, di)| wi * (eta * (di - dmax)).exp()).collect();
            normalize(&mut trial);
            problem.mix(&trial, &mut trial_m);
            let ft = problem.objective(&trial_m);
            if ft < f {
                w = trial;
                std::mem::swap(&mut m, &mut trial_m);
                f = ft;
                eta = (eta * 2.0).min(1e8);
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            let mut trial: Vec<f64> = w.iter().zip(&d).map(|(wi, di)| wi * di).collect();
            normalize(&mut trial);
            problem.mix(&trial, &mut trial_m);
            // monotone in exact arithmetic, so accepted even below roundoff
            w = trial;
            std::mem::swap(&mut m, &mut trial_m);
            f = problem.objective(&m);
            eta = 1.0;
        }
    }
    unreachable!("loop returns at the iteration cap")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Alphabet, Site, Window};
    use crate::measures::{mixture, rel_entropy, MeasureFamily};

    fn table(p: &[f64]) -> DensityTable {
        let w = Window::singleton(Site::origin(1));
        let a = Alphabet::uniform((0..p.len()).map(|i| i.to_string()));
        DensityTable::from_weights(w, a, p).unwrap().normalize()
    }

    #[test]
    fn target_inside_hull_gives_zero() {
        let k = vec![table(&[0.7, 0.2, 0.1]), table(&[0.1, 0.3, 0.6])];
        let mu = mixture(&[0.3, 0.7], &MeasureFamily::new(k.clone()).unwrap()).unwrap();
        let fit = minimize_mixture(&mu, &k, MixtureOptions::default()).unwrap();
        assert!(fit.value < 1e-9);
        assert!((fit.weights[0] - 0.3).abs() < 1e-3);
    }

    #[test]
    fn vertex_optimum_and_duplicates() {
        let k = vec![table(&[0.5, 0.5]), table(&[0.5, 0.5]), table(&[0.9, 0.1])];
        let mu = table(&[0.4, 0.6]);
        let fit = minimize_mixture(&mu, &k, MixtureOptions::default()).unwrap();
        let best = rel_entropy(&mu, &k[0]).unwrap();
        assert!((fit.value - best).abs() < 1e-9);
        assert_eq!(fit.weights[1], 0.0);
    }

    #[test]
    fn missing_support_is_infinite() {
        let k = vec![table(&[1.0, 0.0])];
        let mu = table(&[0.5, 0.5]);
        assert_eq!(minimize_mixture(&mu, &k, MixtureOptions::default()).unwrap().value, f64::INFINITY);
    }

    #[test]
    fn iteration_cap_reports_best() {
        let k = vec![table(&[0.7, 0.2, 0.1]), table(&[0.1, 0.3, 0.6]), table(&[0.2, 0.5, 0.3])];
        let mu = table(&[0.3, 0.3, 0.4]);
        let opts = MixtureOptions { tol: 0.0, max_iter: 3 };
        assert!(matches!(minimize_mixture(&mu, &k, opts), Err(Error::Optimization { iterations: 3, .. })));
    }
}
