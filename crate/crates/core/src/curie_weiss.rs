//! Exact Curie-Weiss computations through the law of the total spin.
//!
//! The measure on `{−1,1}^n` has weight `exp(β S² / (2n))` with `S = Σ σ_i`,
//! so all quantities reduce to sums over `S ∈ {−n, −n+2, …, n}` done in
//! log-domain. For `k` observed spins with sum `a` and `n − k` hidden spins
//! with sum `b` the joint weight is `C(k,i) C(n−k,j) exp(β(a+b)²/(2n))`.

use std::f64::consts::LN_2;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::majority_sign;
use crate::rng::SpinRng;
use crate::stats::{compensated_sum, entropy_bits, log_sum_exp};

const LOG2_E: f64 = std::f64::consts::LOG2_E;

fn check(n: usize, beta: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
    }
    Ok(())
}

/// `ln m!` for `m = 0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    (0..=n).map(|m| libm::lgamma(m as f64 + 1.0)).collect()
}

#[inline]
fn ln_choose(lf: &[f64], n: usize, k: usize) -> f64 {
    lf[n] - lf[k] - lf[n - k]
}

/// Law of the total spin `S`.
#[derive(Clone, Debug, Serialize)]
pub struct CwMagnetizationPmf {
    pub n: usize,
    pub beta: f64,
    /// `S` values in increasing order.
    pub totals: Vec<i64>,
    /// Unnormalized `ln C(n, j) + β S²/(2n)`.
    pub log_weights: Vec<f64>,
    pub probs: Vec<f64>,
    /// `ln Z` with `Z = Σ_σ exp(β S²/(2n))`, so `Z_0 = 2^n`.
    pub log_z: f64,
}

impl CwMagnetizationPmf {
    pub fn expect<F: Fn(i64) -> f64>(&self, f: F) -> f64 {
        self.totals.iter().zip(&self.probs).map(|(&s, &p)| p * f(s)).sum()
    }
}

pub fn cw_magnetization_pmf(n: usize, beta: f64) -> Result<CwMagnetizationPmf> {
    check(n, beta)?;
    let lf = ln_factorials(n);
    let totals: Vec<i64> = (0..=n).map(|j| 2 * j as i64 - n as i64).collect();
    let log_weights: Vec<f64> = (0..=n)
        .map(|j| {
            let s = totals[j] as f64;
            ln_choose(&lf, n, j.min(n - j)) + beta * s * s / (2.0 * n as f64)
        })
        .collect();
    // normalize relative to the largest weight so the probabilities sum to 1 without
    // inheriting the rounding of log_z, which is of order n
    let top = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rel: Vec<f64> = log_weights.iter().map(|l| (l - top).exp()).collect();
    let mass = compensated_sum(rel.iter().copied());
    let log_z = top + mass.ln();
    let probs = rel.iter().map(|r| r / mass).collect();
    Ok(CwMagnetizationPmf { n, beta, totals, log_weights, probs, log_z })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CwMoments {
    /// `E[S/√n]` (zero by symmetry).
    pub m1: f64,
    /// `E[n M²] = E[S²]/n`.
    pub e_nm2: f64,
    /// `E[(S/√n)^4]`.
    pub m4: f64,
    /// `E[√n M²] = E[S²]/n^{3/2}`.
    pub e_sqrtn_m2: f64,
    /// `E[S⁴] / (3 E[S²]²)`.
    pub lebowitz_ratio: f64,
}

/// `E[(S/√n)^r]` for `r ∈ {1, 2, 4}`.
pub fn cw_moment(n: usize, beta: f64, r: u32) -> Result<f64> {
    let m = cw_moments(n, beta)?;
    match r {
        1 => Ok(m.m1),
        2 => Ok(m.e_nm2),
        4 => Ok(m.m4),
        _ => Err(Error::InvalidParameter(format!("moment order must be 1, 2 or 4, got {r}"))),
    }
}

pub fn cw_moments(n: usize, beta: f64) -> Result<CwMoments> {
    let pmf = cw_magnetization_pmf(n, beta)?;
    let nf = n as f64;
    let s2 = pmf.expect(|s| (s * s) as f64);
    let s4 = pmf.expect(|s| ((s * s) as f64).powi(2));
    Ok(CwMoments {
        m1: pmf.expect(|s| s as f64) / nf.sqrt(),
        e_nm2: s2 / nf,
        m4: s4 / (nf * nf),
        e_sqrtn_m2: s2 / nf.powf(1.5),
        lebowitz_ratio: s4 / (3.0 * s2 * s2),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CwEntropy {
    /// Entropy of the full configuration in bits.
    pub h_bits: f64,
    /// `n − H`.
    pub deficit: f64,
}

/// `H = H(S) + Σ_s P[S=s] log₂ C(n, (n+s)/2)`: given `S` the configuration is uniform.
pub fn cw_entropy(n: usize, beta: f64) -> Result<CwEntropy> {
    let pmf = cw_magnetization_pmf(n, beta)?;
    let lf = ln_factorials(n);
    let h_nats = compensated_sum((0..=n).filter(|&j| pmf.probs[j] > 0.0).map(|j| {
        let p = pmf.probs[j];
        p * (ln_choose(&lf, n, j) - p.ln())
    }));
    let h_bits = h_nats / LN_2;
    Ok(CwEntropy { h_bits, deficit: n as f64 - h_bits })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CwRelativeEntropy {
    /// `D(σ^β ∥ σ^0)` in bits, computed directly from the pmf.
    pub d_bits: f64,
    /// `(log₂ e)(β/2) E[n M²]`.
    pub bound_bits: f64,
    /// `log₂(Z_β / Z_0) ≥ 0`.
    pub gap_bits: f64,
}

pub fn cw_relative_entropy(n: usize, beta: f64) -> Result<CwRelativeEntropy> {
    let pmf = cw_magnetization_pmf(n, beta)?;
    let lf = ln_factorials(n);
    let nf = n as f64;
    // D = Σ_S P[S] log₂(P[S] / P_0[S]), the within-level laws being uniform under both measures
    let d_bits = compensated_sum((0..=n).filter(|&j| pmf.probs[j] > 0.0).map(|j| {
        let log_p0 = ln_choose(&lf, n, j) - nf * LN_2;
        pmf.probs[j] * (pmf.probs[j].ln() - log_p0)
    })) / LN_2;
    let e_nm2 = pmf.expect(|s| (s * s) as f64) / nf;
    Ok(CwRelativeEntropy {
        d_bits,
        bound_bits: LOG2_E * beta / 2.0 * e_nm2,
        gap_bits: (pmf.log_z - nf * LN_2) / LN_2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CwTarget {
    /// Average magnetization `M = S/n`.
    M,
    /// `sign(S)` with ties to −1.
    Maj,
}

/// Joint law of the observed sum `a` (over `k` spins) and hidden sum `b`.
struct Joint {
    k: usize,
    rest: usize,
    /// `ln P[i plus observed, j plus hidden]`, row-major in `(i, j)`.
    log_p: Vec<f64>,
}

impl Joint {
    fn new(n: usize, beta: f64, k: usize) -> Result<Self> {
        check(n, beta)?;
        if k > n {
            return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
        }
        let lf = ln_factorials(n);
        let rest = n - k;
        let nf = n as f64;
        let mut log_p = Vec::with_capacity((k + 1) * (rest + 1));
        let lck: Vec<f64> = (0..=k).map(|i| ln_choose(&lf, k, i)).collect();
        let lcr: Vec<f64> = (0..=rest).map(|j| ln_choose(&lf, rest, j)).collect();
        for i in 0..=k {
            for j in 0..=rest {
                let s = (2 * (i + j)) as f64 - nf;
                log_p.push(lck[i] + lcr[j] + beta * s * s / (2.0 * nf));
            }
        }
        let log_z = log_sum_exp(&log_p);
        log_p.iter_mut().for_each(|l| *l -= log_z);
        Ok(Self { k, rest, log_p })
    }

    fn total(&self, i: usize, j: usize) -> i64 {
        2 * (i + j) as i64 - (self.k + self.rest) as i64
    }

    fn observed(&self, i: usize) -> i64 {
        2 * i as i64 - self.k as i64
    }

    /// For each observed count `i`: `(P[a], E[t | a])`.
    fn conditional_means<F: Fn(i64) -> f64>(&self, t: F) -> Vec<(f64, f64)> {
        (0..=self.k)
            .map(|i| {
                let row = &self.log_p[i * (self.rest + 1)..(i + 1) * (self.rest + 1)];
                let (mut p, mut pt) = (0.0, 0.0);
                for (j, &l) in row.iter().enumerate() {
                    let w = l.exp();
                    p += w;
                    pt += w * t(self.total(i, j));
                }
                (p, if p > 0.0 { pt / p } else { 0.0 })
            })
            .collect()
    }
}

fn target_fn(n: usize, target: CwTarget) -> impl Fn(i64) -> f64 {
    move |s| match target {
        CwTarget::M => s as f64 / n as f64,
        CwTarget::Maj => majority_sign(s),
    }
}

/// Exact `clue(target | σ_U)` for any `U` with `|U| = k`.
pub fn cw_exact_clue(n: usize, beta: f64, k: usize, target: CwTarget) -> Result<f64> {
    let joint = Joint::new(n, beta, k)?;
    let rows = joint.conditional_means(target_fn(n, target));
    let mean: f64 = rows.iter().map(|(p, m)| p * m).sum();
    let explained: f64 = rows.iter().map(|(p, m)| p * (m - mean) * (m - mean)).sum();
    let pmf = cw_magnetization_pmf(n, beta)?;
    let t = target_fn(n, target);
    let var = pmf.expect(|s| (t(s) - mean).powi(2));
    if var <= 0.0 {
        return Ok(0.0);
    }
    Ok((explained / var).clamp(0.0, 1.0))
}

fn binary_entropy(p: f64) -> f64 {
    entropy_bits(&[p, 1.0 - p])
}

/// `I(Maj; σ_U) / H(Maj)` for `|U| = k`; the observed sum is sufficient.
pub fn cw_iclue(n: usize, beta: f64, k: usize) -> Result<f64> {
    let joint = Joint::new(n, beta, k)?;
    let rows = joint.conditional_means(|s| if s > 0 { 1.0 } else { 0.0 });
    let p_plus: f64 = rows.iter().map(|(p, q)| p * q).sum();
    let h = binary_entropy(p_plus);
    if h <= 0.0 {
        return Err(Error::Degenerate("H(Maj) = 0".into()));
    }
    let cond: f64 = rows.iter().map(|&(p, q)| p * binary_entropy(q.clamp(0.0, 1.0))).sum();
    Ok(((h - cond) / h).clamp(0.0, 1.0))
}

/// The large-entropy upper bound `(k/n)(1 + D/H(Maj))` on the I-clue.
pub fn cw_iclue_bound(n: usize, beta: f64, k: usize) -> Result<f64> {
    let pmf = cw_magnetization_pmf(n, beta)?;
    let p_plus = pmf.expect(|s| if s > 0 { 1.0 } else { 0.0 });
    let h = binary_entropy(p_plus);
    if h <= 0.0 {
        return Err(Error::Degenerate("H(Maj) = 0".into()));
    }
    let d = cw_relative_entropy(n, beta)?.d_bits;
    Ok(k as f64 / n as f64 * (1.0 + d / h))
}

/// `P[sign(observed sum) = Maj]` with both signs using the tie rule `sign(0) = −1`.
pub fn cw_majority_guess_success(n: usize, beta: f64, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let joint = Joint::new(n, beta, k)?;
    let mut success = 0.0;
    for i in 0..=k {
        let guess = majority_sign(joint.observed(i));
        for j in 0..=joint.rest {
            if majority_sign(joint.total(i, j)) == guess {
                success += joint.log_p[i * (joint.rest + 1) + j].exp();
            }
        }
    }
    Ok(success.min(1.0))
}

/// Smallest `k` with `clue(target | k) ≥ level`, by bisection (the clue is
/// nondecreasing in `k`). `None` if even `k = n` falls short.
pub fn cw_threshold_k(n: usize, beta: f64, target: CwTarget, level: f64) -> Result<Option<usize>> {
    if cw_exact_clue(n, beta, n, target)? < level {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0usize, n);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if cw_exact_clue(n, beta, mid, target)? >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if cw_exact_clue(n, beta, lo, target)? >= level {
        Ok(Some(lo))
    } else {
        Ok(Some(hi))
    }
}

/// Exact conditional sampler for the hidden spins: given the observed sum `a`
/// over `k` spins, draw the number of plus spins among the `n − k` others.
pub fn sample_hidden_plus_count(n: usize, beta: f64, k: usize, observed_sum: i64, rng: &mut SpinRng) -> usize {
    let rest = n - k;
    let lf = ln_factorials(rest);
    let nf = n as f64;
    let lw: Vec<f64> = (0..=rest)
        .map(|j| {
            let s = (observed_sum + 2 * j as i64 - rest as i64) as f64;
            ln_choose(&lf, rest, j) + beta * s * s / (2.0 * nf)
        })
        .collect();
    let lz = log_sum_exp(&lw);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (j, l) in lw.iter().enumerate() {
        acc += (l - lz).exp();
        if u < acc {
            return j;
        }
    }
    rest
}

/// Place `plus` plus spins uniformly among `positions`; the rest become minus.
pub fn scatter_plus(positions: &[usize], plus: usize, rng: &mut SpinRng) -> Vec<(usize, i8)> {
    let chosen = index::sample(rng, positions.len(), plus);
    let mut spins: Vec<(usize, i8)> = positions.iter().map(|&v| (v, -1)).collect();
    for i in chosen.iter() {
        spins[i].1 = 1;
    }
    spins
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn beta_zero_is_binomial() {
        let pmf = cw_magnetization_pmf(10, 0.0).unwrap();
        for j in 0..=10 {
            assert!((pmf.probs[j] - binom(10, j as u64) / 1024.0).abs() < 1e-14);
        }
        assert!((pmf.log_z - 10.0 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn two_spin_ratios() {
        let beta: f64 = 0.7;
        let pmf = cw_magnetization_pmf(2, beta).unwrap();
        // S = ±2 each carry one configuration; S = 0 carries two
        assert!((pmf.probs[2] / pmf.probs[1] - beta.exp() / 2.0).abs() < 1e-12);
        assert!(((pmf.probs[0] + pmf.probs[2]) / pmf.probs[1] - beta.exp()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_normalized() {
        for (n, beta) in [(7, 0.3), (50, 1.0), (501, 1.5)] {
            let pmf = cw_magnetization_pmf(n, beta).unwrap();
            assert!((pmf.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for j in 0..=n {
                assert!((pmf.probs[j] - pmf.probs[n - j]).abs() <= 1e-13 * pmf.probs[j].max(1e-300));
            }
        }
    }

    #[test]
    fn moments_at_beta_zero() {
        let m = cw_moments(40, 0.0).unwrap();
        assert!((m.e_nm2 - 1.0).abs() < 1e-12);
        assert!(m.m1.abs() < 1e-12);
        assert!(m.lebowitz_ratio <= 1.0);
        assert!(cw_moment(5, 0.1, 3).is_err());
    }

    #[test]
    fn entropy_identities() {
        let e = cw_entropy(30, 0.0).unwrap();
        assert!((e.h_bits - 30.0).abs() < 1e-10);
        for (n, beta) in [(10, 0.5), (200, 1.0), (1000, 1.5)] {
            let e = cw_entropy(n, beta).unwrap();
            let r = cw_relative_entropy(n, beta).unwrap();
            assert!((r.d_bits - e.deficit).abs() < 1e-9);
            assert!((r.d_bits + r.gap_bits - r.bound_bits).abs() < 1e-9);
            assert!(r.gap_bits >= 0.0);
        }
        assert!(cw_relative_entropy(25, 0.0).unwrap().d_bits.abs() < 1e-12);
    }

    #[test]
    fn clue_edge_cases() {
        for t in [CwTarget::M, CwTarget::Maj] {
            assert!(cw_exact_clue(12, 0.8, 0, t).unwrap().abs() < 1e-12);
            assert!((cw_exact_clue(12, 0.8, 12, t).unwrap() - 1.0).abs() < 1e-12);
        }
        for k in 0..=9 {
            assert!((cw_exact_clue(9, 0.0, k, CwTarget::M).unwrap() - k as f64 / 9.0).abs() < 1e-12);
        }
        assert!(cw_iclue(10, 0.5, 0).unwrap().abs() < 1e-12);
        assert!((cw_iclue(10, 0.5, 10).unwrap() - 1.0).abs() < 1e-12);
        assert!((cw_majority_guess_success(10, 0.5, 10).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_spin_guess_at_beta_zero() {
        // P[σ_1 agrees with the majority of n IID spins] by direct binomial sums
        let n = 101usize;
        let p = cw_majority_guess_success(n, 0.0, 1).unwrap();
        let rest = n - 1;
        let mut direct = 0.0;
        for j in 0..=rest {
            let pj = binom(rest as u64, j as u64) / 2f64.powi(rest as i32);
            let b = 2 * j as i64 - rest as i64;
            if b + 1 > 0 {
                direct += 0.5 * pj;
            }
            if b - 1 <= 0 {
                direct += 0.5 * pj;
            }
        }
        assert!((p - direct).abs() < 1e-12);
        assert!(p > 0.5 && p < 0.6);
    }

    #[test]
    fn threshold_is_minimal() {
        let k = cw_threshold_k(200, 1.0, CwTarget::Maj, 0.5).unwrap().unwrap();
        assert!(cw_exact_clue(200, 1.0, k, CwTarget::Maj).unwrap() >= 0.5);
        assert!(cw_exact_clue(200, 1.0, k - 1, CwTarget::Maj).unwrap() < 0.5);
    }
}
