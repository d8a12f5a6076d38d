//! Exact probability tables, observables and the classical Fourier-Walsh layer.
//!
//! A configuration of `n ≤ 64` spins is encoded as a bitmask with bit `v`
//! set iff `σ_v = +1`. Tables and tabulated observables are vectors indexed
//! by that mask.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dac::{bond_support, cluster_vertex_masks, BondDistribution};
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::ising::{hamiltonian_bits, IsingParams};
use crate::rng::SpinRng;
use crate::spin::SpinConfig;

/// Default largest vertex count for exact tables.
pub const DEFAULT_EXACT_CAP: usize = 20;
/// Largest vertex count accepted when the cap is raised explicitly.
pub const EXTENDED_EXACT_CAP: usize = 24;

/// Support cap for exact bond enumeration in Divide-and-Color tables.
pub const MAX_EXACT_BOND_EDGES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Product,
    Ising,
    CurieWeiss,
    Dac,
    Custom,
}

impl TableKind {
    fn code(self) -> u8 {
        match self {
            TableKind::Product => 0,
            TableKind::Ising => 1,
            TableKind::CurieWeiss => 2,
            TableKind::Dac => 3,
            TableKind::Custom => 4,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => TableKind::Product,
            1 => TableKind::Ising,
            2 => TableKind::CurieWeiss,
            3 => TableKind::Dac,
            4 => TableKind::Custom,
            _ => return None,
        })
    }
}

/// A spin measure that can be tabulated exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// Independent spins with `P[σ_v = +1] = p_plus` (or `per_vertex[v]`).
    Product {
        #[serde(default = "half")]
        p_plus: f64,
        #[serde(default)]
        per_vertex: Option<Vec<f64>>,
    },
    Ising(IsingParams),
    /// Ising model on the complete graph with couplings `1/n`.
    CurieWeiss { beta: f64 },
    /// Divide-and-Color: clusters of a random bond set, one fair coin per cluster.
    Dac { bonds: BondDistribution },
}

fn half() -> f64 {
    0.5
}

impl MeasureSpec {
    pub fn uniform() -> Self {
        MeasureSpec::Product { p_plus: 0.5, per_vertex: None }
    }

    pub fn ising(beta: f64) -> Self {
        MeasureSpec::Ising(IsingParams::new(beta))
    }
}

/// Explicit distribution over all `2^n` configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTable {
    n: usize,
    kind: TableKind,
    probs: Vec<f64>,
}

impl ProbabilityTable {
    /// Normalize nonnegative weights.
    pub fn from_weights(n: usize, kind: TableKind, weights: Vec<f64>) -> Result<Self> {
        check_len(n, weights.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NotNormalizable);
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::NotNormalizable);
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { n, kind, probs })
    }

    /// Normalize log-weights after shifting by their maximum.
    pub fn from_log_weights(n: usize, kind: TableKind, log_w: Vec<f64>) -> Result<Self> {
        check_len(n, log_w.len())?;
        let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::NotNormalizable);
        }
        Self::from_weights(n, kind, log_w.into_iter().map(|l| (l - max).exp()).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        check_cap(n, DEFAULT_EXACT_CAP)?;
        Ok(Self { n, kind: TableKind::Product, probs: vec![1.0 / (1u64 << n) as f64; 1 << n] })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn expect(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    pub fn variance(&self, values: &[f64]) -> f64 {
        let m = self.expect(values);
        self.probs.iter().zip(values).map(|(p, v)| p * (v - m) * (v - m)).sum::<f64>().max(0.0)
    }

    pub fn covariance(&self, f: &[f64], g: &[f64]) -> f64 {
        let (mf, mg) = (self.expect(f), self.expect(g));
        self.probs.iter().zip(f.iter().zip(g)).map(|(p, (a, b))| p * (a - mf) * (b - mg)).sum()
    }

    /// `P[σ_v = +1]` for each vertex.
    pub fn marginals_plus(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n];
        for (x, &p) in self.probs.iter().enumerate() {
            for (v, mv) in m.iter_mut().enumerate() {
                if x >> v & 1 == 1 {
                    *mv += p;
                }
            }
        }
        m
    }

    pub fn entropy_bits(&self) -> f64 {
        crate::stats::entropy_bits(&self.probs)
    }

    /// Draw one configuration by inversion.
    pub fn sample(&self, rng: &mut SpinRng) -> u64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (x, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return x as u64;
            }
        }
        (self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)) as u64
    }

    /// `index,value` rows with a header line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_indexed_csv(w, &self.probs)
    }

    /// Little-endian dump: magic `SPTB`, version u16, n u32, kind u8, then `2^n` f64s.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"SPTB")?;
        w.write_all(&1u16.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&[self.kind.code()])?;
        for p in &self.probs {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| Error::InvalidParameter(format!("table dump: {m}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"SPTB" {
            return Err(bad("bad magic"));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        if u16::from_le_bytes(b2) != 1 {
            return Err(bad("unsupported version"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        check_cap(n, EXTENDED_EXACT_CAP)?;
        let mut k = [0u8; 1];
        r.read_exact(&mut k)?;
        let kind = TableKind::from_code(k[0]).ok_or_else(|| bad("unknown kind"))?;
        let mut probs = vec![0.0; 1 << n];
        let mut b8 = [0u8; 8];
        for p in probs.iter_mut() {
            r.read_exact(&mut b8)?;
            *p = f64::from_le_bytes(b8);
        }
        Ok(Self { n, kind, probs })
    }
}

fn check_len(n: usize, len: usize) -> Result<()> {
    check_cap(n, EXTENDED_EXACT_CAP)?;
    if len != 1 << n {
        return Err(Error::DimensionMismatch { expected: 1 << n, got: len });
    }
    Ok(())
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::CapExceeded { n, cap })
    } else {
        Ok(())
    }
}

/// Write `index,value` rows.
pub fn write_indexed_csv<W: Write>(mut w: W, values: &[f64]) -> Result<()> {
    writeln!(w, "index,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    Ok(())
}

/// Exact table under the default cap.
pub fn exact_table(measure: &MeasureSpec, graph: &Graph) -> Result<ProbabilityTable> {
    exact_table_with_cap(measure, graph, DEFAULT_EXACT_CAP)
}

/// Exact table with an explicit vertex cap (at most [`EXTENDED_EXACT_CAP`]).
pub fn exact_table_with_cap(measure: &MeasureSpec, graph: &Graph, cap: usize) -> Result<ProbabilityTable> {
    let n = graph.n_vertices();
    check_cap(n, cap.min(EXTENDED_EXACT_CAP))?;
    let size = 1usize << n;
    match measure {
        MeasureSpec::Product { p_plus, per_vertex } => {
            let p: Vec<f64> = match per_vertex {
                Some(pv) if pv.len() != n => return Err(Error::DimensionMismatch { expected: n, got: pv.len() }),
                Some(pv) => pv.clone(),
                None => vec![*p_plus; n],
            };
            if p.iter().any(|q| !(0.0..=1.0).contains(q)) {
                return Err(Error::InvalidParameter("product marginals must lie in [0, 1]".into()));
            }
            let w = (0..size)
                .into_par_iter()
                .map(|x| (0..n).map(|v| if x >> v & 1 == 1 { p[v] } else { 1.0 - p[v] }).product())
                .collect();
            ProbabilityTable::from_weights(n, TableKind::Product, w)
        }
        MeasureSpec::Ising(params) => {
            params.validate()?;
            let lw = (0..size as u64)
                .into_par_iter()
                .map(|x| -params.beta * hamiltonian_bits(graph, params, x))
                .collect();
            ProbabilityTable::from_log_weights(n, TableKind::Ising, lw)
        }
        MeasureSpec::CurieWeiss { beta } => {
            if !beta.is_finite() || *beta < 0.0 {
                return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
            }
            let lw = (0..size as u64)
                .into_par_iter()
                .map(|x| {
                    let s = 2.0 * x.count_ones() as f64 - n as f64;
                    beta * s * s / (2.0 * n as f64)
                })
                .collect();
            ProbabilityTable::from_log_weights(n, TableKind::CurieWeiss, lw)
        }
        MeasureSpec::Dac { bonds } => {
            let support = bond_support(bonds, graph, MAX_EXACT_BOND_EDGES)?;
            let mut w = vec![0.0; size];
            for (edges, nu) in support {
                let clusters = cluster_vertex_masks(graph, edges);
                let k = clusters.len();
                let share = nu / (1u64 << k) as f64;
                for c in 0..(1u64 << k) {
                    let x = clusters
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| c >> j & 1 == 1)
                        .fold(0u64, |acc, (_, m)| acc | m);
                    w[x as usize] += share;
                }
            }
            ProbabilityTable::from_weights(n, TableKind::Dac, w)
        }
    }
}

// ---------------------------------------------------------------------------
// Observables

pub type CustomFn = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

/// A real function of a spin configuration.
#[derive(Clone)]
pub enum Observable {
    /// `S = Σ σ_v`.
    TotalSum,
    /// `M = S / n`.
    Magnetization,
    /// `sign(S)` with `sign(0) = −1`.
    Majority,
    /// `χ_S = Π_{v∈S} σ_v`.
    Parity(Vec<usize>),
    SingleSpin(usize),
    /// Indicator of a set of configuration masks (kept sorted).
    Indicator(Vec<u64>),
    /// Callback on configuration masks; only for `n ≤ 64`.
    Custom(CustomFn),
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::TotalSum => write!(f, "TotalSum"),
            Observable::Magnetization => write!(f, "Magnetization"),
            Observable::Majority => write!(f, "Majority"),
            Observable::Parity(s) => write!(f, "Parity({s:?})"),
            Observable::SingleSpin(v) => write!(f, "SingleSpin({v})"),
            Observable::Indicator(s) => write!(f, "Indicator({} configs)", s.len()),
            Observable::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Majority sign with ties broken to −1.
#[inline]
pub fn majority_sign(total: i64) -> f64 {
    if total > 0 {
        1.0
    } else {
        -1.0
    }
}

impl Observable {
    pub fn custom<F: Fn(u64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Observable::Custom(Arc::new(f))
    }

    pub fn indicator(mut configs: Vec<u64>) -> Self {
        configs.sort_unstable();
        configs.dedup();
        Observable::Indicator(configs)
    }

    /// Value on the configuration encoded by `x` over `n` spins.
    pub fn eval_bits(&self, x: u64, n: usize) -> f64 {
        let total = || 2 * x.count_ones() as i64 - n as i64;
        match self {
            Observable::TotalSum => total() as f64,
            Observable::Magnetization => total() as f64 / n as f64,
            Observable::Majority => majority_sign(total()),
            Observable::Parity(set) => {
                let minus = set.iter().filter(|&&v| x >> v & 1 == 0).count();
                if minus % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Observable::SingleSpin(v) => {
                if x >> v & 1 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            Observable::Indicator(set) => {
                if set.binary_search(&x).is_ok() {
                    1.0
                } else {
                    0.0
                }
            }
            Observable::Custom(f) => f(x),
        }
    }

    pub fn eval(&self, config: &SpinConfig) -> f64 {
        let n = config.len();
        match self {
            Observable::TotalSum => config.total() as f64,
            Observable::Magnetization => config.total() as f64 / n as f64,
            Observable::Majority => majority_sign(config.total()),
            Observable::Parity(set) => set.iter().map(|&v| config.get(v) as f64).product(),
            Observable::SingleSpin(v) => config.get(*v) as f64,
            Observable::Indicator(_) | Observable::Custom(_) => {
                assert!(n <= 64, "mask-based observables need n <= 64");
                self.eval_bits(config.to_bits(), n)
            }
        }
    }

    /// Values on all `2^n` configurations.
    pub fn tabulate(&self, n: usize) -> Result<Vec<f64>> {
        check_cap(n, EXTENDED_EXACT_CAP)?;
        let out_of_range = match self {
            Observable::Parity(set) => set.iter().any(|&v| v >= n),
            Observable::SingleSpin(v) => *v >= n,
            _ => false,
        };
        if out_of_range {
            return Err(Error::InvalidParameter("observable refers to a vertex outside the graph".into()));
        }
        Ok((0..1u64 << n).into_par_iter().map(|x| self.eval_bits(x, n)).collect())
    }
}

/// Susceptibility computed two ways on a transitive graph.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Susceptibility {
    /// `Σ_v Cov(σ_o, σ_v)` with `o` the vertex 0.
    pub chi: f64,
    /// `|V|·Var(M)`.
    pub n_var_m: f64,
}

pub fn susceptibility(table: &ProbabilityTable, graph: &Graph) -> Result<Susceptibility> {
    let n = table.n();
    if graph.n_vertices() != n {
        return Err(Error::DimensionMismatch { expected: graph.n_vertices(), got: n });
    }
    graph.translations().ok_or(Error::MissingTranslations)?;
    let s0 = Observable::SingleSpin(0).tabulate(n)?;
    let mut chi = 0.0;
    for v in 0..n {
        chi += table.covariance(&s0, &Observable::SingleSpin(v).tabulate(n)?);
    }
    let m = Observable::Magnetization.tabulate(n)?;
    Ok(Susceptibility { chi, n_var_m: n as f64 * table.variance(&m) })
}

// ---------------------------------------------------------------------------
// Fourier-Walsh

/// Coefficients `f̂(S) = 2^{-n} Σ_x f(x) χ_S(x)`, indexed by the mask of `S`.
pub fn walsh_transform(values: &[f64]) -> Result<Vec<f64>> {
    let len = values.len();
    if !len.is_power_of_two() {
        return Err(Error::InvalidParameter("table length must be a power of two".into()));
    }
    let n = len.trailing_zeros() as usize;
    check_cap(n, EXTENDED_EXACT_CAP)?;
    let mask = len - 1;
    // index by the set of minus spins so the plain Hadamard kernel applies
    let mut a: Vec<f64> = (0..len).map(|y| values[mask ^ y]).collect();
    fwht(&mut a);
    let scale = 1.0 / len as f64;
    a.iter_mut().for_each(|c| *c *= scale);
    Ok(a)
}

/// Values from coefficients: `f(x) = Σ_S f̂(S) χ_S(x)`.
pub fn inverse_walsh(coeffs: &[f64]) -> Result<Vec<f64>> {
    let len = coeffs.len();
    if !len.is_power_of_two() {
        return Err(Error::InvalidParameter("table length must be a power of two".into()));
    }
    let mut a = coeffs.to_vec();
    fwht(&mut a);
    let mask = len - 1;
    Ok((0..len).map(|x| a[mask ^ x]).collect())
}

fn fwht(a: &mut [f64]) {
    let mut h = 1;
    while h < a.len() {
        for block in a.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h *= 2;
    }
}

/// `P[S_f ⊆ U | S_f ≠ ∅]` from Walsh coefficients; 0 for constant `f`.
pub fn clue_fourier(coeffs: &[f64], u: u64) -> f64 {
    let (mut inside, mut total) = (0.0, 0.0);
    for (s, c) in coeffs.iter().enumerate().skip(1) {
        let w = c * c;
        total += w;
        if s as u64 & !u == 0 {
            inside += w;
        }
    }
    if total <= 0.0 {
        0.0
    } else {
        inside / total
    }
}

/// Law of the spectral sample of `f` under the uniform product measure.
#[derive(Clone, Debug)]
pub struct SpectralSample {
    masks: Vec<u64>,
    cumulative: Vec<f64>,
    probs: Vec<f64>,
}

impl SpectralSample {
    /// Distribution `f̂(S)² / Σ_T f̂(T)²` over all `S`, including `∅`.
    pub fn from_coefficients(coeffs: &[f64]) -> Result<Self> {
        if coeffs.iter().skip(1).all(|c| c * c == 0.0) {
            return Err(Error::Degenerate("spectral sample of a constant function".into()));
        }
        let total: f64 = coeffs.iter().map(|c| c * c).sum();
        let mut masks = Vec::new();
        let mut probs = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (s, c) in coeffs.iter().enumerate() {
            if *c != 0.0 {
                let p = c * c / total;
                acc += p;
                masks.push(s as u64);
                probs.push(p);
                cumulative.push(acc);
            }
        }
        Ok(Self { masks, cumulative, probs })
    }

    pub fn support(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.masks.iter().cloned().zip(self.probs.iter().cloned())
    }

    pub fn sample(&self, rng: &mut SpinRng) -> u64 {
        let u: f64 = rng.gen::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.masks.len() - 1);
        self.masks[i]
    }
}

/// One draw of the spectral sample of the tabulated function `values`.
pub fn spectral_sample_product(values: &[f64], rng: &mut SpinRng) -> Result<u64> {
    Ok(SpectralSample::from_coefficients(&walsh_transform(values)?)?.sample(rng))
}

// ---------------------------------------------------------------------------
// Parity-cycle FFIID demo

/// Deterministic factor map on the cycle: `σ_i` is the common value of the
/// first equal consecutive pair found scanning forward from `i`. A fully
/// alternating input has no such pair and is copied unchanged.
pub fn ffiid_parity_cycle(omega: &[i8]) -> Vec<i8> {
    let len = omega.len();
    // next_pair[i]: value of the first equal pair starting at or after i
    let starts: Vec<usize> = (0..len).filter(|&i| omega[i] == omega[(i + 1) % len]).collect();
    if starts.is_empty() {
        return omega.to_vec();
    }
    let mut sigma = vec![0i8; len];
    let mut next = starts[0] + len;
    for i in (0..len).rev() {
        if omega[i] == omega[(i + 1) % len] {
            next = i;
        }
        sigma[i] = omega[next % len];
    }
    sigma
}

/// IID fair bits on the cycle of length `2·n_half`, pushed through [`ffiid_parity_cycle`].
pub fn sample_ffiid_parity_cycle(n_half: usize, rng: &mut SpinRng) -> Result<SpinConfig> {
    if n_half < 2 {
        return Err(Error::InvalidParameter("n_half must be >= 2".into()));
    }
    let omega: Vec<i8> = (0..2 * n_half).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    Ok(SpinConfig::from_spins(&ffiid_parity_cycle(&omega)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn uniform_product_table() {
        let g = Graph::path(2).unwrap();
        let t = exact_table(&MeasureSpec::uniform(), &g).unwrap();
        assert_eq!(t.probs(), &[0.25; 4]);
    }

    #[test]
    fn curie_weiss_two_spins() {
        let beta: f64 = 0.8;
        let t = exact_table(&MeasureSpec::CurieWeiss { beta }, &Graph::complete(2).unwrap()).unwrap();
        let p = t.probs();
        assert!((p[0b11] / p[0b01] - beta.exp()).abs() < 1e-12);
        assert!((p[0b00] - p[0b11]).abs() < 1e-15);
        assert!((p[0b10] - p[0b01]).abs() < 1e-15);
    }

    #[test]
    fn ising_beta_zero_is_uniform() {
        let g = Graph::path(2).unwrap();
        let params = IsingParams { beta: 0.0, j: 3.0, h: 0.0 };
        let t = exact_table(&MeasureSpec::Ising(params), &g).unwrap();
        assert!(t.probs().iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn cap_and_normalization_errors() {
        let g = Graph::cycle(21).unwrap();
        assert!(matches!(exact_table(&MeasureSpec::uniform(), &g), Err(Error::CapExceeded { .. })));
        assert!(matches!(
            ProbabilityTable::from_weights(1, TableKind::Custom, vec![0.0, 0.0]),
            Err(Error::NotNormalizable)
        ));
    }

    #[test]
    fn observable_examples() {
        let c = SpinConfig::from_spins(&[1, 1, -1, -1]);
        assert_eq!(Observable::Magnetization.eval(&c), 0.0);
        assert_eq!(Observable::Majority.eval(&SpinConfig::from_spins(&[1, -1])), -1.0);
        let c = SpinConfig::from_spins(&[1, -1, 1]);
        assert_eq!(Observable::Parity(vec![0, 1]).eval(&c), -1.0);
        for x in 0..8u64 {
            let c = SpinConfig::from_bits(3, x);
            for obs in [Observable::Majority, Observable::Parity(vec![1, 2]), Observable::TotalSum] {
                assert_eq!(obs.eval(&c), obs.eval_bits(x, 3));
            }
        }
    }

    #[test]
    fn susceptibility_examples() {
        let g = Graph::cycle(5).unwrap();
        let s = susceptibility(&exact_table(&MeasureSpec::uniform(), &g).unwrap(), &g).unwrap();
        assert!((s.chi - 1.0).abs() < 1e-12);
        let g = Graph::complete(2).unwrap();
        let s = susceptibility(&exact_table(&MeasureSpec::CurieWeiss { beta: 0.0 }, &g).unwrap(), &g).unwrap();
        assert!((s.chi - 1.0).abs() < 1e-12);
        let g = Graph::cycle(6).unwrap();
        let s = susceptibility(&exact_table(&MeasureSpec::ising(0.3), &g).unwrap(), &g).unwrap();
        assert!((s.chi - s.n_var_m).abs() < 1e-9);
        assert!(s.chi > 1.0);
        let g = Graph::path(3).unwrap();
        let t = exact_table(&MeasureSpec::uniform(), &g).unwrap();
        assert!(matches!(susceptibility(&t, &g), Err(Error::MissingTranslations)));
    }

    #[test]
    fn walsh_examples() {
        let c = walsh_transform(&Observable::SingleSpin(0).tabulate(3).unwrap()).unwrap();
        for (s, v) in c.iter().enumerate() {
            assert_eq!(*v, if s == 1 { 1.0 } else { 0.0 });
        }
        let c = walsh_transform(&Observable::Majority.tabulate(3).unwrap()).unwrap();
        let expected = [0.0, 0.5, 0.5, 0.0, 0.5, 0.0, 0.0, -0.5];
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let c = walsh_transform(&[2.5; 8]).unwrap();
        assert_eq!(c[0], 2.5);
        assert!(c[1..].iter().all(|&v| v == 0.0));
        let back = inverse_walsh(&walsh_transform(&[1.0, -2.0, 0.5, 3.0]).unwrap()).unwrap();
        assert_eq!(back, vec![1.0, -2.0, 0.5, 3.0]);
    }

    #[test]
    fn walsh_matches_direct_sum() {
        let n = 4;
        let f: Vec<f64> = (0..16).map(|x| ((x * 7 + 3) % 11) as f64 - 4.0).collect();
        let c = walsh_transform(&f).unwrap();
        for s in 0..16usize {
            let direct: f64 = (0..16usize)
                .map(|x| {
                    let chi = Observable::Parity((0..n).filter(|v| s >> v & 1 == 1).collect()).eval_bits(x as u64, n);
                    f[x] * chi
                })
                .sum::<f64>()
                / 16.0;
            assert!((direct - c[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_sample_examples() {
        let mut rng = stream(5, 0);
        let f = Observable::SingleSpin(0).tabulate(3).unwrap();
        assert!((0..20).all(|_| spectral_sample_product(&f, &mut rng).unwrap() == 1));
        let f = Observable::Parity(vec![0, 1, 2]).tabulate(3).unwrap();
        assert!((0..20).all(|_| spectral_sample_product(&f, &mut rng).unwrap() == 7));
        assert!(spectral_sample_product(&[1.0; 8], &mut rng).is_err());
        let maj = walsh_transform(&Observable::Majority.tabulate(3).unwrap()).unwrap();
        assert!((clue_fourier(&maj, 0b001) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn parity_cycle_traces() {
        assert_eq!(ffiid_parity_cycle(&[1, 1, -1, -1]), vec![1, -1, -1, 1]);
        assert_eq!(ffiid_parity_cycle(&[1, -1, 1, -1]), vec![1, -1, 1, -1]);
        assert_eq!(ffiid_parity_cycle(&[-1, 1, 1, -1, 1, -1]), vec![1, 1, -1, -1, -1, -1]);
    }

    #[test]
    fn table_binary_roundtrip() {
        let g = Graph::cycle(4).unwrap();
        let t = exact_table(&MeasureSpec::ising(0.3), &g).unwrap();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 2 + 4 + 1 + 16 * 8);
        assert_eq!(ProbabilityTable::read_binary(&buf[..]).unwrap(), t);
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 17);
    }
}
