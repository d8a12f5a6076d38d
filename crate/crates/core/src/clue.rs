//! The clue functional `Var(E[f|F_U]) / Var(f)`, exact and Monte Carlo, its
//! information-theoretic variant, and the operators `P^U` and `M^U` built
//! from families of conditional expectations.
//!
//! Exact routines work on a [`ProbabilityTable`] with subsets given as
//! bitmasks over at most 64 vertices.

use std::collections::HashMap;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::curie_weiss::{cw_magnetization_pmf, sample_hidden_plus_count, scatter_plus, CwMagnetizationPmf};
use crate::error::{Error, Result};
use crate::graphs::{sample_subset, support_bits, Graph, SubsetMask, SubsetSpec};
use crate::ising::{glauber_sweep, swendsen_wang_step, ChainState, IsingParams, SW_BURN_IN};
use crate::measures::{majority_sign, Observable, ProbabilityTable};
use crate::rng::{substream, SpinRng};
use crate::spin::SpinConfig;
use crate::stats::{anova, bootstrap_groups_se, entropy_bits};

/// Largest subset support enumerated exactly.
pub const SUPPORT_CAP: u128 = 1_000_000;

const TASK_CLUE_GROUP: u32 = 11;
const TASK_CLUE_BOOT: u32 = 12;

/// Tolerance under which a variance counts as zero.
const VAR_EPS: f64 = 1e-13;

/// `E[f | F_U]` evaluated at every configuration.
pub fn conditional_expectation(table: &ProbabilityTable, f: &[f64], u: u64) -> Vec<f64> {
    let (num, den) = boundary_sums(table, f, u);
    (0..table.len())
        .map(|x| {
            let b = x & u as usize;
            if den[b] > 0.0 {
                num[b] / den[b]
            } else {
                0.0
            }
        })
        .collect()
}

/// `Σ_{x: x∩U = b} p(x) f(x)` and `Σ_{x: x∩U = b} p(x)`, indexed by the boundary `b`.
fn boundary_sums(table: &ProbabilityTable, f: &[f64], u: u64) -> (Vec<f64>, Vec<f64>) {
    let len = table.len();
    let mut num = vec![0.0; len];
    let mut den = vec![0.0; len];
    for (x, (&p, &v)) in table.probs().iter().zip(f).enumerate() {
        let b = x & u as usize;
        num[b] += p * v;
        den[b] += p;
    }
    (num, den)
}

/// `Var(E[f|F_U]) / Var(f)`; 0 for constant `f`.
pub fn clue_exact(table: &ProbabilityTable, f: &[f64], u: u64) -> f64 {
    let var = table.variance(f);
    if var <= VAR_EPS * (1.0 + table.expect(f).powi(2)) {
        return 0.0;
    }
    let mean = table.expect(f);
    let (num, den) = boundary_sums(table, f, u);
    let explained: f64 = num
        .iter()
        .zip(&den)
        .filter(|(_, &d)| d > 0.0)
        .map(|(&s, &d)| {
            let m = s / d - mean;
            d * m * m
        })
        .sum();
    (explained / var).clamp(0.0, 1.0)
}

/// Exact support of `spec` on `graph`, capped at [`SUPPORT_CAP`].
pub fn spec_support(spec: &SubsetSpec, graph: &Graph) -> Result<Vec<(u64, f64)>> {
    support_bits(spec, graph, SUPPORT_CAP)
}

/// `E[clue(f|U)]` by exact enumeration of the support.
pub fn expected_clue(table: &ProbabilityTable, f: &[f64], spec: &SubsetSpec, graph: &Graph) -> Result<f64> {
    check_graph(table, graph)?;
    Ok(expected_clue_on(table, f, &spec_support(spec, graph)?))
}

pub fn expected_clue_on(table: &ProbabilityTable, f: &[f64], support: &[(u64, f64)]) -> f64 {
    support.par_iter().map(|&(u, p)| p * clue_exact(table, f, u)).collect::<Vec<_>>().iter().sum()
}

/// Expected clue with `U` sampled; for supports too large to enumerate.
pub fn expected_clue_sampled(
    table: &ProbabilityTable,
    f: &[f64],
    spec: &SubsetSpec,
    graph: &Graph,
    replicas: usize,
    rng: &mut SpinRng,
) -> Result<ClueEstimate> {
    check_graph(table, graph)?;
    let mut values = Vec::with_capacity(replicas);
    for _ in 0..replicas {
        let u = sample_subset(spec, graph, rng)?.to_bits();
        values.push(clue_exact(table, f, u));
    }
    let (value, se) = crate::stats::mean_se(&values);
    Ok(ClueEstimate { value, se, outer: replicas, inner: 0, seed: None })
}

fn check_graph(table: &ProbabilityTable, graph: &Graph) -> Result<()> {
    if table.n() != graph.n_vertices() {
        return Err(Error::DimensionMismatch { expected: graph.n_vertices(), got: table.n() });
    }
    Ok(())
}

/// `I(f; σ_U) / H(f)` for discrete-valued `f`, in bits.
pub fn iclue_exact(table: &ProbabilityTable, f: &[f64], u: u64) -> Result<f64> {
    let mut levels: HashMap<u64, usize> = HashMap::new();
    let codes: Vec<usize> = f
        .iter()
        .map(|v| {
            let next = levels.len();
            *levels.entry(v.to_bits()).or_insert(next)
        })
        .collect();
    let k = levels.len();
    let mut pf = vec![0.0; k];
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut pb = vec![0.0; table.len()];
    for (x, &p) in table.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let b = x & u as usize;
        pf[codes[x]] += p;
        pb[b] += p;
        *joint.entry((codes[x], b)).or_insert(0.0) += p;
    }
    let h = entropy_bits(&pf);
    if h <= 1e-15 {
        return Err(Error::Degenerate("H(f) = 0".into()));
    }
    let mut keys: Vec<_> = joint.keys().copied().collect();
    keys.sort_unstable();
    let mi: f64 = keys
        .into_iter()
        .map(|(c, b)| {
            let p = joint[&(c, b)];
            p * (p / (pf[c] * pb[b])).log2()
        })
        .sum();
    Ok((mi / h).clamp(0.0, 1.0))
}

/// The family `Y_S` over an enumerated subset law.
#[derive(Clone, Debug)]
pub struct ConditionalFamily {
    pub support: Vec<(u64, f64)>,
    pub values: Vec<Vec<f64>>,
}

impl ConditionalFamily {
    /// `Y_S = E[f | F_S]`.
    pub fn conditional_means(table: &ProbabilityTable, f: &[f64], support: Vec<(u64, f64)>) -> Self {
        let values = support.par_iter().map(|&(s, _)| conditional_expectation(table, f, s)).collect();
        Self { support, values }
    }

    /// Arbitrary `F_S`-measurable variables (not checked).
    pub fn custom(support: Vec<(u64, f64)>, values: Vec<Vec<f64>>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: support.len(), got: values.len() });
        }
        Ok(Self { support, values })
    }
}

/// `P^U[Y] = Σ_S P[U=S] Y_S`.
pub fn apply_p_family(family: &ConditionalFamily) -> Vec<f64> {
    let len = family.values.first().map_or(0, |v| v.len());
    let mut out = vec![0.0; len];
    for ((_, p), y) in family.support.iter().zip(&family.values) {
        out.iter_mut().zip(y).for_each(|(o, v)| *o += p * v);
    }
    out
}

/// `P^U[f] = Σ_S P[U=S] E[f|F_S]`.
pub fn apply_p_operator(table: &ProbabilityTable, f: &[f64], support: &[(u64, f64)]) -> Vec<f64> {
    apply_p_family(&ConditionalFamily::conditional_means(table, f, support.to_vec()))
}

#[derive(Clone, Debug)]
pub struct MOperator {
    pub values: Vec<f64>,
    /// Subsets whose `Y_S` had zero variance and were left out.
    pub dropped: Vec<u64>,
}

/// `M^U[Y] = Σ_S P[U=S] Y_S / D(Y_S)`, skipping degenerate `Y_S`.
pub fn apply_m_operator(table: &ProbabilityTable, family: &ConditionalFamily) -> Result<MOperator> {
    let mut values = vec![0.0; table.len()];
    let mut dropped = Vec::new();
    for ((s, p), y) in family.support.iter().zip(&family.values) {
        let sd = table.variance(y).sqrt();
        if sd <= VAR_EPS.sqrt() {
            dropped.push(*s);
            continue;
        }
        values.iter_mut().zip(y).for_each(|(o, v)| *o += p * v / sd);
    }
    if dropped.len() == family.support.len() {
        return Err(Error::Degenerate("every Y_S is constant".into()));
    }
    if !dropped.is_empty() {
        warn!("M^U: dropped {} degenerate terms", dropped.len());
    }
    Ok(MOperator { values, dropped })
}

/// Correlation under the table; 0 if either side is constant.
pub fn corr(table: &ProbabilityTable, a: &[f64], b: &[f64]) -> f64 {
    let (va, vb) = (table.variance(a), table.variance(b));
    if va <= VAR_EPS || vb <= VAR_EPS {
        return 0.0;
    }
    table.covariance(a, b) / (va * vb).sqrt()
}

/// `E[Corr(Y_{U₁}, Y_{U₂})]` for independent copies `U₁, U₂`.
pub fn average_pair_correlation(table: &ProbabilityTable, family: &ConditionalFamily) -> f64 {
    let m = family.support.len();
    let rows: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|j| family.support[i].1 * family.support[j].1 * corr(table, &family.values[i], &family.values[j]))
                .sum::<f64>()
        })
        .collect();
    rows.iter().sum()
}

/// `E[Corr(Z, Y_U)]` over `U`.
pub fn expected_correlation_with(table: &ProbabilityTable, z: &[f64], family: &ConditionalFamily) -> f64 {
    family.support.iter().zip(&family.values).map(|((_, p), y)| p * corr(table, z, y)).sum()
}

/// Both sides of the correlation identities for one instance.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OperatorIdentities {
    /// `Var(M^U[Y])`.
    pub var_m: f64,
    /// `E[Corr(Y_{U₁}, Y_{U₂})]`.
    pub avg_pair_corr: f64,
    /// `E[Corr(M^U[Y], Y_U)]`.
    pub corr_m_y: f64,
    /// `Corr(Z, M^U[Y]) · E[Corr(M^U[Y], Y_U)]`.
    pub corr_product: f64,
    /// `E[Corr(Z, Y_U)]`.
    pub expected_corr_z: f64,
}

pub fn operator_identities(table: &ProbabilityTable, z: &[f64], family: &ConditionalFamily) -> Result<OperatorIdentities> {
    let m = apply_m_operator(table, family)?;
    let corr_m_y = expected_correlation_with(table, &m.values, family);
    Ok(OperatorIdentities {
        var_m: table.variance(&m.values),
        avg_pair_corr: average_pair_correlation(table, family),
        corr_m_y,
        corr_product: corr(table, z, &m.values) * corr_m_y,
        expected_corr_z: expected_correlation_with(table, z, family),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoostReport {
    pub k: usize,
    pub avg_pair_corr: f64,
    /// `1 − 1/(1 + k·E[Corr])`.
    pub bound: f64,
    /// `E[clue(M^U[Y] | U^{⊕k})]`, exact.
    pub achieved: f64,
    /// `E[clue(f | U)]` for comparison.
    pub unboosted: f64,
    #[serde(skip)]
    pub g: Vec<f64>,
}

/// Build `g = M^U[E[f|F_·]]` and evaluate its expected clue from the union of `k` copies of `U`.
pub fn boost_reconstruction(
    table: &ProbabilityTable,
    f: &[f64],
    spec: &SubsetSpec,
    k: usize,
    graph: &Graph,
) -> Result<BoostReport> {
    check_graph(table, graph)?;
    let support = spec_support(spec, graph)?;
    let family = ConditionalFamily::conditional_means(table, f, support.clone());
    let avg = average_pair_correlation(table, &family);
    if avg <= VAR_EPS {
        return Err(Error::Degenerate("average correlation is zero".into()));
    }
    let g = apply_m_operator(table, &family)?.values;
    let boosted = spec_support(&SubsetSpec::union_of_copies(spec.clone(), k), graph)?;
    Ok(BoostReport {
        k,
        avg_pair_corr: avg,
        bound: 1.0 - 1.0 / (1.0 + k as f64 * avg),
        achieved: expected_clue_on(table, &g, &boosted),
        unboosted: expected_clue_on(table, f, &support),
        g,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShearerReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `H(σ)·min_v P[v∈U] ≤ E[H(σ_U)]`.
pub fn shearer_check(table: &ProbabilityTable, spec: &SubsetSpec, graph: &Graph) -> Result<ShearerReport> {
    check_graph(table, graph)?;
    let support = spec_support(spec, graph)?;
    let reveal = crate::graphs::revealment(spec, graph)?;
    let lhs = table.entropy_bits() * reveal.min();
    let rhs: f64 = support
        .par_iter()
        .map(|&(u, p)| p * marginal_entropy(table, u))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(ShearerReport { lhs, rhs, holds: lhs <= rhs + 1e-12 })
}

/// `H(σ_U)` in bits.
pub fn marginal_entropy(table: &ProbabilityTable, u: u64) -> f64 {
    let mut m = vec![0.0; table.len()];
    for (x, &p) in table.probs().iter().enumerate() {
        m[x & u as usize] += p;
    }
    entropy_bits(&m)
}

/// `sign(Σ_{v∈U} σ_v)` with ties to −1.
pub fn majority_guess(config: &SpinConfig, u: &SubsetMask) -> Result<f64> {
    if u.is_empty() {
        return Err(Error::InvalidSubset("majority guess needs a nonempty subset".into()));
    }
    Ok(majority_sign(u.iter().map(|v| config.get(v) as i64).sum()))
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Point estimate with standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClueEstimate {
    pub value: f64,
    pub se: f64,
    pub outer: usize,
    pub inner: usize,
    pub seed: Option<u64>,
}

/// Draws from a spin measure and from its conditional laws given frozen spins.
pub trait ConditionalSampler: Sync {
    fn n(&self) -> usize;

    /// A configuration from the full measure.
    fn sample(&self, rng: &mut SpinRng) -> SpinConfig;

    /// Replace the spins outside `frozen` by a draw from the conditional law.
    fn resample(&self, config: &mut SpinConfig, frozen: &SubsetMask, rng: &mut SpinRng);
}

/// Independent spins with `P[σ_v = +1] = p_plus`.
pub struct ProductSampler {
    pub n: usize,
    pub p_plus: f64,
}

impl ConditionalSampler for ProductSampler {
    fn n(&self) -> usize {
        self.n
    }

    fn sample(&self, rng: &mut SpinRng) -> SpinConfig {
        let mut c = SpinConfig::all_minus(self.n);
        for v in 0..self.n {
            if rng.gen::<f64>() < self.p_plus {
                c.set(v, 1);
            }
        }
        c
    }

    fn resample(&self, config: &mut SpinConfig, frozen: &SubsetMask, rng: &mut SpinRng) {
        for v in 0..self.n {
            if !frozen.contains(v) {
                config.set(v, if rng.gen::<f64>() < self.p_plus { 1 } else { -1 });
            }
        }
    }
}

/// Ising sampler: Swendsen-Wang for fresh draws, frozen heat-bath for conditionals.
pub struct GibbsSampler<'a> {
    pub graph: &'a Graph,
    pub params: IsingParams,
    /// Swendsen-Wang steps from a uniform start.
    pub burn_in: usize,
    /// Frozen heat-bath sweeps of the free vertices per conditional draw.
    pub sweeps: usize,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(graph: &'a Graph, params: IsingParams) -> Self {
        Self { graph, params, burn_in: SW_BURN_IN, sweeps: 50 }
    }
}

impl ConditionalSampler for GibbsSampler<'_> {
    fn n(&self) -> usize {
        self.graph.n_vertices()
    }

    fn sample(&self, rng: &mut SpinRng) -> SpinConfig {
        let mut state = ChainState::random(self.n(), rng.gen(), 0);
        for _ in 0..self.burn_in {
            swendsen_wang_step(&mut state, self.graph, &self.params).expect("validated zero-field parameters");
        }
        state.config
    }

    fn resample(&self, config: &mut SpinConfig, frozen: &SubsetMask, rng: &mut SpinRng) {
        let mut state = ChainState::new(config.clone(), rng.gen(), 0);
        for _ in 0..self.sweeps {
            glauber_sweep(&mut state, self.graph, &self.params, Some(frozen));
        }
        *config = state.config;
    }
}

/// Exact Curie-Weiss sampler.
pub struct CurieWeissSampler {
    pub n: usize,
    pub beta: f64,
    pmf: CwMagnetizationPmf,
}

impl CurieWeissSampler {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        Ok(Self { n, beta, pmf: cw_magnetization_pmf(n, beta)? })
    }
}

impl ConditionalSampler for CurieWeissSampler {
    fn n(&self) -> usize {
        self.n
    }

    fn sample(&self, rng: &mut SpinRng) -> SpinConfig {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut plus = self.n;
        for (j, p) in self.pmf.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                plus = j;
                break;
            }
        }
        let all: Vec<usize> = (0..self.n).collect();
        let mut c = SpinConfig::all_minus(self.n);
        for (v, s) in scatter_plus(&all, plus, rng) {
            c.set(v, s);
        }
        c
    }

    fn resample(&self, config: &mut SpinConfig, frozen: &SubsetMask, rng: &mut SpinRng) {
        let observed: i64 = frozen.iter().map(|v| config.get(v) as i64).sum();
        let free: Vec<usize> = (0..self.n).filter(|&v| !frozen.contains(v)).collect();
        let plus = sample_hidden_plus_count(self.n, self.beta, frozen.count(), observed, rng);
        for (v, s) in scatter_plus(&free, plus, rng) {
            config.set(v, s);
        }
    }
}

/// Exact sampler backed by a probability table (small `n`).
pub struct TableSampler<'a> {
    pub table: &'a ProbabilityTable,
}

impl ConditionalSampler for TableSampler<'_> {
    fn n(&self) -> usize {
        self.table.n()
    }

    fn sample(&self, rng: &mut SpinRng) -> SpinConfig {
        SpinConfig::from_bits(self.n(), self.table.sample(rng))
    }

    fn resample(&self, config: &mut SpinConfig, frozen: &SubsetMask, rng: &mut SpinRng) {
        let u = frozen.to_bits() as usize;
        let b = config.to_bits() as usize & u;
        let probs = self.table.probs();
        let total: f64 = (0..probs.len()).filter(|x| x & u == b).map(|x| probs[x]).sum();
        let r = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = b;
        for (x, &p) in probs.iter().enumerate() {
            if x & u == b && p > 0.0 {
                pick = x;
                acc += p;
                if r < acc {
                    break;
                }
            }
        }
        *config = SpinConfig::from_bits(self.n(), pick as u64);
    }
}

/// Nested Monte Carlo clue estimate.
///
/// Each of `outer` groups draws its own `U` from `spec` and a configuration
/// from the full measure, then `inner` conditional redraws of the complement.
/// The between-group variance component over the total variance is the
/// estimate of `E[Var(E[f|F_U])] / Var(f)`; with a fixed `U` it is the clue.
pub fn clue_mc<S: ConditionalSampler + ?Sized>(
    sampler: &S,
    f: &Observable,
    spec: &SubsetSpec,
    graph: &Graph,
    outer: usize,
    inner: usize,
    seed: u64,
) -> Result<ClueEstimate> {
    if inner < 2 {
        return Err(Error::InvalidParameter("inner sample count must be >= 2".into()));
    }
    if outer < 2 {
        return Err(Error::InvalidParameter("outer sample count must be >= 2".into()));
    }
    spec.validate(graph)?;
    check_graph_n(sampler.n(), graph)?;
    let groups: Vec<Vec<f64>> = (0..outer)
        .into_par_iter()
        .map(|g| {
            let mut rng = substream(seed, TASK_CLUE_GROUP, g as u64);
            let u = sample_subset(spec, graph, &mut rng).expect("validated spec");
            let mut config = sampler.sample(&mut rng);
            (0..inner)
                .map(|_| {
                    sampler.resample(&mut config, &u, &mut rng);
                    f.eval(&config)
                })
                .collect()
        })
        .collect();
    let value = anova(&groups).explained_fraction();
    let mut boot_rng = substream(seed, TASK_CLUE_BOOT, 0);
    let se = bootstrap_groups_se(&groups, 200, &mut boot_rng, |g| anova(g).explained_fraction());
    Ok(ClueEstimate { value, se, outer, inner, seed: Some(seed) })
}

fn check_graph_n(n: usize, graph: &Graph) -> Result<()> {
    if n != graph.n_vertices() {
        return Err(Error::DimensionMismatch { expected: graph.n_vertices(), got: n });
    }
    Ok(())
}
