//! Heat-bath block dynamics driven by a random subset `U`: at each step draw
//! `S ~ U`, keep `σ_S` and resample the rest from the conditional measure.
//!
//! The transition operator is `P_U f = Σ_S P[U=S] E[f | F_S]`, a mixture of
//! orthogonal projections in `L²(μ)`. Small state spaces use a dense matrix
//! and a symmetric eigensolver; larger ones (up to 14 spins) are handled
//! matrix-free by power iteration.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::clue::{conditional_expectation, expected_clue_on, spec_support};
use crate::error::{Error, Result};
use crate::graphs::{tiled_mask, Graph, SubsetMask, SubsetSpec, TilingLayout};
use crate::ising::{heat_bath_with_uniforms, swendsen_wang_step, ChainState, IsingParams, SW_BURN_IN};
use crate::measures::ProbabilityTable;
use crate::rng::{substream, SpinRng};
use crate::spin::SpinConfig;
use crate::stats::mean_se;

/// Largest spin count for block transition operators.
pub const BLOCK_CAP: usize = 14;
/// Largest spin count for which the dense matrix is materialized.
pub const DENSE_CAP: usize = 10;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 100_000;

const TASK_PC_INIT: u32 = 21;
const TASK_PC_TRIAL: u32 = 22;

/// The transition operator of the block dynamics.
#[derive(Clone, Debug)]
pub struct BlockTransition {
    table: ProbabilityTable,
    support: Vec<(u64, f64)>,
    dense: Option<DMatrix<f64>>,
}

/// Build `P_U` for the measure `table` and the subset law `spec`.
pub fn block_transition_matrix(table: &ProbabilityTable, spec: &SubsetSpec, graph: &Graph) -> Result<BlockTransition> {
    if table.n() != graph.n_vertices() {
        return Err(Error::DimensionMismatch { expected: graph.n_vertices(), got: table.n() });
    }
    BlockTransition::from_support(table, spec_support(spec, graph)?)
}

impl BlockTransition {
    pub fn from_support(table: &ProbabilityTable, support: Vec<(u64, f64)>) -> Result<Self> {
        let n = table.n();
        if n > BLOCK_CAP {
            return Err(Error::CapExceeded { n, cap: BLOCK_CAP });
        }
        let dense = (n <= DENSE_CAP).then(|| dense_matrix(table, &support));
        Ok(Self { table: table.clone(), support, dense })
    }

    pub fn table(&self) -> &ProbabilityTable {
        &self.table
    }

    pub fn support(&self) -> &[(u64, f64)] {
        &self.support
    }

    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_ref()
    }

    pub fn n_states(&self) -> usize {
        self.table.len()
    }

    /// `(P f)(x)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        match &self.dense {
            Some(m) => {
                let v = nalgebra::DVector::from_column_slice(f);
                (m * v).as_slice().to_vec()
            }
            None => {
                let parts: Vec<Vec<f64>> =
                    self.support.par_iter().map(|&(s, _)| conditional_expectation(&self.table, f, s)).collect();
                let mut out = vec![0.0; f.len()];
                for ((_, p), part) in self.support.iter().zip(&parts) {
                    out.iter_mut().zip(part).for_each(|(o, v)| *o += p * v);
                }
                out
            }
        }
    }

    /// Largest `|μ(x)P(x,y) − μ(y)P(y,x)|` (dense only; the matrix-free
    /// operator is reversible by construction).
    pub fn reversibility_error(&self) -> f64 {
        let Some(m) = &self.dense else { return 0.0 };
        let mu = self.table.probs();
        let len = mu.len();
        let mut worst: f64 = 0.0;
        for x in 0..len {
            for y in x + 1..len {
                worst = worst.max((mu[x] * m[(x, y)] - mu[y] * m[(y, x)]).abs());
            }
        }
        worst
    }

    /// Largest `|(μP)(y) − μ(y)|`.
    pub fn stationarity_error(&self) -> f64 {
        let Some(m) = &self.dense else { return 0.0 };
        let mu = self.table.probs();
        (0..mu.len())
            .map(|y| ((0..mu.len()).map(|x| mu[x] * m[(x, y)]).sum::<f64>() - mu[y]).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of a row sum from 1.
    pub fn row_sum_error(&self) -> f64 {
        let Some(m) = &self.dense else { return 0.0 };
        m.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// One step of the chain from state `x`.
    pub fn step(&self, x: u64, rng: &mut SpinRng) -> u64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut s = self.support.last().map_or(0, |&(s, _)| s);
        for &(mask, p) in &self.support {
            acc += p;
            if u < acc {
                s = mask;
                break;
            }
        }
        let b = x & s;
        let mu = self.table.probs();
        let total: f64 = (0..mu.len() as u64).filter(|y| y & s == b).map(|y| mu[y as usize]).sum();
        let r = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = x;
        for y in 0..mu.len() as u64 {
            if y & s == b && mu[y as usize] > 0.0 {
                pick = y;
                acc += mu[y as usize];
                if r < acc {
                    break;
                }
            }
        }
        pick
    }
}

fn dense_matrix(table: &ProbabilityTable, support: &[(u64, f64)]) -> DMatrix<f64> {
    let mu = table.probs();
    let len = mu.len();
    let boundary: Vec<Vec<f64>> = support
        .iter()
        .map(|&(s, _)| {
            let mut den = vec![0.0; len];
            for (x, &p) in mu.iter().enumerate() {
                den[x & s as usize] += p;
            }
            den
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..len)
        .into_par_iter()
        .map(|x| {
            let mut row = vec![0.0; len];
            for (&(s, p), den) in support.iter().zip(&boundary) {
                let s = s as usize;
                let b = x & s;
                if den[b] <= 0.0 {
                    continue;
                }
                for (y, r) in row.iter_mut().enumerate() {
                    if y & s == b {
                        *r += p * mu[y] / den[b];
                    }
                }
            }
            row
        })
        .collect();
    DMatrix::from_fn(len, len, |i, j| rows[i][j])
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub lambda2: f64,
    /// Smallest eigenvalue (dense mode only).
    pub lambda_min: Option<f64>,
    /// `max(|λ₂|, |λ_min|)`.
    pub lambda_star: f64,
    pub gap: f64,
    pub relaxation_time: f64,
    /// A right eigenfunction for `λ₂`, centered and normalized in `L²(μ)`.
    #[serde(skip)]
    pub f2: Vec<f64>,
    /// Basis of the `λ₂` eigenspace (dense mode), same normalization.
    #[serde(skip)]
    pub eigenspace: Vec<Vec<f64>>,
    /// `1 − E(f₂)/Var(f₂)`: λ₂ recomputed from the Dirichlet form.
    pub lambda2_dirichlet: f64,
}

/// Spectral data of a reversible `P`.
pub fn spectrum(bt: &BlockTransition) -> Result<SpectrumReport> {
    let rev = bt.reversibility_error();
    if rev > 1e-10 {
        return Err(Error::NotReversible(rev));
    }
    let (lambda2, lambda_min, eigenspace) = match &bt.dense {
        Some(m) => dense_spectrum(bt, m),
        None => {
            let (l, f) = power_iteration(bt);
            (l, None, vec![f])
        }
    };
    let f2 = eigenspace[0].clone();
    let var = bt.table.variance(&f2);
    let lambda2_dirichlet = if var > 0.0 { 1.0 - dirichlet_form(bt, &f2) / var } else { lambda2 };
    let lambda_star = lambda_min.map_or(lambda2.abs(), |m| lambda2.abs().max(m.abs()));
    Ok(SpectrumReport {
        lambda2,
        lambda_min,
        lambda_star,
        gap: 1.0 - lambda2,
        relaxation_time: 1.0 / (1.0 - lambda_star),
        f2,
        eigenspace,
        lambda2_dirichlet,
    })
}

fn dense_spectrum(bt: &BlockTransition, m: &DMatrix<f64>) -> (f64, Option<f64>, Vec<Vec<f64>>) {
    let mu = bt.table.probs();
    let live: Vec<usize> = (0..mu.len()).filter(|&x| mu[x] > 0.0).collect();
    let k = live.len();
    let sq: Vec<f64> = live.iter().map(|&x| mu[x].sqrt()).collect();
    let mut a = DMatrix::from_fn(k, k, |i, j| sq[i] * m[(live[i], live[j])] / sq[j]);
    // exact symmetrization removes rounding asymmetry
    a = (&a + a.transpose()) * 0.5;
    // deflate the stationary direction so λ₂ is the top of the remainder
    let phi0 = nalgebra::DVector::from_column_slice(&sq);
    let shift = 2.0;
    let deflated = &a - &phi0 * phi0.transpose() * shift;
    let eig = SymmetricEigen::new(deflated);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let lambda2 = eig.eigenvalues[order[0]];
    // the deflated direction sits at 1 − shift; all others are genuine nontrivial eigenvalues
    let lambda_min = order
        .iter()
        .map(|&i| eig.eigenvalues[i])
        .filter(|&l| (l - (1.0 - shift)).abs() > 1e-9)
        .fold(f64::INFINITY, f64::min);
    let lambda_min = if lambda_min.is_finite() { lambda_min } else { lambda2 };
    let eigenspace: Vec<Vec<f64>> = order
        .iter()
        .take_while(|&&i| (eig.eigenvalues[i] - lambda2).abs() <= 1e-9)
        .map(|&i| {
            let phi = eig.eigenvectors.column(i);
            let mut f = vec![0.0; mu.len()];
            for (r, &x) in live.iter().enumerate() {
                f[x] = phi[r] / sq[r];
            }
            normalize(&bt.table, f)
        })
        .collect();
    (lambda2, Some(lambda_min), eigenspace)
}

/// Center under `μ` and scale to unit variance (left as is if constant).
fn normalize(table: &ProbabilityTable, mut f: Vec<f64>) -> Vec<f64> {
    let m = table.expect(&f);
    f.iter_mut().for_each(|v| *v -= m);
    let sd = table.variance(&f).sqrt();
    if sd > 0.0 {
        f.iter_mut().for_each(|v| *v /= sd);
    }
    f
}

fn power_iteration(bt: &BlockTransition) -> (f64, Vec<f64>) {
    let len = bt.n_states();
    // deterministic, generic start
    let mut f: Vec<f64> = (0..len).map(|x| ((x as f64 + 1.0) * 0.618_033_988_75).fract() - 0.5).collect();
    f = normalize(&bt.table, f);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let g = bt.apply(&f);
        let next_lambda = bt.table.covariance(&f, &g) / bt.table.variance(&f).max(f64::MIN_POSITIVE);
        let g = normalize(&bt.table, g);
        let done = (next_lambda - lambda).abs() < POWER_TOL;
        lambda = next_lambda;
        if bt.table.variance(&g) == 0.0 {
            return (lambda.max(0.0), f);
        }
        f = g;
        if done {
            break;
        }
    }
    (lambda, f)
}

/// `E(f) = ½ Σ μ(x) P(x,y) (f(x) − f(y))²`.
pub fn dirichlet_form(bt: &BlockTransition, f: &[f64]) -> f64 {
    let mu = bt.table.probs();
    match &bt.dense {
        Some(m) => {
            let len = mu.len();
            let mut total = 0.0;
            for x in 0..len {
                if mu[x] == 0.0 {
                    continue;
                }
                for y in 0..len {
                    let d = f[x] - f[y];
                    total += mu[x] * m[(x, y)] * d * d;
                }
            }
            0.5 * total
        }
        None => {
            // ⟨f, (I − P) f⟩_μ for reversible P
            let pf = bt.apply(f);
            mu.iter().zip(f.iter().zip(&pf)).map(|(p, (a, b))| p * a * (a - b)).sum()
        }
    }
}

/// `Φ(E) = E(1_E) / μ(E)` for an event given by its membership vector.
pub fn bottleneck_ratio(bt: &BlockTransition, event: &[bool]) -> Result<f64> {
    let mu = bt.table.probs();
    if event.len() != mu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), got: event.len() });
    }
    let mass: f64 = mu.iter().zip(event).filter(|(_, &e)| e).map(|(p, _)| p).sum();
    if mass > 0.5 + 1e-12 {
        return Err(Error::InvalidParameter(format!("event has mass {mass} > 1/2")));
    }
    if mass <= 0.0 {
        return Err(Error::Degenerate("event has zero mass".into()));
    }
    let ind: Vec<f64> = event.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect();
    Ok(dirichlet_form(bt, &ind) / mass)
}

#[derive(Clone, Debug, Serialize)]
pub struct CheegerReport {
    /// Best bottleneck ratio found.
    pub phi: f64,
    /// `exhaustive` (true minimum) or `sweep` (upper bound from level sets of `f₂`).
    pub method: &'static str,
    pub gap: f64,
    /// `phi²/2 ≤ gap`; for the sweep this certifies `Φ*²/2 ≤ gap` since `Φ* ≤ phi`.
    pub holds: bool,
    /// `gap ≤ 2 phi`, valid for any event of mass at most ½.
    pub upper_holds: bool,
}

/// Exhaustive scan when there are at most this many states.
pub const EXHAUSTIVE_STATES: usize = 16;

pub fn cheeger_check(bt: &BlockTransition) -> Result<CheegerReport> {
    let m = bt.dense.as_ref().ok_or(Error::CapExceeded { n: bt.table.n(), cap: DENSE_CAP })?;
    let spec = spectrum(bt)?;
    let mu = bt.table.probs();
    let len = mu.len();
    let (phi, method) = if len <= EXHAUSTIVE_STATES {
        let mut best = f64::INFINITY;
        for e in 1u32..(1 << len) {
            let event: Vec<bool> = (0..len).map(|x| e >> x & 1 == 1).collect();
            let mass: f64 = (0..len).filter(|&x| event[x]).map(|x| mu[x]).sum();
            if mass > 0.0 && mass <= 0.5 + 1e-12 {
                best = best.min(bottleneck_ratio(bt, &event)?);
            }
        }
        (best, "exhaustive")
    } else {
        (sweep_cut(mu, m, &spec.f2), "sweep")
    };
    Ok(CheegerReport {
        phi,
        method,
        gap: spec.gap,
        holds: phi * phi / 2.0 <= spec.gap + 1e-12,
        upper_holds: spec.gap <= 2.0 * phi + 1e-12,
    })
}

/// Best level-set bottleneck ratio of `f` (both directions), sets of mass ≤ ½.
fn sweep_cut(mu: &[f64], m: &DMatrix<f64>, f: &[f64]) -> f64 {
    let len = mu.len();
    let mut best = f64::INFINITY;
    for dir in [1.0, -1.0] {
        let mut order: Vec<usize> = (0..len).collect();
        order.sort_by(|&a, &b| (dir * f[b]).partial_cmp(&(dir * f[a])).unwrap());
        let mut inside = vec![false; len];
        let (mut mass, mut flow) = (0.0, 0.0);
        for &z in &order {
            if mass + mu[z] > 0.5 + 1e-12 {
                break;
            }
            // flow Q(E, E^c) after adding z
            for y in 0..len {
                if y == z {
                    continue;
                }
                let q = mu[z] * m[(z, y)];
                if inside[y] {
                    flow -= q;
                } else {
                    flow += q;
                }
            }
            inside[z] = true;
            mass += mu[z];
            if mass > 0.0 {
                best = best.min(flow / mass);
            }
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenclueReport {
    pub lambda2: f64,
    /// `E[clue(f₂|U)]`.
    pub f2_clue: f64,
    /// Largest expected clue over the eigenspace basis and random trials.
    pub max_clue: f64,
    /// Largest expected clue among the random trials.
    pub max_trial_clue: f64,
    /// `|λ₂ − E[clue(f₂|U)]|` maximized over the eigenspace basis.
    pub residual: f64,
    pub trials: usize,
    pub eigenspace_dim: usize,
}

/// Compare `λ₂(P_U)` with the expected clue of its eigenfunctions and of random functions.
pub fn eigenclue_verify(
    table: &ProbabilityTable,
    spec: &SubsetSpec,
    graph: &Graph,
    trials: usize,
    rng: &mut SpinRng,
) -> Result<EigenclueReport> {
    let bt = block_transition_matrix(table, spec, graph)?;
    let spec_report = spectrum(&bt)?;
    let support = bt.support();
    let eig_clues: Vec<f64> = spec_report.eigenspace.iter().map(|f| expected_clue_on(table, f, support)).collect();
    let residual = eig_clues.iter().map(|c| (c - spec_report.lambda2).abs()).fold(0.0, f64::max);
    let randoms: Vec<Vec<f64>> =
        (0..trials).map(|_| (0..table.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let max_trial_clue = randoms.iter().map(|f| expected_clue_on(table, f, support)).fold(0.0, f64::max);
    Ok(EigenclueReport {
        lambda2: spec_report.lambda2,
        f2_clue: eig_clues[0],
        max_clue: eig_clues.iter().cloned().fold(max_trial_clue, f64::max),
        max_trial_clue,
        residual,
        trials,
        eigenspace_dim: spec_report.eigenspace.len(),
    })
}

// ---------------------------------------------------------------------------
// Path coupling on tori

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PathCouplingOptions {
    /// Heat-bath sweeps per block when exact sampling is too large.
    pub block_sweeps: usize,
    /// Largest block volume sampled exactly.
    pub exact_volume: usize,
    /// Swendsen-Wang burn-in of the chain supplying initial states.
    pub burn_in: usize,
    /// Swendsen-Wang steps between successive initial states.
    pub thin: usize,
    pub layout: TilingLayout,
}

impl Default for PathCouplingOptions {
    fn default() -> Self {
        Self { block_sweeps: 200, exact_volume: 16, burn_in: SW_BURN_IN, thin: 1, layout: TilingLayout::FullLattice }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PathCouplingEstimate {
    pub beta: f64,
    pub l: usize,
    pub eta1_mean: f64,
    pub eta1_se: f64,
    pub trials: usize,
    /// Revealment of the tiled subset, `1 − (L/(L+3))^d`.
    pub delta: f64,
}

/// Estimate `E[η₁]`: disagreements after one block step started from two
/// configurations differing at one uniform vertex.
pub fn path_coupling_rate(
    graph: &Graph,
    beta: f64,
    l: usize,
    trials: usize,
    seed: u64,
    opts: &PathCouplingOptions,
) -> Result<PathCouplingEstimate> {
    let (dim, side) = match graph.spec() {
        crate::graphs::GraphSpec::Torus { dim, side } if (2..=3).contains(dim) => (*dim, *side),
        _ => return Err(Error::InvalidGraph("path coupling needs a 2D or 3D torus".into())),
    };
    if l < 2 || l + 3 > side {
        return Err(Error::InvalidParameter(format!("need 2 <= L and L + 3 <= side, got L = {l}, side = {side}")));
    }
    if trials < 2 {
        return Err(Error::InvalidParameter("need at least 2 trials".into()));
    }
    let params = IsingParams::new(beta);
    params.validate()?;
    let n = graph.n_vertices();

    // initial states from one sequential chain so the result does not depend on thread count
    let mut chain = ChainState::random(n, seed, ((TASK_PC_INIT as u64) << 40) | l as u64);
    for _ in 0..opts.burn_in {
        swendsen_wang_step(&mut chain, graph, &params)?;
    }
    let mut starts = Vec::with_capacity(trials);
    for _ in 0..trials {
        for _ in 0..opts.thin.max(1) {
            swendsen_wang_step(&mut chain, graph, &params)?;
        }
        starts.push(chain.config.clone());
    }

    let period = l + 3;
    let eta: Vec<f64> = starts
        .into_par_iter()
        .enumerate()
        .map(|(t, config)| {
            let mut rng = substream(seed, TASK_PC_TRIAL, ((l as u64) << 32) | t as u64);
            let v = rng.gen_range(0..n);
            let shift: Vec<usize> = (0..dim).map(|_| rng.gen_range(0..period)).collect();
            let keep = tiled_mask(graph, l, &shift, opts.layout);
            coupled_block_step(graph, &params, &config, v, &keep, opts, &mut rng) as f64
        })
        .collect();
    let (mean, se) = mean_se(&eta);
    Ok(PathCouplingEstimate {
        beta,
        l,
        eta1_mean: mean,
        eta1_se: se,
        trials,
        delta: 1.0 - (l as f64 / period as f64).powi(dim as i32),
    })
}

/// One coupled block step from `x` and `x` with `v` flipped, keeping `keep`
/// and resampling its complement. Returns the Hamming distance afterwards.
pub fn coupled_block_step(
    graph: &Graph,
    params: &IsingParams,
    x: &SpinConfig,
    v: usize,
    keep: &SubsetMask,
    opts: &PathCouplingOptions,
    rng: &mut SpinRng,
) -> usize {
    if !keep.contains(v) {
        // the seed is resampled from identical boundaries with identical randomness
        return 0;
    }
    let mut a = x.clone();
    let mut b = x.clone();
    b.flip(v);
    // only blocks touching v see different boundaries; the others evolve identically
    let mut seen = vec![false; graph.n_vertices()];
    for &(w, _) in graph.neighbors(v) {
        let w = w as usize;
        if keep.contains(w) || seen[w] {
            continue;
        }
        let block = component(graph, keep, w, &mut seen);
        resample_block_coupled(graph, params, &mut a, &mut b, &block, opts, rng);
    }
    a.hamming(&b)
}

/// Connected component of the complement of `keep` containing `start`.
fn component(graph: &Graph, keep: &SubsetMask, start: usize, seen: &mut [bool]) -> Vec<usize> {
    let mut out = vec![start];
    seen[start] = true;
    let mut i = 0;
    while i < out.len() {
        let u = out[i];
        i += 1;
        for &(w, _) in graph.neighbors(u) {
            let w = w as usize;
            if !keep.contains(w) && !seen[w] {
                seen[w] = true;
                out.push(w);
            }
        }
    }
    out.sort_unstable();
    out
}

fn resample_block_coupled(
    graph: &Graph,
    params: &IsingParams,
    a: &mut SpinConfig,
    b: &mut SpinConfig,
    block: &[usize],
    opts: &PathCouplingOptions,
    rng: &mut SpinRng,
) {
    if block.len() <= opts.exact_volume {
        let uniforms: Vec<f64> = (0..block.len()).map(|_| rng.gen()).collect();
        exact_block_sample(graph, params, a, block, &uniforms);
        exact_block_sample(graph, params, b, block, &uniforms);
    } else {
        for _ in 0..opts.block_sweeps {
            let uniforms: Vec<f64> = (0..block.len()).map(|_| rng.gen()).collect();
            heat_bath_with_uniforms(a, graph, params, block, &uniforms);
            heat_bath_with_uniforms(b, graph, params, block, &uniforms);
        }
    }
}

/// Exact conditional sample of `block` given the rest, spin by spin through
/// the chain rule; feeding both copies the same uniforms gives a monotone coupling.
fn exact_block_sample(graph: &Graph, params: &IsingParams, config: &mut SpinConfig, block: &[usize], uniforms: &[f64]) {
    let k = block.len();
    let pos = |w: usize| block.binary_search(&w).ok();
    let mut field = vec![params.h; k];
    let mut internal: Vec<(usize, usize)> = Vec::new();
    for (i, &u) in block.iter().enumerate() {
        for &(w, _) in graph.neighbors(u) {
            match pos(w as usize) {
                Some(j) if j > i => internal.push((i, j)),
                Some(_) => {}
                None => field[i] += params.j * config.get(w as usize) as f64,
            }
        }
    }
    // log-weight of each block state; bit i set means spin +1
    let lw: Vec<f64> = (0..1u32 << k)
        .map(|s| {
            let spin = |i: usize| if s >> i & 1 == 1 { 1.0 } else { -1.0 };
            let e: f64 = internal.iter().map(|&(i, j)| params.j * spin(i) * spin(j)).sum::<f64>()
                + (0..k).map(|i| field[i] * spin(i)).sum::<f64>();
            params.beta * e
        })
        .collect();
    let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|l| (l - max).exp()).collect();
    let mut fixed: u32 = 0;
    for i in 0..k {
        let low = (1u32 << i) - 1;
        let (mut plus, mut total) = (0.0, 0.0);
        for (s, &ws) in w.iter().enumerate() {
            let s = s as u32;
            if s & low == fixed {
                total += ws;
                if s >> i & 1 == 1 {
                    plus += ws;
                }
            }
        }
        if uniforms[i] < plus / total {
            fixed |= 1 << i;
        }
    }
    for (i, &u) in block.iter().enumerate() {
        config.set(u, if fixed >> i & 1 == 1 { 1 } else { -1 });
    }
}
