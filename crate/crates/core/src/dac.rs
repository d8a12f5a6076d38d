//! Divide-and-Color measures: spins constant on the clusters of a random bond
//! set, each cluster colored by an independent fair coin.
//!
//! Subsets `S, T ⊆ V` are equivalent given bonds `N` when `S Δ T` meets every
//! cluster in an even number of vertices. A class is identified by its parity
//! profile, a bitmask with one bit per cluster (clusters labelled by their
//! smallest vertex).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitSet;
use crate::clue::{expected_clue_on, spec_support};
use crate::error::{Error, Result};
use crate::graphs::{revealment, Graph, SubsetMask, SubsetSpec};
use crate::ising::{fk_sample, BondConfig, IsingParams, SW_BURN_IN};
use crate::measures::{exact_table, walsh_transform, MeasureSpec, ProbabilityTable, DEFAULT_EXACT_CAP};
use crate::rng::SpinRng;
use crate::stats::mean_se;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedBonds {
    pub edges: Vec<usize>,
    pub prob: f64,
}

/// Law `ν` of the bond layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BondDistribution {
    /// Each edge open independently with probability `p`.
    Bernoulli { p: f64 },
    PointMass { edges: Vec<usize> },
    Explicit { configs: Vec<WeightedBonds> },
    /// FK random-cluster measure with `p = 1 − e^{−2βJ}` and `q = 2`; the
    /// induced DaC measure is the zero-field Ising model.
    Fk {
        beta: f64,
        #[serde(default = "one", alias = "J")]
        j: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl BondDistribution {
    pub fn validate(&self, graph: &Graph) -> Result<()> {
        let m = graph.n_edges();
        let check_edges = |edges: &[usize]| match edges.iter().find(|&&e| e >= m) {
            Some(e) => Err(Error::InvalidParameter(format!("edge index {e} out of range ({m} edges)"))),
            None => Ok(()),
        };
        match self {
            BondDistribution::Bernoulli { p } if !(0.0..=1.0).contains(p) => {
                Err(Error::InvalidParameter(format!("bond probability {p} not in [0,1]")))
            }
            BondDistribution::Bernoulli { .. } => Ok(()),
            BondDistribution::PointMass { edges } => check_edges(edges),
            BondDistribution::Explicit { configs } => {
                let mut total = 0.0;
                for c in configs {
                    check_edges(&c.edges)?;
                    if !(c.prob >= 0.0) {
                        return Err(Error::InvalidParameter(format!("negative bond probability {}", c.prob)));
                    }
                    total += c.prob;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::NotNormalizable);
                }
                Ok(())
            }
            BondDistribution::Fk { beta, j } => IsingParams { beta: *beta, j: *j, h: 0.0 }.validate(),
        }
    }
}

/// Every bond mask with positive `ν` probability, as `(edge mask, prob)`.
pub fn bond_support(dist: &BondDistribution, graph: &Graph, max_edges: usize) -> Result<Vec<(u64, f64)>> {
    dist.validate(graph)?;
    let m = graph.n_edges();
    let to_mask = |edges: &[usize]| edges.iter().fold(0u64, |acc, &e| acc | 1 << e);
    let enumerate = |weight: &(dyn Fn(u64) -> f64 + Sync)| -> Result<Vec<(u64, f64)>> {
        if m > max_edges {
            return Err(Error::CapExceeded { n: m, cap: max_edges });
        }
        let w: Vec<f64> = (0..1u64 << m).into_par_iter().map(weight).collect();
        let total: f64 = w.iter().sum();
        Ok(w.into_iter().enumerate().filter(|(_, x)| *x > 0.0).map(|(b, x)| (b as u64, x / total)).collect())
    };
    match dist {
        BondDistribution::Bernoulli { p } => {
            let p = *p;
            enumerate(&|b: u64| {
                let open = b.count_ones() as i32;
                p.powi(open) * (1.0 - p).powi(m as i32 - open)
            })
        }
        BondDistribution::Fk { beta, j } => {
            let p = IsingParams { beta: *beta, j: *j, h: 0.0 }.p_bond();
            enumerate(&|b: u64| {
                let open = b.count_ones() as i32;
                let k = cluster_count(graph, b) as i32;
                p.powi(open) * (1.0 - p).powi(m as i32 - open) * 2f64.powi(k)
            })
        }
        _ if m > 64 => Err(Error::CapExceeded { n: m, cap: 64 }),
        BondDistribution::PointMass { edges } => Ok(vec![(to_mask(edges), 1.0)]),
        BondDistribution::Explicit { configs } => {
            let mut out: Vec<(u64, f64)> =
                configs.iter().filter(|c| c.prob > 0.0).map(|c| (to_mask(&c.edges), c.prob)).collect();
            out.sort_by_key(|&(b, _)| b);
            out.dedup_by(|a, b| {
                if a.0 == b.0 {
                    b.1 += a.1;
                    true
                } else {
                    false
                }
            });
            Ok(out)
        }
    }
}

/// Draw one bond layer from `ν`. FK layers come from a Swendsen-Wang chain.
pub fn sample_bond_config(dist: &BondDistribution, graph: &Graph, rng: &mut SpinRng) -> Result<BondConfig> {
    dist.validate(graph)?;
    let m = graph.n_edges();
    match dist {
        BondDistribution::Bernoulli { p } => {
            let mut open = BitSet::new(m);
            for e in 0..m {
                if rng.gen::<f64>() < *p {
                    open.insert(e);
                }
            }
            Ok(BondConfig::from_open(graph, open))
        }
        BondDistribution::PointMass { edges } => Ok(BondConfig::from_edge_indices(graph, edges)),
        BondDistribution::Explicit { configs } => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for c in configs {
                acc += c.prob;
                if u < acc {
                    return Ok(BondConfig::from_edge_indices(graph, &c.edges));
                }
            }
            let last = configs.iter().rev().find(|c| c.prob > 0.0).ok_or(Error::NotNormalizable)?;
            Ok(BondConfig::from_edge_indices(graph, &last.edges))
        }
        BondDistribution::Fk { beta, j } => fk_sample(graph, &IsingParams { beta: *beta, j: *j, h: 0.0 }, rng, SW_BURN_IN),
    }
}

/// Clusters of the bond mask `edges` (`|E| ≤ 64`).
pub fn clusters(graph: &Graph, edges: u64) -> BondConfig {
    BondConfig::from_open(graph, BitSet::from_u64(graph.n_edges(), edges))
}

fn cluster_count(graph: &Graph, edges: u64) -> usize {
    clusters(graph, edges).n_clusters()
}

/// Vertex mask of each cluster, in label order (`n ≤ 64`).
pub fn cluster_vertex_masks(graph: &Graph, edges: u64) -> Vec<u64> {
    masks_of(&clusters(graph, edges))
}

fn masks_of(bonds: &BondConfig) -> Vec<u64> {
    let mut masks = vec![0u64; bonds.n_clusters()];
    for (v, &l) in bonds.labels().iter().enumerate() {
        masks[l as usize] |= 1 << v;
    }
    masks
}

/// `|⟨N⟩| = 2^{|V| − k(N)}`.
pub fn class_count(bonds: &BondConfig) -> u128 {
    1u128 << bonds.log2_class_count()
}

/// Parity of `|T ∩ C_j|` for each cluster `C_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ParityProfile {
    pub bits: u64,
    pub k: usize,
}

impl ParityProfile {
    pub fn of_subset(bonds: &BondConfig, t: &[usize]) -> Self {
        let bits = t.iter().fold(0u64, |acc, &v| acc ^ (1 << bonds.label(v)));
        Self { bits, k: bonds.n_clusters() }
    }

    pub fn of_mask(bonds: &BondConfig, t: u64) -> Self {
        let bits = (0..bonds.labels().len()).filter(|v| t >> v & 1 == 1).fold(0u64, |acc, v| acc ^ (1 << bonds.label(v)));
        Self { bits, k: bonds.n_clusters() }
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn odd_clusters(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.k).filter(|j| self.bits >> j & 1 == 1)
    }

    /// The smallest vertex of each odd cluster.
    pub fn representative(&self, bonds: &BondConfig) -> Result<Vec<usize>> {
        self.check(bonds)?;
        let mut first = vec![usize::MAX; self.k];
        for (v, &l) in bonds.labels().iter().enumerate() {
            first[l as usize] = first[l as usize].min(v);
        }
        Ok(self.odd_clusters().map(|j| first[j]).collect())
    }

    fn check(&self, bonds: &BondConfig) -> Result<()> {
        if self.k != bonds.n_clusters() {
            return Err(Error::DimensionMismatch { expected: bonds.n_clusters(), got: self.k });
        }
        Ok(())
    }
}

/// Whether some member of the class lies inside `U`: every odd cluster meets `U`.
pub fn class_within(profile: &ParityProfile, bonds: &BondConfig, u: &SubsetMask) -> Result<bool> {
    profile.check(bonds)?;
    if u.n_vertices() != bonds.labels().len() {
        return Err(Error::DimensionMismatch { expected: bonds.labels().len(), got: u.n_vertices() });
    }
    let mut hit = vec![false; profile.k];
    for v in u.iter() {
        hit[bonds.label(v)] = true;
    }
    Ok(profile.odd_clusters().all(|j| hit[j]))
}

/// Mask form of [`class_within`] with precomputed cluster masks.
fn within_masks(profile: u64, masks: &[u64], u: u64) -> bool {
    masks.iter().enumerate().all(|(j, &m)| profile >> j & 1 == 0 || m & u != 0)
}

/// `f̂([T]_N) = Σ_{S ∈ [T]_N} f̂(S)`, indexed by parity profile.
#[derive(Clone, Debug)]
pub struct DacCoefficients {
    pub bonds: BondConfig,
    pub coeffs: Vec<f64>,
}

impl DacCoefficients {
    pub fn k(&self) -> usize {
        self.bonds.n_clusters()
    }

    pub fn get(&self, profile: &ParityProfile) -> f64 {
        self.coeffs[profile.bits as usize]
    }

    /// `f̂([∅]_N) = E[f | A_N]`.
    pub fn empty_class(&self) -> f64 {
        self.coeffs[0]
    }

    /// `Σ_profiles f̂² = E[f² | A_N]`.
    pub fn conditional_second_moment(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }
}

/// Generalized Fourier coefficients of `f` (a table over `2^n` configurations).
pub fn dac_coefficients(values: &[f64], bonds: &BondConfig) -> Result<DacCoefficients> {
    let n = bonds.labels().len();
    if n > DEFAULT_EXACT_CAP {
        return Err(Error::CapExceeded { n, cap: DEFAULT_EXACT_CAP });
    }
    if values.len() != 1 << n {
        return Err(Error::DimensionMismatch { expected: 1 << n, got: values.len() });
    }
    Ok(from_walsh(&walsh_transform(values)?, bonds))
}

fn from_walsh(walsh: &[f64], bonds: &BondConfig) -> DacCoefficients {
    let k = bonds.n_clusters();
    let labels = bonds.labels();
    let mut coeffs = vec![0.0; 1 << k];
    let mut profile = vec![0u64; walsh.len()];
    for s in 1..walsh.len() {
        let low = s.trailing_zeros() as usize;
        profile[s] = profile[s & (s - 1)] ^ (1 << labels[low]);
    }
    for (s, c) in walsh.iter().enumerate() {
        coeffs[profile[s] as usize] += c;
    }
    DacCoefficients { bonds: bonds.clone(), coeffs }
}

/// Draw a class with probability `f̂([T]_N)² / E[f² | A_N]`.
pub fn spectral_sample_dac(coeffs: &DacCoefficients, rng: &mut SpinRng) -> Result<ParityProfile> {
    let total = coeffs.conditional_second_moment();
    if !(total > 0.0) {
        return Err(Error::Degenerate("E[f^2 | A_N] = 0".into()));
    }
    let r = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut pick = 0;
    for (p, c) in coeffs.coeffs.iter().enumerate() {
        if *c != 0.0 {
            pick = p;
            acc += c * c;
            if r < acc {
                break;
            }
        }
    }
    Ok(ParityProfile { bits: pick as u64, k: coeffs.k() })
}

/// The bond layer as a weighted list: exact support for small graphs,
/// equally weighted samples otherwise.
#[derive(Clone, Debug)]
pub struct BondEnsemble {
    pub configs: Vec<(BondConfig, f64)>,
    pub exact: bool,
}

impl BondEnsemble {
    pub fn exact(dist: &BondDistribution, graph: &Graph, max_edges: usize) -> Result<Self> {
        let configs = bond_support(dist, graph, max_edges)?.into_iter().map(|(b, p)| (clusters(graph, b), p)).collect();
        Ok(Self { configs, exact: true })
    }

    pub fn sampled(dist: &BondDistribution, graph: &Graph, replicas: usize, rng: &mut SpinRng) -> Result<Self> {
        if replicas < 2 {
            return Err(Error::InvalidParameter("need at least 2 bond replicas".into()));
        }
        let w = 1.0 / replicas as f64;
        let configs = (0..replicas).map(|_| sample_bond_config(dist, graph, rng).map(|b| (b, w))).collect::<Result<_>>()?;
        Ok(Self { configs, exact: false })
    }

    /// Exact when `|E| ≤ max_edges`, sampled otherwise.
    pub fn auto(dist: &BondDistribution, graph: &Graph, max_edges: usize, replicas: usize, rng: &mut SpinRng) -> Result<Self> {
        let small = graph.n_edges() <= max_edges
            || matches!(dist, BondDistribution::PointMass { .. } | BondDistribution::Explicit { .. });
        if small {
            Self::exact(dist, graph, max_edges)
        } else {
            Self::sampled(dist, graph, replicas, rng)
        }
    }

    /// `Σ w·x` and its standard error (zero for exact ensembles).
    fn average(&self, xs: &[f64]) -> (f64, f64) {
        if self.exact {
            (self.configs.iter().zip(xs).map(|((_, w), x)| w * x).sum(), 0.0)
        } else {
            mean_se(xs)
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DacExpectation {
    /// `E_ν[f̂([∅]_N)]`.
    pub e_f: f64,
    /// `E_ν[Σ_profiles f̂ ĝ]`.
    pub e_fg: f64,
    pub e_f_se: f64,
    pub e_fg_se: f64,
}

/// `E[f]` and `E[fg]` through the generalized Fourier coefficients.
pub fn dac_expectation(f: &[f64], g: &[f64], ensemble: &BondEnsemble) -> Result<DacExpectation> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch { expected: f.len(), got: g.len() });
    }
    let (wf, wg) = (walsh_transform(f)?, walsh_transform(g)?);
    let parts: Vec<(f64, f64)> = ensemble
        .configs
        .par_iter()
        .map(|(b, _)| {
            let (cf, cg) = (from_walsh(&wf, b), from_walsh(&wg, b));
            (cf.empty_class(), cf.coeffs.iter().zip(&cg.coeffs).map(|(a, b)| a * b).sum())
        })
        .collect();
    let (e_f, e_f_se) = ensemble.average(&parts.iter().map(|p| p.0).collect::<Vec<_>>());
    let (e_fg, e_fg_se) = ensemble.average(&parts.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok(DacExpectation { e_f, e_fg, e_f_se, e_fg_se })
}

#[derive(Clone, Debug, Serialize)]
pub struct DacBoundReport {
    /// Exact `E[clue(f|U)]` when the spin table is available.
    pub exact_clue: Option<f64>,
    /// `E[f]`, subtracted before the bounds are evaluated.
    pub offset: f64,
    pub variance: f64,
    /// `P[S^N_f ⊆ U]`, the empty class included.
    pub spectral_bound: f64,
    pub spectral_bound_se: f64,
    /// `δ E[max |C|] + clue(f|N)`.
    pub max_cluster_bound: f64,
    pub max_cluster_bound_se: f64,
    /// `δ Σ E|C_v|² / Σ E|C_v|`; a bound for the magnetization.
    pub cluster_ratio_bound: f64,
    pub cluster_ratio_bound_se: f64,
    /// `Σ_u P[u ∈ U] E_ν[f̂([u]_N)²] / Var(f)`: for `f = M` this equals the
    /// cluster-ratio expression when the revealment is uniform.
    pub singleton_sum: f64,
    /// `clue(f | N)`, zero for odd `f`.
    pub clue_given_bonds: f64,
    pub delta: f64,
    pub expected_max_cluster: f64,
    /// Diagnostic: `δ E|C_X| + clue(f|N)` with `X` weighted by the smallest odd cluster.
    pub smallest_odd_cluster_bound: f64,
    pub exact_bonds: bool,
}

/// Upper bounds on `E[clue(f|U)]` for the DaC measure with bond law given by `ensemble`.
pub fn dac_clue_upper_bound(
    f: &[f64],
    ensemble: &BondEnsemble,
    spec: &SubsetSpec,
    graph: &Graph,
    exact_table: Option<&ProbabilityTable>,
) -> Result<DacBoundReport> {
    let n = graph.n_vertices();
    if f.len() != 1 << n {
        return Err(Error::DimensionMismatch { expected: 1 << n, got: f.len() });
    }
    let rev = revealment(spec, graph)?;
    let delta = rev.delta;
    let support = spec_support(spec, graph)?;
    let walsh = walsh_transform(f)?;

    struct Part {
        first: f64,
        second: f64,
        empty_sq: f64,
        spectral: f64,
        singleton: f64,
        max_cluster: f64,
        sum_v_c2: f64,
        sum_v_c: f64,
        smallest_odd: f64,
    }
    let parts: Vec<Part> = ensemble
        .configs
        .par_iter()
        .map(|(b, _)| {
            let c = from_walsh(&walsh, b);
            let masks = masks_of(b);
            let sizes = b.cluster_sizes();
            let mut spectral = 0.0;
            let mut smallest_odd = 0.0;
            for (p, coef) in c.coeffs.iter().enumerate().skip(1) {
                let w = coef * coef;
                if w == 0.0 {
                    continue;
                }
                let hit: f64 = support.iter().filter(|(u, _)| within_masks(p as u64, &masks, *u)).map(|(_, q)| q).sum();
                spectral += w * hit;
                let beta = (0..masks.len()).filter(|j| p >> j & 1 == 1).map(|j| sizes[j]).min().unwrap_or(0);
                smallest_odd += w * beta as f64;
            }
            let singleton =
                (0..n).map(|u| rev.per_vertex[u] * c.coeffs[1 << b.label(u)].powi(2)).sum::<f64>();
            Part {
                first: c.empty_class(),
                second: c.conditional_second_moment(),
                empty_sq: c.empty_class().powi(2),
                spectral,
                singleton,
                max_cluster: b.largest_cluster() as f64,
                sum_v_c2: sizes.iter().map(|&s| (s * s * s) as f64).sum(),
                sum_v_c: sizes.iter().map(|&s| (s * s) as f64).sum(),
                smallest_odd,
            }
        })
        .collect();
    let avg = |g: &dyn Fn(&Part) -> f64| ensemble.average(&parts.iter().map(g).collect::<Vec<_>>());
    let (offset, _) = avg(&|p| p.first);
    let (second, _) = avg(&|p| p.second);
    let variance = second - offset * offset;
    if !(variance > 1e-300) {
        return Err(Error::Degenerate("Var(f) = 0".into()));
    }
    // centering shifts only the empty-class coefficient
    let (empty_sq, _) = avg(&|p| p.empty_sq);
    let clue_given_bonds = ((empty_sq - offset * offset) / variance).max(0.0);
    // centering leaves the nonempty classes alone; the empty class contributes clue(f|N)
    let (spectral, spectral_se) = avg(&|p| p.spectral / variance);
    let spectral = spectral + clue_given_bonds;
    let (max_cluster, max_se) = avg(&|p| p.max_cluster);
    let (smallest, _) = avg(&|p| p.smallest_odd);
    let nonempty = second - empty_sq;
    let (singleton, _) = avg(&|p| p.singleton / variance);
    // Σ_v E|C_v|^k = E Σ_j |C_j|^{k+1}
    let (c2, c2_se) = avg(&|p| p.sum_v_c2);
    let (c1, _) = avg(&|p| p.sum_v_c);
    let exact_clue = exact_table.map(|t| expected_clue_on(t, f, &support));
    Ok(DacBoundReport {
        exact_clue,
        offset,
        variance,
        spectral_bound: spectral,
        spectral_bound_se: spectral_se,
        max_cluster_bound: delta * max_cluster + clue_given_bonds,
        max_cluster_bound_se: delta * max_se,
        cluster_ratio_bound: delta * c2 / c1,
        cluster_ratio_bound_se: delta * c2_se / c1,
        singleton_sum: singleton,
        clue_given_bonds,
        delta,
        expected_max_cluster: max_cluster,
        smallest_odd_cluster_bound: if nonempty > 0.0 { delta * smallest / nonempty } else { 0.0 } + clue_given_bonds,
        exact_bonds: ensemble.exact,
    })
}

/// Exact bounds for a DaC measure given by its bond law, including the exact clue.
pub fn dac_bounds_exact(f: &[f64], bonds: &BondDistribution, spec: &SubsetSpec, graph: &Graph) -> Result<DacBoundReport> {
    let ensemble = BondEnsemble::exact(bonds, graph, crate::measures::MAX_EXACT_BOND_EDGES)?;
    let table = exact_table(&MeasureSpec::Dac { bonds: bonds.clone() }, graph)?;
    dac_clue_upper_bound(f, &ensemble, spec, graph, Some(&table))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FkBound {
    pub delta: f64,
    /// `δ Σ E|C_v|² / Σ E|C_v|`.
    pub ratio_bound: f64,
    pub ratio_bound_se: f64,
    /// `δ E[max |C_v|]`.
    pub max_bound: f64,
    pub max_bound_se: f64,
    pub samples: usize,
}

/// Right-hand sides of the FK bound on `E[clue(M|U)]` for the zero-field
/// Ising model, from independent FK samples.
pub fn fk_magnetization_bound(
    graph: &Graph,
    params: &IsingParams,
    spec: &SubsetSpec,
    samples: usize,
    rng: &mut SpinRng,
) -> Result<FkBound> {
    params.validate()?;
    if params.h != 0.0 {
        return Err(Error::NonzeroField(params.h));
    }
    let delta = revealment(spec, graph)?.delta;
    let dist = BondDistribution::Fk { beta: params.beta, j: params.j };
    let ensemble = if params.beta == 0.0 {
        BondEnsemble { configs: vec![(BondConfig::empty(graph), 1.0)], exact: true }
    } else {
        BondEnsemble::sampled(&dist, graph, samples, rng)?
    };
    fk_bound_from(&ensemble, delta, samples)
}

/// The same quantities from exact FK enumeration (`|E| ≤ max_edges`).
pub fn fk_magnetization_bound_exact(graph: &Graph, params: &IsingParams, spec: &SubsetSpec, max_edges: usize) -> Result<FkBound> {
    let delta = revealment(spec, graph)?.delta;
    let ensemble = BondEnsemble::exact(&BondDistribution::Fk { beta: params.beta, j: params.j }, graph, max_edges)?;
    let n = ensemble.configs.len();
    fk_bound_from(&ensemble, delta, n)
}

fn fk_bound_from(ensemble: &BondEnsemble, delta: f64, samples: usize) -> Result<FkBound> {
    let sq: Vec<f64> = ensemble.configs.iter().map(|(b, _)| b.cluster_sizes().iter().map(|&s| (s * s * s) as f64).sum()).collect();
    let lin: Vec<f64> = ensemble.configs.iter().map(|(b, _)| b.cluster_sizes().iter().map(|&s| (s * s) as f64).sum()).collect();
    let max: Vec<f64> = ensemble.configs.iter().map(|(b, _)| b.largest_cluster() as f64).collect();
    let (a, _) = ensemble.average(&sq);
    let (b, _) = ensemble.average(&lin);
    let (m, m_se) = ensemble.average(&max);
    // ratio standard error by the delta method on per-sample values
    let ratio_se = if ensemble.exact {
        0.0
    } else {
        let r = a / b;
        let resid: Vec<f64> = sq.iter().zip(&lin).map(|(x, y)| (x - r * y) / b).collect();
        mean_se(&resid).1
    };
    Ok(FkBound {
        delta,
        ratio_bound: delta * a / b,
        ratio_bound_se: delta * ratio_se,
        max_bound: delta * m,
        max_bound_se: delta * m_se,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Observable;
    use crate::rng::stream;

    fn brute_class(bonds: &BondConfig, t: u64, n: usize) -> Vec<u64> {
        // all S with S Δ T even on every cluster
        (0..1u64 << n).filter(|&s| ParityProfile::of_mask(bonds, s ^ t).is_empty()).collect()
    }

    #[test]
    fn cluster_examples() {
        let g = Graph::complete(5).unwrap();
        let b = clusters(&g, 0);
        assert_eq!((b.n_clusters(), class_count(&b)), (5, 1));
        let path = Graph::path(5).unwrap();
        let b = clusters(&path, 0b1111);
        assert_eq!((b.n_clusters(), class_count(&b)), (1, 16));
        let p4 = Graph::path(4).unwrap();
        let b = clusters(&p4, 0b101);
        assert_eq!((b.n_clusters(), class_count(&b)), (2, 4));
        assert_eq!(brute_class(&b, 0, 4).len(), 4);
    }

    #[test]
    fn class_size_exhaustive() {
        let g = Graph::custom(5, vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (0, 4), (1, 3)]).unwrap();
        for edges in 0..1u64 << g.n_edges() {
            let b = clusters(&g, edges);
            assert_eq!(brute_class(&b, 0, 5).len() as u128, class_count(&b));
        }
    }

    #[test]
    fn coefficient_examples() {
        let path = Graph::path(4).unwrap();
        let f: Vec<f64> = (0..16u64).map(|x| (x as f64 * 0.7).sin()).collect();
        let c = dac_coefficients(&f, &clusters(&path, 0)).unwrap();
        assert_eq!(c.coeffs, walsh_transform(&f).unwrap());

        let s1 = Observable::SingleSpin(0).tabulate(4).unwrap();
        let c = dac_coefficients(&s1, &clusters(&path, 0b111)).unwrap();
        assert!(c.empty_class().abs() < 1e-15);
        assert!((c.coeffs[1] - 1.0).abs() < 1e-15);

        let m = Observable::Magnetization.tabulate(4).unwrap();
        let b = clusters(&path, 0b001);
        let c = dac_coefficients(&m, &b).unwrap();
        for v in 0..4 {
            let p = ParityProfile::of_subset(&b, &[v]);
            assert!((c.get(&p) - b.cluster_size_of(v) as f64 / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn odd_function_has_zero_mean_and_expectation_identities() {
        let g = Graph::custom(4, vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let dist = BondDistribution::Bernoulli { p: 0.4 };
        let ens = BondEnsemble::exact(&dist, &g, 20).unwrap();
        let table = exact_table(&MeasureSpec::Dac { bonds: dist }, &g).unwrap();
        let f: Vec<f64> = (0..16u64).map(|x| (x as f64 * 1.3).cos()).collect();
        let g2: Vec<f64> = (0..16u64).map(|x| (x * x % 7) as f64).collect();
        let e = dac_expectation(&f, &g2, &ens).unwrap();
        assert!((e.e_f - table.expect(&f)).abs() < 1e-12);
        let fg: Vec<f64> = f.iter().zip(&g2).map(|(a, b)| a * b).collect();
        assert!((e.e_fg - table.expect(&fg)).abs() < 1e-12);
        let odd: Vec<f64> = (0..16).map(|x| g2[x] - g2[15 - x]).collect();
        assert!(dac_expectation(&odd, &odd, &ens).unwrap().e_f.abs() < 1e-14);
    }

    #[test]
    fn point_mass_pair() {
        let p = Graph::path(2).unwrap();
        let ens = BondEnsemble::exact(&BondDistribution::PointMass { edges: vec![0] }, &p, 20).unwrap();
        let f = Observable::Parity(vec![0, 1]).tabulate(2).unwrap();
        assert!((dac_expectation(&f, &f, &ens).unwrap().e_fg - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fk_bonds_give_ising() {
        let g = Graph::cycle(5).unwrap();
        let dac = exact_table(&MeasureSpec::Dac { bonds: BondDistribution::Fk { beta: 0.45, j: 1.0 } }, &g).unwrap();
        let ising = exact_table(&MeasureSpec::ising(0.45), &g).unwrap();
        for (a, b) in dac.probs().iter().zip(ising.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn class_within_examples() {
        let g = Graph::path(6).unwrap();
        let b = clusters(&g, 0b10011);
        let empty = ParityProfile { bits: 0, k: b.n_clusters() };
        assert!(class_within(&empty, &b, &SubsetMask::empty(6)).unwrap());
        let odd = ParityProfile::of_subset(&b, &[3]);
        assert!(!class_within(&odd, &b, &SubsetMask::from_indices(6, &[0, 1])).unwrap());
        assert!(class_within(&ParityProfile { bits: 0, k: 1 }, &b, &SubsetMask::empty(6)).is_err());
        // literal definition
        for t in 0..64u64 {
            let p = ParityProfile::of_mask(&b, t);
            let class = brute_class(&b, t, 6);
            for u in 0..64u64 {
                let literal = class.iter().any(|s| s & !u == 0);
                assert_eq!(class_within(&p, &b, &SubsetMask::from_bits(6, u)).unwrap(), literal);
            }
        }
    }

    #[test]
    fn spectral_sample_examples() {
        let mut rng = stream(3, 0);
        let path = Graph::path(3).unwrap();
        let s1 = Observable::SingleSpin(0).tabulate(3).unwrap();
        let c = dac_coefficients(&s1, &clusters(&path, 0b11)).unwrap();
        for _ in 0..20 {
            assert_eq!(spectral_sample_dac(&c, &mut rng).unwrap().bits, 1);
        }
        let zero = dac_coefficients(&[0.0; 8], &clusters(&path, 0)).unwrap();
        assert!(spectral_sample_dac(&zero, &mut rng).is_err());
    }

    #[test]
    fn empty_bonds_magnetization_matches_iid() {
        let g = Graph::cycle(6).unwrap();
        let m = Observable::Magnetization.tabulate(6).unwrap();
        let r = dac_bounds_exact(&m, &BondDistribution::PointMass { edges: vec![] }, &SubsetSpec::uniform_k(2), &g).unwrap();
        assert!((r.cluster_ratio_bound - 2.0 / 6.0).abs() < 1e-12);
        assert!((r.exact_clue.unwrap() - 2.0 / 6.0).abs() < 1e-12);
        assert!(r.clue_given_bonds.abs() < 1e-12);
    }

    #[test]
    fn path_bound_chain() {
        let g = Graph::path(6).unwrap();
        let m = Observable::Magnetization.tabulate(6).unwrap();
        let r = dac_bounds_exact(&m, &BondDistribution::Bernoulli { p: 0.5 }, &SubsetSpec::uniform_k(2), &g).unwrap();
        let exact = r.exact_clue.unwrap();
        assert!(exact <= r.spectral_bound + 1e-9);
        assert!(r.spectral_bound <= r.max_cluster_bound + 1e-9);
        assert!(r.spectral_bound <= r.cluster_ratio_bound + 1e-9);
        assert!((r.singleton_sum - r.cluster_ratio_bound).abs() < 1e-9);
    }

    #[test]
    fn fk_bound_at_zero_and_exact() {
        let g = Graph::torus(2, 4).unwrap();
        let mut rng = stream(5, 0);
        let spec = SubsetSpec::uniform_k(4);
        let b = fk_magnetization_bound(&g, &IsingParams::new(0.0), &spec, 10, &mut rng).unwrap();
        assert!((b.ratio_bound - 0.25).abs() < 1e-15 && (b.max_bound - 0.25).abs() < 1e-15);
        let p2 = Graph::path(2).unwrap();
        let spec = SubsetSpec::uniform_k(1);
        let exact = fk_magnetization_bound_exact(&p2, &IsingParams::new(0.5), &spec, 20).unwrap();
        let q = 1.0 - (-1.0f64).exp();
        // open: one cluster of 2; closed: two singletons; FK weights p·2 vs (1−p)·4
        let w_open = q * 2.0 / (q * 2.0 + (1.0 - q) * 4.0);
        let want = 0.5 * (w_open * 8.0 + (1.0 - w_open) * 2.0) / (w_open * 4.0 + (1.0 - w_open) * 2.0);
        assert!((exact.ratio_bound - want).abs() < 1e-12);
    }
}
