//! Ising Gibbs measures: Hamiltonian, heat-bath Glauber dynamics (optionally
//! with frozen vertices), Swendsen-Wang, FK bonds and Edwards-Sokal colouring.
//!
//! The Gibbs weight of `σ` is `exp(−β H(σ))` with
//! `H(σ) = −J Σ_{xy∈E} σ_x σ_y − h Σ_x σ_x`. Under this convention the
//! Edwards-Sokal bond probability is `p = 1 − exp(−2βJ)`.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitSet;
use crate::error::{Error, Result};
use crate::graphs::{Graph, SubsetMask};
use crate::rng::{stream, SpinRng};
use crate::spin::SpinConfig;
use crate::unionfind::UnionFind;

/// Critical inverse temperature of the square-lattice model, `ln(1+√2)/2`.
pub const BETA_C_2D: f64 = 0.440_686_793_509_771_6;

/// Default Swendsen-Wang burn-in (steps).
pub const SW_BURN_IN: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingParams {
    pub beta: f64,
    #[serde(default = "one", alias = "J")]
    pub j: f64,
    #[serde(default)]
    pub h: f64,
}

fn one() -> f64 {
    1.0
}

impl IsingParams {
    pub fn new(beta: f64) -> Self {
        Self { beta, j: 1.0, h: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if !self.j.is_finite() || self.j <= 0.0 {
            return Err(Error::InvalidParameter(format!("J must be finite and > 0, got {}", self.j)));
        }
        if !self.h.is_finite() {
            return Err(Error::InvalidParameter("h must be finite".into()));
        }
        Ok(())
    }

    fn require_zero_field(&self) -> Result<()> {
        self.validate()?;
        if self.h != 0.0 {
            return Err(Error::NonzeroField(self.h));
        }
        Ok(())
    }

    /// Edwards-Sokal bond probability `1 − exp(−2βJ)`.
    pub fn p_bond(&self) -> f64 {
        -(-2.0 * self.beta * self.j).exp_m1()
    }
}

/// `atanh(1/(d−1))`, the uniqueness threshold on the `d`-regular tree.
pub fn tree_uniqueness_beta(d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::InvalidParameter(format!("tree degree must be >= 3, got {d}")));
    }
    Ok((1.0 / (d as f64 - 1.0)).atanh())
}

pub fn hamiltonian(graph: &Graph, params: &IsingParams, config: &SpinConfig) -> f64 {
    assert_eq!(graph.n_vertices(), config.len(), "dimension mismatch");
    let bond: i64 = graph.edges().iter().map(|&(u, v)| (config.get(u) * config.get(v)) as i64).sum();
    -params.j * bond as f64 - params.h * config.total() as f64
}

/// Hamiltonian of the configuration mask `x` (`n ≤ 64`).
pub fn hamiltonian_bits(graph: &Graph, params: &IsingParams, x: u64) -> f64 {
    let n = graph.n_vertices();
    let disagree = graph.edges().iter().filter(|&&(u, v)| (x >> u ^ x >> v) & 1 == 1).count() as i64;
    let agree = graph.n_edges() as i64 - disagree;
    let total = 2 * x.count_ones() as i64 - n as i64;
    -params.j * (agree - disagree) as f64 - params.h * total as f64
}

/// Single-owner Markov chain state.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub config: SpinConfig,
    pub sweeps: u64,
    pub rng: SpinRng,
    seed: u64,
    stream: u64,
}

impl ChainState {
    pub fn new(config: SpinConfig, seed: u64, stream_id: u64) -> Self {
        Self { config, sweeps: 0, rng: stream(seed, stream_id), seed, stream: stream_id }
    }

    /// Uniformly random start.
    pub fn random(n: usize, seed: u64, stream_id: u64) -> Self {
        let mut state = Self::new(SpinConfig::all_plus(n), seed, stream_id);
        state.config = SpinConfig::random(n, &mut state.rng);
        state
    }

    /// Binary checkpoint, little-endian: magic `SPCK`, version u16, n u64,
    /// sweeps u64, seed u64, stream u64, word position u128, then the
    /// configuration as `⌈n/64⌉` u64 words.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"SPCK")?;
        w.write_all(&1u16.to_le_bytes())?;
        w.write_all(&(self.config.len() as u64).to_le_bytes())?;
        w.write_all(&self.sweeps.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.stream.to_le_bytes())?;
        w.write_all(&self.rng.get_word_pos().to_le_bytes())?;
        for word in self.config.bits().words() {
            w.write_all(&word.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"SPCK" {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != 1 {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let read_u64 = |r: &mut R| -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let n = read_u64(&mut r)? as usize;
        let sweeps = read_u64(&mut r)?;
        let seed = read_u64(&mut r)?;
        let stream_id = read_u64(&mut r)?;
        let mut b16 = [0u8; 16];
        r.read_exact(&mut b16)?;
        let word_pos = u128::from_le_bytes(b16);
        let mut bits = BitSet::new(n);
        for word in bits.words_mut() {
            *word = read_u64(&mut r)?;
        }
        if n % 64 != 0 && bits.words().last().is_some_and(|w| w >> (n % 64) != 0) {
            return Err(Error::Checkpoint("configuration has bits beyond n".into()));
        }
        let mut state = Self::new(SpinConfig::from_bitset(bits), seed, stream_id);
        state.sweeps = sweeps;
        state.rng.set_word_pos(word_pos);
        Ok(state)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanOrder {
    /// Vertices in index order.
    #[default]
    Systematic,
    /// `n` uniformly chosen vertices per sweep.
    Random,
}

/// Heat-bath probabilities of `+1` indexed by the neighbour sum offset by the max degree.
struct HeatBath {
    offset: i64,
    p_plus: Vec<f64>,
}

impl HeatBath {
    fn new(graph: &Graph, params: &IsingParams) -> Self {
        let d = graph.max_degree() as i64;
        let p_plus = (-d..=d)
            .map(|m| {
                let field = params.j * m as f64 + params.h;
                1.0 / (1.0 + (-2.0 * params.beta * field).exp())
            })
            .collect();
        Self { offset: d, p_plus }
    }

    #[inline]
    fn prob(&self, m: i64) -> f64 {
        self.p_plus[(m + self.offset) as usize]
    }
}

#[inline]
fn neighbor_sum(graph: &Graph, config: &SpinConfig, v: usize) -> i64 {
    graph.neighbors(v).iter().map(|&(w, _)| config.get(w as usize) as i64).sum()
}

/// One heat-bath sweep; vertices in `frozen` are never touched.
pub fn glauber_sweep(state: &mut ChainState, graph: &Graph, params: &IsingParams, frozen: Option<&SubsetMask>) {
    glauber_sweep_ordered(state, graph, params, frozen, ScanOrder::Systematic)
}

pub fn glauber_sweep_ordered(
    state: &mut ChainState,
    graph: &Graph,
    params: &IsingParams,
    frozen: Option<&SubsetMask>,
    order: ScanOrder,
) {
    let hb = HeatBath::new(graph, params);
    let n = graph.n_vertices();
    let update = |v: usize, state: &mut ChainState| {
        if frozen.is_some_and(|f| f.contains(v)) {
            return;
        }
        let p = hb.prob(neighbor_sum(graph, &state.config, v));
        let u: f64 = state.rng.gen();
        state.config.set(v, if u < p { 1 } else { -1 });
    };
    match order {
        ScanOrder::Systematic => (0..n).for_each(|v| update(v, state)),
        ScanOrder::Random => {
            for _ in 0..n {
                let v = state.rng.gen_range(0..n);
                update(v, state);
            }
        }
    }
    state.sweeps += 1;
}

/// Heat-bath sweeps restricted to `free` vertices, driven by caller-supplied
/// uniforms. Two copies fed the same uniforms stay ordered (monotone coupling).
pub(crate) fn heat_bath_with_uniforms(
    config: &mut SpinConfig,
    graph: &Graph,
    params: &IsingParams,
    free: &[usize],
    uniforms: &[f64],
) {
    let hb = HeatBath::new(graph, params);
    for (&v, &u) in free.iter().zip(uniforms) {
        let p = hb.prob(neighbor_sum(graph, config, v));
        config.set(v, if u < p { 1 } else { -1 });
    }
}

/// Open edges and the induced cluster labelling.
#[derive(Clone, Debug, PartialEq)]
pub struct BondConfig {
    open: BitSet,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl BondConfig {
    pub fn from_open(graph: &Graph, open: BitSet) -> Self {
        assert_eq!(open.len(), graph.n_edges());
        let mut uf = UnionFind::new(graph.n_vertices());
        for e in open.iter() {
            let (u, v) = graph.edges()[e];
            uf.union(u, v);
        }
        let (labels, sizes) = uf.canonical_labels();
        Self { open, labels, sizes }
    }

    pub fn from_edge_indices(graph: &Graph, edges: &[usize]) -> Self {
        Self::from_open(graph, BitSet::from_indices(graph.n_edges(), edges))
    }

    pub fn empty(graph: &Graph) -> Self {
        Self::from_open(graph, BitSet::new(graph.n_edges()))
    }

    pub fn open(&self) -> &BitSet {
        &self.open
    }

    pub fn is_open(&self, e: usize) -> bool {
        self.open.contains(e)
    }

    pub fn n_open(&self) -> usize {
        self.open.count()
    }

    /// Cluster label of each vertex; labels are ordered by smallest member.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> usize {
        self.labels[v] as usize
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn cluster_size_of(&self, v: usize) -> usize {
        self.sizes[self.labels[v] as usize]
    }

    pub fn largest_cluster(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    /// Open-edge indices, ascending.
    pub fn open_edges(&self) -> Vec<usize> {
        self.open.iter().collect()
    }

    /// `log2 |⟨N⟩| = |V| − k(N)`.
    pub fn log2_class_count(&self) -> usize {
        self.labels.len() - self.sizes.len()
    }
}

impl Serialize for BondConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.open.iter())
    }
}

/// Open each monochromatic edge independently with probability `1 − e^{−2βJ}`.
pub fn sample_bonds(graph: &Graph, params: &IsingParams, config: &SpinConfig, rng: &mut SpinRng) -> Result<BondConfig> {
    params.require_zero_field()?;
    let p = params.p_bond();
    let mut open = BitSet::new(graph.n_edges());
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        if config.get(u) == config.get(v) && rng.gen::<f64>() < p {
            open.insert(e);
        }
    }
    Ok(BondConfig::from_open(graph, open))
}

/// One fair coin per cluster, drawn in label order.
pub fn edwards_sokal_color(bonds: &BondConfig, rng: &mut SpinRng) -> SpinConfig {
    let coins: Vec<bool> = (0..bonds.n_clusters()).map(|_| rng.gen()).collect();
    let mut config = SpinConfig::all_minus(bonds.labels.len());
    for (v, &l) in bonds.labels.iter().enumerate() {
        if coins[l as usize] {
            config.set(v, 1);
        }
    }
    config
}

/// One Swendsen-Wang step; returns the intermediate bond layer.
pub fn swendsen_wang_step(state: &mut ChainState, graph: &Graph, params: &IsingParams) -> Result<BondConfig> {
    let bonds = sample_bonds(graph, params, &state.config, &mut state.rng)?;
    state.config = edwards_sokal_color(&bonds, &mut state.rng);
    state.sweeps += 1;
    Ok(bonds)
}

/// Bond layer of a Swendsen-Wang chain after `sweeps` steps from a uniform
/// start: approximately FK(p, q = 2).
pub fn fk_sample(graph: &Graph, params: &IsingParams, rng: &mut SpinRng, sweeps: usize) -> Result<BondConfig> {
    params.require_zero_field()?;
    let seed: u64 = rng.gen();
    let mut state = ChainState::random(graph.n_vertices(), seed, 0);
    let mut bonds = BondConfig::empty(graph);
    for _ in 0..sweeps.max(1) {
        bonds = swendsen_wang_step(&mut state, graph, params)?;
    }
    Ok(bonds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_examples() {
        let g = Graph::cycle(4).unwrap();
        let p = IsingParams::new(1.0);
        assert_eq!(hamiltonian(&g, &p, &SpinConfig::all_plus(4)), -4.0);
        assert_eq!(hamiltonian(&g, &p, &SpinConfig::from_spins(&[1, -1, 1, -1])), 4.0);
        assert_eq!(hamiltonian(&g, &p, &SpinConfig::from_spins(&[-1, 1, 1, 1])), 0.0);
        let q = IsingParams { beta: 1.0, j: 0.7, h: 0.3 };
        for x in 0..16u64 {
            let c = SpinConfig::from_bits(4, x);
            assert!((hamiltonian(&g, &q, &c) - hamiltonian_bits(&g, &q, x)).abs() < 1e-12);
        }
    }

    #[test]
    fn tree_uniqueness_values() {
        assert!((tree_uniqueness_beta(3).unwrap() - 0.549_306_144_334_054_8).abs() < 1e-12);
        assert!((tree_uniqueness_beta(5).unwrap() - 0.255_412_811_882_995_3).abs() < 1e-12);
        assert!(tree_uniqueness_beta(2).is_err());
        assert!((3..20).all(|d| tree_uniqueness_beta(d + 1).unwrap() < tree_uniqueness_beta(d).unwrap()));
    }

    #[test]
    fn critical_constant() {
        assert!((BETA_C_2D - (1.0 + 2f64.sqrt()).ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn frozen_everything_is_identity() {
        let g = Graph::cycle(6).unwrap();
        let mut s = ChainState::random(6, 3, 0);
        let before = s.config.clone();
        glauber_sweep(&mut s, &g, &IsingParams::new(0.7), Some(&SubsetMask::full(6)));
        assert_eq!(s.config, before);
        assert_eq!(s.sweeps, 1);
    }

    #[test]
    fn beta_zero_sw_opens_nothing_and_infinite_beta_opens_all_monochromatic() {
        let g = Graph::cycle(5).unwrap();
        let mut s = ChainState::new(SpinConfig::all_plus(5), 1, 0);
        let b = swendsen_wang_step(&mut s, &g, &IsingParams::new(0.0)).unwrap();
        assert_eq!(b.n_open(), 0);
        assert_eq!(b.n_clusters(), 5);
        let mut rng = stream(1, 1);
        let c = SpinConfig::from_spins(&[1, 1, -1, -1, 1]);
        let b = sample_bonds(&g, &IsingParams::new(1e6), &c, &mut rng).unwrap();
        let mono: Vec<usize> = g.edges().iter().enumerate().filter(|(_, &(u, v))| c.get(u) == c.get(v)).map(|(e, _)| e).collect();
        assert_eq!(b.open_edges(), mono);
    }

    #[test]
    fn fk_rejects_field() {
        let g = Graph::cycle(4).unwrap();
        let mut rng = stream(0, 0);
        let p = IsingParams { beta: 0.3, j: 1.0, h: 0.1 };
        assert!(matches!(fk_sample(&g, &p, &mut rng, 5), Err(Error::NonzeroField(_))));
        let b = fk_sample(&g, &IsingParams::new(0.0), &mut rng, 5).unwrap();
        assert_eq!(b.n_clusters(), 4);
    }

    #[test]
    fn coloring_is_constant_on_clusters() {
        let g = Graph::path(3).unwrap();
        let mut rng = stream(2, 0);
        let full = BondConfig::from_edge_indices(&g, &[0, 1]);
        for _ in 0..20 {
            let c = edwards_sokal_color(&full, &mut rng);
            assert!(c.total().abs() == 3);
        }
        let empty = BondConfig::empty(&g);
        let mut seen = [0usize; 8];
        for _ in 0..8000 {
            seen[edwards_sokal_color(&empty, &mut rng).to_bits() as usize] += 1;
        }
        assert!(seen.iter().all(|&c| (800..1200).contains(&c)));
    }

    #[test]
    fn checkpoint_roundtrip_resumes_identically() {
        let g = Graph::torus(2, 5).unwrap();
        let p = IsingParams::new(0.4);
        let mut a = ChainState::random(25, 11, 4);
        for _ in 0..3 {
            glauber_sweep(&mut a, &g, &p, None);
        }
        let mut buf = Vec::new();
        a.write_checkpoint(&mut buf).unwrap();
        let mut b = ChainState::read_checkpoint(&buf[..]).unwrap();
        assert_eq!(b.sweeps, 3);
        glauber_sweep(&mut a, &g, &p, None);
        glauber_sweep(&mut b, &g, &p, None);
        assert_eq!(a.config, b.config);
        buf[0] = b'X';
        assert!(matches!(ChainState::read_checkpoint(&buf[..]), Err(Error::Checkpoint(_))));
    }
}
