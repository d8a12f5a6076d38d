#![allow(dead_code)]

use spinlab::graphs::{Graph, SubsetMask};
use spinlab::ising::{glauber_sweep, swendsen_wang_step, ChainState, IsingParams};
use spinlab::measures::{exact_table, MeasureSpec};
use spinlab::stats::{batch_means, total_variation};
use spinlab::SpinConfig;

/// Ising fixtures with at most 8 spins.
pub fn fixtures() -> Vec<(&'static str, Graph, IsingParams)> {
    vec![
        ("cycle6", Graph::cycle(6).unwrap(), IsingParams::new(0.4)),
        ("cycle8", Graph::cycle(8).unwrap(), IsingParams::new(0.3)),
        ("path5_field", Graph::path(5).unwrap(), IsingParams { beta: 0.6, j: 1.0, h: 0.2 }),
        ("complete4", Graph::complete(4).unwrap(), IsingParams::new(0.3)),
        ("box2x2", Graph::lattice_box(2, 2).unwrap(), IsingParams::new(0.5)),
    ]
}

pub fn exact_probs(graph: &Graph, params: &IsingParams) -> Vec<f64> {
    exact_table(&MeasureSpec::Ising(*params), graph).unwrap().probs().to_vec()
}

fn empirical(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

pub fn glauber_tv(graph: &Graph, params: &IsingParams, sweeps: usize, seed: u64) -> f64 {
    let n = graph.n_vertices();
    let mut state = ChainState::random(n, seed, 1);
    for _ in 0..200 {
        glauber_sweep(&mut state, graph, params, None);
    }
    let mut counts = vec![0u64; 1 << n];
    for _ in 0..sweeps {
        glauber_sweep(&mut state, graph, params, None);
        counts[state.config.to_bits() as usize] += 1;
    }
    total_variation(&empirical(&counts), &exact_probs(graph, params))
}

/// Glauber with the spins on `frozen` pinned to their values in `pinned`;
/// compared with the exact conditional law.
pub fn frozen_glauber_tv(graph: &Graph, params: &IsingParams, frozen: &[usize], pinned: u64, sweeps: usize, seed: u64) -> f64 {
    let n = graph.n_vertices();
    let mask = SubsetMask::from_indices(n, frozen);
    let fbits = mask.to_bits();
    let mut state = ChainState::new(SpinConfig::from_bits(n, pinned), seed, 2);
    for _ in 0..200 {
        glauber_sweep(&mut state, graph, params, Some(&mask));
    }
    let mut counts = vec![0u64; 1 << n];
    for _ in 0..sweeps {
        glauber_sweep(&mut state, graph, params, Some(&mask));
        counts[state.config.to_bits() as usize] += 1;
    }
    let mut cond: Vec<f64> = exact_probs(graph, params)
        .iter()
        .enumerate()
        .map(|(x, &p)| if (x as u64 ^ pinned) & fbits == 0 { p } else { 0.0 })
        .collect();
    let z: f64 = cond.iter().sum();
    cond.iter_mut().for_each(|p| *p /= z);
    total_variation(&empirical(&counts), &cond)
}

pub fn swendsen_wang_tv(graph: &Graph, params: &IsingParams, steps: usize, seed: u64) -> f64 {
    let n = graph.n_vertices();
    let mut state = ChainState::random(n, seed, 3);
    for _ in 0..200 {
        swendsen_wang_step(&mut state, graph, params).unwrap();
    }
    let mut counts = vec![0u64; 1 << n];
    for _ in 0..steps {
        swendsen_wang_step(&mut state, graph, params).unwrap();
        counts[state.config.to_bits() as usize] += 1;
    }
    total_variation(&empirical(&counts), &exact_probs(graph, params))
}

/// `E[σ_u σ_v]` exactly and `P[u ↔ v]` from the bond layer of a Swendsen-Wang
/// chain, with a batch-means standard error.
pub fn edwards_sokal_two_point(graph: &Graph, params: &IsingParams, u: usize, v: usize, steps: usize, seed: u64) -> (f64, f64, f64) {
    let n = graph.n_vertices();
    let probs = exact_probs(graph, params);
    let exact: f64 = probs
        .iter()
        .enumerate()
        .map(|(x, p)| {
            let s = |w: usize| if x >> w & 1 == 1 { 1.0 } else { -1.0 };
            p * s(u) * s(v)
        })
        .sum();
    let mut state = ChainState::random(n, seed, 4);
    for _ in 0..200 {
        swendsen_wang_step(&mut state, graph, params).unwrap();
    }
    let xs: Vec<f64> = (0..steps)
        .map(|_| {
            let b = swendsen_wang_step(&mut state, graph, params).unwrap();
            (b.label(u) == b.label(v)) as u8 as f64
        })
        .collect();
    let (mean, se, _) = batch_means(&xs, 50);
    (exact, mean, se)
}
