use std::collections::BTreeSet;

use proptest::prelude::*;
use serde_json::json;

use spinlab::block_dyn::{block_transition_matrix, spectrum};
use spinlab::clue::{clue_exact, conditional_expectation};
use spinlab::curie_weiss::cw_magnetization_pmf;
use spinlab::dac::{clusters, dac_coefficients, ParityProfile};
use spinlab::experiments::{validate_params, Recipe};
use spinlab::graphs::{revealment, Graph, SubsetSpec};
use spinlab::ising::IsingParams;
use spinlab::measures::{exact_table, MeasureSpec, ProbabilityTable, TableKind};

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect()
}

/// Random simple graph on 2..=6 vertices with at least one edge.
fn small_graph() -> impl Strategy<Value = Graph> {
    (2usize..=6, any::<u64>()).prop_map(|(n, mask)| {
        let all = pairs(n);
        let mut edges: Vec<_> = all.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, e)| *e).collect();
        if edges.is_empty() {
            edges.push((0, 1));
        }
        Graph::custom(n, edges).unwrap()
    })
}

fn random_table() -> impl Strategy<Value = ProbabilityTable> {
    (1usize..=6).prop_flat_map(|n| {
        prop::collection::vec(0.01f64..1.0, 1 << n)
            .prop_map(move |w| ProbabilityTable::from_weights(n, TableKind::Custom, w).unwrap())
    })
}

/// Vertex labelling by breadth-first search over the open edges.
fn bfs_components(n: usize, edges: &[(usize, usize)], open: u64) -> Vec<BTreeSet<usize>> {
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut comp = BTreeSet::from([s]);
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(x) = stack.pop() {
            for (e, &(a, b)) in edges.iter().enumerate() {
                if open >> e & 1 == 1 && (a == x || b == x) {
                    let y = a + b - x;
                    if !seen[y] {
                        seen[y] = true;
                        comp.insert(y);
                        stack.push(y);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn translations_preserve_edges(kind in 0usize..3, size in 3usize..7) {
        let g = match kind {
            0 => Graph::cycle(size).unwrap(),
            1 => Graph::torus(2, size).unwrap(),
            _ => Graph::complete(size).unwrap(),
        };
        let edges: BTreeSet<(usize, usize)> = g.edges().iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
        prop_assert_eq!(edges.len(), g.n_edges());
        prop_assert!(g.edges().iter().all(|&(u, v)| u != v));
        let t = g.translations().expect("transitive kinds carry translations");
        for h in 0..t.order() {
            for &(u, v) in g.edges() {
                let (a, b) = (t.apply(h, u), t.apply(h, v));
                prop_assert!(edges.contains(&(a.min(b), a.max(b))));
            }
        }
        let orbit: BTreeSet<usize> = (0..t.order()).map(|h| t.apply(h, 0)).collect();
        prop_assert_eq!(orbit.len(), g.n_vertices());
    }

    #[test]
    fn revealment_in_unit_interval(g in small_graph(), p in 0.0f64..=1.0, k in 0usize..6, fixed in any::<u8>()) {
        let n = g.n_vertices();
        for spec in [SubsetSpec::bernoulli(p), SubsetSpec::uniform_k(k.min(n))] {
            let r = revealment(&spec, &g).unwrap();
            prop_assert!(r.per_vertex.iter().all(|&d| (0.0..=1.0 + 1e-12).contains(&d)));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r.delta));
        }
        let members: Vec<usize> = (0..n).filter(|v| fixed >> v & 1 == 1).collect();
        let r = revealment(&SubsetSpec::fixed(&members), &g).unwrap();
        for v in 0..n {
            prop_assert_eq!(r.per_vertex[v], if members.contains(&v) { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn union_of_copies_revealment(g in small_graph(), p in 0.0f64..=1.0, k in 1usize..4) {
        let r = revealment(&SubsetSpec::union_of_copies(SubsetSpec::bernoulli(p), k), &g).unwrap();
        let expected = 1.0 - (1.0 - p).powi(k as i32);
        prop_assert!(r.per_vertex.iter().all(|d| (d - expected).abs() < 1e-12));
    }

    #[test]
    fn ising_tables_are_normalized(g in small_graph(), beta in 0.0f64..1.5, h in -0.5f64..0.5) {
        let t = exact_table(&MeasureSpec::Ising(IsingParams { beta, j: 1.0, h }), &g).unwrap();
        prop_assert!(t.probs().iter().all(|&p| p >= 0.0));
        prop_assert!((t.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clue_in_unit_interval_and_tower(t in random_table(), seed in any::<u64>()) {
        let n = t.n();
        let f: Vec<f64> = (0..t.len()).map(|x| ((x as u64 ^ seed).wrapping_mul(0x9E3779B97F4A7C15) >> 40) as f64).collect();
        for u in 0..1u64 << n {
            let c = clue_exact(&t, &f, u);
            prop_assert!((-1e-10..=1.0 + 1e-10).contains(&c), "clue {}", c);
            let y = conditional_expectation(&t, &f, u);
            prop_assert!((t.expect(&y) - t.expect(&f)).abs() <= 1e-10 * t.expect(&f).abs().max(1.0));
        }
    }

    #[test]
    fn cw_pmf_normalized_and_symmetric(n in 1usize..400, beta in 0.0f64..3.0) {
        let pmf = cw_magnetization_pmf(n, beta).unwrap();
        prop_assert!((pmf.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for j in 0..=n {
            prop_assert!((pmf.probs[j] - pmf.probs[n - j]).abs() <= 1e-13 * pmf.probs[j].max(1e-300));
        }
    }

    #[test]
    fn block_dynamics_is_reversible(g in small_graph(), beta in 0.0f64..1.0, p in 0.05f64..0.95) {
        let table = exact_table(&MeasureSpec::ising(beta), &g).unwrap();
        let bt = block_transition_matrix(&table, &SubsetSpec::bernoulli(p), &g).unwrap();
        prop_assert!(bt.row_sum_error() < 1e-12);
        prop_assert!(bt.reversibility_error() < 1e-10);
        let s = spectrum(&bt).unwrap();
        prop_assert!(s.lambda2 <= 1.0 + 1e-9 && s.lambda2 >= -1.0 - 1e-9);
        prop_assert!((-1e-9..=2.0 + 1e-9).contains(&s.gap));
        if let Some(lmin) = s.lambda_min {
            prop_assert!((s.lambda_star - s.lambda2.abs().max(lmin.abs())).abs() < 1e-12);
        }
    }

    #[test]
    fn clusters_match_breadth_first_search(g in small_graph(), open in any::<u64>()) {
        let open = open & ((1u64 << g.n_edges()) - 1);
        let b = clusters(&g, open);
        let comps = bfs_components(g.n_vertices(), g.edges(), open);
        prop_assert_eq!(b.n_clusters(), comps.len());
        for c in &comps {
            let l = b.label(*c.first().unwrap());
            prop_assert!(c.iter().all(|&v| b.label(v) == l));
            prop_assert_eq!(b.cluster_size_of(*c.first().unwrap()), c.len());
        }
    }

    #[test]
    fn dac_profiles_and_normalization(g in small_graph(), open in any::<u64>(), seed in any::<u64>()) {
        let n = g.n_vertices();
        let b = clusters(&g, open & ((1u64 << g.n_edges()) - 1));
        let k = b.n_clusters();
        let f: Vec<f64> = (0..1usize << n).map(|x| (((x as u64) ^ seed).wrapping_mul(0x2545F4914F6CDD1D) >> 44) as f64 / 1e5).collect();
        let c = dac_coefficients(&f, &b).unwrap();
        prop_assert_eq!(c.coeffs.len(), 1usize << k);
        // E[f² | A_N]: average of f² over the 2^k cluster colourings
        let second: f64 = (0..1u64 << k)
            .map(|col| {
                let x = (0..n).filter(|&v| col >> b.label(v) & 1 == 1).fold(0usize, |a, v| a | 1 << v);
                f[x] * f[x]
            })
            .sum::<f64>() / (1u64 << k) as f64;
        prop_assert!((c.conditional_second_moment() - second).abs() <= 1e-10 * second.max(1.0));
        for bits in 0..1u64 << k {
            let p = ParityProfile { bits, k };
            let rep = p.representative(&b).unwrap();
            prop_assert_eq!(rep.len(), bits.count_ones() as usize);
            prop_assert_eq!(ParityProfile::of_subset(&b, &rep), p);
        }
    }

    #[test]
    fn unknown_parameters_rejected(i in 0usize..13, key in "[a-z]{12}") {
        let r = Recipe::ALL[i];
        let bogus = json!({ key: 1 });
        let empty = json!({});
        prop_assert!(validate_params(r, &bogus).is_err());
        prop_assert!(validate_params(r, &empty).is_ok());
    }
}
