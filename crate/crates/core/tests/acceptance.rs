//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::{json, Value};

use spinlab::clue::{boost_reconstruction, clue_exact, operator_identities, ConditionalFamily};
use spinlab::clue::spec_support;
use spinlab::experiments::{run, run_recipe, ExperimentConfig, Recipe, Status};
use spinlab::graphs::{Graph, SubsetSpec};
use spinlab::measures::{exact_table, MeasureSpec, Observable, ProbabilityTable, TableKind};
use spinlab::rng::substream;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

/// Run a recipe and require every check to pass within `limit`.
fn recipe_criterion(recipe: Recipe, params: Value, limit: Duration) -> Outcome {
    let start = Instant::now();
    let out = match run_recipe(recipe, &params, 1, limit) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("{recipe}: error {e}")),
    };
    let secs = start.elapsed();
    let failed: Vec<String> = out
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} ({} {} {})", c.name, c.value, c.relation, c.bound))
        .collect();
    let ok = failed.is_empty() && out.status() == Status::Pass && secs <= limit;
    let detail = if failed.is_empty() {
        format!("{recipe}: {} checks, {:.1}s", out.checks.len(), secs.as_secs_f64())
    } else {
        format!("{recipe}: failed {}", failed.join("; "))
    };
    outcome(ok, detail)
}

fn merge(parts: Vec<Outcome>) -> Outcome {
    outcome(parts.iter().all(|o| o.passed), parts.into_iter().map(|o| o.detail).collect::<Vec<_>>().join(" | "))
}

fn eigenclue() -> Outcome {
    recipe_criterion(Recipe::EigenclueVerify, json!({}), Duration::from_secs(60))
}

fn product_bound() -> Outcome {
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut parity_nonzero = 0usize;
    let mut cases = 0usize;
    for n in 1..=12usize {
        let graph = Graph::complete(n.max(2)).unwrap();
        let graph = if n == 1 { Graph::custom(1, vec![]).unwrap() } else { graph };
        let maj = Observable::Majority.tabulate(n).unwrap();
        let parity = Observable::Parity((0..n).collect()).tabulate(n).unwrap();
        for p_plus in [0.5, 0.3] {
            let table = exact_table(&MeasureSpec::Product { p_plus, per_vertex: None }, &graph).unwrap();
            for u in 0..1u64 << n {
                let bound = u.count_ones() as f64 / n as f64;
                worst = worst.max(clue_exact(&table, &maj, u) - bound);
                if p_plus == 0.5 {
                    let c = clue_exact(&table, &parity, u);
                    worst = worst.max(c - bound);
                    if u != (1u64 << n) - 1 && c != 0.0 {
                        parity_nonzero += 1;
                    }
                }
                cases += 1;
            }
        }
    }
    outcome(
        worst <= 1e-12 && parity_nonzero == 0,
        format!("{cases} subsets, max clue - |U|/n = {worst:e}, nonzero parity clues on proper U: {parity_nonzero}"),
    )
}

fn ellis_newman() -> Outcome {
    recipe_criterion(Recipe::EnMoments, json!({}), Duration::from_secs(60))
}

fn cw_entropy() -> Outcome {
    recipe_criterion(Recipe::CwEntropy, json!({}), Duration::from_secs(600))
}

fn cw_reconstruction() -> Outcome {
    merge(vec![
        recipe_criterion(Recipe::CwGuess, json!({}), Duration::from_secs(600)),
        recipe_criterion(Recipe::CwClue, json!({ "betas": [], "ks": [] }), Duration::from_secs(600)),
    ])
}

fn random_function(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn operator_identities_criterion() -> Outcome {
    let mut worst_var: f64 = 0.0;
    let mut worst_strange: f64 = 0.0;
    let mut worst_product: f64 = 0.0;
    let mut worst_boost: f64 = f64::NEG_INFINITY;
    for i in 0..50u64 {
        let mut rng = substream(2024, 1, i);
        let n = rng.gen_range(2..=8usize);
        let weights: Vec<f64> = (0..1usize << n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let table = ProbabilityTable::from_weights(n, TableKind::Custom, weights).unwrap();
        let graph = Graph::complete(n).unwrap();
        let spec = if rng.gen::<bool>() {
            SubsetSpec::uniform_k(rng.gen_range(1..n))
        } else {
            SubsetSpec::bernoulli(rng.gen_range(0.1..0.6))
        };
        let f = random_function(&mut rng, 1 << n);
        let z = random_function(&mut rng, 1 << n);
        let support = spec_support(&spec, &graph).unwrap();
        let family = ConditionalFamily::conditional_means(&table, &f, support);
        let id = operator_identities(&table, &z, &family).unwrap();
        worst_var = worst_var.max((id.var_m - id.avg_pair_corr).abs());
        worst_strange = worst_strange.max((id.avg_pair_corr - id.corr_m_y * id.corr_m_y).abs());
        worst_product = worst_product.max((id.corr_product - id.expected_corr_z).abs());
        let k = rng.gen_range(1..=3);
        let b = boost_reconstruction(&table, &f, &spec, k, &graph).unwrap();
        worst_boost = worst_boost.max(b.bound - b.achieved);
    }
    // IID n = 2, Y_u = σ_u, U a uniform singleton
    let table = ProbabilityTable::uniform(2).unwrap();
    let spin = |u: usize| (0..4u64).map(|x| if x >> u & 1 == 1 { 1.0 } else { -1.0 }).collect::<Vec<f64>>();
    let family = ConditionalFamily::custom(vec![(0b01, 0.5), (0b10, 0.5)], vec![spin(0), spin(1)]).unwrap();
    let hand = operator_identities(&table, &spin(0), &family).unwrap();
    let hand_ok = (hand.var_m - 0.5).abs() <= 1e-12
        && (hand.avg_pair_corr - 0.5).abs() <= 1e-12
        && (hand.corr_m_y * hand.corr_m_y - 0.5).abs() <= 1e-12;
    outcome(
        worst_var <= 1e-9 && worst_strange <= 1e-9 && worst_product <= 1e-9 && worst_boost <= 0.0 && hand_ok,
        format!(
            "50 tables: |Var M - E Corr| {worst_var:e}, |E Corr - Corr(M,Y)^2| {worst_strange:e}, \
             correlation product {worst_product:e}, max(bound - boosted) {worst_boost:e}; hand instance Var = {}",
            hand.var_m
        ),
    )
}

fn dac_suite() -> Outcome {
    merge(vec![
        recipe_criterion(Recipe::DacIdentities, json!({ "instances": 50, "n_max": 6 }), Duration::from_secs(600)),
        recipe_criterion(Recipe::DacBounds, json!({ "instances": 50 }), Duration::from_secs(600)),
    ])
}

fn fk_bound() -> Outcome {
    recipe_criterion(Recipe::FkBound, json!({}), Duration::from_secs(300))
}

fn sublattice() -> Outcome {
    recipe_criterion(Recipe::Ising2dSublattice, json!({}), Duration::from_secs(600))
}

fn giant() -> Outcome {
    recipe_criterion(Recipe::SupercritGiant, json!({}), Duration::from_secs(600))
}

fn path_coupling() -> Outcome {
    recipe_criterion(Recipe::TiledCoupling, json!({}), Duration::from_secs(600))
}

fn samplers() -> Outcome {
    let mut worst_tv: f64 = 0.0;
    let mut es_fail = Vec::new();
    for (name, g, p) in common::fixtures() {
        worst_tv = worst_tv.max(common::glauber_tv(&g, &p, 400_000, 101));
        worst_tv = worst_tv.max(common::frozen_glauber_tv(&g, &p, &[1, 3], 0b1010, 400_000, 102));
        if p.h == 0.0 {
            worst_tv = worst_tv.max(common::swendsen_wang_tv(&g, &p, 400_000, 103));
            let (exact, mean, se) = common::edwards_sokal_two_point(&g, &p, 0, 2, 200_000, 104);
            if (exact - mean).abs() > 3.0 * se {
                es_fail.push(format!("{name}: {exact} vs {mean} ± {se}"));
            }
        }
    }
    outcome(
        worst_tv <= 0.02 && es_fail.is_empty(),
        format!("max TV {worst_tv:.4}; two-point identity failures: {es_fail:?}"),
    )
}

fn csv_bytes(recipe: Recipe, threads: usize, dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let cfg = ExperimentConfig::new(recipe, json!({}), 7, dir);
    let summary = pool.install(|| run(&cfg)).unwrap();
    summary.files.iter().map(|f| (f.clone(), std::fs::read(dir.join(f)).unwrap())).collect()
}

fn reproducibility() -> Outcome {
    let mut differing = Vec::new();
    for r in Recipe::ALL {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        if csv_bytes(r, 1, a.path()) != csv_bytes(r, 8, b.path()) {
            differing.push(r.name());
        }
    }
    outcome(differing.is_empty(), format!("13 recipes, 1 vs 8 threads; differing: {differing:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("eigenvalue-clue identity", eigenclue),
        ("product-measure clue bound", product_bound),
        ("Ellis-Newman moments", ellis_newman),
        ("Curie-Weiss entropy", cw_entropy),
        ("Curie-Weiss reconstruction", cw_reconstruction),
        ("operator identities", operator_identities_criterion),
        ("Divide-and-Color suite", dac_suite),
        ("FK cluster bound", fk_bound),
        ("critical 2D sublattice", sublattice),
        ("supercritical giant cluster", giant),
        ("path coupling", path_coupling),
        ("samplers vs exact tables", samplers),
        ("reproducibility", reproducibility),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| outcome(false, "panicked"));
        if !o.passed {
            failures += 1;
        }
        println!(
            "criterion {:>2} {} {name} [{:.1}s]: {}",
            i + 1,
            if o.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
