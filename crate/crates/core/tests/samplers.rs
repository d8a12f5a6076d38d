mod common;

use common::*;

#[test]
fn glauber_matches_exact_tables() {
    for (name, g, p) in fixtures() {
        let tv = glauber_tv(&g, &p, 400_000, 11);
        assert!(tv <= 0.02, "{name}: tv {tv}");
    }
}

#[test]
fn frozen_glauber_matches_conditional_law() {
    for (name, g, p) in fixtures() {
        let tv = frozen_glauber_tv(&g, &p, &[0, 2], 0b0101, 400_000, 12);
        assert!(tv <= 0.02, "{name}: tv {tv}");
    }
}

#[test]
fn swendsen_wang_matches_exact_tables() {
    for (name, g, p) in fixtures().into_iter().filter(|f| f.2.h == 0.0) {
        let tv = swendsen_wang_tv(&g, &p, 400_000, 13);
        assert!(tv <= 0.02, "{name}: tv {tv}");
    }
}

#[test]
fn edwards_sokal_connection_probability() {
    for (name, g, p) in fixtures().into_iter().filter(|f| f.2.h == 0.0) {
        let (exact, mean, se) = edwards_sokal_two_point(&g, &p, 0, 2, 200_000, 14);
        assert!((exact - mean).abs() <= 3.0 * se, "{name}: {exact} vs {mean} ± {se}");
    }
}
