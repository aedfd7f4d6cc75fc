mod common;

use common::*;

#[test]
fn marginal_means_and_contrasts_match_cell_means() {
    for (seed, sd) in [
        (1, (0.1, 0.05, 0.02)),
        (2, (0.0, 0.0, 0.05)),
        (3, (0.3, 0.0, 0.1)),
    ] {
        let w = emm_oracle(seed, sd).unwrap();
        assert!(w[0] <= 1e-8 && w[1] <= 1e-8, "seed {seed}: {w:?}");
        assert!(w[2] <= 1e-6, "seed {seed}: relative SE error {}", w[2]);
        assert!(w[3] <= 1e-8, "seed {seed}: p error {}", w[3]);
    }
}

#[test]
fn zero_variance_fit_is_ols() {
    for seed in 0..3 {
        let d = zero_variance_vs_ols(seed);
        assert!(d <= 1e-6, "seed {seed}: {d}");
    }
}

#[test]
fn few_replicates_recover_parameters() {
    let rec = lmm_recovery(5, 100);
    for (j, c) in rec.coverage.iter().enumerate() {
        assert!(*c >= 0.8, "coefficient {j}: coverage {c}");
    }
    for e in rec.median_rel_err {
        assert!(e <= 0.35, "{:?}", rec.median_rel_err);
    }
}

#[test]
fn bh_matches_enumeration() {
    let (ok, bad) = bh_random(1000, 9);
    assert!(bad.is_none(), "{bad:?}");
    assert_eq!(ok, 1000);
}
