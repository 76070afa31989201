use lambert_indiff::taylor::lognormal_cumulants;

/// `(η²T, [χ₁..χ₅])` evaluated with 50-digit arithmetic from the raw
/// moments `m_k = e^{k²η²T/2}`.
const HIGH_PRECISION: [(f64, [f64; 5]); 3] = [
    (
        0.01,
        [
            1.005_012_520_859_401_063_4,
            0.010_151_172_942_587_752_618,
            0.000_308_627_566_868_379_233_06,
            0.000_016_726_875_365_121_763_199,
            1.331_113_197_148_484_466_6e-6,
        ],
    ),
    (
        0.0225,
        [
            1.011_313_519_223_611_447_5,
            0.023_272_825_744_271_021_89,
            0.001_618_882_676_230_004_084_1,
            0.000_201_440_077_579_761_555_92,
            0.000_036_915_934_975_092_179_183,
        ],
    ),
    (
        0.9,
        [
            1.568_312_185_490_168_811_2,
            3.590_044_353_255_996_419_9,
            36.649_100_597_764_568_992,
            1_011.826_431_773_292_945_1,
            66_277.312_787_798_498_276,
        ],
    ),
];

#[test]
fn closed_forms_match_high_precision_moments() {
    for (s, expect) in HIGH_PRECISION {
        // η = 0.1 throughout, T chosen to hit s.
        let c = lognormal_cumulants(0.1, s / 0.01).unwrap();
        for k in 0..5 {
            let rel = (c.chi[k] / expect[k] - 1.0).abs();
            assert!(rel < 1e-12, "s = {s}, k = {}: rel {rel:e}", k + 1);
        }
    }
}

#[test]
fn table_markets_hit_the_reference_variances() {
    let t1 = lognormal_cumulants(0.3, 0.25).unwrap();
    let t3 = lognormal_cumulants(0.3, 10.0).unwrap();
    for k in 0..5 {
        assert!((t1.chi[k] / HIGH_PRECISION[1].1[k] - 1.0).abs() < 1e-12);
        assert!((t3.chi[k] / HIGH_PRECISION[2].1[k] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn positivity() {
    for &(eta, t) in &[(0.01, 0.01), (0.3, 0.25), (1.0, 5.0)] {
        let c = lognormal_cumulants(eta, t).unwrap();
        assert!(c.chi.iter().all(|&x| x > 0.0));
    }
}
