//! Property tests: DTW optimality vs brute force, score ranges, and the
//! corruption-ladder behavior of AAS.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rewards::aas::{aas_single, brute_force_best, dtw_path, path_weighted_sum};
use rewards::synthetic::corrupted_alignment_map;
use rewards::{aggregate, bidirectional_maps, spearman, ScoreMap};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dtw_equals_brute_force_up_to_5x5(
        f in 1usize..=5,
        l in 1usize..=5,
        seed in 0u64..1_000_000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..f * l).map(|_| rng.gen_range(0.0..1.0)).collect();
        let c = ScoreMap::new(data, f, l).unwrap();
        let path = dtw_path(&c);
        let got = path_weighted_sum(&c, &path);
        let want = brute_force_best(&c);
        prop_assert!((got - want).abs() < 1e-9, "dtw {got} vs brute {want}");
    }

    #[test]
    fn aas_components_in_unit_interval(
        f in 1usize..=12,
        l in 1usize..=12,
        seed in 0u64..1_000_000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..f * l).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let raw = ScoreMap::new(data, f, l).unwrap();
        let r = aas_single(&raw);
        for (name, v) in [
            ("coverage", r.coverage),
            ("monotonicity", r.monotonicity),
            ("path_confidence", r.path_confidence),
            ("aas", r.aas),
        ] {
            prop_assert!((0.0..=1.0).contains(&v), "{name}={v}");
        }
    }

    #[test]
    fn aggregate_is_convex_combination(
        s in 0.0f64..=1.0,
        ly in 0.0f64..=1.0,
        m in 0.0f64..=1.0,
    ) {
        let b = aggregate(s, ly, m);
        let lo = s.min(ly).min(m);
        let hi = s.max(ly).max(m);
        prop_assert!(b.total >= lo - 1e-12 && b.total <= hi + 1e-12);
        prop_assert!((b.total - (0.5 * s + 0.3 * ly + 0.2 * m)).abs() < 1e-12);
    }

    #[test]
    fn consensus_rows_bounded(
        f in 1usize..=8,
        l in 1usize..=8,
        seed in 0u64..1_000_000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..f * l).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let raw = ScoreMap::new(data, f, l).unwrap();
        let (f2t, t2f, c) = bidirectional_maps(&raw);
        prop_assert!(f2t.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(t2f.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(c.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

/// Ten corruption levels; mean AAS must be monotone non-increasing and
/// strongly anti-correlated with the corruption level.
#[test]
fn corruption_ladder_is_monotone() {
    let levels = 10usize;
    let instances = 24usize;
    let mut level_values = Vec::new();
    let mut means = Vec::new();
    for level in 0..levels {
        let corruption = level as f64 / (levels - 1) as f64;
        let mut total = 0.0;
        for inst in 0..instances {
            let map = corrupted_alignment_map(64, 16, corruption, (level * 1000 + inst) as u64);
            total += aas_single(&map).aas;
        }
        let mean = total / instances as f64;
        level_values.push(level as f64);
        means.push(mean);
    }
    for w in means.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-9,
            "mean AAS increased along the corruption ladder: {means:?}"
        );
    }
    let rho = spearman(&level_values, &means);
    assert!(rho <= -0.8, "Spearman rho {rho} > -0.8: {means:?}");
}

/// Token-shuffled maps lose monotonicity in expectation.
#[test]
fn shuffled_maps_break_monotonicity() {
    use rewards::synthetic::shuffled_alignment_map;
    let mut total = 0.0;
    let n = 100;
    for seed in 0..n {
        let map = shuffled_alignment_map(64, 16, seed as u64);
        let (_f2t, t2f, _c) = bidirectional_maps(&map);
        total += rewards::monotonicity(&t2f);
    }
    let mean = total / n as f64;
    assert!(mean <= 0.6, "mean monotonicity {mean} too high for shuffled maps");
}
