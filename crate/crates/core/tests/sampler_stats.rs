use erw_core::analysis::chi_square;
use erw_core::rng::replica_rng;
use erw_core::sampler::step_probability;
use erw_core::{Generator, MemoryConfig, StepLaw, UrnCounts};

fn draw_counts(law: &StepLaw, urn: &UrnCounts, draws: u64, seed: u64) -> Vec<u64> {
    let mut rng = replica_rng(seed, 0);
    let mut counts = vec![0u64; urn.degree()];
    for _ in 0..draws {
        counts[law.sample(urn.counts(), urn.total(), &mut rng) as usize] += 1;
    }
    counts
}

#[test]
fn first_step_is_uniform() {
    for d in [3, 4, 6] {
        for p in [0.0, 0.3, 0.9] {
            let law = StepLaw::new(MemoryConfig::elephant(p), d).unwrap();
            let counts = draw_counts(&law, &UrnCounts::new(d), 100_000, d as u64);
            let t = chi_square(&counts, &vec![1.0 / d as f64; d]).unwrap();
            assert!(t.p_value > 0.01, "d={d} p={p}: {t:?}");
        }
    }
}

#[test]
fn simple_random_walk_is_uniform_at_any_urn() {
    let d = 4;
    let law = StepLaw::new(MemoryConfig::elephant(0.25), d).unwrap();
    let mut urn = UrnCounts::new(d);
    for (g, k) in [(0u8, 7), (1, 1), (3, 12)] {
        for _ in 0..k {
            urn.record(Generator(g));
        }
    }
    let counts = draw_counts(&law, &urn, 100_000, 9);
    let t = chi_square(&counts, &[0.25; 4]).unwrap();
    assert!(t.p_value > 0.01, "{t:?}");
}

#[test]
fn frequencies_match_step_law() {
    let d = 5;
    let mut urn = UrnCounts::new(d);
    for (g, k) in [(0u8, 3), (1, 0), (2, 10), (3, 1), (4, 6)] {
        for _ in 0..k {
            urn.record(Generator(g));
        }
    }
    let draws = 1_000_000u64;
    for cfg in [
        MemoryConfig::elephant(0.7),
        MemoryConfig::elephant(0.0),
        MemoryConfig::PositiveReinforced { p_tilde: 0.5 },
        MemoryConfig::NegativeReinforced { p_tilde: 0.25 },
    ] {
        let law = StepLaw::new(cfg, d).unwrap();
        let counts = draw_counts(&law, &urn, draws, 21);
        let mut probs = Vec::new();
        for (a, &c) in counts.iter().enumerate() {
            let prob = step_probability(&urn, &cfg, Generator(a as u8)).unwrap();
            let se = (prob * (1.0 - prob) / draws as f64).sqrt();
            let freq = c as f64 / draws as f64;
            assert!((freq - prob).abs() <= 4.0 * se, "{cfg:?} a={a}: {freq} vs {prob}");
            probs.push(prob);
        }
        let t = chi_square(&counts, &probs).unwrap();
        assert!(t.p_value > 0.001, "{cfg:?}: {t:?}");
    }
}
