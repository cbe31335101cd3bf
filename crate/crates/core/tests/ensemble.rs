use erw_core::montecarlo::dyadic_checkpoints;
use erw_core::{run_ensemble, MemoryConfig, RunConfig};

#[test]
fn simple_random_walk_speed_on_free_group() {
    let cfg = RunConfig::new(2, 0, MemoryConfig::elephant(0.25), 100_000, 1000, 2024);
    let summary = run_ensemble(&cfg).unwrap();
    let last = summary.last();
    assert_eq!(last.n, 100_000);
    assert!((last.speed.mean() - 0.5).abs() <= 0.01, "{}", last.speed.mean());
    // at p = 1/d the Xi correction vanishes and the statistic is a plain CLT
    assert!((last.fluct.variance() - 0.75).abs() < 0.1, "{}", last.fluct.variance());
}

#[test]
fn summary_is_reproducible() {
    let cfg = RunConfig::new(1, 2, MemoryConfig::NegativeReinforced { p_tilde: 0.5 }, 4096, 300, 1)
        .with_checkpoints(dyadic_checkpoints(4, 12));
    let a = run_ensemble(&cfg).unwrap();
    let b = run_ensemble(&cfg.clone().with_workers(2)).unwrap();
    assert_eq!(a.checkpoints, b.checkpoints);
    assert_eq!(a.finals, b.finals);
    let c = run_ensemble(&RunConfig { base_seed: 2, ..cfg }).unwrap();
    assert_ne!(a.finals, c.finals);
}
