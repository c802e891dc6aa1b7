//! Batch runner, comparisons, sweeps and aggregates.

use fxtriplet::experiment::{
    compare_strategies, improvement_stats, penalty_sweep, phi_sweep, prepare, run_batch, trajectory_aggregates,
    write_frontier_csv, BatchOptions, StrategySpec, TrajectoryAggregates,
};
use fxtriplet::{Config, ExperimentError};

fn frontier_bytes(config: &Config) -> Vec<u8> {
    let rows = phi_sweep(config, &[0.0, 0.1, 5.0]).unwrap();
    let mut out = Vec::new();
    write_frontier_csv(&rows, &mut out).unwrap();
    out
}

#[test]
fn tiny_batch_has_consistent_stats() {
    let config = Config::default().with_paths(3);
    let p = prepare(&config, StrategySpec::Neutral).unwrap();
    let b = run_batch(&p.sim, p.strategy.as_ref(), &BatchOptions { record: vec![1], aggregate: false }).unwrap();
    assert_eq!(b.results.len(), 3);
    assert_eq!(b.stats.count, 3);
    assert!(b.results[0].trajectory.is_none());
    assert_eq!(b.results[1].trajectory.as_ref().unwrap().len(), config.grid().knots());
    let pnl = b.pnl();
    let mean = pnl.iter().sum::<f64>() / 3.0;
    assert!((b.stats.mean - mean).abs() <= 1e-9 * mean.abs());
    assert!(b.stats.min <= b.stats.median && b.stats.median <= b.stats.max);
}

#[test]
fn strategy_against_itself_is_exactly_zero() {
    let config = Config::default().with_paths(40);
    let a = prepare(&config, StrategySpec::Robust { phi: 0.1 }).unwrap();
    let b = prepare(&config, StrategySpec::Robust { phi: 0.1 }).unwrap();
    let c = compare_strategies((&a.sim, a.strategy.as_ref()), (&b.sim, b.strategy.as_ref())).unwrap();
    assert_eq!(c.improvement.mean_difference, 0.0);
    assert_eq!(c.improvement.difference_se, 0.0);
    assert!(c.improvement.zero_variance);
    assert_eq!(c.improvement.sharpe, None);
    assert_eq!(c.improvement.positive_fraction, 0.0);
}

#[test]
fn mismatched_comparisons_are_rejected() {
    assert!(matches!(improvement_stats(&[1.0, 2.0], &[1.0]), Err(ExperimentError::PathCountMismatch(2, 1))));
    let a = Config::default().with_paths(2);
    let b = a.with_seed(99);
    let pa = prepare(&a, StrategySpec::Neutral).unwrap();
    let pb = prepare(&b, StrategySpec::Neutral).unwrap();
    assert!(compare_strategies((&pa.sim, pa.strategy.as_ref()), (&pb.sim, pb.strategy.as_ref())).is_err());
}

#[test]
fn frontier_is_bit_reproducible() {
    let config = Config::default().with_paths(100);
    assert_eq!(frontier_bytes(&config), frontier_bytes(&config));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let config = Config::default().with_paths(150);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let p = prepare(&config, StrategySpec::Robust { phi: 0.1 }).unwrap();
            let b = run_batch(&p.sim, p.strategy.as_ref(), &BatchOptions { record: Vec::new(), aggregate: true }).unwrap();
            let mut agg = Vec::new();
            b.aggregates.as_ref().unwrap().write_csv(&mut agg).unwrap();
            (b.pnl(), b.stats.mean.to_bits(), agg, frontier_bytes(&config.with_paths(70)))
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn single_path_aggregate_is_the_path() {
    let config = Config::default().with_paths(1);
    let p = prepare(&config, StrategySpec::Robust { phi: 0.1 }).unwrap();
    let b = run_batch(&p.sim, p.strategy.as_ref(), &BatchOptions { record: vec![0], aggregate: true }).unwrap();
    let tr = b.results[0].trajectory.as_ref().unwrap();
    let agg = b.aggregates.unwrap();
    assert_eq!(agg.count(), 1);
    let qz = TrajectoryAggregates::field("q_z").unwrap();
    let nu = TrajectoryAggregates::field("nu_x").unwrap();
    for (j, pt) in tr.iter().enumerate() {
        assert_eq!(agg.mean(j, qz), pt.q.z);
        assert_eq!(agg.mean(j, nu), pt.speeds.x);
        assert_eq!(agg.se(j, qz), 0.0);
    }
    let direct = trajectory_aggregates(&[tr.as_slice()]).unwrap();
    assert_eq!(direct.mean(500, qz), agg.mean(500, qz));
}

#[test]
fn penalty_sweep_reports_each_multiplier() {
    let config = Config::default().without_client_flow().with_paths(20);
    let rows = penalty_sweep(&config, &[1.0, 1e6], 0.1).unwrap();
    assert_eq!(rows.len(), 2);
    // a weak penalty leaves inventory for the unwind; a strong one does not
    assert!(rows[0].mean_terminal.z > 1.0);
    assert!(rows[1].mean_terminal.z.abs() < 1e-2);
    assert!(rows[0].mean_unwind_cost > rows[1].mean_unwind_cost);
    assert!(penalty_sweep(&config, &[-1.0], 0.1).is_err());
}

#[test]
fn invalid_sweeps_are_rejected() {
    let config = Config::default().with_paths(2);
    assert!(phi_sweep(&config, &[]).is_err());
    assert!(phi_sweep(&config, &[-0.5]).is_err());
    assert!(prepare(&config, StrategySpec::Robust { phi: f64::NAN }).is_err());
}
