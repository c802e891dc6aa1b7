//! Path simulator: accounting replay, decoupling, strategy restrictions and
//! reproducibility.

use fxtriplet::experiment::{prepare, run_batch, BatchOptions, StrategySpec};
use fxtriplet::params::{ClientFlow, Pair, PairFlow, PerPair, Side, SizeLaw, LOT};
use fxtriplet::sim::{run_path, ClientFills, FillTiming};
use fxtriplet::{Config, HSolution, IlliquidOnlyStrategy, NeutralStrategy};

fn constant_flow() -> Config {
    let c = |intensity: f64, size: f64| ClientFlow { intensity, size: SizeLaw::Constant { size } };
    let mut config = Config::default().with_paths(4);
    config.flow.x = PairFlow { sell: c(60.0, 2.0), buy: c(60.0, 2.0) };
    config.flow.y = PairFlow { sell: c(90.0, 1.0), buy: c(45.0, 1.0) };
    config.flow.z = PairFlow { sell: c(6.0, 10.0), buy: c(6.0, 10.0) };
    config
}

/// Rebuild cash and inventory from the recorded trajectory and an
/// independent replay of the client-flow streams.
fn replay(config: &Config, spec: StrategySpec) {
    let p = prepare(config, spec).unwrap();
    let sim = &p.sim;
    let dt = sim.grid.dt();
    for path in 0..sim.n_paths {
        let r = run_path(sim, p.strategy.as_ref(), path, true).unwrap();
        let tr = r.trajectory.as_ref().unwrap();
        let mut fills = ClientFills::new(&sim.flow, sim.seed, path as u64);
        let mut cash = 0.0;
        let mut q = sim.initial;
        for i in 0..sim.grid.steps() {
            let pt = &tr[i];
            let mark = |k: Pair| if k == Pair::Y { pt.y } else { pt.x };
            assert_eq!(pt.q, q, "inventory at knot {i}");
            for k in Pair::ALL {
                let nu = pt.speeds[k];
                q[k] -= nu * dt;
                cash += mark(k) * (1.0 - sim.exec.impact[k] * nu) * nu * dt;
            }
            for (k, side, size) in fills.sample_until(sim.grid.time(i + 1)) {
                match side {
                    Side::Buy => {
                        q[k] -= size;
                        cash += mark(k) * (1.0 + sim.exec.fee_buy[k] * size) * size;
                    }
                    Side::Sell => {
                        q[k] += size;
                        cash -= mark(k) * (1.0 - sim.exec.fee_sell[k] * size) * size;
                    }
                }
            }
            assert!((tr[i + 1].cash - cash).abs() <= 1e-12 * cash.abs().max(1.0), "cash at knot {}", i + 1);
        }
        assert_eq!(r.terminal, q);
        assert!((r.cash - cash).abs() <= 1e-12 * cash.abs().max(1.0));
        let want = (r.cash + r.unwind) * LOT / sim.lots();
        assert!((r.pnl_per_lot - want).abs() <= 1e-9 * want.abs());
    }
}

#[test]
fn cash_replays_without_client_flow() {
    replay(&Config::default().without_client_flow().with_paths(4), StrategySpec::Robust { phi: 0.1 });
}

#[test]
fn cash_replays_with_constant_size_flow() {
    replay(&constant_flow(), StrategySpec::Robust { phi: 0.1 });
    replay(&constant_flow(), StrategySpec::Neutral);
}

#[test]
fn cross_pair_ignores_liquid_inventory_without_ambiguity() {
    let base = Config::default().with_paths(8);
    let shifted = base.with_initial(PerPair::new(50.0, -30.0, 200.0));
    let a = prepare(&base, StrategySpec::Robust { phi: 0.0 }).unwrap();
    let b = prepare(&shifted, StrategySpec::Robust { phi: 0.0 }).unwrap();
    for path in 0..8 {
        let ra = run_path(&a.sim, a.strategy.as_ref(), path, true).unwrap();
        let rb = run_path(&b.sim, b.strategy.as_ref(), path, true).unwrap();
        for (pa, pb) in ra.trajectory.unwrap().iter().zip(rb.trajectory.unwrap().iter()) {
            assert_eq!(pa.q.z, pb.q.z);
            assert_eq!(pa.speeds.z, pb.speeds.z);
        }
    }
}

#[test]
fn illiquid_only_never_trades_liquid_pairs() {
    let config = Config::default().with_paths(16);
    let p = prepare(&config, StrategySpec::IlliquidOnly).unwrap();
    assert!(p.warnings.is_empty());
    assert!(p.sim.flow.x.sell.intensity == 0.0 && p.sim.flow.y.buy.intensity == 0.0);
    for path in 0..16 {
        let r = run_path(&p.sim, p.strategy.as_ref(), path, true).unwrap();
        assert_eq!(r.terminal.x, 0.0);
        assert_eq!(r.terminal.y, 0.0);
        assert!(r.trajectory.unwrap().iter().all(|pt| pt.speeds.x == 0.0 && pt.speeds.y == 0.0));
    }

    // with full flow the liquid inventories move but are still never traded
    let sol = HSolution::new(&config.reference(), &config.execution, &config.flow, config.grid()).unwrap();
    let sim = config.sim_config();
    let r = run_path(&sim, &IlliquidOnlyStrategy::new(&sol), 0, true).unwrap();
    let tr = r.trajectory.unwrap();
    assert!(tr.iter().all(|pt| pt.speeds.x == 0.0 && pt.speeds.y == 0.0));
    let moved = r.client_sells.x - r.client_buys.x;
    assert!((r.terminal.x - moved).abs() <= 1e-12 * moved.abs().max(1.0));
}

#[test]
fn illiquid_only_warns_about_liquid_inventory() {
    let config = Config::default().with_paths(1).with_initial(PerPair::new(10.0, 0.0, 200.0));
    let p = prepare(&config, StrategySpec::IlliquidOnly).unwrap();
    assert_eq!(p.warnings.len(), 1);
}

#[test]
fn paths_are_reproducible_and_independent_of_batching() {
    let config = Config::default().with_paths(70);
    let p = prepare(&config, StrategySpec::Robust { phi: 0.1 }).unwrap();
    let batch = run_batch(&p.sim, p.strategy.as_ref(), &BatchOptions::default()).unwrap();
    for path in [0, 33, 64, 69] {
        let r = run_path(&p.sim, p.strategy.as_ref(), path, false).unwrap();
        assert_eq!(r.pnl_per_lot.to_bits(), batch.results[path].pnl_per_lot.to_bits());
        assert_eq!(batch.results[path].path, path);
    }
    let again = run_batch(&p.sim, p.strategy.as_ref(), &BatchOptions::default()).unwrap();
    assert_eq!(batch.pnl(), again.pnl());
}

#[test]
fn fill_timing_only_matters_with_client_flow() {
    let quiet = Config::default().without_client_flow().with_paths(1);
    let sol = HSolution::new(&quiet.reference(), &quiet.execution, &quiet.flow, quiet.grid()).unwrap();
    let strategy = NeutralStrategy::new(&sol);
    let mut sim = quiet.sim_config();
    let pre = run_path(&sim, &strategy, 0, false).unwrap();
    sim.fill_timing = FillTiming::PostUpdate;
    let post = run_path(&sim, &strategy, 0, false).unwrap();
    assert_eq!(pre.pnl_per_lot, post.pnl_per_lot);

    let busy = Config::default().with_paths(1);
    let sol = HSolution::new(&busy.reference(), &busy.execution, &busy.flow, busy.grid()).unwrap();
    let strategy = NeutralStrategy::new(&sol);
    let mut sim = busy.sim_config();
    let pre = run_path(&sim, &strategy, 0, false).unwrap();
    sim.fill_timing = FillTiming::PostUpdate;
    let post = run_path(&sim, &strategy, 0, false).unwrap();
    assert_eq!(pre.terminal, post.terminal);
    assert_ne!(pre.pnl_per_lot, post.pnl_per_lot);
}

#[test]
fn nonfinite_speeds_are_reported() {
    use fxtriplet::sim::{Decision, PathState, Strategy};
    struct Broken;
    impl Strategy for Broken {
        fn decide(&self, step: usize, _: &PathState) -> Decision {
            let mut d = Decision::default();
            if step == 3 {
                d.speeds.y = f64::NAN;
            }
            d
        }
        fn name(&self) -> String {
            "broken".into()
        }
    }
    let sim = Config::default().with_paths(1).sim_config();
    let err = run_path(&sim, &Broken, 0, false).unwrap_err();
    assert!(err.to_string().contains('3'), "{err}");
}
