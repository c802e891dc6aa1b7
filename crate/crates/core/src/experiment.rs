//! Batch Monte Carlo runs and the P&L analytics built on them.
//!
//! Every batch uses the labeled per-path streams of [`crate::rng`], so two
//! batches with the same seed are paired path by path (common random
//! numbers). Percentiles, including the median, use the nearest-rank
//! definition; standard deviations use `n - 1`.

use std::io::{self, Write};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::error::ExperimentError;
use crate::grid::TimeGrid;
use crate::neutral::HSolution;
use crate::params::{Inventory, Pair, PerPair};
use crate::robust::RobustSolution;
use crate::sim::{
    run_path, IlliquidOnlyStrategy, NeutralStrategy, PathResult, RobustStrategy, SimConfig, Strategy,
    TrajectoryPoint,
};

/// Default ambiguity grid for frontier sweeps.
pub const DEFAULT_PHI_GRID: [f64; 13] = [0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 24.0, 32.0, 36.0, 40.0, 50.0];
/// Default terminal-penalty multipliers `alpha_k / a_k`.
pub const DEFAULT_ALPHA_GRID: [f64; 3] = [1.0, 2.5, 1e6];
/// Percentile levels reported in [`PnLStats`].
pub const PERCENTILES: [f64; 7] = [1.0, 5.0, 25.0, 50.0, 75.0, 95.0, 99.0];

/// Paths per deterministic reduction chunk.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategySpec {
    Neutral,
    Robust { phi: f64 },
    /// Neutral strategy on the cross pair only, with no client flow on the
    /// liquid pairs in either the model or the market.
    IlliquidOnly,
}

impl StrategySpec {
    pub fn parse(name: &str, phi: f64) -> Result<Self, ExperimentError> {
        match name {
            "neutral" => Ok(Self::Neutral),
            "robust" => Ok(Self::Robust { phi }),
            "illiquid-only" => Ok(Self::IlliquidOnly),
            other => Err(ExperimentError::Invalid(format!("unknown strategy '{other}'"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Neutral => "neutral".into(),
            Self::Robust { phi } => format!("robust(phi={phi})"),
            Self::IlliquidOnly => "illiquid-only".into(),
        }
    }
}

/// A solved strategy with the market it runs in.
pub struct Prepared {
    pub spec: StrategySpec,
    pub sim: SimConfig,
    pub strategy: Box<dyn Strategy>,
    pub warnings: Vec<String>,
}

pub fn prepare(config: &Config, spec: StrategySpec) -> Result<Prepared, ExperimentError> {
    let mut warnings = Vec::new();
    let (sim, strategy): (SimConfig, Box<dyn Strategy>) = match spec {
        StrategySpec::Neutral => {
            let sol = HSolution::new(&config.reference(), &config.execution, &config.flow, config.grid())?;
            (config.sim_config(), Box::new(NeutralStrategy::new(&sol)))
        }
        StrategySpec::Robust { phi } => {
            if !(phi >= 0.0 && phi.is_finite()) {
                return Err(ExperimentError::Invalid(format!("phi must be non-negative, got {phi}")));
            }
            let sol = RobustSolution::new(HSolution::new(
                &config.reference(),
                &config.execution,
                &config.flow,
                config.grid(),
            )?)?;
            (config.sim_config(), Box::new(RobustStrategy::new(&sol, phi)))
        }
        StrategySpec::IlliquidOnly => {
            let q = config.liquid_inventory();
            if q.x != 0.0 || q.y != 0.0 {
                warnings.push(format!(
                    "illiquid-only strategy leaves initial x and y inventories ({}, {}) untraded",
                    q.x, q.y
                ));
            }
            let c = config.illiquid_flow();
            let sol = HSolution::new(&c.reference(), &c.execution, &c.flow, c.grid())?;
            (c.sim_config(), Box::new(IlliquidOnlyStrategy::new(&sol)))
        }
    };
    Ok(Prepared { spec, sim, strategy, warnings })
}

/// Summary statistics of per-lot P&L.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PnLStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// `(level in percent, value)`, nearest rank.
    pub percentiles: Vec<(f64, f64)>,
}

impl PnLStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { count: 0, mean: f64::NAN, std: f64::NAN, se: f64::NAN, median: f64::NAN, min: f64::NAN, max: f64::NAN, percentiles: Vec::new() };
        }
        let (mean, std) = mean_std(values);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            count: n,
            mean,
            std,
            se: std / (n as f64).sqrt(),
            median: nearest_rank(&sorted, 50.0),
            min: sorted[0],
            max: sorted[n - 1],
            percentiles: PERCENTILES.iter().map(|&p| (p, nearest_rank(&sorted, p))).collect(),
        }
    }
}

/// Sample mean and `n - 1` standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Nearest-rank percentile of sorted data: the value at rank
/// `ceil(p / 100 * n)`, with rank 1 for `p = 0`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Paired comparison of a strategy against a baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementStats {
    pub count: usize,
    /// Mean of `pnl - baseline` per lot.
    pub mean_difference: f64,
    pub difference_se: f64,
    /// Mean of the relative improvement `(pnl - baseline) / baseline`.
    pub mean: f64,
    pub std: f64,
    /// `mean / std`; `None` when every relative improvement is identical.
    pub sharpe: Option<f64>,
    pub zero_variance: bool,
    /// Median relative improvement in percent (nearest rank).
    pub median_percent: f64,
    pub positive_fraction: f64,
    /// `(x in percent, fraction of paths with improvement above x / 100)`.
    #[serde(skip)]
    pub exceedance: Vec<(f64, f64)>,
}

/// Default abscissae of the exceedance curve, in percent.
pub fn default_exceedance_grid() -> Vec<f64> {
    (-40..=40).map(|i| i as f64 * 0.005).collect()
}

pub fn improvement_stats(pnl: &[f64], baseline: &[f64]) -> Result<ImprovementStats, ExperimentError> {
    if pnl.len() != baseline.len() {
        return Err(ExperimentError::PathCountMismatch(pnl.len(), baseline.len()));
    }
    if pnl.is_empty() {
        return Err(ExperimentError::Invalid("no paths to compare".into()));
    }
    let n = pnl.len();
    let diff: Vec<f64> = pnl.iter().zip(baseline).map(|(a, b)| a - b).collect();
    let rel: Vec<f64> = pnl.iter().zip(baseline).map(|(a, b)| (a - b) / b).collect();
    let (mean_difference, diff_std) = mean_std(&diff);
    let (mean, std) = mean_std(&rel);
    let zero_variance = rel.iter().all(|&r| r == rel[0]);
    let mut sorted = rel.clone();
    sorted.sort_by(f64::total_cmp);
    let exceedance = default_exceedance_grid().into_iter().map(|x| (x, exceedance_at(&rel, x))).collect();
    Ok(ImprovementStats {
        count: n,
        mean_difference,
        difference_se: diff_std / (n as f64).sqrt(),
        mean,
        std,
        sharpe: if zero_variance { None } else { Some(mean / std) },
        zero_variance,
        median_percent: 100.0 * nearest_rank(&sorted, 50.0),
        positive_fraction: rel.iter().filter(|&&r| r > 0.0).count() as f64 / n as f64,
        exceedance,
    })
}

/// Fraction of relative improvements strictly above `x_percent / 100`.
pub fn exceedance_at(relative: &[f64], x_percent: f64) -> f64 {
    let cut = x_percent * 1e-2;
    relative.iter().filter(|&&r| r > cut).count() as f64 / relative.len() as f64
}

/// Quantities averaged across paths on the simulation grid.
pub const TRAJECTORY_FIELDS: [&str; 9] =
    ["q_x", "q_y", "q_z", "nu_x", "nu_y", "nu_z", "kappa_x", "kappa_y", "kappa_z"];
const NF: usize = TRAJECTORY_FIELDS.len();

fn fields(p: &TrajectoryPoint) -> [f64; NF] {
    [
        p.q.x,
        p.q.y,
        p.q.z,
        p.speeds.x,
        p.speeds.y,
        p.speeds.z,
        p.kappa.kappa_x,
        p.kappa.kappa_y,
        p.kappa.kappa_z,
    ]
}

/// Pointwise sums and sums of squares of trajectory fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryAggregates {
    times: Vec<f64>,
    count: usize,
    sum: Vec<[f64; NF]>,
    sum_sq: Vec<[f64; NF]>,
}

impl TrajectoryAggregates {
    pub fn new(grid: TimeGrid) -> Self {
        let k = grid.knots();
        Self { times: grid.times().collect(), count: 0, sum: vec![[0.0; NF]; k], sum_sq: vec![[0.0; NF]; k] }
    }

    pub fn add(&mut self, trajectory: &[TrajectoryPoint]) -> Result<(), ExperimentError> {
        if trajectory.len() != self.times.len() || trajectory.iter().zip(&self.times).any(|(p, t)| p.t != *t) {
            return Err(ExperimentError::GridMismatch);
        }
        for (j, p) in trajectory.iter().enumerate() {
            let f = fields(p);
            for i in 0..NF {
                self.sum[j][i] += f[i];
                self.sum_sq[j][i] += f[i] * f[i];
            }
        }
        self.count += 1;
        Ok(())
    }

    /// Fold `other` into `self`; callers merge in a fixed order.
    pub fn merge(&mut self, other: &Self) -> Result<(), ExperimentError> {
        if self.times != other.times {
            return Err(ExperimentError::GridMismatch);
        }
        for j in 0..self.times.len() {
            for i in 0..NF {
                self.sum[j][i] += other.sum[j][i];
                self.sum_sq[j][i] += other.sum_sq[j][i];
            }
        }
        self.count += other.count;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Mean of field `field` (index into [`TRAJECTORY_FIELDS`]) at knot `j`.
    pub fn mean(&self, j: usize, field: usize) -> f64 {
        self.sum[j][field] / self.count as f64
    }

    /// Standard error of that mean.
    pub fn se(&self, j: usize, field: usize) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return 0.0;
        }
        let m = self.sum[j][field] / n;
        let var = ((self.sum_sq[j][field] - n * m * m) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    pub fn field(name: &str) -> Option<usize> {
        TRAJECTORY_FIELDS.iter().position(|f| *f == name)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for f in TRAJECTORY_FIELDS {
            write!(w, ",mean_{f}")?;
        }
        for f in TRAJECTORY_FIELDS {
            write!(w, ",se_{f}")?;
        }
        writeln!(w)?;
        for (j, t) in self.times.iter().enumerate() {
            write!(w, "{}", num(*t))?;
            for i in 0..NF {
                write!(w, ",{}", num(self.mean(j, i)))?;
            }
            for i in 0..NF {
                write!(w, ",{}", num(self.se(j, i)))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Pointwise means of fully recorded trajectories.
pub fn trajectory_aggregates(trajectories: &[&[TrajectoryPoint]]) -> Result<TrajectoryAggregates, ExperimentError> {
    let first = trajectories.first().ok_or_else(|| ExperimentError::Invalid("no trajectories".into()))?;
    let mut agg = TrajectoryAggregates {
        times: first.iter().map(|p| p.t).collect(),
        count: 0,
        sum: vec![[0.0; NF]; first.len()],
        sum_sq: vec![[0.0; NF]; first.len()],
    };
    for tr in trajectories {
        agg.add(tr)?;
    }
    Ok(agg)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOptions {
    /// Paths whose full trajectories are kept.
    pub record: Vec<usize>,
    /// Accumulate mean trajectories over all paths.
    pub aggregate: bool,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub results: Vec<PathResult>,
    pub stats: PnLStats,
    pub aggregates: Option<TrajectoryAggregates>,
}

impl Batch {
    pub fn pnl(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.pnl_per_lot).collect()
    }

    pub fn mean_terminal(&self) -> Inventory {
        let n = self.results.len() as f64;
        PerPair::from_fn(|k| self.results.iter().map(|r| r.terminal[k]).sum::<f64>() / n)
    }

    /// Mean unwind proceeds per lot, in currency 1.
    pub fn mean_unwind(&self, lots: f64) -> f64 {
        let n = self.results.len() as f64;
        self.results.iter().map(|r| r.unwind).sum::<f64>() * crate::params::LOT / lots / n
    }

    /// Mean cost of the terminal unwind relative to the mark, per lot.
    pub fn mean_unwind_cost(&self, lots: f64) -> f64 {
        let n = self.results.len() as f64;
        let cost: f64 = self
            .results
            .iter()
            .map(|r| {
                let marked: f64 = Pair::ALL.iter().map(|&k| r.terminal[k] * k.mark().select(r.terminal_x, r.terminal_y)).sum();
                marked - r.unwind
            })
            .sum();
        cost * crate::params::LOT / lots / n
    }

    pub fn write_paths_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_paths_csv(&self.results, w)
    }
}

pub fn run_batch(sim: &SimConfig, strategy: &dyn Strategy, options: &BatchOptions) -> Result<Batch, ExperimentError> {
    sim.validate()?;
    let n = sim.n_paths;
    let chunks: Vec<(Vec<PathResult>, Option<TrajectoryAggregates>)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<_, ExperimentError> {
            let mut agg = options.aggregate.then(|| TrajectoryAggregates::new(sim.grid));
            let mut out = Vec::with_capacity(CHUNK);
            for p in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let keep = options.record.contains(&p);
                let mut r = run_path(sim, strategy, p, keep || options.aggregate)?;
                if let (Some(a), Some(tr)) = (agg.as_mut(), r.trajectory.as_ref()) {
                    a.add(tr)?;
                }
                if !keep {
                    r.trajectory = None;
                }
                out.push(r);
            }
            Ok((out, agg))
        })
        .collect::<Result<_, _>>()?;
    let mut results = Vec::with_capacity(n);
    let mut aggregates: Option<TrajectoryAggregates> = None;
    for (r, a) in chunks {
        results.extend(r);
        if let Some(a) = a {
            match aggregates.as_mut() {
                Some(total) => total.merge(&a)?,
                None => aggregates = Some(a),
            }
        }
    }
    let pnl: Vec<f64> = results.iter().map(|r| r.pnl_per_lot).collect();
    Ok(Batch { stats: PnLStats::from_values(&pnl), results, aggregates })
}

/// Batch from a configuration and strategy specification.
pub fn run_spec(config: &Config, spec: StrategySpec, options: &BatchOptions) -> Result<(Batch, Vec<String>), ExperimentError> {
    let p = prepare(config, spec)?;
    let batch = run_batch(&p.sim, p.strategy.as_ref(), options)?;
    Ok((batch, p.warnings))
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub a: PnLStats,
    pub b: PnLStats,
    /// Improvement of `a` over `b`.
    pub improvement: ImprovementStats,
}

/// Run two strategies on the same paths and compare them.
pub fn compare_strategies(
    a: (&SimConfig, &dyn Strategy),
    b: (&SimConfig, &dyn Strategy),
) -> Result<Comparison, ExperimentError> {
    if a.0.n_paths != b.0.n_paths {
        return Err(ExperimentError::PathCountMismatch(a.0.n_paths, b.0.n_paths));
    }
    if a.0.seed != b.0.seed {
        return Err(ExperimentError::Invalid("paired strategies need the same seed".into()));
    }
    let ba = run_batch(a.0, a.1, &BatchOptions::default())?;
    let bb = run_batch(b.0, b.1, &BatchOptions::default())?;
    let improvement = improvement_stats(&ba.pnl(), &bb.pnl())?;
    Ok(Comparison { a: ba.stats, b: bb.stats, improvement })
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierRow {
    pub phi: f64,
    pub stats: PnLStats,
    /// Relative to `phi = 0` on the same paths.
    pub improvement: ImprovementStats,
}

/// Robust strategies over an ambiguity grid, all on the same paths. The
/// model is solved once; only the ambiguity level changes.
pub fn phi_sweep(config: &Config, phis: &[f64]) -> Result<Vec<FrontierRow>, ExperimentError> {
    if phis.is_empty() {
        return Err(ExperimentError::Invalid("empty phi grid".into()));
    }
    if let Some(bad) = phis.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(ExperimentError::Invalid(format!("phi must be non-negative, got {bad}")));
    }
    let sol = RobustSolution::new(HSolution::new(&config.reference(), &config.execution, &config.flow, config.grid())?)?;
    let table = RobustStrategy::snapshots(&sol);
    let sim = config.sim_config();
    let run = |phi: f64| run_batch(&sim, &RobustStrategy::with_table(&sol, table.clone(), phi), &BatchOptions::default());
    let base = run(0.0)?.pnl();
    phis.iter()
        .map(|&phi| {
            let pnl = if phi == 0.0 { base.clone() } else { run(phi)?.pnl() };
            Ok(FrontierRow { phi, stats: PnLStats::from_values(&pnl), improvement: improvement_stats(&pnl, &base)? })
        })
        .collect()
}

pub fn write_frontier_csv<W: Write>(rows: &[FrontierRow], mut w: W) -> io::Result<()> {
    writeln!(w, "phi,mean,std,sharpe,se,median,mean_improvement,median_improvement_percent,positive_fraction,zero_variance")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            num(r.phi),
            num(r.stats.mean),
            num(r.stats.std),
            r.improvement.sharpe.map(num).unwrap_or_default(),
            num(r.stats.se),
            num(r.stats.median),
            num(r.improvement.mean_difference),
            num(r.improvement.median_percent),
            num(r.improvement.positive_fraction),
            r.improvement.zero_variance,
        )?;
    }
    Ok(())
}

pub fn write_exceedance_csv<W: Write>(stats: &ImprovementStats, mut w: W) -> io::Result<()> {
    writeln!(w, "x_percent,probability")?;
    for (x, p) in &stats.exceedance {
        writeln!(w, "{},{}", num(*x), num(*p))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PenaltyRow {
    pub multiplier: f64,
    pub stats: PnLStats,
    pub mean_terminal: Inventory,
    /// Mean unwind proceeds per lot.
    pub mean_unwind: f64,
    /// Mean shortfall of the unwind against the mark, per lot.
    pub mean_unwind_cost: f64,
    pub aggregates: TrajectoryAggregates,
}

#[derive(Debug, Clone, Serialize)]
pub struct PenaltySummary {
    pub multiplier: f64,
    pub stats: PnLStats,
    pub mean_terminal: Inventory,
    pub mean_unwind: f64,
    pub mean_unwind_cost: f64,
}

impl PenaltyRow {
    pub fn summary(&self) -> PenaltySummary {
        PenaltySummary {
            multiplier: self.multiplier,
            stats: self.stats.clone(),
            mean_terminal: self.mean_terminal,
            mean_unwind: self.mean_unwind,
            mean_unwind_cost: self.mean_unwind_cost,
        }
    }
}

/// Robust strategy at level `phi` for each penalty multiplier
/// `alpha_k = m * a_k`, with client flow switched off.
pub fn penalty_sweep(config: &Config, multipliers: &[f64], phi: f64) -> Result<Vec<PenaltyRow>, ExperimentError> {
    if multipliers.is_empty() {
        return Err(ExperimentError::Invalid("empty alpha grid".into()));
    }
    multipliers
        .iter()
        .map(|&m| {
            if !(m > 0.0 && m.is_finite()) {
                return Err(ExperimentError::Invalid(format!("penalty multiplier must be positive, got {m}")));
            }
            let c = config.without_client_flow().with_penalty_multiplier(m);
            let p = prepare(&c, StrategySpec::Robust { phi })?;
            let batch = run_batch(&p.sim, p.strategy.as_ref(), &BatchOptions { record: Vec::new(), aggregate: true })?;
            let lots = p.sim.lots();
            Ok(PenaltyRow {
                multiplier: m,
                mean_terminal: batch.mean_terminal(),
                mean_unwind: batch.mean_unwind(lots),
                mean_unwind_cost: batch.mean_unwind_cost(lots),
                aggregates: batch.aggregates.clone().expect("aggregates requested"),
                stats: batch.stats,
            })
        })
        .collect()
}

pub fn write_paths_csv<W: Write>(results: &[PathResult], mut w: W) -> io::Result<()> {
    writeln!(w, "path_id,pnl_per_lot,pnl_total,terminal_q_x,terminal_q_y,terminal_q_z,cash,unwind")?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.path,
            num(r.pnl_per_lot),
            num(r.pnl_total),
            num(r.terminal.x),
            num(r.terminal.y),
            num(r.terminal.z),
            num(r.cash),
            num(r.unwind),
        )?;
    }
    Ok(())
}

pub fn write_trajectories_csv<W: Write>(results: &[PathResult], mut w: W) -> io::Result<()> {
    writeln!(w, "path_id,t,x,y,z,q_x,q_y,q_z,nu_x,nu_y,nu_z,kappa_x,kappa_y,kappa_z,cash")?;
    for r in results {
        let Some(tr) = &r.trajectory else { continue };
        for p in tr {
            write!(w, "{},{},{},{},{}", r.path, num(p.t), num(p.x), num(p.y), num(p.z))?;
            for v in fields(p) {
                write!(w, ",{}", num(v))?;
            }
            writeln!(w, ",{}", num(p.cash))?;
        }
    }
    Ok(())
}

/// Floats in CSV output: 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_examples() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(nearest_rank(&v, 50.0), 2.0);
        assert_eq!(nearest_rank(&v, 0.0), 1.0);
        assert_eq!(nearest_rank(&v, 75.0), 3.0);
        assert_eq!(nearest_rank(&v, 76.0), 4.0);
        assert_eq!(nearest_rank(&v, 100.0), 4.0);
    }

    #[test]
    fn stats_of_constant_sample() {
        let s = PnLStats::from_values(&[3.0; 5]);
        assert_eq!((s.mean, s.std, s.median), (3.0, 0.0, 3.0));
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identical_strategies_have_no_improvement() {
        let v = [1.0, 2.0, 3.0];
        let s = improvement_stats(&v, &v).unwrap();
        assert!(s.zero_variance);
        assert_eq!(s.sharpe, None);
        assert_eq!(s.mean_difference, 0.0);
        assert_eq!(s.positive_fraction, 0.0);
    }

    #[test]
    fn improvement_rejects_mismatched_counts() {
        assert!(matches!(improvement_stats(&[1.0], &[1.0, 2.0]), Err(ExperimentError::PathCountMismatch(1, 2))));
    }

    #[test]
    fn exceedance_counts_strictly_above() {
        let rel = [-0.001, 0.0, 0.0002, 0.0005];
        assert_eq!(exceedance_at(&rel, 0.0), 0.5);
        assert_eq!(exceedance_at(&rel, 0.02), 0.25);
        assert_eq!(exceedance_at(&rel, -1.0), 1.0);
    }

    #[test]
    fn csv_numbers_have_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(745710.0), "7.4571000000000000e5");
    }

    #[test]
    fn strategy_names() {
        assert_eq!(StrategySpec::parse("robust", 0.1).unwrap(), StrategySpec::Robust { phi: 0.1 });
        assert!(StrategySpec::parse("twap", 0.0).is_err());
    }
}
