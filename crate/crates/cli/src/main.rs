//! `fxtriplet` command-line driver.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or
//! arguments, 3 manifest replay produced different outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fxtriplet::experiment::{
    penalty_sweep, phi_sweep, prepare, run_batch, write_exceedance_csv, write_frontier_csv, write_paths_csv,
    write_trajectories_csv, BatchOptions, StrategySpec, DEFAULT_PHI_GRID,
};
use fxtriplet::params::{Mark, Pair};
use fxtriplet::robust::RobustCorrection;
use fxtriplet::{Config, ConfigError, ExperimentError, HSolution};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_MISMATCH: u8 = 3;
const MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "fxtriplet", version, about = "Optimal liquidation in an FX currency triplet")]
struct Cli {
    /// JSON configuration; the built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "FXTRIPLET_OUT", default_value = "fxtriplet-out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Re-run the command recorded in a manifest and check output hashes.
    #[arg(long, conflicts_with = "config")]
    from_manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Tabulate the closed-form coefficients.
    Solve(SolveArgs),
    /// Simulate one strategy.
    Simulate(SimulateArgs),
    /// Ambiguity and terminal-penalty sweeps.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SolveArgs {
    /// Also tabulate the first-order ambiguity correction.
    #[arg(long)]
    robust: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SimulateArgs {
    #[arg(long, default_value = "robust", value_parser = ["neutral", "robust", "illiquid-only"])]
    strategy: String,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ambiguity aversion of the robust strategy (default from config).
    #[arg(long)]
    phi: Option<f64>,
    /// Keep full trajectories for the first K paths.
    #[arg(long, default_value_t = 0)]
    record_trajectories: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SweepArgs {
    /// Comma-separated ambiguity levels.
    #[arg(long, value_delimiter = ',')]
    phi_grid: Option<Vec<f64>>,
    /// Comma-separated penalty multipliers alpha / a.
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    command: Command,
    seed: u64,
    config: Config,
    started_unix: u64,
    finished_unix: u64,
    outputs: Vec<OutputEntry>,
}

/// Output files produced in memory, written once complete.
#[derive(Default)]
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.into(), buf));
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.files.push((name.into(), text));
        Ok(())
    }

    fn write_all(&self, dir: &Path) -> Result<Vec<OutputEntry>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut entries = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            entries.push(OutputEntry { file: name.clone(), sha256: sha256_hex(bytes) });
        }
        Ok(entries)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<ConfigError>() || matches!(c.downcast_ref::<ExperimentError>(), Some(ExperimentError::Config(_) | ExperimentError::Invalid(_)))
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError::new("--threads", "must be at least 1").into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }

    if let Some(manifest_path) = &cli.from_manifest {
        let text = fs::read_to_string(manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
        let recorded: Manifest = serde_json::from_str(&text).context("parsing manifest")?;
        recorded.config.validate()?;
        let out = execute(&recorded.command, recorded.config, &cli.out)?;
        let mut mismatched = Vec::new();
        for entry in &recorded.outputs {
            match out.iter().find(|e| e.file == entry.file) {
                Some(e) if e.sha256 == entry.sha256 => {}
                _ => mismatched.push(entry.file.clone()),
            }
        }
        if !mismatched.is_empty() {
            eprintln!("replay differs from manifest: {}", mismatched.join(", "));
            return Ok(ExitCode::from(EXIT_MISMATCH));
        }
        println!("replayed {} outputs with identical hashes", recorded.outputs.len());
        return Ok(ExitCode::SUCCESS);
    }

    let Some(command) = cli.command else {
        return Err(ConfigError::new("<command>", "expected a subcommand or --from-manifest").into());
    };
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let config = resolve(&command, config)?;
    execute(&command, config, &cli.out)?;
    Ok(ExitCode::SUCCESS)
}

/// Fold command-line overrides into the configuration.
fn resolve(command: &Command, mut config: Config) -> Result<Config> {
    let (paths, seed, phi) = match command {
        Command::Solve(_) => (None, None, None),
        Command::Simulate(a) => (a.paths, a.seed, a.phi),
        Command::Sweep(a) => (a.paths, a.seed, None),
    };
    if let Some(n) = paths {
        config.simulation.n_paths = n;
    }
    if let Some(s) = seed {
        config.simulation.seed = s;
    }
    if let Some(phi) = phi {
        config.ambiguity.phi = phi;
    }
    if paths == Some(0) {
        return Err(ConfigError::new("--paths", "must be at least 1").into());
    }
    if !(config.ambiguity.phi >= 0.0 && config.ambiguity.phi.is_finite()) {
        return Err(ConfigError::new("--phi", format!("must be non-negative, got {}", config.ambiguity.phi)).into());
    }
    config.validate()?;
    Ok(config)
}

fn execute(command: &Command, config: Config, out_dir: &Path) -> Result<Vec<OutputEntry>> {
    let started = now();
    let mut out = Outputs::default();
    match command {
        Command::Solve(a) => solve(&config, a, &mut out)?,
        Command::Simulate(a) => simulate(&config, a, &mut out)?,
        Command::Sweep(a) => sweep(&config, a, &mut out)?,
    }
    let entries = out.write_all(out_dir)?;
    let manifest = Manifest {
        tool: "fxtriplet".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.clone(),
        seed: config.simulation.seed,
        config,
        started_unix: started,
        finished_unix: now(),
        outputs: entries,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(out_dir.join(MANIFEST), text + "\n")?;
    for e in &manifest.outputs {
        println!("{}  {}", e.sha256, out_dir.join(&e.file).display());
    }
    Ok(manifest.outputs)
}

fn solve(config: &Config, args: &SolveArgs, out: &mut Outputs) -> Result<()> {
    let sol = HSolution::new(&config.reference(), &config.execution, &config.flow, config.grid())?;
    let n = |v: f64| fxtriplet::experiment::num(v);
    out.add("h_table.csv", |w| {
        use std::io::Write;
        writeln!(w, "t,h2_x,h2_y,h2_z,h1_x,h1_y,h1_z,h0_x,h0_y")?;
        for i in 0..sol.grid().knots() {
            write!(w, "{}", n(sol.grid().time(i)))?;
            for pair in Pair::ALL {
                write!(w, ",{}", n(sol.h2_table(pair)[i]))?;
            }
            for pair in Pair::ALL {
                write!(w, ",{}", n(sol.h1_table(pair)[i]))?;
            }
            writeln!(w, ",{},{}", n(sol.h0_table(Mark::X)[i]), n(sol.h0_table(Mark::Y)[i]))?;
        }
        Ok(())
    })?;
    if args.robust {
        let correction = RobustCorrection::new(&sol)?;
        out.add("h1_table.csv", |w| {
            use std::io::Write;
            writeln!(w, "t,component,exp_q_x,exp_q_y,exp_q_z,value")?;
            for r in correction.rows() {
                let [a, b, c] = r.exponents;
                writeln!(w, "{},{},{a},{b},{c},{}", n(r.t), r.component, n(r.value))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary {
    strategy: StrategySpec,
    n_paths: usize,
    seed: u64,
    stats: fxtriplet::experiment::PnLStats,
    mean_terminal_inventory: fxtriplet::Inventory,
    mean_unwind_per_lot: f64,
    mean_unwind_cost_per_lot: f64,
}

fn simulate(config: &Config, args: &SimulateArgs, out: &mut Outputs) -> Result<()> {
    let spec = StrategySpec::parse(&args.strategy, config.ambiguity.phi)?;
    let p = prepare(config, spec)?;
    for w in &p.warnings {
        eprintln!("warning: {w}");
    }
    let options = BatchOptions { record: (0..args.record_trajectories).collect(), aggregate: true };
    let batch = run_batch(&p.sim, p.strategy.as_ref(), &options)?;
    let lots = p.sim.lots();
    out.add("paths.csv", |w| write_paths_csv(&batch.results, w))?;
    if args.record_trajectories > 0 {
        out.add("trajectories.csv", |w| write_trajectories_csv(&batch.results, w))?;
    }
    if let Some(agg) = &batch.aggregates {
        out.add("trajectories_mean.csv", |w| agg.write_csv(w))?;
    }
    out.json(
        "summary.json",
        &SimulateSummary {
            strategy: spec,
            n_paths: p.sim.n_paths,
            seed: p.sim.seed,
            mean_terminal_inventory: batch.mean_terminal(),
            mean_unwind_per_lot: batch.mean_unwind(lots),
            mean_unwind_cost_per_lot: batch.mean_unwind_cost(lots),
            stats: batch.stats.clone(),
        },
    )
}

#[derive(Serialize)]
struct SweepSummary {
    frontier: Vec<fxtriplet::experiment::FrontierRow>,
    penalty: Vec<fxtriplet::experiment::PenaltySummary>,
}

fn sweep(config: &Config, args: &SweepArgs, out: &mut Outputs) -> Result<()> {
    let phis = match (&args.phi_grid, &args.alpha_grid) {
        (Some(g), _) => g.clone(),
        (None, None) => DEFAULT_PHI_GRID.to_vec(),
        (None, Some(_)) => Vec::new(),
    };
    let mut summary = SweepSummary { frontier: Vec::new(), penalty: Vec::new() };
    if !phis.is_empty() {
        let rows = phi_sweep(config, &phis)?;
        out.add("frontier.csv", |w| write_frontier_csv(&rows, w))?;
        out.add("exceedance.csv", |w| {
            use std::io::Write;
            writeln!(w, "phi,x_percent,probability")?;
            for r in &rows {
                let mut buf = Vec::new();
                write_exceedance_csv(&r.improvement, &mut buf)?;
                let text = String::from_utf8(buf).expect("ascii csv");
                for line in text.lines().skip(1) {
                    writeln!(w, "{},{line}", fxtriplet::experiment::num(r.phi))?;
                }
            }
            Ok(())
        })?;
        summary.frontier = rows;
    }
    if let Some(alphas) = &args.alpha_grid {
        if alphas.is_empty() {
            bail!(ConfigError::new("--alpha-grid", "must not be empty"));
        }
        let rows = penalty_sweep(config, alphas, config.ambiguity.phi)?;
        out.add("penalty.csv", |w| {
            use std::io::Write;
            let n = fxtriplet::experiment::num;
            writeln!(w, "alpha_multiplier,mean,std,se,mean_unwind,mean_unwind_cost,mean_terminal_q_x,mean_terminal_q_y,mean_terminal_q_z")?;
            for r in &rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    n(r.multiplier),
                    n(r.stats.mean),
                    n(r.stats.std),
                    n(r.stats.se),
                    n(r.mean_unwind),
                    n(r.mean_unwind_cost),
                    n(r.mean_terminal.x),
                    n(r.mean_terminal.y),
                    n(r.mean_terminal.z)
                )?;
            }
            Ok(())
        })?;
        for (i, r) in rows.iter().enumerate() {
            out.add(format!("trajectories_mean_alpha{i}.csv"), |w| r.aggregates.write_csv(w))?;
        }
        summary.penalty = rows.iter().map(|r| r.summary()).collect();
    }
    out.json("summary.json", &summary)
}
