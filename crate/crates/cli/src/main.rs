//! `mapcalc`: numerical experiments on the discrete map calculus.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod commands;
mod config;
mod error;
mod report;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use commands::FlowRun;
use config::{ExperimentConfig, Overrides, Spacing};
use error::CliError;

/// Every command a config file or sweep may name.
pub const COMMANDS: [&str; 12] = [
    "curvature",
    "verify-soliton",
    "hamilton",
    "variation-check",
    "stress-check",
    "div-check",
    "trace-check",
    "ibp-check",
    "liouville-ledger",
    "decay-probe",
    "shi-probe",
    "flow",
];

#[derive(Parser)]
#[command(name = "mapcalc", version, about = "Discrete calculus experiments for p-biharmonic maps on Ricci solitons")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scalar curvature of a manifold preset against its closed form.
    Curvature(Common),
    /// Soliton equation residual, central curvature and the 2D Einstein identity.
    VerifySoliton(Common),
    /// Hamilton's identity `Scal + |∇f|² − 2λf = C`.
    Hamilton(Common),
    /// First variation in the map against a finite-difference oracle.
    VariationCheck(Common),
    /// Stress-energy tensors against the metric-variation oracle.
    StressCheck(Common),
    /// Divergence identity residual and its convergence ladder.
    DivCheck(Common),
    /// Traces of the stress tensors against their closed forms.
    TraceCheck(Common),
    /// Weighted integration by parts on the soliton.
    IbpCheck(Common),
    /// Itemized Liouville integrals and balances.
    LiouvilleLedger(Common),
    /// Cutoff error terms over a ladder of radii.
    DecayProbe(Common),
    /// Curvature-gradient decay on the soliton.
    ShiProbe(Common),
    /// Gradient descent of the (p,q)-energy.
    Flow(FlowArgs),
    /// Runs `sweep.command` over seeds and exponents in parallel.
    Sweep(Common),
    /// Runs the command named by the config file's `command` key.
    Run(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifold preset (euclidean, cigar, sphere, hyperbolic) or soliton preset
    /// (cigar, gaussian(λ), euclidean-trivial).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid spacing, e.g. `1/64` or `0.02`.
    #[arg(long)]
    h: Option<String>,
    /// Output directory; overrides MAPCALC_OUT and the config.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Clone, Default)]
struct FlowArgs {
    #[command(flatten)]
    common: Common,
    /// Continue from a checkpoint file.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Run even if the gradient check fails.
    #[arg(long)]
    force: bool,
    /// Iterations between checkpoints.
    #[arg(long, default_value_t = 100)]
    checkpoint_every: usize,
}

impl Common {
    fn overrides(&self) -> Result<Overrides, CliError> {
        let out = self.out.clone().or_else(|| std::env::var("MAPCALC_OUT").ok().filter(|s| !s.is_empty()));
        Ok(Overrides {
            preset: self.preset.clone(),
            p: self.p,
            q: self.q,
            seed: self.seed,
            h: self.h.as_deref().map(Spacing::parse).transpose()?,
            out,
        })
    }
}

/// Pass/fail of one executed command.
struct Outcome {
    passed: bool,
}

fn execute(command: &str, cfg: &ExperimentConfig, flow_run: &FlowRun, dir: &Path, quiet: bool) -> Result<Outcome, CliError> {
    let builder = commands::run(command, cfg, flow_run, dir)?;
    let (report, csv) = builder.finish(cfg);
    report::write(dir, command, &report, &csv, cfg.output.csv)?;
    if !quiet {
        for c in &report.checks {
            let rel = match c.relation {
                report::Relation::AtMost => "<=",
                report::Relation::AtLeast => ">=",
            };
            println!("{} {}: {:e} {rel} {:e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
        }
        println!("{command}: {} ({})", if report.passed { "passed" } else { "failed" }, dir.join(format!("{command}.json")).display());
    }
    Ok(Outcome { passed: report.passed })
}

fn single(command: &str, common: &Common, flow_run: &FlowRun) -> Result<Outcome, CliError> {
    let cfg = ExperimentConfig::resolve(command, common.config.as_deref(), &common.overrides()?)?;
    let dir = PathBuf::from(&cfg.output.dir);
    execute(command, &cfg, flow_run, &dir, false)
}

#[derive(serde::Serialize)]
struct SweepEntry {
    seed: u64,
    p: f64,
    q: f64,
    dir: String,
    passed: bool,
    error: Option<String>,
}

fn sweep(common: &Common) -> Result<Outcome, CliError> {
    let flags = common.overrides()?;
    let base = ExperimentConfig::resolve("sweep", common.config.as_deref(), &flags)?;
    let command = base.sweep.command.clone();
    if !COMMANDS.contains(&command.as_str()) {
        return Err(CliError::Config(format!("sweep.command `{command}` is not a command")));
    }
    let ps = if base.sweep.p.is_empty() { vec![None] } else { base.sweep.p.iter().map(|&p| Some(p)).collect() };
    let qs = if base.sweep.q.is_empty() { vec![None] } else { base.sweep.q.iter().map(|&q| Some(q)).collect() };
    let mut jobs = Vec::new();
    for &seed in &base.sweep.seeds {
        for &p in &ps {
            for &q in &qs {
                let o = Overrides { seed: Some(seed), p: p.or(flags.p), q: q.or(flags.q), ..flags.clone() };
                jobs.push(ExperimentConfig::resolve(&command, common.config.as_deref(), &o)?);
            }
        }
    }
    let root = PathBuf::from(&base.output.dir).join("sweep");
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SweepEntry>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let threads = base.sweep.threads.clamp(1, jobs.len().max(1));
    let worst_error = Mutex::new(None::<CliError>);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cfg) = jobs.get(i) else { break };
                let stem = format!("{command}-seed{}-p{}-q{}", cfg.map.seed, cfg.params.p, cfg.params.q);
                let dir = root.join(&stem);
                let r = execute(&command, cfg, &FlowRun { checkpoint_every: 100, ..Default::default() }, &dir, true);
                let entry = SweepEntry {
                    seed: cfg.map.seed,
                    p: cfg.params.p,
                    q: cfg.params.q,
                    dir: stem,
                    passed: matches!(r, Ok(Outcome { passed: true })),
                    error: r.as_ref().err().map(|e| e.to_string()),
                };
                if let Err(e) = r {
                    let mut w = worst_error.lock().unwrap();
                    if w.as_ref().is_none_or(|x| e.exit_code() > x.exit_code()) {
                        *w = Some(e);
                    }
                }
                results.lock().unwrap()[i] = Some(entry);
            });
        }
    });
    let entries: Vec<SweepEntry> = results.into_inner().unwrap().into_iter().flatten().collect();
    for e in &entries {
        println!("{} {} seed={} p={} q={}", if e.passed { "PASS" } else { "FAIL" }, e.dir, e.seed, e.p, e.q);
    }
    let mut b = report::Builder::new("sweep", 0.0, base.map.seed);
    b.holds("all-runs-passed", entries.iter().all(|e| e.passed), 0.0);
    b.data("command", &command);
    b.data("runs", &entries);
    b.columns(&["seed", "p", "q", "passed", "dir"]);
    for e in &entries {
        b.row(vec![e.seed.to_string(), e.p.to_string(), e.q.to_string(), e.passed.to_string(), e.dir.clone()]);
    }
    let (rep, csv) = b.finish(&base);
    report::write(&root, "summary", &rep, &csv, base.output.csv)?;
    if let Some(e) = worst_error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(Outcome { passed: rep.passed })
}

fn dispatch(cli: Cli) -> Result<Outcome, CliError> {
    let plain = FlowRun { checkpoint_every: 100, ..Default::default() };
    let (name, common) = match &cli.command {
        Cmd::Curvature(c) => ("curvature", c),
        Cmd::VerifySoliton(c) => ("verify-soliton", c),
        Cmd::Hamilton(c) => ("hamilton", c),
        Cmd::VariationCheck(c) => ("variation-check", c),
        Cmd::StressCheck(c) => ("stress-check", c),
        Cmd::DivCheck(c) => ("div-check", c),
        Cmd::TraceCheck(c) => ("trace-check", c),
        Cmd::IbpCheck(c) => ("ibp-check", c),
        Cmd::LiouvilleLedger(c) => ("liouville-ledger", c),
        Cmd::DecayProbe(c) => ("decay-probe", c),
        Cmd::ShiProbe(c) => ("shi-probe", c),
        Cmd::Flow(f) => {
            let run = FlowRun { resume: f.resume.clone(), force: f.force, checkpoint_every: f.checkpoint_every };
            return single("flow", &f.common, &run);
        }
        Cmd::Sweep(c) => return sweep(c),
        Cmd::Run(c) => {
            let path = c.config.as_deref().ok_or_else(|| CliError::Config("run needs --config".into()))?;
            let command = config::file_command(path)?.ok_or_else(|| CliError::Config(format!("{} has no `command` key", path.display())))?;
            if command == "sweep" {
                return sweep(c);
            }
            if !COMMANDS.contains(&command.as_str()) {
                return Err(CliError::Config(format!("unknown command `{command}`")));
            }
            return single(&command, c, &plain);
        }
    };
    single(name, common, &plain)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(Outcome { passed: true }) => ExitCode::SUCCESS,
        Ok(Outcome { passed: false }) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
