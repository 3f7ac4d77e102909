//! Command-line front end. The binary only parses arguments and calls [`run_cli`].

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{requested_gammas, ExperimentConfig};
use crate::engine::RunConfig;
use crate::error::{Error, Result};
use crate::linear::{solve_composite, solve_spd, write_vector, Solution, SolveOptions};
use crate::markets::{
    equilibrium_oracle, market_control_params, market_potential, run_tatonnement, FisherMarket, Market, MarketOptions,
    MarketRun, TatonnementMode,
};
use crate::monitor::{monitor_trace, FitMode, MonitorReport};
use crate::objective::{Anchored, Objective};
use crate::trace::{replay, Trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_VIOLATIONS: i32 = 4;
pub const EXIT_BALANCE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "agdlab", version, about = "Asynchronous coordinate descent and tatonnement experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print a machine-readable summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Horizon in time units; overrides the config.
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Run even when step constants exceed their proven bounds.
    #[arg(long, global = true)]
    pub override_bounds: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    SolveSpd,
    SolveComposite,
    MarketCes,
    MarketLeontief,
    MarketOngoing,
    /// Replays a trace and runs the monitor on it.
    Verify {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Summarizes a monitor JSON file.
    Report { input: PathBuf },
}

impl Command {
    fn tag(&self) -> &'static str {
        match self {
            Command::SolveSpd => "solve-spd",
            Command::SolveComposite => "solve-composite",
            Command::MarketCes => "market-ces",
            Command::MarketLeontief => "market-leontief",
            Command::MarketOngoing => "market-ongoing",
            Command::Verify { .. } => "verify",
            Command::Report { .. } => "report",
        }
    }
}

/// What a command prints with `--json` and writes as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub problem: String,
    pub events: usize,
    pub converged: bool,
    /// `‖Ap − b‖∞` or `‖∇F‖∞` for solvers, `max_j |z_j|` for markets.
    pub residual: f64,
    pub violations: usize,
    pub bad_updates: usize,
    pub fitted_decay: Option<f64>,
    pub envelope_decay: Option<f64>,
    pub point: Vec<f64>,
    pub equilibrium: Option<Vec<f64>>,
    pub max_offset: Option<f64>,
    pub max_balance: Option<f64>,
    pub exit_code: i32,
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::BalanceBreach { .. } | Error::CapacityBreach { .. } => EXIT_BALANCE,
        Error::NonConvergence(_) | Error::Aborted { .. } => EXIT_NON_CONVERGENCE,
        _ => EXIT_CONFIG,
    }
}

fn outcome_code(converged: bool, violations: usize) -> i32 {
    if violations > 0 {
        EXIT_VIOLATIONS
    } else if !converged {
        EXIT_NON_CONVERGENCE
    } else {
        EXIT_OK
    }
}

/// Parses `args` (including the program name), runs, and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            let text = if cli.json {
                serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"
            } else {
                human(&summary)
            };
            // a closed pipe downstream is not an error worth a panic
            let _ = std::io::Write::write_all(&mut std::io::stdout().lock(), text.as_bytes());
            summary.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn human(s: &RunSummary) -> String {
    use std::fmt::Write as _;
    let mut o = String::new();
    let _ = writeln!(o, "{}: {}", s.command, s.problem);
    let _ = writeln!(o, "  events        {}", s.events);
    let _ = writeln!(o, "  converged     {} (residual {:.3e})", s.converged, s.residual);
    let _ = writeln!(o, "  violations    {}", s.violations);
    let _ = writeln!(o, "  bad updates   {}", s.bad_updates);
    if let Some(d) = s.envelope_decay {
        let _ = writeln!(o, "  decay         {d:.6} per unit time");
    }
    if let Some(v) = s.max_offset {
        let _ = writeln!(o, "  max |v|       {v:.3e}");
    }
    let _ = writeln!(o, "  exit code     {}", s.exit_code);
    o
}

/// Runs the parsed command without printing.
pub fn execute(cli: &Cli) -> Result<RunSummary> {
    match &cli.command {
        Command::Report { input } => report(input),
        Command::Verify { trace } => verify(cli, trace),
        cmd => {
            let cfg = load_config(cli)?;
            let out = cli.out.clone().or_else(|| cfg.out_dir()).unwrap_or_else(|| PathBuf::from("agdlab-out"));
            let run = RunConfig::new(cfg.schedule, cfg.staleness, cfg.horizon, cfg.seed);
            info!("{} on {} with horizon {} seed {}", cmd.tag(), cfg.schedule, cfg.horizon, cfg.seed);
            match cmd {
                Command::SolveSpd => solve_linear(cmd, &cfg, run, &out, true),
                Command::SolveComposite => solve_linear(cmd, &cfg, run, &out, false),
                _ => market(cli, cmd, &cfg, run, &out),
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::InvalidInput("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(h) = cli.horizon {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon {h} must be positive")));
        }
        cfg.horizon = h;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_artifacts(out: &Path, trace: &Trace, report: &MonitorReport, summary: &RunSummary) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    trace.save_csv(&out.join("trace.csv"))?;
    let json = report.to_json()?;
    std::fs::write(out.join("monitor.json"), json + "\n").map_err(|e| Error::io(out.join("monitor.json"), e))?;
    let s = serde_json::to_string_pretty(summary).expect("summary serializes");
    std::fs::write(out.join("summary.json"), s + "\n").map_err(|e| Error::io(out.join("summary.json"), e))?;
    Ok(())
}

fn solve_linear(cmd: &Command, cfg: &ExperimentConfig, run: RunConfig, out: &Path, spd: bool) -> Result<RunSummary> {
    let (sol, name): (Solution, String) = if spd {
        let sec = cfg.spd.as_ref().ok_or_else(|| Error::InvalidInput("config has no [spd] section".into()))?;
        let (prob, p0) = sec.load(&cfg.base)?;
        let mut opts = SolveOptions { run, gammas: None, alpha: sec.alpha, tolerance: sec.tolerance };
        opts.gammas = requested_gammas(&sec.gammas, sec.gamma_scale, &prob.safe_gammas(sec.alpha)?)?;
        (solve_spd(&prob, &p0, &opts)?, prob.name())
    } else {
        let sec = cfg.composite.as_ref().ok_or_else(|| Error::InvalidInput("config has no [composite] section".into()))?;
        let (prob, p0) = sec.load(&cfg.base)?;
        let mut opts = SolveOptions { run, gammas: None, alpha: sec.alpha, tolerance: sec.tolerance };
        opts.gammas = requested_gammas(&sec.gammas, sec.gamma_scale, &prob.safe_gammas(sec.alpha)?)?;
        (solve_composite(&prob, &p0, &opts)?, prob.name())
    };
    let rate = sol.report.summary.rate.as_ref();
    let violations = sol.report.violation_count();
    let summary = RunSummary {
        command: cmd.tag().into(),
        problem: name,
        events: sol.trace.events.len(),
        converged: sol.converged,
        residual: sol.residual,
        violations,
        bad_updates: sol.report.summary.bad_updates,
        fitted_decay: rate.and_then(|r| r.delta),
        envelope_decay: rate.and_then(|r| r.envelope_decay),
        point: sol.point.to_vec(),
        equilibrium: None,
        max_offset: None,
        max_balance: None,
        exit_code: outcome_code(sol.converged, violations),
    };
    write_artifacts(out, &sol.trace, &sol.report, &summary)?;
    write_vector(&out.join("solution.txt"), &sol.point)?;
    Ok(summary)
}

fn load_market_for(cmd: &Command, cfg: &ExperimentConfig) -> Result<(Market, Option<crate::markets::OngoingConfig>)> {
    let sec = cfg.market.as_ref().ok_or_else(|| Error::InvalidInput("config has no [market] section".into()))?;
    let file = sec.load(&cfg.base)?;
    let market = file.market()?;
    let ongoing = file.ongoing()?;
    let want = match cmd {
        Command::MarketCes => "ces",
        Command::MarketLeontief => "leontief",
        _ => market.kind(),
    };
    if market.kind() != want {
        return Err(Error::InvalidInput(format!("{} needs a {want} market, got {}", cmd.tag(), market.kind())));
    }
    if matches!(cmd, Command::MarketOngoing) && ongoing.is_none() {
        return Err(Error::InvalidInput("market-ongoing needs chi, v0 and lambda in the market file".into()));
    }
    Ok((market, ongoing))
}

fn market(cli: &Cli, cmd: &Command, cfg: &ExperimentConfig, run: RunConfig, out: &Path) -> Result<RunSummary> {
    let sec = cfg.market.as_ref().ok_or_else(|| Error::InvalidInput("config has no [market] section".into()))?;
    let (market, ongoing) = load_market_for(cmd, cfg)?;
    let p0 = sec.initial(&cfg.base, market.goods(), market.total_budget())?;
    let equilibrium = if sec.equilibrium { Some(equilibrium_oracle(&market)?.prices) } else { None };
    let mode = match (cmd, ongoing) {
        (Command::MarketOngoing, Some(o)) => TatonnementMode::Ongoing(o),
        _ => TatonnementMode::Standard { lambda: sec.lambda() },
    };
    let opts = MarketOptions { run, mode, override_bounds: cli.override_bounds, equilibrium: equilibrium.clone() };
    let r: MarketRun = run_tatonnement(&market, &p0, &opts)?;
    let converged = r.max_excess < sec.tolerance;
    let rate = r.report.summary.rate.as_ref();
    let violations = r.report.violation_count();
    let summary = RunSummary {
        command: cmd.tag().into(),
        problem: market.name(),
        events: r.trace.events.len(),
        converged,
        residual: r.max_excess,
        violations,
        bad_updates: r.report.summary.bad_updates,
        fitted_decay: rate.and_then(|r| r.delta),
        envelope_decay: rate.and_then(|r| r.envelope_decay),
        point: r.prices.to_vec(),
        equilibrium: equilibrium.map(|p| p.to_vec()),
        max_offset: r.offsets.as_ref().map(|v| v.iter().fold(0.0f64, |m, x| m.max(x.abs()))),
        max_balance: r.max_balance,
        exit_code: outcome_code(converged, violations),
    };
    write_artifacts(out, &r.trace, &r.report, &summary)?;
    Ok(summary)
}

fn verify(cli: &Cli, path: &Path) -> Result<RunSummary> {
    let cfg = load_config(cli)?;
    let trace = Trace::load_csv(path)?;
    let point = replay(&trace)?;
    let (report, name, residual, converged) = if let Some(sec) = &cfg.spd {
        let (prob, _) = sec.load(&cfg.base)?;
        let gammas = requested_gammas(&sec.gammas, sec.gamma_scale, &prob.safe_gammas(sec.alpha)?)?
            .unwrap_or(prob.safe_gammas(sec.alpha)?);
        let params = prob.control_params(&gammas).or_else(|_| prob.control_params(&prob.safe_gammas(sec.alpha)?))?;
        let r = prob.residual_inf(&point);
        (monitor_trace(&trace, &prob, &params, Some(FitMode::Linear))?, prob.name(), r, r < sec.tolerance)
    } else if let Some(sec) = &cfg.composite {
        let (prob, _) = sec.load(&cfg.base)?;
        let gammas = requested_gammas(&sec.gammas, sec.gamma_scale, &prob.safe_gammas(sec.alpha)?)?
            .unwrap_or(prob.safe_gammas(sec.alpha)?);
        let params = prob.control_params(&gammas).or_else(|_| prob.control_params(&prob.safe_gammas(sec.alpha)?))?;
        let mode = prob.min_value().map(|_| FitMode::Linear);
        let r = prob.gradient(&point)?.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        (monitor_trace(&trace, &prob, &params, mode)?, prob.name(), r, r < sec.tolerance)
    } else {
        let sec = cfg.market.as_ref().expect("config has exactly one section");
        let market = sec.load(&cfg.base)?.market()?;
        let params = market_control_params();
        let report = if sec.equilibrium {
            let star = equilibrium_oracle(&market)?.prices;
            let anchored = Anchored { inner: &market, min: market_potential(&market, &star)? };
            monitor_trace(&trace, &anchored, &params, None)?
        } else {
            monitor_trace(&trace, &market, &params, None)?
        };
        let z = crate::markets::excess_demand(&market, &point)?;
        let r = z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        (report, market.name(), r, r < sec.tolerance)
    };
    let rate = report.summary.rate.as_ref();
    let violations = report.violation_count();
    let summary = RunSummary {
        command: "verify".into(),
        problem: name,
        events: trace.events.len(),
        converged,
        residual,
        violations,
        bad_updates: report.summary.bad_updates,
        fitted_decay: rate.and_then(|r| r.delta),
        envelope_decay: rate.and_then(|r| r.envelope_decay),
        point: point.to_vec(),
        equilibrium: None,
        max_offset: None,
        max_balance: None,
        // verification judges the trace, not whether the run had finished converging
        exit_code: if violations > 0 { EXIT_VIOLATIONS } else { EXIT_OK },
    };
    if let Some(out) = cli.out.as_ref() {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        std::fs::write(out.join("monitor.json"), report.to_json()? + "\n").map_err(|e| Error::io(out.join("monitor.json"), e))?;
    }
    Ok(summary)
}

#[derive(Debug, Deserialize)]
struct ReportDigest {
    schema: u32,
    problem: String,
    schedule: String,
    staleness: String,
    summary: serde_json::Value,
}

fn report(input: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let d: ReportDigest = serde_json::from_str(&text).map_err(|e| Error::parse(input, e.to_string()))?;
    if d.schema != crate::monitor::REPORT_SCHEMA {
        return Err(Error::parse(input, format!("monitor schema {} is not supported", d.schema)));
    }
    let get = |k: &str| d.summary.get(k).and_then(|v| v.as_u64()).unwrap_or(0) as usize;
    let violations = get("potential_increases") + get("gap_increases") + get("trace_violations");
    let rate = d.summary.get("rate").filter(|r| !r.is_null());
    let decay = |k: &str| rate.and_then(|r| r.get(k)).and_then(|v| v.as_f64());
    info!("report on {} under {} / {}", d.problem, d.schedule, d.staleness);
    Ok(RunSummary {
        command: "report".into(),
        problem: format!("{} [{} / {}]", d.problem, d.schedule, d.staleness),
        events: get("events"),
        converged: true,
        residual: d.summary.get("final_phi").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
        violations,
        bad_updates: get("bad_updates"),
        fitted_decay: decay("delta"),
        envelope_decay: decay("envelope_decay"),
        point: Vec::new(),
        equilibrium: None,
        max_offset: None,
        max_balance: None,
        exit_code: if violations > 0 { EXIT_VIOLATIONS } else { EXIT_OK },
    })
}
