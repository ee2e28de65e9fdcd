//! Experiment driver for the two-delay rate control toolkit.
//!
//! Every subcommand writes a CSV file (header documented in its `--help`)
//! plus a `<out>.meta` sidecar recording the fully resolved parameters and
//! tool version, so a data file can always be traced back to the run that
//! produced it. Parameters come from long-form flags, from a flat
//! `key = value` file passed via `--config`, or both; flags win.
//!
//! Exit codes: 0 on success, 2 for usage or parameter errors, 3 for
//! numerical failures (an integration that cannot be classified, a
//! degenerate reduction, and the like).

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::FileConfig;
use rcp2d::{
    amplitude_sweep, critical_kappa, criticality_map, equilibrium, f_tilde, integrate,
    normal_form, taylor_coefficients, Error, ModelParams, NetworkConfig, Outcome, PacketOutcome,
    SimConfig,
};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numerical(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::QueueSingular { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<String> for CliError {
    fn from(msg: String) -> Self {
        CliError::Usage(msg)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn req<T>(value: Option<T>, name: &str) -> CliResult<T> {
    value.ok_or_else(|| usage(format!("--{name} is required (as a flag or config key)")))
}

#[derive(Parser)]
#[command(
    name = "rcp2d",
    version,
    about = "Stability, bifurcation, and simulation experiments for rate control with two delays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid-evaluate the design rule a(8+b-sqrt(b^2+8b))/4 < pi/2 over (a, b).
    ///
    /// CSV columns: `a,b,stable,boundary_a`, where boundary_a is the critical
    /// gain for that row's b, tracing the stability boundary.
    StabilityChart(StabilityChartArgs),
    /// Locate the Hopf point for one parameter set and classify it.
    ///
    /// CSV columns: `kappa_c,omega0,theta,mu2,beta2,criticality`.
    HopfClassify(HopfClassifyArgs),
    /// Tabulate the rate-mismatch-only criticality curve f~(theta).
    ///
    /// CSV columns: `theta,f_tilde`.
    FtildeCurve(FtildeCurveArgs),
    /// Sweep the closed-form mu2 of the queue-feedback model along theta or rho.
    ///
    /// CSV columns: `theta,rho_star,mu2,criticality`.
    Mu2Curves(Mu2CurvesArgs),
    /// Integrate the fluid model across a range of kappa and record each
    /// steady amplitude.
    ///
    /// CSV columns: `kappa,amplitude,period,outcome`; amplitude and period
    /// are empty for escaped or inconclusive points.
    BifurcationSweep(BifurcationSweepArgs),
    /// Integrate one fluid trajectory and dump the trace.
    ///
    /// CSV columns: `t,R`, plus a queue-proxy column `p` when b > 0.
    SimulateFluid(SimulateFluidArgs),
    /// Run the packet-level bottleneck simulation and dump the sampled trace.
    ///
    /// CSV columns: `t_ms,queue_pkts,router_rate_pkts_per_ms,arrivals_per_ms`.
    SimulatePackets(SimulatePacketsArgs),
}

/// Flags shared by the commands that take one fluid-model parameter set.
#[derive(Args)]
struct ModelFlags {
    /// Controller gain.
    #[arg(long)]
    a: Option<f64>,
    /// Queue-feedback weight; 0 selects the rate-mismatch-only model.
    #[arg(long)]
    b: Option<f64>,
    /// Target utilization; used only when b = 0.
    #[arg(long)]
    gamma: Option<f64>,
    /// Link capacity (default 100).
    #[arg(long)]
    capacity: Option<f64>,
    /// First round-trip delay.
    #[arg(long)]
    tau1: Option<f64>,
    /// Second round-trip delay.
    #[arg(long)]
    tau2: Option<f64>,
    /// Gain multiplier (default 1).
    #[arg(long)]
    kappa: Option<f64>,
}

impl ModelFlags {
    fn resolve(self, cfg: &mut FileConfig) -> CliResult<(ModelParams<f64>, Meta)> {
        let a = req(self.a.or(cfg.take("a")?), "a")?;
        let b = req(self.b.or(cfg.take("b")?), "b")?;
        let gamma = self.gamma.or(cfg.take("gamma")?);
        let capacity = self.capacity.or(cfg.take("capacity")?).unwrap_or(100.0);
        let tau1 = req(self.tau1.or(cfg.take("tau1")?), "tau1")?;
        let tau2 = req(self.tau2.or(cfg.take("tau2")?), "tau2")?;
        let kappa = self.kappa.or(cfg.take("kappa")?).unwrap_or(1.0);

        let params = if b == 0.0 {
            let gamma = gamma.ok_or_else(|| usage("--gamma is required when b = 0"))?;
            ModelParams::without_queue(a, gamma, capacity, tau1, tau2, kappa)?
        } else {
            ModelParams::with_queue(a, b, capacity, tau1, tau2, kappa)?
        };

        let mut meta = Meta::new();
        meta.push("a", a);
        meta.push("b", b);
        if b == 0.0 {
            meta.push("gamma", params.gamma);
        }
        meta.push("capacity", capacity);
        meta.push("tau1", tau1);
        meta.push("tau2", tau2);
        meta.push("kappa", kappa);
        Ok((params, meta))
    }
}

/// Key-value pairs for the `<out>.meta` sidecar, in insertion order.
struct Meta(Vec<(String, String)>);

impl Meta {
    fn new() -> Self {
        Meta(Vec::new())
    }

    fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.0.push((key.to_string(), value.to_string()));
    }
}

fn write_outputs(out: &Path, command: &str, header: &str, rows: &[String], meta: Meta) -> CliResult {
    let mut csv = String::with_capacity(header.len() + rows.len() * 32 + 2);
    csv.push_str(header);
    csv.push('\n');
    for row in rows {
        csv.push_str(row);
        csv.push('\n');
    }
    std::fs::write(out, csv)
        .map_err(|e| usage(format!("cannot write {}: {e}", out.display())))?;

    let mut text = String::new();
    let _ = writeln!(text, "tool = rcp2d {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(text, "command = {command}");
    for (key, value) in &meta.0 {
        let _ = writeln!(text, "{key} = {value}");
    }
    let meta_path = PathBuf::from(format!("{}.meta", out.display()));
    std::fs::write(&meta_path, text)
        .map_err(|e| usage(format!("cannot write {}: {e}", meta_path.display())))?;
    Ok(())
}

fn linspace(lo: f64, hi: f64, n: usize) -> CliResult<Vec<f64>> {
    if n < 2 || !(hi > lo) {
        return Err(usage(format!(
            "need at least two points and an increasing range, got {n} over [{lo}, {hi}]"
        )));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

#[derive(Args)]
struct StabilityChartArgs {
    /// Smallest gain on the grid (default 0).
    #[arg(long)]
    a_min: Option<f64>,
    /// Largest gain on the grid (default 2).
    #[arg(long)]
    a_max: Option<f64>,
    /// Smallest queue weight on the grid (default 0).
    #[arg(long)]
    b_min: Option<f64>,
    /// Largest queue weight on the grid (default 50).
    #[arg(long)]
    b_max: Option<f64>,
    /// Grid points per axis (default 101).
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_stability_chart(args: StabilityChartArgs) -> CliResult {
    let mut cfg = FileConfig::load(args.config.as_deref())?;
    let a_min = args.a_min.or(cfg.take("a_min")?).unwrap_or(0.0);
    let a_max = args.a_max.or(cfg.take("a_max")?).unwrap_or(2.0);
    let b_min = args.b_min.or(cfg.take("b_min")?).unwrap_or(0.0);
    let b_max = args.b_max.or(cfg.take("b_max")?).unwrap_or(50.0);
    let resolution = args.resolution.or(cfg.take("resolution")?).unwrap_or(101);
    let out = req(args.out.or(cfg.take("out")?), "out")?;
    cfg.finish()?;
    if b_min < 0.0 {
        return Err(usage("b_min must be nonnegative"));
    }

    let half_pi = std::f64::consts::FRAC_PI_2;
    let a_grid = linspace(a_min, a_max, resolution)?;
    let b_grid = linspace(b_min, b_max, resolution)?;
    let mut rows = Vec::with_capacity(resolution * resolution);
    for &b in &b_grid {
        let bracket = (8.0 + b - (b * b + 8.0 * b).sqrt()) / 4.0;
        let boundary_a = half_pi / bracket;
        for &a in &a_grid {
            let stable = a * bracket < half_pi;
            rows.push(format!("{a},{b},{stable},{boundary_a}"));
        }
    }

    let mut meta = Meta::new();
    meta.push("a_min", a_min);
    meta.push("a_max", a_max);
    meta.push("b_min", b_min);
    meta.push("b_max", b_max);
    meta.push("resolution", resolution);
    write_outputs(&out, "stability-chart", "a,b,stable,boundary_a", &rows, meta)?;
    println!("wrote {} grid rows to {}", rows.len(), out.display());
    Ok(())
}

#[derive(Args)]
struct HopfClassifyArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_hopf_classify(args: HopfClassifyArgs) -> CliResult {
    let mut cfg = FileConfig::load(args.config.as_deref())?;
    let (params, meta) = args.model.resolve(&mut cfg)?;
    let out = req(args.out.or(cfg.take("out")?), "out")?;
    cfg.finish()?;

    let hp = critical_kappa(&params);
    let at_hopf = params.with_kappa(hp.kappa_c);
    let eq = equilibrium(&at_hopf);
    let coeffs = taylor_coefficients(&at_hopf, &eq)?;
    let nf = normal_form(&at_hopf, &eq, &coeffs, &hp)?;

    let row = format!(
        "{},{},{},{},{},{}",
        hp.kappa_c, hp.omega0, hp.theta, nf.mu2, nf.beta2, nf.criticality
    );
    write_outputs(
        &out,
        "hopf-classify",
        "kappa_c,omega0,theta,mu2,beta2,criticality",
        &[row],
        meta,
    )?;
    println!(
        "kappa_c = {:.9}, omega0 = {:.9}, theta = {:.9}, mu2 = {:.6e}, beta2 = {:.6e}: {}",
        hp.kappa_c, hp.omega0, hp.theta, nf.mu2, nf.beta2, nf.criticality
    );
    Ok(())
}

#[derive(Args)]
struct FtildeCurveArgs {
    /// Number of sample points (default 500).
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_ftilde_curve(args: FtildeCurveArgs) -> CliResult {
    let mut cfg = FileConfig::load(args.config.as_deref())?;
    let n_points = args.n_points.or(cfg.take("n_points")?).unwrap_or(500);
    let out = req(args.out.or(cfg.take("out")?), "out")?;
    cfg.finish()?;

    let pi = std::f64::consts::PI;
    let thetas = linspace(0.001 * pi, 0.999 * pi, n_points)?;
    let rows: Vec<String> = thetas
        .iter()
        .map(|&theta| format!("{theta},{}", f_tilde(theta)))
        .collect();

    let mut meta = Meta::new();
    meta.push("n_points", n_points);
    write_outputs(&out, "ftilde-curve", "theta,f_tilde", &rows, meta)?;
    println!("wrote {} curve points to {}", rows.len(), out.display());
    Ok(())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SweepMode {
    /// Vary theta at fixed equilibrium utilization.
    ThetaSweep,
    /// Vary equilibrium utilization at fixed theta.
    RhoSweep,
}

#[derive(Args)]
struct Mu2CurvesArgs {
    /// Which coordinate to sweep.
    #[arg(long, value_enum)]
    mode: Option<SweepMode>,
    /// The held coordinate: rho* for theta-sweep (default 0.9), theta for
    /// rho-sweep (default pi/3).
    #[arg(long)]
    fixed: Option<f64>,
    /// Number of sample points (default 199 across theta, 99 across rho).
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_mu2_curves(args: Mu2CurvesArgs) -> CliResult {
    let mut cfg = FileConfig::load(args.config.as_deref())?;
    let mode = match args.mode {
        Some(m) => m,
        None => match cfg.take::<String>("mode")? {
            Some(raw) => <SweepMode as ValueEnum>::from_str(&raw, true)
                .map_err(|_| usage(format!("mode must be theta-sweep or rho-sweep, got `{raw}`")))?,
            None => return Err(usage("--mode is required (theta-sweep or rho-sweep)")),
        },
    };
    let fixed = args.fixed.or(cfg.take("fixed")?);
    let n_points = args
        .n_points
        .or(cfg.take("n_points")?)
        .unwrap_or(match mode {
            SweepMode::ThetaSweep => 199,
            SweepMode::RhoSweep => 99,
        });
    let out = req(args.out.or(cfg.take("out")?), "out")?;
    cfg.finish()?;

    let pi = std::f64::consts::PI;
    let points = match mode {
        SweepMode::ThetaSweep => {
            let rho = fixed.unwrap_or(0.9);
            let thetas = linspace(0.005 * pi, 0.995 * pi, n_points)?;
            criticality_map(&thetas, &[rho])?
        }
        SweepMode::RhoSweep => {
            let theta = fixed.unwrap_or(pi / 3.0);
            let rhos = linspace(0.01, 0.99, n_points)?;
            criticality_map(&[theta], &rhos)?
        }
    };
    let rows: Vec<String> = points
        .iter()
        .map(|p| format!("{},{},{},{}", p.theta, p.rho_star, p.mu2, p.criticality))
        .collect();

    let mut meta = Meta::new();
    meta.push(
        "mode",
        match mode {
            SweepMode::ThetaSweep => "theta-sweep",
            SweepMode::RhoSweep => "rho-sweep",
        },
    );
    meta.push(
        "fixed",
        fixed.unwrap_or(match mode {
            SweepMode::ThetaSweep => 0.9,
            SweepMode::RhoSweep => pi / 3.0,
        }),
    );
    meta.push("n_points", n_points);
    write_outputs(&out, "mu2-curves", "theta,rho_star,mu2,criticality", &rows, meta)?;
    println!("wrote {} curve points to {}", rows.len(), out.display());
    Ok(())
}

#[derive(Args)]
struct BifurcationSweepArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Lower end of the multiplier range (default 0.95).
    #[arg(long)]
    kappa_min: Option<f64>,
    /// Upper end of the multiplier range (default 1.05).
    #[arg(long)]
    kappa_max: Option<f64>,
    /// Number of sweep points (default 11).
    #[arg(long)]
    n_points: Option<usize>,
    /// Base integration horizon per point (default 750 times tau1+tau2).
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_bifurcation_sweep(args: BifurcationSweepArgs) -> CliResult {
    let mut cfg = FileConfig::load(args.config.as_deref())?;
    let (params, mut meta) = args.model.resolve(&mut cfg)?;
    let kappa_min = args.kappa_min.or(cfg.take("kappa_min")?).unwrap_or(0.95);
    let kappa_max = args.kappa_max.or(cfg.take("kappa_max")?).unwrap_or(1.05);
    let n_points = args.n_points.or(cfg.take("n_points")?).unwrap_or(11);
    let t_end = args
        .t_end
        .or(cfg.take("t_end")?)
        .unwrap_or(750.0 * params.total_delay());
    let out = req(args.out.or(cfg.take("out")?), "out")?;
    cfg.finish()?;

    let points = amplitude_sweep(&params, (kappa_min, kappa_max), n_points, t_end)?;
    let rows: Vec<String> = points
        .iter()
        .map(|p| {
            let amplitude = p.amplitude.map(|v| v.to_string()).unwrap_or_default();
            let period = p.period.map(|v| v.to_string()).unwrap_or_default();
            format!("{},{amplitude},{period},{}", p.kappa, p.outcome)
        })
        .collect();

    meta.push("kappa_min", kappa_min);
    meta.push("kappa_max", kappa_max);
    meta.push("n_points", n_points);
    meta.push("t_end", t_end);
    write_outputs(&out, "bifurcation-sweep", "kappa,amplitude,period,outcome", &rows, meta)?;
    let cycles = points.iter().filter(|p| p.period.is_some()).count();
    println!(
        "swept {} multipliers ({} limit cycles) into {}",
        points.len(),
        cycles,
        out.display()
    );
    Ok(())
}

#[derive(Args)]
struct SimulateFluidArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Integration horizon (default 500 times tau1+tau2).
    #[arg(long)]
    t_end: Option<f64>,
    /// Step size (default min(tau1,tau2)/100).
    #[arg(long)]
    dt: Option<f64>,
    /// Constant initial history (default 1.01 times the equilibrium rate).
    #[arg(long)]
    history: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_simulate_fluid(args: SimulateFluidArgs) -> CliResult {
    let mut cfg = FileConfig::load(args.config.as_deref())?;
    let (params, mut meta) = args.model.resolve(&mut cfg)?;
    let t_end = args
        .t_end
        .or(cfg.take("t_end")?)
        .unwrap_or(500.0 * params.total_delay());
    let dt = args.dt.or(cfg.take("dt")?);
    let history = args.history.or(cfg.take("history")?);
    let out = req(args.out.or(cfg.take("out")?), "out")?;
    cfg.finish()?;

    let mut sim = SimConfig::new(params, t_end);
    if let Some(dt) = dt {
        sim = sim.with_dt(dt);
    }
    if let Some(history) = history {
        sim = sim.with_history(history);
    }
    let trace = integrate(&sim)?;

    let (header, rows) = match &trace.queue {
        Some(queue) => (
            "t,R,p",
            trace
                .times
                .iter()
                .zip(&trace.rates)
                .zip(queue)
                .map(|((t, r), p)| format!("{t},{r},{p}"))
                .collect::<Vec<_>>(),
        ),
        None => (
            "t,R",
            trace
                .times
                .iter()
                .zip(&trace.rates)
                .map(|(t, r)| format!("{t},{r}"))
                .collect::<Vec<_>>(),
        ),
    };

    meta.push("t_end", t_end);
    meta.push("dt", sim.dt);
    meta.push("history", sim.history.unwrap_or(trace.r_star * 1.01));
    write_outputs(&out, "simulate-fluid", header, &rows, meta)?;

    match trace.outcome {
        Outcome::ConvergedToEquilibrium => {
            println!("converged to the equilibrium rate {:.6}", trace.r_star)
        }
        Outcome::LimitCycle { amplitude, period } => println!(
            "limit cycle: peak-to-peak amplitude {amplitude:.6}, period {period:.4}"
        ),
        Outcome::Escaped { t } => println!("trajectory escaped at t = {t:.4}"),
    }
    if trace.saturated {
        println!("note: the queue-proxy clamp engaged during this run");
    }
    Ok(())
}

#[derive(Args)]
struct SimulatePacketsArgs {
    /// Link capacity in packets/ms (default 100).
    #[arg(long)]
    capacity: Option<f64>,
    /// Number of sources, split half and half between the delays (default 100).
    #[arg(long)]
    n_sources: Option<usize>,
    /// First round-trip time in ms.
    #[arg(long)]
    tau1: Option<f64>,
    /// Second round-trip time in ms.
    #[arg(long)]
    tau2: Option<f64>,
    /// Controller gain.
    #[arg(long)]
    a: Option<f64>,
    /// Queue-feedback weight; 0 selects the rate-mismatch-only controller.
    #[arg(long)]
    b: Option<f64>,
    /// Target utilization; used only when b = 0.
    #[arg(long)]
    gamma: Option<f64>,
    /// Gain multiplier (default 1).
    #[arg(long)]
    kappa: Option<f64>,
    /// Run length in ms.
    #[arg(long)]
    duration: Option<f64>,
    /// Router recompute period in ms (default (tau1+tau2)/2).
    #[arg(long)]
    update_interval: Option<f64>,
    /// RNG seed (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Starting per-flow rate (default: the fair share of the target load).
    #[arg(long)]
    initial_rate: Option<f64>,
    /// Smoothing weight in (0, 1] for the measured arrival rate (default 1).
    #[arg(long)]
    load_smoothing: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_simulate_packets(args: SimulatePacketsArgs) -> CliResult {
    let mut cfg = FileConfig::load(args.config.as_deref())?;
    let capacity = args.capacity.or(cfg.take("capacity")?).unwrap_or(100.0);
    let n_sources = args.n_sources.or(cfg.take("n_sources")?).unwrap_or(100);
    let tau1 = req(args.tau1.or(cfg.take("tau1")?), "tau1")?;
    let tau2 = req(args.tau2.or(cfg.take("tau2")?), "tau2")?;
    let a = req(args.a.or(cfg.take("a")?), "a")?;
    let b = req(args.b.or(cfg.take("b")?), "b")?;
    let gamma = args.gamma.or(cfg.take("gamma")?);
    let kappa = args.kappa.or(cfg.take("kappa")?).unwrap_or(1.0);
    let duration = req(args.duration.or(cfg.take("duration")?), "duration")?;
    let update_interval = args.update_interval.or(cfg.take("update_interval")?);
    let seed = args.seed.or(cfg.take("seed")?).unwrap_or(0);
    let initial_rate = args.initial_rate.or(cfg.take("initial_rate")?);
    let load_smoothing = args.load_smoothing.or(cfg.take("load_smoothing")?).unwrap_or(1.0);
    let out = req(args.out.or(cfg.take("out")?), "out")?;
    cfg.finish()?;

    let mut network = if b == 0.0 {
        let gamma = gamma.ok_or_else(|| usage("--gamma is required when b = 0"))?;
        NetworkConfig::rate_mismatch_only(capacity, n_sources, tau1, tau2, a, gamma, kappa, duration)
    } else {
        NetworkConfig::with_queue_feedback(capacity, n_sources, tau1, tau2, a, b, kappa, duration)
    }
    .with_seed(seed);
    if let Some(delta) = update_interval {
        network.update_interval = delta;
    }
    if let Some(r0) = initial_rate {
        network = network.with_initial_rate(r0);
    }
    network.load_smoothing = load_smoothing;

    let trace = network.run()?;
    let rows: Vec<String> = trace
        .samples
        .iter()
        .map(|s| format!("{},{},{},{}", s.t, s.queue_pkts, s.rate, s.arrivals_per_ms))
        .collect();

    let mut meta = Meta::new();
    meta.push("capacity", capacity);
    meta.push("n_sources", n_sources);
    meta.push("tau1", tau1);
    meta.push("tau2", tau2);
    meta.push("a", a);
    meta.push("b", b);
    if b == 0.0 {
        meta.push("gamma", network.gamma);
    }
    meta.push("kappa", kappa);
    meta.push("duration", duration);
    meta.push("update_interval", network.update_interval);
    meta.push("seed", seed);
    if let Some(r0) = network.initial_rate {
        meta.push("initial_rate", r0);
    }
    meta.push("load_smoothing", load_smoothing);
    write_outputs(
        &out,
        "simulate-packets",
        "t_ms,queue_pkts,router_rate_pkts_per_ms,arrivals_per_ms",
        &rows,
        meta,
    )?;

    match trace.outcome {
        PacketOutcome::Completed => println!(
            "completed: utilization {:.4}, {} rate-floor clamps, {} packets through",
            trace.utilization, trace.clamp_count, trace.packets_departed
        ),
        PacketOutcome::QueueOverflow { t } => {
            println!("queue overflow at t = {t:.1} ms; trace truncated")
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::StabilityChart(args) => cmd_stability_chart(args),
        Command::HopfClassify(args) => cmd_hopf_classify(args),
        Command::FtildeCurve(args) => cmd_ftilde_curve(args),
        Command::Mu2Curves(args) => cmd_mu2_curves(args),
        Command::BifurcationSweep(args) => cmd_bifurcation_sweep(args),
        Command::SimulateFluid(args) => cmd_simulate_fluid(args),
        Command::SimulatePackets(args) => cmd_simulate_packets(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
