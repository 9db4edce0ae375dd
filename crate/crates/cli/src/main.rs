use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use slotless::baselines::{eta_grid, gain_table, granularity_study, GainTable};
use slotless::optimizer::{apply_skew_guards, derive, one_way_split};
use slotless::simulator::{collision_fraction, monte_carlo, sweep_pair, MonteCarloOptions, SweepOptions};
use slotless::{Error, Nanos, OptimizerRequest, RadioParams, VariantChoice, VariantSolution};

#[derive(Parser)]
#[command(name = "slotless", version, about = "Slotless neighbor-discovery parameter and latency toolkit")]
struct Cli {
    /// Radio profile as JSON; omitted keys keep their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    radio_file: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Latency-optimal parameters for one duty-cycle.
    Optimize(OptimizeArgs),
    /// Gain of PI-kMOpt over the slotted baselines, as CSV.
    Compare(CompareArgs),
    /// Latency distribution over all initial offsets, as CSV.
    Cdf(CdfArgs),
    /// Random pair trials, one JSON outcome per line.
    Simulate(SimulateArgs),
    /// Duty-cycles realizable by PI-kMOpt and G-Nihao, as CSV.
    Granularity(GranularityArgs),
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "lower")]
enum VariantArg {
    Pi0m,
    Pik1p,
    Pik2p,
    Best,
}

impl From<VariantArg> for VariantChoice {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Pi0m => VariantChoice::Pi0m,
            VariantArg::Pik1p => VariantChoice::Pik1p,
            VariantArg::Pik2p => VariantChoice::Pik2p,
            VariantArg::Best => VariantChoice::Best,
        }
    }
}

#[derive(Args)]
struct Target {
    /// Target duty-cycle as a fraction, e.g. 0.01.
    #[arg(long)]
    eta: f64,
    #[arg(long, value_enum, ignore_case = true, default_value = "best")]
    variant: VariantArg,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    target: Target,
    /// Harden against this clock drift per device, in ppm.
    #[arg(long, value_name = "PPM")]
    skew_guard: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, default_value_t = 0.01)]
    eta_min: f64,
    #[arg(long, default_value_t = 0.2)]
    eta_max: f64,
    #[arg(long, default_value_t = 0.001)]
    step: f64,
    /// Slot length of the baselines.
    #[arg(long, default_value = "10ms")]
    dsl: Nanos,
    /// Skip infeasible grid points instead of failing.
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CdfArgs {
    #[command(flatten)]
    target: Target,
    /// Offset grid spacing; defaults to the beacon duration.
    #[arg(long)]
    step: Option<Nanos>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    collisions: bool,
    /// Per-device skew range in ppm; defaults to the radio profile.
    #[arg(long, value_name = "PPM")]
    skew_ppm: Option<f64>,
    #[arg(long)]
    horizon: Option<Nanos>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GranularityArgs {
    #[arg(long, default_value_t = 0.001)]
    min: f64,
    #[arg(long, default_value_t = 0.2)]
    max: f64,
    #[arg(long, default_value_t = 0.0005)]
    step: f64,
    #[arg(long, default_value = "10ms")]
    dsl: Nanos,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Infeasible(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Infeasible(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InfeasibleEta { .. }
            | Error::RangesEmpty { .. }
            | Error::EtaOutOfRange(_)
            | Error::GuardExceedsWindow { .. }
            | Error::Undiscovered { .. } => Failure::Infeasible(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn io_failure(what: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", what.display()))
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn load_radio(path: Option<&Path>) -> Outcome<RadioParams> {
    let Some(path) = path else { return Ok(RadioParams::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let radio: RadioParams = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    radio.validate()?;
    Ok(radio)
}

fn open_out(path: Option<&Path>) -> Outcome<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| io_failure(p, e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn out_name(path: Option<&Path>) -> PathBuf {
    path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf)
}

fn solve(target: &Target, radio: RadioParams) -> Outcome<VariantSolution> {
    Ok(derive(&OptimizerRequest::new(target.eta, target.variant.into()).with_radio(radio))?)
}

fn print_solution(w: &mut dyn Write, s: &VariantSolution) -> io::Result<()> {
    let c = &s.config;
    writeln!(w, "variant      {}", s.variant)?;
    writeln!(w, "k            {}", s.k)?;
    writeln!(w, "M            {}", s.m)?;
    writeln!(w, "T_a          {}", c.t_a)?;
    writeln!(w, "T_s          {}", c.t_s)?;
    writeln!(w, "d_s          {}", c.d_s)?;
    writeln!(w, "d_a          {}", c.d_a)?;
    writeln!(w, "eps          {}", s.eps)?;
    if s.eps_ta > Nanos::ZERO {
        writeln!(w, "eps_ta       {}", s.eps_ta)?;
    }
    writeln!(w, "eta target   {:.6}", s.eta_target)?;
    writeln!(w, "eta achieved {:.6}", s.eta_achieved)?;
    writeln!(w, "d_m          {}", s.d_m)?;
    let clamps: Vec<&str> = s.clamped.iter().map(|c| c.name()).collect();
    writeln!(w, "clamped      {}", if clamps.is_empty() { "none".into() } else { clamps.join(", ") })?;
    if s.beyond_eta_adj {
        writeln!(w, "note         above eta_adj, the scan-window floor costs latency")?;
    }
    Ok(())
}

fn optimize(args: &OptimizeArgs, radio: RadioParams) -> Outcome {
    let mut sol = solve(&args.target, radio)?;
    if let Some(ppm) = args.skew_guard {
        sol = apply_skew_guards(&sol, &RadioParams { skew_ppm: ppm, ..radio })?;
    }
    let stdout = Path::new("<stdout>");
    let mut w = io::stdout().lock();
    if args.json {
        let text = serde_json::to_string_pretty(&sol).map_err(|e| io_failure(stdout, e))?;
        writeln!(w, "{text}").map_err(|e| io_failure(stdout, e))?;
        return Ok(());
    }
    let (adv, scan) = one_way_split(&sol)?;
    let write = |w: &mut dyn Write| -> io::Result<()> {
        print_solution(w, &sol)?;
        writeln!(w, "one-way      advertiser T_a = {}, scanner T_s = {} d_s = {}", adv.t_a, scan.t_s, scan.d_s)
    };
    write(&mut w).map_err(|e| io_failure(stdout, e))
}

fn feasible_grid(grid: Vec<f64>, radio: RadioParams, lenient: bool) -> Outcome<Vec<f64>> {
    let mut kept = Vec::with_capacity(grid.len());
    for eta in grid {
        let probe = derive(&OptimizerRequest::new(eta, VariantChoice::Best).with_radio(radio))
            .and_then(|s| apply_skew_guards(&s, &radio));
        match probe {
            Ok(_) => kept.push(eta),
            Err(e) if lenient => eprintln!("warning: skipping eta {eta}: {e}"),
            Err(e) => return Err(e.into()),
        }
    }
    if kept.is_empty() {
        return Err(Failure::Infeasible("no feasible duty-cycle in the grid".into()));
    }
    Ok(kept)
}

fn write_gain_csv(w: Box<dyn Write>, table: &GainTable) -> csv::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["eta", "protocol", "d_m_slotted_ns", "d_m_pikm_ns", "gain"])?;
    for r in &table.rows {
        csv.write_record([
            r.eta.to_string(),
            r.protocol.name().to_string(),
            r.d_m_slotted.get().to_string(),
            r.d_m_pikm.get().to_string(),
            r.gain.to_string(),
        ])?;
    }
    for s in &table.summary {
        for (label, gain) in [("mean", s.mean_gain), ("max", s.max_gain)] {
            csv.write_record([label, s.protocol.name(), "", "", &gain.to_string()])?;
        }
    }
    csv.flush()?;
    Ok(())
}

fn compare(args: &CompareArgs, radio: RadioParams) -> Outcome {
    let grid = eta_grid(args.eta_min, args.eta_max, args.step)?;
    let w = open_out(args.out.as_deref())?;
    let grid = feasible_grid(grid, radio, args.lenient)?;
    let table = gain_table(&grid, &radio, args.dsl)?;
    write_gain_csv(w, &table).map_err(|e| io_failure(&out_name(args.out.as_deref()), e))
}

fn cdf(args: &CdfArgs, radio: RadioParams) -> Outcome {
    let sol = solve(&args.target, radio)?;
    let name = out_name(args.out.as_deref());
    let mut csv = csv::Writer::from_writer(open_out(args.out.as_deref())?);
    let step = args.step.unwrap_or(sol.config.d_a);
    let res = sweep_pair(&sol.config, &sol.config, &SweepOptions::with_step(step))?;
    let curve = &res.curve;
    eprintln!(
        "{} d_m = {}, worst swept = {}, mean = {:.4} d_m, {} offsets",
        sol.variant,
        sol.d_m,
        curve.worst_case,
        curve.mean / sol.d_m.as_f64(),
        res.samples
    );
    let write = |csv: &mut csv::Writer<Box<dyn Write>>| -> csv::Result<()> {
        csv.write_record(["latency_ns", "cum_prob"])?;
        for p in &curve.points {
            csv.write_record([p.latency.get().to_string(), p.cum_prob.to_string()])?;
        }
        csv.flush()?;
        Ok(())
    };
    write(&mut csv).map_err(|e| io_failure(&name, e))
}

fn simulate(args: &SimulateArgs, radio: RadioParams) -> Outcome {
    let sol = solve(&args.target, radio)?;
    let name = out_name(args.out.as_deref());
    let mut w = open_out(args.out.as_deref())?;
    let opts = MonteCarloOptions {
        collisions: args.collisions,
        skew_ppm_range: args.skew_ppm.unwrap_or(radio.skew_ppm),
        horizon: args.horizon,
    };
    let outcomes = monte_carlo(&sol.config, args.trials, args.seed, &opts)?;
    let timeouts = outcomes.iter().filter(|o| o.timed_out()).count();
    eprintln!(
        "{} trials of {}: {:.2}% with collisions, {timeouts} timed out",
        outcomes.len(),
        sol.variant,
        100.0 * collision_fraction(&outcomes)
    );
    for o in &outcomes {
        let line = serde_json::to_string(o).map_err(|e| io_failure(&name, e))?;
        writeln!(w, "{line}").map_err(|e| io_failure(&name, e))?;
    }
    w.flush().map_err(|e| io_failure(&name, e))
}

fn granularity(args: &GranularityArgs, radio: RadioParams) -> Outcome {
    let name = out_name(args.out.as_deref());
    let mut csv = csv::Writer::from_writer(open_out(args.out.as_deref())?);
    let g = granularity_study(args.min, args.max, args.step, &radio, args.dsl)?;
    eprintln!(
        "{} targets; G-Nihao realizes {} distinct duty-cycles",
        g.targets.len(),
        g.nihao_realizable.len()
    );
    let write = |csv: &mut csv::Writer<Box<dyn Write>>| -> csv::Result<()> {
        csv.write_record(["protocol", "eta_target", "eta_realized"])?;
        for (t, a) in g.targets.iter().zip(&g.pikm_achieved) {
            csv.write_record(["PI-kMOpt", &t.to_string(), &a.to_string()])?;
        }
        for e in &g.nihao_realizable {
            csv.write_record(["G-Nihao", "", &e.to_string()])?;
        }
        csv.flush()?;
        Ok(())
    };
    write(&mut csv).map_err(|e| io_failure(&name, e))
}

fn run(cli: Cli) -> Outcome {
    let radio = load_radio(cli.radio_file.as_deref())?;
    match &cli.command {
        Command::Optimize(a) => optimize(a, radio),
        Command::Compare(a) => compare(a, radio),
        Command::Cdf(a) => cdf(a, radio),
        Command::Simulate(a) => simulate(a, radio),
        Command::Granularity(a) => granularity(a, radio),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
