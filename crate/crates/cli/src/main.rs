//! `coharq`: command-line front end of the coordinated HARQ engine.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coharq_core::analytic::{
    analytic_summary, cdf_inr_sum, cdf_rtd_sum, diversity_gain, phi_coordinated, ThresholdPair, TwoUserModel,
};
use coharq_core::experiments::{
    parse_axis, run_preset, write_csv, AxisSpec, ExperimentConfig, Preset, PresetOverrides, ResultRow,
};
use coharq_core::montecarlo::{fit_slope_for, sweep, Target};
use coharq_core::protocol::write_trace;
use coharq_core::{Error, FadingProfile, ProtocolConfig, Scheme, SeedTree};

#[derive(Parser)]
#[command(name = "coharq", version, about = "Coordinated hybrid-ARQ over Rayleigh block fading")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce one of the figure presets.
    Run(RunArgs),
    /// Monte Carlo sweep over SNR with analytic counterparts.
    Sweep(SweepArgs),
    /// Exhaustive rate search at every SNR point.
    Optimize(OptimizeArgs),
    /// Evaluate a closed-form expression directly.
    Analytic(AnalyticArgs),
    /// Run every `[[run]]` table of a TOML file.
    Batch(BatchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// fig1a, fig1b, fig1c or fig2.
    #[arg(long)]
    preset: String,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// SNR axis in dB, `start:step:stop` or a list.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Per-user rate values searched by fig1c.
    #[arg(long)]
    grid: Option<String>,
    /// Round limits for fig1a.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<u32>>,
    /// Second-user fading parameters for fig1b.
    #[arg(long, value_delimiter = ',')]
    lambda2: Option<Vec<f64>>,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LinkArgs {
    #[arg(long, default_value = "inr")]
    scheme: String,
    /// `coord`, `noncoord` or an explicit policy name.
    #[arg(long, default_value = "coord")]
    policy: String,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    m: u32,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    /// Transmit antennas.
    #[arg(long, default_value_t = 1)]
    u: usize,
    /// Receive antennas.
    #[arg(long, default_value_t = 1)]
    v: usize,
    #[arg(long, default_value = "0:2:30", allow_hyphen_values = true)]
    snr_db: String,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl LinkArgs {
    fn experiment(&self, rate_grid: Option<String>) -> Result<ExperimentConfig, Error> {
        Ok(ExperimentConfig {
            name: None,
            scheme: self.scheme.parse()?,
            policy: self.policy.clone(),
            k: self.k,
            m: self.m,
            lambdas: self.lambdas.clone(),
            u: self.u,
            v: self.v,
            rates: self.rates.clone(),
            rate_grid: rate_grid.map(AxisSpec::Range),
            snr_db: AxisSpec::Range(self.snr_db.clone()),
            trials: self.trials,
            seed: self.seed,
            out: self.out.clone(),
        })
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    link: LinkArgs,
    /// Also fit the mean-outage slope over this many top decades.
    #[arg(long)]
    fit_slope: Option<f64>,
    /// Write a per-slot protocol trace of the first packets at the first
    /// SNR point.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    trace_packets: u64,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    link: LinkArgs,
    /// Per-user rate values; the search grid is their Cartesian power.
    #[arg(long, default_value = "0.25:0.25:8")]
    grid: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Op {
    /// Pr(log(1 + P S) < x) for n + m exponential terms.
    CdfRtd,
    /// Pr(sum of n + m log(1 + P g) terms < x).
    CdfInr,
    /// Coordinated success probability of the second user.
    Phi,
    /// Per-packet and per-slot event probabilities of two users.
    Events,
    /// Outage and throughput per user.
    Summary,
    /// Diversity order with `donors` early decoders.
    Diversity,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long, value_enum)]
    op: Op,
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Second-band terms for the CDFs, round limit otherwise.
    #[arg(long, default_value_t = 0)]
    m: u32,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0])]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0])]
    rates: Vec<f64>,
    /// Linear transmit power.
    #[arg(long, conflicts_with = "snr_db")]
    power: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    x: f64,
    #[arg(long, default_value = "inr")]
    scheme: String,
    #[arg(long, default_value = "coord")]
    policy: String,
    #[arg(long, default_value_t = 1)]
    donors: u32,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output for runs without their own `out`; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("coharq: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::FitWindow(_) | Error::Range(_) => 3,
        _ => 1,
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Run(a) => {
            let preset: Preset = a.preset.parse()?;
            let overrides = PresetOverrides {
                trials: a.trials,
                seed: a.seed,
                snr_db: a.snr_db.as_deref().map(parse_axis).transpose()?,
                rate_values: a.grid.as_deref().map(parse_axis).transpose()?,
                max_rounds: a.m,
                lambda2: a.lambda2,
            };
            emit(&run_preset(preset, &overrides)?, a.out.as_deref())
        }
        Command::Sweep(a) => {
            let exp = a.link.experiment(None)?;
            let mut rows = exp.execute()?;
            if let Some(decades) = a.fit_slope {
                let config = exp.protocol()?;
                let policy = exp.policy()?;
                let s = sweep(&config, policy, &exp.snr_axis()?, exp.trials, exp.seed)?;
                let slope = fit_slope_for(&s, &Target::MeanOutage, decades)?;
                let mut row = rows.last().cloned().expect("a sweep has rows");
                row.user = None;
                row.metric = "slope".into();
                row.mc_value = Some(slope);
                row.mc_ci95 = None;
                row.analytic_value = None;
                rows.push(row);
            }
            if let Some(path) = &a.trace {
                let config = exp.protocol()?.with_snr_db(exp.snr_axis()?[0]);
                let out = BufWriter::new(File::create(path)?);
                write_trace(&config, exp.policy()?, &SeedTree::new(exp.seed), 0, a.trace_packets, out)?;
            }
            emit(&rows, exp.out.as_deref())
        }
        Command::Optimize(a) => {
            let exp = a.link.experiment(Some(a.grid))?;
            emit(&exp.execute()?, exp.out.as_deref())
        }
        Command::Analytic(a) => analytic(&a),
        Command::Batch(a) => {
            let text = std::fs::read_to_string(&a.config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", a.config.display())))?;
            let runs = ExperimentConfig::parse_batch(&text)?;
            let mut shared = Vec::new();
            for run in &runs {
                log::info!("batch run {}", run.name.as_deref().unwrap_or("(unnamed)"));
                let rows = run.execute()?;
                match &run.out {
                    Some(path) => emit(&rows, Some(path))?,
                    None => shared.extend(rows),
                }
            }
            if !shared.is_empty() || runs.iter().all(|r| r.out.is_none()) {
                emit(&shared, a.out.as_deref())?;
            }
            Ok(())
        }
    }
}

fn emit(rows: &[ResultRow], out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => write_csv(rows, BufWriter::new(File::create(path)?)),
        None => write_csv(rows, io::stdout().lock()),
    }
}

fn analytic(a: &AnalyticArgs) -> Result<(), Error> {
    let power = match (a.power, a.snr_db) {
        (Some(p), _) => p,
        (None, Some(db)) => 10f64.powf(db / 10.0),
        (None, None) => 1.0,
    };
    let pair = |v: &[f64], what: &str| match v {
        [x, y] => Ok((*x, *y)),
        _ => Err(Error::Config(format!("--{what} needs exactly two values"))),
    };
    let lambdas = pair(&a.lambdas, "lambdas")?;
    let mut out = io::stdout().lock();
    match a.op {
        Op::CdfRtd => writeln!(out, "{}", cdf_rtd_sum(a.n, a.m, lambdas, power, a.x)?)?,
        Op::CdfInr => writeln!(out, "{}", cdf_inr_sum(a.n, a.m, lambdas, power, a.x)?)?,
        Op::Phi => {
            let (ra, rb) = pair(&a.rates, "rates")?;
            writeln!(out, "{}", phi_coordinated(ThresholdPair::from_rates(ra, rb, power)?, lambdas))?;
        }
        Op::Events | Op::Summary => {
            let scheme: Scheme = a.scheme.parse()?;
            let rounds = a.m.max(1);
            let profile = FadingProfile::new(a.lambdas.clone(), 1, 1)?;
            let config = ProtocolConfig::new(profile, a.rates.clone(), rounds, power, scheme)?;
            if matches!(a.op, Op::Events) {
                let ev = TwoUserModel::from_config(&config)?.coordinated_events()?;
                writeln!(out, "event,per_packet,per_slot")?;
                for (label, p) in &ev.slot {
                    let packet = ev.packet.get(label).map_or(String::new(), |v| v.to_string());
                    writeln!(out, "{label},{packet},{}", ev.gamma * p)?;
                }
            } else {
                let policy = coharq_core::experiments::parse_policy(&a.policy, config.users())?;
                let s = analytic_summary(&config, policy)?
                    .ok_or_else(|| Error::Config(format!("no closed form for {policy} with these links")))?;
                writeln!(out, "user,outage,throughput")?;
                for (u, (o, t)) in s.outage.iter().zip(&s.user_throughput).enumerate() {
                    writeln!(out, "{},{o},{t}", u + 1)?;
                }
            }
        }
        Op::Diversity => writeln!(out, "{}", diversity_gain(a.donors, a.m.max(1)))?,
    }
    Ok(())
}
