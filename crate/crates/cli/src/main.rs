//! `lagoon`: optimise, replay, check and export tidal lagoon schedules.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lagoon_core::dp::{DpError, DpParams, TieBreak};
use lagoon_core::io::{self, OutputTargets, RunInputs, ScheduleDocument, SeriesTable};
use lagoon_core::milp::{build_milp, check_schedule, export_lp};
use lagoon_core::sim::{self, SimError};
use lagoon_core::storage::{storage_profile, summarize};
use lagoon_core::{LagoonConfig, Objective, PriceSeries, TideSeries, Timestamp};

#[derive(Parser, Debug)]
#[command(
    name = "lagoon",
    version,
    about = "Day-ahead scheduler for an ebb-generating tidal lagoon"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimise a schedule and write schedule.json and series.csv.
    Optimize(OptimizeArgs),
    /// Replay a schedule file with the nonlinear orifice law.
    Simulate(SimulateArgs),
    /// Write the storage profile of a tide.
    Storage(StorageArgs),
    /// Write the mixed-integer model in LP format.
    ExportLp(ExportLpArgs),
    /// Check a schedule file against every row of the mixed-integer model.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct TideArgs {
    /// TOML lagoon configuration; defaults to the Swansea Bay values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tide levels as a `timestamp,value` CSV with one more row than steps.
    #[arg(long, conflicts_with = "synth_tide")]
    tide: Option<PathBuf>,
    /// Sinusoidal tide `mean,amplitude,period_s,phase_rad`.
    #[arg(long, value_name = "MEAN,AMP,PERIOD,PHASE", allow_hyphen_values = true)]
    synth_tide: Option<String>,
    /// Number of steps of a synthetic tide.
    #[arg(long, default_value_t = 48)]
    steps: usize,
}

#[derive(Args, Debug)]
struct PriceArgs {
    /// Price CSV (`timestamp,value`, one row per step) or `flat:<price>`.
    #[arg(long, default_value = "flat:1")]
    prices: String,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::MaxEnergy)]
    objective: ObjectiveArg,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ObjectiveArg {
    MaxEnergy,
    MaxRevenue,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::MaxEnergy => Objective::MaxEnergy,
            ObjectiveArg::MaxRevenue => Objective::MaxRevenue,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum TieBreakArg {
    Fewest,
    Most,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    tide: TideArgs,
    #[command(flatten)]
    prices: PriceArgs,
    /// Level grid resolution, m.
    #[arg(long, default_value_t = 0.01)]
    dz: f64,
    /// Among equally good actions prefer fewer or more turbines.
    #[arg(long, value_enum, default_value_t = TieBreakArg::Fewest)]
    tie_break: TieBreakArg,
    /// Also replay the schedule with this sub-step (s) and add the result to series.csv.
    #[arg(long)]
    substep: Option<f64>,
    /// Also write model.lp.
    #[arg(long)]
    lp: bool,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long, default_value_t = sim::DEFAULT_SUBSTEP_S)]
    substep: f64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct StorageArgs {
    #[command(flatten)]
    tide: TideArgs,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ExportLpArgs {
    #[command(flatten)]
    tide: TideArgs,
    #[command(flatten)]
    prices: PriceArgs,
    /// Output file; defaults to `<out-dir>/model.lp`.
    #[arg(long)]
    lp: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

enum Failure {
    Input(anyhow::Error),
    Infeasible(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn load_config(path: Option<&Path>) -> Result<LagoonConfig> {
    match path {
        Some(p) => {
            LagoonConfig::from_toml_file(p).with_context(|| format!("loading {}", p.display()))
        }
        None => Ok(LagoonConfig::swansea()),
    }
}

fn parse_synth(text: &str) -> Result<[f64; 4]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        bail!("--synth-tide expects mean,amplitude,period,phase; got {text:?}");
    }
    let mut out = [0.0; 4];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p
            .parse()
            .map_err(|_| anyhow!("--synth-tide: {p:?} is not a number"))?;
    }
    Ok(out)
}

fn load_tide(args: &TideArgs, config: &LagoonConfig) -> Result<TideSeries> {
    match (&args.tide, &args.synth_tide) {
        (Some(path), None) => Ok(io::load_tide_csv(path, config.dt_s)?),
        (None, Some(text)) => {
            let [mean, amp, period, phase] = parse_synth(text)?;
            Ok(io::synth_tide(
                mean,
                amp,
                period,
                phase,
                Timestamp::default(),
                config.dt_s,
                args.steps,
            )?)
        }
        _ => bail!("exactly one of --tide and --synth-tide is required"),
    }
}

fn load_prices(text: &str, tide: &TideSeries, config: &LagoonConfig) -> Result<PriceSeries> {
    let prices = match text.strip_prefix("flat:") {
        Some(value) => {
            let c: f64 = value
                .parse()
                .map_err(|_| anyhow!("--prices flat:{value}: not a number"))?;
            if !c.is_finite() {
                bail!("--prices flat:{value}: price must be finite");
            }
            PriceSeries::flat(tide, c)
        }
        None => io::load_price_csv(Path::new(text), config.dt_s)?,
    };
    prices.check_pairing(tide)?;
    Ok(prices)
}

fn optimize(args: OptimizeArgs) -> Result<(), Failure> {
    let config = load_config(args.tide.config.as_deref())?;
    let tide = load_tide(&args.tide, &config)?;
    let prices = load_prices(&args.prices.prices, &tide, &config)?;
    let tie_break = match args.tie_break {
        TieBreakArg::Fewest => TieBreak::FewestTurbines,
        TieBreakArg::Most => TieBreak::MostTurbines,
    };
    let params = DpParams {
        tie_break,
        ..DpParams::with_resolution(args.dz)
    };
    let objective = args.prices.objective.into();
    let result = match lagoon_core::optimize(&config, &tide, &prices, objective, &params) {
        Ok(r) => r,
        Err(DpError::Infeasible { step }) => {
            return Err(Failure::Infeasible(format!(
                "no feasible schedule: stuck at step {step}"
            )))
        }
        Err(e) => return Err(anyhow!(e).into()),
    };
    let sim = match args.substep {
        Some(substep) => Some(
            replay(&config, &tide, &result.schedule.modes, substep)?
                .priced(&prices)
                .map_err(anyhow::Error::from)?,
        ),
        None => None,
    };
    let storage = storage_profile(&config, &tide).map_err(anyhow::Error::from)?;
    let targets = OutputTargets::in_dir(&args.out_dir, args.lp);
    let inputs = RunInputs {
        config: &config,
        tide: &tide,
        prices: &prices,
    };
    let written = io::write_outputs(inputs, &result, sim.as_ref(), Some(&storage), &targets)
        .map_err(anyhow::Error::from)?;
    let totals = summarize(&result.schedule, &prices, &config).map_err(anyhow::Error::from)?;
    println!(
        "{objective}: energy {:.3} MWh, revenue {:.2}, capacity factor {:.4}",
        totals.energy_mwh, totals.revenue, totals.capacity_factor
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn replay(
    config: &LagoonConfig,
    tide: &TideSeries,
    modes: &[lagoon_core::Mode],
    substep: f64,
) -> Result<sim::SimulatedTrajectory, Failure> {
    sim::simulate(config, tide, modes, substep).map_err(|e| match e {
        SimError::HeadOutOfBounds { .. } => Failure::Infeasible(e.to_string()),
        other => Failure::Input(other.into()),
    })
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let doc = ScheduleDocument::read(&args.schedule).map_err(anyhow::Error::from)?;
    let schedule = doc.schedule().map_err(anyhow::Error::from)?;
    let traj = replay(&doc.config, &doc.tide, &doc.modes(), args.substep)?
        .priced(&doc.prices)
        .map_err(anyhow::Error::from)?;
    let report = sim::compare(&schedule, &traj).map_err(anyhow::Error::from)?;
    let table = SeriesTable::build(&doc.tide, &doc.prices, &schedule, Some(&traj), None);
    let series = args.out_dir.join("simulated.csv");
    let deviation = args.out_dir.join("deviation.json");
    io::write_file(&series, &table.to_csv()).map_err(anyhow::Error::from)?;
    let mut json = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    json.push('\n');
    io::write_file(&deviation, &json).map_err(anyhow::Error::from)?;
    println!(
        "simulated energy {:.3} MWh against {:.3} MWh scheduled, deviation {:.2}%",
        report.simulated_energy_mwh,
        report.schedule_energy_mwh,
        100.0 * report.total_energy_deviation_rel
    );
    println!("wrote {}\nwrote {}", series.display(), deviation.display());
    Ok(())
}

fn storage(args: StorageArgs) -> Result<(), Failure> {
    let config = load_config(args.tide.config.as_deref())?;
    let tide = load_tide(&args.tide, &config)?;
    let profile = storage_profile(&config, &tide).map_err(anyhow::Error::from)?;
    let path = args.out_dir.join("storage.csv");
    io::write_file(&path, &io::storage_csv(&tide, &profile)).map_err(anyhow::Error::from)?;
    let peak = profile
        .stored_energy_mwh
        .iter()
        .copied()
        .fold(0.0, f64::max);
    println!(
        "full-basin level {:.3} m, peak storage {:.3} MWh",
        profile.z_max_m, peak
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn export(args: ExportLpArgs) -> Result<(), Failure> {
    let config = load_config(args.tide.config.as_deref())?;
    let tide = load_tide(&args.tide, &config)?;
    let prices = load_prices(&args.prices.prices, &tide, &config)?;
    let model = build_milp(&config, &tide, &prices, args.prices.objective.into())
        .map_err(anyhow::Error::from)?;
    let text = export_lp(&model).map_err(anyhow::Error::from)?;
    let path = args.lp.unwrap_or_else(|| args.out_dir.join("model.lp"));
    io::write_file(&path, &text).map_err(anyhow::Error::from)?;
    println!(
        "{} variables ({} binary), {} rows",
        model.variables.len(),
        model.binary_count(),
        model.constraints.len()
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn check(args: CheckArgs) -> Result<(), Failure> {
    let doc = ScheduleDocument::read(&args.schedule).map_err(anyhow::Error::from)?;
    let schedule = doc.schedule().map_err(anyhow::Error::from)?;
    let model = build_milp(&doc.config, &doc.tide, &doc.prices, doc.objective)
        .map_err(anyhow::Error::from)?;
    let report = check_schedule(&model, &schedule, args.tol).map_err(anyhow::Error::from)?;
    if report.is_feasible() {
        println!(
            "feasible: {} rows within {}",
            model.constraints.len(),
            args.tol
        );
        return Ok(());
    }
    for v in &report.violations {
        let step = v.step.map_or_else(|| "-".to_string(), |s| s.to_string());
        println!("{}\tstep {step}\tresidual {:e}", v.row, v.residual);
    }
    Err(Failure::Infeasible(format!(
        "{} violated rows",
        report.violations.len()
    )))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Optimize(a) => optimize(a),
        Command::Simulate(a) => simulate(a),
        Command::Storage(a) => storage(a),
        Command::ExportLp(a) => export(a),
        Command::Check(a) => check(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(2)
        }
    }
}
