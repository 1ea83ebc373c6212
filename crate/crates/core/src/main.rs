use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use switchstab::direct_method::{contingency_rng, ScreeningOptions};
use switchstab::dynamics::{integrate, DynamicState, SwingModel, Trajectory};
use switchstab::energy::total_energy;
use switchstab::equilibria::{compute_post_switching_sep, uep_inventory};
use switchstab::network::{BusId, SwitchingEvent};
use switchstab::powerflow::PowerFlowOptions;
use switchstab::report::{read_case, read_contingencies, run, Method, OutputFormat, RunConfig};
use switchstab::Study;

#[derive(Parser)]
#[command(name = "switchstab", version, about = "Transient stability screening of switching events")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Screen a list of switching events.
    Screen(ScreenArgs),
    /// Export one trajectory with energies as CSV.
    Trajectory(TrajectoryArgs),
    /// Dump the UEP inventory of one post-switching network as JSON.
    Ueps(UepArgs),
}

#[derive(Copy, Clone, ValueEnum)]
enum MethodArg {
    Proposed,
    ClosestUep,
    Tds,
    All,
}

#[derive(Copy, Clone, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
    Json,
}

#[derive(Args)]
struct CaseArgs {
    #[arg(long)]
    case: PathBuf,
    /// Override the active demand at every load bus, MW.
    #[arg(long)]
    load_p_mw: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pf_tol: f64,
    #[arg(long, default_value_t = 30)]
    pf_max_iter: usize,
}

impl CaseArgs {
    fn power_flow(&self) -> PowerFlowOptions {
        PowerFlowOptions {
            tolerance: self.pf_tol,
            max_iterations: self.pf_max_iter,
        }
    }

    fn study(&self) -> Result<Study> {
        let case = read_case(&self.case, self.load_p_mw)?;
        Study::new(case, &self.power_flow()).context("pre-switching operating point")
    }
}

#[derive(Args)]
struct NumericArgs {
    /// Sustained-fault step, s.
    #[arg(long, default_value_t = 1e-3)]
    dt_fault: f64,
    #[arg(long, default_value_t = 3.0)]
    t_max_fault: f64,
    /// Time-domain step, s.
    #[arg(long, default_value_t = 0.005)]
    dt: f64,
    #[arg(long, default_value_t = 10.0)]
    t_horizon: f64,
    /// Uniform D/M for time-domain simulation.
    #[arg(long, default_value_t = 0.05)]
    damping_ratio: f64,
    #[arg(long, default_value_t = 100)]
    uep_budget: usize,
    #[arg(long, default_value_t = 1e-4)]
    boundary_eps: f64,
    #[arg(long, default_value_t = 30.0)]
    boundary_horizon: f64,
    #[arg(long, default_value_t = 1.0)]
    boundary_damping: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl NumericArgs {
    fn screening(&self, tds_fallback: bool) -> ScreeningOptions {
        let mut o = ScreeningOptions {
            fault_dt: self.dt_fault,
            fault_t_max: self.t_max_fault,
            tds_fallback,
            seed: self.seed,
            ..ScreeningOptions::default()
        };
        o.tds.dt = self.dt;
        o.tds.horizon = self.t_horizon;
        o.tds.damping_ratio = self.damping_ratio;
        o.boundary.eps = self.boundary_eps;
        o.boundary.horizon = self.boundary_horizon;
        o.boundary.damping = self.boundary_damping;
        o.closest.budget = self.uep_budget;
        o.closest.boundary = o.boundary;
        o
    }
}

#[derive(Args)]
struct ScreenArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long)]
    contingencies: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::All)]
    method: MethodArg,
    /// Run time-domain simulation when a direct method is inconclusive.
    #[arg(long)]
    tds_fallback: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    out: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    numeric: NumericArgs,
}

#[derive(Args)]
struct EventArgs {
    #[arg(long)]
    contingencies: PathBuf,
    /// 1-based position in the contingency file.
    #[arg(long, default_value_t = 1)]
    index: usize,
}

impl EventArgs {
    fn event(&self) -> Result<SwitchingEvent> {
        let events = read_contingencies(&self.contingencies)?;
        match self.index.checked_sub(1).and_then(|i| events.get(i)) {
            Some(e) => Ok(*e),
            None => bail!(
                "{}: no contingency at position {} ({} listed)",
                self.contingencies.display(),
                self.index,
                events.len()
            ),
        }
    }
}

#[derive(Args)]
struct TrajectoryArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[command(flatten)]
    event: EventArgs,
    /// Sustained fault at this bus of the post-switching network, starting
    /// from its SEP; without it, the post-switching response from the
    /// initial point.
    #[arg(long)]
    fault_bus: Option<u32>,
    #[arg(long, default_value_t = 0.005)]
    dt: f64,
    #[arg(long, default_value_t = 10.0)]
    t_horizon: f64,
    #[arg(long, default_value_t = 0.05)]
    damping_ratio: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct UepArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[command(flatten)]
    event: EventArgs,
    #[command(flatten)]
    numeric: NumericArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn screen(args: ScreenArgs) -> Result<ExitCode> {
    let mut config = RunConfig::new(&args.case.case, &args.contingencies);
    config.method = match args.method {
        MethodArg::Proposed => Method::Proposed,
        MethodArg::ClosestUep => Method::ClosestUep,
        MethodArg::Tds => Method::Tds,
        MethodArg::All => Method::All,
    };
    config.format = match args.out {
        FormatArg::Table => OutputFormat::Table,
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    config.power_flow = args.case.power_flow();
    config.load_p_mw = args.case.load_p_mw;
    config.screening = args.numeric.screening(args.tds_fallback);
    config.output = args.output.clone();
    config.jobs = args.jobs;
    let (report, text) = run(&config)?;
    if args.output.is_none() {
        print!("{text}");
    }
    Ok(ExitCode::from(report.exit_code() as u8))
}

fn trajectory_csv(traj: &Trajectory, energies: Option<Vec<(f64, f64, f64)>>) -> Result<String> {
    let n = traj.states.first().map_or(0, DynamicState::len);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("delta_{i}")));
    header.extend((1..=n).map(|i| format!("omega_{i}")));
    header.extend(["ke", "pe", "v"].map(String::from));
    w.write_record(&header)?;
    for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(x.angles.iter().map(f64::to_string));
        row.extend(x.speeds.iter().map(f64::to_string));
        match &energies {
            Some(e) => row.extend([e[k].0, e[k].1, e[k].2].map(|v| v.to_string())),
            None => row.extend(["", "", ""].map(String::from)),
        }
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn trajectory(args: TrajectoryArgs) -> Result<ExitCode> {
    let study = args.case.study()?;
    let event = args.event.event()?;
    let post = study.post_switching(&event).with_context(|| format!("post-switching network for {event}"))?;
    let sep = compute_post_switching_sep(&study, &post, &Default::default());
    let (traj, machines) = match args.fault_bus {
        Some(bus) => {
            let sep = sep.as_ref().map_err(|e| anyhow::anyhow!("post-switching SEP: {e}"))?;
            let faulted = study.faulted(&post, BusId(bus))?;
            let machines = study.machines.with_damping_ratio(0.0);
            let model = SwingModel::new(&faulted, &machines)?;
            let traj = integrate(&DynamicState::at_rest(sep.angles.clone()), &model, args.t_horizon, args.dt)?;
            (traj, machines)
        }
        None => {
            let machines = study.machines.with_damping_ratio(args.damping_ratio);
            let model = SwingModel::new(&post.reduced, &machines)?;
            let traj = integrate(&study.initial_state(), &model, args.t_horizon, args.dt)?;
            (traj, machines)
        }
    };
    let energies = sep.ok().map(|sep| {
        traj.states
            .iter()
            .map(|x| {
                let e = total_energy(x, &sep.angles, &post.reduced, &machines);
                (e.kinetic, e.potential, e.total)
            })
            .collect()
    });
    emit(&trajectory_csv(&traj, energies)?, args.output.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn ueps(args: UepArgs) -> Result<ExitCode> {
    let study = args.case.study()?;
    let event = args.event.event()?;
    let options = args.numeric.screening(false);
    let post = study.post_switching(&event).with_context(|| format!("post-switching network for {event}"))?;
    let sep = compute_post_switching_sep(&study, &post, &options.equilibrium)
        .map_err(|e| anyhow::anyhow!("post-switching SEP: {e}"))?;
    let mut rng = contingency_rng(options.seed, args.event.index - 1);
    let inventory = uep_inventory(
        &post.reduced,
        &study.machines,
        &sep.angles,
        &mut rng,
        &options.equilibrium,
        &options.closest,
    )?;
    let text = serde_json::to_string_pretty(&serde_json::json!({
        "event": event,
        "sep": sep,
        "inventory": inventory,
    }))? + "\n";
    emit(&text, args.output.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SWITCHSTAB_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Screen(a) => screen(a),
        Command::Trajectory(a) => trajectory(a),
        Command::Ueps(a) => ueps(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
