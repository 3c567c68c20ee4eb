use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use aeromec::deployment::{wkd_deploy, WkdConfig};
use aeromec::evaluation::{
    compare_methods, csv_string, linear_grid, monte_carlo_robustness, sweep, DistKind, ErrorDistribution, InstanceSource,
    SweepParam,
};
use aeromec::linkmodel::{platform_energies, total_energy};
use aeromec::orchestrator::{parse_report, report_to_string, served_count, solve, Method, SolveParams, SolveReport};
use aeromec::scenario::{generate_scenario, load_scenario, save_scenario, validate_scenario, GenConfig, Scenario};

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "aeromec", version, about = "Robust UAV and HAP edge computing planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random scenario with the reference parameters.
    Generate {
        #[arg(long, default_value_t = 30)]
        users: usize,
        #[arg(long, default_value_t = 6)]
        uavs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file and list every problem found.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Place UAVs and connect users.
    Deploy {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan deployment, offloading and CPU frequencies.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo check of a plan against sampled channel errors.
    Evaluate {
        #[arg(long)]
        scenario: PathBuf,
        /// A solve report; when omitted the scenario is solved first.
        #[arg(long)]
        solution: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = Dist::Gaussian)]
        dist: Dist,
        /// Probability of the lower atom of the two-point law.
        #[arg(long, default_value_t = 0.5)]
        low_prob: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve over a parameter grid with several seeds per point.
    Sweep {
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
        #[command(flatten)]
        instances: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Output file, or a directory to receive the plot-data table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every method on the same instances.
    Compare {
        #[arg(long, default_value_t = 20)]
        repeats: usize,
        #[command(flatten)]
        instances: InstanceArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Methods to run; all of them when omitted.
        #[arg(long = "method", value_enum)]
        methods: Vec<MethodArg>,
        #[arg(long, default_value_t = 30)]
        agents: usize,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a solve report against its scenario.
    Report {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Bwoa)]
    method: MethodArg,
    #[arg(long, default_value_t = 30)]
    agents: usize,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn params(&self) -> SolveParams {
        SolveParams {
            agents: self.agents,
            iters: self.iters,
            ..SolveParams::with_method(self.method.into(), self.seed)
        }
    }
}

#[derive(Args)]
struct InstanceArgs {
    /// Use this scenario for every seed instead of generating instances.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    users: usize,
    #[arg(long, default_value_t = 6)]
    uavs: usize,
}

impl InstanceArgs {
    fn source(&self) -> Result<InstanceSource> {
        Ok(match &self.scenario {
            Some(p) => InstanceSource::Fixed(load(p)?),
            None => InstanceSource::Generated {
                users: self.users,
                uavs: self.uavs,
                config: GenConfig::default(),
            },
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Bwoa,
    Greedy,
    Sa,
    Exhaustive,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Bwoa => Method::Bwoa,
            MethodArg::Greedy => Method::Greedy,
            MethodArg::Sa => Method::Sa,
            MethodArg::Exhaustive => Method::Exhaustive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Gaussian,
    Uniform,
    TwoPoint,
}

impl From<Dist> for DistKind {
    fn from(d: Dist) -> Self {
        match d {
            Dist::Gaussian => DistKind::Gaussian,
            Dist::Uniform => DistKind::Uniform,
            Dist::TwoPoint => DistKind::TwoPoint,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

fn load(path: &Path) -> Result<Scenario> {
    load_scenario(path).with_context(|| format!("loading {}", path.display()))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Directories receive `<stem>.<ext>`; anything else is used as the file path.
fn table_path(out: Option<&Path>, stem: &str, format: Format) -> Option<PathBuf> {
    out.map(|p| {
        if p.is_dir() {
            p.join(format!("{stem}.{}", format.ext()))
        } else {
            p.to_path_buf()
        }
    })
}

fn status(feasible: bool) -> ExitCode {
    if feasible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INFEASIBLE)
    }
}

#[derive(Serialize)]
struct TaskLine {
    task: usize,
    uav: usize,
    forwarded: bool,
    served: bool,
    frequency: f64,
    t_uplink: f64,
    t_forward: f64,
    t_compute: f64,
    t_total: f64,
    energy: f64,
}

#[derive(Serialize)]
struct ReportCheck {
    digest_matches: bool,
    objective: f64,
    recomputed_objective: f64,
    relative_error: f64,
    feasible: bool,
    served_count: usize,
    tasks: Vec<TaskLine>,
}

fn check_report(report: &SolveReport, scenario: &Scenario) -> Result<ReportCheck> {
    let (uav, hap) = platform_energies(&report.deployment, &report.lambda, &report.frequencies, scenario)?;
    let recomputed = total_energy(&uav, hap);
    let tasks = report
        .ledgers
        .iter()
        .enumerate()
        .map(|(m, l)| TaskLine {
            task: m,
            uav: l.uav,
            forwarded: l.forwarded,
            served: report.served[m],
            frequency: l.frequency,
            t_uplink: l.t_uplink,
            t_forward: l.t_forward,
            t_compute: l.t_uav_compute + l.t_hap_compute,
            t_total: l.t_total,
            energy: l.e_forward + l.e_uav_compute + l.e_hap_compute,
        })
        .collect();
    Ok(ReportCheck {
        digest_matches: report.scenario_digest == scenario.digest(),
        objective: report.objective,
        recomputed_objective: recomputed,
        relative_error: (recomputed - report.objective).abs() / report.objective.abs().max(f64::MIN_POSITIVE),
        feasible: report.feasible,
        served_count: served_count(report, scenario)?,
        tasks,
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate { users, uavs, seed, out } => {
            let s = generate_scenario(users, uavs, seed, &GenConfig::default())?;
            match out {
                Some(p) => save_scenario(&s, &p)?,
                None => emit(&json(&s), None)?,
            }
        }
        Command::Validate { scenario } => {
            let text = fs::read_to_string(&scenario).with_context(|| format!("reading {}", scenario.display()))?;
            let (s, ignored) =
                aeromec::scenario::parse_scenario(&text).with_context(|| format!("parsing {}", scenario.display()))?;
            for key in ignored {
                eprintln!("warning: unknown field '{key}'");
            }
            let problems = validate_scenario(&s);
            if problems.is_empty() {
                println!("ok: {} users, {} UAVs", s.num_users(), s.num_uavs());
            } else {
                for v in &problems {
                    println!("{}: {v}", v.code());
                }
                return Ok(ExitCode::from(EXIT_INVALID));
            }
        }
        Command::Deploy { scenario, seed, out } => {
            let s = load(&scenario)?;
            aeromec::scenario::ensure_valid(&s)?;
            let d = wkd_deploy(&s, &WkdConfig { seed, ..Default::default() })?;
            emit(&json(&d), out.as_deref())?;
        }
        Command::Solve { scenario, solver, out } => {
            let s = load(&scenario)?;
            let report = solve(&s, &solver.params())?;
            emit(&(report_to_string(&report) + "\n"), out.as_deref())?;
            return Ok(status(report.feasible));
        }
        Command::Evaluate {
            scenario,
            solution,
            solver,
            samples,
            dist,
            low_prob,
            format,
            out,
        } => {
            let s = load(&scenario)?;
            let report = match solution {
                Some(p) => parse_report(&fs::read_to_string(&p)?)?,
                None => solve(&s, &solver.params())?,
            };
            let d = ErrorDistribution::with_low_prob(dist.into(), low_prob)?;
            let rob = monte_carlo_robustness(&report, &s, &d, samples, solver.seed)?;
            let text = match format {
                Format::Json => json(&rob),
                Format::Csv => csv_string(&rob.tasks)?,
            };
            emit(&text, out.as_deref())?;
            return Ok(status(report.feasible));
        }
        Command::Sweep {
            param,
            from,
            to,
            step,
            repeats,
            instances,
            solver,
            format,
            out,
        } => {
            let param: SweepParam = param.parse()?;
            let grid = linear_grid(from, to, step)?;
            let res = sweep(&instances.source()?, param, &grid, repeats, &solver.params())?;
            let text = match format {
                Format::Json => json(&res),
                Format::Csv => csv_string(&res.rows)?,
            };
            emit(&text, table_path(out.as_deref(), param.figure_name(), format).as_deref())?;
        }
        Command::Compare {
            repeats,
            instances,
            seed,
            methods,
            agents,
            iters,
            format,
            out,
        } => {
            let methods: Vec<Method> = if methods.is_empty() {
                Method::ALL.to_vec()
            } else {
                methods.into_iter().map(Method::from).collect()
            };
            let seeds: Vec<u64> = (0..repeats as u64).map(|r| seed + r).collect();
            let params = SolveParams {
                agents,
                iters,
                ..SolveParams::with_method(Method::Bwoa, seed)
            };
            let rows = compare_methods(&instances.source()?, &methods, &seeds, &params)?;
            let text = match format {
                Format::Json => json(&rows),
                Format::Csv => csv_string(&rows)?,
            };
            emit(&text, table_path(out.as_deref(), "fig4_compare", format).as_deref())?;
        }
        Command::Report {
            scenario,
            solution,
            format,
            out,
        } => {
            let s = load(&scenario)?;
            let report = parse_report(&fs::read_to_string(&solution)?)?;
            let check = check_report(&report, &s)?;
            if !check.digest_matches {
                eprintln!("warning: report was produced from a different scenario");
            }
            let text = match format {
                Format::Json => json(&check),
                Format::Csv => csv_string(&check.tasks)?,
            };
            emit(&text, out.as_deref())?;
            return Ok(status(report.feasible));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
