use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use microsize_cli::config::Overrides;
use microsize_cli::study::{self, Study};
use microsize_cli::{report, tables, CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "microsize", version, about = "TCO-optimal powertrain sizing for electric scooters and mopeds")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Print the resolved configuration and planned work, write nothing
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the study's drive cycle and write it as CSV
    Cycle(StudyArgs),
    /// Fit the motor loss coefficients and the battery model
    Fit(StudyArgs),
    /// Sweep motor sizes and select the lowest-TCO design
    Optimize(StudyArgs),
    /// Simulate the selected design on the original models
    Validate(StudyArgs),
    /// Compare finished studies and write tables and plot data
    Report(ReportArgs),
    /// Cycle, fit, optimize, validate and report in one go
    Run(StudyArgs),
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// Study configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory, overriding `output.dir`
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Smallest motor size [W]
    #[arg(long)]
    grid_min_w: Option<f64>,
    /// Largest motor size [W]
    #[arg(long)]
    grid_max_w: Option<f64>,
    /// Motor size step [W]
    #[arg(long)]
    grid_step_w: Option<f64>,
    /// Solver feasibility and gap tolerance
    #[arg(long)]
    tolerance: Option<f64>,
}

impl StudyArgs {
    fn study(&self) -> CliResult<Study> {
        let overrides = Overrides {
            output_dir: self.output_dir.clone(),
            grid_min_w: self.grid_min_w,
            grid_max_w: self.grid_max_w,
            grid_step_w: self.grid_step_w,
            tolerance: self.tolerance,
        };
        Study::resolve(&self.config, &overrides)
    }
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Study artifact directories; the first is the base of every comparison
    #[arg(long = "input", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Where to write the report
    #[arg(long)]
    output_dir: PathBuf,
}

fn print_json(value: &serde_json::Value) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(cli: Cli) -> CliResult<()> {
    let args = match &cli.command {
        Command::Report(r) => {
            if cli.dry_run {
                return print_json(&serde_json::json!({ "inputs": r.inputs, "output_dir": r.output_dir }));
            }
            let out = report::report(&r.inputs, &r.output_dir)?;
            print!("{}", out.markdown);
            log::info!("wrote {} files to {}", out.files.len(), r.output_dir.display());
            return Ok(());
        }
        Command::Cycle(a) | Command::Fit(a) | Command::Optimize(a) | Command::Validate(a) | Command::Run(a) => a,
    };
    let study = args.study()?;
    if cli.dry_run {
        return print_json(&study.plan());
    }
    match cli.command {
        Command::Cycle(_) => {
            let (cycle, path) = study::run_cycle(&study)?;
            print_json(&study::cycle_summary(&cycle))?;
            log::info!("wrote {}", path.display());
        }
        Command::Fit(_) => {
            let cycle = study.cycle()?;
            let models = study::run_fit(&study, &cycle)?;
            let s = models.summary();
            print_json(&serde_json::json!({
                "motor_fit_rmse_norm": s.motor.fit_rmse_norm,
                "motor_excluded_levels": s.motor.excluded_levels.len(),
                "battery_p_oc_rmse_norm": s.battery.fit_rmse_norm,
                "battery_p_i_max_rmse_norm": s.battery.p_i_max_rmse_norm,
            }))?;
        }
        Command::Optimize(_) => {
            let (cycle, _) = study::run_cycle(&study)?;
            let models = study::run_fit(&study, &cycle)?;
            let result = study::run_optimize(&study, &cycle, &models)?;
            log::info!("{}", study::best_line(&study, &result));
            print!("{}", tables::results_markdown(&[tables::ResultsRow::from_design(&study.name, result.best_design())], &study.currency, false));
        }
        Command::Validate(_) => {
            let result = study::load_sweep(&study)?;
            let cycle = study.cycle()?;
            let models = study::fit_models(&study)?;
            let v = study::run_validate(&study, &cycle, &models, &result)?;
            print_json(&serde_json::to_value(&v)?)?;
        }
        Command::Run(_) => {
            let (cycle, _) = study::run_cycle(&study)?;
            let models = study::run_fit(&study, &cycle)?;
            let result = study::run_optimize(&study, &cycle, &models)?;
            log::info!("{}", study::best_line(&study, &result));
            let v = study::run_validate(&study, &cycle, &models, &result)?;
            log::info!("{}: validation gap {:.2}%", study.name, v.table.gap_pct);
            let out = report::report(&[study.output_dir.clone()], &study.output_dir.join("report"))?;
            print!("{}", out.markdown);
        }
        Command::Report(_) => unreachable!("handled above"),
    }
    Ok(())
}

fn fail(err: &CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return fail(&CliError::Config(e.kind().to_string()));
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
