use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abraham_core::io::write_csv;
use abraham_core::pipeline::{read_soft_photon_csv, run_scenario, soliton_table, Plan, RunReport};
use abraham_core::scenario::Scenario;
use abraham_core::vector::Real3;

#[derive(Parser)]
#[command(name = "abraham", version, about = "Extended charge coupled to the Maxwell field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). The built-in reference scenario if omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    /// Log progress to stderr.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve forward and backward, write trajectories and snapshots.
    Simulate(Common),
    /// Scattered fields z_sc± and the wave-operator convergence series.
    Scatter(Common),
    /// Energy/momentum drift, dt refinement and infrared conservation.
    CheckConservation(Common),
    /// Soft-photon relation residuals, per direction.
    SoftPhoton(Common),
    /// Coherent-state first moments against the classical infrared tails.
    CoherentCheck(Common),
    /// Tabulate the soliton's infrared limits and position-space tail.
    SolitonTable {
        #[command(flatten)]
        common: Common,
        /// Velocity, as `vx,vy,vz`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 0.0, 0.5])]
        v: Vec<f64>,
    },
    /// Position-space radiation tail at the configured directions.
    SpatialTail(Common),
    /// Everything, plus plot data. Spatial tails only if configured.
    Report(Common),
    /// Print the reference scenario.
    Reference,
}

fn load(common: &Common) -> abraham_core::Result<Scenario> {
    match &common.config {
        Some(path) => Scenario::load(path),
        None => Ok(Scenario::reference()),
    }
}

fn print_checks(report: &RunReport) {
    for c in &report.checks {
        println!(
            "[{}] criterion {:>2} {:<40} {:>12.4e}  {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.criterion,
            c.name,
            c.value,
            c.threshold
        );
    }
}

fn print_soft_photon(report: &RunReport, dir: &Path) -> abraham_core::Result<()> {
    let rows = read_soft_photon_csv(&dir.join("soft_photon.csv"))?;
    println!("{:>8} {:>8} {:>8} {:>12} {:>12}", "kx", "ky", "kz", "res_E", "res_B");
    for r in &rows {
        println!("{:>8.4} {:>8.4} {:>8.4} {:>12.4e} {:>12.4e}", r.kx, r.ky, r.kz, r.residual_e, r.residual_b);
    }
    if let Some(sp) = &report.soft_photon {
        println!(
            "relative: E {:.4e} (budget {:.4e})  B {:.4e} (budget {:.4e})",
            sp.electric.relative_residual, sp.electric.budget, sp.magnetic.relative_residual, sp.magnetic.budget
        );
    }
    Ok(())
}

fn run(cli: Cli) -> abraham_core::Result<bool> {
    let (common, plan) = match &cli.command {
        Command::Reference => {
            print!("{}", abraham_core::scenario::REFERENCE_TOML);
            return Ok(true);
        }
        Command::SolitonTable { common, v } => {
            init_log(common.verbose);
            let &[vx, vy, vz] = v.as_slice() else {
                return Err(abraham_core::Error::InvalidParameter(format!("--v needs 3 components, got {}", v.len())));
            };
            let scenario = load(common)?;
            let v = Real3::new(vx, vy, vz);
            let rows = soliton_table(&scenario.model()?, &v, &scenario.grid()?)?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("soliton_table.csv");
            write_csv(&path, rows)?;
            println!("{}", path.display());
            return Ok(true);
        }
        Command::Simulate(c) => (c, Plan { simulate: true, ..Plan::default() }),
        Command::Scatter(c) => (c, Plan { scatter: true, ..Plan::default() }),
        Command::CheckConservation(c) => (c, Plan { conservation: true, ..Plan::default() }),
        Command::SoftPhoton(c) => (c, Plan { soft_photon: true, ..Plan::default() }),
        Command::CoherentCheck(c) => (c, Plan { coherent: true, ..Plan::default() }),
        Command::SpatialTail(c) => (c, Plan { spatial: true, ..Plan::default() }),
        Command::Report(c) => (c, Plan::full()),
    };
    init_log(common.verbose);
    let scenario = load(common)?;
    let plan = Plan {
        spatial: plan.spatial && (matches!(cli.command, Command::SpatialTail(_)) || scenario.observables.spatial.is_some()),
        ..plan
    };
    let report = run_scenario(&scenario, plan, &common.out)?;
    if matches!(cli.command, Command::SoftPhoton(_)) {
        print_soft_photon(&report, &common.out)?;
    }
    print_checks(&report);
    Ok(report.passed())
}

fn init_log(verbose: bool) {
    let level = if verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
