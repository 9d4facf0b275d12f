use std::path::PathBuf;
use std::process::ExitCode;

use ajch_cli::config::{self, ExperimentKind};
use ajch_cli::experiment::{
    run_eigen, run_experiment, run_leakage, run_map_check, EigenReport, Table,
};
use ajch_cli::output::{manifest, manifest_path, write_csv, write_manifest};
use ajch_cli::CliError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ajch",
    version,
    about = "Anti-Jaynes-Cummings-Hubbard trapped-ion simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write a CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the sector-resolved spectrum for a config's model.
    Eigen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply every mapping sequence to every tracked basis state.
    MapCheck,
    /// Population estimate outside the 2-polariton sector.
    Leakage {
        #[arg(long)]
        nbar: f64,
        #[arg(long)]
        ions: usize,
        /// Heating rate, quanta per second.
        #[arg(long)]
        heating: f64,
        /// Sequence duration, seconds.
        #[arg(long)]
        duration: f64,
    },
}

fn print_eigen(r: &EigenReport) {
    println!("# g_b/2pi = {} Hz, kappa scale {}", r.g_b_hz, r.kappa_scale);
    for s in &r.sectors {
        println!("sector {} ({} states)", s.total, s.dim());
        for (i, e) in s.energies_hz.iter().enumerate() {
            match &s.analytic_hz {
                Some(a) => println!("  {i:3} {e:>18.9} Hz   analytic {:>18.9} Hz", a[i]),
                None => println!("  {i:3} {e:>18.9} Hz"),
            }
        }
        if let Some(err) = s.max_relative_error(r.g_b_hz) {
            println!("  max relative deviation {err:.3e}");
        }
    }
}

fn leakage_table(r: &ajch_cli::experiment::LeakageReport) -> Table {
    Table {
        columns: [
            "nbar",
            "ions",
            "heating_rate",
            "duration_s",
            "bound",
            "thermal",
        ]
        .map(String::from)
        .to_vec(),
        rows: vec![vec![
            r.nbar,
            r.ions as f64,
            r.heating_rate,
            r.duration,
            r.bound,
            r.thermal,
        ]],
    }
}

fn print_leakage(r: &ajch_cli::experiment::LeakageReport) {
    println!("N*nbar + rate*T           = {:.6}", r.bound);
    println!("N*nbar/(1+nbar) + rate*T  = {:.6}", r.thermal);
}

fn simulate(config: PathBuf, out: PathBuf, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = config::load(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let (table, result) = match cfg.experiment {
        ExperimentKind::Hopping | ExperimentKind::Blockade => {
            let r = run_experiment(&cfg)?;
            (r.table.clone(), Some(r))
        }
        ExperimentKind::Eigen => {
            let r = run_eigen(&cfg)?;
            print_eigen(&r);
            (r.table(), None)
        }
        ExperimentKind::MapCheck => {
            let r = run_map_check(&cfg.params)?;
            for l in r.table_lines() {
                println!("{l}");
            }
            if !r.violations.is_empty() {
                return Err(CliError::Contract(r.violations));
            }
            return Ok(());
        }
        ExperimentKind::Leakage => {
            let nbar = match cfg.initial {
                config::InitialState::Thermal(n) => n,
                _ => 0.0,
            };
            let r = run_leakage(nbar, cfg.n_sites, cfg.noise.heating_rate, cfg.duration())?;
            print_leakage(&r);
            (leakage_table(&r), None)
        }
    };
    write_csv(&out, &table)?;
    write_manifest(
        &manifest_path(&out),
        &manifest(&cfg, result.as_ref(), &table.columns),
    )?;
    eprintln!("wrote {} rows to {}", table.rows.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out, seed } => simulate(config, out, seed),
        Command::Eigen { config, out } => {
            let cfg = config::load(&config)?;
            let r = run_eigen(&cfg)?;
            print_eigen(&r);
            if let Some(out) = out {
                write_csv(&out, &r.table())?;
            }
            Ok(())
        }
        Command::MapCheck => {
            let r = run_map_check(&ajch::ModelParams64::two_ion_reference(3))?;
            for l in &r.listings {
                println!("{l}");
            }
            println!();
            for l in r.table_lines() {
                println!("{l}");
            }
            println!();
            println!(
                "realistic blue-sideband pi on |down,1>: |up,2> population {:.9}",
                r.sideband_transfer
            );
            if r.violations.is_empty() {
                Ok(())
            } else {
                Err(CliError::Contract(r.violations))
            }
        }
        Command::Leakage {
            nbar,
            ions,
            heating,
            duration,
        } => {
            let r = run_leakage(nbar, ions, heating, duration).map_err(|e| match e {
                CliError::Numeric(ajch::Error::Domain(m)) => CliError::Config(vec![m]),
                other => other,
            })?;
            print_leakage(&r);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
