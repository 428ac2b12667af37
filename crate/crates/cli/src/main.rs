use std::path::PathBuf;
use std::process::ExitCode;

use atomcurrent::darkstate::{dark_census, export_dark_state};
use atomcurrent::model::degeneracy_points;
use atomcurrent::{build_basis, Boundary};
use atomcurrent_cli::angle::Angle;
use atomcurrent_cli::config::ModelSpec;
use atomcurrent_cli::filter::{filter_records, read_record, FilterOptions};
use atomcurrent_cli::output::{io_err, write_json, DARK_STATES_SCHEMA};
use atomcurrent_cli::presets::{resolve, PRESETS};
use atomcurrent_cli::runner::{linspace, run_scenario, spectrum_table};
use atomcurrent_cli::CliError;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "atomcurrent", version, about = "Continuous measurement of atomic currents in Bose-Hubbard rings")]
struct Cli {
    /// Master seed, replacing the scenario's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, or output file for single-table commands.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for trajectory ensembles.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Time step replacing every case's `dt`.
    #[arg(long, global = true)]
    dt_override: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Ring,
    Open,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a preset (`presets/fig7a` or `fig7a`).
    Run { scenario: String },
    /// List the shipped presets and the figure each reproduces.
    ListPresets,
    /// Spectrum of H against theta as CSV.
    ScanSpectrum {
        #[arg(long)]
        sites: usize,
        #[arg(long)]
        particles: usize,
        #[arg(long, default_value_t = 0.0)]
        interaction: f64,
        #[arg(long, default_value_t = 1.0)]
        hopping: f64,
        #[arg(long, default_value_t = 361)]
        points: usize,
        #[arg(long, value_enum, default_value_t = BoundaryArg::Ring)]
        boundary: BoundaryArg,
    },
    /// Dark-state census of one link with Fock amplitudes, as JSON.
    Darkstate {
        #[arg(long)]
        sites: usize,
        #[arg(long)]
        particles: usize,
        #[arg(long, default_value_t = 1)]
        link: usize,
        /// Flux such as `pi/3`; every degeneracy point when absent.
        #[arg(long)]
        theta: Option<String>,
    },
    /// Window integrals, SNR and back-action spectrum from trajectory CSVs.
    Filter {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// Window length T.
        #[arg(long)]
        window: f64,
        #[arg(long, default_value_t = 0)]
        channel: usize,
        /// Demodulation frequency; boxcar when absent.
        #[arg(long)]
        demod: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        #[arg(long, requires = "spectrum_to")]
        spectrum_from: Option<f64>,
        #[arg(long, requires = "spectrum_from")]
        spectrum_to: Option<f64>,
        /// Back-action spectrum at zero frequency, used when not estimated.
        #[arg(long)]
        s_eta0: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Run { scenario } => {
            let mut s = resolve(&scenario)?;
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            if let Some(dt) = cli.dt_override {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(CliError::Config(format!("--dt-override: must be positive, got {dt}")));
                }
                s.override_dt(dt);
            }
            s.validate()?;
            let out = cli.out.unwrap_or_else(|| PathBuf::from("out"));
            let report = run_scenario(&s, &out)?;
            println!("{} -> {} (config {})", s.name, report.dir.display(), &report.config_hash[..16]);
            for c in &report.cases {
                println!("  {} [{}]: {} files", c.name, c.kind.name(), c.files.len());
            }
            Ok(())
        }
        Command::ListPresets => {
            for (name, _) in PRESETS {
                let s = resolve(name)?;
                let cases: Vec<String> = s.cases.iter().map(|c| format!("{}:{}", c.name, c.kind.name())).collect();
                println!("{name}\t{}\t{name}/\t{}", s.figure, cases.join(", "));
            }
            Ok(())
        }
        Command::ScanSpectrum {
            sites,
            particles,
            interaction,
            hopping,
            points,
            boundary,
        } => {
            if points < 2 {
                return Err(CliError::Config("--points: need at least 2".into()));
            }
            let m = ModelSpec {
                sites,
                particles,
                boundary: match boundary {
                    BoundaryArg::Ring => Boundary::Ring,
                    BoundaryArg::Open => Boundary::Open,
                },
                hopping,
                theta: Angle(0.0),
                interaction,
            };
            let table = spectrum_table(&m, &linspace(0.0, std::f64::consts::TAU, points))?;
            let out = cli.out.unwrap_or_else(|| PathBuf::from("spectrum.csv"));
            table.write(&out)?;
            println!("{} rows -> {}", table.rows.len(), out.display());
            Ok(())
        }
        Command::Darkstate {
            sites,
            particles,
            link,
            theta,
        } => {
            let thetas: Vec<f64> = match theta {
                Some(t) => vec![t.parse::<Angle>().map_err(|e| CliError::Config(format!("--theta: {e}")))?.value()],
                None => degeneracy_points(sites)?.iter().map(|d| d.theta).collect(),
            };
            let basis = build_basis(sites, particles)?;
            let mut points = Vec::new();
            for th in thetas {
                let states = dark_census(sites, particles, th, link)?
                    .iter()
                    .map(|spec| export_dark_state(&basis, spec))
                    .collect::<Result<Vec<_>, _>>()?;
                points.push(json!({ "theta": th, "count": states.len(), "states": states }));
            }
            let doc = json!({
                "schema": DARK_STATES_SCHEMA,
                "sites": sites,
                "particles": particles,
                "link": link,
                "points": points,
            });
            match cli.out {
                Some(p) => write_json(&p, &doc),
                None => {
                    println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
                    Ok(())
                }
            }
        }
        Command::Filter {
            records,
            window,
            channel,
            demod,
            start,
            spectrum_from,
            spectrum_to,
            s_eta0,
        } => {
            let recs = records.iter().map(|p| read_record(p)).collect::<Result<Vec<_>, _>>()?;
            let opt = FilterOptions {
                window,
                channel,
                demod,
                start,
                spectrum_range: spectrum_from.zip(spectrum_to),
                s_eta0,
            };
            let res = filter_records(&recs, &opt)?;
            let dir = cli.out.unwrap_or_else(|| PathBuf::from("filter"));
            std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
            res.stats.write(&dir.join("stats.csv"))?;
            if let Some(s) = &res.spectrum {
                s.write(&dir.join("spectrum.csv"))?;
            }
            println!(
                "{} windows, S_eta[0] = {} -> {}",
                res.stats.rows.len(),
                res.s_eta0,
                dir.display()
            );
            Ok(())
        }
    }
}
