use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tofcorr::annealer::anneal;
use tofcorr::correlations::CorrelationCurve;
use tofcorr::expansion::{DensityProfile, Prescription};
use tofcorr::experiment::runs::{write_file, write_ground_state_csv, write_manifest, write_sweep_csv};
use tofcorr::experiment::{run_figure1, sweep_v2, verify, CurvePair, RunConfig};
use tofcorr::model::FockConfig;
use tofcorr::numeric::derive_seed;
use tofcorr::Error;

#[derive(Parser, Debug)]
#[command(name = "tofcorr", version, about = "Time-of-flight correlations of bosons in a bichromatic lattice")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV outputs and the run manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Points in the u grid.
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Minimum peak height above 1.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Anneal the ground state and print k and E.
    GroundState,
    /// Trace and POVM correlation curves for the configured or annealed k.
    Correlate,
    /// Anneal, then curves and peak reports (defaults N=170, M=130, V2=9.9).
    Figure1,
    /// Secondary-peak heights across the V2 ladder.
    Sweep,
    /// Run the oracle suites.
    Verify {
        /// fast or full; overrides the config file.
        #[arg(long)]
        level: Option<String>,
    },
}

enum Outcome {
    Done,
    VerificationFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(g) = cli.grid_points {
        cfg.grid_points = g;
    }
    if let Some(t) = cli.threshold {
        cfg.threshold = t;
    }
    if let Command::Verify { level: Some(level) } = &cli.command {
        cfg.level = level.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<Option<&Path>, Error> {
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    let cfg = load_config(&cli)?;
    let out = out_dir(&cli)?;
    let grid = CorrelationCurve::default_grid(cfg.u_max(), cfg.grid_points);
    let mut manifest = cfg.entries();
    let stdout = io::stdout();
    let mut stdout = stdout.lock();

    match &cli.command {
        Command::GroundState => {
            let spec = cfg.lattice()?;
            let sched = cfg.anneal.schedule(&spec, cfg.atoms, cfg.seed);
            let ground = anneal(&spec, cfg.atoms, &sched)?;
            writeln!(stdout, "k = {}", ground.config)?;
            writeln!(stdout, "E = {}", ground.energy)?;
            writeln!(stdout, "accepted = {} / {}", ground.accepted_moves, ground.proposed_moves)?;
            if let Some(dir) = out {
                write_file(&dir.join("ground_state.csv"), |w| write_ground_state_csv(&spec, &ground, w))?;
                manifest.push(("energy".into(), ground.energy.to_string()));
                write_manifest(dir, "ground-state", &manifest)?;
            }
        }
        Command::Correlate => {
            let k = match &cfg.occupations {
                Some(occ) => FockConfig::new(occ.clone())?,
                None => {
                    let spec = cfg.lattice()?;
                    anneal(&spec, cfg.atoms, &cfg.anneal.schedule(&spec, cfg.atoms, cfg.seed))?.config
                }
            };
            let curves = CurvePair::evaluate(&k, &grid, cfg.threshold)?;
            match out {
                Some(dir) => {
                    write_curves(dir, "corr", &curves)?;
                    let ctx = cfg.expansion()?;
                    for p in [Prescription::Trace, Prescription::Povm] {
                        let profile = DensityProfile::fock(&k, &ctx, p, cfg.profile_points);
                        write_file(&dir.join(format!("density_{p}.csv")), |w| profile.write_csv(w))?;
                    }
                    manifest.push(("k".into(), k.to_string()));
                    write_manifest(dir, "correlate", &manifest)?;
                    summarize(&mut stdout, &curves)?;
                }
                None => {
                    writeln!(stdout, "u,trace,povm")?;
                    for ((u, t), p) in grid.iter().zip(&curves.trace.values).zip(&curves.povm.values) {
                        writeln!(stdout, "{u},{t},{p}")?;
                    }
                }
            }
        }
        Command::Figure1 => {
            let spec = cfg.lattice()?;
            let sched = cfg.anneal.schedule(&spec, cfg.atoms, cfg.seed);
            let fig = run_figure1(&spec, cfg.atoms, &sched, &grid, cfg.threshold)?;
            writeln!(stdout, "k = {}", fig.ground.config)?;
            writeln!(stdout, "E = {}", fig.ground.energy)?;
            summarize(&mut stdout, &fig.curves)?;
            if let Some(dir) = out {
                write_curves(dir, "figure1", &fig.curves)?;
                manifest.push(("k".into(), fig.ground.config.to_string()));
                manifest.push(("energy".into(), fig.ground.energy.to_string()));
                write_manifest(dir, "figure1", &manifest)?;
            }
        }
        Command::Sweep => {
            let spec = cfg.lattice()?;
            let rows =
                sweep_v2(&spec, &cfg.v2_list, cfg.atoms, &cfg.anneal, &grid, cfg.threshold, cfg.seed, cfg.workers)?;
            let header = vec![
                ("N".to_string(), cfg.atoms.to_string()),
                ("M".into(), cfg.sites.to_string()),
                ("U".into(), cfg.repulsion.to_string()),
                ("kappa_ratio".into(), cfg.kappa_ratio.to_string()),
                ("seed".into(), cfg.seed.to_string()),
                ("u_max".into(), cfg.u_max().to_string()),
                ("points".into(), cfg.grid_points.to_string()),
                ("threshold".into(), cfg.threshold.to_string()),
            ];
            match out {
                Some(dir) => {
                    write_file(&dir.join("sweep.csv"), |w| write_sweep_csv(&rows, &header, w))?;
                    let seeds: Vec<String> =
                        (0..rows.len()).map(|i| derive_seed(cfg.seed, i as u64).to_string()).collect();
                    manifest.push(("row_seeds".into(), seeds.join(",")));
                    write_manifest(dir, "sweep", &manifest)?;
                    for r in &rows {
                        writeln!(
                            stdout,
                            "V2 = {}: secondary trace = {:.4}, povm = {:.4}{}",
                            r.v2,
                            r.secondary_trace,
                            r.secondary_povm,
                            r.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
                        )?;
                    }
                }
                None => write_sweep_csv(&rows, &header, &mut stdout)?,
            }
        }
        Command::Verify { .. } => {
            let report = verify(cfg.level, cfg.seed);
            writeln!(stdout, "{report}")?;
            if let Some(dir) = out {
                fs::write(dir.join("verify.txt"), format!("{report}\n"))?;
                write_manifest(dir, "verify", &manifest)?;
            }
            if !report.passed() {
                return Ok(Outcome::VerificationFailed);
            }
        }
    }
    stdout.flush()?;
    Ok(Outcome::Done)
}

fn write_curves(dir: &Path, stem: &str, curves: &CurvePair) -> Result<(), Error> {
    write_file(&dir.join(format!("{stem}_trace.csv")), |w| curves.trace.write_csv(w))?;
    write_file(&dir.join(format!("{stem}_povm.csv")), |w| curves.povm.write_csv(w))?;
    write_file(&dir.join(format!("{stem}_peaks.csv")), |w| curves.write_peaks_csv(w))
}

fn summarize(out: &mut impl Write, curves: &CurvePair) -> io::Result<()> {
    for (name, report) in [("trace", &curves.trace_peaks), ("povm", &curves.povm_peaks)] {
        writeln!(
            out,
            "{name}: {} main peaks (max height {:.4}), {} secondary (max height {:.4})",
            report.main_peaks.len(),
            report.main_height(),
            report.secondary_peaks.len(),
            report.secondary_height()
        )?;
    }
    Ok(())
}
