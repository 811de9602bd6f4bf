//! Ground state, correlation curves and the V₂ sweep, plus their file outputs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::annealer::{anneal, AnnealResult, AnnealSchedule};
use crate::correlations::CorrelationCurve;
use crate::error::{Error, Result};
use crate::expansion::Prescription;
use crate::model::{site_energies, FockConfig, LatticeSpec};
use crate::numeric::derive_seed;

use super::config::ScheduleSettings;
use super::peaks::{find_peaks, PeakReport};

/// Trace and POVM curves of one Fock state with their peak reports.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePair {
    pub trace: CorrelationCurve,
    pub povm: CorrelationCurve,
    pub trace_peaks: PeakReport,
    pub povm_peaks: PeakReport,
}

impl CurvePair {
    pub fn evaluate(k: &FockConfig, u_grid: &[f64], threshold: f64) -> Result<Self> {
        let trace = CorrelationCurve::evaluate(k, Prescription::Trace, u_grid.to_vec())?;
        let povm = CorrelationCurve::evaluate(k, Prescription::Povm, u_grid.to_vec())?;
        let trace_peaks = find_peaks(&trace, threshold, k.sites())?;
        let povm_peaks = find_peaks(&povm, threshold, k.sites())?;
        Ok(Self { trace, povm, trace_peaks, povm_peaks })
    }

    /// Adds `key=value` pairs to both curve headers.
    pub fn tag(&mut self, params: &[(String, String)]) {
        for curve in [&mut self.trace, &mut self.povm] {
            curve.params.extend(params.iter().cloned());
        }
    }

    pub fn write_peaks_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# threshold={} points={}", self.trace_peaks.threshold, self.trace_peaks.grid_points)?;
        writeln!(out, "prescription,kind,u,height")?;
        for (name, report) in [("trace", &self.trace_peaks), ("povm", &self.povm_peaks)] {
            for (kind, peaks) in
                [("main", &report.main_peaks), ("secondary", &report.secondary_peaks), ("sidelobe", &report.sidelobes)]
            {
                for p in peaks {
                    writeln!(out, "{name},{kind},{},{}", p.u, p.height)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure1 {
    pub ground: AnnealResult,
    pub curves: CurvePair,
}

pub fn run_figure1(
    spec: &LatticeSpec,
    atoms: u32,
    sched: &AnnealSchedule,
    u_grid: &[f64],
    threshold: f64,
) -> Result<Figure1> {
    let ground = anneal(spec, atoms, sched)?;
    let mut curves = CurvePair::evaluate(&ground.config, u_grid, threshold)?;
    curves.tag(&[
        ("V2".into(), spec.v2.to_string()),
        ("U".into(), spec.repulsion.to_string()),
        ("seed".into(), sched.seed.to_string()),
    ]);
    Ok(Figure1 { ground, curves })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub v2: f64,
    pub secondary_trace: f64,
    pub secondary_povm: f64,
    pub energy: f64,
    pub seed: u64,
    pub config: Option<FockConfig>,
    /// Set when this row's anneal or analysis failed; the numbers are then NaN.
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(v2: f64, seed: u64, err: Error) -> Self {
        Self {
            v2,
            secondary_trace: f64::NAN,
            secondary_povm: f64::NAN,
            energy: f64::NAN,
            seed,
            config: None,
            error: Some(err.to_string()),
        }
    }
}

/// Anneals and analyses one ground state per V₂, `workers` rows at a time.
/// Row `i` uses seed `derive_seed(base_seed, i)`; rows come back in input order.
#[allow(clippy::too_many_arguments)]
pub fn sweep_v2(
    template: &LatticeSpec,
    v2_list: &[f64],
    atoms: u32,
    settings: &ScheduleSettings,
    u_grid: &[f64],
    threshold: f64,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<SweepRow>> {
    if v2_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("v2_list must be ascending".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        v2_list
            .par_iter()
            .enumerate()
            .map(|(i, &v2)| {
                let seed = derive_seed(base_seed, i as u64);
                sweep_row(template, v2, atoms, settings, u_grid, threshold, seed)
                    .unwrap_or_else(|e| SweepRow::failed(v2, seed, e))
            })
            .collect()
    });
    Ok(rows)
}

fn sweep_row(
    template: &LatticeSpec,
    v2: f64,
    atoms: u32,
    settings: &ScheduleSettings,
    u_grid: &[f64],
    threshold: f64,
    seed: u64,
) -> Result<SweepRow> {
    let spec = LatticeSpec { v2, ..template.clone() };
    spec.validate()?;
    let sched = settings.schedule(&spec, atoms, seed);
    let ground = anneal(&spec, atoms, &sched)?;
    let curves = CurvePair::evaluate(&ground.config, u_grid, threshold)?;
    log::debug!("V2={v2}: E={} k={}", ground.energy, ground.config);
    Ok(SweepRow {
        v2,
        secondary_trace: curves.trace_peaks.secondary_height(),
        secondary_povm: curves.povm_peaks.secondary_height(),
        energy: ground.energy,
        seed,
        config: Some(ground.config),
        error: None,
    })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], params: &[(String, String)], mut out: W) -> Result<()> {
    write!(out, "#")?;
    for (k, v) in params {
        write!(out, " {k}={v}")?;
    }
    writeln!(out)?;
    writeln!(out, "v2,secondary_trace,secondary_povm,energy,seed,status")?;
    for r in rows {
        let status = match &r.error {
            None => "ok".to_string(),
            Some(e) => format!("\"error: {}\"", e.replace('"', "'")),
        };
        writeln!(out, "{},{},{},{},{},{status}", r.v2, r.secondary_trace, r.secondary_povm, r.energy, r.seed)?;
    }
    Ok(())
}

/// Site table of an annealed ground state.
pub fn write_ground_state_csv<W: Write>(spec: &LatticeSpec, ground: &AnnealResult, mut out: W) -> Result<()> {
    writeln!(out, "# N={} M={} energy={}", ground.config.total(), spec.sites, ground.energy)?;
    writeln!(out, "site,occupation,epsilon")?;
    for (j, (k, e)) in ground.config.occupations().iter().zip(site_energies(spec)).enumerate() {
        writeln!(out, "{},{k},{e}", j + 1)?;
    }
    Ok(())
}

/// `key = value` provenance file; contents depend only on the inputs.
pub fn write_manifest(dir: &Path, command: &str, entries: &[(String, String)]) -> Result<PathBuf> {
    let path = dir.join(format!("{command}.manifest"));
    let mut out = BufWriter::new(fs::File::create(&path)?);
    writeln!(out, "tool = {}", env!("CARGO_PKG_NAME"))?;
    writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "command = {command}")?;
    for (k, v) in entries {
        writeln!(out, "{k} = {v}")?;
    }
    out.flush()?;
    Ok(path)
}

/// Creates `path` and hands a buffered writer to `write`.
pub fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write(&mut out)?;
    out.flush()?;
    Ok(())
}
