//! The `run`, `diagnose` and `report` subcommands.

use std::cell::RefCell;
use std::path::{Path, PathBuf};
use std::time::Instant;

use euler_lab::monitor::{
    blowup_machinery, BlowupConfig, BoundLedger, Diagnostics, DiagnosticsInfo, RegularitySample, RegularityTrace,
};
use euler_lab::norms::HolderConfig;
use euler_lab::solver::{self, TrajectoryState};
use euler_lab::{initial, Grid3, SpectralField3};
use serde::{Deserialize, Serialize};

use crate::config::{DiagOverrides, InitialCondition, OutputFormat, RunConfig};
use crate::plot::{Chart, Series};
use crate::snapshot::{Snapshot, SnapshotContext};
use crate::{trace_io, CliError};

pub const TRACE_FILE: &str = "trace.csv";
pub const LEDGER_FILE: &str = "ledger.json";
pub const BLOWUP_FILE: &str = "blowup.json";
pub const METADATA_FILE: &str = "metadata.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

pub fn initial_field(cfg: &RunConfig) -> Result<SpectralField3, CliError> {
    let grid = Grid3::new(cfg.n, cfg.box_length)?;
    Ok(match cfg.ic {
        InitialCondition::TaylorGreen => initial::taylor_green(grid),
        InitialCondition::Abc { a, b, c } => initial::abc(grid, a, b, c),
        InitialCondition::RandomBandlimited { seed, band, amplitude } => {
            initial::random_bandlimited(grid, seed, band, amplitude)?
        }
    })
}

pub fn diagnostics_for(cfg: &RunConfig, u0: &SpectralField3) -> Result<Diagnostics, CliError> {
    Ok(Diagnostics::new(
        u0,
        cfg.delta,
        cfg.s,
        cfg.cutoff_l.unwrap_or(cfg.box_length),
        cfg.pair_budget,
        cfg.upsample,
    )?)
}

/// Sample computed from the physical values exactly as a snapshot stores
/// them, so re-diagnosing a snapshot reproduces it.
pub fn sample_via_physical(diag: &Diagnostics, t: f64, values: &[Vec<f64>], grid: Grid3) -> Result<RegularitySample, CliError> {
    let u = SpectralField3::from_real(grid, values.to_vec())?.to_spectral();
    Ok(diag.sample(t, &u)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub config: serde_json::Value,
    pub run: euler_lab::monitor::RunInfo,
    pub diagnostics: DiagnosticsInfo,
    pub samples: usize,
    pub terminated: bool,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerFile {
    pub records: Vec<euler_lab::monitor::BoundRecord>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub trace: RegularityTrace,
    pub ledger: Option<BoundLedger>,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn terminated(&self) -> bool {
        self.trace.run.termination.is_some()
    }
}

fn create_dir(p: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(p).map_err(|e| CliError::Usage(format!("output directory {} is not writable: {e}", p.display())))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| CliError::Usage(format!("json: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Integrate, sample every record and write the configured artifacts.
/// A detected blowup still writes everything up to the last valid record.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let dir = cfg.out_dir.clone();
    create_dir(&dir)?;
    let snap_dir = dir.join(SNAPSHOT_DIR);
    if cfg.snapshot_every > 0 {
        create_dir(&snap_dir)?;
    }
    let u0 = initial_field(cfg)?;
    let grid = *u0.grid();
    let diag = diagnostics_for(cfg, &u0)?;
    let info = diag.info();
    let solver_cfg = cfg.solver();

    let failure: RefCell<Option<CliError>> = RefCell::new(None);
    // Mirrors the solver's trace so snapshots can carry the running integrals.
    let mut shadow = RegularityTrace::new(euler_lab::monitor::RunInfo::new(grid, &solver_cfg));
    let mut record = 0usize;
    let sink = |state: &TrajectoryState| -> euler_lab::Result<RegularitySample> {
        let values = state.u.real_values();
        let sample = sample_via_physical(&diag, state.t, &values, grid).map_err(|e| {
            let msg = e.to_string();
            *failure.borrow_mut() = Some(e);
            euler_lab::Error::Usage(msg)
        })?;
        shadow.accumulate(sample)?;
        let last = shadow.samples.last().copied().unwrap_or_default();
        let due = cfg.snapshot_every > 0 && (record % cfg.snapshot_every == 0 || state.t >= cfg.t_end);
        if due {
            let ctx = SnapshotContext {
                u0_l2: info.u0_l2,
                u0_hs: info.u0_hs,
                delta: info.delta,
                s: info.s,
                cutoff_l: info.cutoff_l,
                pair_budget: info.pair_budget,
                upsample: info.upsample,
                bkm_int: last.bkm_int,
                const_int: last.const_int,
            };
            let snap = Snapshot::new(&grid, state.t, state.step_count, values, ctx);
            let path = snap_dir.join(format!("snap_{record:05}.bin"));
            if let Err(e) = snap.write(&path) {
                let msg = e.to_string();
                *failure.borrow_mut() = Some(e);
                return Err(euler_lab::Error::Usage(msg));
            }
        }
        record += 1;
        Ok(sample)
    };
    let result = solver::run(&u0, &solver_cfg, sink);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mut trace = result?;
    trace.diagnostics = Some(info.clone());

    if cfg.wants(OutputFormat::Csv) {
        trace_io::write_csv(&trace, &dir.join(TRACE_FILE))?;
    }
    let ledger = BoundLedger::build(&trace, info.u0_hs, info.u0_l2);
    if cfg.wants(OutputFormat::Json) {
        let file = match &ledger {
            Ok(l) => LedgerFile { records: l.records.clone(), error: None },
            Err(e) => LedgerFile { records: Vec::new(), error: Some(e.to_string()) },
        };
        write_json(&dir.join(LEDGER_FILE), &file)?;
        if let Some(c_delta) = cfg.c_delta {
            let bcfg =
                BlowupConfig { delta: cfg.delta, c_delta, c_delta_b: cfg.c_delta_b, u0_l2: info.u0_l2, t_star: cfg.t_star };
            match blowup_machinery(&trace, &bcfg) {
                Ok(est) => write_json(&dir.join(BLOWUP_FILE), &est)?,
                Err(e) => write_json(&dir.join(BLOWUP_FILE), &serde_json::json!({ "error": e.to_string() }))?,
            }
        }
    }
    let ledger = ledger.ok();
    if cfg.wants(OutputFormat::Svg) {
        write_plots(&dir, &trace, &info, ledger.as_ref())?;
    }
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(cfg).map_err(|e| CliError::Usage(format!("json: {e}")))?,
        run: trace.run.clone(),
        diagnostics: info,
        samples: trace.len(),
        terminated: trace.run.termination.is_some(),
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&dir.join(METADATA_FILE), &meta)?;
    Ok(RunOutcome { trace, ledger, out_dir: dir })
}

/// Re-evaluate one stored field. Settings default to those recorded with
/// the snapshot.
pub fn cmd_diagnose(path: &Path, overrides: &DiagOverrides) -> Result<RegularitySample, CliError> {
    let snap = Snapshot::read(path)?;
    let u = snap.velocity()?;
    let ctx = snap.header.context;
    let delta = overrides.delta.unwrap_or(ctx.delta);
    let s = overrides.s.unwrap_or(if overrides.delta.is_some() { 2.5 + delta } else { ctx.s });
    let pick = |o: Option<usize>, v: usize, dflt: usize| o.unwrap_or(if v == 0 { dflt } else { v });
    let cutoff_l = overrides.cutoff_l.unwrap_or(if ctx.cutoff_l > 0.0 { ctx.cutoff_l } else { u.grid().box_length() });
    let holder = HolderConfig::new(
        delta.min(1.0),
        cutoff_l,
        pick(overrides.pair_budget, ctx.pair_budget, 10_000),
        pick(overrides.upsample, ctx.upsample, 2),
    )?;
    holder.validate(u.grid())?;
    if !(delta > 0.0) {
        return Err(CliError::Usage(format!("diag.delta must be positive, got {delta}")));
    }
    let diag = Diagnostics { delta, s, holder, u0_l2: ctx.u0_l2, u0_hs: ctx.u0_hs };
    let mut sample = diag.sample(snap.header.t, &u)?;
    sample.bkm_int = ctx.bkm_int;
    sample.const_int = ctx.const_int;
    Ok(sample)
}

/// Re-render the plots of a finished run directory.
pub fn cmd_report(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let samples = trace_io::read_csv(&dir.join(TRACE_FILE))?;
    let meta_path = dir.join(METADATA_FILE);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| CliError::io(&meta_path, e))?;
    let meta: Metadata =
        serde_json::from_str(&text).map_err(|e| CliError::Corrupt(format!("{}: {e}", meta_path.display())))?;
    let mut trace = RegularityTrace::from_samples(samples);
    trace.run = meta.run;
    let ledger = BoundLedger::build(&trace, meta.diagnostics.u0_hs, meta.diagnostics.u0_l2).ok();
    write_plots(dir, &trace, &meta.diagnostics, ledger.as_ref())
}

pub fn write_plots(
    dir: &Path,
    trace: &RegularityTrace,
    info: &DiagnosticsInfo,
    ledger: Option<&BoundLedger>,
) -> Result<Vec<PathBuf>, CliError> {
    let col = |f: fn(&RegularitySample) -> f64| -> Vec<(f64, f64)> { trace.samples.iter().map(|s| (s.t, f(s))).collect() };
    let mut charts = vec![(
        "norms.svg",
        Chart::new("Norm histories", "t", "value")
            .log_y()
            .with(Series::new("|omega|_inf", col(|s| s.omega_linf)))
            .with(Series::new("|omega|_L2", col(|s| s.omega_l2)))
            .with(Series::new("|u|_Hs", col(|s| s.hs)))
            .with(Series::new("|u|_Besov", col(|s| s.besov)))
            .with(Series::new("|Du|_inf", col(|s| s.du_linf)))
            .with(Series::new("Hoelder", col(|s| s.holder))),
    )];
    let e0 = trace.samples.first().map_or(0.0, |s| s.energy);
    charts.push((
        "energy.svg",
        Chart::new("Relative energy change", "t", "(E - E0) / E0").with(Series::new(
            "energy",
            trace.samples.iter().map(|s| (s.t, if e0 > 0.0 { (s.energy - e0) / e0 } else { 0.0 })).collect(),
        )),
    ));
    charts.push(("ell.svg", Chart::new("Length scale", "t", "ell").with(Series::new("ell", col(|s| s.ell)))));

    let mut bounds = Chart::new("H^s norm and fitted bounds", "t", "value").log_y().with(Series::new("|u|_Hs", col(|s| s.hs)));
    if let Some(l) = ledger {
        let hs0 = info.u0_hs;
        let du_int = trace.running_integral(|s| s.du_linf);
        if let Some(r) = l.get("gronwall_hs") {
            let pts = trace.samples.iter().zip(&du_int).map(|(s, i)| (s.t, hs0 * (r.constant * i).exp())).collect();
            bounds = bounds.with(Series::new("Du Gronwall", pts).dashed());
        }
        if let Some(r) = l.get("single_exp") {
            let pts = trace.samples.iter().map(|s| (s.t, hs0 * (r.constant * info.u0_l2 * s.const_int).exp())).collect();
            bounds = bounds.with(Series::new("single exp", pts).dashed());
        }
        if let Some(r) = l.get("double_exp") {
            let pts = trace.samples.iter().map(|s| (s.t, hs0 * (r.constant * s.bkm_int).exp().exp())).collect();
            bounds = bounds.with(Series::new("double exp", pts).dashed());
        }
    }
    charts.push(("bounds.svg", bounds));

    let mut written = Vec::new();
    for (name, chart) in charts {
        let path = dir.join(name);
        std::fs::write(&path, chart.render()).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
