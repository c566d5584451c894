//! Regularity diagnostics along a trajectory: per-record samples, running
//! integrals, fitted constants for the growth bounds, and the discrete-time
//! blowup-rate machinery.

use serde::{Deserialize, Serialize};

use crate::du::{symmetric_eigenvalues, spectral_norm3};
use crate::error::{Error, Result};
use crate::fft::{Fft3, C64};
use crate::field::SpectralField3;
use crate::grid::Grid3;
use crate::norms::{self, HolderConfig};
use crate::ops;
use crate::solver::{NonlinearForm, SolverConfig, TimeStep};

/// One time slice of diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegularitySample {
    pub t: f64,
    /// `‖u‖²_{L²}`.
    pub energy: f64,
    pub omega_linf: f64,
    pub omega_l2: f64,
    /// `‖ω‖_{C^δ}` (sampled).
    pub holder: f64,
    /// `ℓ_δ`.
    pub ell: f64,
    /// `‖u‖_{H^s}`.
    pub hs: f64,
    /// `‖u‖_{B^s_{2,2}}` (inhomogeneous).
    pub besov: f64,
    pub du_linf: f64,
    pub dup_linf: f64,
    pub dum_linf: f64,
    /// `∫₀ᵗ ‖ω‖_∞`.
    pub bkm_int: f64,
    /// `∫₀ᵗ ℓ_δ^{-5/2}`.
    pub const_int: f64,
}

/// Column names in storage order.
pub const COLUMNS: [&str; 13] = [
    "t", "energy", "omega_linf", "omega_l2", "holder", "ell", "hs", "besov", "du_linf", "dup_linf", "dum_linf",
    "bkm_int", "const_int",
];

impl RegularitySample {
    pub fn to_row(&self) -> [f64; 13] {
        [
            self.t,
            self.energy,
            self.omega_linf,
            self.omega_l2,
            self.holder,
            self.ell,
            self.hs,
            self.besov,
            self.du_linf,
            self.dup_linf,
            self.dum_linf,
            self.bkm_int,
            self.const_int,
        ]
    }

    pub fn from_row(r: &[f64; 13]) -> Self {
        Self {
            t: r[0],
            energy: r[1],
            omega_linf: r[2],
            omega_l2: r[3],
            holder: r[4],
            ell: r[5],
            hs: r[6],
            besov: r[7],
            du_linf: r[8],
            dup_linf: r[9],
            dum_linf: r[10],
            bkm_int: r[11],
            const_int: r[12],
        }
    }

    /// `ℓ_δ^{-5/2}`.
    pub fn ell_weight(&self) -> f64 {
        self.ell.powf(-2.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    pub t_last_valid: f64,
    pub t_detected: f64,
    pub reason: String,
}

/// Solver-side run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub n: usize,
    pub box_length: f64,
    pub dt: TimeStep,
    pub nonlinear_form: NonlinearForm,
    pub t_end: f64,
    pub record_interval: f64,
    pub steps: u64,
    /// Step used in the last completed record interval.
    pub dt_last: f64,
    /// Worst spectral tail ratio over the records.
    pub max_tail_ratio: f64,
    pub resolved: bool,
    /// Unresolved or terminated early.
    pub unreliable: bool,
    pub termination: Option<Termination>,
}

impl RunInfo {
    pub fn new(grid: Grid3, cfg: &SolverConfig) -> Self {
        Self {
            n: grid.n(),
            box_length: grid.box_length(),
            dt: cfg.dt,
            nonlinear_form: cfg.nonlinear_form,
            t_end: cfg.t_end,
            record_interval: cfg.record_interval,
            steps: 0,
            dt_last: match cfg.dt {
                TimeStep::Fixed(dt) => dt,
                TimeStep::Auto => 0.0,
            },
            max_tail_ratio: 0.0,
            resolved: true,
            unreliable: false,
            termination: None,
        }
    }
}

/// Time-ordered samples plus run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityTrace {
    pub samples: Vec<RegularitySample>,
    pub run: RunInfo,
    pub diagnostics: Option<DiagnosticsInfo>,
}

impl RegularityTrace {
    pub fn new(run: RunInfo) -> Self {
        Self { samples: Vec::new(), run, diagnostics: None }
    }

    /// Trace over the given samples as stored (integrals untouched).
    pub fn from_samples(samples: Vec<RegularitySample>) -> Self {
        let grid = Grid3::periodic(8).expect("valid grid");
        let mut run = RunInfo::new(grid, &SolverConfig::default());
        run.n = 0;
        Self { samples, run, diagnostics: None }
    }

    /// Append `sample`, filling its running integrals by the trapezoid rule.
    pub fn accumulate(&mut self, mut sample: RegularitySample) -> Result<()> {
        match self.samples.last() {
            None => {
                sample.bkm_int = 0.0;
                sample.const_int = 0.0;
            }
            Some(prev) => {
                if !(sample.t > prev.t) {
                    return Err(Error::usage(format!("sample time {} does not follow {}", sample.t, prev.t)));
                }
                let h = sample.t - prev.t;
                sample.bkm_int = prev.bkm_int + 0.5 * h * (prev.omega_linf + sample.omega_linf);
                sample.const_int = prev.const_int + 0.5 * h * (prev.ell_weight() + sample.ell_weight());
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Result<&RegularitySample> {
        self.samples.first().ok_or_else(|| Error::usage("empty trace"))
    }

    /// Every `stride`-th sample starting from the first, with integrals
    /// recomputed on the coarser cadence.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::usage("stride must be >= 1"));
        }
        let mut out = Self { samples: Vec::new(), run: self.run.clone(), diagnostics: self.diagnostics.clone() };
        for s in self.samples.iter().step_by(stride) {
            out.accumulate(*s)?;
        }
        Ok(out)
    }

    /// Trapezoid integral of a column-valued function from the first sample.
    pub fn running_integral(&self, f: impl Fn(&RegularitySample) -> f64) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.samples.len());
        for (i, s) in self.samples.iter().enumerate() {
            if i > 0 {
                let p = &self.samples[i - 1];
                acc += 0.5 * (s.t - p.t) * (f(p) + f(s));
            }
            out.push(acc);
        }
        out
    }
}

/// Diagnostic parameters recorded with a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsInfo {
    pub delta: f64,
    /// Exponent actually used in the Hölder quotient, `min(δ, 1)`.
    pub delta_effective: f64,
    pub s: f64,
    pub cutoff_l: f64,
    pub pair_budget: usize,
    pub upsample: usize,
    pub u0_l2: f64,
    pub u0_hs: f64,
}

/// Computes [`RegularitySample`]s from velocity fields.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub delta: f64,
    pub s: f64,
    pub holder: HolderConfig,
    pub u0_l2: f64,
    pub u0_hs: f64,
}

/// Fields the per-point pass produces on the refined grid.
struct PointwiseMaxima {
    omega: Vec<Vec<f64>>,
    omega_linf: f64,
    du_linf: f64,
    dup_linf: f64,
    dum_linf: f64,
}

impl Diagnostics {
    /// `s = 5/2 + δ` unless `s` is given.
    pub fn new(
        u0: &SpectralField3,
        delta: f64,
        s: Option<f64>,
        cutoff_l: f64,
        pair_budget: usize,
        upsample: usize,
    ) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::usage(format!("δ must be > 0, got {delta}")));
        }
        let holder = HolderConfig::new(delta.min(1.0), cutoff_l, pair_budget, upsample)?;
        holder.validate(u0.grid())?;
        let s = s.unwrap_or(2.5 + delta);
        let u0 = u0.to_spectral();
        Ok(Self { delta, s, holder, u0_l2: u0.l2_norm(), u0_hs: norms::sobolev_norm(&u0, s)? })
    }

    pub fn info(&self) -> DiagnosticsInfo {
        DiagnosticsInfo {
            delta: self.delta,
            delta_effective: self.holder.delta,
            s: self.s,
            cutoff_l: self.holder.cutoff_l,
            pair_budget: self.holder.pair_budget,
            upsample: self.holder.upsample,
            u0_l2: self.u0_l2,
            u0_hs: self.u0_hs,
        }
    }

    /// Same configuration with another `δ` (and `s = 5/2 + δ`).
    pub fn with_delta(&self, delta: f64, u0: &SpectralField3) -> Result<Self> {
        Self::new(u0, delta, None, self.holder.cutoff_l, self.holder.pair_budget, self.holder.upsample)
    }

    /// Sample at time `t`; the integrals are left at zero for
    /// [`RegularityTrace::accumulate`] to fill.
    pub fn sample(&self, t: f64, u: &SpectralField3) -> Result<RegularitySample> {
        let u = u.to_spectral();
        u.require_vector("sample")?;
        let pm = pointwise_maxima(&u, self.holder.upsample)?;
        self.assemble(t, &u, &pm)
    }

    /// One sample per entry of `sweep`, sharing the expensive tensor pass.
    pub fn sample_sweep(&self, t: f64, u: &SpectralField3, sweep: &[Diagnostics]) -> Result<Vec<RegularitySample>> {
        let u = u.to_spectral();
        u.require_vector("sample")?;
        let pm = pointwise_maxima(&u, self.holder.upsample)?;
        sweep
            .iter()
            .map(|d| {
                if d.holder.upsample != self.holder.upsample {
                    return Err(Error::usage("sweep entries must share the upsample factor"));
                }
                d.assemble(t, &u, &pm)
            })
            .collect()
    }

    fn assemble(&self, t: f64, u: &SpectralField3, pm: &PointwiseMaxima) -> Result<RegularitySample> {
        let fine = u.grid().refined(self.holder.upsample)?;
        let holder = norms::holder_from_values(&pm.omega, &fine, &self.holder);
        let ell = norms::length_scale_from_seminorm(holder, self.u0_l2, self.holder.delta, self.holder.cutoff_l)?;
        Ok(RegularitySample {
            t,
            energy: u.l2_norm_squared(),
            omega_linf: pm.omega_linf,
            omega_l2: ops::curl(u)?.l2_norm(),
            holder,
            ell,
            hs: norms::sobolev_norm(u, self.s)?,
            besov: norms::besov_norm(u, self.s, false)?,
            du_linf: pm.du_linf,
            dup_linf: pm.dup_linf,
            dum_linf: pm.dum_linf,
            bkm_int: 0.0,
            const_int: 0.0,
        })
    }
}

/// Du on the refined grid, and from it ω and the pointwise operator norms
/// of Du, Du⁺ and Du⁻.
fn pointwise_maxima(u: &SpectralField3, upsample: usize) -> Result<PointwiseMaxima> {
    let grid = *u.grid();
    let d = crate::du::du_by_differentiation(u)?;
    let fine = grid.refined(upsample)?;
    let n = grid.n();
    let m = fine.n();
    let keep: Vec<bool> = (0..m).map(|i| fine.mode(i).unsigned_abs() as usize <= n / 2).collect();
    let fft = Fft3::get(m);
    let npts = fine.len();
    // Entry e = 3i + j sits in bufs[e / 2], real part for even e.
    let mut bufs: Vec<Vec<C64>> = Vec::with_capacity(5);
    for pair in 0..5 {
        let mut buf = vec![C64::default(); npts];
        let (a, b) = (2 * pair, 2 * pair + 1);
        let (ea, eb) = (d.entry(a / 3, a % 3), (b < 9).then(|| d.entry(b / 3, b % 3)));
        ops::scatter_refined(&grid, upsample, &mut buf, |idx| {
            let x = ea.component(0)[idx];
            match eb {
                Some(e) => x + C64::new(0.0, 1.0) * e.component(0)[idx],
                None => x,
            }
        });
        if upsample > 1 {
            fft.inverse_pruned(&mut buf, &keep);
        } else {
            fft.inverse(&mut buf);
        }
        bufs.push(buf);
    }
    drop(d);
    let mut omega = vec![vec![0.0; npts]; 3];
    let (mut w2max, mut du, mut dup) = (0.0f64, 0.0f64, 0.0f64);
    for p in 0..npts {
        let e = |k: usize| if k % 2 == 0 { bufs[k / 2][p].re } else { bufs[k / 2][p].im };
        let a = [[e(0), e(1), e(2)], [e(3), e(4), e(5)], [e(6), e(7), e(8)]];
        let w = [a[1][2] - a[2][1], a[2][0] - a[0][2], a[0][1] - a[1][0]];
        omega[0][p] = w[0];
        omega[1][p] = w[1];
        omega[2][p] = w[2];
        w2max = w2max.max(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
        let mut sym = [[0.0; 3]; 3];
        let (mut fro2, mut sym2) = (0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                sym[i][j] = 0.5 * (a[i][j] + a[j][i]);
                fro2 += a[i][j] * a[i][j];
                sym2 += sym[i][j] * sym[i][j];
            }
        }
        // Frobenius norms bound the operator norms, so most points never
        // reach the eigen solves.
        if sym2 > dup * dup {
            let ev = symmetric_eigenvalues(&sym);
            dup = dup.max(ev[0].abs().max(ev[2].abs()));
        }
        if fro2 > du * du {
            du = du.max(spectral_norm3(&a));
        }
    }
    // Du⁻ has axial vector ω/2, so its operator norm is |ω|/2.
    let omega_linf = w2max.sqrt();
    Ok(PointwiseMaxima { omega, omega_linf, du_linf: du, dup_linf: dup, dum_linf: 0.5 * omega_linf })
}

/// Fitted constant of one bound together with where it binds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundFit {
    pub constant: f64,
    /// Time of the sample that determines the constant.
    pub max_slack_time: f64,
    /// Per-sample verdict of the bound evaluated with the fitted constant.
    pub holds: Vec<bool>,
    /// Growth with a vanishing integral: no finite constant exists.
    pub degenerate: bool,
}

impl BoundFit {
    pub fn all_hold(&self) -> bool {
        self.holds.iter().all(|&h| h)
    }
}

const HOLD_TOL: f64 = 1e-9;

fn require_samples(trace: &RegularityTrace, min: usize, op: &str) -> Result<()> {
    if trace.samples.len() < min {
        return Err(Error::usage(format!("{op} needs at least {min} samples, got {}", trace.samples.len())));
    }
    Ok(())
}

/// Generic fit of `log_growth(t) <= C · integral(t)`.
fn fit_ratio(times: &[f64], growth: &[f64], integral: &[f64]) -> BoundFit {
    let mut constant: f64 = 0.0;
    let mut at = times.first().copied().unwrap_or(0.0);
    let mut degenerate = false;
    for i in 0..times.len() {
        let g = growth[i].max(0.0);
        if g == 0.0 {
            continue;
        }
        let c = if integral[i] > 0.0 { g / integral[i] } else { f64::INFINITY };
        if c.is_infinite() {
            degenerate = true;
        }
        if c > constant {
            constant = c;
            at = times[i];
        }
    }
    let holds = (0..times.len())
        .map(|i| {
            let g = growth[i].max(0.0);
            g == 0.0 || g <= constant * integral[i] * (1.0 + HOLD_TOL)
        })
        .collect();
    BoundFit { constant, max_slack_time: at, holds, degenerate }
}

fn check_positive(v: f64, name: &str) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::usage(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Smallest `C` with `hs(t) <= u0_hs · exp(C · u0_l2 · const_int(t))` at
/// every sample.
pub fn check_single_exp(trace: &RegularityTrace, u0_hs: f64, u0_l2: f64) -> Result<BoundFit> {
    require_samples(trace, 2, "check_single_exp")?;
    check_positive(u0_hs, "u0_hs")?;
    check_positive(u0_l2, "u0_l2")?;
    let times: Vec<f64> = trace.samples.iter().map(|s| s.t).collect();
    let growth: Vec<f64> = trace.samples.iter().map(|s| (s.hs / u0_hs).ln()).collect();
    let integral: Vec<f64> = trace.samples.iter().map(|s| u0_l2 * s.const_int).collect();
    Ok(fit_ratio(&times, &growth, &integral))
}

/// Double-exponential fit and the companion vorticity bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleExpFit {
    /// `hs <= u0_hs · exp(exp(C̃ ∫‖ω‖_∞))`.
    pub hs: BoundFit,
    /// `‖ω(t)‖_{L²} <= ‖ω₀‖_{L²} · exp(C ∫‖ω‖_∞)`.
    pub vorticity_l2: BoundFit,
}

pub fn check_double_exp(trace: &RegularityTrace, u0_hs: f64) -> Result<DoubleExpFit> {
    require_samples(trace, 2, "check_double_exp")?;
    check_positive(u0_hs, "u0_hs")?;
    let times: Vec<f64> = trace.samples.iter().map(|s| s.t).collect();
    let bkm: Vec<f64> = trace.samples.iter().map(|s| s.bkm_int).collect();
    // ln ln(hs/u0_hs) is only positive once hs exceeds e·u0_hs.
    let growth: Vec<f64> = trace
        .samples
        .iter()
        .map(|s| {
            let l = (s.hs / u0_hs).ln();
            if l > 1.0 {
                l.ln()
            } else {
                0.0
            }
        })
        .collect();
    let hs = fit_ratio(&times, &growth, &bkm);
    let w0 = trace.samples[0].omega_l2;
    let vort_growth: Vec<f64> = trace
        .samples
        .iter()
        .map(|s| if w0 > 0.0 { (s.omega_l2 / w0).ln() } else if s.omega_l2 > 0.0 { f64::INFINITY } else { 0.0 })
        .collect();
    let vorticity_l2 = fit_ratio(&times, &vort_growth, &bkm);
    Ok(DoubleExpFit { hs, vorticity_l2 })
}

/// `hs <= u0_hs · exp(C ∫‖Du‖_∞)`.
pub fn check_gronwall_hs(trace: &RegularityTrace, u0_hs: f64) -> Result<BoundFit> {
    require_samples(trace, 2, "check_gronwall_hs")?;
    check_positive(u0_hs, "u0_hs")?;
    let times: Vec<f64> = trace.samples.iter().map(|s| s.t).collect();
    let growth: Vec<f64> = trace.samples.iter().map(|s| (s.hs / u0_hs).ln()).collect();
    let integral = trace.running_integral(|s| s.du_linf);
    Ok(fit_ratio(&times, &growth, &integral))
}

/// Per-sample fit of `value(t) <= C · u0_l2 · ℓ_δ(t)^{-5/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleFit {
    pub constant: f64,
    pub max_slack_time: f64,
    /// `value · ℓ^{5/2} / u0_l2` at each sample.
    pub per_sample: Vec<f64>,
    /// Max over min of the positive per-sample constants (1 if fewer than two).
    pub variation: f64,
}

fn scale_fit(trace: &RegularityTrace, u0_l2: f64, value: impl Fn(&RegularitySample) -> f64) -> Result<ScaleFit> {
    require_samples(trace, 1, "scale fit")?;
    check_positive(u0_l2, "u0_l2")?;
    let per_sample: Vec<f64> = trace.samples.iter().map(|s| value(s) * s.ell.powf(2.5) / u0_l2).collect();
    let (mut constant, mut at) = (0.0f64, trace.samples[0].t);
    for (s, &c) in trace.samples.iter().zip(&per_sample) {
        if c > constant {
            constant = c;
            at = s.t;
        }
    }
    let positive: Vec<f64> = per_sample.iter().copied().filter(|&c| c > 0.0).collect();
    let variation = if positive.len() < 2 {
        1.0
    } else {
        positive.iter().cloned().fold(0.0, f64::max) / positive.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    Ok(ScaleFit { constant, max_slack_time: at, per_sample, variation })
}

/// `‖ω‖_∞ <= C · u0_l2 · ℓ_δ^{-5/2}`.
pub fn check_constantin(trace: &RegularityTrace, u0_l2: f64) -> Result<ScaleFit> {
    scale_fit(trace, u0_l2, |s| s.omega_linf)
}

/// `‖Du⁺‖_∞ + ‖Du⁻‖_∞ <= C · u0_l2 · ℓ_δ^{-5/2}`.
pub fn check_corollary_du(trace: &RegularityTrace, u0_l2: f64) -> Result<ScaleFit> {
    scale_fit(trace, u0_l2, |s| s.dup_linf + s.dum_linf)
}

/// Log-log regression of fitted constants against `δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaScaling {
    pub deltas: Vec<f64>,
    pub constants: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Whether `slope ∈ [-1.5, -0.5]`, i.e. `C ~ c/δ` within a factor 3 in the exponent window.
    pub consistent_with_inverse_delta: bool,
    /// `max/min` of `C·δ` over the sweep.
    pub c_delta_spread: f64,
}

pub fn delta_scaling(deltas: &[f64], constants: &[f64]) -> Result<DeltaScaling> {
    if deltas.len() != constants.len() || deltas.len() < 2 {
        return Err(Error::usage("delta sweep needs at least two (δ, C) pairs"));
    }
    if deltas.iter().chain(constants).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::usage("delta sweep values must be positive and finite"));
    }
    let x: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = constants.iter().map(|c| c.ln()).collect();
    let (slope, intercept) = linear_fit(&x, &y);
    let cd: Vec<f64> = deltas.iter().zip(constants).map(|(d, c)| d * c).collect();
    let spread = cd.iter().cloned().fold(0.0, f64::max) / cd.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DeltaScaling {
        deltas: deltas.to_vec(),
        constants: constants.to_vec(),
        slope,
        intercept,
        consistent_with_inverse_delta: (-1.5..=-0.5).contains(&slope),
        c_delta_spread: spread,
    })
}

/// Least-squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Result of the differential-inequality fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovDiffFit {
    pub constant: f64,
    pub max_slack_time: f64,
    /// `[∂_t besov²]₊ / (2 du_linf besov²)` at interior samples.
    pub per_sample: Vec<(f64, f64)>,
}

/// Fit of `½ ∂_t ‖u‖²_{B^s} <= C ‖Du‖_∞ ‖u‖²_{B^s}` with second-order
/// centered differences on the (possibly nonuniform) sample times.
pub fn check_besov_diff_inequality(trace: &RegularityTrace) -> Result<BesovDiffFit> {
    require_samples(trace, 3, "check_besov_diff_inequality")?;
    let s = &trace.samples;
    let mut per_sample = Vec::with_capacity(s.len() - 2);
    let (mut constant, mut at) = (0.0f64, s[1].t);
    for i in 1..s.len() - 1 {
        let (h0, h1) = (s[i].t - s[i - 1].t, s[i + 1].t - s[i].t);
        let (f0, f1, f2) = (s[i - 1].besov.powi(2), s[i].besov.powi(2), s[i + 1].besov.powi(2));
        let deriv = (h0 * h0 * f2 - h1 * h1 * f0 + (h1 * h1 - h0 * h0) * f1) / (h0 * h1 * (h0 + h1));
        let denom = 2.0 * s[i].du_linf * f1;
        let c = if deriv <= 0.0 {
            0.0
        } else if denom > 0.0 {
            deriv / denom
        } else {
            f64::INFINITY
        };
        per_sample.push((s[i].t, c));
        if c > constant {
            constant = c;
            at = s[i].t;
        }
    }
    Ok(BesovDiffFit { constant, max_slack_time: at, per_sample })
}

/// Single- vs double-exponential bound curves with constants calibrated on
/// an early part of the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpComparison {
    pub calibration_end: f64,
    pub c_single: f64,
    pub c_double: f64,
    pub times: Vec<f64>,
    pub single_curve: Vec<f64>,
    pub double_curve: Vec<f64>,
    /// Single-exponential curve at or below the double-exponential one at the last sample.
    pub single_below_double_late: bool,
}

pub fn compare_exp_bounds(
    trace: &RegularityTrace,
    u0_hs: f64,
    u0_l2: f64,
    calibration_fraction: f64,
) -> Result<ExpComparison> {
    if !(calibration_fraction > 0.0 && calibration_fraction <= 1.0) {
        return Err(Error::usage(format!("calibration fraction must lie in (0, 1], got {calibration_fraction}")));
    }
    require_samples(trace, 2, "compare_exp_bounds")?;
    let t0 = trace.samples[0].t;
    let t_last = trace.samples.last().expect("nonempty").t;
    let t_cal = t0 + calibration_fraction * (t_last - t0);
    let early: Vec<RegularitySample> = trace.samples.iter().copied().filter(|s| s.t <= t_cal + 1e-12).collect();
    let early = RegularityTrace::from_samples(if early.len() < 2 { trace.samples[..2].to_vec() } else { early });
    let c_single = check_single_exp(&early, u0_hs, u0_l2)?.constant;
    // Calibrate the double exponential to the same early growth: at least
    // the constant making exp(exp(C̃ B)) reach the single curve at t_cal.
    let last_early = early.samples.last().expect("nonempty");
    let single_cal = (c_single * u0_l2 * last_early.const_int).exp();
    let c_double = if last_early.bkm_int > 0.0 && single_cal.ln() > 1.0 {
        single_cal.ln().ln() / last_early.bkm_int
    } else {
        check_double_exp(&early, u0_hs)?.hs.constant
    };
    let times: Vec<f64> = trace.samples.iter().map(|s| s.t).collect();
    let single_curve: Vec<f64> =
        trace.samples.iter().map(|s| u0_hs * (c_single * u0_l2 * s.const_int).exp()).collect();
    let double_curve: Vec<f64> = trace.samples.iter().map(|s| u0_hs * (c_double * s.bkm_int).exp().exp()).collect();
    let single_below_double_late = single_curve.last() <= double_curve.last();
    Ok(ExpComparison {
        calibration_end: t_cal,
        c_single,
        c_double,
        times,
        single_curve,
        double_curve,
        single_below_double_late,
    })
}

/// One row of the bound ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub id: String,
    pub constant: f64,
    pub max_slack_time: f64,
    pub holds: bool,
}

/// Fitted constants for every tracked bound.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundLedger {
    pub records: Vec<BoundRecord>,
}

impl BoundLedger {
    /// Evaluate every bound on `trace`. Fits that need more samples than
    /// the trace holds are left out.
    pub fn build(trace: &RegularityTrace, u0_hs: f64, u0_l2: f64) -> Result<Self> {
        let mut records = Vec::new();
        let mut push = |id: &str, constant: f64, at: f64, holds: bool| {
            records.push(BoundRecord { id: id.into(), constant, max_slack_time: at, holds });
        };
        if trace.samples.len() >= 2 {
            let g = check_gronwall_hs(trace, u0_hs)?;
            push("gronwall_hs", g.constant, g.max_slack_time, g.all_hold() && !g.degenerate);
            let d = check_double_exp(trace, u0_hs)?;
            push(
                "vorticity_l2",
                d.vorticity_l2.constant,
                d.vorticity_l2.max_slack_time,
                d.vorticity_l2.all_hold() && !d.vorticity_l2.degenerate,
            );
            push("double_exp", d.hs.constant, d.hs.max_slack_time, d.hs.all_hold() && !d.hs.degenerate);
            let s = check_single_exp(trace, u0_hs, u0_l2)?;
            push("single_exp", s.constant, s.max_slack_time, s.all_hold() && !s.degenerate);
        }
        if !trace.samples.is_empty() {
            let c = check_corollary_du(trace, u0_l2)?;
            push("corollary_du", c.constant, c.max_slack_time, c.constant.is_finite());
        }
        if trace.samples.len() >= 3 {
            let b = check_besov_diff_inequality(trace)?;
            push("besov_diff", b.constant, b.max_slack_time, b.constant.is_finite());
        }
        if !trace.samples.is_empty() {
            let c = check_constantin(trace, u0_l2)?;
            push("constantin", c.constant, c.max_slack_time, c.constant.is_finite());
        }
        Ok(Self { records })
    }

    pub fn get(&self, id: &str) -> Option<&BoundRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// `δ̃ = 2δ / (5 + 2δ)`.
pub fn delta_tilde(delta: f64) -> f64 {
    2.0 * delta / (5.0 + 2.0 * delta)
}

/// Inputs of the blowup-rate machinery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupConfig {
    pub delta: f64,
    /// Constant of the time-step recursion.
    pub c_delta: f64,
    /// Constant inside `b_δ`; defaults to `c_delta`.
    pub c_delta_b: Option<f64>,
    pub u0_l2: f64,
    /// Hypothesized blowup time (synthetic validation only).
    pub t_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub delta_tilde: f64,
    pub b_delta: f64,
    pub c_delta: f64,
    pub times: Vec<f64>,
    /// `t_{j+1} - t_j = 1 / (C_δ hs(t_j))`.
    pub steps: Vec<f64>,
    pub hs_at_times: Vec<f64>,
    pub rhos: Vec<f64>,
    pub b_js: Vec<f64>,
    pub rhos_exceed_one: bool,
    /// `hs(t_j) <= ρ_{j-1} hs(t_{j-1})`, for `j >= 1`.
    pub premise: Vec<bool>,
    /// `ρ_j >= exp(ρ_{j-1}^{-δ̃} ln ρ_{j-1})` on samples where the premise holds.
    pub recursion_holds: bool,
    /// `1 + Σ_j 1/(ρ₀⋯ρ_j)`.
    pub product_sum: f64,
    /// `1 + 1/ρ₀ + ⋯ + 1/ρ₀^N`.
    pub geometric_sum: f64,
    pub geometric_dominates: bool,
    /// `b_δ (u0_l2 / hs(t₀))^{δ̃}`.
    pub smallness: f64,
    pub smallness_ok: bool,
    /// `min_j hs(t_j) / hs(t₀)`.
    pub min_ratio: f64,
    pub oscillation_flag: bool,
    pub t_star: Option<f64>,
    /// `(t, 1/(C_δ (T* - t)))` at the trace times.
    pub apriori_curve: Vec<(f64, f64)>,
    /// `(t, K (T* - t)^{-(1+2δ/5)})` with `K` matching `hs` at `t₀`.
    pub rate_curve: Vec<(f64, f64)>,
    pub rate_constant: Option<f64>,
    /// `(C_δ b_δ u0_l2^{δ̃})^{-1/(1-δ̃)}`.
    pub formula_constant: f64,
    pub rate_lower_bound_holds: Option<bool>,
    pub apriori_lower_bound_holds: Option<bool>,
    /// `γ` in `hs ~ (T* - t)^{-γ}` by log-log regression.
    pub fitted_exponent: Option<f64>,
}

/// Piecewise-linear interpolation of `hs` on the trace times.
fn interp_hs(samples: &[RegularitySample], t: f64) -> Option<f64> {
    let last = samples.last()?;
    if t < samples[0].t || t > last.t {
        return None;
    }
    let i = samples.partition_point(|s| s.t <= t);
    if i == 0 {
        return Some(samples[0].hs);
    }
    if i >= samples.len() {
        return Some(last.hs);
    }
    let (a, b) = (&samples[i - 1], &samples[i]);
    let w = (t - a.t) / (b.t - a.t);
    Some(a.hs + w * (b.hs - a.hs))
}

pub fn blowup_machinery(trace: &RegularityTrace, cfg: &BlowupConfig) -> Result<BlowupEstimate> {
    require_samples(trace, 1, "blowup_machinery")?;
    check_positive(cfg.c_delta, "C_delta")?;
    check_positive(cfg.u0_l2, "u0_l2")?;
    if !(cfg.delta > 0.0) {
        return Err(Error::usage(format!("δ must be > 0, got {}", cfg.delta)));
    }
    let samples = &trace.samples;
    if let Some(bad) = samples.iter().find(|s| !(s.hs > 0.0 && s.hs.is_finite())) {
        return Err(Error::usage(format!("hs must be positive, got {} at t = {}", bad.hs, bad.t)));
    }
    let t_last = samples.last().expect("nonempty").t;
    if let Some(ts) = cfg.t_star {
        if !(ts > t_last) {
            return Err(Error::usage(format!("T* = {ts} must exceed the last trace time {t_last}")));
        }
    }
    let dt = delta_tilde(cfg.delta);
    let c_b = cfg.c_delta_b.unwrap_or(cfg.c_delta);
    check_positive(c_b, "C_delta_b")?;
    let b_delta = c_b.powf(1.0 - dt) / dt;
    let c = cfg.c_delta;
    let u0 = cfg.u0_l2;

    let mut times = vec![samples[0].t];
    let mut hs_at = vec![samples[0].hs];
    let mut steps = Vec::new();
    loop {
        let h = *hs_at.last().expect("nonempty");
        let step = 1.0 / (c * h);
        let next = times.last().expect("nonempty") + step;
        match interp_hs(samples, next) {
            Some(hn) if step > 0.0 && next.is_finite() => {
                steps.push(step);
                times.push(next);
                hs_at.push(hn);
            }
            _ => break,
        }
    }
    let b_js: Vec<f64> = hs_at.iter().map(|h| b_delta * (u0 / h).powf(dt) / (c * u0)).collect();
    let rhos: Vec<f64> = hs_at.iter().map(|h| (b_delta * (u0 / h).powf(dt)).exp()).collect();
    let mut premise = Vec::new();
    let mut recursion_holds = true;
    for j in 1..rhos.len() {
        let p = hs_at[j] <= rhos[j - 1] * hs_at[j - 1];
        premise.push(p);
        if p {
            let lower = (rhos[j - 1].powf(-dt) * rhos[j - 1].ln()).exp();
            if rhos[j] < lower * (1.0 - 1e-12) {
                recursion_holds = false;
            }
        }
    }
    let mut product_sum = 1.0;
    let mut prod = 1.0;
    for r in rhos.iter().take(rhos.len().saturating_sub(1)) {
        prod /= r;
        product_sum += prod;
    }
    let nterms = rhos.len();
    let geometric_sum: f64 = (0..nterms).map(|j| rhos[0].powi(-(j as i32))).sum();
    let smallness = b_delta * (u0 / hs_at[0]).powf(dt);
    let min_ratio = hs_at.iter().cloned().fold(f64::INFINITY, f64::min) / hs_at[0];
    let formula_constant = (c * b_delta * u0.powf(dt)).powf(-1.0 / (1.0 - dt));

    let gamma = 1.0 + 2.0 * cfg.delta / 5.0;
    let (mut apriori_curve, mut rate_curve) = (Vec::new(), Vec::new());
    let (mut rate_constant, mut rate_ok, mut apriori_ok, mut fitted) = (None, None, None, None);
    if let Some(ts) = cfg.t_star {
        let k = samples[0].hs * (ts - samples[0].t).powf(gamma);
        rate_constant = Some(k);
        let mut r_ok = true;
        let mut a_ok = true;
        for s in samples {
            let a = 1.0 / (c * (ts - s.t));
            let r = k * (ts - s.t).powf(-gamma);
            apriori_curve.push((s.t, a));
            rate_curve.push((s.t, r));
            r_ok &= r <= s.hs * (1.0 + HOLD_TOL);
            a_ok &= a <= s.hs * (1.0 + HOLD_TOL);
        }
        rate_ok = Some(r_ok);
        apriori_ok = Some(a_ok);
        if samples.len() >= 2 {
            let x: Vec<f64> = samples.iter().map(|s| (ts - s.t).ln()).collect();
            let y: Vec<f64> = samples.iter().map(|s| s.hs.ln()).collect();
            fitted = Some(-linear_fit(&x, &y).0);
        }
    }

    Ok(BlowupEstimate {
        delta_tilde: dt,
        b_delta,
        c_delta: c,
        rhos_exceed_one: rhos.iter().all(|&r| r > 1.0),
        times,
        steps,
        hs_at_times: hs_at,
        rhos,
        b_js,
        premise,
        recursion_holds,
        product_sum,
        geometric_sum,
        geometric_dominates: product_sum <= geometric_sum * (1.0 + 1e-12),
        smallness,
        smallness_ok: smallness < 0.1,
        min_ratio,
        oscillation_flag: min_ratio < 1.0,
        t_star: cfg.t_star,
        apriori_curve,
        rate_curve,
        rate_constant,
        formula_constant,
        rate_lower_bound_holds: rate_ok,
        apriori_lower_bound_holds: apriori_ok,
        fitted_exponent: fitted,
    })
}
