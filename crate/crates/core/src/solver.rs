//! Pseudospectral time integration of the incompressible Euler equations
//! in Leray form, `du/dt = -P[(u·∇)u]`, with classical RK4.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use std::sync::{Arc, Mutex};

use crate::fft::{Fft3, C64};
use crate::field::{real_values_masked, spectra_masked, Space, SpectralField3};
use crate::grid::{Grid3, Wavenumbers};
use crate::monitor::{RegularitySample, RegularityTrace, RunInfo, Termination};
use crate::norms;
use crate::ops;

/// Form of the quadratic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearForm {
    /// `(u·∇)u`.
    Convective,
    /// `ω ∧ u`; differs from the convective form by a gradient.
    Rotational,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStep {
    Fixed(f64),
    /// CFL-limited step, recomputed at the start of each record interval.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: TimeStep,
    /// Safety factor in `(0, 1]` for automatic steps.
    pub cfl_safety: f64,
    pub t_end: f64,
    pub record_interval: f64,
    pub nonlinear_form: NonlinearForm,
    /// Sobolev exponent of the blowup ceiling check.
    pub ceiling_s: f64,
    /// Abort once `‖u‖_{H^s}` exceeds this value.
    pub hs_ceiling: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: TimeStep::Fixed(1e-3),
            cfl_safety: 0.5,
            t_end: 1.0,
            record_interval: 0.05,
            nonlinear_form: NonlinearForm::Convective,
            ceiling_s: 3.0,
            hs_ceiling: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::usage(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if !(self.record_interval > 0.0 && self.record_interval.is_finite()) {
            return Err(Error::usage(format!("record_interval must be > 0, got {}", self.record_interval)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::usage(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::usage(format!("dt must be > 0, got {dt}")));
            }
            if self.record_interval < dt * (1.0 - 1e-12) {
                return Err(Error::usage(format!(
                    "record_interval {} is shorter than dt {dt}",
                    self.record_interval
                )));
            }
        }
        if let Some(c) = self.hs_ceiling {
            if !(c > 0.0) {
                return Err(Error::usage(format!("hs_ceiling must be > 0, got {c}")));
            }
        }
        Ok(())
    }
}

/// Solver state handed to the per-record callback.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub t: f64,
    pub u: SpectralField3,
    pub step_count: u64,
}

/// Precomputed tables for repeated right-hand-side evaluations on a grid.
#[derive(Debug)]
pub struct EulerOperator {
    grid: Grid3,
    keep: Vec<bool>,
    k: Vec<f64>,
    form: NonlinearForm,
    fft: Arc<Fft3>,
    // Six n^3 complex work buffers, reused across calls.
    scratch: Mutex<Vec<Vec<C64>>>,
    // RK4 accumulator, stage and slope buffers.
    stages: Mutex<Vec<Vec<C64>>>,
}

const I: C64 = C64 { re: 0.0, im: 1.0 };

impl Clone for EulerOperator {
    fn clone(&self) -> Self {
        Self::new(self.grid, self.form)
    }
}

/// Spectral inputs of the physical-space product.
#[derive(Debug, Clone, Copy)]
enum Source {
    /// `u_c`.
    Velocity(usize),
    /// `∂_i u_c`.
    Gradient(usize, usize),
    /// `ω_c`.
    Vorticity(usize),
}

const CONVECTIVE_SOURCES: [Source; 12] = {
    use Source::*;
    [
        Velocity(0),
        Velocity(1),
        Velocity(2),
        Gradient(0, 0),
        Gradient(0, 1),
        Gradient(0, 2),
        Gradient(1, 0),
        Gradient(1, 1),
        Gradient(1, 2),
        Gradient(2, 0),
        Gradient(2, 1),
        Gradient(2, 2),
    ]
};

const ROTATIONAL_SOURCES: [Source; 6] = {
    use Source::*;
    [Velocity(0), Velocity(1), Velocity(2), Vorticity(0), Vorticity(1), Vorticity(2)]
};

impl EulerOperator {
    pub fn new(grid: Grid3, form: NonlinearForm) -> Self {
        let n = grid.n();
        let keep = (0..n).map(|i| ops::in_dealias_band(grid.mode(i), n)).collect();
        Self {
            grid,
            keep,
            k: grid.wavenumbers(),
            form,
            fft: Fft3::get(n),
            scratch: Mutex::new(Vec::new()),
            stages: Mutex::new(Vec::new()),
        }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    /// `-P[(u·∇)u]` (or `-P[ω ∧ u]`), dealiased. `u` must be dealiased.
    pub fn rhs(&self, u: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        let mut out = vec![vec![C64::default(); self.grid.len()]; 3];
        self.rhs_into(u, &mut out)?;
        Ok(out)
    }

    /// [`EulerOperator::rhs`] written into `out`.
    pub fn rhs_into(&self, u: &[Vec<C64>], out: &mut [Vec<C64>]) -> Result<()> {
        let n = self.grid.n();
        let len = self.grid.len();
        let mut guard = self.scratch.lock().expect("solver scratch poisoned");
        if guard.len() != 6 || guard[0].len() != len {
            *guard = vec![vec![C64::default(); len]; 6];
        }
        let bufs = &mut guard[..];
        // Pair p lands in bufs[p]: field 2p in the real part, 2p + 1 in the
        // imaginary part. The product overwrites bufs[0] with N_0 + i N_1
        // and bufs[1] with N_2.
        let sources: &[Source] = match self.form {
            NonlinearForm::Convective => &CONVECTIVE_SOURCES,
            NonlinearForm::Rotational => &ROTATIONAL_SOURCES,
        };
        for (pair, buf) in bufs.iter_mut().enumerate().take(sources.len() / 2) {
            self.load_pair(u, sources[2 * pair], sources[2 * pair + 1], buf);
        }
        let (head, tail) = bufs.split_at_mut(2);
        let (b0, b1) = head.split_at_mut(1);
        let (acc01, acc2) = (&mut b0[0], &mut b1[0]);
        let mut finite = true;
        match self.form {
            NonlinearForm::Convective => {
                let (b2, b3, b4, b5) = (&tail[0], &tail[1], &tail[2], &tail[3]);
                for p in 0..len {
                    let (u0, u1, u2) = (acc01[p].re, acc01[p].im, acc2[p].re);
                    // Row i of the gradient: [∂_i u_0, ∂_i u_1, ∂_i u_2].
                    let g0 = [acc2[p].im, b2[p].re, b2[p].im];
                    let g1 = [b3[p].re, b3[p].im, b4[p].re];
                    let g2 = [b4[p].im, b5[p].re, b5[p].im];
                    let nl = [
                        u0 * g0[0] + u1 * g1[0] + u2 * g2[0],
                        u0 * g0[1] + u1 * g1[1] + u2 * g2[1],
                        u0 * g0[2] + u1 * g1[2] + u2 * g2[2],
                    ];
                    finite &= nl.iter().all(|v| v.is_finite());
                    acc01[p] = C64::new(nl[0], nl[1]);
                    acc2[p] = C64::new(nl[2], 0.0);
                }
            }
            NonlinearForm::Rotational => {
                let b2 = &tail[0];
                for p in 0..len {
                    let u = [acc01[p].re, acc01[p].im, acc2[p].re];
                    let w = [acc2[p].im, b2[p].re, b2[p].im];
                    let nl = [w[1] * u[2] - w[2] * u[1], w[2] * u[0] - w[0] * u[2], w[0] * u[1] - w[1] * u[0]];
                    finite &= nl.iter().all(|v| v.is_finite());
                    acc01[p] = C64::new(nl[0], nl[1]);
                    acc2[p] = C64::new(nl[2], 0.0);
                }
            }
        }
        if !finite {
            return Err(Error::BlowupDetected { t: f64::NAN, reason: "non-finite nonlinear term".into() });
        }
        self.fft.forward_pruned_unscaled(acc01, &self.keep);
        self.fft.forward_pruned_unscaled(acc2, &self.keep);
        let scale = 1.0 / len as f64;

        // Split the packed transform, then apply -P.
        let neg = |i: usize| if i == 0 { 0 } else { n - i };
        let (o0, rest) = out.split_at_mut(1);
        let (o1, o2) = rest.split_at_mut(1);
        let (o0, o1, o2) = (&mut o0[0], &mut o1[0], &mut o2[0]);
        let mut idx = 0;
        for iz in 0..n {
            for iy in 0..n {
                let row = n * (neg(iy) + n * neg(iz));
                let live_row = self.keep[iy] && self.keep[iz];
                for ix in 0..n {
                    if !(live_row && self.keep[ix]) || idx == 0 {
                        o0[idx] = C64::default();
                        o1[idx] = C64::default();
                        o2[idx] = C64::default();
                        idx += 1;
                        continue;
                    }
                    let m = row + neg(ix);
                    let (a, am) = (acc01[idx], acc01[m].conj());
                    let (b, bm) = (acc2[idx], acc2[m].conj());
                    let v = [(a + am) * (0.5 * scale), (a - am) * C64::new(0.0, -0.5 * scale), (b + bm) * (0.5 * scale)];
                    let k = [self.k[ix], self.k[iy], self.k[iz]];
                    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                    let dot = (v[0] * k[0] + v[1] * k[1] + v[2] * k[2]) / k2;
                    o0[idx] = k[0] * dot - v[0];
                    o1[idx] = k[1] * dot - v[1];
                    o2[idx] = k[2] * dot - v[2];
                    idx += 1;
                }
            }
        }
        Ok(())
    }

    /// Pack the spectra of `a` and `b` into `buf` as `â + i b̂` and
    /// transform to physical space.
    fn load_pair(&self, u: &[Vec<C64>], a: Source, b: Source, buf: &mut [C64]) {
        let n = self.grid.n();
        let coef = |s: Source, idx: usize, k: [f64; 3]| -> C64 {
            match s {
                Source::Velocity(c) => u[c][idx],
                Source::Gradient(i, c) => I * k[i] * u[c][idx],
                Source::Vorticity(c) => {
                    let (p, q) = ((c + 1) % 3, (c + 2) % 3);
                    I * (k[p] * u[q][idx] - k[q] * u[p][idx])
                }
            }
        };
        for (r, row) in buf.chunks_mut(n).enumerate() {
            let (iy, iz) = (r % n, r / n);
            if !(self.keep[iy] && self.keep[iz]) {
                row.fill(C64::default());
                continue;
            }
            for (ix, v) in row.iter_mut().enumerate() {
                *v = if self.keep[ix] {
                    let idx = r * n + ix;
                    let k = [self.k[ix], self.k[iy], self.k[iz]];
                    coef(a, idx, k) + I * coef(b, idx, k)
                } else {
                    C64::default()
                };
            }
        }
        self.fft.inverse_pruned(buf, &self.keep);
    }

    /// One classical RK4 step followed by re-projection.
    pub fn step(&self, u: &[Vec<C64>], dt: f64) -> Result<Vec<Vec<C64>>> {
        let mut out = u.to_vec();
        self.step_in_place(&mut out, dt)?;
        Ok(out)
    }

    /// [`EulerOperator::step`] overwriting `u`. On error `u` is unchanged.
    pub fn step_in_place(&self, u: &mut [Vec<C64>], dt: f64) -> Result<()> {
        let len = self.grid.len();
        let mut guard = self.stages.lock().expect("solver scratch poisoned");
        if guard.len() != 9 || guard[0].len() != len {
            *guard = vec![vec![C64::default(); len]; 9];
        }
        let (acc, rest) = guard.split_at_mut(3);
        let (stage, k) = rest.split_at_mut(3);
        for c in 0..3 {
            acc[c].copy_from_slice(&u[c]);
            stage[c].copy_from_slice(&u[c]);
        }
        for (s, (w, a)) in [(1.0 / 6.0, 0.5), (1.0 / 3.0, 0.5), (1.0 / 3.0, 1.0), (1.0 / 6.0, 0.0)].into_iter().enumerate() {
            self.rhs_into(stage, k)?;
            for c in 0..3 {
                if s < 3 {
                    for (((x, y), u0), kv) in acc[c].iter_mut().zip(stage[c].iter_mut()).zip(&u[c]).zip(&k[c]) {
                        *x += kv * (w * dt);
                        *y = u0 + kv * (a * dt);
                    }
                } else {
                    for (x, kv) in acc[c].iter_mut().zip(&k[c]) {
                        *x += kv * (w * dt);
                    }
                }
            }
        }
        self.project(acc);
        for c in 0..3 {
            std::mem::swap(&mut u[c], &mut acc[c]);
        }
        Ok(())
    }

    /// Leray projection restricted to the dealiasing band, mean removed.
    fn project(&self, v: &mut [Vec<C64>]) {
        let n = self.grid.n();
        let (a, rest) = v.split_at_mut(1);
        let (b, c) = rest.split_at_mut(1);
        let (vx, vy, vz) = (&mut a[0], &mut b[0], &mut c[0]);
        let mut idx = 0;
        for iz in 0..n {
            for iy in 0..n {
                let live_row = self.keep[iy] && self.keep[iz];
                for ix in 0..n {
                    if !(live_row && self.keep[ix]) || idx == 0 {
                        vx[idx] = C64::default();
                        vy[idx] = C64::default();
                        vz[idx] = C64::default();
                    } else {
                        let k = [self.k[ix], self.k[iy], self.k[iz]];
                        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                        let dot = (vx[idx] * k[0] + vy[idx] * k[1] + vz[idx] * k[2]) / k2;
                        vx[idx] -= k[0] * dot;
                        vy[idx] -= k[1] * dot;
                        vz[idx] -= k[2] * dot;
                    }
                    idx += 1;
                }
            }
        }
    }
}

/// `-P[(u·∇)u]`, dealiased.
pub fn euler_rhs(u: &SpectralField3) -> Result<SpectralField3> {
    euler_rhs_with(u, NonlinearForm::Convective)
}

pub fn euler_rhs_with(u: &SpectralField3, form: NonlinearForm) -> Result<SpectralField3> {
    u.require_space(Space::Spectral, "euler_rhs")?;
    u.require_vector("euler_rhs")?;
    let op = EulerOperator::new(*u.grid(), form);
    let u = ops::dealias(u)?;
    SpectralField3::from_components(*u.grid(), Space::Spectral, op.rhs(u.components())?)
}

pub fn step_rk4(state: &TrajectoryState, dt: f64) -> Result<TrajectoryState> {
    step_rk4_with(state, dt, &EulerOperator::new(*state.u.grid(), NonlinearForm::Convective))
}

pub fn step_rk4_with(state: &TrajectoryState, dt: f64, op: &EulerOperator) -> Result<TrajectoryState> {
    if !(dt > 0.0) {
        return Err(Error::usage(format!("dt must be > 0, got {dt}")));
    }
    state.u.require_space(Space::Spectral, "step_rk4")?;
    let t = state.t + dt;
    let comps = op.step(state.u.components(), dt).map_err(|e| with_time(e, t))?;
    Ok(TrajectoryState {
        t,
        u: SpectralField3::from_components(*op.grid(), Space::Spectral, comps)?,
        step_count: state.step_count + 1,
    })
}

fn with_time(e: Error, t: f64) -> Error {
    match e {
        Error::BlowupDetected { reason, .. } => Error::BlowupDetected { t, reason },
        other => other,
    }
}

/// `safety · Δx / ‖u‖_∞`, or `fallback` when `u = 0`.
pub fn cfl_dt(u: &SpectralField3, cfl_safety: f64, fallback: f64) -> Result<f64> {
    let umax = norms::linf_norm(u, 1)?;
    if umax == 0.0 {
        return Ok(fallback);
    }
    Ok(cfl_safety * u.grid().dx() / umax)
}

/// Pressure `p = -Δ⁻¹ ∇·((u·∇)u)`, zero mean.
pub fn pressure_recover(u: &SpectralField3) -> Result<SpectralField3> {
    let n_hat = convective_term(u)?;
    let grid = *u.grid();
    let wn = Wavenumbers::new(&grid);
    let mut p = SpectralField3::zeros(grid, 1, Space::Spectral);
    let dst = p.component_mut(0);
    let (a, b, c) = (n_hat.component(0), n_hat.component(1), n_hat.component(2));
    wn.for_each(|idx, k, nyq| {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if !nyq && k2 > 0.0 {
            // Δp = -∇·N  =>  -|k|² p̂ = -i k·N̂.
            dst[idx] = I * (k[0] * a[idx] + k[1] * b[idx] + k[2] * c[idx]) / k2;
        }
    });
    Ok(p)
}

/// Dealiased `(u·∇)u` without projection.
pub fn convective_term(u: &SpectralField3) -> Result<SpectralField3> {
    u.require_space(Space::Spectral, "convective_term")?;
    u.require_vector("convective_term")?;
    let grid = *u.grid();
    let u = ops::dealias(u)?;
    let mut comps = u.components().to_vec();
    for i in 0..3 {
        for j in 0..3 {
            let single = SpectralField3::from_components(grid, Space::Spectral, vec![u.component(j).to_vec()])?;
            comps.push(ops::derivative(&single, i)?.into_components().remove(0));
        }
    }
    let refs: Vec<&[C64]> = comps.iter().map(Vec::as_slice).collect();
    let v = real_values_masked(&refs, grid.n(), None);
    let nl: Vec<Vec<f64>> = (0..3)
        .map(|j| (0..v[0].len()).map(|p| v[0][p] * v[3 + j][p] + v[1][p] * v[6 + j][p] + v[2][p] * v[9 + j][p]).collect())
        .collect();
    let refs: Vec<&[f64]> = nl.iter().map(Vec::as_slice).collect();
    let mut out = SpectralField3::from_components(grid, Space::Spectral, spectra_masked(&refs, grid.n(), None))?;
    ops::dealias_in_place(&mut out);
    Ok(out)
}

/// `∫ u·ω dx`.
pub fn helicity(u: &SpectralField3) -> Result<f64> {
    let w = ops::curl(u)?;
    let vol = u.grid().volume();
    let mut acc = 0.0;
    for c in 0..3 {
        for (a, b) in u.component(c).iter().zip(w.component(c)) {
            acc += (a * b.conj()).re;
        }
    }
    Ok(acc * vol)
}

/// `‖u‖²_{L²}`.
pub fn energy(u: &SpectralField3) -> f64 {
    u.l2_norm_squared()
}

/// Largest shell amplitude near the dealiasing cutoff relative to the
/// largest shell amplitude overall (integer-radius shells). Small values
/// indicate a resolved spectrum.
pub fn spectral_tail_ratio(u: &SpectralField3) -> f64 {
    let grid = *u.grid();
    let n = grid.n();
    let mut bins = vec![0.0f64; n + 1];
    for idx in 0..grid.len() {
        let (x, y, z) = grid.coords(idx);
        let m = [grid.mode(x), grid.mode(y), grid.mode(z)];
        let r = (((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64).sqrt().round() as usize).min(n);
        bins[r] += u.components().iter().map(|c| c[idx].norm_sqr()).sum::<f64>();
    }
    let peak = bins.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let cutoff = (n / 3).saturating_sub(1);
    (bins[cutoff..].iter().cloned().fold(0.0, f64::max) / peak).sqrt()
}

/// Tail ratio below which a spectrum counts as resolved.
pub const RESOLVED_TAIL: f64 = 1e-6;

/// Largest `|û(k)|` outside the dealiasing band relative to the largest overall.
fn out_of_band(u: &SpectralField3) -> f64 {
    let mask = ops::dealias_mask(u.grid());
    let mut outside: f64 = 0.0;
    for c in u.components() {
        for (v, &keep) in c.iter().zip(&mask) {
            if !keep {
                outside = outside.max(v.norm());
            }
        }
    }
    let scale = u.max_abs();
    if scale == 0.0 {
        0.0
    } else {
        outside / scale
    }
}

fn check_initial(u0: &SpectralField3) -> Result<()> {
    u0.require_space(Space::Spectral, "run")?;
    u0.require_vector("run")?;
    let scale = u0.max_abs();
    if ops::divergence_defect(u0)? > 1e-10 {
        return Err(Error::usage("initial velocity is not divergence-free"));
    }
    let mean = (0..3).map(|c| u0.component(c)[0].norm()).fold(0.0, f64::max);
    if scale > 0.0 && mean > 1e-12 * scale {
        return Err(Error::usage("initial velocity has a nonzero mean"));
    }
    if out_of_band(u0) > 1e-12 {
        return Err(Error::usage("initial velocity is not dealiased"));
    }
    Ok(())
}

/// Integrate from `u0` to `cfg.t_end`, calling `sink` at time 0, at every
/// multiple of the record interval and at `t_end`. Steps inside each
/// record interval are uniform and land exactly on the record time.
///
/// Blowup (non-finite values or the `H^s` ceiling) ends the run early; the
/// returned trace then carries a termination record and holds only samples
/// up to the last valid record.
pub fn run(
    u0: &SpectralField3,
    cfg: &SolverConfig,
    mut sink: impl FnMut(&TrajectoryState) -> Result<RegularitySample>,
) -> Result<RegularityTrace> {
    cfg.validate()?;
    check_initial(u0)?;
    let grid = *u0.grid();
    let op = EulerOperator::new(grid, cfg.nonlinear_form);
    let mut trace = RegularityTrace::new(RunInfo::new(grid, cfg));
    let mut state = TrajectoryState { t: 0.0, u: u0.clone(), step_count: 0 };
    let mut record_times = Vec::new();
    let mut r = 1u64;
    loop {
        let t = r as f64 * cfg.record_interval;
        if t > cfg.t_end * (1.0 + 1e-12) {
            break;
        }
        record_times.push(t.min(cfg.t_end));
        r += 1;
    }
    if record_times.last().map_or(cfg.t_end > 0.0, |&t| t < cfg.t_end) {
        record_times.push(cfg.t_end);
    }

    let mut tail = spectral_tail_ratio(u0);
    trace.accumulate(sink(&state)?)?;
    'outer: for &t_next in &record_times {
        let span = t_next - state.t;
        let dt = match cfg.dt {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Auto => cfl_dt(&state.u, cfg.cfl_safety, cfg.record_interval)?,
        };
        let steps = ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
        let h = span / steps as f64;
        let t0 = state.t;
        for i in 1..=steps {
            let t = if i == steps { t_next } else { t0 + i as f64 * h };
            match op.step_in_place(state.u.components_mut(), h) {
                Ok(()) => {
                    if let Some(reason) = blowup_reason(&state.u, cfg)? {
                        trace.run.termination = Some(Termination { t_last_valid: state.t, t_detected: t, reason });
                        break 'outer;
                    }
                    state.t = t;
                    state.step_count += 1;
                }
                Err(Error::BlowupDetected { reason, .. }) => {
                    trace.run.termination = Some(Termination { t_last_valid: state.t, t_detected: t, reason });
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
        }
        trace.run.dt_last = h;
        tail = tail.max(spectral_tail_ratio(&state.u));
        let sample = sink(&state)?;
        if sample.to_row().iter().any(|v| !v.is_finite()) {
            let t_last_valid = trace.samples.last().map_or(0.0, |s| s.t);
            let reason = "non-finite diagnostics".to_string();
            trace.run.termination = Some(Termination { t_last_valid, t_detected: state.t, reason });
            break;
        }
        trace.accumulate(sample)?;
    }
    trace.run.steps = state.step_count;
    trace.run.max_tail_ratio = tail;
    trace.run.resolved = tail < RESOLVED_TAIL;
    trace.run.unreliable = !trace.run.resolved || trace.run.termination.is_some();
    Ok(trace)
}

fn blowup_reason(u: &SpectralField3, cfg: &SolverConfig) -> Result<Option<String>> {
    if u.components().iter().flatten().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Ok(Some("non-finite velocity".into()));
    }
    if !u.l2_norm_squared().is_finite() {
        return Ok(Some("energy overflow".into()));
    }
    if let Some(ceiling) = cfg.hs_ceiling {
        let hs = norms::sobolev_norm(u, cfg.ceiling_s)?;
        if !(hs <= ceiling) {
            return Ok(Some(format!("H^{} norm {hs:e} exceeds ceiling {ceiling:e}", cfg.ceiling_s)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::taylor_green;

    #[test]
    fn rhs_vanishes_for_zero_and_shear_mode() {
        let g = Grid3::periodic(16).unwrap();
        let zero = SpectralField3::zeros(g, 3, Space::Spectral);
        assert_eq!(euler_rhs(&zero).unwrap().max_abs(), 0.0);
        // (u·∇)u = u_y ∂_y u = 0 for u = (0, sin x, 0).
        let shear = SpectralField3::from_fn(g, |p| [0.0, p[0].sin(), 0.0]).to_spectral();
        assert!(euler_rhs(&shear).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn convective_and_rotational_forms_agree() {
        let g = Grid3::periodic(16).unwrap();
        let u = crate::initial::random_bandlimited(g, 3, (1.0, 4.0), 1.0).unwrap();
        let a = euler_rhs_with(&u, NonlinearForm::Convective).unwrap();
        let b = euler_rhs_with(&u, NonlinearForm::Rotational).unwrap();
        assert!(a.max_relative_difference(&b).unwrap() < 1e-12);
        assert!(ops::divergence_defect(&a).unwrap() < 1e-12);
    }

    #[test]
    fn cfl_formula_and_fallback() {
        let g = Grid3::periodic(64).unwrap();
        let u = SpectralField3::from_fn(g, |p| [0.0, 0.0, p[0].cos()]).to_spectral();
        assert!((cfl_dt(&u, 0.5, 0.1).unwrap() - 0.5 * g.dx()).abs() < 1e-15);
        assert_eq!(cfl_dt(&SpectralField3::zeros(g, 3, Space::Spectral), 0.5, 0.1).unwrap(), 0.1);
    }

    #[test]
    fn taylor_green_pressure() {
        let g = Grid3::periodic(32).unwrap();
        let p = pressure_recover(&taylor_green(g)).unwrap().to_physical();
        let expect = SpectralField3::from_fn(g, |x| {
            [((2.0 * x[0]).cos() + (2.0 * x[1]).cos()) * ((2.0 * x[2]).cos() + 2.0) / 16.0]
        });
        let mean = expect.component(0).iter().map(|v| v.re).sum::<f64>() / g.len() as f64;
        let err = p
            .component(0)
            .iter()
            .zip(expect.component(0))
            .map(|(a, b)| (a.re - (b.re - mean)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn zero_state_only_advances_time() {
        let g = Grid3::periodic(8).unwrap();
        let s = TrajectoryState { t: 0.5, u: SpectralField3::zeros(g, 3, Space::Spectral), step_count: 0 };
        let next = step_rk4(&s, 0.1).unwrap();
        assert_eq!(next.u, s.u);
        assert!((next.t - 0.6).abs() < 1e-15);
        assert_eq!(next.step_count, 1);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.record_interval = 1e-4;
        assert!(c.validate().is_err());
        c = SolverConfig { dt: TimeStep::Fixed(-1.0), ..SolverConfig::default() };
        assert!(c.validate().is_err());
        c = SolverConfig { cfl_safety: 1.5, ..SolverConfig::default() };
        assert!(c.validate().is_err());
    }
}
