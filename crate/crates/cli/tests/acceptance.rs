//! End-to-end acceptance checks. Prints one PASS/FAIL line per check and
//! exits nonzero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use euler_lab::du;
use euler_lab::initial;
use euler_lab::monitor::{self, BlowupConfig, Diagnostics, RegularitySample, RegularityTrace};
use euler_lab::solver::{self, EulerOperator, NonlinearForm, SolverConfig, TimeStep};
use euler_lab::{Grid3, SpectralField3};
use euler_lab_cli::snapshot::Snapshot;
use euler_lab_cli::verify;

type Outcome = Result<(bool, String), String>;

const SWEEP: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
const PRIMARY_DELTA: usize = 1;

struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            self.failed += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("{verdict} {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64());
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn rel_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Taylor-Green trajectory sampled every `record` with a `δ` sweep.
struct TgRun {
    primary: RegularityTrace,
    sweep: Vec<RegularityTrace>,
    diag: Diagnostics,
}

fn tg_run(n: usize, dt: f64, record: f64, t_end: f64, with_sweep: bool) -> Result<TgRun, String> {
    let grid = Grid3::periodic(n).map_err(err)?;
    let u0 = initial::taylor_green(grid);
    let diags: Vec<Diagnostics> = SWEEP
        .iter()
        .map(|&d| Diagnostics::new(&u0, d, None, grid.box_length(), 10_000, 2))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let diag = diags[PRIMARY_DELTA].clone();
    let cfg = SolverConfig { dt: TimeStep::Fixed(dt), t_end, record_interval: record, ..SolverConfig::default() };
    let mut sweep: Vec<RegularityTrace> = SWEEP.iter().map(|_| RegularityTrace::from_samples(Vec::new())).collect();
    let active = if with_sweep { &diags[..] } else { &diags[PRIMARY_DELTA..=PRIMARY_DELTA] };
    let primary = solver::run(&u0, &cfg, |st| {
        let samples = diag.sample_sweep(st.t, &st.u, active)?;
        if with_sweep {
            for (tr, s) in sweep.iter_mut().zip(&samples) {
                tr.accumulate(*s)?;
            }
            Ok(samples[PRIMARY_DELTA])
        } else {
            Ok(samples[0])
        }
    })
    .map_err(err)?;
    if primary.run.termination.is_some() {
        return Err(format!("run terminated: {:?}", primary.run.termination));
    }
    Ok(TgRun { primary, sweep, diag })
}

fn multiplier() -> Outcome {
    let start = Instant::now();
    let worst = verify::multiplier_residual(32, 20).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    Ok((worst < 1e-10 && secs < 10.0, format!("max deviation {worst:.2e} over 20 fields, {secs:.2}s")))
}

fn wedge() -> Outcome {
    let u = initial::taylor_green(Grid3::periodic(64).map_err(err)?);
    let dev = du::verify_antisymmetric_identity(&u, 10_000).map_err(err)?;
    let ratio = verify::antisymmetric_ratio(64).map_err(err)?;
    let pass = dev < 1e-9 && (0.70..=0.71).contains(&ratio);
    Ok((pass, format!("wedge deviation {dev:.2e}, |Du-|/|omega| = {ratio:.5}")))
}

fn spherical_means() -> Outcome {
    let order = 23;
    let nodes = du::SphereQuadrature::new(order).len();
    let worst = verify::spherical_mean_residual(order).map_err(err)?;
    Ok((worst < 1e-8 && nodes >= 1000, format!("max |mean| {worst:.2e} on {nodes} nodes")))
}

fn rk4_order(u0: &SpectralField3, t: f64, coarse: usize) -> Result<f64, String> {
    let op = EulerOperator::new(*u0.grid(), NonlinearForm::Convective);
    let solve = |steps: usize| -> Result<Vec<Vec<_>>, String> {
        let mut u = u0.components().to_vec();
        for _ in 0..steps {
            op.step_in_place(&mut u, t / steps as f64).map_err(err)?;
        }
        Ok(u)
    };
    let dist = |a: &[Vec<_>], b: &[Vec<_>]| -> f64 {
        a.iter()
            .zip(b)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q): (&euler_lab::fft::C64, &euler_lab::fft::C64)| (p - q).norm_sqr()))
            .sum::<f64>()
            .sqrt()
    };
    let (a, b, c) = (solve(coarse)?, solve(2 * coarse)?, solve(4 * coarse)?);
    Ok((dist(&a, &b) / dist(&b, &c)).log2())
}

fn conservation() -> Outcome {
    let grid = Grid3::periodic(64).map_err(err)?;
    let u0 = initial::taylor_green(grid);
    let e0 = solver::energy(&u0);
    let h0 = solver::helicity(&u0).map_err(err)?;
    let h_scale = u0.l2_norm() * euler_lab::ops::curl(&u0).map_err(err)?.l2_norm();
    let cfg = SolverConfig { dt: TimeStep::Fixed(1e-3), t_end: 1.0, record_interval: 0.1, ..SolverConfig::default() };
    let (mut de, mut dh) = (0.0f64, 0.0f64);
    let start = Instant::now();
    let trace = solver::run(&u0, &cfg, |st| {
        let e = solver::energy(&st.u);
        de = de.max((e - e0).abs() / e0);
        dh = dh.max((solver::helicity(&st.u)? - h0).abs() / h_scale);
        Ok(RegularitySample { t: st.t, energy: e, ell: 1.0, ..Default::default() })
    })
    .map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let reached = trace.samples.last().map_or(false, |s| (s.t - 1.0).abs() < 1e-12) && trace.run.steps == 1000;
    // Step sizes large enough for the truncation error to dominate rounding.
    let order = rk4_order(&u0, 0.2, 5)?;
    let pass = reached && de < 1e-6 && dh < 1e-5 && (3.7..=4.3).contains(&order) && secs < 300.0;
    Ok((
        pass,
        format!(
            "energy drift {de:.2e}, helicity drift {dh:.2e}, observed order {order:.3}, 1000 steps in {secs:.1}s"
        ),
    ))
}

fn constantin(tg: &TgRun) -> Outcome {
    let fit = monitor::check_constantin(&tg.primary, tg.diag.u0_l2).map_err(err)?;
    let pass = fit.constant.is_finite() && fit.constant > 0.0 && fit.variation < 10.0;
    Ok((pass, format!("C = {:.4}, max/min over trace {:.3}", fit.constant, fit.variation)))
}

fn synthetic(times: usize, dt: f64, f: impl Fn(f64) -> RegularitySample) -> RegularityTrace {
    RegularityTrace::from_samples((0..times).map(|i| f(i as f64 * dt)).collect())
}

fn exp_bounds(tg64: &TgRun, tg96: &TgRun) -> Outcome {
    // Planted constants on traces whose integrals are prescribed.
    let (c1, c2, hs0, l2) = (0.7, 1.3, 2.0, 3.0);
    let single = synthetic(21, 0.05, |t| {
        let const_int = t + t * t;
        RegularitySample { t, hs: hs0 * (c1 * l2 * const_int).exp(), const_int, ..Default::default() }
    });
    let double = synthetic(21, 0.05, |t| {
        let bkm_int = 2.0 * t;
        RegularitySample { t, hs: hs0 * (c2 * bkm_int).exp().exp(), bkm_int, omega_l2: 1.0, ..Default::default() }
    });
    let got1 = monitor::check_single_exp(&single, hs0, l2).map_err(err)?.constant;
    let got2 = monitor::check_double_exp(&double, hs0).map_err(err)?.hs.constant;
    let planted_ok = (got1 - c1).abs() < 1e-8 && (got2 - c2).abs() < 1e-8;

    let d = &tg64.diag;
    let s64 = monitor::check_single_exp(&tg64.primary, d.u0_hs, d.u0_l2).map_err(err)?;
    let d64 = monitor::check_double_exp(&tg64.primary, d.u0_hs).map_err(err)?;
    let hold = s64.all_hold() && d64.hs.all_hold() && !s64.degenerate && !d64.hs.degenerate;
    let coarse = tg64.primary.subsample(2).map_err(err)?;
    let s64c = monitor::check_single_exp(&coarse, d.u0_hs, d.u0_l2).map_err(err)?.constant;
    let d96 = &tg96.diag;
    let s96 = monitor::check_single_exp(&tg96.primary, d96.u0_hs, d96.u0_l2).map_err(err)?.constant;
    let change = rel_change(s64c, s96);
    let pass = planted_ok && hold && change < 0.25;
    Ok((
        pass,
        format!(
            "planted errors {:.1e}/{:.1e}; TG single C = {:.4} double C = {:.4}, all hold = {hold}; \
             single C n=64 {s64c:.4} vs n=96 {s96:.4} ({:.1}% change)",
            (got1 - c1).abs(),
            (got2 - c2).abs(),
            s64.constant,
            d64.hs.constant,
            100.0 * change
        ),
    ))
}

fn besov(tg: &TgRun) -> Outcome {
    let fit_at = |h: f64| -> Result<f64, String> {
        let n = (1.0 / h).round() as usize + 1;
        let tr = synthetic(n, h, |t| RegularitySample { t, besov: t.exp(), du_linf: 1.0, ..Default::default() });
        Ok(monitor::check_besov_diff_inequality(&tr).map_err(err)?.constant)
    };
    let (h, c_h, c_h2) = (0.01, fit_at(0.01)?, fit_at(0.005)?);
    let err_h = (c_h - 1.0).abs();
    // Second order: error below h² and shrinking about fourfold on halving.
    let synthetic_ok = err_h < h * h && (c_h2 - 1.0).abs() < 0.3 * err_h;

    let fine = monitor::check_besov_diff_inequality(&tg.primary).map_err(err)?.constant;
    let coarse = monitor::check_besov_diff_inequality(&tg.primary.subsample(2).map_err(err)?).map_err(err)?.constant;
    let change = rel_change(fine, coarse);
    let pass = synthetic_ok && fine.is_finite() && change < 0.10;
    Ok((
        pass,
        format!(
            "synthetic |C-1| = {err_h:.2e} (h = {h}), {:.2e} (h/2); TG C = {fine:.4} vs {coarse:.4} at double cadence ({:.2}%)",
            (c_h2 - 1.0).abs(),
            100.0 * change
        ),
    ))
}

fn blowup() -> Outcome {
    let start = Instant::now();
    let delta = 0.5;
    let dt = monitor::delta_tilde(delta);

    // Constant norm: uniform steps of 1/(C_δ A).
    let (a, c) = (4.0, 2.5);
    let flat = synthetic(101, 0.01, |t| RegularitySample { t, hs: a, ..Default::default() });
    let cfg = BlowupConfig { delta, c_delta: c, c_delta_b: None, u0_l2: 1.0, t_star: None };
    let est = monitor::blowup_machinery(&flat, &cfg).map_err(err)?;
    let want = 1.0 / (c * a);
    let uniform = est.steps.len() > 5 && est.steps.iter().all(|s| (s - want).abs() < 1e-12 * want);

    // b_δ = 1 and hs = u0_l2 give ρ = e.
    let unit = synthetic(3, 0.5, |t| RegularitySample { t, hs: 1.0, ..Default::default() });
    let cb = dt.powf(1.0 / (1.0 - dt));
    let cfg = BlowupConfig { delta, c_delta: 1.0, c_delta_b: Some(cb), u0_l2: 1.0, t_star: None };
    let est = monitor::blowup_machinery(&unit, &cfg).map_err(err)?;
    let rho_e = (est.b_delta - 1.0).abs() < 1e-12 && (est.rhos[0] - std::f64::consts::E).abs() < 1e-12;

    // Planted profile A (T* - t)^{-γ}.
    let (amp, t_star) = (0.8, 1.0);
    let gamma = 1.0 + 2.0 * delta / 5.0;
    let planted = synthetic(200, 0.9 / 199.0, |t| RegularitySample {
        t,
        hs: amp * (t_star - t).powf(-gamma),
        ..Default::default()
    });
    let cfg = BlowupConfig { delta, c_delta: 1.0, c_delta_b: None, u0_l2: 1.0, t_star: Some(t_star) };
    let est = monitor::blowup_machinery(&planted, &cfg).map_err(err)?;
    let exponent = est.fitted_exponent.unwrap_or(f64::NAN);
    let exponent_ok = (exponent - 1.2).abs() <= 0.05 * 1.2;
    let lower = est.rate_lower_bound_holds == Some(true)
        && est.rate_curve.iter().zip(&planted.samples).all(|((_, r), s)| *r <= s.hs * (1.0 + 1e-9));
    let secs = start.elapsed().as_secs_f64();
    let pass = uniform && rho_e && exponent_ok && lower && secs < 1.0;
    Ok((
        pass,
        format!(
            "uniform steps {uniform}, rho at unit ratio {:.12}, fitted exponent {exponent:.4}, rate curve below hs {lower}, {secs:.3}s",
            est_rho(&unit, cb, delta)?
        ),
    ))
}

fn est_rho(tr: &RegularityTrace, cb: f64, delta: f64) -> Result<f64, String> {
    let cfg = BlowupConfig { delta, c_delta: 1.0, c_delta_b: Some(cb), u0_l2: 1.0, t_star: None };
    Ok(monitor::blowup_machinery(tr, &cfg).map_err(err)?.rhos[0])
}

fn delta_scaling(tg: &TgRun) -> Outcome {
    let constants: Vec<f64> = tg
        .sweep
        .iter()
        .map(|tr| monitor::check_corollary_du(tr, tg.diag.u0_l2).map(|f| f.constant))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let fit = monitor::delta_scaling(&SWEEP, &constants).map_err(err)?;
    let listed: Vec<String> = SWEEP.iter().zip(&constants).map(|(d, c)| format!("{d}:{c:.4}")).collect();
    Ok((
        fit.consistent_with_inverse_delta,
        format!("slope {:.3} (want [-1.5, -0.5]); C by delta {}", fit.slope, listed.join(" ")),
    ))
}

fn write_config(dir: &Path, out: &Path) -> Result<std::path::PathBuf, String> {
    let path = dir.join("run.cfg");
    let text = format!(
        "grid.n = 16\nsim.dt = 0.01\nsim.t_end = 0.2\nsim.record_interval = 0.05\n\
         ic.type = random_bandlimited\nic.seed = 11\nic.band = 1,4\n\
         output.dir = {}\noutput.snapshot_every = 2\noutput.formats = csv\n",
        out.display()
    );
    std::fs::write(&path, text).map_err(err)?;
    Ok(path)
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_euler-lab");
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut csv = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let cfg = write_config(tmp.path(), &out)?;
        let status = Command::new(bin).arg("run").arg(&cfg).env("EULER_LAB_THREADS", "1").output().map_err(err)?;
        if !status.status.success() {
            return Err(format!("run failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        csv.push(std::fs::read(out.join("trace.csv")).map_err(err)?);
    }
    let csv_same = csv[0] == csv[1] && !csv[0].is_empty();

    let snaps = tmp.path().join("a").join("snapshots");
    let first = std::fs::read_dir(&snaps)
        .map_err(err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .min()
        .ok_or("no snapshot written")?;
    let bytes = std::fs::read(&first).map_err(err)?;
    let again = tmp.path().join("again.bin");
    Snapshot::read(&first).map_err(err)?.write(&again).map_err(err)?;
    let snap_same = std::fs::read(&again).map_err(err)? == bytes;

    let verify = Command::new(bin).args(["verify", "all"]).output().map_err(err)?;
    let verify_ok = verify.status.code() == Some(0);
    Ok((
        csv_same && snap_same && verify_ok,
        format!("trace csv identical {csv_same}, snapshot round trip identical {snap_same}, verify all exit {:?}", verify.status.code()),
    ))
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0 };
    report.check("Du multiplier form matches differentiation", multiplier);
    report.check("antisymmetric gradient equals half the vorticity wedge", wedge);
    report.check("kernel symbols have zero spherical mean", spherical_means);
    report.check("Taylor-Green conservation and RK4 order", conservation);

    let start = Instant::now();
    let tg64 = tg_run(64, 5e-3, 0.025, 1.0, true);
    let tg96 = tg_run(96, 5e-3, 0.05, 1.0, false);
    println!("(Taylor-Green diagnostic runs at n = 64 and 96 took {:.1}s)", start.elapsed().as_secs_f64());
    let with = |r: &Result<TgRun, String>| r.as_ref().map_err(Clone::clone).map(|_| ());

    report.check("vorticity bound constant is stable", || {
        with(&tg64)?;
        constantin(tg64.as_ref().unwrap())
    });
    report.check("single and double exponential bounds", || {
        with(&tg64)?;
        with(&tg96)?;
        exp_bounds(tg64.as_ref().unwrap(), tg96.as_ref().unwrap())
    });
    report.check("Besov differential inequality", || {
        with(&tg64)?;
        besov(tg64.as_ref().unwrap())
    });
    report.check("blowup-rate machinery on synthetic traces", blowup);
    report.check("Du bound constant scales like 1/delta", || {
        with(&tg64)?;
        delta_scaling(tg64.as_ref().unwrap())
    });
    report.check("determinism and snapshot round trip", determinism);

    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} acceptance check(s) failed", report.failed);
        ExitCode::FAILURE
    }
}
