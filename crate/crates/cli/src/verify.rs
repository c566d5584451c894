//! Built-in verification suites behind `euler-lab verify`.

use std::fmt;
use std::str::FromStr;

use euler_lab::du::{self, SymbolId};
use euler_lab::norms::{self, HolderConfig};
use euler_lab::{initial, ops, Grid3};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kernels,
    Norms,
    All,
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "kernels" => Ok(Suite::Kernels),
            "norms" => Ok(Suite::Norms),
            "all" => Ok(Suite::All),
            _ => Err(CliError::Usage(format!("unknown suite `{s}` (expected kernels|norms|all)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition.
    pub threshold: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    fn below(&mut self, name: &str, value: f64, limit: f64) {
        self.rows.push(CheckRow { name: name.into(), value, threshold: format!("< {limit:e}"), pass: value < limit });
    }

    fn within(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.rows.push(CheckRow {
            name: name.into(),
            value,
            threshold: format!("in [{lo}, {hi}]"),
            pass: (lo..=hi).contains(&value),
        });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<width$}  {:>12}  {:<24}  result", "check", "value", "threshold")?;
        for r in &self.rows {
            let verdict = if r.pass { "PASS" } else { "FAIL" };
            writeln!(f, "{:<width$}  {:>12.4e}  {:<24}  {verdict}", r.name, r.value, r.threshold)?;
        }
        Ok(())
    }
}

/// Fields and sizes used by the suites.
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Grid for the kernel checks.
    pub kernel_n: usize,
    /// Random fields in the multiplier check.
    pub multiplier_fields: u64,
    pub wedge_samples: usize,
    /// Grid for the all-pairs Hölder oracle.
    pub holder_n: usize,
    pub sphere_order: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { kernel_n: 32, multiplier_fields: 20, wedge_samples: 10_000, holder_n: 16, sphere_order: 32 }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<VerifyReport, CliError> {
    let mut report = VerifyReport::default();
    if matches!(suite, Suite::Kernels | Suite::All) {
        kernels(&mut report, opts)?;
    }
    if matches!(suite, Suite::Norms | Suite::All) {
        norm_checks(&mut report, opts)?;
    }
    Ok(report)
}

fn grid(n: usize) -> Result<Grid3, CliError> {
    Ok(Grid3::periodic(n)?)
}

/// Largest `|mean|` over every angular symbol.
pub fn spherical_mean_residual(order: usize) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for id in SymbolId::all() {
        worst = worst.max(du::spherical_mean_sigma(id, order)?.abs());
    }
    Ok(worst)
}

/// Worst entrywise relative deviation between the two `Du` constructions
/// over `count` seeded random fields on an `n^3` grid.
pub fn multiplier_residual(n: usize, count: u64) -> Result<f64, CliError> {
    let g = grid(n)?;
    let band = (1.0, (n / 3) as f64);
    let mut worst: f64 = 0.0;
    for seed in 0..count {
        let u = initial::random_bandlimited(g, seed, band, 1.0)?;
        let w = ops::curl(&u)?;
        let a = du::du_from_vorticity(&w)?;
        let b = du::du_by_differentiation(&u)?;
        worst = worst.max(a.max_relative_difference(&b)?);
    }
    Ok(worst)
}

/// `‖Du⁻‖_{L²} / ‖ω‖_{L²}` for Taylor-Green.
pub fn antisymmetric_ratio(n: usize) -> Result<f64, CliError> {
    let u = initial::taylor_green(grid(n)?);
    let (_, anti) = du::split_symmetric(&du::du_by_differentiation(&u)?);
    Ok(anti.l2_norm() / ops::curl(&u)?.l2_norm())
}

fn kernels(report: &mut VerifyReport, opts: &VerifyOptions) -> Result<(), CliError> {
    report.below(
        &format!("spherical means ({} symbols)", SymbolId::all().len()),
        spherical_mean_residual(opts.sphere_order)?,
        1e-8,
    );
    report.below(
        &format!("multiplier vs differentiation (n={}, {} fields)", opts.kernel_n, opts.multiplier_fields),
        multiplier_residual(opts.kernel_n, opts.multiplier_fields)?,
        1e-10,
    );
    let tg = initial::taylor_green(grid(opts.kernel_n)?);
    report.below(
        &format!("antisymmetric part = half wedge (n={})", opts.kernel_n),
        du::verify_antisymmetric_identity(&tg, opts.wedge_samples)?,
        1e-9,
    );
    report.within("|Du-|/|omega| in L2", antisymmetric_ratio(opts.kernel_n)?, 0.70, 0.71);
    Ok(())
}

fn norm_checks(report: &mut VerifyReport, opts: &VerifyOptions) -> Result<(), CliError> {
    let g = grid(opts.holder_n)?;
    let w = ops::curl(&initial::taylor_green(g))?;
    let cfg = HolderConfig::new(0.5, g.box_length(), 10_000, 1)?;
    let sampled = norms::holder_seminorm(&w, &cfg)?;
    let exact = norms::holder_seminorm_all_pairs(&w, &cfg)?;
    report.below(
        &format!("sampled vs all-pairs Hoelder (n={})", opts.holder_n),
        (sampled - exact).abs() / exact,
        0.01,
    );

    let u = initial::random_bandlimited(g, 11, (1.0, 5.0), 1.0)?;
    let mut worst_low: f64 = f64::INFINITY;
    let mut worst_high: f64 = 0.0;
    for s in [0.5, 1.5, 3.0] {
        let ratio = norms::besov_norm(&u, s, false)? / norms::sobolev_norm(&u, s)?;
        worst_low = worst_low.min(ratio / 2f64.powf(-s - 1.0));
        worst_high = worst_high.max(ratio / 2f64.powf(s + 1.0));
    }
    // Both normalized ratios must stay inside [1, ∞) and (0, 1].
    report.rows.push(CheckRow {
        name: "Besov/Sobolev sandwich".into(),
        value: worst_high,
        threshold: "within [2^-(s+1), 2^(s+1)]".into(),
        pass: worst_low >= 1.0 && worst_high <= 1.0,
    });

    let lp = norms::lp_decompose(&u)?;
    report.below("Littlewood-Paley reconstruction", lp.reconstruct().max_relative_difference(&u)?, 1e-12);

    let sin = euler_lab::SpectralField3::from_fn(g, |p| [p[0].sin() * (2.0 * p[1]).cos()]).to_spectral();
    let l: Vec<f64> = [1, 2, 4].iter().map(|&k| norms::linf_norm(&sin, k)).collect::<Result<_, _>>()?;
    report.rows.push(CheckRow {
        name: "sup norm nondecreasing under refinement".into(),
        value: l[2],
        threshold: "u1 <= u2 <= u4".into(),
        pass: l[0] <= l[1] && l[1] <= l[2],
    });
    Ok(())
}
