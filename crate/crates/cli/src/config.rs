//! Flat `key = value` run configuration.
//!
//! Every error names where the offending value came from: `path:line` for
//! the file, `--set` for command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use euler_lab::solver::{NonlinearForm, SolverConfig, TimeStep};
use serde::Serialize;

use crate::CliError;

/// Where a value was read from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { path: String, line: usize },
    Override,
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{path}:{line}"),
            Origin::Override => write!(f, "--set"),
            Origin::Default => write!(f, "<default>"),
        }
    }
}

pub const KEYS: [&str; 25] = [
    "grid.n",
    "grid.box_length",
    "sim.dt",
    "sim.cfl_safety",
    "sim.t_end",
    "sim.record_interval",
    "sim.nonlinear_form",
    "sim.hs_ceiling",
    "diag.delta",
    "diag.L",
    "diag.s",
    "diag.pair_budget",
    "diag.upsample",
    "monitor.C_delta",
    "monitor.C_delta_b",
    "monitor.T_star",
    "ic.type",
    "ic.seed",
    "ic.band",
    "ic.amplitude",
    "ic.A",
    "ic.B",
    "ic.C",
    "output.dir",
    "output.snapshot_every",
];
const FORMATS_KEY: &str = "output.formats";

/// Raw key/value pairs with their origins, before typing.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self, CliError> {
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let origin = Origin::File { path: path.to_string(), line: i + 1 };
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(config_error(&origin, format!("expected `key = value`, got `{body}`")));
            };
            let key = k.trim();
            check_key(key, &origin)?;
            if let Some((_, first)) = raw.entries.get(key) {
                return Err(config_error(&origin, format!("duplicate key `{key}` (first set at {first})")));
            }
            raw.entries.insert(key.to_string(), (v.trim().to_string(), origin));
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Apply one `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let Some((k, v)) = assignment.split_once('=') else {
            return Err(config_error(&Origin::Override, format!("expected key=value, got `{assignment}`")));
        };
        let key = k.trim();
        check_key(key, &Origin::Override)?;
        self.entries.insert(key.to_string(), (v.trim().to_string(), Origin::Override));
        Ok(())
    }

    pub(crate) fn get(&self, key: &str) -> Option<(&str, &Origin)> {
        self.entries.get(key).map(|(v, o)| (v.as_str(), o))
    }

    fn origin(&self, key: &str) -> Origin {
        self.get(key).map_or(Origin::Default, |(_, o)| o.clone())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T, what: &str) -> Result<T, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some((v, o)) => v.parse().map_err(|_| config_error(o, format!("{key}: expected {what}, got `{v}`"))),
        }
    }

    fn optional<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, o)) => {
                v.parse().map(Some).map_err(|_| config_error(o, format!("{key}: expected {what}, got `{v}`")))
            }
        }
    }
}

/// Diagnostic settings given explicitly, for re-diagnosing stored fields.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiagOverrides {
    pub delta: Option<f64>,
    pub cutoff_l: Option<f64>,
    pub s: Option<f64>,
    pub pair_budget: Option<usize>,
    pub upsample: Option<usize>,
}

impl RawConfig {
    pub fn diag_overrides(&self) -> Result<DiagOverrides, CliError> {
        for key in self.entries.keys() {
            if !key.starts_with("diag.") {
                let (_, o) = &self.entries[key];
                return Err(config_error(o, format!("`{key}` does not apply to diagnose")));
            }
        }
        Ok(DiagOverrides {
            delta: optional_positive(self, "diag.delta")?,
            cutoff_l: optional_positive(self, "diag.L")?,
            s: optional_positive(self, "diag.s")?,
            pair_budget: self.optional("diag.pair_budget", "a positive integer")?,
            upsample: self.optional("diag.upsample", "a positive integer")?,
        })
    }
}

fn check_key(key: &str, origin: &Origin) -> Result<(), CliError> {
    if KEYS.contains(&key) || key == FORMATS_KEY {
        Ok(())
    } else {
        Err(config_error(origin, format!("unknown key `{key}`")))
    }
}

fn config_error(origin: &Origin, msg: String) -> CliError {
    CliError::Usage(format!("{origin}: {msg}"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialCondition {
    TaylorGreen,
    Abc { a: f64, b: f64, c: f64 },
    RandomBandlimited { seed: u64, band: (f64, f64), amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// `trace.csv`.
    Csv,
    /// `ledger.json` and `blowup.json`.
    Json,
    /// SVG plots.
    Svg,
}

/// Fully typed and validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub box_length: f64,
    pub dt: TimeStep,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub record_interval: f64,
    pub nonlinear_form: NonlinearForm,
    pub hs_ceiling: Option<f64>,
    pub delta: f64,
    /// Hölder cutoff; the box length when unset.
    pub cutoff_l: Option<f64>,
    /// Sobolev exponent; `5/2 + δ` when unset.
    pub s: Option<f64>,
    pub pair_budget: usize,
    pub upsample: usize,
    pub c_delta: Option<f64>,
    pub c_delta_b: Option<f64>,
    pub t_star: Option<f64>,
    pub ic: InitialCondition,
    pub out_dir: PathBuf,
    /// Write a snapshot every this many records (0: none).
    pub snapshot_every: usize,
    pub formats: Vec<OutputFormat>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_raw(&RawConfig::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let n: usize = raw.parsed("grid.n", 64, "a positive integer")?;
        if n < 8 || n % 2 != 0 {
            return Err(config_error(&raw.origin("grid.n"), format!("grid.n must be even and >= 8, got {n}")));
        }
        let box_length = positive(raw, "grid.box_length", 2.0 * std::f64::consts::PI)?;
        let dt = match raw.get("sim.dt") {
            None => TimeStep::Fixed(1e-3),
            Some(("auto", _)) => TimeStep::Auto,
            Some((v, o)) => match v.parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => TimeStep::Fixed(x),
                _ => return Err(config_error(o, format!("sim.dt: expected a positive number or `auto`, got `{v}`"))),
            },
        };
        let cfl_safety = positive(raw, "sim.cfl_safety", 0.5)?;
        if cfl_safety > 1.0 {
            return Err(config_error(&raw.origin("sim.cfl_safety"), "sim.cfl_safety must be <= 1".into()));
        }
        let t_end: f64 = raw.parsed("sim.t_end", 1.0, "a number")?;
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(config_error(&raw.origin("sim.t_end"), format!("sim.t_end must be >= 0, got {t_end}")));
        }
        let record_interval = positive(raw, "sim.record_interval", 0.05)?;
        if let TimeStep::Fixed(h) = dt {
            if record_interval < h * (1.0 - 1e-12) {
                return Err(config_error(
                    &raw.origin("sim.record_interval"),
                    format!("sim.record_interval {record_interval} is shorter than sim.dt {h}"),
                ));
            }
        }
        let nonlinear_form = match raw.get("sim.nonlinear_form") {
            None | Some(("convective", _)) => NonlinearForm::Convective,
            Some(("rotational", _)) => NonlinearForm::Rotational,
            Some((v, o)) => {
                return Err(config_error(o, format!("sim.nonlinear_form: expected convective|rotational, got `{v}`")))
            }
        };
        let hs_ceiling = optional_positive(raw, "sim.hs_ceiling")?;

        let delta = positive(raw, "diag.delta", 0.5)?;
        let cutoff_l = optional_positive(raw, "diag.L")?;
        if let Some(l) = cutoff_l {
            if l > 3f64.sqrt() * box_length {
                return Err(config_error(&raw.origin("diag.L"), format!("diag.L = {l} exceeds the box diagonal")));
            }
        }
        let s = optional_positive(raw, "diag.s")?;
        let pair_budget: usize = raw.parsed("diag.pair_budget", 10_000, "a positive integer")?;
        if pair_budget < euler_lab::norms::MIN_PAIR_BUDGET {
            return Err(config_error(
                &raw.origin("diag.pair_budget"),
                format!("diag.pair_budget must be >= {}", euler_lab::norms::MIN_PAIR_BUDGET),
            ));
        }
        let upsample: usize = raw.parsed("diag.upsample", 2, "a positive integer")?;
        if upsample == 0 {
            return Err(config_error(&raw.origin("diag.upsample"), "diag.upsample must be >= 1".into()));
        }
        let c_delta = optional_positive(raw, "monitor.C_delta")?;
        let c_delta_b = optional_positive(raw, "monitor.C_delta_b")?;
        let t_star = optional_positive(raw, "monitor.T_star")?;

        let ic = match raw.get("ic.type") {
            None | Some(("taylor_green", _)) => InitialCondition::TaylorGreen,
            Some(("abc", _)) => InitialCondition::Abc {
                a: raw.parsed("ic.A", 1.0, "a number")?,
                b: raw.parsed("ic.B", 1.0, "a number")?,
                c: raw.parsed("ic.C", 1.0, "a number")?,
            },
            Some(("random_bandlimited", o)) => {
                let Some(seed) = raw.optional::<u64>("ic.seed", "an unsigned integer")? else {
                    return Err(config_error(o, "ic.type = random_bandlimited requires ic.seed".into()));
                };
                let band = match raw.get("ic.band") {
                    None => (1.0, 4.0),
                    Some((v, bo)) => parse_band(v).ok_or_else(|| {
                        config_error(bo, format!("ic.band: expected `lo,hi` with 0 <= lo <= hi, got `{v}`"))
                    })?,
                };
                InitialCondition::RandomBandlimited { seed, band, amplitude: positive(raw, "ic.amplitude", 1.0)? }
            }
            Some((v, o)) => {
                return Err(config_error(
                    o,
                    format!("ic.type: expected taylor_green|abc|random_bandlimited, got `{v}`"),
                ))
            }
        };

        let out_dir = PathBuf::from(raw.get("output.dir").map_or("out", |(v, _)| v));
        let snapshot_every: usize = raw.parsed("output.snapshot_every", 0, "a non-negative integer")?;
        let formats = match raw.get(FORMATS_KEY) {
            None => vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg],
            Some((v, o)) => {
                let mut out = Vec::new();
                for f in v.split(',').map(str::trim).filter(|f| !f.is_empty()) {
                    let fmt = match f {
                        "csv" => OutputFormat::Csv,
                        "json" => OutputFormat::Json,
                        "svg" => OutputFormat::Svg,
                        _ => return Err(config_error(o, format!("output.formats: unknown format `{f}`"))),
                    };
                    if !out.contains(&fmt) {
                        out.push(fmt);
                    }
                }
                out
            }
        };

        Ok(Self {
            n,
            box_length,
            dt,
            cfl_safety,
            t_end,
            record_interval,
            nonlinear_form,
            hs_ceiling,
            delta,
            cutoff_l,
            s,
            pair_budget,
            upsample,
            c_delta,
            c_delta_b,
            t_star,
            ic,
            out_dir,
            snapshot_every,
            formats,
        })
    }

    /// Parse a config file and apply `--set` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut raw = match path {
            Some(p) => RawConfig::load(p)?,
            None => RawConfig::default(),
        };
        for o in overrides {
            raw.set(o)?;
        }
        Self::from_raw(&raw)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            cfl_safety: self.cfl_safety,
            t_end: self.t_end,
            record_interval: self.record_interval,
            nonlinear_form: self.nonlinear_form,
            ceiling_s: self.s.unwrap_or(2.5 + self.delta),
            hs_ceiling: self.hs_ceiling,
        }
    }

    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

fn positive(raw: &RawConfig, key: &str, default: f64) -> Result<f64, CliError> {
    let v: f64 = raw.parsed(key, default, "a number")?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(config_error(&raw.origin(key), format!("{key} must be positive, got {v}")));
    }
    Ok(v)
}

fn optional_positive(raw: &RawConfig, key: &str) -> Result<Option<f64>, CliError> {
    match raw.optional::<f64>(key, "a number")? {
        Some(v) if !(v > 0.0 && v.is_finite()) => {
            Err(config_error(&raw.origin(key), format!("{key} must be positive, got {v}")))
        }
        other => Ok(other),
    }
}

fn parse_band(v: &str) -> Option<(f64, f64)> {
    let (a, b) = v.split_once(',')?;
    let (lo, hi) = (a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?);
    (lo >= 0.0 && hi >= lo).then_some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> String {
        match RawConfig::parse(text, "run.cfg").and_then(|r| RunConfig::from_raw(&r)) {
            Err(CliError::Usage(m)) => m,
            other => panic!("expected usage error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_and_overrides() {
        let raw = RawConfig::parse("grid.n = 32\n# comment\nsim.dt = auto\n", "a.cfg").unwrap();
        let mut raw2 = raw.clone();
        raw2.set("sim.t_end=0.25").unwrap();
        let c = RunConfig::from_raw(&raw2).unwrap();
        assert_eq!(c.n, 32);
        assert_eq!(c.dt, TimeStep::Auto);
        assert_eq!(c.t_end, 0.25);
        assert_eq!(c.solver().ceiling_s, 3.0);
        assert_eq!(c.ic, InitialCondition::TaylorGreen);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(err("grid.n = 32\n\nsim.dt = fast\n").starts_with("run.cfg:3: sim.dt"));
        assert!(err("grid.m = 32\n").starts_with("run.cfg:1: unknown key"));
        assert!(err("grid.n = 32\ngrid.n = 16\n").contains("duplicate"));
        assert!(err("ic.type = random_bandlimited\n").starts_with("run.cfg:1:"));
        assert!(err("output.formats = csv,png\n").contains("png"));
        assert!(err("novalue\n").starts_with("run.cfg:1:"));
    }

    #[test]
    fn override_errors_name_the_flag() {
        let mut raw = RawConfig::default();
        raw.set("diag.delta=-1").unwrap();
        match RunConfig::from_raw(&raw) {
            Err(CliError::Usage(m)) => assert!(m.starts_with("--set:")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_ic_needs_seed() {
        let raw = RawConfig::parse("ic.type = random_bandlimited\nic.seed = 7\nic.band = 2, 5\n", "c").unwrap();
        let c = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(c.ic, InitialCondition::RandomBandlimited { seed: 7, band: (2.0, 5.0), amplitude: 1.0 });
    }
}
