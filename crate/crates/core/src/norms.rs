//! Norms and length scales: L², L∞, the Hölder seminorm, Littlewood-Paley
//! shells, Besov `B^s_{2,2}` and Sobolev `H^s`, and the length scale `ℓ_δ`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Space, SpectralField3};
use crate::grid::{Grid3, Wavenumbers};
use crate::ops;

/// Max pointwise vector magnitude on a grid `upsample` times finer
/// (zero-padded spectral interpolation). A lower bound of the true sup.
pub fn linf_norm(f: &SpectralField3, upsample: usize) -> Result<f64> {
    if upsample == 0 {
        return Err(Error::usage("upsample must be >= 1"));
    }
    let vals = fine_values(f, upsample)?;
    Ok(max_magnitude(&vals))
}

pub(crate) fn max_magnitude(vals: &[Vec<f64>]) -> f64 {
    let npts = vals[0].len();
    let mut worst: f64 = 0.0;
    for p in 0..npts {
        let s: f64 = vals.iter().map(|c| c[p] * c[p]).sum();
        worst = worst.max(s);
    }
    worst.sqrt()
}

/// Point values of `f` on the grid refined by `upsample`.
pub(crate) fn fine_values(f: &SpectralField3, upsample: usize) -> Result<Vec<Vec<f64>>> {
    if upsample == 1 && f.space() == Space::Physical {
        return Ok(f.real_values());
    }
    Ok(ops::refine(&f.to_spectral(), upsample)?.real_values())
}

/// Parameters of the Hölder seminorm estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderConfig {
    /// Hölder exponent, in `(0, 1]`.
    pub delta: f64,
    /// Pairs are restricted to `|x - y| < cutoff_l`.
    pub cutoff_l: f64,
    /// Max sampled pairs per dyadic separation shell.
    pub pair_budget: usize,
    /// Grid refinement applied before sampling.
    pub upsample: usize,
}

/// Smallest accepted `pair_budget`.
pub const MIN_PAIR_BUDGET: usize = 1000;

impl HolderConfig {
    pub fn new(delta: f64, cutoff_l: f64, pair_budget: usize, upsample: usize) -> Result<Self> {
        let cfg = Self { delta, cutoff_l, pair_budget, upsample };
        cfg.validate_shape()?;
        Ok(cfg)
    }

    /// Defaults for a grid: `L` is the box period, budget `10^4`, upsample 2.
    pub fn for_grid(grid: &Grid3, delta: f64) -> Result<Self> {
        Self::new(delta, grid.box_length(), 10_000, 2)
    }

    fn validate_shape(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::usage(format!("Hölder exponent must lie in (0, 1], got {}", self.delta)));
        }
        if !(self.cutoff_l > 0.0 && self.cutoff_l.is_finite()) {
            return Err(Error::usage(format!("cutoff L must be positive, got {}", self.cutoff_l)));
        }
        if self.pair_budget < MIN_PAIR_BUDGET {
            return Err(Error::usage(format!("pair budget must be >= {MIN_PAIR_BUDGET}, got {}", self.pair_budget)));
        }
        if self.upsample == 0 {
            return Err(Error::usage("upsample must be >= 1"));
        }
        Ok(())
    }

    pub fn validate(&self, grid: &Grid3) -> Result<()> {
        self.validate_shape()?;
        let diameter = 3f64.sqrt() * grid.box_length();
        if self.cutoff_l > diameter * (1.0 + 1e-12) {
            return Err(Error::usage(format!("cutoff L = {} exceeds the box diameter {diameter}", self.cutoff_l)));
        }
        Ok(())
    }
}

/// Radical inverse of `i` in `base`.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `0..len` in bit-reversed (van der Corput) order.
fn bit_reversed_order(len: usize) -> Vec<usize> {
    let size = len.next_power_of_two() as u64;
    let mut idx: Vec<u64> = (0..size).collect();
    idx.sort_by(|a, b| radical_inverse(*a, 2).total_cmp(&radical_inverse(*b, 2)));
    idx.into_iter().map(|i| i as usize).filter(|&i| i < len).collect()
}

const LATTICE_DIRECTIONS: [[i64; 3]; 13] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, -1, 0],
    [1, 0, 1],
    [1, 0, -1],
    [0, 1, 1],
    [0, 1, -1],
    [1, 1, 1],
    [1, 1, -1],
    [1, -1, 1],
    [-1, 1, 1],
];

fn norm_i(d: [i64; 3]) -> f64 {
    ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt()
}

/// First `count` integer displacements of separation shell `s`
/// (`2^{s-1} < |d| <= 2^s` in grid units). The list for a larger count
/// extends the list for a smaller one.
fn shell_displacements(s: u32, count: usize) -> Vec<[i64; 3]> {
    let lo = if s == 0 { 0.5 } else { (1u64 << (s - 1)) as f64 };
    let hi = (1u64 << s) as f64;
    let mut out = Vec::with_capacity(count);
    // Lattice directions first: multiples r·e inside the shell, radii
    // visited in radical-inverse order, one per direction per round.
    let radii: Vec<Vec<i64>> = LATTICE_DIRECTIONS
        .iter()
        .map(|&e| {
            let len = norm_i(e);
            let rmin = (lo / len).floor() as i64 + 1;
            let rmax = (hi / len + 1e-12).floor() as i64;
            let rs: Vec<i64> = (rmin..=rmax).collect();
            bit_reversed_order(rs.len()).into_iter().map(|i| rs[i]).collect()
        })
        .collect();
    let rounds = radii.iter().map(Vec::len).max().unwrap_or(0);
    'outer: for round in 0..rounds {
        for (e, rs) in LATTICE_DIRECTIONS.iter().zip(&radii) {
            if out.len() >= count {
                break 'outer;
            }
            if let Some(&r) = rs.get(round) {
                out.push([e[0] * r, e[1] * r, e[2] * r]);
            }
        }
    }
    // Then quasi-random directions and radii.
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut p: u64 = 1;
    while out.len() < count && p < 64 * count as u64 + 64 {
        let z = 1.0 - 2.0 * radical_inverse(p, 2);
        let phi = golden * p as f64;
        let r = 0.5 * hi * (1.0 + radical_inverse(p, 3));
        let st = (1.0 - z * z).max(0.0).sqrt();
        let d = [(r * st * phi.cos()).round() as i64, (r * st * phi.sin()).round() as i64, (r * z).round() as i64];
        if d != [0, 0, 0] {
            out.push(d);
        }
        p += 1;
    }
    out
}

/// Base points of the pair sampling: an additive recurrence with the
/// generalized golden ratio in three dimensions.
fn base_points(m: usize, count: usize) -> Vec<[usize; 3]> {
    // Root of x^4 = x + 1.
    let g = 1.220_744_084_605_759_5_f64;
    let alpha = [1.0 / g, 1.0 / (g * g), 1.0 / (g * g * g)];
    (0..count)
        .map(|p| {
            let mut c = [0usize; 3];
            for a in 0..3 {
                let v = (0.5 + alpha[a] * p as f64).fract();
                c[a] = ((v * m as f64) as usize).min(m - 1);
            }
            c
        })
        .collect()
}

/// Min-image torus distance of an integer displacement, in grid units.
fn torus_norm(d: [i64; 3], m: usize) -> f64 {
    let m = m as i64;
    let mut s = 0i64;
    for &c in &d {
        let r = c.rem_euclid(m);
        let w = r.min(m - r);
        s += w * w;
    }
    (s as f64).sqrt()
}

fn pair_quotient(vals: &[Vec<f64>], a: usize, b: usize, dist: f64, delta: f64) -> f64 {
    let diff: f64 = vals.iter().map(|c| (c[a] - c[b]).powi(2)).sum::<f64>().sqrt();
    diff / dist.powf(delta)
}

/// Sampled estimate of `sup_{0<|x-y|<L} |f(x) - f(y)| / |x - y|^δ`.
///
/// Separations are stratified into dyadic shells anchored at the (refined)
/// grid spacing; each shell evaluates up to `pair_budget` pairs built from
/// deterministic base points and displacements. The result is a lower
/// bound of the sup and nondecreasing in both `pair_budget` and `L`.
pub fn holder_seminorm(f: &SpectralField3, cfg: &HolderConfig) -> Result<f64> {
    cfg.validate(f.grid())?;
    let vals = fine_values(f, cfg.upsample)?;
    let fine = f.grid().refined(cfg.upsample)?;
    Ok(holder_from_values(&vals, &fine, cfg))
}

pub(crate) fn holder_from_values(vals: &[Vec<f64>], fine: &Grid3, cfg: &HolderConfig) -> f64 {
    let m = fine.n();
    let h = fine.dx();
    let side = (cfg.pair_budget as f64).sqrt().floor() as usize;
    let bases = base_points(m, side);
    let max_dist = 3f64.sqrt() * (m / 2) as f64;
    let mi = m as i64;
    let mut best: f64 = 0.0;
    let mut s = 0u32;
    loop {
        let lo = if s == 0 { 0.0 } else { (1u64 << (s - 1)) as f64 };
        if lo * h >= cfg.cutoff_l || lo >= max_dist {
            break;
        }
        for d in shell_displacements(s, side) {
            let dist = torus_norm(d, m) * h;
            if dist == 0.0 || dist >= cfg.cutoff_l {
                continue;
            }
            for b in &bases {
                let a = b[0] + m * (b[1] + m * b[2]);
                let c = [
                    (b[0] as i64 + d[0]).rem_euclid(mi) as usize,
                    (b[1] as i64 + d[1]).rem_euclid(mi) as usize,
                    (b[2] as i64 + d[2]).rem_euclid(mi) as usize,
                ];
                let bidx = c[0] + m * (c[1] + m * c[2]);
                best = best.max(pair_quotient(vals, a, bidx, dist, cfg.delta));
            }
        }
        s += 1;
    }
    best
}

/// Exact sup of the Hölder quotient over all grid-point pairs of the
/// refined grid. Cost grows like the square of the point count; meant for
/// tiny grids.
pub fn holder_seminorm_all_pairs(f: &SpectralField3, cfg: &HolderConfig) -> Result<f64> {
    cfg.validate(f.grid())?;
    let vals = fine_values(f, cfg.upsample)?;
    let fine = f.grid().refined(cfg.upsample)?;
    let m = fine.n();
    let h = fine.dx();
    let npts = fine.len();
    let mut best: f64 = 0.0;
    for a in 0..npts {
        let (ax, ay, az) = fine.coords(a);
        for b in a + 1..npts {
            let (bx, by, bz) = fine.coords(b);
            let d = [bx as i64 - ax as i64, by as i64 - ay as i64, bz as i64 - az as i64];
            let dist = torus_norm(d, m) * h;
            if dist == 0.0 || dist >= cfg.cutoff_l {
                continue;
            }
            best = best.max(pair_quotient(&vals, a, b, dist, cfg.delta));
        }
    }
    Ok(best)
}

/// `ℓ_δ = min{L, (seminorm / u0_l2)^{-2/(2δ+5)}}`, and `L` when the
/// seminorm vanishes.
pub fn length_scale_from_seminorm(seminorm: f64, u0_l2: f64, delta: f64, cutoff_l: f64) -> Result<f64> {
    if seminorm == 0.0 {
        return Ok(cutoff_l);
    }
    if !(u0_l2 > 0.0) {
        return Err(Error::Undefined(format!("length scale needs ‖u0‖ > 0, got {u0_l2}")));
    }
    let ratio = seminorm / u0_l2;
    Ok(cutoff_l.min(ratio.powf(-2.0 / (2.0 * delta + 5.0))))
}

pub fn length_scale(omega: &SpectralField3, u0_l2: f64, cfg: &HolderConfig) -> Result<f64> {
    let semi = holder_seminorm(omega, cfg)?;
    length_scale_from_seminorm(semi, u0_l2, cfg.delta, cfg.cutoff_l)
}

/// Shell index `j` with `2^j <= |k| < 2^{j+1}`, or `None` for `k = 0`.
pub fn shell_index(k2: f64) -> Option<i32> {
    if k2 <= 0.0 {
        return None;
    }
    // |k|² ∈ [4^j, 4^{j+1}).
    let mut j = (k2.log2() / 2.0).floor() as i32;
    while 4f64.powi(j) > k2 {
        j -= 1;
    }
    while 4f64.powi(j + 1) <= k2 {
        j += 1;
    }
    Some(j)
}

/// Sharp Littlewood-Paley decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct LPDecomposition {
    /// `(j, P_j f)` in increasing `j`, nonempty shells only.
    pub shells: Vec<(i32, SpectralField3)>,
    /// The `k = 0` block.
    pub residual: SpectralField3,
}

impl LPDecomposition {
    pub fn reconstruct(&self) -> SpectralField3 {
        let mut out = self.residual.clone();
        for (_, f) in &self.shells {
            out = out.add(f).expect("shells share a shape");
        }
        out
    }
}

pub fn lp_decompose(f: &SpectralField3) -> Result<LPDecomposition> {
    f.require_space(Space::Spectral, "lp_decompose")?;
    let grid = *f.grid();
    let wn = Wavenumbers::new(&grid);
    let mut labels = vec![None; grid.len()];
    wn.for_each(|idx, k, _| labels[idx] = shell_index(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]));
    let mut shells: BTreeMap<i32, SpectralField3> = BTreeMap::new();
    let mut residual = SpectralField3::zeros(grid, f.ncomp(), Space::Spectral);
    for c in 0..f.ncomp() {
        for (idx, &v) in f.component(c).iter().enumerate() {
            if v == Default::default() {
                continue;
            }
            match labels[idx] {
                None => residual.component_mut(c)[idx] = v,
                Some(j) => {
                    let shell = shells.entry(j).or_insert_with(|| SpectralField3::zeros(grid, f.ncomp(), Space::Spectral));
                    shell.component_mut(c)[idx] = v;
                }
            }
        }
    }
    Ok(LPDecomposition { shells: shells.into_iter().collect(), residual })
}

/// `‖P_j f‖²_{L²}` per nonempty shell, plus the `k = 0` energy.
pub fn shell_energies(f: &SpectralField3) -> Result<(BTreeMap<i32, f64>, f64)> {
    f.require_space(Space::Spectral, "shell_energies")?;
    let grid = *f.grid();
    let vol = grid.volume();
    let wn = Wavenumbers::new(&grid);
    let mut shells = BTreeMap::new();
    let mut residual = 0.0;
    wn.for_each(|idx, k, _| {
        let e: f64 = f.components().iter().map(|c| c[idx].norm_sqr()).sum::<f64>() * vol;
        if e == 0.0 {
            return;
        }
        match shell_index(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) {
            None => residual += e,
            Some(j) => *shells.entry(j).or_insert(0.0) += e,
        }
    });
    Ok((shells, residual))
}

/// `B^s_{2,2}` norm on sharp shells: homogeneous `(Σ_j 2^{2js}‖P_j f‖²)^{1/2}`,
/// inhomogeneous `(‖f‖² + homogeneous²)^{1/2}`.
pub fn besov_norm(f: &SpectralField3, s: f64, homogeneous: bool) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::usage(format!("Besov smoothness must be >= 0, got {s}")));
    }
    let (shells, residual) = shell_energies(f)?;
    Ok(besov_from_energies(&shells, residual, s, homogeneous))
}

pub(crate) fn besov_from_energies(shells: &BTreeMap<i32, f64>, residual: f64, s: f64, homogeneous: bool) -> f64 {
    let hom: f64 = shells.iter().map(|(&j, &e)| 2f64.powf(2.0 * j as f64 * s) * e).sum();
    if homogeneous {
        hom.sqrt()
    } else {
        let total: f64 = shells.values().sum::<f64>() + residual;
        (total + hom).sqrt()
    }
}

/// `H^s` norm with multiplier `(1 + |k|²)^{s/2}`.
pub fn sobolev_norm(f: &SpectralField3, s: f64) -> Result<f64> {
    f.require_space(Space::Spectral, "sobolev_norm")?;
    let grid = *f.grid();
    let wn = Wavenumbers::new(&grid);
    let mut acc = 0.0;
    wn.for_each(|idx, k, _| {
        let e: f64 = f.components().iter().map(|c| c[idx].norm_sqr()).sum();
        if e != 0.0 {
            acc += (1.0 + k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).powf(s) * e;
        }
    });
    Ok((acc * grid.volume()).sqrt())
}
