//! Spectral differential operators on periodic fields.
//!
//! Every derivative multiplies by `i k` and then zeroes the Nyquist planes,
//! where the lattice is not symmetric under `k -> -k`.

use crate::error::{Error, Result};
use crate::fft::C64;
use crate::field::{Space, SpectralField3};
use crate::grid::{Grid3, Wavenumbers};

/// Relative size of the `k = 0` vorticity coefficient above which the
/// Biot-Savart inverse is refused.
pub const MEAN_TOLERANCE: f64 = 1e-12;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `∂_axis` of every component.
pub fn derivative(f: &SpectralField3, axis: usize) -> Result<SpectralField3> {
    f.require_space(Space::Spectral, "derivative")?;
    if axis > 2 {
        return Err(Error::usage(format!("axis {axis} out of range")));
    }
    let wn = Wavenumbers::new(f.grid());
    let mut out = f.clone();
    for c in 0..f.ncomp() {
        let dst = out.component_mut(c);
        wn.for_each(|idx, k, nyq| {
            dst[idx] = if nyq { C64::default() } else { I * k[axis] * dst[idx] };
        });
    }
    Ok(out)
}

/// Gradient of a scalar field.
pub fn gradient(f: &SpectralField3) -> Result<SpectralField3> {
    if f.is_vector() {
        return Err(Error::usage("gradient expects a scalar field"));
    }
    let comps = (0..3)
        .map(|a| derivative(f, a).map(|d| d.into_components().remove(0)))
        .collect::<Result<Vec<_>>>()?;
    SpectralField3::from_components(*f.grid(), Space::Spectral, comps)
}

/// Divergence of a vector field.
pub fn divergence(u: &SpectralField3) -> Result<SpectralField3> {
    u.require_space(Space::Spectral, "divergence")?;
    u.require_vector("divergence")?;
    let wn = Wavenumbers::new(u.grid());
    let mut out = SpectralField3::zeros(*u.grid(), 1, Space::Spectral);
    let (ux, uy, uz) = (u.component(0), u.component(1), u.component(2));
    let dst = out.component_mut(0);
    wn.for_each(|idx, k, nyq| {
        if !nyq {
            dst[idx] = I * (k[0] * ux[idx] + k[1] * uy[idx] + k[2] * uz[idx]);
        }
    });
    Ok(out)
}

/// Vorticity `ω̂(k) = i k ∧ û(k)`.
pub fn curl(u: &SpectralField3) -> Result<SpectralField3> {
    u.require_space(Space::Spectral, "curl")?;
    u.require_vector("curl")?;
    let wn = Wavenumbers::new(u.grid());
    let mut out = SpectralField3::zeros(*u.grid(), 3, Space::Spectral);
    let (ux, uy, uz) = (u.component(0), u.component(1), u.component(2));
    let mut w = [vec![C64::default(); ux.len()], vec![C64::default(); ux.len()], vec![C64::default(); ux.len()]];
    wn.for_each(|idx, k, nyq| {
        if !nyq {
            let (a, b, c) = (ux[idx], uy[idx], uz[idx]);
            w[0][idx] = I * (k[1] * c - k[2] * b);
            w[1][idx] = I * (k[2] * a - k[0] * c);
            w[2][idx] = I * (k[0] * b - k[1] * a);
        }
    });
    for (c, data) in w.into_iter().enumerate() {
        out.component_mut(c).copy_from_slice(&data);
    }
    Ok(out)
}

/// Leray projection onto divergence-free fields,
/// `P v̂ = v̂ - k (k·v̂) / |k|^2` for `k ≠ 0`; the mean passes through.
pub fn leray_project(v: &SpectralField3) -> Result<SpectralField3> {
    v.require_space(Space::Spectral, "leray_project")?;
    v.require_vector("leray_project")?;
    let mut out = v.clone();
    leray_in_place(&mut out);
    Ok(out)
}

pub(crate) fn leray_in_place(v: &mut SpectralField3) {
    let wn = Wavenumbers::new(v.grid());
    let grid = *v.grid();
    let mut comps = std::mem::replace(v, SpectralField3::zeros(grid, 3, Space::Spectral)).into_components();
    let (head, tail) = comps.split_at_mut(1);
    let (mid, last) = tail.split_at_mut(1);
    let (vx, vy, vz) = (&mut head[0], &mut mid[0], &mut last[0]);
    wn.for_each(|idx, k, _| {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 > 0.0 {
            let dot = (k[0] * vx[idx] + k[1] * vy[idx] + k[2] * vz[idx]) / k2;
            vx[idx] -= k[0] * dot;
            vy[idx] -= k[1] * dot;
            vz[idx] -= k[2] * dot;
        }
    });
    *v = SpectralField3::from_components(grid, Space::Spectral, comps).expect("shape preserved");
}

/// Biot-Savart inversion `û(k) = i k ∧ ŵ(k) / |k|^2`, zero mean.
pub fn velocity_from_vorticity(w: &SpectralField3) -> Result<SpectralField3> {
    w.require_space(Space::Spectral, "velocity_from_vorticity")?;
    w.require_vector("velocity_from_vorticity")?;
    check_zero_mean(w)?;
    let wn = Wavenumbers::new(w.grid());
    let mut out = SpectralField3::zeros(*w.grid(), 3, Space::Spectral);
    let (wx, wy, wz) = (w.component(0), w.component(1), w.component(2));
    let len = wx.len();
    let mut u = [vec![C64::default(); len], vec![C64::default(); len], vec![C64::default(); len]];
    wn.for_each(|idx, k, nyq| {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if !nyq && k2 > 0.0 {
            let (a, b, c) = (wx[idx], wy[idx], wz[idx]);
            let s = I / k2;
            u[0][idx] = s * (k[1] * c - k[2] * b);
            u[1][idx] = s * (k[2] * a - k[0] * c);
            u[2][idx] = s * (k[0] * b - k[1] * a);
        }
    });
    for (c, data) in u.into_iter().enumerate() {
        out.component_mut(c).copy_from_slice(&data);
    }
    Ok(out)
}

pub(crate) fn check_zero_mean(w: &SpectralField3) -> Result<()> {
    let mean = (0..w.ncomp()).map(|c| w.component(c)[0].norm_sqr()).sum::<f64>().sqrt();
    let scale = w.max_abs();
    if mean > MEAN_TOLERANCE * scale.max(f64::MIN_POSITIVE) && mean > 0.0 {
        return Err(Error::NonzeroMean(mean));
    }
    Ok(())
}

/// Whether an integer mode survives the 2/3 rule on an `n`-point axis.
#[inline]
pub fn in_dealias_band(m: i64, n: usize) -> bool {
    3 * m.unsigned_abs() as usize <= n
}

/// Zero every coefficient with some `|k_i| > n/3`.
pub fn dealias(f: &SpectralField3) -> Result<SpectralField3> {
    f.require_space(Space::Spectral, "dealias")?;
    let mut out = f.clone();
    dealias_in_place(&mut out);
    Ok(out)
}

pub(crate) fn dealias_mask(grid: &Grid3) -> Vec<bool> {
    let n = grid.n();
    let keep: Vec<bool> = (0..n).map(|i| in_dealias_band(grid.mode(i), n)).collect();
    let mut mask = Vec::with_capacity(grid.len());
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                mask.push(keep[ix] && keep[iy] && keep[iz]);
            }
        }
    }
    mask
}

pub(crate) fn dealias_in_place(f: &mut SpectralField3) {
    let mask = dealias_mask(f.grid());
    for c in 0..f.ncomp() {
        for (v, &keep) in f.component_mut(c).iter_mut().zip(&mask) {
            if !keep {
                *v = C64::default();
            }
        }
    }
}

/// Zero all coefficients on Nyquist planes.
pub fn zero_nyquist(f: &SpectralField3) -> Result<SpectralField3> {
    f.require_space(Space::Spectral, "zero_nyquist")?;
    let grid = *f.grid();
    let mut out = f.clone();
    for c in 0..out.ncomp() {
        let data = out.component_mut(c);
        for (idx, v) in data.iter_mut().enumerate() {
            if grid.on_nyquist_plane(idx) {
                *v = C64::default();
            }
        }
    }
    Ok(out)
}

/// Largest `|k·û(k)|` relative to the largest `|k||û(k)|`.
pub fn divergence_defect(u: &SpectralField3) -> Result<f64> {
    u.require_space(Space::Spectral, "divergence_defect")?;
    u.require_vector("divergence_defect")?;
    let wn = Wavenumbers::new(u.grid());
    let (ux, uy, uz) = (u.component(0), u.component(1), u.component(2));
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    wn.for_each(|idx, k, _| {
        let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        let d = (k[0] * ux[idx] + k[1] * uy[idx] + k[2] * uz[idx]).norm();
        let m = (ux[idx].norm_sqr() + uy[idx].norm_sqr() + uz[idx].norm_sqr()).sqrt();
        worst = worst.max(d);
        scale = scale.max(kn * m);
    });
    Ok(if scale == 0.0 { 0.0 } else { worst / scale })
}

/// Zero-padded spectral interpolation onto a grid `factor` times finer.
///
/// Nyquist coefficients are split evenly between `±n/2` on the fine grid so
/// that real fields stay real.
pub fn refine(f: &SpectralField3, factor: usize) -> Result<SpectralField3> {
    f.require_space(Space::Spectral, "refine")?;
    if factor == 1 {
        return Ok(f.clone());
    }
    let coarse = *f.grid();
    let fine = coarse.refined(factor)?;
    let mut out = SpectralField3::zeros(fine, f.ncomp(), Space::Spectral);
    for c in 0..f.ncomp() {
        scatter_refined(&coarse, factor, out.component_mut(c), |idx| f.component(c)[idx]);
    }
    Ok(out)
}

/// Add the coarse coefficients `coef(idx)` into the spectrum `dst` of the
/// grid refined by `factor`, splitting Nyquist modes evenly between `±n/2`.
pub(crate) fn scatter_refined(coarse: &Grid3, factor: usize, dst: &mut [C64], coef: impl Fn(usize) -> C64) {
    let n = coarse.n();
    let m = n * factor;
    let targets: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            let k = coarse.mode(i);
            if coarse.is_nyquist(i) {
                vec![(n / 2, 0.5), (m - n / 2, 0.5)]
            } else {
                vec![(k.rem_euclid(m as i64) as usize, 1.0)]
            }
        })
        .collect();
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let v = coef(coarse.index(ix, iy, iz));
                if v == C64::default() {
                    continue;
                }
                for &(tz, wz) in &targets[iz] {
                    for &(ty, wy) in &targets[iy] {
                        for &(tx, wx) in &targets[ix] {
                            dst[tx + m * (ty + m * tz)] += v * (wx * wy * wz);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Direction;

    fn grid(n: usize) -> Grid3 {
        Grid3::periodic(n).unwrap()
    }

    fn max_diff_physical(a: &SpectralField3, b: &SpectralField3) -> f64 {
        let (a, b) = (a.to_physical(), b.to_physical());
        a.sub(&b).unwrap().max_abs()
    }

    #[test]
    fn curl_of_single_mode() {
        let g = grid(16);
        let u = SpectralField3::from_fn(g, |p| [0.0, p[0].sin(), 0.0]).to_spectral();
        let w = curl(&u).unwrap();
        let expect = SpectralField3::from_fn(g, |p| [0.0, 0.0, p[0].cos()]);
        assert!(max_diff_physical(&w, &expect) < 1e-12);
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        let g = grid(16);
        let phi = SpectralField3::from_fn(g, |p| [p[0].cos() * p[1].cos()]).to_spectral();
        let w = curl(&gradient(&phi).unwrap()).unwrap();
        assert!(w.max_abs() < 1e-12);
    }

    #[test]
    fn curl_of_scalar_is_usage_error() {
        let s = SpectralField3::zeros(grid(8), 1, Space::Spectral);
        assert!(matches!(curl(&s), Err(Error::Usage(_))));
    }

    #[test]
    fn taylor_green_vorticity_closed_form() {
        let g = grid(32);
        let u = SpectralField3::from_fn(g, |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            [x.sin() * y.cos() * z.cos(), -x.cos() * y.sin() * z.cos(), 0.0]
        })
        .to_spectral();
        let w = curl(&u).unwrap();
        let expect = SpectralField3::from_fn(g, |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            [-x.cos() * y.sin() * z.sin(), -x.sin() * y.cos() * z.sin(), 2.0 * x.sin() * y.sin() * z.cos()]
        });
        assert!(max_diff_physical(&w, &expect) < 1e-10);
        let div = divergence(&w).unwrap();
        assert!(div.max_abs() < 1e-12);
    }

    #[test]
    fn leray_annihilates_gradients_and_keeps_solenoidal() {
        let g = grid(16);
        let grad = SpectralField3::from_fn(g, |p| [p[0].cos(), 0.0, 0.0]).to_spectral();
        assert!(leray_project(&grad).unwrap().max_abs() < 1e-14);

        let sol = SpectralField3::from_fn(g, |p| [p[1].sin(), p[0].sin(), 0.0]).to_spectral();
        assert!(leray_project(&sol).unwrap().max_relative_difference(&sol).unwrap() < 1e-12);
    }

    #[test]
    fn leray_splits_mixed_field() {
        // v = (sin y, sin x, 0) + ∇(cos x cos y), the gradient written out by hand.
        let g = grid(16);
        let v = SpectralField3::from_fn(g, |p| {
            let (x, y) = (p[0], p[1]);
            [y.sin() - x.sin() * y.cos(), x.sin() - x.cos() * y.sin(), 0.0]
        })
        .to_spectral();
        let expect = SpectralField3::from_fn(g, |p| [p[1].sin(), p[0].sin(), 0.0]);
        let pv = leray_project(&v).unwrap();
        assert!(max_diff_physical(&pv, &expect) < 1e-12);
        assert!(divergence_defect(&pv).unwrap() < 1e-12);
        let ppv = leray_project(&pv).unwrap();
        assert!(ppv.max_relative_difference(&pv).unwrap() < 1e-12);
    }

    #[test]
    fn biot_savart_single_mode_and_zero() {
        let g = grid(16);
        let w = SpectralField3::from_fn(g, |p| [0.0, 0.0, p[0].cos()]).to_spectral();
        let u = velocity_from_vorticity(&w).unwrap();
        let expect = SpectralField3::from_fn(g, |p| [0.0, p[0].sin(), 0.0]);
        assert!(max_diff_physical(&u, &expect) < 1e-12);

        let z = SpectralField3::zeros(g, 3, Space::Spectral);
        assert_eq!(velocity_from_vorticity(&z).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn biot_savart_rejects_mean_vorticity() {
        let g = grid(8);
        let w = SpectralField3::from_fn(g, |_| [0.0, 0.0, 1.0]).to_spectral();
        assert!(matches!(velocity_from_vorticity(&w), Err(Error::NonzeroMean(_))));
    }

    #[test]
    fn dealias_band_edges() {
        let g = grid(32);
        let low = SpectralField3::from_fn(g, |p| [p[0].cos()]).to_spectral();
        assert!(dealias(&low).unwrap().max_relative_difference(&low).unwrap() < 1e-15);
        let high = SpectralField3::from_fn(g, |p| [(12.0 * p[0]).cos()]).to_spectral();
        assert!(dealias(&high).unwrap().max_abs() < 1e-15);
        let edge = SpectralField3::from_fn(g, |p| [(10.0 * p[0]).cos()]).to_spectral();
        assert!(dealias(&edge).unwrap().max_relative_difference(&edge).unwrap() < 1e-14);
    }

    #[test]
    fn refine_interpolates_exactly() {
        let g = grid(8);
        let f = SpectralField3::from_fn(g, |p| [(p[0] + 2.0 * p[1]).sin() + (3.0 * p[2]).cos()]);
        let fine = refine(&f.to_spectral(), 2).unwrap().transform(Direction::Inverse).unwrap();
        let expect = SpectralField3::from_fn(*fine.grid(), |p| [(p[0] + 2.0 * p[1]).sin() + (3.0 * p[2]).cos()]);
        assert!(fine.sub(&expect).unwrap().max_abs() < 1e-12);
        // Nyquist content stays real after padding.
        let nyq = SpectralField3::from_fn(g, |p| [(4.0 * p[0]).cos()]).to_spectral();
        let up = refine(&nyq, 2).unwrap();
        assert!(up.hermitian_defect() < 1e-14);
        assert!((up.to_physical().component(0)[0].re - 1.0).abs() < 1e-12);
    }
}
