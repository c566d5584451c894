//! Initial velocity fields. All are returned spectral, divergence-free,
//! dealiased, with zero mean and zero Nyquist planes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fft::C64;
use crate::field::{Space, SpectralField3};
use crate::grid::Grid3;
use crate::ops;

fn finish(u: SpectralField3) -> SpectralField3 {
    let mut u = ops::zero_nyquist(&u).expect("spectral");
    ops::leray_in_place(&mut u);
    ops::dealias_in_place(&mut u);
    for c in 0..3 {
        u.component_mut(c)[0] = C64::default();
    }
    u
}

/// `(sin x cos y cos z, -cos x sin y cos z, 0)` in units of the box period.
pub fn taylor_green(grid: Grid3) -> SpectralField3 {
    let a = grid.kscale();
    finish(
        SpectralField3::from_fn(grid, |p| {
            let (x, y, z) = (a * p[0], a * p[1], a * p[2]);
            [x.sin() * y.cos() * z.cos(), -x.cos() * y.sin() * z.cos(), 0.0]
        })
        .to_spectral(),
    )
}

/// Arnold-Beltrami-Childress flow
/// `(A sin z + C cos y, B sin x + A cos z, C sin y + B cos x)`.
pub fn abc(grid: Grid3, a: f64, b: f64, c: f64) -> SpectralField3 {
    let s = grid.kscale();
    finish(
        SpectralField3::from_fn(grid, |p| {
            let (x, y, z) = (s * p[0], s * p[1], s * p[2]);
            [a * z.sin() + c * y.cos(), b * x.sin() + a * z.cos(), c * y.sin() + b * x.cos()]
        })
        .to_spectral(),
    )
}

/// Seeded Gaussian field supported on integer modes with
/// `band.0 <= |m| <= band.1`, made Hermitian and solenoidal, then scaled to
/// root-mean-square velocity `amplitude`.
pub fn random_bandlimited(grid: Grid3, seed: u64, band: (f64, f64), amplitude: f64) -> Result<SpectralField3> {
    let (lo, hi) = band;
    if !(lo >= 0.0 && hi >= lo) {
        return Err(Error::usage(format!("invalid band [{lo}, {hi}]")));
    }
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::usage(format!("amplitude must be positive, got {amplitude}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = SpectralField3::zeros(grid, 3, Space::Spectral);
    let n = grid.n();
    for idx in 0..grid.len() {
        let (ix, iy, iz) = grid.coords(idx);
        let m = [grid.mode(ix), grid.mode(iy), grid.mode(iz)];
        let r = ((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64).sqrt();
        for c in 0..3 {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            if r >= lo && r <= hi && r > 0.0 {
                u.component_mut(c)[idx] = C64::new(re, im);
            }
        }
    }
    for c in 0..3 {
        let data = u.component(c).to_vec();
        let out = u.component_mut(c);
        for idx in 0..data.len() {
            out[idx] = (data[idx] + data[grid.negated(idx)].conj()) * 0.5;
        }
    }
    let u = finish(u);
    let rms = (u.l2_norm_squared() / grid.volume()).sqrt();
    if rms == 0.0 {
        return Err(Error::usage(format!("band [{lo}, {hi}] holds no resolved modes on an n = {n} grid")));
    }
    Ok(u.scaled(amplitude / rms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn taylor_green_energy_closed_form() {
        let u = taylor_green(Grid3::periodic(16).unwrap());
        assert!((u.l2_norm_squared() - 2.0 * PI.powi(3)).abs() < 1e-10);
        assert!(ops::divergence_defect(&u).unwrap() < 1e-12);
    }

    #[test]
    fn abc_is_beltrami() {
        let g = Grid3::periodic(16).unwrap();
        let u = abc(g, 1.0, 1.0, 1.0);
        let w = ops::curl(&u).unwrap();
        assert!(w.max_relative_difference(&u).unwrap() < 1e-12);
    }

    #[test]
    fn random_field_properties() {
        let g = Grid3::periodic(16).unwrap();
        let u = random_bandlimited(g, 42, (1.0, 4.0), 1.0).unwrap();
        assert!(u.hermitian_defect() < 1e-14);
        assert!(ops::divergence_defect(&u).unwrap() < 1e-12);
        assert!(((u.l2_norm_squared() / g.volume()).sqrt() - 1.0).abs() < 1e-12);
        assert_eq!(u, random_bandlimited(g, 42, (1.0, 4.0), 1.0).unwrap());
        assert_ne!(u, random_bandlimited(g, 43, (1.0, 4.0), 1.0).unwrap());
        assert!(random_bandlimited(g, 1, (9.0, 10.0), 1.0).is_err());
        assert!(random_bandlimited(g, 1, (3.0, 2.0), 1.0).is_err());
    }
}
