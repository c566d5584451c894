use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, box_length)^3` with `n` points per dimension.
///
/// Linear indices are x-fastest: `idx = ix + n * (iy + n * iz)`. In spectral
/// space the same index addresses the integer wavenumber `m(i)` with
/// `m(i) = i` for `i <= n/2` and `i - n` otherwise, so the lattice is
/// `{-n/2+1, ..., n/2}` and `i = n/2` is the Nyquist index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    n: usize,
    box_length: f64,
}

impl Grid3 {
    pub fn new(n: usize, box_length: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::usage(format!("grid size must be even and >= 8, got {n}")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::usage(format!("box length must be positive, got {box_length}")));
        }
        Ok(Self { n, box_length })
    }

    /// Grid on the standard `2π` box.
    pub fn periodic(n: usize) -> Result<Self> {
        Self::new(n, 2.0 * std::f64::consts::PI)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Total number of grid points, `n^3`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.box_length / self.n as f64
    }

    #[inline]
    pub fn volume(&self) -> f64 {
        self.box_length.powi(3)
    }

    /// Physical wavenumber per unit integer wavenumber, `2π / box_length`.
    #[inline]
    pub fn kscale(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.box_length
    }

    /// Signed integer wavenumber for a one-dimensional index.
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Physical wavenumbers along one axis, indexed like the data.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let s = self.kscale();
        (0..self.n).map(|i| self.mode(i) as f64 * s).collect()
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.n * (iy + self.n * iz)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    /// Index of the wavenumber `-k`.
    #[inline]
    pub fn negated(&self, idx: usize) -> usize {
        let n = self.n;
        let (x, y, z) = self.coords(idx);
        self.index((n - x) % n, (n - y) % n, (n - z) % n)
    }

    /// True when any component of the index sits on a Nyquist plane.
    #[inline]
    pub fn on_nyquist_plane(&self, idx: usize) -> bool {
        let (x, y, z) = self.coords(idx);
        self.is_nyquist(x) || self.is_nyquist(y) || self.is_nyquist(z)
    }

    /// Physical position of a grid point.
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (x, y, z) = self.coords(idx);
        let h = self.dx();
        [x as f64 * h, y as f64 * h, z as f64 * h]
    }

    /// Grid with the same box and `factor` times as many points per dimension.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::usage("refinement factor must be >= 1"));
        }
        Self::new(self.n * factor, self.box_length)
    }
}

/// Wavenumber lookup tables for a grid, built once per operation.
#[derive(Debug, Clone)]
pub(crate) struct Wavenumbers {
    pub k: Vec<f64>,
    pub nyq: usize,
}

impl Wavenumbers {
    pub fn new(grid: &Grid3) -> Self {
        Self { k: grid.wavenumbers(), nyq: grid.n() / 2 }
    }

    /// Visit every wavenumber as `(linear index, [kx, ky, kz], on_nyquist_plane)`.
    #[inline]
    pub fn for_each(&self, mut f: impl FnMut(usize, [f64; 3], bool)) {
        let n = self.k.len();
        let mut idx = 0;
        for iz in 0..n {
            for iy in 0..n {
                let nyq_yz = iy == self.nyq || iz == self.nyq;
                for ix in 0..n {
                    f(idx, [self.k[ix], self.k[iy], self.k[iz]], nyq_yz || ix == self.nyq);
                    idx += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_and_small_grids() {
        assert!(Grid3::periodic(7).is_err());
        assert!(Grid3::periodic(9).is_err());
        assert!(Grid3::periodic(6).is_err());
        assert!(Grid3::new(8, 0.0).is_err());
        assert!(Grid3::periodic(8).is_ok());
    }

    #[test]
    fn lattice_is_symmetric_except_nyquist() {
        let g = Grid3::periodic(16).unwrap();
        let modes: Vec<i64> = (0..16).map(|i| g.mode(i)).collect();
        assert_eq!(modes[8], 8);
        assert_eq!(*modes.iter().min().unwrap(), -7);
        for i in 1..16 {
            if i != 8 {
                assert_eq!(g.mode(i), -g.mode(16 - i));
            }
        }
    }

    #[test]
    fn negated_index_round_trips() {
        let g = Grid3::periodic(8).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.negated(g.negated(idx)), idx);
        }
    }
}
