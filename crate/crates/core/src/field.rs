use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{Fft3, C64};
use crate::grid::Grid3;

/// Which representation the coefficients of a [`SpectralField3`] hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Spectral,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Scalar or 3-vector field on a periodic grid.
///
/// Spectral data holds the coefficients `c_k` of `f(x) = Σ c_k e^{i k·x}`;
/// physical data holds point values (stored complex so that the imaginary
/// residue of a round trip stays observable).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField3 {
    grid: Grid3,
    space: Space,
    comps: Vec<Vec<C64>>,
}

impl SpectralField3 {
    pub fn zeros(grid: Grid3, ncomp: usize, space: Space) -> Self {
        assert!(ncomp == 1 || ncomp == 3, "fields have 1 or 3 components");
        Self { grid, space, comps: vec![vec![C64::default(); grid.len()]; ncomp] }
    }

    pub fn from_components(grid: Grid3, space: Space, comps: Vec<Vec<C64>>) -> Result<Self> {
        if comps.len() != 1 && comps.len() != 3 {
            return Err(Error::usage(format!("expected 1 or 3 components, got {}", comps.len())));
        }
        if let Some(c) = comps.iter().find(|c| c.len() != grid.len()) {
            return Err(Error::usage(format!(
                "component length {} does not match grid ({} points)",
                c.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, space, comps })
    }

    /// Physical field from real point values.
    pub fn from_real(grid: Grid3, comps: Vec<Vec<f64>>) -> Result<Self> {
        let comps = comps
            .into_iter()
            .map(|c| c.into_iter().map(|v| C64::new(v, 0.0)).collect())
            .collect();
        Self::from_components(grid, Space::Physical, comps)
    }

    /// Physical field sampled from a function of position.
    pub fn from_fn<const C: usize>(grid: Grid3, f: impl Fn([f64; 3]) -> [f64; C]) -> Self {
        assert!(C == 1 || C == 3, "fields have 1 or 3 components");
        let mut comps = vec![vec![C64::default(); grid.len()]; C];
        for idx in 0..grid.len() {
            let v = f(grid.position(idx));
            for (c, val) in v.iter().enumerate() {
                comps[c][idx] = C64::new(*val, 0.0);
            }
        }
        Self { grid, space: Space::Physical, comps }
    }

    #[inline]
    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    #[inline]
    pub fn space(&self) -> Space {
        self.space
    }

    #[inline]
    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    #[inline]
    pub fn is_vector(&self) -> bool {
        self.comps.len() == 3
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[C64] {
        &self.comps[c]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut [C64] {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<C64>] {
        &self.comps
    }

    /// Mutable access for in-place updates; callers must keep every
    /// component at `grid.len()` entries.
    pub(crate) fn components_mut(&mut self) -> &mut [Vec<C64>] {
        &mut self.comps
    }

    pub fn into_components(self) -> Vec<Vec<C64>> {
        self.comps
    }

    pub(crate) fn require_space(&self, space: Space, op: &str) -> Result<()> {
        if self.space != space {
            return Err(Error::usage(format!("{op} expects a {space:?} field, got {:?}", self.space)));
        }
        Ok(())
    }

    pub(crate) fn require_vector(&self, op: &str) -> Result<()> {
        if !self.is_vector() {
            return Err(Error::usage(format!("{op} expects a vector field, got a scalar")));
        }
        Ok(())
    }

    /// Forward (physical -> spectral) or inverse (spectral -> physical) transform.
    pub fn transform(&self, direction: Direction) -> Result<Self> {
        let plan = Fft3::get(self.grid.n());
        let mut out = self.clone();
        match direction {
            Direction::Forward => {
                self.require_space(Space::Physical, "forward transform")?;
                out.comps.iter_mut().for_each(|c| plan.forward(c));
                out.space = Space::Spectral;
            }
            Direction::Inverse => {
                self.require_space(Space::Spectral, "inverse transform")?;
                out.comps.iter_mut().for_each(|c| plan.inverse(c));
                out.space = Space::Physical;
            }
        }
        Ok(out)
    }

    /// Spectral representation, transforming if necessary.
    pub fn to_spectral(&self) -> Self {
        match self.space {
            Space::Spectral => self.clone(),
            Space::Physical => self.transform(Direction::Forward).expect("space checked"),
        }
    }

    /// Physical representation, transforming if necessary.
    pub fn to_physical(&self) -> Self {
        match self.space {
            Space::Physical => self.clone(),
            Space::Spectral => self.transform(Direction::Inverse).expect("space checked"),
        }
    }

    /// Real parts of the physical point values, one vector per component.
    ///
    /// Spectral inputs are assumed Hermitian; pairs of components share one
    /// complex FFT.
    pub fn real_values(&self) -> Vec<Vec<f64>> {
        match self.space {
            Space::Physical => self.comps.iter().map(|c| c.iter().map(|v| v.re).collect()).collect(),
            Space::Spectral => real_values_of(&self.comps.iter().map(|c| c.as_slice()).collect::<Vec<_>>(), self.grid.n()),
        }
    }

    /// `Σ_c Σ_k |c_k|^2` times the box volume, i.e. the squared L² norm.
    pub fn l2_norm_squared(&self) -> f64 {
        let g = &self.grid;
        match self.space {
            Space::Spectral => {
                g.volume() * self.comps.iter().flat_map(|c| c.iter()).map(|v| v.norm_sqr()).sum::<f64>()
            }
            Space::Physical => {
                g.volume() / g.len() as f64
                    * self.comps.iter().flat_map(|c| c.iter()).map(|v| v.norm_sqr()).sum::<f64>()
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_squared().sqrt()
    }

    /// Largest coefficient (or point value) magnitude over all components.
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flat_map(|c| c.iter()).fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Largest deviation from Hermitian symmetry `c(-k) = conj(c(k))`,
    /// relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        for c in &self.comps {
            for idx in 0..g.len() {
                worst = worst.max((c[idx] - c[g.negated(idx)].conj()).norm());
            }
        }
        worst / scale
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.comps.iter_mut().flat_map(|c| c.iter_mut()).for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.grid != other.grid || self.space != other.space || self.ncomp() != other.ncomp() {
            return Err(Error::usage("field shapes differ"));
        }
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Ok(Self { grid: self.grid, space: self.space, comps })
    }

    /// Largest coefficient difference relative to the larger of the two fields.
    pub fn max_relative_difference(&self, other: &Self) -> Result<f64> {
        let diff = self.sub(other)?.max_abs();
        let scale = self.max_abs().max(other.max_abs());
        Ok(if scale == 0.0 { diff } else { diff / scale })
    }
}

/// Inverse-transform Hermitian spectra to real values, pairing components.
pub(crate) fn real_values_of(comps: &[&[C64]], n: usize) -> Vec<Vec<f64>> {
    real_values_masked(comps, n, None)
}

/// As [`real_values_of`], for spectra supported inside `keep³`.
pub(crate) fn real_values_masked(comps: &[&[C64]], n: usize, keep: Option<&[bool]>) -> Vec<Vec<f64>> {
    let plan = Fft3::get(n);
    let mut out = Vec::with_capacity(comps.len());
    for pair in comps.chunks(2) {
        match pair {
            [a, b] => {
                let (x, y) = plan.inverse_real_pair_masked(a, b, keep);
                out.push(x);
                out.push(y);
            }
            [a] => {
                let zero = vec![C64::default(); a.len()];
                out.push(plan.inverse_real_pair_masked(a, &zero, keep).0);
            }
            _ => unreachable!(),
        }
    }
    out
}

/// Forward-transform real fields, pairing them through one complex FFT;
/// coefficients outside `keep³` are dropped.
pub(crate) fn spectra_masked(values: &[&[f64]], n: usize, keep: Option<&[bool]>) -> Vec<Vec<C64>> {
    let plan = Fft3::get(n);
    let mut out = Vec::with_capacity(values.len());
    for pair in values.chunks(2) {
        match pair {
            [a, b] => {
                let (x, y) = plan.forward_real_pair_masked(a, b, keep);
                out.push(x);
                out.push(y);
            }
            [a] => {
                let zero = vec![0.0; a.len()];
                out.push(plan.forward_real_pair_masked(a, &zero, keep).0);
            }
            _ => unreachable!(),
        }
    }
    out
}
