//! Three-dimensional complex FFTs on cubic grids.
//!
//! Normalization: the forward transform carries the `1/n^3` factor, so a
//! field `f(x) = Σ_k c_k e^{i k·x}` maps to its coefficients `c_k` and the
//! inverse is the plain sum. `cos x` on any grid has coefficient `1/2` at
//! `k = (±1, 0, 0)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub type C64 = Complex64;

/// Lines per rayon task in the contiguous 1D pass.
const LINES_PER_TASK: usize = 64;

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

fn plan_cache() -> &'static Mutex<HashMap<usize, Arc<Fft3>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Fft3 {
    /// Shared plan for an `n^3` grid.
    pub fn get(n: usize) -> Arc<Fft3> {
        let mut cache = plan_cache().lock().expect("fft plan cache poisoned");
        cache
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Fft3 {
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// In-place forward transform, normalized by `1/n^3`.
    pub fn forward(&self, data: &mut [C64]) {
        self.transform(data, &self.forward);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        data.par_chunks_mut(self.n * self.n).for_each(|p| p.iter_mut().for_each(|c| *c *= scale));
    }

    /// In-place inverse transform (unnormalized sum over modes).
    pub fn inverse(&self, data: &mut [C64]) {
        self.transform(data, &self.inverse);
    }

    /// Inverse transform of two Hermitian spectra with a single complex FFT.
    ///
    /// Both inputs must describe real fields; their physical values come back
    /// as the real and imaginary parts of one transform. With `keep`, the
    /// spectra must vanish outside `keep × keep × keep`.
    pub fn inverse_real_pair_masked(&self, a: &[C64], b: &[C64], keep: Option<&[bool]>) -> (Vec<f64>, Vec<f64>) {
        let mut z: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| C64::new(x.re - y.im, x.im + y.re)).collect();
        match keep {
            Some(k) => self.inverse_pruned(&mut z, k),
            None => self.inverse(&mut z),
        }
        let re = z.iter().map(|c| c.re).collect();
        let im = z.iter().map(|c| c.im).collect();
        (re, im)
    }

    pub fn inverse_real_pair(&self, a: &[C64], b: &[C64]) -> (Vec<f64>, Vec<f64>) {
        self.inverse_real_pair_masked(a, b, None)
    }

    /// Inverse transform of a single Hermitian spectrum, returning real values.
    pub fn inverse_real(&self, a: &[C64]) -> Vec<f64> {
        let mut z = a.to_vec();
        self.inverse(&mut z);
        z.into_iter().map(|c| c.re).collect()
    }

    /// Forward transform of two real fields with one complex FFT. With
    /// `keep`, coefficients outside `keep × keep × keep` are returned as zero.
    pub fn forward_real_pair_masked(&self, f: &[f64], g: &[f64], keep: Option<&[bool]>) -> (Vec<C64>, Vec<C64>) {
        let n = self.n;
        let mut z: Vec<C64> = f.iter().zip(g).map(|(&x, &y)| C64::new(x, y)).collect();
        match keep {
            Some(k) => self.forward_pruned(&mut z, k),
            None => self.forward(&mut z),
        }
        let len = z.len();
        let mut fa = vec![C64::default(); len];
        let mut ga = vec![C64::default(); len];
        let neg = |i: usize| if i == 0 { 0 } else { n - i };
        let mut idx = 0;
        for iz in 0..n {
            for iy in 0..n {
                let row = n * (neg(iy) + n * neg(iz));
                for ix in 0..n {
                    let zk = z[idx];
                    let zm = z[row + neg(ix)].conj();
                    fa[idx] = (zk + zm) * 0.5;
                    ga[idx] = (zk - zm) * C64::new(0.0, -0.5);
                    idx += 1;
                }
            }
        }
        (fa, ga)
    }

    pub fn forward_real_pair(&self, f: &[f64], g: &[f64]) -> (Vec<C64>, Vec<C64>) {
        self.forward_real_pair_masked(f, g, None)
    }

    /// Forward transform of a single real field.
    pub fn forward_real(&self, f: &[f64]) -> Vec<C64> {
        let mut z: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.forward(&mut z);
        z
    }

    /// Inverse transform of a spectrum supported inside `keep × keep × keep`,
    /// skipping the 1D lines that are identically zero.
    pub fn inverse_pruned(&self, data: &mut [C64], keep: &[bool]) {
        self.transform_pruned(data, &self.inverse, Some(keep), true);
    }

    /// Unnormalized forward transform that only computes the coefficients
    /// inside `keep × keep × keep`; the rest of `data` is left undefined.
    pub(crate) fn forward_pruned_unscaled(&self, data: &mut [C64], keep: &[bool]) {
        self.transform_pruned(data, &self.forward, Some(keep), false);
    }

    /// Forward transform whose output is only wanted inside
    /// `keep × keep × keep`; everything outside is set to zero.
    pub fn forward_pruned(&self, data: &mut [C64], keep: &[bool]) {
        let n = self.n;
        self.transform_pruned(data, &self.forward, Some(keep), false);
        let scale = 1.0 / (n * n * n) as f64;
        data.par_chunks_mut(n * n).enumerate().for_each(|(z, plane)| {
            for (y, row) in plane.chunks_mut(n).enumerate() {
                let live = keep[z] && keep[y];
                for (x, v) in row.iter_mut().enumerate() {
                    *v = if live && keep[x] { *v * scale } else { C64::default() };
                }
            }
        });
    }

    fn transform(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        self.transform_pruned(data, plan, None, true);
    }

    /// Separable 3D transform. With a `keep` mask, lines that are zero on
    /// input (inverse order z, y, x) or unwanted on output (forward order
    /// x, y, z) are skipped.
    fn transform_pruned(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>, keep: Option<&[bool]>, z_first: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "buffer does not match fft size");
        let passes: [usize; 3] = if z_first { [2, 1, 0] } else { [0, 1, 2] };
        for axis in passes {
            // A line along `axis` is needed only if the modes on the axes
            // not yet transformed (or already pruned) lie in the band.
            let line_live = |x: usize, y: usize| -> bool {
                let Some(k) = keep else { return true };
                match (axis, z_first) {
                    (2, _) => k[x] && k[y],
                    (1, _) => k[x],
                    _ => true,
                }
            };
            match axis {
                0 => contiguous_pass(plan, data, n),
                1 => {
                    data.par_chunks_mut(n * n).for_each(|plane| strided_pass(plan, plane, n, n, &|x| line_live(x % n, 0)));
                }
                _ => strided_pass(plan, data, n, n * n, &|xy| line_live(xy % n, xy / n)),
            }
        }
    }
}

fn contiguous_pass(plan: &Arc<dyn Fft<f64>>, data: &mut [C64], n: usize) {
    let scratch_len = plan.get_inplace_scratch_len();
    data.par_chunks_mut(n * LINES_PER_TASK).for_each_init(
        || vec![C64::default(); scratch_len],
        |scratch, chunk| plan.process_with_scratch(chunk, scratch),
    );
}

/// Lines gathered together in the strided passes.
const BLOCK: usize = 16;

/// Transform the `stride` lines of `chunk` (length `n * stride`) whose
/// elements sit `stride` apart. Lines for which `live(offset)` is false are
/// left untouched.
fn strided_pass(plan: &Arc<dyn Fft<f64>>, chunk: &mut [C64], n: usize, stride: usize, live: &(dyn Fn(usize) -> bool + Sync)) {
    let scratch_len = plan.get_inplace_scratch_len();
    let mut buf = vec![C64::default(); n * BLOCK];
    let mut scratch = vec![C64::default(); scratch_len];
    let mut offsets = Vec::with_capacity(BLOCK);
    let mut start = 0;
    while start < stride {
        let end = (start + BLOCK).min(stride);
        offsets.clear();
        offsets.extend((start..end).filter(|&o| live(o)));
        if !offsets.is_empty() {
            let lines = offsets.len();
            for k in 0..n {
                let row = &chunk[k * stride..];
                for (j, &o) in offsets.iter().enumerate() {
                    buf[j * n + k] = row[o];
                }
            }
            plan.process_with_scratch(&mut buf[..lines * n], &mut scratch);
            for k in 0..n {
                let row = &mut chunk[k * stride..];
                for (j, &o) in offsets.iter().enumerate() {
                    row[o] = buf[j * n + k];
                }
            }
        }
        start = end;
    }
}
