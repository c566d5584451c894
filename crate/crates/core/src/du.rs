//! Velocity gradient `Du`, its symmetric/antisymmetric split, and the
//! Fourier-multiplier form of `Du` in terms of the vorticity.
//!
//! Storage convention: entry `(i, j)` holds `∂_i u_j`. Acting on a vector,
//! the tensor contracts the derivative index, `(Du v)_j = Σ_i v_i ∂_i u_j`,
//! i.e. `Du v = (v·∇) u`. With this action the antisymmetric part satisfies
//! `Du⁻ v = ½ ω ∧ v`.
//!
//! The multiplier path is assembled from the two coefficient matrices `Ĝ`
//! and `Ĥ` (prefactor `1/(2|ξ|²)`), stored below term by term exactly as
//! they are conventionally printed. Algebraically
//! `(Ĝ + Ĥ)_{ij} = ξ_j (ξ ∧ ω̂)_i / (2|ξ|²)`, which is `-½ (D̂u)ᵀ`; the
//! gradient is therefore recovered as `D̂u = -2 (Ĝ + Ĥ)ᵀ`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft::C64;
use crate::field::{real_values_of, Space, SpectralField3};
use crate::grid::{Grid3, Wavenumbers};
use crate::ops;

/// `coef · ξ_a ξ_b · ω̂_comp` (indices zero-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierTerm {
    pub coef: f64,
    pub a: usize,
    pub b: usize,
    pub comp: usize,
}

const fn t(coef: f64, a: usize, b: usize, comp: usize) -> MultiplierTerm {
    MultiplierTerm { coef, a, b, comp }
}

/// Numerator entries of `Ĝ(ξ)`; the full entry is the sum divided by `2|ξ|²`.
pub const G_TERMS: [[&[MultiplierTerm]; 3]; 3] = [
    [&[t(1.0, 0, 1, 2), t(-1.0, 0, 2, 1)], &[t(-1.0, 1, 2, 1)], &[t(1.0, 1, 2, 2)]],
    [&[t(1.0, 0, 2, 0)], &[t(1.0, 1, 2, 0), t(-1.0, 0, 1, 2)], &[t(-1.0, 0, 2, 2)]],
    [&[t(-1.0, 0, 1, 0)], &[t(1.0, 0, 1, 1)], &[t(1.0, 0, 2, 1), t(-1.0, 1, 2, 0)]],
];

/// Numerator entries of `Ĥ(ξ)`; the full entry is the sum divided by `2|ξ|²`.
pub const H_TERMS: [[&[MultiplierTerm]; 3]; 3] = [
    [&[], &[t(1.0, 1, 1, 2)], &[t(-1.0, 2, 2, 1)]],
    [&[t(-1.0, 0, 0, 2)], &[], &[t(1.0, 2, 2, 0)]],
    [&[t(1.0, 0, 0, 1)], &[t(-1.0, 1, 1, 0)], &[]],
];

fn printed_terms(i: usize, j: usize) -> impl Iterator<Item = &'static MultiplierTerm> {
    G_TERMS[i][j].iter().chain(H_TERMS[i][j].iter())
}

/// 3×3 tensor of scalar fields, entry `(i, j)` = `∂_i u_j` for a gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTensorField {
    grid: Grid3,
    entries: Vec<SpectralField3>,
}

impl GradientTensorField {
    pub fn from_entries(grid: Grid3, entries: Vec<SpectralField3>) -> Result<Self> {
        if entries.len() != 9 {
            return Err(Error::usage(format!("tensor needs 9 entries, got {}", entries.len())));
        }
        for e in &entries {
            if e.is_vector() || *e.grid() != grid || e.space() != Space::Spectral {
                return Err(Error::usage("tensor entries must be spectral scalar fields on one grid"));
            }
        }
        Ok(Self { grid, entries })
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self { grid, entries: vec![SpectralField3::zeros(grid, 1, Space::Spectral); 9] }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> &SpectralField3 {
        &self.entries[3 * i + j]
    }

    fn entry_data_mut(&mut self, i: usize, j: usize) -> &mut [C64] {
        self.entries[3 * i + j].component_mut(0)
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                entries.push(self.entry(j, i).clone());
            }
        }
        Self { grid: self.grid, entries }
    }

    /// Trace field `Σ_i ∂_i u_i` (the divergence for a gradient tensor).
    pub fn trace(&self) -> SpectralField3 {
        let mut out = self.entry(0, 0).clone();
        for i in 1..3 {
            for (a, b) in out.component_mut(0).iter_mut().zip(self.entry(i, i).component(0)) {
                *a += b;
            }
        }
        out
    }

    /// Frobenius L² norm, `(Σ_ij ‖T_ij‖²_{L²})^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.l2_norm_squared()).sum::<f64>().sqrt()
    }

    /// Largest entrywise coefficient deviation relative to the larger tensor.
    pub fn max_relative_difference(&self, other: &Self) -> Result<f64> {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (a, b) in self.entries.iter().zip(&other.entries) {
            diff = diff.max(a.sub(b)?.max_abs());
            scale = scale.max(a.max_abs()).max(b.max_abs());
        }
        Ok(if scale == 0.0 { diff } else { diff / scale })
    }

    /// Point values on a grid `upsample` times finer, as `[entry][point]`
    /// with entries in row-major order.
    pub fn physical_values(&self, upsample: usize) -> Result<Vec<Vec<f64>>> {
        let refined: Vec<SpectralField3> =
            self.entries.iter().map(|e| ops::refine(e, upsample)).collect::<Result<_>>()?;
        let n = refined[0].grid().n();
        let comps: Vec<&[C64]> = refined.iter().map(|e| e.component(0)).collect();
        Ok(real_values_of(&comps, n))
    }

    /// `max_x ‖T(x)‖₂` (pointwise operator 2-norm) on the upsampled grid.
    pub fn linf_operator_norm(&self, upsample: usize) -> Result<f64> {
        let vals = self.physical_values(upsample)?;
        Ok(max_pointwise_operator_norm(&vals))
    }
}

pub(crate) fn max_pointwise_operator_norm(vals: &[Vec<f64>]) -> f64 {
    let npts = vals[0].len();
    let mut worst: f64 = 0.0;
    for p in 0..npts {
        let m = [
            [vals[0][p], vals[1][p], vals[2][p]],
            [vals[3][p], vals[4][p], vals[5][p]],
            [vals[6][p], vals[7][p], vals[8][p]],
        ];
        worst = worst.max(spectral_norm3(&m));
    }
    worst
}

/// Eigenvalues of a symmetric 3×3 matrix in descending order (cyclic Jacobi,
/// accurate also for repeated eigenvalues).
pub fn symmetric_eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let mut m = *a;
    for _ in 0..32 {
        let off = m[0][1].abs() + m[0][2].abs() + m[1][2].abs();
        let diag = m[0][0].abs() + m[1][1].abs() + m[2][2].abs();
        if off == 0.0 || off <= f64::EPSILON * 1e-3 * diag {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if m[p][q] == 0.0 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
            let tn = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let tn = if theta == 0.0 { 1.0 } else { tn };
            let c = 1.0 / (tn * tn + 1.0).sqrt();
            let s = tn * c;
            // m <- Jᵀ m J with the rotation in the (p, q) plane.
            for k in 0..3 {
                let (mkp, mkq) = (m[k][p], m[k][q]);
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let (mpk, mqk) = (m[p][k], m[q][k]);
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
        }
    }
    let mut d = [m[0][0], m[1][1], m[2][2]];
    d.sort_by(|x, y| y.total_cmp(x));
    d
}

/// Largest singular value of a 3×3 matrix.
pub fn spectral_norm3(m: &[[f64; 3]; 3]) -> f64 {
    let mut mtm = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            mtm[i][j] = (0..3).map(|k| m[k][i] * m[k][j]).sum();
        }
    }
    symmetric_eigenvalues(&mtm)[0].max(0.0).sqrt()
}

/// `Du` by direct differentiation: entry `(i, j)` has coefficients `i k_i û_j`.
pub fn du_by_differentiation(u: &SpectralField3) -> Result<GradientTensorField> {
    u.require_space(Space::Spectral, "du_by_differentiation")?;
    u.require_vector("du_by_differentiation")?;
    let mut entries = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            let comp = SpectralField3::from_components(*u.grid(), Space::Spectral, vec![u.component(j).to_vec()])?;
            entries.push(ops::derivative(&comp, i)?);
        }
    }
    GradientTensorField::from_entries(*u.grid(), entries)
}

/// `Du` from the vorticity through the `Ĝ + Ĥ` multipliers.
pub fn du_from_vorticity(w: &SpectralField3) -> Result<GradientTensorField> {
    w.require_space(Space::Spectral, "du_from_vorticity")?;
    w.require_vector("du_from_vorticity")?;
    ops::check_zero_mean(w)?;
    let grid = *w.grid();
    let wn = Wavenumbers::new(&grid);
    let mut out = GradientTensorField::zeros(grid);
    let wc = [w.component(0), w.component(1), w.component(2)];
    for i in 0..3 {
        for j in 0..3 {
            // D̂u_{ij} = -2 (Ĝ + Ĥ)_{ji} = -(1/|ξ|²) Σ terms of printed entry (j, i).
            let terms: Vec<MultiplierTerm> = printed_terms(j, i).copied().collect();
            let dst = out.entry_data_mut(i, j);
            wn.for_each(|idx, k, nyq| {
                let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                if nyq || k2 == 0.0 {
                    return;
                }
                let mut acc = C64::default();
                for term in &terms {
                    acc += wc[term.comp][idx] * (term.coef * k[term.a] * k[term.b]);
                }
                dst[idx] = -acc / k2;
            });
        }
    }
    Ok(out)
}

/// `(Du⁺, Du⁻)` with `Du± = ½(Du ± Duᵀ)`.
pub fn split_symmetric(d: &GradientTensorField) -> (GradientTensorField, GradientTensorField) {
    let mut sym = d.clone();
    let mut anti = d.clone();
    for i in 0..3 {
        for j in 0..3 {
            let a = d.entry(i, j).component(0);
            let b = d.entry(j, i).component(0);
            let s = sym.entry_data_mut(i, j);
            for idx in 0..a.len() {
                s[idx] = (a[idx] + b[idx]) * 0.5;
            }
            let m = anti.entry_data_mut(i, j);
            for idx in 0..a.len() {
                m[idx] = (a[idx] - b[idx]) * 0.5;
            }
        }
    }
    (sym, anti)
}

/// Seed for the sample points of [`verify_antisymmetric_identity`].
pub const WEDGE_SAMPLE_SEED: u64 = 0x5eed_d0d0;

/// Regularizer in the wedge-identity residual denominator, relative to
/// `max|ω| |v|`; keeps round-off at vorticity nulls from dominating.
pub const WEDGE_EPS_REL: f64 = 1e-6;

/// Largest relative residual of `Du⁻(x) v = ½ ω(x) ∧ v` over `samples`
/// random grid points and random vectors `v`.
pub fn verify_antisymmetric_identity(u: &SpectralField3, samples: usize) -> Result<f64> {
    u.require_space(Space::Spectral, "verify_antisymmetric_identity")?;
    u.require_vector("verify_antisymmetric_identity")?;
    let (_, anti) = split_symmetric(&du_by_differentiation(u)?);
    let w = ops::curl(u)?;
    let anti_vals = anti.physical_values(1)?;
    let w_vals = w.real_values();
    let npts = u.grid().len();
    let wmax = (0..npts)
        .map(|p| (w_vals[0][p].powi(2) + w_vals[1][p].powi(2) + w_vals[2][p].powi(2)).sqrt())
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(WEDGE_SAMPLE_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let p = rng.random_range(0..npts);
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let vn = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let om = [w_vals[0][p], w_vals[1][p], w_vals[2][p]];
        let half_wedge = [
            0.5 * (om[1] * v[2] - om[2] * v[1]),
            0.5 * (om[2] * v[0] - om[0] * v[2]),
            0.5 * (om[0] * v[1] - om[1] * v[0]),
        ];
        let mut res = 0.0;
        for j in 0..3 {
            let dv: f64 = (0..3).map(|i| v[i] * anti_vals[3 * i + j][p]).sum();
            res += (dv - half_wedge[j]).powi(2);
        }
        let om_n = (om[0] * om[0] + om[1] * om[1] + om[2] * om[2]).sqrt();
        let denom = om_n * vn + WEDGE_EPS_REL * wmax * vn;
        if denom > 0.0 {
            worst = worst.max(res.sqrt() / denom);
        } else if res > 0.0 {
            worst = f64::INFINITY;
        }
    }
    Ok(worst)
}

/// Quadratic angular symbol `σ(ŷ) = ŷᵀ Q ŷ` on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularSymbol {
    pub q: [[f64; 3]; 3],
}

impl AngularSymbol {
    pub fn zero() -> Self {
        Self { q: [[0.0; 3]; 3] }
    }

    #[inline]
    pub fn eval(&self, y: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                s += self.q[a][b] * y[a] * y[b];
            }
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().flatten().all(|&v| v == 0.0)
    }

    fn add_term(&mut self, coef: f64, a: usize, b: usize) {
        self.q[a][b] += 0.5 * coef;
        self.q[b][a] += 0.5 * coef;
    }
}

impl fmt::Display for AngularSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for a in 0..3 {
            if self.q[a][a] != 0.0 {
                parts.push(format!("{:+} y{}^2", self.q[a][a], a + 1));
            }
        }
        for a in 0..3 {
            for b in a + 1..3 {
                let c = self.q[a][b] + self.q[b][a];
                if c != 0.0 {
                    parts.push(format!("{:+} y{}y{}", c, a + 1, b + 1));
                }
            }
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" "))
        }
    }
}

/// Angular symbol of the kernel mapping `ω_ℓ` to `Du⁺_{ij}`:
/// `(D̂u⁺)_{ij} = Σ_ℓ σ_ij^ℓ(ξ̂) ω̂_ℓ`, read off the symmetrized `Ĝ + Ĥ`.
pub fn kernel_symbol(i: usize, j: usize, l: usize) -> Result<AngularSymbol> {
    if i > 2 || j > 2 || l > 2 {
        return Err(Error::usage(format!("unknown kernel component ({i},{j},{l})")));
    }
    let mut s = AngularSymbol::zero();
    // Du⁺ = -2 (Ĝ+Ĥ)⁺ with the 1/(2|ξ|²) prefactor: coefficient -½ per entry.
    for term in printed_terms(i, j).chain(printed_terms(j, i)) {
        if term.comp == l {
            s.add_term(-0.5 * term.coef, term.a, term.b);
        }
    }
    Ok(s)
}

/// One row of the kernel transcription table.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolEntry {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub symbol: AngularSymbol,
}

impl fmt::Display for SymbolEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Du+[{},{}] <- w{}: {}", self.i + 1, self.j + 1, self.l + 1, self.symbol)
    }
}

/// Every nonzero `σ_ij^ℓ` for `i <= j`, for review.
pub fn transcription_table() -> Vec<SymbolEntry> {
    let mut rows = Vec::new();
    for i in 0..3 {
        for j in i..3 {
            for l in 0..3 {
                let symbol = kernel_symbol(i, j, l).expect("indices in range");
                if !symbol.is_zero() {
                    rows.push(SymbolEntry { i, j, l, symbol });
                }
            }
        }
    }
    rows
}

/// Angular symbols whose spherical mean can be checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolId {
    /// Entry `(a, b)` of `σ(ŷ) = 3 ŷ⊗ŷ − 1`.
    Base { a: usize, b: usize },
    /// Kernel symbol `σ_ij^ℓ`.
    Kernel { i: usize, j: usize, l: usize },
    /// Monomial `ŷ_a ŷ_b`, `a ≠ b`.
    Product { a: usize, b: usize },
    /// `ŷ_a² − ŷ_b²`, `a ≠ b`.
    SquareDifference { a: usize, b: usize },
}

impl SymbolId {
    pub fn symbol(&self) -> Result<AngularSymbol> {
        let bad = || Error::usage(format!("unknown angular symbol {self:?}"));
        let mut s = AngularSymbol::zero();
        match *self {
            SymbolId::Base { a, b } => {
                if a > 2 || b > 2 {
                    return Err(bad());
                }
                s.add_term(3.0, a, b);
                if a == b {
                    for c in 0..3 {
                        s.q[c][c] -= 1.0;
                    }
                }
            }
            SymbolId::Kernel { i, j, l } => return kernel_symbol(i, j, l),
            SymbolId::Product { a, b } => {
                if a > 2 || b > 2 || a == b {
                    return Err(bad());
                }
                s.add_term(1.0, a, b);
            }
            SymbolId::SquareDifference { a, b } => {
                if a > 2 || b > 2 || a == b {
                    return Err(bad());
                }
                s.q[a][a] += 1.0;
                s.q[b][b] -= 1.0;
            }
        }
        Ok(s)
    }

    /// All symbols checked by the verification suite.
    pub fn all() -> Vec<SymbolId> {
        let mut ids = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                ids.push(SymbolId::Base { a, b });
                if a != b {
                    ids.push(SymbolId::Product { a, b });
                    ids.push(SymbolId::SquareDifference { a, b });
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    ids.push(SymbolId::Kernel { i, j, l });
                }
            }
        }
        ids
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; order];
    let mut w = vec![0.0; order];
    for i in 0..order {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if order == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = order as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Product rule on `S²`: Gauss-Legendre in `cos θ` times `2·order` equispaced
/// azimuths. Exact for polynomials of degree `< 2·order`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn new(order: usize) -> Self {
        let (mu, wmu) = gauss_legendre(order);
        let nphi = 2 * order;
        let dphi = 2.0 * std::f64::consts::PI / nphi as f64;
        let mut nodes = Vec::with_capacity(order * nphi);
        let mut weights = Vec::with_capacity(order * nphi);
        for (m, wm) in mu.iter().zip(&wmu) {
            let st = (1.0 - m * m).sqrt();
            for p in 0..nphi {
                let phi = (p as f64 + 0.5) * dphi;
                nodes.push([st * phi.cos(), st * phi.sin(), *m]);
                weights.push(wm * dphi);
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(1/4π) ∫_{S²} f dμ`.
    pub fn mean(&self, f: impl Fn([f64; 3]) -> f64) -> f64 {
        let total: f64 = self.nodes.iter().zip(&self.weights).map(|(y, w)| w * f(*y)).sum();
        total / (4.0 * std::f64::consts::PI)
    }
}

/// Minimum number of quadrature nodes accepted by [`spherical_mean_sigma`].
pub const MIN_SPHERE_NODES: usize = 1000;

/// Spherical mean of an angular symbol by product quadrature.
pub fn spherical_mean_sigma(id: SymbolId, quadrature_order: usize) -> Result<f64> {
    let quad = SphereQuadrature::new(quadrature_order);
    if quad.len() < MIN_SPHERE_NODES {
        return Err(Error::usage(format!(
            "quadrature order {quadrature_order} gives {} nodes, need >= {MIN_SPHERE_NODES}",
            quad.len()
        )));
    }
    let symbol = id.symbol()?;
    Ok(quad.mean(|y| symbol.eval(y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{curl, velocity_from_vorticity};

    fn tg(g: Grid3) -> SpectralField3 {
        SpectralField3::from_fn(g, |p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            [x.sin() * y.cos() * z.cos(), -x.cos() * y.sin() * z.cos(), 0.0]
        })
        .to_spectral()
    }

    #[test]
    fn single_mode_gradient() {
        let g = Grid3::periodic(16).unwrap();
        let u = SpectralField3::from_fn(g, |p| [0.0, p[0].sin(), 0.0]).to_spectral();
        let d = du_by_differentiation(&u).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = d.entry(i, j).to_physical();
                if (i, j) == (0, 1) {
                    let expect = SpectralField3::from_fn(g, |p| [p[0].cos()]);
                    assert!(e.sub(&expect).unwrap().max_abs() < 1e-12);
                } else {
                    assert!(e.max_abs() < 1e-14, "entry ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn multiplier_path_single_mode() {
        let g = Grid3::periodic(16).unwrap();
        let w = SpectralField3::from_fn(g, |p| [0.0, 0.0, p[0].cos()]).to_spectral();
        let d = du_from_vorticity(&w).unwrap();
        let direct = du_by_differentiation(&velocity_from_vorticity(&w).unwrap()).unwrap();
        assert!(d.max_relative_difference(&direct).unwrap() < 1e-14);
        let e = d.entry(0, 1).to_physical();
        let expect = SpectralField3::from_fn(g, |p| [p[0].cos()]);
        assert!(e.sub(&expect).unwrap().max_abs() < 1e-12);
        assert_eq!(du_from_vorticity(&SpectralField3::zeros(g, 3, Space::Spectral)).unwrap(), GradientTensorField::zeros(g));
    }

    #[test]
    fn taylor_green_gradient_and_deformation() {
        let g = Grid3::periodic(16).unwrap();
        let d = du_by_differentiation(&tg(g)).unwrap();
        // ∂_i u_j written out by hand.
        let analytic = |p: [f64; 3]| -> [[f64; 3]; 3] {
            let (sx, cx, sy, cy, sz, cz) = (p[0].sin(), p[0].cos(), p[1].sin(), p[1].cos(), p[2].sin(), p[2].cos());
            [
                [cx * cy * cz, sx * sy * cz, 0.0],
                [-sx * sy * cz, -cx * cy * cz, 0.0],
                [-sx * cy * sz, cx * sy * sz, 0.0],
            ]
        };
        let (sym, _) = split_symmetric(&d);
        for i in 0..3 {
            for j in 0..3 {
                let e = d.entry(i, j).to_physical();
                let s = sym.entry(i, j).to_physical();
                for idx in 0..g.len() {
                    let a = analytic(g.position(idx));
                    assert!((e.component(0)[idx].re - a[i][j]).abs() < 1e-10);
                    assert!((s.component(0)[idx].re - 0.5 * (a[i][j] + a[j][i])).abs() < 1e-10);
                }
            }
        }
        assert!(d.trace().max_abs() < 1e-12);
    }

    #[test]
    fn split_of_symmetric_and_antisymmetric_inputs() {
        let g = Grid3::periodic(8).unwrap();
        let d = du_by_differentiation(&tg(g)).unwrap();
        let (sym, anti) = split_symmetric(&d);
        let (s2, a2) = split_symmetric(&sym);
        assert_eq!(s2, sym);
        assert!(a2.entries.iter().all(|e| e.max_abs() == 0.0));
        let (s3, a3) = split_symmetric(&anti);
        assert!(s3.entries.iter().all(|e| e.max_abs() == 0.0));
        assert_eq!(a3, anti);
    }

    #[test]
    fn wedge_identity_cases() {
        let g = Grid3::periodic(16).unwrap();
        let zero = SpectralField3::zeros(g, 3, Space::Spectral);
        assert_eq!(verify_antisymmetric_identity(&zero, 100).unwrap(), 0.0);
        let single = SpectralField3::from_fn(g, |p| [0.0, p[0].sin(), 0.0]).to_spectral();
        assert!(verify_antisymmetric_identity(&single, 500).unwrap() < 1e-9);
        assert!(verify_antisymmetric_identity(&tg(g), 2000).unwrap() < 1e-9);
    }

    #[test]
    fn antisymmetric_l2_ratio_is_inverse_sqrt_two() {
        let g = Grid3::periodic(16).unwrap();
        let u = tg(g);
        let (_, anti) = split_symmetric(&du_by_differentiation(&u).unwrap());
        let ratio = anti.l2_norm() / curl(&u).unwrap().l2_norm();
        assert!((ratio - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn eigen_and_operator_norm() {
        let a = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, -5.0]];
        let e = symmetric_eigenvalues(&a);
        assert!((e[0] - 3.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12 && (e[2] + 5.0).abs() < 1e-12);
        assert!((spectral_norm3(&a) - 5.0).abs() < 1e-12);
        // Antisymmetric matrix of ω = (1, 2, 2): operator norm |ω| / 2 = 1.5.
        let m = [[0.0, 1.0, -1.0], [-1.0, 0.0, 0.5], [1.0, -0.5, 0.0]];
        assert!((spectral_norm3(&m) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let int = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((int(0) - 2.0).abs() < 1e-14);
        assert!((int(8) - 2.0 / 9.0).abs() < 1e-14);
        assert!(int(7).abs() < 1e-14);
    }

    #[test]
    fn spherical_means_vanish() {
        assert!(spherical_mean_sigma(SymbolId::Base { a: 0, b: 0 }, 32).unwrap().abs() < 1e-12);
        assert!(spherical_mean_sigma(SymbolId::Product { a: 0, b: 1 }, 32).unwrap().abs() < 1e-12);
        assert!(spherical_mean_sigma(SymbolId::SquareDifference { a: 1, b: 0 }, 32).unwrap().abs() < 1e-10);
        // Sanity: the quadrature does not zero everything, ŷ₃² has mean 1/3.
        let quad = SphereQuadrature::new(32);
        assert!((quad.mean(|y| y[2] * y[2]) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn spherical_mean_errors() {
        assert!(spherical_mean_sigma(SymbolId::Kernel { i: 3, j: 0, l: 0 }, 32).is_err());
        assert!(spherical_mean_sigma(SymbolId::Product { a: 1, b: 1 }, 32).is_err());
        assert!(spherical_mean_sigma(SymbolId::Base { a: 0, b: 0 }, 8).is_err());
    }

    #[test]
    fn kernel_symbols_are_trace_free() {
        let table = transcription_table();
        assert!(!table.is_empty());
        for row in &table {
            let tr = row.symbol.q[0][0] + row.symbol.q[1][1] + row.symbol.q[2][2];
            assert!(tr.abs() < 1e-15, "{row}");
        }
    }
}
