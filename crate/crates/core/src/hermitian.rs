//! Hermitian positive-definite matrices and their functional calculus.

use alloc::vec::Vec;
use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)] // unused whenever std is linked: its inherent float methods win
use num_traits::Float as _;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 8;
/// Relative asymmetry accepted (and symmetrized away) on input.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues at or below this fraction of the largest one are a PD violation.
pub const PD_FLOOR: f64 = 1e-12;
/// Relative slack for the Cordes comparison.
pub const CORDES_SLACK: f64 = 1e-9;

/// Hermitian positive-definite matrix with a cached eigendecomposition.
#[derive(Clone, Debug)]
pub struct PdMatrix {
    mat: CMatrix,
    // ascending, columns of `vecs` match
    vals: Vec<f64>,
    vecs: CMatrix,
}

fn relative_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut scale = 0.0f64;
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(m[(i, j)].norm());
            asym = asym.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        asym / scale
    }
}

fn check_square(m: &CMatrix) -> Result<usize> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(n, m.ncols()));
    }
    if n == 0 || n > MAX_DIM {
        return Err(Error::Dimension(n));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(n)
}

/// Symmetrize `(A + A*)/2` after checking the asymmetry is within tolerance.
pub fn symmetrize(m: &CMatrix) -> Result<CMatrix> {
    check_square(m)?;
    let asym = relative_asymmetry(m);
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian { asym });
    }
    Ok((m + m.adjoint()).scale(0.5))
}

/// Eigenvalues (ascending) and unit eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let sym = symmetrize(m)?;
    let n = sym.nrows();
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((vals, vecs))
}

fn recompose(vecs: &CMatrix, vals: &[f64]) -> CMatrix {
    let n = vecs.nrows();
    let mut scaled = vecs.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= vals[j];
        }
    }
    let m = scaled * vecs.adjoint();
    (&m + m.adjoint()).scale(0.5)
}

fn pd_guard(vals: &[f64]) -> Result<()> {
    let min = vals[0];
    let max = vals[vals.len() - 1];
    if !(max > 0.0) || !(min > PD_FLOOR * max) || !max.is_finite() {
        return Err(Error::NotPositiveDefinite { min, max });
    }
    Ok(())
}

impl PdMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let sym = symmetrize(&m)?;
        let (vals, vecs) = hermitian_eigen(&sym)?;
        pd_guard(&vals)?;
        Ok(Self { mat: sym, vals, vecs })
    }

    /// Build from real row-major entries.
    pub fn from_real(d: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != d * d {
            return Err(Error::DimensionMismatch(rows.len(), d * d));
        }
        Self::new(CMatrix::from_fn(d, d, |i, j| C64::new(rows[i * d + j], 0.0)))
    }

    pub fn identity(d: usize) -> Self {
        Self::diag(&alloc::vec![1.0; d]).expect("identity is PD")
    }

    pub fn diag(entries: &[f64]) -> Result<Self> {
        let d = entries.len();
        Self::new(CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(entries[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// Matrix exponential of a Hermitian matrix (always PD unless it overflows).
    pub fn exp_hermitian(h: &CMatrix) -> Result<Self> {
        let (vals, vecs) = hermitian_eigen(h)?;
        let vals: Vec<f64> = vals.iter().map(|&l| l.exp()).collect();
        Self::from_spectrum(vals, vecs)
    }

    /// Assemble from an ascending spectrum and unitary eigenvectors.
    fn from_spectrum(vals: Vec<f64>, vecs: CMatrix) -> Result<Self> {
        pd_guard(&vals)?;
        let mat = recompose(&vecs, &vals);
        Ok(Self { mat, vals, vecs })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.vals
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.vecs
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.vals[self.vals.len() - 1]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.vals[0]
    }

    pub fn trace(&self) -> f64 {
        self.vals.iter().sum()
    }

    /// `f(A)` for a real function on the spectrum; the result is Hermitian but
    /// not necessarily PD.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let vals: Vec<f64> = self.vals.iter().map(|&l| f(l)).collect();
        recompose(&self.vecs, &vals)
    }

    /// `A^a` via the spectral theorem.
    pub fn pow(&self, a: f64) -> Result<Self> {
        if !a.is_finite() {
            return crate::error::param("exponent must be finite");
        }
        if a == 0.0 {
            return Ok(Self::identity(self.dim()));
        }
        if a == 1.0 {
            return Ok(self.clone());
        }
        let n = self.dim();
        let mut vals: Vec<f64> = self.vals.iter().map(|&l| l.powf(a)).collect();
        let mut vecs = self.vecs.clone();
        if a < 0.0 {
            vals.reverse();
            vecs = CMatrix::from_fn(n, n, |i, j| self.vecs[(i, n - 1 - j)]);
        }
        Self::from_spectrum(vals, vecs)
    }

    pub fn inverse(&self) -> Self {
        self.pow(-1.0).expect("inverse of a PD matrix within the floor is PD")
    }

    pub fn sqrt(&self) -> Self {
        self.pow(0.5).expect("square root of a PD matrix is PD")
    }

    /// `|A v|`.
    pub fn apply_norm(&self, v: &CVector) -> f64 {
        (&self.mat * v).norm()
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return crate::error::param("PD scaling factor must be positive");
        }
        let vals = self.vals.iter().map(|&l| l * c).collect();
        Self::from_spectrum(vals, self.vecs.clone())
    }

    /// Bitwise equality of the stored (symmetrized) entries.
    pub fn same_entries(&self, other: &Self) -> bool {
        self.mat.len() == other.mat.len()
            && self
                .mat
                .iter()
                .zip(other.mat.iter())
                .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits())
    }
}

/// `A^a` for a PD matrix.
pub fn fractional_power(a: &PdMatrix, exponent: f64) -> Result<PdMatrix> {
    a.pow(exponent)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    m.singular_values().iter().fold(0.0f64, |acc, &s| acc.max(s))
}

/// `|A B|` for PD factors.
pub fn product_norm(a: &PdMatrix, b: &PdMatrix) -> f64 {
    spectral_norm(&(a.matrix() * b.matrix()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CordesReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compare `|A^a B^a|` with `|AB|^a`.
pub fn cordes_check(a: &PdMatrix, b: &PdMatrix, exponent: f64) -> Result<CordesReport> {
    if !(0.0..=1.0).contains(&exponent) {
        return crate::error::param("Cordes exponent must lie in [0, 1]");
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let lhs = product_norm(&a.pow(exponent)?, &b.pow(exponent)?);
    let rhs = product_norm(a, b).powf(exponent);
    Ok(CordesReport { lhs, rhs, holds: lhs <= rhs * (1.0 + CORDES_SLACK) })
}

/// The two 2×2 counterexample families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `C = diag(1, n)`, `D = [[1, 1/(2√n)], [1/(2√n), 1/n]]`.
    One,
    /// `C = diag(1, n(1+log n))`, `D` a rotation of `diag(1, 1/(n(1+log n)))`.
    Two,
}

pub fn appendix_pair(n: u64, family: Family) -> Result<(PdMatrix, PdMatrix)> {
    if n == 0 {
        return crate::error::param("appendix families need n >= 1");
    }
    let nf = n as f64;
    match family {
        Family::One => {
            let off = 1.0 / (2.0 * nf.sqrt());
            let c = PdMatrix::diag(&[1.0, nf])?;
            let d = PdMatrix::from_real(2, &[1.0, off, off, 1.0 / nf])?;
            Ok((c, d))
        }
        Family::Two => {
            let m = nf * (1.0 + nf.ln());
            let cs = (1.0 - 1.0 / nf).sqrt();
            let sn = 1.0 / nf.sqrt();
            // R diag(1, 1/m) R^T with R = [[cs, -sn], [sn, cs]]
            let d11 = cs * cs + sn * sn / m;
            let d12 = cs * sn - sn * cs / m;
            let d22 = sn * sn + cs * cs / m;
            let c = PdMatrix::diag(&[1.0, m])?;
            let d = PdMatrix::from_real(2, &[d11, d12, d12, d22])?;
            Ok((c, d))
        }
    }
}

/// Real trace of a product of two Hermitian matrices.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    (a * b).trace().re
}

/// `tr(C_n^a D_n^a)`, only in the exponent range where the family breaks Cordes-type control.
pub fn cordes_gap(n: u64, exponent: f64, family: Family) -> Result<f64> {
    match family {
        Family::One if !(exponent > 1.0) => {
            return crate::error::param("family one gap needs a > 1; for a <= 1 Cordes bounds the trace")
        }
        Family::Two if !(exponent > 0.0 && exponent < 1.0) => {
            return crate::error::param("family two gap needs 0 < a < 1")
        }
        _ => {}
    }
    let (c, d) = appendix_pair(n, family)?;
    // C^a spans 1..n^a, past the PD floor for large n, so skip revalidation
    let pow = |m: &PdMatrix| m.apply(|l| l.powf(exponent));
    Ok(trace_product(&pow(&c), &pow(&d)))
}

/// Uniformly distributed unit vector in `C^d` (Gaussian normalization).
pub fn random_unit_vector<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(d, |_, _| C64::new(gaussian(rng), gaussian(rng)));
        let n = v.norm();
        if n > 1e-8 {
            return v.unscale(n);
        }
    }
}

/// Standard normal draw (Box-Muller).
pub fn gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (core::f64::consts::TAU * u2).cos()
}

/// Random Hermitian matrix with entries uniform in `[-spread, spread]`.
pub fn random_hermitian<R: rand::Rng + ?Sized>(d: usize, spread: f64, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(spread * rng.gen_range(-1.0..=1.0), 0.0);
        for j in (i + 1)..d {
            let z = C64::new(spread * rng.gen_range(-1.0..=1.0), spread * rng.gen_range(-1.0..=1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// `exp(H)` for a random Hermitian `H`.
pub fn random_pd<R: rand::Rng + ?Sized>(d: usize, spread: f64, rng: &mut R) -> PdMatrix {
    PdMatrix::exp_hermitian(&random_hermitian(d, spread, rng)).expect("exp of Hermitian is PD")
}
