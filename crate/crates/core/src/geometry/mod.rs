//! Complex-symmetric convex bodies in `C^d` described by support functions.
//!
//! Pairing convention: `<x, v> = sum x_k conj(v_k)` and `h_K(v) = sup Re <x, v>`.
//! Bodies are circle-invariant, so `h_K(v)` depends on `v` only up to a unit
//! complex factor; the grid stores i-orbits so this can be checked exactly.

mod fit;
mod grid;

use alloc::sync::Arc;
use alloc::vec::Vec;

pub use fit::{adapted_directions, john_ellipsoid, john_ellipsoid_of_fn, lowner_ellipsoid, mvee, verify_sandwich, John, Mvee, SandwichReport, MVEE_MAX_ITER, MVEE_TOL};
pub use grid::{DirectionGrid, DEFAULT_GRID_SEED};

use crate::error::{Error, Result};
use crate::hermitian::{spectral_norm, CMatrix, CVector, PdMatrix};

/// `<x, v>` with the conjugate on the second slot.
pub fn pairing(x: &CVector, v: &CVector) -> crate::C64 {
    v.dotc(x)
}

/// Support values of a body on a shared direction grid.
#[derive(Clone, Debug)]
pub struct SupportBody {
    grid: Arc<DirectionGrid>,
    h: Vec<f64>,
}

impl SupportBody {
    /// Evaluates `f` on orbit representatives and copies the value across each orbit.
    pub fn from_fn(grid: Arc<DirectionGrid>, mut f: impl FnMut(&CVector) -> f64) -> Result<Self> {
        let mut h = Vec::with_capacity(grid.len());
        for v in grid.representatives() {
            let val = f(v);
            h.extend_from_slice(&[val; 4]);
        }
        Self::from_values(grid, h)
    }

    pub fn from_values(grid: Arc<DirectionGrid>, h: Vec<f64>) -> Result<Self> {
        if h.len() != grid.len() {
            return Err(Error::DimensionMismatch(h.len(), grid.len()));
        }
        for (k, &x) in h.iter().enumerate() {
            if !(x >= 0.0) || !x.is_finite() {
                return crate::error::param(alloc::format!("support value {x} at direction {k} is not finite and nonnegative"));
            }
            if x != h[4 * (k / 4)] {
                return crate::error::param(alloc::format!("support values differ along the i-orbit of direction {k}"));
            }
        }
        Ok(Self { grid, h })
    }

    pub fn zero(grid: Arc<DirectionGrid>) -> Self {
        let n = grid.len();
        Self { grid, h: alloc::vec![0.0; n] }
    }

    /// Closed ball of radius `r`.
    pub fn ball(grid: Arc<DirectionGrid>, r: f64) -> Result<Self> {
        Self::from_fn(grid, |_| r)
    }

    pub fn from_ellipsoid(grid: Arc<DirectionGrid>, e: &Ellipsoid) -> Result<Self> {
        if grid.dim() != e.dim() {
            return Err(Error::DimensionMismatch(grid.dim(), e.dim()));
        }
        Self::from_fn(grid, |v| e.support(v))
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.h
    }

    pub fn support(&self, k: usize) -> f64 {
        self.h[k]
    }

    /// Support value on orbit `j`.
    pub fn orbit_support(&self, j: usize) -> f64 {
        self.h[4 * j]
    }

    /// Sampled `|K| = sup_{x in K} |x|`.
    pub fn magnitude(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.h.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return crate::error::param("body scaling factor must be nonnegative");
        }
        Ok(Self { grid: self.grid.clone(), h: self.h.iter().map(|x| x * c).collect() })
    }

    /// Convex hull of the union.
    pub fn hull_union(&self, other: &Self) -> Result<Self> {
        self.combine(other, f64::max)
    }

    fn combine(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && *self.grid != *other.grid {
            return Err(Error::GridMismatch);
        }
        let h = self.h.iter().zip(&other.h).map(|(&a, &b)| op(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), h })
    }
}

/// Per-direction sum of support functions.
pub fn minkowski_sum(k: &SupportBody, l: &SupportBody) -> Result<SupportBody> {
    k.combine(l, |a, b| a + b)
}

/// The set `A B` for the closed unit ball `B`, `A` Hermitian positive definite.
#[derive(Clone, Debug)]
pub struct Ellipsoid {
    shape: PdMatrix,
}

impl Ellipsoid {
    pub fn new(shape: PdMatrix) -> Self {
        Self { shape }
    }

    pub fn ball(dim: usize, r: f64) -> Result<Self> {
        Ok(Self { shape: PdMatrix::identity(dim).scale(r)? })
    }

    pub fn shape(&self) -> &PdMatrix {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// `h_E(v) = |A v|`.
    pub fn support(&self, v: &CVector) -> f64 {
        self.shape.apply_norm(v)
    }

    pub fn magnitude(&self) -> f64 {
        self.shape.max_eigenvalue()
    }
}

/// `|K L|` for ellipsoids: exactly `|B A|`.
pub fn dot_magnitude_ellipsoids(k: &Ellipsoid, l: &Ellipsoid) -> Result<f64> {
    if k.dim() != l.dim() {
        return Err(Error::DimensionMismatch(k.dim(), l.dim()));
    }
    Ok(spectral_norm(&(l.shape.matrix() * k.shape.matrix())))
}

/// `|K L|` for (possibly degenerate) ellipsoids given by PSD shape matrices.
pub fn dot_magnitude_shapes(a: &CMatrix, b: &CMatrix) -> f64 {
    spectral_norm(&(b * a))
}

/// Sampled `|K L|` together with the grid resolution it was computed at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DotMagnitude {
    pub value: f64,
    pub directions: usize,
}

/// Radial function `rho_L(w) = sup{ t : t w in L }` of the polyhedral outer
/// approximation of `L` on the grid, using circle invariance of `L`.
fn radial(l: &SupportBody, w: &CVector) -> f64 {
    let mut best = f64::INFINITY;
    for (j, v) in l.grid.representatives().enumerate() {
        let c = pairing(w, v).norm();
        if c > 1e-14 {
            best = best.min(l.orbit_support(j) / c);
        }
    }
    best
}

/// Sampled `|K L| = sup_{k in K} h_L(k)`.
///
/// Evaluated as `max_w rho_K(w) h_L(w)` over grid directions, in both orders,
/// so the result is exactly symmetric in `K` and `L`.
pub fn dot_magnitude(k: &SupportBody, l: &SupportBody) -> Result<DotMagnitude> {
    if k.dim() != l.dim() {
        return Err(Error::DimensionMismatch(k.dim(), l.dim()));
    }
    if !Arc::ptr_eq(&k.grid, &l.grid) && *k.grid != *l.grid {
        return Err(Error::GridMismatch);
    }
    let mut value = 0.0f64;
    if !k.is_zero() && !l.is_zero() {
        for (j, w) in k.grid.representatives().enumerate() {
            let (hk, hl) = (k.orbit_support(j), l.orbit_support(j));
            if hl > 0.0 {
                value = value.max(radial(k, w) * hl);
            }
            if hk > 0.0 {
                value = value.max(radial(l, w) * hk);
            }
        }
    }
    Ok(DotMagnitude { value, directions: k.grid.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{random_pd, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid2() -> Arc<DirectionGrid> {
        Arc::new(DirectionGrid::default_for(2).unwrap())
    }

    #[test]
    fn sums_of_balls() {
        let g = grid2();
        let k = SupportBody::ball(g.clone(), 2.0).unwrap();
        let z = SupportBody::zero(g.clone());
        assert_eq!(minkowski_sum(&k, &z).unwrap().values(), k.values());
        let s = minkowski_sum(&k, &SupportBody::ball(g.clone(), 0.5).unwrap()).unwrap();
        assert!(s.values().iter().all(|&x| x == 2.5));
        let other = Arc::new(DirectionGrid::new(2, 64, 1).unwrap());
        assert!(minkowski_sum(&k, &SupportBody::zero(other)).is_err());
    }

    #[test]
    fn minkowski_triangle_inequality() {
        let g = grid2();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e1 = Ellipsoid::new(random_pd(2, 1.0, &mut rng));
        let e2 = Ellipsoid::new(random_pd(2, 1.0, &mut rng));
        let k = SupportBody::from_ellipsoid(g.clone(), &e1).unwrap();
        let l = SupportBody::from_ellipsoid(g.clone(), &e2).unwrap();
        let s = minkowski_sum(&k, &l).unwrap();
        assert!(s.magnitude() <= k.magnitude() + l.magnitude() + 1e-15);
    }

    #[test]
    fn rejects_broken_orbit_symmetry() {
        let g = Arc::new(DirectionGrid::new(1, 8, 0).unwrap());
        assert!(SupportBody::from_values(g.clone(), alloc::vec![1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(SupportBody::from_values(g, alloc::vec![-1.0; 8]).is_err());
    }

    #[test]
    fn dot_magnitude_closed_forms() {
        let g = grid2();
        let a = SupportBody::ball(g.clone(), 2.0).unwrap();
        let b = SupportBody::ball(g.clone(), 3.0).unwrap();
        let r = dot_magnitude(&a, &b).unwrap();
        assert!((r.value - 6.0).abs() < 1e-12);
        assert_eq!(r.directions, 256);

        let e1 = Ellipsoid::new(PdMatrix::diag(&[1.0, 2.0]).unwrap());
        let e2 = Ellipsoid::new(PdMatrix::diag(&[3.0, 1.0]).unwrap());
        assert!((dot_magnitude_ellipsoids(&e1, &e2).unwrap() - 3.0).abs() < 1e-12);
    }

    // Brute force over boundary pairs k(u) = A^2 u/|Au|, l(w) = B^2 w/|Bw|.
    fn brute_force_dot(a: &PdMatrix, b: &PdMatrix, rng: &mut ChaCha8Rng) -> f64 {
        let a2 = a.matrix() * a.matrix();
        let b2 = b.matrix() * b.matrix();
        // 100 x 100 boundary pairs from two independently seeded quasi-uniform grids
        let gu = DirectionGrid::new(2, 400, rng.gen()).unwrap();
        let gw = DirectionGrid::new(2, 400, rng.gen()).unwrap();
        let us: Vec<CVector> = gu.representatives().cloned().collect();
        let ws: Vec<CVector> = gw.representatives().cloned().collect();
        let mut best = 0.0f64;
        for u in &us {
            let k = &a2 * u / C64::new(a.apply_norm(u), 0.0);
            for w in &ws {
                let l = &b2 * w / C64::new(b.apply_norm(w), 0.0);
                best = best.max(pairing(&k, &l).norm());
            }
        }
        best
    }

    #[test]
    fn brute_force_pairs_track_spectral_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let a = random_pd(2, 0.8, &mut rng);
            let b = random_pd(2, 0.8, &mut rng);
            let exact = spectral_norm(&(b.matrix() * a.matrix()));
            let brute = brute_force_dot(&a, &b, &mut rng);
            assert!(brute <= exact * (1.0 + 1e-12));
            assert!((brute / exact - 1.0).abs() < 0.02, "brute {brute} exact {exact}");
        }
    }

    // The polyhedral radial estimate errs on both sides and tightens with the grid.
    #[test]
    fn sampled_dot_magnitude_converges_with_grid() {
        for &(count, tol) in &[(256usize, 0.15), (1024, 0.02)] {
            let g = Arc::new(DirectionGrid::new(2, count, DEFAULT_GRID_SEED).unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(23);
            for _ in 0..20 {
                let a = random_pd(2, 0.5, &mut rng);
                let b = random_pd(2, 0.5, &mut rng);
                let exact = spectral_norm(&(b.matrix() * a.matrix()));
                let k = SupportBody::from_ellipsoid(g.clone(), &Ellipsoid::new(a.clone())).unwrap();
                let l = SupportBody::from_ellipsoid(g.clone(), &Ellipsoid::new(b.clone())).unwrap();
                let sampled = dot_magnitude(&k, &l).unwrap();
                assert_eq!(sampled.directions, count);
                assert!((sampled.value / exact - 1.0).abs() < tol, "{count}: sampled {} exact {exact}", sampled.value);
                assert_eq!(sampled.value, dot_magnitude(&l, &k).unwrap().value);
            }
        }
    }
}
