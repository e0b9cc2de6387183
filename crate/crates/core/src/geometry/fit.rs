//! Minimum-volume enclosing ellipsoids of circle-symmetric point sets and the
//! John/Loewner ellipsoids built from them.

use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused whenever std is linked: its inherent float methods win
use num_traits::Float as _;

use super::{DirectionGrid, Ellipsoid, SupportBody};
use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, CVector, PdMatrix, C64};
use nalgebra::{DMatrix, DVector};

/// Stopping tolerance on `max_j kappa_j / d - 1`.
pub const MVEE_TOL: f64 = 1e-9;
pub const MVEE_MAX_ITER: usize = 100_000;
/// Support values below this fraction of the largest mark a degenerate body.
pub const DEGENERATE_REL: f64 = 1e-10;
const REFRESH_EVERY: usize = 64;
/// First-order steps before switching to the barrier polish.
const FIRST_ORDER_STEPS: usize = 300;
/// Upper bound on re-adaptation rounds in [`john_ellipsoid_of_fn`].
const ADAPT_PASSES: usize = 6;
/// Relative shape change at which the adaptive passes stop.
const ADAPT_TOL: f64 = 1e-7;

/// `{y : y* Q y <= 1}`, the smallest such ellipsoid containing the circle
/// orbits of the input points.
#[derive(Clone, Debug)]
pub struct Mvee {
    pub q: PdMatrix,
    pub iterations: usize,
    /// Final `max_j kappa_j / d - 1` before rescaling.
    pub gap: f64,
}

fn hermitian_inverse(x: &CMatrix) -> Option<CMatrix> {
    x.clone().cholesky().map(|c| c.inverse())
}

fn quad(m: &CMatrix, p: &CVector) -> f64 {
    p.dotc(&(m * p)).re
}

/// Weighted Todd-Yildirim iteration (Khachiyan steps plus away steps) for the
/// complex D-optimal design `max log det sum u_j p_j p_j*`.
///
/// Clouds that already hug an ellipsoid make the first-order steps crawl;
/// after [`FIRST_ORDER_STEPS`] the iterate is handed to a log-barrier Newton
/// method on the dual problem, which stops once its duality gap is below `tol`.
pub fn mvee(points: &[CVector], tol: f64, max_iter: usize) -> Result<Mvee> {
    let m = points.len();
    if m == 0 {
        return crate::error::param("no points");
    }
    let d = points[0].len();
    let n = d as f64;
    let mut u = alloc::vec![1.0 / m as f64; m];
    let assemble = |u: &[f64]| {
        let mut x = CMatrix::zeros(d, d);
        for (p, &w) in points.iter().zip(u) {
            if w > 0.0 {
                x += (p * p.adjoint()).scale(w);
            }
        }
        x
    };
    let mut x = assemble(&u);
    let mut xinv = hermitian_inverse(&x).ok_or(Error::Degenerate { direction: 0, value: 0.0 })?;
    let mut kappa: Vec<f64> = points.iter().map(|p| quad(&xinv, p)).collect();

    let mut iterations = 0;
    let mut gap;
    loop {
        let (mut jp, mut jm) = (0, usize::MAX);
        for j in 0..m {
            if kappa[j] > kappa[jp] {
                jp = j;
            }
            if u[j] > 0.0 && (jm == usize::MAX || kappa[j] < kappa[jm]) {
                jm = j;
            }
        }
        gap = kappa[jp] / n - 1.0;
        let away = 1.0 - kappa[jm] / n;
        if gap <= tol {
            break;
        }
        if iterations >= max_iter.min(FIRST_ORDER_STEPS) {
            break;
        }
        iterations += 1;

        let (j, mut tau) = if gap >= away {
            (jp, (kappa[jp] - n) / (n * (kappa[jp] - 1.0)))
        } else {
            (jm, (kappa[jm] - n) / (n * (kappa[jm] - 1.0)))
        };
        if tau < 0.0 {
            tau = tau.max(-u[j] / (1.0 - u[j]));
        }
        if !(tau.is_finite()) || tau == 0.0 {
            break;
        }
        for w in u.iter_mut() {
            *w *= 1.0 - tau;
        }
        u[j] += tau;
        if u[j] < 1e-300 {
            u[j] = 0.0;
        }

        if iterations % REFRESH_EVERY == 0 {
            x = assemble(&u);
            xinv = hermitian_inverse(&x).ok_or(Error::Degenerate { direction: j, value: 0.0 })?;
        } else {
            // Sherman-Morrison for X+ = (1 - tau) X + tau p p*.
            let p = &points[j];
            let w = &xinv * p;
            let s = tau / (1.0 - tau);
            let c = s / (1.0 + s * kappa[j]);
            xinv = (&xinv - (&w * w.adjoint()).scale(c)).unscale(1.0 - tau);
            x = x.scale(1.0 - tau) + (p * p.adjoint()).scale(tau);
        }
        for (k, p) in points.iter().enumerate() {
            kappa[k] = quad(&xinv, p);
        }
    }

    let mut q = xinv.unscale(n);
    if gap > tol {
        let start = q.unscale((1.0 + gap) * (1.0 + 1e-9));
        match polish(points, start, tol, max_iter.saturating_sub(iterations)) {
            Some((qq, steps, g)) => {
                q = qq;
                iterations += steps;
                gap = g;
            }
            None => return Err(Error::NoConvergence { iterations, gap }),
        }
    }
    let worst = points.iter().map(|p| quad(&q, p)).fold(0.0f64, f64::max);
    let q = PdMatrix::new(q.unscale(worst.max(f64::MIN_POSITIVE)))?;
    Ok(Mvee { q, iterations, gap: gap.max(0.0) })
}

/// Real coordinates of Hermitian matrices: `E_(k,k)`, then for `k < l` the
/// symmetric real and antisymmetric imaginary units.
fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        let mut e = CMatrix::zeros(d, d);
        e[(k, k)] = C64::new(1.0, 0.0);
        out.push(e);
    }
    for k in 0..d {
        for l in k + 1..d {
            let mut e = CMatrix::zeros(d, d);
            e[(k, l)] = C64::new(1.0, 0.0);
            e[(l, k)] = C64::new(1.0, 0.0);
            out.push(e);
            let mut f = CMatrix::zeros(d, d);
            f[(k, l)] = C64::new(0.0, 1.0);
            f[(l, k)] = C64::new(0.0, -1.0);
            out.push(f);
        }
    }
    out
}

/// Path following for `min -log det Q` subject to `p_j* Q p_j <= 1`, from a
/// strictly feasible `q0`. Returns the final `Q`, Newton steps taken, and the
/// barrier duality gap `m mu`.
fn polish(points: &[CVector], q0: CMatrix, tol: f64, budget: usize) -> Option<(CMatrix, usize, f64)> {
    let d = q0.nrows();
    let basis = hermitian_basis(d);
    let nb = basis.len();
    let m = points.len() as f64;
    let a: Vec<DVector<f64>> = points.iter().map(|p| DVector::from_iterator(nb, basis.iter().map(|e| quad(e, p)))).collect();
    let to_matrix = |theta: &DVector<f64>| {
        let mut q = CMatrix::zeros(d, d);
        for (e, &t) in basis.iter().zip(theta.iter()) {
            q += e.scale(t);
        }
        q
    };
    let mut theta = DVector::from_iterator(nb, basis.iter().map(|e| (e.adjoint() * &q0).trace().re / (e.adjoint() * e).trace().re));
    // barrier value, or None outside the domain
    let value = |theta: &DVector<f64>, mu: f64| -> Option<f64> {
        let q = to_matrix(theta);
        let chol = q.cholesky()?;
        let logdet: f64 = (0..d).map(|k| chol.l_dirty()[(k, k)].re.ln()).sum::<f64>() * 2.0;
        let mut bar = 0.0;
        for aj in &a {
            let s = 1.0 - aj.dot(theta);
            if !(s > 0.0) {
                return None;
            }
            bar -= s.ln();
        }
        Some(-logdet + mu * bar)
    };
    value(&theta, 1.0)?;
    let mut mu = (tol.max(1e-3) / m).max(1e-2 * tol);
    let mut steps = 0;
    loop {
        // centering
        for _ in 0..100 {
            let q = to_matrix(&theta);
            let qinv = hermitian_inverse(&q)?;
            let mq: Vec<CMatrix> = basis.iter().map(|e| &qinv * e).collect();
            let mut g = DVector::from_iterator(nb, mq.iter().map(|x| -x.trace().re));
            let mut h = DMatrix::<f64>::zeros(nb, nb);
            for k in 0..nb {
                for l in k..nb {
                    let v = (&mq[k] * &mq[l]).trace().re;
                    h[(k, l)] = v;
                    h[(l, k)] = v;
                }
            }
            for aj in &a {
                let s = 1.0 - aj.dot(&theta);
                g.axpy(mu / s, aj, 1.0);
                h.ger(mu / (s * s), aj, aj, 1.0);
            }
            let step = -h.cholesky()?.solve(&g);
            let decrement = -g.dot(&step);
            steps += 1;
            if steps > budget {
                return None;
            }
            if decrement <= 1e-14 {
                break;
            }
            let f0 = value(&theta, mu)?;
            let mut t = 1.0;
            loop {
                let trial = &theta + &step * t;
                if let Some(f) = value(&trial, mu) {
                    if f <= f0 - 0.25 * t * decrement {
                        theta = trial;
                        break;
                    }
                }
                t *= 0.5;
                if t < 1e-12 {
                    return None;
                }
            }
        }
        if m * mu <= tol {
            return Some((to_matrix(&theta), steps, m * mu));
        }
        mu = (mu * 0.1).max(0.5 * tol / m);
    }
}

/// Inscribed ellipsoid together with its measured sandwich tolerances.
#[derive(Clone, Debug)]
pub struct John {
    pub ellipsoid: Ellipsoid,
    /// `max (h_E / h_K) - 1` over the grid, clamped at 0.
    pub tol_in: f64,
    /// `max h_K / (sqrt(d) h_E) - 1` over the grid, clamped at 0.
    pub tol_out: f64,
    pub iterations: usize,
}

/// John ellipsoid of a full-dimensional body, as the polar of the minimum-volume
/// ellipsoid around the polar points `v / h_K(v)`.
pub fn john_ellipsoid(k: &SupportBody) -> Result<John> {
    let hmax = k.magnitude();
    let grid = k.grid();
    let mut points = Vec::with_capacity(grid.orbit_count());
    for (j, v) in grid.representatives().enumerate() {
        let h = k.orbit_support(j);
        if !(h > DEGENERATE_REL * hmax) {
            return Err(Error::Degenerate { direction: 4 * j, value: h });
        }
        points.push(v.unscale(h));
    }
    let fit = mvee(&points, MVEE_TOL, MVEE_MAX_ITER)?;
    // polar of {y : y* Q y <= 1} is Q^{1/2} B
    let ellipsoid = Ellipsoid::new(fit.q.sqrt());
    let report = verify_sandwich(k, &ellipsoid, (k.dim() as f64).sqrt());
    Ok(John { ellipsoid, tol_in: report.inward_excess.max(0.0), tol_out: report.outward_excess.max(0.0), iterations: fit.iterations })
}

/// Smallest ellipsoid containing the circle orbits of `points`.
pub fn lowner_ellipsoid(points: &[CVector]) -> Result<Ellipsoid> {
    let fit = mvee(points, MVEE_TOL, MVEE_MAX_ITER)?;
    Ok(Ellipsoid::new(fit.q.pow(-0.5)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichReport {
    /// `max (h_E - h_K) / h_K`; nonpositive when `E` sits inside `K` on the grid.
    pub inward_excess: f64,
    /// `max (h_K - c h_E) / (c h_E)`; nonpositive when `K` sits inside `c E`.
    pub outward_excess: f64,
    pub factor: f64,
}

impl SandwichReport {
    pub fn holds(&self, tol_in: f64, tol_out: f64) -> bool {
        self.inward_excess <= tol_in && self.outward_excess <= tol_out
    }
}

/// Per-direction check of `E in K in factor E`.
pub fn verify_sandwich(k: &SupportBody, e: &Ellipsoid, factor: f64) -> SandwichReport {
    let mut inward = f64::NEG_INFINITY;
    let mut outward = f64::NEG_INFINITY;
    for (j, v) in k.grid().representatives().enumerate() {
        let hk = k.orbit_support(j);
        let he = e.support(v);
        inward = inward.max(rel_excess(he, hk));
        outward = outward.max(rel_excess(hk, factor * he));
    }
    SandwichReport { inward_excess: inward, outward_excess: outward, factor }
}

fn rel_excess(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        (a - b) / b
    } else if a > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Directions `A^{-1} w / |A^{-1} w|` for grid directions `w`: the polar points
/// of a body close to `A B` then spread evenly instead of bunching up along
/// the long axes. Orbit structure is kept since `A^{-1}` is complex linear.
pub fn adapted_directions(grid: &DirectionGrid, shape: &PdMatrix) -> Vec<CVector> {
    let inv = shape.inverse();
    grid.representatives()
        .map(|w| {
            let v = inv.matrix() * w;
            let n = v.norm();
            v.unscale(n)
        })
        .collect()
}

/// John ellipsoid of the body with support function `h`, which can be
/// evaluated anywhere. A first pass on `grid` is refined by a second pass on
/// the grid plus directions adapted to the first ellipsoid. Tolerances are
/// reported on `grid`.
pub fn john_ellipsoid_of_fn(grid: &Arc<DirectionGrid>, h: impl Fn(&CVector) -> f64) -> Result<John> {
    let body = SupportBody::from_fn(grid.clone(), &h)?;
    let first = john_ellipsoid(&body)?;
    let hmax = body.magnitude();
    let base: Vec<CVector> = grid.representatives().enumerate().map(|(j, v)| v.unscale(body.orbit_support(j))).collect();
    let mut ellipsoid = first.ellipsoid;
    let mut iterations = first.iterations;
    for _ in 0..ADAPT_PASSES {
        let mut points = base.clone();
        for (j, v) in adapted_directions(grid, ellipsoid.shape()).into_iter().enumerate() {
            let hv = h(&v);
            if !(hv > DEGENERATE_REL * hmax) {
                return Err(Error::Degenerate { direction: j, value: hv });
            }
            points.push(v.unscale(hv));
        }
        let fit = mvee(&points, MVEE_TOL, MVEE_MAX_ITER)?;
        iterations += fit.iterations;
        let next = Ellipsoid::new(fit.q.sqrt());
        let change = (next.shape().matrix() - ellipsoid.shape().matrix()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        ellipsoid = next;
        if change <= ADAPT_TOL * ellipsoid.magnitude() {
            break;
        }
    }
    let report = verify_sandwich(&body, &ellipsoid, (body.dim() as f64).sqrt());
    Ok(John { ellipsoid, tol_in: report.inward_excess.max(0.0), tol_out: report.outward_excess.max(0.0), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{random_pd, random_unit_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(d: usize) -> Arc<DirectionGrid> {
        Arc::new(DirectionGrid::default_for(d).unwrap())
    }

    #[test]
    fn john_of_ellipsoid_is_itself() {
        let g = grid(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // moderate eccentricity: 64 orbits resolve these without adaptation
        for _ in 0..10 {
            let e0 = Ellipsoid::new(random_pd(2, 0.5, &mut rng));
            let k = SupportBody::from_ellipsoid(g.clone(), &e0).unwrap();
            let j = john_ellipsoid(&k).unwrap();
            for (idx, v) in g.representatives().enumerate() {
                let rel = (j.ellipsoid.support(v) / k.orbit_support(idx) - 1.0).abs();
                assert!(rel < 1e-6, "{rel}");
            }
        }
    }

    #[test]
    fn adapted_pass_recovers_elongated_ellipsoids() {
        let g = grid(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let e0 = Ellipsoid::new(random_pd(2, 1.5, &mut rng));
            let j = john_ellipsoid_of_fn(&g, |v| e0.support(v)).unwrap();
            let mut dense = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..2000 {
                let v = random_unit_vector(2, &mut dense);
                let rel = (j.ellipsoid.support(&v) / e0.support(&v) - 1.0).abs();
                assert!(rel < 1e-6, "{rel}");
            }
        }
    }

    #[test]
    fn john_in_one_dimension_is_the_radius() {
        let g = grid(1);
        let k = SupportBody::ball(g, 2.5).unwrap();
        let j = john_ellipsoid(&k).unwrap();
        assert!((j.ellipsoid.shape().matrix()[(0, 0)].re - 2.5).abs() < 1e-9);
    }

    #[test]
    fn john_rejects_degenerate_body() {
        let g = grid(2);
        let mut h: Vec<f64> = alloc::vec![1.0; g.len()];
        for x in &mut h[8..12] {
            *x = 0.0;
        }
        let k = SupportBody::from_values(g, h).unwrap();
        assert!(matches!(john_ellipsoid(&k), Err(Error::Degenerate { direction: 8, .. })));
    }

    // Dense brute-force check for h(v) = |v1| + |v2|, whose John ellipsoid is the unit ball.
    // Between grid directions E pokes out of K near the corners of the polar body;
    // the excess shrinks as the grid is refined.
    #[test]
    fn john_of_polydisk_on_dense_directions() {
        let h = |v: &CVector| v[0].norm() + v[1].norm();
        for &(count, in_tol) in &[(256usize, 0.15), (4096, 0.04)] {
            let g = Arc::new(DirectionGrid::new(2, count, crate::geometry::DEFAULT_GRID_SEED).unwrap());
            let k = SupportBody::from_fn(g, h).unwrap();
            let j = john_ellipsoid(&k).unwrap();
            assert!(j.tol_in < 1e-6 && j.tol_out < 1e-6);
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut worst_out = 0.0f64;
            let mut worst_in = f64::NEG_INFINITY;
            for _ in 0..100_000 {
                let v = random_unit_vector(2, &mut rng);
                let he = j.ellipsoid.support(&v);
                worst_in = worst_in.max(he / h(&v) - 1.0);
                worst_out = worst_out.max(h(&v) / he);
            }
            assert!(worst_in < in_tol, "{count}: {worst_in}");
            assert!(worst_out <= 2f64.sqrt() * 1.05, "{count}: {worst_out}");
        }
    }

    #[test]
    fn lowner_of_ellipsoid_boundary_recovers_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_pd(2, 1.0, &mut rng);
        let pts: Vec<CVector> = (0..50).map(|_| a.matrix() * random_unit_vector(2, &mut rng)).collect();
        let e = lowner_ellipsoid(&pts).unwrap();
        let diff = (e.shape().matrix() - a.matrix()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(diff < 1e-6 * a.max_eigenvalue(), "{diff}");
    }

    #[test]
    fn sandwich_trivial_cases() {
        let g = grid(2);
        let e = Ellipsoid::new(PdMatrix::diag(&[1.0, 3.0]).unwrap());
        let k = SupportBody::from_ellipsoid(g, &e).unwrap();
        let r = verify_sandwich(&k, &e, 1.0);
        assert!(r.holds(0.0, 0.0));
        let half = Ellipsoid::new(e.shape().scale(0.5).unwrap());
        assert!(verify_sandwich(&k, &half, 2.0).holds(0.0, 1e-15));
        assert!(!verify_sandwich(&k, &half, 1.5).holds(0.0, 0.0));
    }
}
