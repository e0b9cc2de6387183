//! Convex-body averages of vector fields and bilinear sparse forms.
//!
//! The average `<<f>>_{L^p(I)}` is the set of `avg_I phi f` with
//! `avg_I |phi|^{p'} <= 1`. Its support function in direction `v` is the
//! `L^p(I)` average norm of `<f, v>`: for any admissible `phi`, Hölder gives
//! `Re avg phi <f,v> <= ||<f,v>||_p`, and `phi = conj(z)|z|^{p-2} / ||z||_p^{p-1}`
//! with `z = <f,v>` attains it. That extremal `phi` also yields the boundary
//! point of the body in direction `v`, used for the John ellipsoid and for `|K L|`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused whenever std is linked: its inherent float methods win
use num_traits::Float as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::characteristics::{apq_characteristic, IntervalFamily};
use crate::{conj_exp, conj_of_ratio};
use crate::dyadic::{dilate, DyadicInterval, Interval, SparseCollection};
use crate::error::{param, Error, Result};
use crate::geometry::{john_ellipsoid, pairing, DirectionGrid, SupportBody};
use crate::hermitian::{gaussian, spectral_norm, CMatrix, CVector, C64};
use crate::weight::{CellGrid, PiecewiseWeight};

/// Singular values below this fraction of the largest count as zero when
/// deciding the span of an average.
pub const SPAN_TOL: f64 = 1e-10;
/// Default neighbourhood factor for sparse forms.
pub const DEFAULT_LAMBDA: f64 = 5.0;
/// Characteristics above this are treated as infinite.
pub const OVERFLOW_GUARD: f64 = 1e150;
/// Rounds of alternating maximization when refining `|K L|`.
const DOT_ROUNDS: usize = 200;

/// One vector in `C^d` per grid cell.
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: CellGrid,
    dim: usize,
    values: Vec<CVector>,
}

impl VectorField {
    pub fn new(grid: CellGrid, values: Vec<CVector>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::DimensionMismatch(values.len(), grid.count()));
        }
        let dim = values.first().map_or(0, |v| v.len());
        if dim == 0 || dim > crate::hermitian::MAX_DIM {
            return Err(Error::Dimension(dim));
        }
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(dim, v.len()));
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { grid, dim, values })
    }

    pub fn constant(grid: CellGrid, value: CVector) -> Result<Self> {
        Self::new(grid, alloc::vec![value; grid.count()])
    }

    pub fn zero(dim: usize, grid: CellGrid) -> Result<Self> {
        Self::constant(grid, CVector::zeros(dim))
    }

    pub fn grid(&self) -> CellGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[CVector] {
        &self.values
    }

    pub fn value(&self, cell: usize) -> &CVector {
        &self.values[cell]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid, dim: self.dim, values: self.values.iter().map(|v| v.scale(c)).collect() }
    }

    /// Cellwise `M(x) f(x)` for a matrix field given per cell.
    pub fn map(&self, f: impl Fn(usize, &CVector) -> CVector) -> Result<Self> {
        Self::new(self.grid, self.values.iter().enumerate().map(|(i, v)| f(i, v)).collect())
    }

    pub fn refine(&self, level: i32) -> Result<Self> {
        if level < self.grid.level {
            return param("refinement cannot coarsen");
        }
        let grid = CellGrid::new(self.grid.domain, level)?;
        let k = 1usize << (level - self.grid.level);
        Self::new(grid, self.values.iter().flat_map(|v| core::iter::repeat_n(v.clone(), k)).collect())
    }
}

/// Independent standard complex Gaussian entries.
pub fn random_field(dim: usize, grid: CellGrid, seed: u64) -> Result<VectorField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.count())
        .map(|_| CVector::from_fn(dim, |_, _| C64::new(gaussian(&mut rng), gaussian(&mut rng))))
        .collect();
    VectorField::new(grid, values)
}

/// `(int |W^{1/p} f|^p)^{1/p}`.
pub fn weighted_norm(f: &VectorField, w: &PiecewiseWeight, p: f64) -> Result<f64> {
    if f.grid() != w.grid() || f.dim() != w.dim() {
        return param("field and weight must share grid and dimension");
    }
    if !(p >= 1.0 && p.is_finite()) {
        return param("need 1 <= p < inf");
    }
    let roots: Vec<CMatrix> = w.palette().iter().map(|m| Ok(m.pow(1.0 / p)?.into_matrix())).collect::<Result<_>>()?;
    let h = f.grid().cell_len();
    let sum: f64 = f.values().iter().zip(w.cell_indices()).map(|(v, &c)| (&roots[c as usize] * v).norm().powf(p)).sum();
    Ok((sum * h).powf(1.0 / p))
}

/// The data behind `<<f>>_{L^p(I)}`: distinct consecutive values with their
/// share of `|I|`. Parts of `I` outside the domain contribute zero.
#[derive(Clone, Debug)]
pub struct ConvexAverage {
    dim: usize,
    p: f64,
    runs: Vec<(CVector, f64)>,
    /// `I` reaches outside the field's domain.
    pub zero_extended: bool,
}

pub fn convex_average(f: &VectorField, iv: &Interval, p: f64) -> Result<ConvexAverage> {
    if !(p >= 1.0 && p.is_finite()) {
        return param(format!("average exponent must lie in [1, inf) (got {p})"));
    }
    if iv.is_empty() {
        return Err(Error::OutsideDomain { lo: iv.lo, hi: iv.hi });
    }
    let grid = f.grid();
    let total = iv.len();
    let mut runs: Vec<(CVector, f64)> = Vec::new();
    for (i, m) in grid.overlaps(iv) {
        let v = f.value(i);
        match runs.last_mut() {
            Some((last, acc)) if last == v => *acc += m / total,
            _ => runs.push((v.clone(), m / total)),
        }
    }
    runs.retain(|(v, _)| v.iter().any(|z| *z != C64::new(0.0, 0.0)));
    Ok(ConvexAverage { dim: f.dim(), p, runs, zero_extended: !grid.contains(iv) })
}

impl ConvexAverage {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn is_zero(&self) -> bool {
        self.runs.is_empty()
    }

    /// `h(v) = (avg |<f, v>|^p)^{1/p}`.
    pub fn support(&self, v: &CVector) -> f64 {
        self.runs.iter().map(|(x, m)| m * pairing(x, v).norm().powf(self.p)).sum::<f64>().powf(1.0 / self.p)
    }

    /// A point `k` of the body with `Re <k, v> = h(v)`.
    pub fn boundary_point(&self, v: &CVector) -> CVector {
        let h = self.support(v);
        let mut k = CVector::zeros(self.dim);
        if h == 0.0 {
            return k;
        }
        for (x, m) in &self.runs {
            let z = pairing(x, v);
            let a = z.norm();
            if a > 0.0 {
                let phi = z.conj() * (a.powf(self.p - 2.0) / h.powf(self.p - 1.0));
                k += x * (phi * *m);
            }
        }
        k
    }

    pub fn body(&self, grid: Arc<DirectionGrid>) -> Result<SupportBody> {
        if grid.dim() != self.dim {
            return Err(Error::DimensionMismatch(grid.dim(), self.dim));
        }
        SupportBody::from_fn(grid, |v| self.support(v))
    }

    /// Orthonormal basis (columns) of the span of the values, from the SVD
    /// of the measure-weighted data matrix.
    pub fn span(&self) -> CMatrix {
        if self.runs.is_empty() {
            return CMatrix::zeros(self.dim, 0);
        }
        let data = CMatrix::from_fn(self.dim, self.runs.len(), |i, j| self.runs[j].0[i] * self.runs[j].1.sqrt());
        let svd = data.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > SPAN_TOL * top).collect();
        CMatrix::from_fn(self.dim, keep.len(), |i, j| u[(i, keep[j])])
    }

    /// The same body seen inside the subspace spanned by the columns of `basis`.
    fn project(&self, basis: &CMatrix) -> ConvexAverage {
        let runs = self.runs.iter().map(|(x, m)| (basis.adjoint() * x, *m)).collect();
        ConvexAverage { dim: basis.ncols(), p: self.p, runs, zero_extended: self.zero_extended }
    }
}

/// John ellipsoid of a convex average, lifted back to `C^d` when the body
/// is lower dimensional.
#[derive(Clone, Debug)]
pub struct Surrogate {
    /// PSD shape `S A S*` with `A` the John shape inside the span `S`.
    pub shape: CMatrix,
    /// Span basis.
    pub basis: CMatrix,
    /// John shape inside the span.
    pub inner: CMatrix,
    pub rank: usize,
    pub tol_in: f64,
    pub tol_out: f64,
}

/// Default direction grids per dimension, built on first use.
#[derive(Debug, Default)]
pub struct GridCache {
    grids: Vec<Option<Arc<DirectionGrid>>>,
}

impl GridCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, dim: usize) -> Result<Arc<DirectionGrid>> {
        if self.grids.len() <= dim {
            self.grids.resize(dim + 1, None);
        }
        if let Some(g) = &self.grids[dim] {
            return Ok(g.clone());
        }
        let g = Arc::new(DirectionGrid::default_for(dim)?);
        self.grids[dim] = Some(g.clone());
        Ok(g)
    }
}

pub fn john_surrogate(avg: &ConvexAverage, grids: &mut GridCache) -> Result<Surrogate> {
    let d = avg.dim;
    let basis = avg.span();
    let rank = basis.ncols();
    if rank == 0 {
        return Ok(Surrogate { shape: CMatrix::zeros(d, d), basis, inner: CMatrix::zeros(0, 0), rank, tol_in: 0.0, tol_out: 0.0 });
    }
    let inner_avg = if rank == d { avg.clone() } else { avg.project(&basis) };
    let john = if rank == 1 {
        // a disk: the John ellipsoid is the body itself
        let r = inner_avg.support(&CVector::from_element(1, C64::new(1.0, 0.0)));
        return Ok(Surrogate {
            shape: (&basis * basis.adjoint()).scale(r),
            basis,
            inner: CMatrix::from_element(1, 1, C64::new(r, 0.0)),
            rank,
            tol_in: 0.0,
            tol_out: 0.0,
        });
    } else {
        // grid-only fit: re-adapting the directions moves it by about a percent
        // on these cornered bodies, well inside the distortion already reported
        john_ellipsoid(&inner_avg.body(grids.get(rank)?)?)?
    };
    let inner = john.ellipsoid.shape().matrix().clone();
    let shape = &basis * &inner * basis.adjoint();
    Ok(Surrogate { shape, basis, inner, rank, tol_in: john.tol_in, tol_out: john.tol_out })
}

/// Lower bound for `|K L| = sup_{l in L} h_K(l)` through boundary points,
/// maximized over grid directions and then refined by alternating between the
/// two bodies (each step cannot decrease the product).
pub fn average_dot(k: &ConvexAverage, l: &ConvexAverage, grid: &DirectionGrid) -> Result<f64> {
    if k.dim != l.dim || grid.dim() != k.dim {
        return Err(Error::DimensionMismatch(k.dim, l.dim));
    }
    if k.is_zero() || l.is_zero() {
        return Ok(0.0);
    }
    let mut starts: Vec<(f64, CVector)> = Vec::new();
    for w in grid.representatives() {
        let lw = l.boundary_point(w);
        starts.push((k.support(&lw), lw));
        let kw = k.boundary_point(w);
        starts.push((l.support(&kw), l.boundary_point(&kw)));
    }
    starts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = starts[0].0;
    for (_, start) in starts.into_iter().take(4) {
        let mut lpt = start;
        let mut val = k.support(&lpt);
        for _ in 0..DOT_ROUNDS {
            if lpt.norm() == 0.0 {
                break;
            }
            let kpt = k.boundary_point(&lpt);
            let next = l.boundary_point(&kpt);
            let nv = k.support(&next);
            best = best.max(nv);
            if nv <= val * (1.0 + 1e-14) {
                break;
            }
            val = nv;
            lpt = next;
        }
        best = best.max(val);
    }
    Ok(best)
}

/// Derived exponents for the bound with `1 <= p0 < p < q0 <= inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentProfile {
    pub p0: f64,
    pub q0: f64,
    pub p: f64,
    pub t: f64,
    pub s: f64,
    /// `s'`, equal to 1 when `q0 = inf`.
    pub s_conj: f64,
    /// `p' / q0'`.
    pub s_tilde: f64,
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub alpha: f64,
}

pub fn exponent_profile(p0: f64, q0: f64, p: f64) -> Result<ExponentProfile> {
    if !(1.0 <= p0 && p0 < p && p < q0 && p.is_finite() && !q0.is_nan()) {
        return param(format!("need 1 <= p0 < p < q0 <= inf (got p0={p0}, p={p}, q0={q0})"));
    }
    let t = p / p0;
    let s = q0 / p;
    let s_conj = conj_of_ratio(q0, p);
    let s_tilde = conj_exp(p) / conj_exp(q0);
    // t - 1 from p - p0 directly, which is exact when p is near p0
    let t_minus_1 = (p - p0) / p0;
    let a = p / t_minus_1;
    let b = s_conj * p;
    let r = s_conj * t_minus_1 + 1.0;
    let alpha = 1.0 / (s_conj * (p - p0)) + 1.0 / conj_exp(p);
    Ok(ExponentProfile { p0, q0, p, t, s, s_conj, s_tilde, a, b, r, alpha })
}

/// One checked relation: both sides and whether they agree (or are ordered).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn rel_eq(name: &'static str, lhs: f64, rhs: f64, tol: f64) -> IdentityCheck {
    let holds = if lhs.is_infinite() || rhs.is_infinite() { lhs == rhs } else { (lhs - rhs).abs() <= tol * lhs.abs().max(rhs.abs()).max(1.0) };
    IdentityCheck { name, lhs, rhs, holds }
}

impl ExponentProfile {
    /// `s~' = p'/(p'-q0')` with `p'-q0' = (q0-p)/((p-1)(q0-1))`; going
    /// through `s~ - 1` loses about `log10 s~'` digits as `p -> q0`.
    fn s_tilde_conj(&self) -> f64 {
        if self.q0.is_infinite() {
            self.p
        } else {
            self.p * (self.q0 - 1.0) / (self.q0 - self.p)
        }
    }

    /// The eight relations between the derived exponents. Each chained
    /// equality is reported as its worst link.
    pub fn identities(&self, tol: f64) -> [IdentityCheck; 8] {
        let tc = conj_of_ratio(self.p, self.p0);
        let worst = |name, pairs: &[(f64, f64)]| {
            pairs.iter().map(|&(l, r)| rel_eq(name, l, r, tol)).max_by(|x, y| (x.lhs - x.rhs).abs().total_cmp(&(y.lhs - y.rhs).abs())).unwrap()
        };
        [
            rel_eq("t = p/p0", self.t, self.p / self.p0, tol),
            rel_eq("s = q0/p", 1.0 / self.s, self.p / self.q0, tol),
            worst("a = t'p/t = p/(t-1) = t'p0", &[(self.a, tc * self.p / self.t), (self.a, self.p / ((self.p - self.p0) / self.p0)), (self.a, tc * self.p0)]),
            worst("b = s'p = s~'q0'", &[(self.b, self.s_conj * self.p), (self.b, self.s_tilde_conj() * conj_exp(self.q0))]),
            rel_eq("1/a + 1/b = 1/p0 - 1/q0", 1.0 / self.a + 1.0 / self.b, 1.0 / self.p0 - 1.0 / self.q0, tol),
            {
                let ac = conj_exp(self.a);
                IdentityCheck { name: "b >= a'", lhs: self.b, rhs: ac, holds: self.b >= ac * (1.0 - tol) }
            },
            worst("b/a = r-1 = s't/t'", &[(self.b / self.a, self.r - 1.0), (self.b / self.a, self.s_conj * self.t / tc)]),
            rel_eq("alpha = t'/b + 1/p'", self.alpha, tc / self.b + 1.0 / conj_exp(self.p), tol),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubeTerm {
    pub cube: DyadicInterval,
    /// `|P| |<<f>> . <<g>>|` as evaluated.
    pub value: f64,
    pub distortion: f64,
}

#[derive(Clone, Debug)]
pub struct SparseFormReport {
    pub value: f64,
    /// Per-cube contributions in summation order.
    pub terms: Vec<CubeTerm>,
    /// Worst `sqrt(rank_f rank_g)` over the cubes: the surrogate value can
    /// undershoot the true term by at most this factor.
    pub distortion: f64,
    /// Some `lambda P` reached outside the domain.
    pub zero_extended: bool,
}

/// `|K L|` for one cube from the two averages, exactly in `d = 1` and through
/// John surrogates otherwise. Returns the value and `sqrt(rank_f rank_g)`.
pub fn cube_term(f_avg: &ConvexAverage, g_avg: &ConvexAverage, grids: &mut GridCache) -> Result<(f64, f64)> {
    if f_avg.dim == 1 {
        let one = CVector::from_element(1, C64::new(1.0, 0.0));
        return Ok((f_avg.support(&one) * g_avg.support(&one), 1.0));
    }
    let sf = john_surrogate(f_avg, grids)?;
    let sg = john_surrogate(g_avg, grids)?;
    let val = spectral_norm(&(&sg.shape * &sf.shape));
    Ok((val, ((sf.rank * sg.rank) as f64).sqrt().max(1.0)))
}

/// `sum_P |P| |<<f>>_{L^{p0}(lambda P)} . <<g>>_{L^{q0'}(lambda P)}|`, summed in
/// `(level, index)` order.
pub fn sparse_form(s: &SparseCollection, f: &VectorField, g: &VectorField, p0: f64, q0: f64, lambda: f64) -> Result<SparseFormReport> {
    if f.dim() != g.dim() || f.grid() != g.grid() {
        return param("f and g must share grid and dimension");
    }
    if !(1.0 <= p0 && p0 < q0) {
        return param("need 1 <= p0 < q0");
    }
    let r2 = conj_exp(q0);
    let mut grids = GridCache::new();
    let mut terms = Vec::with_capacity(s.len());
    let mut value = 0.0;
    let mut distortion = 1.0f64;
    let mut zero_extended = false;
    for q in s.intervals() {
        let iv = dilate(q, lambda)?;
        let fa = convex_average(f, &iv, p0)?;
        let ga = convex_average(g, &iv, r2)?;
        zero_extended |= fa.zero_extended;
        let (dot, dist) = cube_term(&fa, &ga, &mut grids)?;
        distortion = distortion.max(dist);
        let term = q.length() * dot;
        value += term;
        terms.push(CubeTerm { cube: *q, value: term, distortion: dist });
    }
    Ok(SparseFormReport { value, terms, distortion, zero_extended })
}

impl SparseFormReport {
    /// Value and distortion of the form over the members of level at most
    /// `depth`. Those are a prefix of the summation order, so this equals
    /// [`sparse_form`] on the truncated collection bit for bit.
    pub fn truncated(&self, depth: i32) -> (f64, f64) {
        let mut value = 0.0;
        let mut distortion = 1.0f64;
        for t in self.terms.iter().take_while(|t| t.cube.level <= depth) {
            value += t.value;
            distortion = distortion.max(t.distortion);
        }
        (value, distortion)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneScale {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs - 1`; at most the slack budget when the check passes.
    pub slack: f64,
    /// Dimension of the span of `<<f>>` used for the John ellipsoid.
    pub rank: usize,
    pub dot: f64,
}

/// Coordinates of `f` in the John frame of `<<f>>` against the dual frame for `g`:
/// `lhs = sum_i ||x_i||_{r1} ||y_i||_{r2}` and `rhs = d^{3/2} |<<f>> . <<g>>|`.
pub fn one_scale_check(f: &VectorField, g: &VectorField, q: &DyadicInterval, lambda: f64, r1: f64, r2: f64) -> Result<OneScale> {
    if f.dim() != g.dim() || f.grid() != g.grid() {
        return param("f and g must share grid and dimension");
    }
    let d = f.dim();
    let iv = dilate(q, lambda)?;
    let fa = convex_average(f, &iv, r1)?;
    let ga = convex_average(g, &iv, r2)?;
    let mut grids = GridCache::new();
    let sur = john_surrogate(&fa, &mut grids)?;
    let dot = average_dot(&fa, &ga, &*grids.get(d)?)?;
    let rhs = (d as f64).powf(1.5) * dot;
    let mut lhs = 0.0;
    if sur.rank > 0 {
        // A maps the John ellipsoid to the unit ball inside the span; the dual
        // frame for g is (A*)^{-1} = inner (Hermitian)
        let a = crate::hermitian::PdMatrix::new(sur.inner.clone())?.inverse().into_matrix();
        let fx = fa.project(&sur.basis);
        let gx = ga.project(&sur.basis);
        for i in 0..sur.rank {
            let mut e = CVector::zeros(sur.rank);
            e[i] = C64::new(1.0, 0.0);
            let xi = coordinate_norm(&fx, &a, &e);
            let yi = coordinate_norm(&gx, &sur.inner, &e);
            lhs += xi * yi;
        }
    }
    let slack = if rhs > 0.0 { lhs / rhs - 1.0 } else if lhs > 0.0 { f64::INFINITY } else { -1.0 };
    Ok(OneScale { lhs, rhs, slack, rank: sur.rank, dot })
}

/// `(avg |<M x, e>|^p)^{1/p}` over the runs of an average.
fn coordinate_norm(avg: &ConvexAverage, m: &CMatrix, e: &CVector) -> f64 {
    avg.runs.iter().map(|(x, w)| w * pairing(&(m * x), e).norm().powf(avg.p)).sum::<f64>().powf(1.0 / avg.p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem14 {
    pub form: f64,
    /// `[W^{s'}]_{A_{a',b}}` over the family; `None` past the overflow guard.
    pub char: Option<f64>,
    pub norm_f: f64,
    pub norm_g: f64,
    /// `form eps / (char^alpha |f| |g|)`; `None` when unbounded.
    pub ratio: Option<f64>,
    pub distortion: f64,
}

/// Matrix characteristic appearing in the bound: `[W^{s'}]_{A_{a',b}}`.
pub fn profile_characteristic(w: &PiecewiseWeight, prof: &ExponentProfile, family: &IntervalFamily) -> Result<Option<f64>> {
    let v = w.cellwise_power(prof.s_conj)?;
    let c = apq_characteristic(&v, conj_exp(prof.a), prof.b, family)?.value;
    Ok((c.is_finite() && c <= OVERFLOW_GUARD).then_some(c))
}

/// Both sides of the weighted sparse bound for one instance, with the form
/// supplied by the caller (so nested collections can reuse per-cube terms).
pub fn theorem14_ratio(form: f64, epsilon: f64, char: Option<f64>, prof: &ExponentProfile, norm_f: f64, norm_g: f64, distortion: f64) -> Theorem14 {
    let ratio = if form == 0.0 {
        Some(0.0)
    } else {
        char.map(|c| form * epsilon / (c.powf(prof.alpha) * norm_f * norm_g))
    };
    Theorem14 { form, char, norm_f, norm_g, ratio, distortion }
}

/// `||f||_{L^p(W)}` and `||g||_{L^{p'}(W')}` with `W' = W^{-1/(p-1)}`.
pub fn theorem14_norms(w: &PiecewiseWeight, f: &VectorField, g: &VectorField, prof: &ExponentProfile) -> Result<(f64, f64)> {
    let norm_f = weighted_norm(f, w, prof.p)?;
    let w_dual = w.cellwise_power(-1.0 / (prof.p - 1.0))?;
    Ok((norm_f, weighted_norm(g, &w_dual, conj_exp(prof.p))?))
}

pub fn theorem14_experiment(w: &PiecewiseWeight, s: &SparseCollection, f: &VectorField, g: &VectorField, prof: &ExponentProfile, family: &IntervalFamily, lambda: f64) -> Result<Theorem14> {
    let form = sparse_form(s, f, g, prof.p0, prof.q0, lambda)?;
    let char = profile_characteristic(w, prof, family)?;
    let (norm_f, norm_g) = theorem14_norms(w, f, g, prof)?;
    Ok(theorem14_ratio(form.value, s.epsilon(), char, prof, norm_f, norm_g, form.distortion))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lemma42 {
    pub theta: f64,
    pub q: f64,
    /// `(q')^q`.
    pub value: f64,
    /// `e (t+1) / (delta (t-1))`.
    pub bound: f64,
    pub holds: bool,
    /// `q - 1` against `delta (t-1) / (1+delta)`.
    pub y: f64,
    pub y_closed: f64,
}

/// `theta = t'(1+delta)`, `q = t/theta'` and the bound on `(q')^q`.
pub fn lemma42_check(t: f64, delta: f64) -> Result<Lemma42> {
    if !(t > 1.0 && t.is_finite() && delta > 0.0 && delta < 1.0) {
        return param("need t > 1 and 0 < delta < 1");
    }
    let theta = conj_exp(t) * (1.0 + delta);
    let q = t / conj_exp(theta);
    let value = conj_exp(q).powf(q);
    let bound = core::f64::consts::E * (t + 1.0) / (delta * (t - 1.0));
    Ok(Lemma42 { theta, q, value, bound, holds: value <= bound, y: q - 1.0, y_closed: delta * (t - 1.0) / (1.0 + delta) })
}
