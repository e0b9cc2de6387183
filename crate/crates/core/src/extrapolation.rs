//! Exponent calculus for limited-range extrapolation, the dyadic
//! convex-set-valued maximal function and a finite Rubio de Francia iteration.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused whenever std is linked: its inherent float methods win
use num_traits::Float as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use crate::characteristics::matrix_a1;
use crate::conj_of_ratio;
use crate::error::{param, Error, Result};
use crate::geometry::{DirectionGrid, SupportBody};
use crate::hermitian::{gaussian, CMatrix, PdMatrix};
use crate::weight::{CellGrid, PiecewiseWeight};

/// `t(p) = p/p0`, `s(p) = q0/p`, `r(p) = s(p)'(t(p)-1)+1` for `1 <= p0 < q0 <= inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtrapolationProfile {
    pub p0: f64,
    pub q0: f64,
}

impl ExtrapolationProfile {
    pub fn new(p0: f64, q0: f64) -> Result<Self> {
        if !(p0 >= 1.0 && p0.is_finite() && q0 > p0) {
            return param(format!("need 1 <= p0 < q0 <= inf (got p0={p0}, q0={q0})"));
        }
        Ok(Self { p0, q0 })
    }

    fn check(&self, p: f64) -> Result<()> {
        if !(p >= self.p0 && p <= self.q0) {
            return param(format!("exponent {p} outside [{}, {}]", self.p0, self.q0));
        }
        Ok(())
    }

    pub fn t(&self, p: f64) -> f64 {
        p / self.p0
    }

    pub fn s(&self, p: f64) -> f64 {
        self.q0 / p
    }

    pub fn s_conj(&self, p: f64) -> f64 {
        conj_of_ratio(self.q0, p)
    }

    pub fn r(&self, p: f64) -> f64 {
        self.s_conj(p) * (self.t(p) - 1.0) + 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphaCase {
    /// `q < p < q0`
    Interior,
    /// `q < p = q0`
    Endpoint,
    /// `p <= q`
    Below,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alpha {
    pub value: f64,
    pub case: AlphaCase,
    /// `p = q` or `p = q0`, where neighbouring cases meet.
    pub boundary: bool,
}

/// Exponent on the characteristic when extrapolating from `p` to `q`.
pub fn alpha(prof: &ExtrapolationProfile, p: f64, q: f64) -> Result<Alpha> {
    prof.check(p)?;
    if !(q > prof.p0 && q < prof.q0) {
        return param(format!("target exponent {q} outside ({}, {})", prof.p0, prof.q0));
    }
    let boundary = p == q || p == prof.q0;
    let (value, case) = if p <= q {
        (1.0, AlphaCase::Below)
    } else if p == prof.q0 {
        (1.0 / (prof.r(q) - 1.0), AlphaCase::Endpoint)
    } else {
        ((prof.r(p) - 1.0) / (prof.r(q) - 1.0), AlphaCase::Interior)
    };
    Ok(Alpha { value, case, boundary })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtrapolationIdentities {
    /// `s(p)'s(q)'(p-q)` against `p s(p)' - q s(q)'`.
    pub first: (f64, f64),
    /// `r(p)/r(q)` against `p s(p)' / (q s(q)')`.
    pub second: (f64, f64),
    pub holds: bool,
}

pub fn identity_check(prof: &ExtrapolationProfile, p: f64, q: f64, tol: f64) -> Result<ExtrapolationIdentities> {
    for x in [p, q] {
        if !(x >= prof.p0 && x < prof.q0) {
            return param(format!("exponent {x} outside [{}, {})", prof.p0, prof.q0));
        }
    }
    let (sp, sq) = (prof.s_conj(p), prof.s_conj(q));
    let first = (sp * sq * (p - q), p * sp - q * sq);
    let second = (prof.r(p) / prof.r(q), p * sp / (q * sq));
    let close = |(a, b): (f64, f64)| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);
    Ok(ExtrapolationIdentities { first, second, holds: close(first) && close(second) })
}

/// One body per grid cell, all on the same direction grid.
#[derive(Clone, Debug)]
pub struct BodyField {
    grid: CellGrid,
    bodies: Vec<SupportBody>,
}

impl BodyField {
    pub fn new(grid: CellGrid, bodies: Vec<SupportBody>) -> Result<Self> {
        if bodies.len() != grid.count() {
            return Err(Error::DimensionMismatch(bodies.len(), grid.count()));
        }
        if let Some(first) = bodies.first() {
            let dirs = first.grid();
            if bodies.iter().any(|b| !Arc::ptr_eq(b.grid(), dirs) && **b.grid() != **dirs) {
                return Err(Error::GridMismatch);
            }
        }
        Ok(Self { grid, bodies })
    }

    /// `c(x) A(x) B` with `A(x)` positive definite.
    pub fn ellipsoids(grid: CellGrid, dirs: Arc<DirectionGrid>, coeff: &[f64], shapes: &[CMatrix]) -> Result<Self> {
        if coeff.len() != grid.count() || shapes.len() != grid.count() {
            return Err(Error::DimensionMismatch(coeff.len(), grid.count()));
        }
        let bodies = coeff
            .iter()
            .zip(shapes)
            .map(|(&c, a)| {
                if !(c >= 0.0) {
                    return param("ellipsoid radii must be nonnegative");
                }
                SupportBody::from_fn(dirs.clone(), |v| c * (a * v).norm())
            })
            .collect::<Result<_>>()?;
        Self::new(grid, bodies)
    }

    /// `W(x) B` for a weight.
    pub fn from_weight(w: &PiecewiseWeight, dirs: Arc<DirectionGrid>) -> Result<Self> {
        let shapes: Vec<CMatrix> = (0..w.cell_count()).map(|i| w.value(i).matrix().clone()).collect();
        Self::ellipsoids(w.grid(), dirs, &alloc::vec![1.0; w.cell_count()], &shapes)
    }

    pub fn grid(&self) -> CellGrid {
        self.grid
    }

    pub fn directions(&self) -> &Arc<DirectionGrid> {
        self.bodies[0].grid()
    }

    pub fn bodies(&self) -> &[SupportBody] {
        &self.bodies
    }

    pub fn body(&self, cell: usize) -> &SupportBody {
        &self.bodies[cell]
    }
}

/// For every cell `x`, `max_{Q ∋ x} avg_Q a` over dyadic `Q` inside the domain
/// no finer than the grid. Each average is a left-to-right sum over its cells
/// divided by the cell count, so results are reproducible bit for bit.
pub(crate) fn dyadic_max_average(grid: &CellGrid, a: &[f64]) -> Vec<f64> {
    let mut best = a.to_vec();
    for shift in 1..=(grid.level - grid.domain.top_level()) as u32 {
        let len = 1usize << shift;
        for (block, cells) in a.chunks_exact(len).enumerate() {
            let avg = cells.iter().sum::<f64>() / len as f64;
            for b in &mut best[block * len..(block + 1) * len] {
                *b = b.max(avg);
            }
        }
    }
    best
}

/// Dyadic `M^K F`: support values per direction are maxima over containing
/// dyadic intervals of averaged support values.
pub fn convex_maximal(f: &BodyField) -> Result<BodyField> {
    let dirs = f.directions().clone();
    let n = f.grid.count();
    let mut out: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(dirs.len()); n];
    let mut column = alloc::vec![0.0; n];
    for k in 0..dirs.len() {
        for (c, b) in column.iter_mut().zip(&f.bodies) {
            *c = b.support(k);
        }
        for (o, m) in out.iter_mut().zip(dyadic_max_average(&f.grid, &column)) {
            o.push(m);
        }
    }
    let bodies = out.into_iter().map(|h| SupportBody::from_values(dirs.clone(), h)).collect::<Result<_>>()?;
    BodyField::new(f.grid, bodies)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct A1kReport {
    /// `max_{x,v} h_{M^K F(x)}(v) / h_{F(x)}(v)`; infinite if `F(x)` misses a
    /// direction that `M^K F(x)` reaches.
    pub worst_ratio: f64,
    pub holds: bool,
}

/// `M^K F(x) ⊆ C F(x)` direction by direction.
pub fn a1k_check(f: &BodyField, c: f64) -> Result<A1kReport> {
    if !(c > 0.0) {
        return param("A_1^K constant must be positive");
    }
    let m = convex_maximal(f)?;
    let mut worst = 0.0f64;
    for (fb, mb) in f.bodies.iter().zip(&m.bodies) {
        for (&a, &b) in fb.values().iter().zip(mb.values()) {
            if b > 0.0 {
                worst = worst.max(if a > 0.0 { b / a } else { f64::INFINITY });
            }
        }
    }
    Ok(A1kReport { worst_ratio: worst, holds: worst <= c * (1.0 + 1e-12) })
}

/// Largest grid accepted by [`rdf_iterate`].
pub const RDF_MAX_CELLS: usize = 1 << 10;
/// Number of seeded probe inputs used to bound the operator norm.
pub const RDF_PROBES: usize = 32;
/// Per-direction tolerance for the containment checks.
pub const RDF_TOL: f64 = 1e-6;

/// The operator `P H = |V^{1/r} M^K(Σ H)| W^{-1/r} B` restricted to fields
/// `H = h W^{-1/r} B`, acting on the coefficient `h`. Here `V = W^{s(q)'}`,
/// `r = r(q)` and `Σ = W^{1/r} V^{-1/r}`, so `Σ H = h V^{-1/r} B`.
///
/// The magnitude `|K| = sup_u h_K(u)` is taken over the orbit representatives
/// of the direction grid (`u = V(x)^{-1/r} w / |V(x)^{-1/r} w|` for grid `w`),
/// exact in `d = 1`. The restricted operator is still sublinear and monotone,
/// which is all the iteration needs.
#[derive(Clone, Debug)]
pub struct RdfOperator {
    grid: CellGrid,
    /// `|V(y)^{-1/r} w|`, cell-major over orbit representatives.
    lens: Vec<f64>,
    orbits: usize,
    pub r: f64,
}

impl RdfOperator {
    pub fn new(w: &PiecewiseWeight, prof: &ExtrapolationProfile, q: f64, dirs: &DirectionGrid) -> Result<Self> {
        if !(q > prof.p0 && q < prof.q0) {
            return param(format!("target exponent {q} outside ({}, {})", prof.p0, prof.q0));
        }
        if dirs.dim() != w.dim() {
            return Err(Error::DimensionMismatch(dirs.dim(), w.dim()));
        }
        let r = prof.r(q);
        let pow = -prof.s_conj(q) / r;
        let pal: Vec<PdMatrix> = w.palette().iter().map(|m| m.pow(pow)).collect::<Result<_>>()?;
        let orbits = dirs.orbit_count();
        let per_palette: Vec<Vec<f64>> = pal.iter().map(|m| dirs.representatives().map(|v| m.apply_norm(v)).collect()).collect();
        let mut lens = Vec::with_capacity(w.cell_count() * orbits);
        for &c in w.cell_indices() {
            lens.extend_from_slice(&per_palette[c as usize]);
        }
        Ok(Self { grid: w.grid(), lens, orbits, r })
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let n = self.grid.count();
        let mut out = alloc::vec![0.0f64; n];
        let mut a = alloc::vec![0.0; n];
        for j in 0..self.orbits {
            for (y, ay) in a.iter_mut().enumerate() {
                *ay = h[y] * self.lens[y * self.orbits + j];
            }
            let m = dyadic_max_average(&self.grid, &a);
            for x in 0..n {
                out[x] = out[x].max(m[x] / self.lens[x * self.orbits + j]);
            }
        }
        out
    }

    /// `||h W^{-1/r} B||_{L^r_K(W)} = ||h||_{L^r}`.
    pub fn norm(&self, h: &[f64]) -> f64 {
        (h.iter().map(|x| x.powf(self.r)).sum::<f64>() * self.grid.cell_len()).powf(1.0 / self.r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RdfTraceRow {
    pub k: usize,
    /// `||P^k G||`.
    pub term_norm: f64,
    /// `||SG_k||` for the partial sum through `k`.
    pub cumulative_norm: f64,
    /// `max_x P(SG_k)(x) / (2B SG_k(x)) - 1`.
    pub containment_slack: f64,
}

#[derive(Clone, Debug)]
pub struct RdfReport {
    /// Coefficient of `SG = sg W^{-1/r} B`.
    pub sg: Vec<f64>,
    /// The operator-norm bound used in the series.
    pub b: f64,
    pub norm_g: f64,
    pub norm_sg: f64,
    /// `G(x) ⊆ SG(x)` in every grid direction.
    pub contains_g: bool,
    /// `||SG|| <= 2||G||` plus truncation allowance.
    pub norm_bound: bool,
    /// `P(SG)(x) ⊆ 2B SG(x)` up to the truncation tail.
    pub invariance: bool,
    /// Worst relative deviation of `SG` from `sg W^{-1/r} B` over cells and directions.
    pub ellipsoid_deviation: f64,
    pub trace: Vec<RdfTraceRow>,
}

impl RdfReport {
    pub fn all_hold(&self) -> bool {
        self.contains_g && self.norm_bound && self.invariance && self.ellipsoid_deviation <= RDF_TOL
    }
}

/// Coefficient `g` with `G(x) = g(x) W(x)^{-1/r} B`, or an error when some
/// cell is not of that form.
pub fn ellipsoid_coefficient(g: &BodyField, w: &PiecewiseWeight, r: f64) -> Result<Vec<f64>> {
    if g.grid != w.grid() || g.directions().dim() != w.dim() {
        return param("body field and weight must share grid and dimension");
    }
    let dirs = g.directions().clone();
    let pal: Vec<PdMatrix> = w.palette().iter().map(|m| m.pow(-1.0 / r)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(g.bodies.len());
    for (x, body) in g.bodies.iter().enumerate() {
        let m = &pal[w.cell_indices()[x] as usize];
        let ratios: Vec<f64> = dirs.representatives().enumerate().map(|(j, v)| body.orbit_support(j) / m.apply_norm(v)).collect();
        let c = ratios[0];
        if ratios.iter().any(|&t| (t - c).abs() > 1e-9 * c.max(1e-300)) {
            return param(format!("body at cell {x} is not ellipsoid-valued with respect to W^(-1/r)"));
        }
        out.push(c);
    }
    Ok(out)
}

/// Rubio de Francia series `SG = sum_{k <= k_max} P^k G / (2B)^k` for `G`
/// ellipsoid-valued with respect to `W^{-1/r(q)}`.
///
/// `B` is twice the largest measured ratio `||P H|| / ||H||` over the iterates
/// and [`RDF_PROBES`] seeded positive inputs, so the three conclusions are
/// checked with the operator norm replaced by `B`.
pub fn rdf_iterate(g: &BodyField, w: &PiecewiseWeight, q: f64, prof: &ExtrapolationProfile, k_max: usize) -> Result<RdfReport> {
    if w.dim() > 2 {
        return Err(Error::Dimension(w.dim()));
    }
    if w.cell_count() > RDF_MAX_CELLS {
        return param(format!("grid has {} cells, at most {RDF_MAX_CELLS} supported", w.cell_count()));
    }
    let dirs = g.directions().clone();
    let op = RdfOperator::new(w, prof, q, &dirs)?;
    let r = op.r;
    let g0 = ellipsoid_coefficient(g, w, r)?;
    let norm_g = op.norm(&g0);

    let mut iterates = alloc::vec![g0.clone()];
    let mut ratio = 0.0f64;
    for _ in 0..=k_max {
        let prev = iterates.last().unwrap();
        let next = op.apply(prev);
        let (a, b) = (op.norm(prev), op.norm(&next));
        if a > 0.0 {
            ratio = ratio.max(b / a);
        }
        iterates.push(next);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..RDF_PROBES {
        let h: Vec<f64> = (0..w.cell_count()).map(|_| gaussian(&mut rng).exp()).collect();
        ratio = ratio.max(op.norm(&op.apply(&h)) / op.norm(&h));
    }
    if !ratio.is_finite() || ratio > 1e12 {
        return param(format!("operator norm estimate diverged ({ratio})"));
    }
    let b = 2.0 * ratio.max(f64::MIN_POSITIVE);

    let n = w.cell_count();
    let mut sg = alloc::vec![0.0; n];
    let mut trace = Vec::with_capacity(k_max + 1);
    for (k, it) in iterates.iter().take(k_max + 1).enumerate() {
        let scale = (2.0 * b).powi(-(k as i32));
        for (s, x) in sg.iter_mut().zip(it) {
            *s += x * scale;
        }
        let psg = op.apply(&sg);
        let slack = psg.iter().zip(&sg).filter(|(_, &s)| s > 0.0).map(|(p, s)| p / (2.0 * b * s) - 1.0).fold(f64::NEG_INFINITY, f64::max);
        trace.push(RdfTraceRow { k, term_norm: op.norm(it), cumulative_norm: op.norm(&sg), containment_slack: slack });
    }
    // sublinearity: P(SG) <= 2B SG + P^{k_max+1} G / (2B)^{k_max}
    let tail_scale = (2.0 * b).powi(-(k_max as i32));
    let tail: Vec<f64> = iterates[k_max + 1].iter().map(|x| x * tail_scale).collect();
    let psg = op.apply(&sg);

    // per-direction checks on the actual bodies
    let pal: Vec<PdMatrix> = w.palette().iter().map(|m| m.pow(-1.0 / r)).collect::<Result<_>>()?;
    let shapes: Vec<CMatrix> = w.cell_indices().iter().map(|&c| pal[c as usize].matrix().clone()).collect();
    let g_body = BodyField::ellipsoids(w.grid(), dirs.clone(), &g0, &shapes)?;
    let sg_body = BodyField::ellipsoids(w.grid(), dirs.clone(), &sg, &shapes)?;
    let psg_body = BodyField::ellipsoids(w.grid(), dirs.clone(), &psg, &shapes)?;
    let tail_body = BodyField::ellipsoids(w.grid(), dirs.clone(), &tail, &shapes)?;
    let mut contains_g = true;
    let mut invariance = true;
    for x in 0..n {
        let (gv, sv, pv, tv) = (g_body.body(x).values(), sg_body.body(x).values(), psg_body.body(x).values(), tail_body.body(x).values());
        for k in 0..dirs.len() {
            contains_g &= gv[k] <= sv[k] * (1.0 + RDF_TOL);
            invariance &= pv[k] <= (2.0 * b * sv[k] + tv[k]) * (1.0 + RDF_TOL);
        }
    }
    // the summed bodies, built as Minkowski sums of the terms
    let mut ellipsoid_deviation = 0.0f64;
    for x in 0..n {
        let mut acc = alloc::vec![0.0; dirs.len()];
        for (k, it) in iterates.iter().take(k_max + 1).enumerate() {
            let c = it[x] * (2.0 * b).powi(-(k as i32));
            for (a, v) in acc.iter_mut().zip(dirs.directions()) {
                *a += c * (&shapes[x] * v).norm();
            }
        }
        for (a, s) in acc.iter().zip(sg_body.body(x).values()) {
            if *s > 0.0 {
                ellipsoid_deviation = ellipsoid_deviation.max((a / s - 1.0).abs());
            }
        }
    }
    let norm_sg = op.norm(&sg);
    let allowance = 2.0 + 0.5f64.powi(k_max as i32 - 2);
    Ok(RdfReport {
        sg,
        b,
        norm_g,
        norm_sg,
        contains_g,
        norm_bound: norm_sg <= allowance * norm_g,
        invariance,
        ellipsoid_deviation,
        trace,
    })
}

/// `g W^{-1/r(q)} B` for a positive coefficient.
pub fn ellipsoid_field(w: &PiecewiseWeight, g: &[f64], r: f64, dirs: Arc<DirectionGrid>) -> Result<BodyField> {
    let pal: Vec<PdMatrix> = w.palette().iter().map(|m| m.pow(-1.0 / r)).collect::<Result<_>>()?;
    let shapes: Vec<CMatrix> = w.cell_indices().iter().map(|&c| pal[c as usize].matrix().clone()).collect();
    BodyField::ellipsoids(w.grid(), dirs, g, &shapes)
}

/// Lognormal positive coefficients, one per cell.
pub fn random_coefficient(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| gaussian(&mut rng).exp()).collect()
}
