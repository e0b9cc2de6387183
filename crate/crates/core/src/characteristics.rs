//! Muckenhoupt and reverse Hölder characteristics of piecewise-constant
//! matrix weights, reducing operators, and the comparison harnesses built on them.
//!
//! Every supremum over intervals is a maximum over an explicit
//! [`IntervalFamily`]; reports carry the family descriptor.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused whenever std is linked: its inherent float methods win
use num_traits::Float as _;

use crate::conj_exp;
use crate::dyadic::Interval;
use crate::error::{param, Error, Result};
use crate::geometry::{adapted_directions, lowner_ellipsoid, DirectionGrid, MVEE_TOL};
use crate::hermitian::{appendix_pair, spectral_norm, CMatrix, CVector, Family, PdMatrix};
use crate::weight::{counterexample_weight, CellGrid, PiecewiseWeight};

/// Largest palette for which pair tables are precomputed.
pub const MAX_TABLE_PALETTE: usize = 2048;
/// Prefix-count tables are used when `cells * palette` stays below this.
const PREFIX_BUDGET: usize = 1 << 25;
/// Tolerance on the constraint `q2/p2' = q1/p1'`.
pub const CONSTRAINT_TOL: f64 = 1e-10;
/// Relative slack allowed in ordering checks.
pub const ORDER_SLACK: f64 = 1e-9;
const ADAPT_PASSES: usize = 6;

/// Intervals over which a supremum is taken.
#[derive(Clone, Debug, PartialEq)]
pub enum IntervalFamily {
    /// Dyadic intervals from the domain's top level down to `max_level`
    /// (or the grid level if finer is requested or `None`).
    Dyadic { max_level: Option<i32> },
    /// For each level `L`, every run of `1..=max_cells` consecutive level-`L`
    /// dyadic intervals inside the domain.
    SlidingWindows { levels: Vec<i32>, max_cells: usize },
    Explicit(Vec<Interval>),
}

impl IntervalFamily {
    pub fn dyadic() -> Self {
        IntervalFamily::Dyadic { max_level: None }
    }

    /// Windows on every level from the domain's top level to the grid level.
    pub fn all_windows(grid: &CellGrid, max_cells: usize) -> Self {
        IntervalFamily::SlidingWindows { levels: (grid.domain.top_level()..=grid.level).collect(), max_cells }
    }

    pub fn descriptor(&self) -> String {
        match self {
            IntervalFamily::Dyadic { max_level: Some(l) } => format!("dyadic(max_level={l})"),
            IntervalFamily::Dyadic { max_level: None } => "dyadic(full)".into(),
            IntervalFamily::SlidingWindows { levels, max_cells } => {
                let (lo, hi) = (levels.iter().min(), levels.iter().max());
                match (lo, hi) {
                    (Some(lo), Some(hi)) => format!("windows(levels={lo}..{hi},max_cells={max_cells})"),
                    _ => format!("windows(levels=none,max_cells={max_cells})"),
                }
            }
            IntervalFamily::Explicit(v) => format!("explicit({})", v.len()),
        }
    }

    /// Members on the given grid, coarse to fine.
    pub fn members(&self, grid: &CellGrid) -> Result<Vec<Interval>> {
        let dom = grid.domain;
        let out: Vec<Interval> = match self {
            IntervalFamily::Dyadic { max_level } => {
                let hi = max_level.unwrap_or(grid.level).min(grid.level);
                (dom.top_level()..=hi).flat_map(|l| dom.dyadic_at(l)).map(|q| q.interval()).collect()
            }
            IntervalFamily::SlidingWindows { levels, max_cells } => {
                let mut out = Vec::new();
                for &l in levels {
                    if l < dom.top_level() || l > grid.level {
                        return param(format!("window level {l} outside {}..={}", dom.top_level(), grid.level));
                    }
                    let h = 2f64.powi(-l);
                    let n = (dom.len() / h).round() as usize;
                    for i in 0..n {
                        for len in 1..=(*max_cells).min(n - i) {
                            out.push(Interval::new(dom.lo() + i as f64 * h, dom.lo() + (i + len) as f64 * h));
                        }
                    }
                }
                out
            }
            IntervalFamily::Explicit(v) => {
                for iv in v {
                    check_interval(grid, iv)?;
                }
                v.clone()
            }
        };
        if out.is_empty() {
            return Err(Error::EmptyFamily);
        }
        Ok(out)
    }
}

fn check_interval(grid: &CellGrid, iv: &Interval) -> Result<()> {
    if iv.is_empty() || !grid.contains(iv) {
        return Err(Error::OutsideDomain { lo: iv.lo, hi: iv.hi });
    }
    Ok(())
}

/// Maximum over a family, with the maximizing interval and per-member values.
#[derive(Clone, Debug)]
pub struct CharReport {
    pub value: f64,
    pub argmax: Interval,
    pub family: String,
    pub count: usize,
    pub per_interval: Vec<(Interval, f64)>,
}

/// Normalized palette measures `m_j = |{x in I : W(x) = W_j}| / |I|`.
pub(crate) struct Measures<'a> {
    w: &'a PiecewiseWeight,
    prefix: Option<Vec<u32>>,
    acc: Vec<f64>,
    touched: Vec<usize>,
}

impl<'a> Measures<'a> {
    pub(crate) fn new(w: &'a PiecewiseWeight) -> Self {
        let np = w.palette().len();
        let n = w.cell_count();
        let prefix = (np > 1 && np <= 64 && n.saturating_mul(np) <= PREFIX_BUDGET && n > 64).then(|| {
            let mut t = alloc::vec![0u32; (n + 1) * np];
            for (i, &c) in w.cell_indices().iter().enumerate() {
                let (prev, next) = t.split_at_mut((i + 1) * np);
                next[..np].copy_from_slice(&prev[i * np..]);
                next[c as usize] += 1;
            }
            t
        });
        Self { w, prefix, acc: alloc::vec![0.0; np], touched: Vec::new() }
    }


    /// Sorted `(palette index, normalized measure)` pairs with positive measure.
    pub(crate) fn of(&mut self, iv: &Interval) -> Vec<(usize, f64)> {
        let grid = self.w.grid();
        let cells = self.w.cell_indices();
        let clipped = iv.intersect(&grid.domain.interval());
        if clipped.is_empty() {
            return Vec::new();
        }
        let h = grid.cell_len();
        let lo = grid.domain.lo();
        let a = (clipped.lo - lo) / h;
        let b = (clipped.hi - lo) / h;
        let ia = a.floor().max(0.0) as usize;
        let ib = (b.ceil() as usize).min(grid.count());
        let (acc, touched) = (&mut self.acc, &mut self.touched);
        let mut add = |k: usize, m: f64| {
            if acc[k] == 0.0 {
                touched.push(k);
            }
            acc[k] += m;
        };
        match &self.prefix {
            Some(t) if ib - ia > 2 => {
                let np = self.w.palette().len();
                let first = ((ia + 1) as f64 - a) * h;
                let last = (b - (ib - 1) as f64) * h;
                add(cells[ia] as usize, first);
                add(cells[ib - 1] as usize, last);
                for k in 0..np {
                    let c = t[(ib - 1) * np + k] - t[(ia + 1) * np + k];
                    if c > 0 {
                        add(k, c as f64 * h);
                    }
                }
            }
            _ => {
                for (i, &c) in cells.iter().enumerate().take(ib).skip(ia) {
                    let m = grid.cell_interval(i).intersect(&clipped).len();
                    if m > 0.0 {
                        add(c as usize, m);
                    }
                }
            }
        }
        let total = iv.len();
        let mut out: Vec<(usize, f64)> = self.touched.drain(..).map(|k| (k, self.acc[k] / total)).collect();
        for &(k, _) in &out {
            self.acc[k] = 0.0;
        }
        out.retain(|&(_, m)| m > 0.0);
        out.sort_unstable_by_key(|&(k, _)| k);
        out
    }
}

/// `K(j, k)` over a palette, either tabulated or computed on demand.
struct Kernel<F> {
    n: usize,
    table: Option<Vec<f64>>,
    f: F,
}

impl<F: Fn(usize, usize) -> f64> Kernel<F> {
    fn tabulated(n: usize, f: F) -> Result<Self> {
        if n > MAX_TABLE_PALETTE {
            return param(format!("palette of {n} values exceeds the pair-table limit {MAX_TABLE_PALETTE}"));
        }
        let mut t = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                t.push(f(j, k));
            }
        }
        Ok(Self { n, table: Some(t), f })
    }

    fn lazy(n: usize, f: F) -> Self {
        Self { n, table: None, f }
    }

    fn get(&self, j: usize, k: usize) -> f64 {
        match &self.table {
            Some(t) => t[j * self.n + k],
            None => (self.f)(j, k),
        }
    }

    /// `sum_j m_j (sum_k m_k K(j,k))^e`.
    fn double_average(&self, ms: &[(usize, f64)], e: f64) -> f64 {
        ms.iter().map(|&(j, mj)| mj * self.inner(ms, j).powf(e)).sum()
    }

    /// `max_j sum_k m_k K(j,k)`.
    fn sup_average(&self, ms: &[(usize, f64)]) -> f64 {
        ms.iter().map(|&(j, _)| self.inner(ms, j)).fold(0.0, f64::max)
    }

    fn inner(&self, ms: &[(usize, f64)], j: usize) -> f64 {
        ms.iter().map(|&(k, mk)| mk * self.get(j, k)).sum()
    }
}

fn sweep(w: &PiecewiseWeight, family: &IntervalFamily, mut local: impl FnMut(&[(usize, f64)]) -> f64) -> Result<CharReport> {
    let members = family.members(&w.grid())?;
    let mut meas = Measures::new(w);
    let mut per_interval = Vec::with_capacity(members.len());
    let mut best = (f64::NEG_INFINITY, members[0]);
    for iv in members {
        let v = local(&meas.of(&iv));
        if v > best.0 || v.is_nan() {
            best = (v, iv);
        }
        per_interval.push((iv, v));
    }
    Ok(CharReport { value: best.0, argmax: best.1, family: family.descriptor(), count: per_interval.len(), per_interval })
}

fn powers(w: &PiecewiseWeight, a: f64) -> Result<Vec<PdMatrix>> {
    w.palette().iter().map(|m| m.pow(a)).collect()
}

/// Admissible `A_(p,q)` exponents.
pub fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p > 1.0 && q > 1.0 && p.is_finite() && q.is_finite()) {
        return param(format!("A_(p,q) needs finite p, q > 1 (got p={p}, q={q})"));
    }
    Ok(())
}

/// `|W_j^{1/q} W_k^{-1/q}|^{p'}` kernel.
fn apq_kernel(w: &PiecewiseWeight, p: f64, q: f64) -> Result<(Vec<CMatrix>, Vec<CMatrix>, f64)> {
    let pos = powers(w, 1.0 / q)?.into_iter().map(PdMatrix::into_matrix).collect();
    let neg = powers(w, -1.0 / q)?.into_iter().map(PdMatrix::into_matrix).collect();
    Ok((pos, neg, conj_exp(p)))
}

/// `avg_I (avg_I |W(x)^{1/q} W(y)^{-1/q}|^{p'} dy)^{q/p'} dx`, as an exact finite sum.
pub fn apq_local(w: &PiecewiseWeight, p: f64, q: f64, iv: &Interval) -> Result<f64> {
    check_pq(p, q)?;
    check_interval(&w.grid(), iv)?;
    let (pos, neg, pp) = apq_kernel(w, p, q)?;
    let k = Kernel::lazy(pos.len(), |j, k| spectral_norm(&(&pos[j] * &neg[k])).powf(pp));
    Ok(k.double_average(&Measures::new(w).of(iv), q / pp))
}

pub fn apq_characteristic(w: &PiecewiseWeight, p: f64, q: f64, family: &IntervalFamily) -> Result<CharReport> {
    check_pq(p, q)?;
    let (pos, neg, pp) = apq_kernel(w, p, q)?;
    let k = Kernel::tabulated(pos.len(), |j, k| spectral_norm(&(&pos[j] * &neg[k])).powf(pp))?;
    sweep(w, family, |ms| k.double_average(ms, q / pp))
}

/// `A_p = A_{p,p}`.
pub fn ap_characteristic(w: &PiecewiseWeight, p: f64, family: &IntervalFamily) -> Result<CharReport> {
    apq_characteristic(w, p, p, family)
}

/// `sup_I max_{x in I} avg_I |W(x)^{1/t} W(y)^{-1/t}|^t dy`.
pub fn at_infinity_characteristic(w: &PiecewiseWeight, t: f64, family: &IntervalFamily) -> Result<CharReport> {
    if !(t >= 1.0 && t.is_finite()) {
        return param(format!("A_(t,inf) needs 1 <= t < inf (got {t})"));
    }
    let pos: Vec<CMatrix> = powers(w, 1.0 / t)?.into_iter().map(PdMatrix::into_matrix).collect();
    let neg: Vec<CMatrix> = powers(w, -1.0 / t)?.into_iter().map(PdMatrix::into_matrix).collect();
    let k = Kernel::tabulated(pos.len(), |j, k| spectral_norm(&(&pos[j] * &neg[k])).powf(t))?;
    sweep(w, family, |ms| k.sup_average(ms))
}

/// `sup_I max_{x in I} avg_I |W(x)^{-1} W(y)| dy`.
pub fn matrix_a1(w: &PiecewiseWeight, family: &IntervalFamily) -> Result<CharReport> {
    let inv: Vec<CMatrix> = w.palette().iter().map(|m| m.inverse().into_matrix()).collect();
    let k = Kernel::tabulated(inv.len(), |j, k| spectral_norm(&(&inv[j] * w.palette()[k].matrix())))?;
    sweep(w, family, |ms| k.sup_average(ms))
}

/// `sup_e [ |W^{1/t} e|^t ]_{RH_s}` with `e` over orbit representatives of
/// `directions`; `s = inf` uses the max over the interval instead of the `s`-mean.
pub fn rh_characteristic(w: &PiecewiseWeight, t: f64, s: f64, directions: &DirectionGrid, family: &IntervalFamily) -> Result<CharReport> {
    if !(t > 1.0 && t.is_finite() && s > 1.0) {
        return param(format!("RH_(t,s) needs 1 < t < inf and 1 < s <= inf (got t={t}, s={s})"));
    }
    if directions.dim() != w.dim() {
        return Err(Error::DimensionMismatch(directions.dim(), w.dim()));
    }
    let pos = powers(w, 1.0 / t)?;
    let ne = directions.orbit_count();
    let np = pos.len();
    // vals[j * ne + e] = |W_j^{1/t} e|^t
    let mut vals = Vec::with_capacity(np * ne);
    for m in &pos {
        for e in directions.representatives() {
            vals.push(m.apply_norm(e).powf(t));
        }
    }
    sweep(w, family, |ms| {
        let mut best = 0.0f64;
        for e in 0..ne {
            let avg: f64 = ms.iter().map(|&(j, m)| m * vals[j * ne + e]).sum();
            let top = if s.is_infinite() {
                ms.iter().map(|&(j, _)| vals[j * ne + e]).fold(0.0, f64::max)
            } else {
                ms.iter().map(|&(j, m)| m * vals[j * ne + e].powf(s)).sum::<f64>().powf(1.0 / s)
            };
            best = best.max(top / avg);
        }
        best
    })
}

/// `rho(e) = (avg_I |W^{1/p} e|^p)^{1/p}` with the palette powers `W^{2/p}` prebuilt.
struct AveragingNorm {
    ms: Vec<(usize, f64)>,
    m2: Vec<CMatrix>,
    p: f64,
}

impl AveragingNorm {
    fn new(w: &PiecewiseWeight, iv: &Interval, p: f64) -> Result<Self> {
        let ms = Measures::new(w).of(iv);
        let mut m2 = alloc::vec![CMatrix::zeros(0, 0); w.palette().len()];
        for &(j, _) in &ms {
            m2[j] = w.palette()[j].pow(2.0 / p)?.into_matrix();
        }
        Ok(Self { ms, m2, p })
    }

    fn quad(&self, j: usize, e: &CVector) -> f64 {
        e.dotc(&(&self.m2[j] * e)).re.max(0.0)
    }

    fn rho(&self, e: &CVector) -> f64 {
        self.ms.iter().map(|&(j, m)| m * self.quad(j, e).powf(self.p / 2.0)).sum::<f64>().powf(1.0 / self.p)
    }

    /// Gradient of `rho` at `e`: the boundary point `y` of the body with
    /// support function `rho` at which `Re <y, e> = rho(e)`.
    fn gradient(&self, e: &CVector) -> CVector {
        let r = self.rho(e);
        let mut y = CVector::zeros(e.len());
        for &(j, m) in &self.ms {
            let c = m * self.quad(j, e).powf(self.p / 2.0 - 1.0);
            y += (&self.m2[j] * e) * crate::C64::new(c, 0.0);
        }
        y * crate::C64::new(r.powf(1.0 - self.p), 0.0)
    }
}

/// `(avg_I |W^{1/p} e|^p)^{1/p}`.
pub fn averaging_norm(w: &PiecewiseWeight, iv: &Interval, p: f64, e: &CVector) -> Result<f64> {
    check_interval(&w.grid(), iv)?;
    Ok(AveragingNorm::new(w, iv, p)?.rho(e))
}

#[derive(Clone, Debug)]
pub struct ReducingOperator {
    pub matrix: PdMatrix,
    /// `(avg W)^{1/p}` was used (p = 2 or d = 1).
    pub closed_form: bool,
}

/// Reducing operator with the default direction grid.
pub fn reducing_operator(w: &PiecewiseWeight, iv: &Interval, p: f64) -> Result<PdMatrix> {
    let grid = Arc::new(DirectionGrid::default_for(w.dim())?);
    Ok(reducing_operator_on(w, iv, p, &grid)?.matrix)
}

/// The matrix `R` whose norm ball `{e : |R e| <= 1}` is the John ellipsoid of
/// the unit ball of `rho(e) = (avg_I |W^{1/p} e|^p)^{1/p}`, so that
/// `rho(e) <= |R e| <= sqrt(d) rho(e)`.
///
/// The John ellipsoid of that ball is the polar of the Löwner ellipsoid of
/// the body whose support function is `rho`. Boundary points of that body are
/// gradients of `rho`, sampled on the grid and on directions adapted to the
/// current fit until the fit stops moving.
pub fn reducing_operator_on(w: &PiecewiseWeight, iv: &Interval, p: f64, grid: &Arc<DirectionGrid>) -> Result<ReducingOperator> {
    if !(p >= 1.0 && p.is_finite()) {
        return param(format!("reducing operator needs 1 <= p < inf (got {p})"));
    }
    check_interval(&w.grid(), iv)?;
    if grid.dim() != w.dim() {
        return Err(Error::DimensionMismatch(grid.dim(), w.dim()));
    }
    let ms = Measures::new(w).of(iv);
    if p == 2.0 || w.dim() == 1 {
        let mut avg = CMatrix::zeros(w.dim(), w.dim());
        for &(j, m) in &ms {
            avg += w.palette()[j].matrix() * crate::C64::new(m, 0.0);
        }
        return Ok(ReducingOperator { matrix: PdMatrix::new(avg)?.pow(1.0 / p)?, closed_form: true });
    }
    let norm = AveragingNorm::new(w, iv, p)?;
    let base: Vec<CVector> = grid.representatives().map(|e| norm.gradient(e)).collect();
    let mut shape = lowner_ellipsoid(&base)?.shape().clone();
    for _ in 0..ADAPT_PASSES {
        let mut points = base.clone();
        points.extend(adapted_directions(grid, &shape).iter().map(|e| norm.gradient(e)));
        let next = lowner_ellipsoid(&points)?.shape().clone();
        let change = (next.matrix() - shape.matrix()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        shape = next;
        if change <= MVEE_TOL * shape.max_eigenvalue() {
            break;
        }
    }
    Ok(ReducingOperator { matrix: shape, closed_form: false })
}

/// Worst relative violations of `rho <= |R e|` and `|R e| <= factor rho` over
/// the orbit representatives of `grid`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSandwich {
    pub lower_excess: f64,
    pub upper_excess: f64,
}

pub fn reducing_sandwich(w: &PiecewiseWeight, iv: &Interval, p: f64, r: &PdMatrix, factor: f64, grid: &DirectionGrid) -> Result<NormSandwich> {
    let norm = AveragingNorm::new(w, iv, p)?;
    let mut out = NormSandwich { lower_excess: f64::NEG_INFINITY, upper_excess: f64::NEG_INFINITY };
    for e in grid.representatives() {
        let rho = norm.rho(e);
        let re = r.apply_norm(e);
        out.lower_excess = out.lower_excess.max(rho / re - 1.0);
        out.upper_excess = out.upper_excess.max(re / (factor * rho) - 1.0);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoSided {
    /// Exact double average.
    pub direct: f64,
    /// Reducing-operator side.
    pub reduced: f64,
    /// `direct / reduced`.
    pub ratio: f64,
}

/// `avg_I (avg_I |W(x)^{1/b} V(y)^{1/a}|^a dy)^{b/a} dx` against
/// `|W_{I,b} V_{I,a}|^b`.
pub fn standardlemma_check(w: &PiecewiseWeight, v: &PiecewiseWeight, iv: &Interval, a: f64, b: f64) -> Result<TwoSided> {
    if !(a >= 1.0 && b >= 1.0 && a.is_finite() && b.is_finite()) {
        return param("need finite a, b >= 1");
    }
    if w.grid() != v.grid() || w.dim() != v.dim() {
        return param("W and V must share grid and dimension");
    }
    check_interval(&w.grid(), iv)?;
    let wm = Measures::new(w).of(iv);
    let vm = Measures::new(v).of(iv);
    let wp: Vec<(CMatrix, f64)> = wm.iter().map(|&(j, m)| Ok((w.palette()[j].pow(1.0 / b)?.into_matrix(), m))).collect::<Result<_>>()?;
    let vp: Vec<(CMatrix, f64)> = vm.iter().map(|&(j, m)| Ok((v.palette()[j].pow(1.0 / a)?.into_matrix(), m))).collect::<Result<_>>()?;
    // palette measures only give the joint law if x and y are integrated
    // independently, which is the case here
    let direct: f64 = wp
        .iter()
        .map(|(x, mx)| mx * vp.iter().map(|(y, my)| my * spectral_norm(&(x * y)).powf(a)).sum::<f64>().powf(b / a))
        .sum();
    let rw = reducing_operator(w, iv, b)?;
    let rv = reducing_operator(v, iv, a)?;
    let reduced = spectral_norm(&(rw.matrix() * rv.matrix())).powf(b);
    Ok(TwoSided { direct, reduced, ratio: direct / reduced })
}

#[derive(Clone, Debug)]
pub struct Comparability {
    pub a_t: f64,
    pub rh: f64,
    /// `[W^s]_{A_{t,st}}`, or `[W^{t'/t}]_{A_{t',inf}}` when `s = inf`.
    pub middle: f64,
    pub exponent: f64,
    /// `max(a_t, rh)^exponent / middle`.
    pub lower_ratio: f64,
    /// `middle / (a_t rh)^exponent`.
    pub upper_ratio: f64,
}

/// The three quantities of the comparison between `A_t and RH_{t,s}` and the
/// two-exponent class of `W^s`.
pub fn comparability_sweep(w: &PiecewiseWeight, t: f64, s: f64, directions: &DirectionGrid, family: &IntervalFamily) -> Result<Comparability> {
    if !(t > 1.0 && t.is_finite() && s > 1.0) {
        return param("comparability needs 1 < t < inf, 1 < s <= inf");
    }
    let a_t = ap_characteristic(w, t, family)?.value;
    let rh = rh_characteristic(w, t, s, directions, family)?.value;
    let (middle, exponent) = if s.is_infinite() {
        let e = conj_exp(t) / t;
        (at_infinity_characteristic(&w.cellwise_power(e)?, conj_exp(t), family)?.value, e)
    } else {
        (apq_characteristic(&w.cellwise_power(s)?, t, s * t, family)?.value, s)
    };
    Ok(Comparability {
        a_t,
        rh,
        middle,
        exponent,
        lower_ratio: a_t.max(rh).powf(exponent) / middle,
        upper_ratio: middle / (a_t * rh).powf(exponent),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ordering {
    pub smaller: f64,
    pub larger: f64,
    pub holds: bool,
}

/// `q` with `q / p' = c`.
pub fn constrained_q(p: f64, c: f64) -> f64 {
    c * conj_exp(p)
}

/// `[W]_{A_{p1,q1}} <= [W]_{A_{p2,q2}}` for `p1 <= p2`, `q2/p2' = q1/p1'`.
pub fn monotonicity_check(w: &PiecewiseWeight, p1: f64, q1: f64, p2: f64, q2: f64, family: &IntervalFamily) -> Result<Ordering> {
    check_constraint(p1, q1, p2, q2)?;
    if p1 > p2 {
        return param("monotonicity needs p1 <= p2");
    }
    let smaller = apq_characteristic(w, p1, q1, family)?.value;
    let larger = apq_characteristic(w, p2, q2, family)?.value;
    Ok(Ordering { smaller, larger, holds: smaller <= larger * (1.0 + ORDER_SLACK) })
}

/// `[W]_{A_{t,inf}} <= [W]_{A_{s,inf}}` for `1 <= s <= t`.
pub fn at_infinity_monotonicity(w: &PiecewiseWeight, s: f64, t: f64, family: &IntervalFamily) -> Result<Ordering> {
    if !(1.0 <= s && s <= t) {
        return param("need 1 <= s <= t");
    }
    let smaller = at_infinity_characteristic(w, t, family)?.value;
    let larger = at_infinity_characteristic(w, s, family)?.value;
    Ok(Ordering { smaller, larger, holds: smaller <= larger * (1.0 + ORDER_SLACK) })
}

/// Both pairs admissible and `q2/p2' = q1/p1'`.
pub fn check_constraint(p1: f64, q1: f64, p2: f64, q2: f64) -> Result<()> {
    check_pq(p1, q1)?;
    check_pq(p2, q2)?;
    let (c1, c2) = (q1 / conj_exp(p1), q2 / conj_exp(p2));
    if (c1 - c2).abs() > CONSTRAINT_TOL {
        return param(format!("constraint q2/p2' = q1/p1' violated ({c2} vs {c1})"));
    }
    Ok(())
}

/// `|A_n^{-1/q2} B_n^{1/q2}|^{q2}` for the blocks of [`counterexample_weight`].
pub fn block_lower_bound(q1: f64, q2: f64, n: u64) -> Result<f64> {
    let (c, d) = appendix_pair(n, Family::One)?;
    let a = c.pow(-q1 / 2.0)?;
    let b = d.pow(q1 / 2.0)?;
    Ok(spectral_norm(&(a.pow(-1.0 / q2)?.matrix() * b.pow(1.0 / q2)?.matrix())).powf(q2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupRow {
    pub depth: u32,
    /// Dyadic `(p2, q2)` characteristic.
    pub dyadic: f64,
    /// Block bound at the deepest pair `n = depth`; 1 at depth 0.
    pub lower_bound: f64,
    /// `(p1, q1)` characteristic over sliding windows on every level.
    pub windows: f64,
    pub windows_family: String,
}

/// Per-depth table for the counterexample weight built from `(p1, q1)`.
pub fn blowup_sweep(p1: f64, q1: f64, p2: f64, q2: f64, depths: &[u32], window_cells: usize) -> Result<Vec<BlowupRow>> {
    check_constraint(p1, q1, p2, q2)?;
    if !(p1 < p2) {
        return param("blowup needs p1 < p2");
    }
    depths
        .iter()
        .map(|&depth| {
            let w = counterexample_weight(p1, q1, depth)?;
            let dyadic = apq_characteristic(&w, p2, q2, &IntervalFamily::dyadic())?.value;
            let lower_bound = if depth == 0 { 1.0 } else { block_lower_bound(q1, q2, depth as u64)? };
            let fam = IntervalFamily::all_windows(&w.grid(), window_cells);
            let windows = apq_characteristic(&w, p1, q1, &fam)?.value;
            Ok(BlowupRow { depth, dyadic, lower_bound, windows, windows_family: fam.descriptor() })
        })
        .collect()
}
