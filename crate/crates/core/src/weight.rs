//! Piecewise-constant matrix weights on uniform dyadic grids.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused whenever std is linked: its inherent float methods win
use num_traits::Float as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dyadic::{DyadicInterval, Interval};
use crate::error::{param, Error, Result};
use crate::hermitian::{appendix_pair, random_pd, Family, PdMatrix};

/// Finest supported grid level (dense cell storage).
pub const MAX_LEVEL: i32 = 24;

/// `[0,1)` or the window `[-2^a, 2^a)` of the line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Unit,
    Line { window_exp: u32 },
}

impl Domain {
    pub fn lo(&self) -> f64 {
        match self {
            Domain::Unit => 0.0,
            Domain::Line { window_exp } => -(2f64.powi(*window_exp as i32)),
        }
    }

    pub fn hi(&self) -> f64 {
        match self {
            Domain::Unit => 1.0,
            Domain::Line { window_exp } => 2f64.powi(*window_exp as i32),
        }
    }

    pub fn len(&self) -> f64 {
        self.hi() - self.lo()
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.lo(), self.hi())
    }

    /// Coarsest dyadic level whose intervals fit inside the domain.
    pub fn top_level(&self) -> i32 {
        match self {
            Domain::Unit => 0,
            Domain::Line { window_exp } => -(*window_exp as i32),
        }
    }

    /// Dyadic intervals of the given level inside the domain, left to right.
    pub fn dyadic_at(&self, level: i32) -> impl Iterator<Item = DyadicInterval> {
        let len = 2f64.powi(-level);
        let first = (self.lo() / len).round() as i64;
        let last = (self.hi() / len).round() as i64;
        (first..last).map(move |m| DyadicInterval::new(level, m))
    }
}

/// Uniform grid of `2^level` cells per unit length over a domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellGrid {
    pub domain: Domain,
    pub level: i32,
}

impl CellGrid {
    pub fn new(domain: Domain, level: i32) -> Result<Self> {
        if !(0..=MAX_LEVEL).contains(&level) {
            return param(alloc::format!("grid level must lie in 0..={MAX_LEVEL}"));
        }
        if let Domain::Line { window_exp } = domain {
            if window_exp as i32 + level + 1 > MAX_LEVEL + 1 {
                return param("window too large for the grid level");
            }
        }
        Ok(Self { domain, level })
    }

    pub fn cell_len(&self) -> f64 {
        2f64.powi(-self.level)
    }

    pub fn count(&self) -> usize {
        (self.domain.len() / self.cell_len()).round() as usize
    }

    /// Global dyadic index of local cell 0.
    pub fn first_index(&self) -> i64 {
        (self.domain.lo() / self.cell_len()).round() as i64
    }

    pub fn cell(&self, i: usize) -> DyadicInterval {
        DyadicInterval::new(self.level, self.first_index() + i as i64)
    }

    pub fn cell_interval(&self, i: usize) -> Interval {
        self.cell(i).interval()
    }

    pub fn contains(&self, iv: &Interval) -> bool {
        self.domain.lo() <= iv.lo && iv.hi <= self.domain.hi()
    }

    /// Local cells meeting `iv` (clipped to the domain) with their overlap lengths.
    pub fn overlaps(&self, iv: &Interval) -> impl Iterator<Item = (usize, f64)> + '_ {
        let clipped = iv.intersect(&self.domain.interval());
        let h = self.cell_len();
        let (lo_i, hi_i) = if clipped.is_empty() {
            (0, 0)
        } else {
            let lo = ((clipped.lo - self.domain.lo()) / h).floor().max(0.0) as usize;
            let hi = (((clipped.hi - self.domain.lo()) / h).ceil() as usize).min(self.count());
            (lo, hi)
        };
        (lo_i..hi_i).filter_map(move |i| {
            let m = self.cell_interval(i).intersect(&clipped).len();
            (m > 0.0).then_some((i, m))
        })
    }

    /// Local index range of a dyadic interval no finer than the grid.
    pub fn dyadic_range(&self, q: &DyadicInterval) -> Option<core::ops::Range<usize>> {
        if q.level > self.level {
            return None;
        }
        let shift = (self.level - q.level) as u32;
        let start = (q.index << shift) - self.first_index();
        let end = ((q.index + 1) << shift) - self.first_index();
        (start >= 0 && end as usize <= self.count()).then_some(start as usize..end as usize)
    }
}

/// A matrix weight constant on each grid cell. Cell values are indices into a
/// palette of distinct matrices, which keeps the structured counterexamples cheap.
#[derive(Clone, Debug)]
pub struct PiecewiseWeight {
    dim: usize,
    grid: CellGrid,
    palette: Vec<PdMatrix>,
    cells: Vec<u32>,
}

fn bits_key(m: &PdMatrix) -> Vec<u64> {
    m.matrix().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect()
}

impl PiecewiseWeight {
    pub fn new(grid: CellGrid, palette: Vec<PdMatrix>, cells: Vec<u32>) -> Result<Self> {
        if palette.is_empty() {
            return param("empty palette");
        }
        let dim = palette[0].dim();
        if let Some(m) = palette.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch(dim, m.dim()));
        }
        if cells.len() != grid.count() {
            return Err(Error::DimensionMismatch(cells.len(), grid.count()));
        }
        if let Some(&bad) = cells.iter().find(|&&c| c as usize >= palette.len()) {
            return param(alloc::format!("palette index {bad} out of range"));
        }
        Ok(Self { dim, grid, palette, cells })
    }

    /// One matrix per cell; identical matrices share a palette entry.
    pub fn from_cells(grid: CellGrid, values: Vec<PdMatrix>) -> Result<Self> {
        let mut seen: BTreeMap<Vec<u64>, u32> = BTreeMap::new();
        let mut palette = Vec::new();
        let mut cells = Vec::with_capacity(values.len());
        for m in values {
            let key = bits_key(&m);
            let idx = *seen.entry(key).or_insert_with(|| {
                palette.push(m);
                (palette.len() - 1) as u32
            });
            cells.push(idx);
        }
        Self::new(grid, palette, cells)
    }

    pub fn constant(grid: CellGrid, value: PdMatrix) -> Self {
        let n = grid.count();
        Self::new(grid, alloc::vec![value], alloc::vec![0; n]).expect("constant weight")
    }

    pub fn identity(dim: usize, grid: CellGrid) -> Self {
        Self::constant(grid, PdMatrix::identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> CellGrid {
        self.grid
    }

    pub fn domain(&self) -> Domain {
        self.grid.domain
    }

    pub fn level(&self) -> i32 {
        self.grid.level
    }

    pub fn palette(&self) -> &[PdMatrix] {
        &self.palette
    }

    /// Palette index per cell.
    pub fn cell_indices(&self) -> &[u32] {
        &self.cells
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn value(&self, cell: usize) -> &PdMatrix {
        &self.palette[self.cells[cell] as usize]
    }

    /// Apply a map to every distinct value.
    pub fn map_values(&self, f: impl Fn(&PdMatrix) -> Result<PdMatrix>) -> Result<Self> {
        let palette = self.palette.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(self.grid, palette, self.cells.clone())
    }

    /// `W^s` cell by cell.
    pub fn cellwise_power(&self, s: f64) -> Result<Self> {
        self.map_values(|m| m.pow(s))
    }

    /// Same weight on a finer grid.
    pub fn refine(&self, level: i32) -> Result<Self> {
        if level < self.grid.level {
            return param("refinement cannot coarsen");
        }
        let grid = CellGrid::new(self.grid.domain, level)?;
        let k = 1usize << (level - self.grid.level);
        let cells = self.cells.iter().flat_map(|&c| core::iter::repeat_n(c, k)).collect();
        Self::new(grid, self.palette.clone(), cells)
    }

    /// Bitwise equality of grid and per-cell values.
    pub fn same_values(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.cells.len() == other.cells.len()
            && (0..self.cells.len()).all(|i| self.value(i).same_entries(other.value(i)))
    }
}

/// Dyadic blocks `A_{n+1} = C_{n+1}^{-q1/2}` on the left half of
/// `J_n = [2^{-n-1}, 2^{-n})` and `B_{n+1} = D_{n+1}^{q1/2}` on its right half,
/// for `n < depth`; `[0, 2^{-depth})` carries `A_{depth+1}`.
pub fn counterexample_weight(p1: f64, q1: f64, depth: u32) -> Result<PiecewiseWeight> {
    if !(p1 > 1.0 && p1 <= q1 && q1.is_finite()) {
        return param("counterexample needs 1 < p1 <= q1 < inf");
    }
    if depth as i32 + 1 > MAX_LEVEL {
        return param(alloc::format!("counterexample depth must be at most {}", MAX_LEVEL - 1));
    }
    let level = depth as i32 + 1;
    let grid = CellGrid::new(Domain::Unit, level)?;
    let mut palette = Vec::with_capacity(2 * depth as usize + 1);
    let a = |n: u64| -> Result<PdMatrix> { appendix_pair(n, Family::One)?.0.pow(-q1 / 2.0) };
    let b = |n: u64| -> Result<PdMatrix> { appendix_pair(n, Family::One)?.1.pow(q1 / 2.0) };
    let mut cells = alloc::vec![0u32; grid.count()];
    for n in 0..depth {
        let (ia, ib) = (palette.len() as u32, palette.len() as u32 + 1);
        palette.push(a(n as u64 + 1)?);
        palette.push(b(n as u64 + 1)?);
        let unit = 1usize << (level as u32 - n - 2);
        // J_n covers cells [2 unit, 4 unit) at this level
        let (start, mid, end) = (2 * unit, 3 * unit, 4 * unit);
        cells[start..mid].fill(ia);
        cells[mid..end].fill(ib);
    }
    palette.push(a(depth as u64 + 1)?);
    let residual = 1usize << (level as u32 - depth);
    cells[..residual].fill(palette.len() as u32 - 1);
    PiecewiseWeight::new(grid, palette, cells)
}

/// Even translates and odd reflections of a weight on `[0,1)` across `[-2^a, 2^a)`.
pub fn extend_to_line(w: &PiecewiseWeight, window_exp: u32) -> Result<PiecewiseWeight> {
    if w.domain() != Domain::Unit {
        return param("only weights on [0,1) can be extended");
    }
    let grid = CellGrid::new(Domain::Line { window_exp }, w.level())?;
    let per = w.cell_count();
    let half = 1i64 << window_exp;
    let mut cells = Vec::with_capacity(grid.count());
    for k in -half..half {
        if k.rem_euclid(2) == 0 {
            cells.extend_from_slice(w.cell_indices());
        } else {
            cells.extend((0..per).rev().map(|i| w.cell_indices()[i]));
        }
    }
    PiecewiseWeight::new(grid, w.palette().to_vec(), cells)
}

/// Cells `exp(H)` with `H` Hermitian, entries uniform in `[-spread, spread]`.
pub fn random_weight(dim: usize, level: i32, spread: f64, seed: u64) -> Result<PiecewiseWeight> {
    random_weight_on(dim, CellGrid::new(Domain::Unit, level)?, spread, seed)
}

pub fn random_weight_on(dim: usize, grid: CellGrid, spread: f64, seed: u64) -> Result<PiecewiseWeight> {
    if !(spread >= 0.0) || !spread.is_finite() {
        return param("spread must be finite and nonnegative");
    }
    if dim == 0 || dim > crate::hermitian::MAX_DIM {
        return Err(Error::Dimension(dim));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.count()).map(|_| random_pd(dim, spread, &mut rng)).collect();
    PiecewiseWeight::from_cells(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::CMatrix;
    use proptest::prelude::*;

    fn max_diff(a: &PdMatrix, b: &PdMatrix) -> f64 {
        (a.matrix() - b.matrix()).iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    fn cell_at(w: &PiecewiseWeight, x: f64) -> &PdMatrix {
        let i = ((x - w.domain().lo()) / w.grid().cell_len()).floor() as usize;
        w.value(i)
    }

    #[test]
    fn grid_geometry() {
        let g = CellGrid::new(Domain::Line { window_exp: 1 }, 2).unwrap();
        assert_eq!(g.count(), 16);
        assert_eq!(g.first_index(), -8);
        assert_eq!(g.cell_interval(0), Interval::new(-2.0, -1.75));
        assert_eq!(g.dyadic_range(&DyadicInterval::new(0, -1)), Some(4..8));
        let o: Vec<_> = g.overlaps(&Interval::new(-0.1, 0.3)).collect();
        assert_eq!(o.len(), 3);
        assert!((o.iter().map(|x| x.1).sum::<f64>() - 0.4).abs() < 1e-15);
        assert_eq!(Domain::Line { window_exp: 2 }.dyadic_at(-2).count(), 2);
    }

    #[test]
    fn power_examples() {
        let g = CellGrid::new(Domain::Unit, 3).unwrap();
        let w = PiecewiseWeight::constant(g, PdMatrix::diag(&[1.0, 4.0]).unwrap());
        assert!(w.cellwise_power(1.0).unwrap().same_values(&w));
        let r = w.cellwise_power(0.5).unwrap();
        assert!(max_diff(r.value(5), &PdMatrix::diag(&[1.0, 2.0]).unwrap()) < 1e-15);
    }

    #[test]
    fn power_identities_cellwise() {
        // V^{1/b} = W^{1/p} = U^{-1/a} with U = W^{-1/(t-1)}, V = W^{s'}
        let (p0, q0, p) = (1.2, 8.0, 2.0);
        let t = p / p0;
        let s = q0 / p;
        let sp = crate::conj_exp(s);
        let a = p / (t - 1.0);
        let b = sp * p;
        let w = random_weight(2, 3, 1.0, 9).unwrap();
        let v = w.cellwise_power(sp).unwrap().cellwise_power(1.0 / b).unwrap();
        let u = w.cellwise_power(-1.0 / (t - 1.0)).unwrap().cellwise_power(-1.0 / a).unwrap();
        let wp = w.cellwise_power(1.0 / p).unwrap();
        for i in 0..w.cell_count() {
            assert!(max_diff(v.value(i), wp.value(i)) < 1e-9);
            assert!(max_diff(u.value(i), wp.value(i)) < 1e-9);
        }
    }

    #[test]
    fn counterexample_cells() {
        let q1 = 3.0;
        let w = counterexample_weight(2.0, q1, 6).unwrap();
        assert_eq!(w.level(), 7);
        assert!(max_diff(cell_at(&w, 0.5), &PdMatrix::identity(2)) < 1e-14);
        assert!(max_diff(cell_at(&w, 0.74), &PdMatrix::identity(2)) < 1e-14);
        let d1 = PdMatrix::from_real(2, &[1.0, 0.5, 0.5, 1.0]).unwrap().pow(q1 / 2.0).unwrap();
        assert!(max_diff(cell_at(&w, 0.75), &d1) < 1e-14);
        assert!(max_diff(cell_at(&w, 0.99), &d1) < 1e-14);
        let (_, d2) = appendix_pair(2, Family::One).unwrap();
        assert!(max_diff(cell_at(&w, 0.375), &d2.pow(q1 / 2.0).unwrap()) < 1e-14);
        let (c7, _) = appendix_pair(7, Family::One).unwrap();
        assert!(max_diff(cell_at(&w, 0.0), &c7.pow(-q1 / 2.0).unwrap()) < 1e-14);
        assert_eq!(w.palette().len(), 13);
        assert!(counterexample_weight(3.0, 2.0, 4).is_err());
    }

    #[test]
    fn counterexample_ignores_p1() {
        let a = counterexample_weight(1.5, 3.0, 5).unwrap();
        let b = counterexample_weight(2.5, 3.0, 5).unwrap();
        assert!(a.same_values(&b));
    }

    #[test]
    fn line_extension() {
        let w = random_weight(2, 3, 1.0, 4).unwrap();
        let e = extend_to_line(&w, 2).unwrap();
        let n = w.cell_count();
        let zero = (0.0 - e.domain().lo()) as usize * n;
        for i in 0..n {
            assert!(e.value(zero + i).same_entries(w.value(i)));
            assert!(e.value(zero + n + i).same_entries(w.value(n - 1 - i)));
            assert!(e.value(zero + 2 * n + i).same_entries(w.value(i)));
            // x -> 2 - x on [0, 2)
            assert!(e.value(zero + i).same_entries(e.value(zero + 2 * n - 1 - i)));
        }
    }

    #[test]
    fn random_weight_examples() {
        let w = random_weight(2, 4, 0.0, 1).unwrap();
        assert_eq!(w.palette().len(), 1);
        assert_eq!(w.value(3).matrix(), &CMatrix::identity(2, 2));
        let a = random_weight(2, 4, 1.0, 77).unwrap();
        let b = random_weight(2, 4, 1.0, 77).unwrap();
        assert!(a.same_values(&b));
        for m in a.palette() {
            assert!(PdMatrix::new(m.matrix().clone()).is_ok());
        }
    }

    #[test]
    fn refine_preserves_values() {
        let w = random_weight(2, 2, 1.0, 5).unwrap();
        let r = w.refine(5).unwrap();
        assert_eq!(r.cell_count(), 32);
        for i in 0..32 {
            assert!(r.value(i).same_entries(w.value(i / 8)));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn power_roundtrip(seed in any::<u64>(), s in prop_oneof![0.2f64..3.0, -3.0f64..-0.2]) {
            let w = random_weight(2, 2, 1.0, seed).unwrap();
            let back = w.cellwise_power(s).unwrap().cellwise_power(1.0 / s).unwrap();
            for i in 0..w.cell_count() {
                prop_assert!(max_diff(back.value(i), w.value(i)) < 1e-9 * w.value(i).max_eigenvalue().max(1.0));
            }
        }
    }
}
