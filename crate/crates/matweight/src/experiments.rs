//! Seeded suites behind the subcommands. Each returns typed rows; the CLI turns
//! them into tables and the acceptance run asserts on them directly.
//!
//! Parallel loops collect in input order, so results do not depend on the
//! thread count.

use std::sync::Arc;

use anyhow::{ensure, Context, Result};
use matweight_core::characteristics::{
    apq_characteristic, at_infinity_characteristic, matrix_a1, rh_characteristic, CharReport, IntervalFamily,
};
use matweight_core::dyadic::{generate_sparse, verify_sparse, DyadicInterval, Interval, SparseCertificate};
use matweight_core::extrapolation::{ellipsoid_field, random_coefficient, rdf_iterate, ExtrapolationProfile, RdfReport};
use matweight_core::geometry::{john_ellipsoid, minkowski_sum, DirectionGrid, Ellipsoid, SupportBody};
use matweight_core::hermitian::{appendix_pair, cordes_check, cordes_gap, random_pd, trace_product, Family};
use matweight_core::sparse::{
    convex_average, exponent_profile, profile_characteristic, random_field, sparse_form, theorem14_norms, theorem14_ratio,
    Theorem14,
};
use matweight_core::weight::{random_weight, CellGrid, Domain, PiecewiseWeight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{CharSpec, CordesParams, FamilySpec, JohnParams, RdfParams, SparseFormParams};

pub fn family(spec: &FamilySpec, grid: &CellGrid) -> IntervalFamily {
    match *spec {
        FamilySpec::Dyadic { max_level } => IntervalFamily::Dyadic { max_level },
        FamilySpec::Windows { max_cells } => IntervalFamily::all_windows(grid, max_cells),
    }
}

pub fn char_operation(spec: &CharSpec) -> &'static str {
    match spec {
        CharSpec::Apq { .. } | CharSpec::Ap { .. } => "apq_characteristic",
        CharSpec::A1 => "matrix_a1",
        CharSpec::AInf { .. } => "at_infinity_characteristic",
        CharSpec::Rh { .. } => "rh_characteristic",
    }
}

pub fn characteristic(w: &PiecewiseWeight, spec: &CharSpec, fam: &IntervalFamily) -> Result<CharReport> {
    Ok(match *spec {
        CharSpec::Apq { p, q } => apq_characteristic(w, p, q, fam)?,
        CharSpec::Ap { p } => apq_characteristic(w, p, p, fam)?,
        CharSpec::A1 => matrix_a1(w, fam)?,
        CharSpec::AInf { t } => at_infinity_characteristic(w, t, fam)?,
        CharSpec::Rh { t, s } => rh_characteristic(w, t, s.0, &DirectionGrid::default_for(w.dim())?, fam)?,
    })
}

pub fn char_suite(w: &PiecewiseWeight, specs: &[CharSpec], fam: &IntervalFamily) -> Result<Vec<CharReport>> {
    specs.par_iter().map(|s| characteristic(w, s, fam).with_context(|| s.label())).collect()
}

/// Generator for pair `i` of a suite: one ChaCha stream per pair.
fn stream(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct CordesRow {
    pub pair: usize,
    pub d: usize,
    pub a: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn cordes_pairs(p: &CordesParams, seed: u64) -> Result<Vec<CordesRow>> {
    let rows: Vec<Vec<CordesRow>> = (0..p.pairs)
        .into_par_iter()
        .map(|i| {
            let d = p.dims[i % p.dims.len()];
            let mut rng = stream(seed, i as u64);
            let a = random_pd(d, p.spread, &mut rng);
            let b = random_pd(d, p.spread, &mut rng);
            p.exponents
                .iter()
                .map(|&e| {
                    let r = cordes_check(&a, &b, e)?;
                    Ok(CordesRow { pair: i, d, a: e, lhs: r.lhs, rhs: r.rhs, holds: r.holds })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapRow {
    pub family: u8,
    pub a: f64,
    pub n: u64,
    pub gap: f64,
    /// `gap / n^(a-1)`.
    pub normalized: f64,
}

pub fn gap_rows(p: &CordesParams) -> Result<Vec<GapRow>> {
    let mut jobs = Vec::new();
    for &a in &p.gap_exponents {
        jobs.extend(p.gap_ns.iter().map(|&n| (1u8, a, n)));
    }
    for &a in &p.gap_exponents_two {
        jobs.extend(p.gap_ns.iter().map(|&n| (2u8, a, n)));
    }
    jobs.par_iter()
        .map(|&(fam, a, n)| {
            let gap = cordes_gap(n, a, if fam == 1 { Family::One } else { Family::Two })?;
            Ok(GapRow { family: fam, a, n, gap, normalized: gap / (n as f64).powf(a - 1.0) })
        })
        .collect()
}

/// Largest over smallest normalized gap for each family-one exponent.
pub fn gap_spreads(rows: &[GapRow]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for r in rows.iter().filter(|r| r.family == 1) {
        if out.iter().any(|&(a, _)| a == r.a) {
            continue;
        }
        let vals: Vec<f64> = rows.iter().filter(|x| x.family == 1 && x.a == r.a).map(|x| x.normalized).collect();
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push((r.a, hi / lo));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct AppendixRow {
    pub n: u64,
    /// `tr(C_n D_n)`, equal to 2.
    pub tr: f64,
    /// `tr(C_n^{-1} D_n^{-1})`, equal to 8/3.
    pub tr_inv: f64,
}

/// `n` rounded from `points` log-spaced values in `[1, max]`, deduplicated.
pub fn log_spaced(points: usize, max: u64) -> Vec<u64> {
    let top = (max as f64).ln();
    let mut ns: Vec<u64> = (0..points).map(|k| (top * k as f64 / (points - 1) as f64).exp().round() as u64).collect();
    ns.dedup();
    ns
}

pub fn appendix_rows(points: usize, max: u64) -> Result<Vec<AppendixRow>> {
    log_spaced(points, max)
        .into_iter()
        .map(|n| {
            let (c, d) = appendix_pair(n, Family::One)?;
            let tr = trace_product(c.matrix(), d.matrix());
            let tr_inv = trace_product(c.inverse().matrix(), d.inverse().matrix());
            Ok(AppendixRow { n, tr, tr_inv })
        })
        .collect()
}

/// A seeded full-dimensional test body: a hull of ellipsoids, a Minkowski sum
/// of ellipsoids, or an `L^p` average of a random field, by `seed % 3`.
pub fn random_body(grid: &Arc<DirectionGrid>, seed: u64) -> Result<(&'static str, SupportBody)> {
    let d = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ellipsoid = |rng: &mut ChaCha8Rng| SupportBody::from_ellipsoid(grid.clone(), &Ellipsoid::new(random_pd(d, 1.0, rng)));
    Ok(match seed % 3 {
        0 => {
            let k = rng.gen_range(2..=4);
            let mut body = ellipsoid(&mut rng)?;
            for _ in 1..k {
                body = body.hull_union(&ellipsoid(&mut rng)?)?;
            }
            ("hull", body)
        }
        1 => {
            let k = rng.gen_range(2..=3);
            let mut body = ellipsoid(&mut rng)?;
            for _ in 1..k {
                body = minkowski_sum(&body, &ellipsoid(&mut rng)?)?;
            }
            ("sum", body)
        }
        _ => {
            let p = rng.gen_range(1.0..4.0);
            let f = random_field(d, CellGrid::new(Domain::Unit, 3)?, rng.gen())?;
            ("average", convex_average(&f, &Interval::new(0.0, 1.0), p)?.body(grid.clone())?)
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct JohnRow {
    pub body: u64,
    pub kind: &'static str,
    pub tol_in: f64,
    pub tol_out: f64,
    pub iterations: usize,
}

pub fn john_suite(p: &JohnParams, seed: u64) -> Result<Vec<JohnRow>> {
    let grid = Arc::new(DirectionGrid::new(p.dim, p.directions, matweight_core::geometry::DEFAULT_GRID_SEED)?);
    (0..p.bodies as u64)
        .into_par_iter()
        .map(|i| {
            let (kind, body) = random_body(&grid, seed.wrapping_add(i))?;
            let j = john_ellipsoid(&body).with_context(|| format!("body {i}"))?;
            Ok(JohnRow { body: i, kind, tol_in: j.tol_in, tol_out: j.tol_out, iterations: j.iterations })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseRow {
    pub seed: u64,
    pub depth: i32,
    pub d: usize,
    pub result: Theorem14,
}

/// For each dimension and seed: `W` random at `data_level`, `f` and `g`
/// random at `data_level`, all refined to the deepest requested depth, and
/// one generated family whose truncations give the shallower depths.
pub fn sparse_suite(p: &SparseFormParams, seed0: u64) -> Result<Vec<SparseRow>> {
    let prof = exponent_profile(p.p0, p.q0.0, p.p)?;
    let top = *p.depths.iter().max().context("no depths")?;
    let level = top.max(p.data_level);
    let coarse = CellGrid::new(Domain::Unit, p.data_level)?;
    let jobs: Vec<(usize, u64)> = p.dims.iter().flat_map(|&d| (0..p.seeds).map(move |k| (d, seed0.wrapping_add(k)))).collect();
    let rows: Vec<Vec<SparseRow>> = jobs
        .par_iter()
        .map(|&(d, seed)| {
            let w = random_weight(d, p.data_level, p.spread, seed)?.refine(level)?;
            let f = random_field(d, coarse, seed.wrapping_mul(2).wrapping_add(1))?.refine(level)?;
            let g = random_field(d, coarse, seed.wrapping_mul(2).wrapping_add(2))?.refine(level)?;
            let s = generate_sparse(top, p.epsilon, seed)?;
            let full = sparse_form(&s, &f, &g, prof.p0, prof.q0, p.lambda)?;
            let char = profile_characteristic(&w, &prof, &IntervalFamily::dyadic())?;
            let (nf, ng) = theorem14_norms(&w, &f, &g, &prof)?;
            Ok(p.depths
                .iter()
                .map(|&depth| {
                    let (form, distortion) = full.truncated(depth);
                    SparseRow { seed, depth, d, result: theorem14_ratio(form, p.epsilon, char, &prof, nf, ng, distortion) }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Max ratio over seeds for one `(d, depth)`; `None` if any ratio is unbounded.
pub fn max_ratio(rows: &[SparseRow], d: usize, depth: i32) -> Option<f64> {
    rows.iter()
        .filter(|r| r.d == d && r.depth == depth)
        .map(|r| r.result.ratio)
        .try_fold(0.0f64, |acc, r| r.map(|x| acc.max(x)))
}

pub fn rdf_suite(p: &RdfParams, seed: u64) -> Result<Vec<RdfReport>> {
    let prof = ExtrapolationProfile::new(p.p0, p.q0.0)?;
    let dirs = Arc::new(DirectionGrid::default_for(p.dim)?);
    (0..p.instances)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let w = random_weight(p.dim, p.level, p.spread, s)?;
            let field = ellipsoid_field(&w, &random_coefficient(w.cell_count(), s), prof.r(p.q), dirs.clone())?;
            Ok(rdf_iterate(&field, &w, p.q, &prof, p.k_max)?)
        })
        .collect()
}

/// Certificate from [`verify_sparse`], rechecked from scratch: every piece
/// lies in its owner, pieces of different owners are disjoint, and each owner
/// holds at least `epsilon |Q|`.
pub fn recheck_certificate(family: &[DyadicInterval], cert: &SparseCertificate) -> Result<()> {
    let mut members = family.to_vec();
    members.sort();
    members.dedup();
    ensure!(cert.sets.len() == members.len(), "certificate covers {} of {} members", cert.sets.len(), members.len());
    let mut pieces: Vec<(f64, f64, DyadicInterval)> = Vec::new();
    for (q, parts) in &cert.sets {
        ensure!(members.binary_search(q).is_ok(), "certificate names non-member {q:?}");
        let mut owned = 0.0;
        for iv in parts {
            ensure!(iv.lo >= q.lo() && iv.hi <= q.hi() && iv.lo < iv.hi, "piece [{}, {}) escapes {q:?}", iv.lo, iv.hi);
            owned += iv.len();
            pieces.push((iv.lo, iv.hi, *q));
        }
        ensure!(owned >= cert.epsilon * q.length() * (1.0 - 1e-12), "{q:?} owns {owned}, needs {}", cert.epsilon * q.length());
    }
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in pieces.windows(2) {
        ensure!(w[1].0 >= w[0].1, "pieces of {:?} and {:?} overlap", w[0].2, w[1].2);
    }
    Ok(())
}

pub fn generate_and_verify(depth: i32, epsilon: f64, seed: u64) -> Result<(Vec<DyadicInterval>, SparseCertificate)> {
    let s = generate_sparse(depth, epsilon, seed)?;
    let cert = verify_sparse(s.intervals(), epsilon)?;
    Ok((s.intervals().to_vec(), cert))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_spacing_hits_the_ends() {
        let ns = log_spaced(25, 1_000_000);
        assert_eq!(ns.first(), Some(&1));
        assert_eq!(ns.last(), Some(&1_000_000));
        assert!(ns.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn pairs_do_not_depend_on_thread_count() {
        let p = CordesParams { pairs: 12, ..Default::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| cordes_pairs(&p, 5)).unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| cordes_pairs(&p, 5)).unwrap();
        assert_eq!(one, many);
        assert_eq!(one.len(), 12 * 5);
    }

    #[test]
    fn bodies_cover_all_kinds() {
        let grid = Arc::new(DirectionGrid::default_for(2).unwrap());
        let kinds: Vec<&str> = (0..3).map(|s| random_body(&grid, s).unwrap().0).collect();
        assert_eq!(kinds, ["hull", "sum", "average"]);
    }

    #[test]
    fn recheck_catches_overlap() {
        let fam = [DyadicInterval::new(0, 0), DyadicInterval::new(1, 1)];
        let mut cert = verify_sparse(&fam, 0.5).unwrap();
        recheck_certificate(&fam, &cert).unwrap();
        cert.sets[0].1 = vec![Interval::new(0.5, 1.0)];
        assert!(recheck_certificate(&fam, &cert).is_err());
    }
}
