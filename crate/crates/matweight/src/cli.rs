//! Argument handling and the per-command drivers.
//!
//! Exit codes: 0 success, 1 runtime failure inside an engine, 2 a checked
//! property failed, 3 bad arguments or configuration.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use matweight_core::characteristics::blowup_sweep;
use matweight_core::conj_exp;
use matweight_core::dyadic::verify_sparse;
use matweight_core::extrapolation::{alpha, identity_check, ExtrapolationProfile};
use matweight_core::sparse::exponent_profile;
use matweight_core::weight::{counterexample_weight, random_weight};
use serde_json::{json, Value};

use crate::config::{
    CharParams, Command, ConfigError, CordesParams, CounterexampleParams, ExperimentConfig, ExponentsParams, JohnParams,
    RdfParams, SparseFormParams, VerifySparseParams,
};
use crate::experiments as ex;
use crate::io::{load_sparse, load_weight, weight_to_json, SparseFile};
use crate::report::{interval, num, Artifacts, Check, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("runtime error: {0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn diagnostic(&self) -> Value {
        match self {
            RunError::Config(e) => json!({"error": "config", "message": e.0}),
            RunError::Runtime(e) => json!({"error": "runtime", "message": format!("{e:#}")}),
        }
    }
}

fn runtime(e: impl Into<anyhow::Error>) -> RunError {
    RunError::Runtime(e.into())
}

#[derive(Debug, Parser)]
#[command(name = "matweight", version, about = "Matrix-weighted dyadic harmonic analysis experiments")]
pub struct Args {
    #[command(subcommand)]
    pub command: Option<Sub>,
    /// JSON experiment config; its command must agree with the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for CSV tables and summary.json.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 = automatic.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Override one parameter, e.g. `-P q0=inf`.
    #[arg(short = 'P', long = "param", global = true, value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Print the effective config as JSON and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Sub {
    /// Characteristic sweeps over an interval family.
    Char,
    /// Blowup tables for the counterexample weights.
    Counterexample,
    /// Cordes inequality on random pairs, gap growth, trace identities.
    Cordes,
    /// John ellipsoid sandwich diagnostics on random bodies.
    John,
    /// Weighted sparse-form ratios over random instances.
    SparseForm,
    /// Exponent profile, its identities and the extrapolation exponent.
    Exponents,
    /// Rubio de Francia iteration traces.
    RdfDemo,
    /// Check (or generate and check) a sparse family.
    VerifySparse,
}

impl Sub {
    fn name(self) -> &'static str {
        match self {
            Sub::Char => "char",
            Sub::Counterexample => "counterexample",
            Sub::Cordes => "cordes",
            Sub::John => "john",
            Sub::SparseForm => "sparse-form",
            Sub::Exponents => "exponents",
            Sub::RdfDemo => "rdf-demo",
            Sub::VerifySparse => "verify-sparse",
        }
    }
}

/// Config from a file (if any), then the subcommand's defaults, then flags.
pub fn config_from_args(args: &Args) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            let cfg = ExperimentConfig::from_json(&text)?;
            if let Some(sub) = args.command {
                if sub.name() != cfg.command.name() {
                    return Err(ConfigError(format!("config is for {:?} but {:?} was requested", cfg.command.name(), sub.name())));
                }
            }
            cfg
        }
        None => match args.command {
            Some(sub) => ExperimentConfig::defaults(sub.name())?,
            None => return Err(ConfigError("give a subcommand or --config".into())),
        },
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    for p in &args.params {
        cfg.set_param(p)?;
    }
    Ok(cfg)
}

/// Validate, then compute everything without touching the filesystem
/// (apart from reading input files named in the config).
pub fn execute(cfg: &ExperimentConfig) -> Result<Artifacts, RunError> {
    cfg.command.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build().map_err(runtime)?;
    pool.install(|| match &cfg.command {
        Command::Char(p) => run_char(p, cfg.seed),
        Command::Counterexample(p) => run_counterexample(p),
        Command::Cordes(p) => run_cordes(p, cfg.seed),
        Command::John(p) => run_john(p, cfg.seed),
        Command::SparseForm(p) => run_sparse_form(p, cfg.seed),
        Command::Exponents(p) => run_exponents(p),
        Command::RdfDemo(p) => run_rdf(p, cfg.seed),
        Command::VerifySparse(p) => run_verify_sparse(p, cfg.seed),
    })
}

/// Execute and write artifacts; returns the exit code.
pub fn run(cfg: &ExperimentConfig) -> i32 {
    let art = match execute(cfg) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            return e.exit_code();
        }
    };
    let summary = art.summary(cfg.command.name(), cfg.seed, &cfg.command.params());
    if let Err(e) = art.write(&cfg.out, &summary) {
        eprintln!("{}", json!({"error": "runtime", "message": format!("{e:#}")}));
        return EXIT_RUNTIME;
    }
    for l in &art.lines {
        println!("{l}");
    }
    for c in art.checks.iter().filter(|c| !c.passed) {
        eprintln!("{}", json!({"error": "assertion", "check": c.name, "detail": c.detail}));
    }
    if art.passed() {
        EXIT_OK
    } else {
        EXIT_ASSERTION
    }
}

pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match config_from_args(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", RunError::Config(e).diagnostic());
            return EXIT_CONFIG;
        }
    };
    if args.print_config {
        println!("{}", cfg.to_json());
        return EXIT_OK;
    }
    run(&cfg)
}

fn run_char(p: &CharParams, seed: u64) -> Result<Artifacts, RunError> {
    let w = match &p.weight {
        Some(path) => load_weight(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?,
        None => random_weight(p.dim, p.level, p.spread, seed).map_err(runtime)?,
    };
    let fam = ex::family(&p.family, &w.grid());
    let reports = ex::char_suite(&w, &p.characteristics, &fam)?;
    let mut t = Table::new("char.csv", &[("characteristic", ""), ("operation", ""), ("family_id", ""), ("interval", ""), ("value", "named in the operation column")]);
    let mut results = Vec::new();
    let mut art = Artifacts::default();
    for (spec, rep) in p.characteristics.iter().zip(&reports) {
        for (iv, v) in &rep.per_interval {
            t.push(vec![spec.label(), ex::char_operation(spec).into(), rep.family.clone(), interval(iv), num(*v)]);
        }
        results.push(json!({
            "characteristic": spec.label(),
            "operation": ex::char_operation(spec),
            "family": rep.family,
            "value": num(rep.value),
            "argmax_interval": interval(&rep.argmax),
        }));
        art.lines.push(format!("{} = {}", spec.label(), rep.value));
    }
    art.tables.push(t);
    art.results = json!({"weight": {"dim": w.dim(), "level": w.level(), "cells": w.cell_count()}, "characteristics": results});
    Ok(art)
}

fn run_counterexample(p: &CounterexampleParams) -> Result<Artifacts, RunError> {
    let rows = blowup_sweep(p.p1, p.q1, p.p2, p.q2, &p.depths, p.window_cells).map_err(runtime)?;
    // dyadic characteristic dominates this multiple of the block bound
    let c = 2f64.powf(-(1.0 + p.q2 / conj_exp(p.p2)));
    let mut t = Table::new(
        "counterexample.csv",
        &[
            ("depth", ""),
            ("dyadic", "apq_characteristic(p2,q2)"),
            ("lower_bound", "block_lower_bound"),
            ("windows", "apq_characteristic(p1,q1)"),
            ("windows_family", ""),
        ],
    );
    let mut art = Artifacts::default();
    art.lines.push("depth dyadic lower_bound windows".into());
    let mut worst = f64::INFINITY;
    for r in &rows {
        t.push(vec![r.depth.to_string(), num(r.dyadic), num(r.lower_bound), num(r.windows), r.windows_family.clone()]);
        art.lines.push(format!("{} {} {} {}", r.depth, r.dyadic, r.lower_bound, r.windows));
        worst = worst.min(r.dyadic / (c * r.lower_bound));
    }
    art.tables.push(t);
    art.checks.push(Check::new(
        "dyadic >= 2^-(1+q2/p2') lower_bound",
        worst >= 1.0 - 1e-9,
        format!("min dyadic / (c lower_bound) = {}", num(worst)),
    ));
    let (first, last) = (rows.first().expect("depths validated"), rows.last().expect("depths validated"));
    art.results = json!({
        "lower_bound_growth": num(last.lower_bound / first.lower_bound),
        "dyadic_growth": num(last.dyadic / first.dyadic),
        "windows_growth": num(last.windows / first.windows),
        "comparison_constant": num(c),
    });
    if let Some(depth) = p.save_depth {
        let w = counterexample_weight(p.p1, p.q1, depth).map_err(runtime)?;
        art.files.push(("weight.json".into(), weight_to_json(&w)));
    }
    Ok(art)
}

fn run_cordes(p: &CordesParams, seed: u64) -> Result<Artifacts, RunError> {
    let pairs = ex::cordes_pairs(p, seed)?;
    let gaps = ex::gap_rows(p)?;
    let appendix = ex::appendix_rows(p.appendix_points, p.appendix_max)?;
    let mut art = Artifacts::default();

    let mut t = Table::new("cordes.csv", &[("pair", ""), ("d", ""), ("a", ""), ("lhs", "cordes_check"), ("rhs", "cordes_check"), ("holds", "cordes_check")]);
    for r in &pairs {
        t.push(vec![r.pair.to_string(), r.d.to_string(), num(r.a), num(r.lhs), num(r.rhs), r.holds.to_string()]);
    }
    art.tables.push(t);
    let violations = pairs.iter().filter(|r| !r.holds).count();
    art.checks.push(Check::new("cordes inequality", violations == 0, format!("{violations} violations in {} checks", pairs.len())));

    let mut t = Table::new("gaps.csv", &[("family", ""), ("a", ""), ("n", ""), ("gap", "cordes_gap"), ("normalized", "cordes_gap / n^(a-1)")]);
    for r in &gaps {
        t.push(vec![r.family.to_string(), num(r.a), r.n.to_string(), num(r.gap), num(r.normalized)]);
    }
    art.tables.push(t);
    let spreads = ex::gap_spreads(&gaps);
    for &(a, s) in &spreads {
        art.checks.push(Check::new(format!("gap band a={a}"), s <= p.gap_band, format!("max/min of gap/n^(a-1) = {}", num(s))));
    }

    let mut t = Table::new("appendix.csv", &[("n", ""), ("trace", "appendix_pair + trace_product"), ("trace_inv", "appendix_pair + trace_product")]);
    let mut worst = 0.0f64;
    for r in &appendix {
        t.push(vec![r.n.to_string(), num(r.tr), num(r.tr_inv)]);
        worst = worst.max((r.tr - 2.0).abs()).max((r.tr_inv - 8.0 / 3.0).abs());
    }
    art.tables.push(t);
    art.checks.push(Check::new("appendix traces 2 and 8/3", worst <= 1e-9, format!("worst deviation {}", num(worst))));

    art.results = json!({
        "violations": violations,
        "checks": pairs.len(),
        "gap_spreads": spreads.iter().map(|&(a, s)| json!({"a": num(a), "spread": num(s)})).collect::<Vec<_>>(),
        "appendix_worst_deviation": num(worst),
    });
    art.lines.push(format!("cordes: {violations} violations in {} checks", pairs.len()));
    for &(a, s) in &spreads {
        art.lines.push(format!("gap a={a}: spread {s}"));
    }
    art.lines.push(format!("appendix: worst trace deviation {worst:e}"));
    Ok(art)
}

fn run_john(p: &JohnParams, seed: u64) -> Result<Artifacts, RunError> {
    let rows = ex::john_suite(p, seed)?;
    let mut t = Table::new("john.csv", &[("body", ""), ("kind", ""), ("tol_in", "john_ellipsoid"), ("tol_out", "john_ellipsoid"), ("iterations", "john_ellipsoid")]);
    for r in &rows {
        t.push(vec![r.body.to_string(), r.kind.into(), num(r.tol_in), num(r.tol_out), r.iterations.to_string()]);
    }
    let max_in = rows.iter().map(|r| r.tol_in).fold(0.0, f64::max);
    let max_out = rows.iter().map(|r| r.tol_out).fold(0.0, f64::max);
    let mut art = Artifacts { tables: vec![t], ..Default::default() };
    art.checks.push(Check::new("inward slack", max_in <= p.tol_in, format!("max {} vs {}", num(max_in), num(p.tol_in))));
    art.checks.push(Check::new("outward factor", max_out <= p.tol_out, format!("max {} vs {}", num(max_out), num(p.tol_out))));
    art.results = json!({"bodies": rows.len(), "max_tol_in": num(max_in), "max_tol_out": num(max_out)});
    art.lines.push(format!("{} bodies: max tol_in {max_in:e}, max tol_out {max_out:e}", rows.len()));
    Ok(art)
}

fn run_sparse_form(p: &SparseFormParams, seed: u64) -> Result<Artifacts, RunError> {
    let rows = ex::sparse_suite(p, seed)?;
    let opt = |x: Option<f64>| x.map_or_else(|| "unbounded".to_string(), num);
    let mut t = Table::new(
        "sparse_form.csv",
        &[
            ("seed", ""),
            ("depth", ""),
            ("d", ""),
            ("form", "sparse_form"),
            ("char", "profile_characteristic"),
            ("norm_f", "weighted_norm"),
            ("norm_g", "weighted_norm"),
            ("ratio", "theorem14_ratio"),
            ("distortion", "sparse_form"),
        ],
    );
    for r in &rows {
        let x = &r.result;
        t.push(vec![
            r.seed.to_string(),
            r.depth.to_string(),
            r.d.to_string(),
            num(x.form),
            opt(x.char),
            num(x.norm_f),
            num(x.norm_g),
            opt(x.ratio),
            num(x.distortion),
        ]);
    }
    let mut art = Artifacts { tables: vec![t], ..Default::default() };
    let mut maxima = Vec::new();
    for &d in &p.dims {
        for &depth in &p.depths {
            let m = ex::max_ratio(&rows, d, depth);
            maxima.push(json!({"d": d, "depth": depth, "max_ratio": opt(m)}));
            art.lines.push(format!("d={d} depth={depth} max ratio {}", opt(m)));
        }
    }
    let unbounded = rows.iter().filter(|r| r.result.ratio.is_none()).count();
    art.checks.push(Check::new("ratios bounded", unbounded == 0, format!("{unbounded} unbounded of {}", rows.len())));
    if let Some([a, b]) = p.compare_depths {
        for &d in &p.dims {
            let (ma, mb) = (ex::max_ratio(&rows, d, a), ex::max_ratio(&rows, d, b));
            let (passed, detail) = match (ma, mb) {
                (Some(x), Some(y)) => ((y - x).abs() <= p.stability_tol * x, format!("max {} at depth {a}, {} at depth {b}", num(x), num(y))),
                _ => (false, "unbounded ratio".into()),
            };
            art.checks.push(Check::new(format!("d={d} max ratio stable from depth {a} to {b}"), passed, detail));
        }
    }
    art.results = json!({"instances": rows.len(), "max_ratios": maxima});
    Ok(art)
}

fn run_exponents(p: &ExponentsParams) -> Result<Artifacts, RunError> {
    let prof = exponent_profile(p.p0, p.q0.0, p.p).map_err(runtime)?;
    let mut art = Artifacts::default();
    let mut t = Table::new("exponents.csv", &[("quantity", ""), ("value", "exponent_profile")]);
    let named = [
        ("t", prof.t),
        ("s", prof.s),
        ("s_conj", prof.s_conj),
        ("s_tilde", prof.s_tilde),
        ("a", prof.a),
        ("b", prof.b),
        ("r", prof.r),
        ("alpha", prof.alpha),
    ];
    for (k, v) in named {
        t.push(vec![k.into(), num(v)]);
        art.lines.push(format!("{k} = {v}"));
    }
    art.tables.push(t);
    let mut ids = Table::new("identities.csv", &[("identity", ""), ("lhs", "ExponentProfile::identities"), ("rhs", "ExponentProfile::identities"), ("holds", "ExponentProfile::identities")]);
    for c in prof.identities(p.tol) {
        ids.push(vec![c.name.into(), num(c.lhs), num(c.rhs), c.holds.to_string()]);
        art.checks.push(Check::new(c.name, c.holds, format!("{} vs {}", num(c.lhs), num(c.rhs))));
    }
    let mut results = json!({"profile": named.iter().map(|(k, v)| (k.to_string(), Value::from(num(*v)))).collect::<serde_json::Map<_, _>>()});
    if let Some(q) = p.q {
        let ep = ExtrapolationProfile::new(p.p0, p.q0.0).map_err(runtime)?;
        let al = alpha(&ep, p.p, q).map_err(runtime)?;
        let mut t = Table::new("extrapolation.csv", &[("quantity", ""), ("value", "ExtrapolationProfile / alpha")]);
        let rows = [
            ("t(p)", ep.t(p.p)),
            ("s(p)", ep.s(p.p)),
            ("r(p)", ep.r(p.p)),
            ("t(q)", ep.t(q)),
            ("s(q)", ep.s(q)),
            ("r(q)", ep.r(q)),
            ("alpha(p,q)", al.value),
        ];
        for (k, v) in rows {
            t.push(vec![k.into(), num(v)]);
        }
        art.tables.push(t);
        art.lines.push(format!("alpha(p,q) = {} ({:?})", al.value, al.case));
        results["alpha_pq"] = json!({"value": num(al.value), "case": format!("{:?}", al.case), "boundary": al.boundary});
        // the identities need both exponents below q0
        if p.p < p.q0.0 {
            let idc = identity_check(&ep, p.p, q, p.tol).map_err(runtime)?;
            ids.push(vec!["s(p)'s(q)'(p-q) = p s(p)' - q s(q)'".into(), num(idc.first.0), num(idc.first.1), idc.holds.to_string()]);
            ids.push(vec!["r(p)/r(q) = p s(p)' / (q s(q)')".into(), num(idc.second.0), num(idc.second.1), idc.holds.to_string()]);
            art.checks.push(Check::new("extrapolation identities", idc.holds, format!("{:?} {:?}", idc.first, idc.second)));
        }
    }
    art.tables.push(ids);
    art.results = results;
    Ok(art)
}

fn run_rdf(p: &RdfParams, seed: u64) -> Result<Artifacts, RunError> {
    let reports = ex::rdf_suite(p, seed)?;
    let mut t = Table::new(
        "rdf_trace.csv",
        &[("instance", ""), ("k", ""), ("term_norm", "rdf_iterate"), ("cumulative_norm", "rdf_iterate"), ("containment_slack", "rdf_iterate")],
    );
    let mut art = Artifacts::default();
    let mut results = Vec::new();
    for (i, rep) in reports.iter().enumerate() {
        for r in &rep.trace {
            t.push(vec![i.to_string(), r.k.to_string(), num(r.term_norm), num(r.cumulative_norm), num(r.containment_slack)]);
        }
        let ratio = rep.norm_sg / rep.norm_g;
        art.checks.push(Check::new(
            format!("instance {i}: containment, invariance, ellipsoid form"),
            rep.all_hold(),
            format!("contains {} invariance {} norm {} deviation {}", rep.contains_g, rep.invariance, rep.norm_bound, num(rep.ellipsoid_deviation)),
        ));
        art.checks.push(Check::new(format!("instance {i}: ||SG|| <= {} ||G||", p.norm_factor), ratio <= p.norm_factor, format!("ratio {}", num(ratio))));
        art.lines.push(format!("instance {i}: B = {}, ||SG||/||G|| = {ratio}", rep.b));
        results.push(json!({
            "instance": i,
            "b": num(rep.b),
            "norm_g": num(rep.norm_g),
            "norm_sg": num(rep.norm_sg),
            "contains_g": rep.contains_g,
            "norm_bound": rep.norm_bound,
            "invariance": rep.invariance,
            "ellipsoid_deviation": num(rep.ellipsoid_deviation),
        }));
    }
    art.tables.push(t);
    art.results = json!({"instances": results});
    Ok(art)
}

fn run_verify_sparse(p: &VerifySparseParams, seed: u64) -> Result<Artifacts, RunError> {
    let mut art = Artifacts::default();
    let file = match &p.file {
        Some(path) => {
            let f = load_sparse(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            if !(f.epsilon > 0.0 && f.epsilon <= 1.0) {
                return Err(ConfigError(format!("{}: epsilon {} outside (0, 1]", path.display(), f.epsilon)).into());
            }
            f
        }
        None => {
            let s = matweight_core::dyadic::generate_sparse(p.depth, p.epsilon, seed).map_err(runtime)?;
            let f = SparseFile::new(s.intervals(), s.epsilon());
            art.files.push(("sparse.json".into(), serde_json::to_string(&f).context("sparse family").map_err(runtime)?));
            f
        }
    };
    let family = file.family();
    let mut t = Table::new("certificate.csv", &[("level", ""), ("index", ""), ("lo", "verify_sparse"), ("hi", "verify_sparse")]);
    match verify_sparse(&family, file.epsilon) {
        Ok(cert) => {
            for (q, parts) in &cert.sets {
                for iv in parts {
                    t.push(vec![q.level.to_string(), q.index.to_string(), num(iv.lo), num(iv.hi)]);
                }
            }
            let recheck = ex::recheck_certificate(&family, &cert);
            art.checks.push(Check::new("sparse", true, format!("{} members, epsilon {}", cert.sets.len(), num(file.epsilon))));
            art.checks.push(Check::new("certificate recheck", recheck.is_ok(), recheck.err().map_or(String::new(), |e| e.to_string())));
            art.lines.push(format!("sparse: {} members at epsilon {}", cert.sets.len(), file.epsilon));
        }
        Err(e @ matweight_core::Error::NotSparse { .. }) => {
            art.checks.push(Check::new("sparse", false, e.to_string()));
            art.lines.push(format!("not sparse: {e}"));
        }
        Err(e) => return Err(ConfigError(e.to_string()).into()),
    }
    art.tables.push(t);
    art.results = json!({"members": family.len(), "epsilon": num(file.epsilon)});
    Ok(art)
}
