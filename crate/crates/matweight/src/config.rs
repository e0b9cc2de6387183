//! Experiment configuration: one command with its parameters plus the run flags.
//!
//! JSON form:
//! `{"command": "sparse-form", "seed": 0, "threads": 0, "out": "out", "params": {...}}`.
//! Every params field has a default, so `"params": {}` runs the standard suite.

use std::fmt;
use std::path::PathBuf;

use matweight_core::characteristics::{check_constraint, check_pq};
use matweight_core::extrapolation::{alpha, ExtrapolationProfile};
use matweight_core::sparse::exponent_profile;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// An exponent that may be infinite, spelled `"inf"` in JSON.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Exponent(x)),
            Raw::Text(t) => parse_exponent(&t).map(Exponent).map_err(serde::de::Error::custom),
        }
    }
}

/// `"inf"` (any case, optionally `"infinity"`) or a decimal number.
pub fn parse_exponent(t: &str) -> Result<f64, String> {
    let t = t.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        return Ok(f64::INFINITY);
    }
    match t.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("exponent {t:?} is neither a number nor \"inf\"")),
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    Dyadic {
        #[serde(default)]
        max_level: Option<i32>,
    },
    /// Sliding windows of up to `max_cells` cells on every level.
    Windows { max_cells: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CharSpec {
    Apq { p: f64, q: f64 },
    Ap { p: f64 },
    A1,
    AInf { t: f64 },
    Rh { t: f64, s: Exponent },
}

impl CharSpec {
    pub fn label(&self) -> String {
        match self {
            CharSpec::Apq { p, q } => format!("A_({p},{q})"),
            CharSpec::Ap { p } => format!("A_{p}"),
            CharSpec::A1 => "A_1".into(),
            CharSpec::AInf { t } => format!("A_({t},inf)"),
            CharSpec::Rh { t, s } => format!("RH_({t},{s})"),
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let ok = match *self {
            CharSpec::Apq { p, q } => check_pq(p, q).is_ok(),
            CharSpec::Ap { p } => check_pq(p, p).is_ok(),
            CharSpec::A1 => true,
            CharSpec::AInf { t } => t >= 1.0 && t.is_finite(),
            CharSpec::Rh { t, s } => t > 1.0 && t.is_finite() && s.0 > 1.0,
        };
        if ok {
            Ok(())
        } else {
            bad(format!("inadmissible exponents for {}", self.label()))
        }
    }
}

fn check_dim(d: usize) -> Result<(), ConfigError> {
    if d == 0 || d > matweight_core::hermitian::MAX_DIM {
        return bad(format!("dimension {d} outside 1..={}", matweight_core::hermitian::MAX_DIM));
    }
    Ok(())
}

fn check_level(l: i32) -> Result<(), ConfigError> {
    if !(0..=matweight_core::weight::MAX_LEVEL).contains(&l) {
        return bad(format!("level {l} outside 0..={}", matweight_core::weight::MAX_LEVEL));
    }
    Ok(())
}

fn check_spread(s: f64) -> Result<(), ConfigError> {
    if !(s >= 0.0 && s.is_finite()) {
        return bad("spread must be finite and nonnegative");
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharParams {
    /// Weight file; a random weight is drawn when absent.
    pub weight: Option<PathBuf>,
    pub dim: usize,
    pub level: i32,
    /// 0 gives the identity weight.
    pub spread: f64,
    pub family: FamilySpec,
    pub characteristics: Vec<CharSpec>,
}

impl Default for CharParams {
    fn default() -> Self {
        Self {
            weight: None,
            dim: 2,
            level: 4,
            spread: 1.0,
            family: FamilySpec::Dyadic { max_level: None },
            characteristics: vec![
                CharSpec::Apq { p: 2.0, q: 2.0 },
                CharSpec::A1,
                CharSpec::AInf { t: 2.0 },
                CharSpec::Rh { t: 2.0, s: Exponent(2.0) },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleParams {
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
    pub q2: f64,
    pub depths: Vec<u32>,
    pub window_cells: usize,
    /// Also write the weight at this depth to `weight.json`.
    pub save_depth: Option<u32>,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        Self { p1: 2.0, q1: 2.0, p2: 3.0, q2: 1.5, depths: vec![4, 8, 12, 16], window_cells: 8, save_depth: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CordesParams {
    pub pairs: usize,
    pub dims: Vec<usize>,
    pub exponents: Vec<f64>,
    pub spread: f64,
    /// Family one, `a > 1`.
    pub gap_exponents: Vec<f64>,
    /// Family two, `0 < a < 1`.
    pub gap_exponents_two: Vec<f64>,
    pub gap_ns: Vec<u64>,
    /// Log-spaced `n` in `[1, appendix_max]` for the trace identities.
    pub appendix_points: usize,
    pub appendix_max: u64,
    /// Allowed max/min spread of `gap / n^(a-1)` per exponent.
    pub gap_band: f64,
}

impl Default for CordesParams {
    fn default() -> Self {
        Self {
            pairs: 1000,
            dims: vec![2, 3],
            exponents: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            spread: 1.0,
            gap_exponents: vec![1.5, 2.0, 3.0],
            gap_exponents_two: vec![0.25, 0.5, 0.75],
            gap_ns: vec![10, 100, 1_000, 10_000, 100_000],
            appendix_points: 25,
            appendix_max: 1_000_000,
            gap_band: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JohnParams {
    pub dim: usize,
    pub bodies: usize,
    pub directions: usize,
    pub tol_in: f64,
    pub tol_out: f64,
}

impl Default for JohnParams {
    fn default() -> Self {
        Self { dim: 2, bodies: 200, directions: 256, tol_in: 1e-6, tol_out: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparseFormParams {
    pub p0: f64,
    pub q0: Exponent,
    pub p: f64,
    pub dims: Vec<usize>,
    pub depths: Vec<i32>,
    /// Seeds `seed .. seed + seeds`.
    pub seeds: u64,
    pub lambda: f64,
    pub epsilon: f64,
    /// Resolution of the random weight and fields before refinement.
    pub data_level: i32,
    pub spread: f64,
    /// The max ratio at `compare_depths[1]` must stay within `stability_tol`
    /// of the max at `compare_depths[0]`.
    pub compare_depths: Option<[i32; 2]>,
    pub stability_tol: f64,
}

impl Default for SparseFormParams {
    fn default() -> Self {
        Self {
            p0: 1.2,
            q0: Exponent(8.0),
            p: 2.0,
            dims: vec![1, 2],
            depths: (4..=10).collect(),
            seeds: 100,
            lambda: matweight_core::sparse::DEFAULT_LAMBDA,
            epsilon: 0.5,
            data_level: 4,
            spread: 1.0,
            compare_depths: Some([8, 10]),
            stability_tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentsParams {
    pub p0: f64,
    pub q0: Exponent,
    pub p: f64,
    /// Target exponent for the extrapolation calculus.
    pub q: Option<f64>,
    pub tol: f64,
}

impl Default for ExponentsParams {
    fn default() -> Self {
        Self { p0: 1.0, q0: Exponent(f64::INFINITY), p: 2.0, q: None, tol: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RdfParams {
    pub p0: f64,
    pub q0: Exponent,
    pub q: f64,
    pub dim: usize,
    pub level: i32,
    pub spread: f64,
    pub k_max: usize,
    pub instances: u64,
    /// `||SG|| <= norm_factor ||G||`.
    pub norm_factor: f64,
}

impl Default for RdfParams {
    fn default() -> Self {
        Self { p0: 1.0, q0: Exponent(4.0), q: 2.0, dim: 2, level: 5, spread: 0.7, k_max: 40, instances: 4, norm_factor: 2.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySparseParams {
    /// Family to verify; a random family is generated and saved when absent.
    pub file: Option<PathBuf>,
    pub depth: i32,
    pub epsilon: f64,
}

impl Default for VerifySparseParams {
    fn default() -> Self {
        Self { file: None, depth: 8, epsilon: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Char(CharParams),
    Counterexample(CounterexampleParams),
    Cordes(CordesParams),
    John(JohnParams),
    SparseForm(SparseFormParams),
    Exponents(ExponentsParams),
    RdfDemo(RdfParams),
    VerifySparse(VerifySparseParams),
}

pub const COMMANDS: [&str; 8] = ["char", "counterexample", "cordes", "john", "sparse-form", "exponents", "rdf-demo", "verify-sparse"];

fn from_params<T: serde::de::DeserializeOwned>(name: &str, params: Value) -> Result<T, ConfigError> {
    serde_json::from_value(params).map_err(|e| ConfigError(format!("{name} params: {e}")))
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Char(_) => "char",
            Command::Counterexample(_) => "counterexample",
            Command::Cordes(_) => "cordes",
            Command::John(_) => "john",
            Command::SparseForm(_) => "sparse-form",
            Command::Exponents(_) => "exponents",
            Command::RdfDemo(_) => "rdf-demo",
            Command::VerifySparse(_) => "verify-sparse",
        }
    }

    pub fn from_parts(name: &str, params: Value) -> Result<Self, ConfigError> {
        Ok(match name {
            "char" => Command::Char(from_params(name, params)?),
            "counterexample" => Command::Counterexample(from_params(name, params)?),
            "cordes" => Command::Cordes(from_params(name, params)?),
            "john" => Command::John(from_params(name, params)?),
            "sparse-form" => Command::SparseForm(from_params(name, params)?),
            "exponents" => Command::Exponents(from_params(name, params)?),
            "rdf-demo" => Command::RdfDemo(from_params(name, params)?),
            "verify-sparse" => Command::VerifySparse(from_params(name, params)?),
            other => return bad(format!("unknown command {other:?} (expected one of {})", COMMANDS.join(", "))),
        })
    }

    pub fn params(&self) -> Value {
        let v = match self {
            Command::Char(p) => serde_json::to_value(p),
            Command::Counterexample(p) => serde_json::to_value(p),
            Command::Cordes(p) => serde_json::to_value(p),
            Command::John(p) => serde_json::to_value(p),
            Command::SparseForm(p) => serde_json::to_value(p),
            Command::Exponents(p) => serde_json::to_value(p),
            Command::RdfDemo(p) => serde_json::to_value(p),
            Command::VerifySparse(p) => serde_json::to_value(p),
        };
        v.expect("params serialize")
    }

    /// Every constraint the target operation imposes, checked up front.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            Command::Char(p) => {
                if p.weight.is_none() {
                    check_dim(p.dim)?;
                    check_level(p.level)?;
                    check_spread(p.spread)?;
                }
                if p.characteristics.is_empty() {
                    return bad("no characteristics requested");
                }
                if let FamilySpec::Windows { max_cells: 0 } = p.family {
                    return bad("windows need max_cells >= 1");
                }
                p.characteristics.iter().try_for_each(CharSpec::validate)
            }
            Command::Counterexample(p) => {
                check_constraint(p.p1, p.q1, p.p2, p.q2).map_err(|e| ConfigError(e.to_string()))?;
                if !(p.p1 < p.p2 && p.p1 <= p.q1) {
                    return bad("need p1 < p2 and p1 <= q1");
                }
                if p.depths.is_empty() || p.depths.iter().chain(&p.save_depth).any(|&d| d > 23) {
                    return bad("depths must be nonempty and at most 23");
                }
                if p.window_cells == 0 {
                    return bad("window_cells must be >= 1");
                }
                Ok(())
            }
            Command::Cordes(p) => {
                p.dims.iter().try_for_each(|&d| check_dim(d))?;
                check_spread(p.spread)?;
                if p.dims.is_empty() {
                    return bad("no dimensions");
                }
                if p.exponents.iter().any(|a| !(0.0..=1.0).contains(a)) {
                    return bad("Cordes exponents must lie in [0, 1]");
                }
                if p.gap_exponents.iter().any(|&a| !(a > 1.0 && a.is_finite())) {
                    return bad("family-one gap exponents must exceed 1");
                }
                if p.gap_exponents_two.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
                    return bad("family-two gap exponents must lie in (0, 1)");
                }
                if p.gap_ns.contains(&0) || p.appendix_max == 0 || p.appendix_points < 2 {
                    return bad("n values must be >= 1 and appendix_points >= 2");
                }
                if !(p.gap_band >= 1.0) {
                    return bad("gap_band must be >= 1");
                }
                Ok(())
            }
            Command::John(p) => {
                check_dim(p.dim)?;
                if p.directions == 0 || p.directions % 4 != 0 {
                    return bad("directions must be a positive multiple of 4");
                }
                if !(p.tol_in >= 0.0 && p.tol_out >= 0.0) {
                    return bad("tolerances must be nonnegative");
                }
                Ok(())
            }
            Command::SparseForm(p) => {
                exponent_profile(p.p0, p.q0.0, p.p).map_err(|e| ConfigError(e.to_string()))?;
                p.dims.iter().try_for_each(|&d| check_dim(d))?;
                check_level(p.data_level)?;
                check_spread(p.spread)?;
                if p.dims.is_empty() || p.depths.is_empty() || p.seeds == 0 {
                    return bad("dims, depths and seeds must be nonempty");
                }
                if p.depths.iter().any(|&d| !(0..=16).contains(&d)) {
                    return bad("depths must lie in 0..=16");
                }
                if !(p.epsilon > 0.0 && p.epsilon < 1.0) {
                    return bad("epsilon must lie in (0, 1)");
                }
                if !(p.lambda >= 1.0 && p.lambda.is_finite()) {
                    return bad("lambda must be finite and >= 1");
                }
                if let Some([a, b]) = p.compare_depths {
                    if !(p.depths.contains(&a) && p.depths.contains(&b)) {
                        return bad("compare_depths must be among depths");
                    }
                }
                Ok(())
            }
            Command::Exponents(p) => {
                exponent_profile(p.p0, p.q0.0, p.p).map_err(|e| ConfigError(e.to_string()))?;
                if let Some(q) = p.q {
                    let prof = ExtrapolationProfile::new(p.p0, p.q0.0).map_err(|e| ConfigError(e.to_string()))?;
                    alpha(&prof, p.p, q).map_err(|e| ConfigError(e.to_string()))?;
                }
                if !(p.tol > 0.0) {
                    return bad("tol must be positive");
                }
                Ok(())
            }
            Command::RdfDemo(p) => {
                ExtrapolationProfile::new(p.p0, p.q0.0).map_err(|e| ConfigError(e.to_string()))?;
                if !(p.q > p.p0 && p.q < p.q0.0) {
                    return bad(format!("q must lie in ({}, {})", p.p0, p.q0));
                }
                if !(1..=2).contains(&p.dim) {
                    return bad("rdf-demo supports d = 1, 2");
                }
                check_level(p.level)?;
                if (1usize << p.level) > matweight_core::extrapolation::RDF_MAX_CELLS {
                    return bad(format!("rdf-demo supports at most {} cells", matweight_core::extrapolation::RDF_MAX_CELLS));
                }
                check_spread(p.spread)?;
                if p.k_max == 0 || p.instances == 0 {
                    return bad("k_max and instances must be positive");
                }
                Ok(())
            }
            Command::VerifySparse(p) => {
                if !(0..=24).contains(&p.depth) {
                    return bad("depth must lie in 0..=24");
                }
                if p.file.is_none() && !(p.epsilon > 0.0 && p.epsilon < 1.0) {
                    return bad("epsilon must lie in (0, 1)");
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    /// 0 lets rayon pick.
    pub threads: usize,
    pub out: PathBuf,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigJson {
    command: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    threads: usize,
    #[serde(default = "default_out")]
    out: PathBuf,
    #[serde(default = "empty_params")]
    params: Value,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn empty_params() -> Value {
    Value::Object(Default::default())
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        Self { command, seed: 0, threads: 0, out: default_out() }
    }

    pub fn defaults(name: &str) -> Result<Self, ConfigError> {
        Ok(Self::new(Command::from_parts(name, empty_params())?))
    }

    pub fn to_json(&self) -> String {
        let raw = ConfigJson { command: self.command.name().into(), seed: self.seed, threads: self.threads, out: self.out.clone(), params: self.command.params() };
        serde_json::to_string_pretty(&raw).expect("config serializes")
    }

    /// Parse without validating.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let raw: ConfigJson = serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
        Ok(Self { command: Command::from_parts(&raw.command, raw.params)?, seed: raw.seed, threads: raw.threads, out: raw.out })
    }

    /// Set one params field from `key=value`; the value is read as JSON when
    /// it parses, as a string otherwise (so `q0=inf` works unquoted).
    pub fn set_param(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = assignment.split_once('=') else {
            return bad(format!("expected key=value, got {assignment:?}"));
        };
        let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.into()));
        let mut params = self.command.params();
        let obj = params.as_object_mut().expect("params are objects");
        if !obj.contains_key(key) {
            return bad(format!("{} has no parameter {key:?}", self.command.name()));
        }
        obj.insert(key.into(), value);
        self.command = Command::from_parts(self.command.name(), params)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_default_roundtrips() {
        for name in COMMANDS {
            let mut cfg = ExperimentConfig::defaults(name).unwrap();
            cfg.seed = 17;
            cfg.threads = 2;
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.to_json(), cfg.to_json());
            cfg.command.validate().unwrap();
        }
    }

    #[test]
    fn awkward_floats_roundtrip() {
        let mut cfg = ExperimentConfig::defaults("sparse-form").unwrap();
        if let Command::SparseForm(p) = &mut cfg.command {
            p.p0 = 1.0 + f64::EPSILON;
            p.p = 0.1 + 0.2;
            p.lambda = 5.000000000000001;
        }
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn inf_is_parsed() {
        let cfg = ExperimentConfig::from_json(r#"{"command":"exponents","params":{"p0":1,"q0":"inf","p":2}}"#).unwrap();
        let Command::Exponents(p) = &cfg.command else { panic!() };
        assert_eq!(p.q0, Exponent(f64::INFINITY));
        assert!(cfg.to_json().contains("\"inf\""));
        assert!(ExperimentConfig::from_json(r#"{"command":"exponents","params":{"q0":"lots"}}"#).is_err());
    }

    #[test]
    fn unknown_fields_and_commands_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"command":"exponents","params":{"p00":1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"command":"plot"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"command":"john","colour":1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"command":"char","params":{"family":{"kind":"dyadic","x":1}}}"#).is_err());
    }

    #[test]
    fn constraint_violation_fails_validation() {
        let mut cfg = ExperimentConfig::defaults("counterexample").unwrap();
        cfg.set_param("q2=2").unwrap();
        let err = cfg.command.validate().unwrap_err();
        assert!(err.0.contains("constraint"), "{err}");
    }

    #[test]
    fn set_param_parses_values() {
        let mut cfg = ExperimentConfig::defaults("exponents").unwrap();
        cfg.set_param("q0=inf").unwrap();
        cfg.set_param("q=1.5").unwrap();
        let Command::Exponents(p) = &cfg.command else { panic!() };
        assert_eq!(p.q, Some(1.5));
        assert!(cfg.set_param("nope=1").is_err());
        assert!(cfg.set_param("p0").is_err());
    }
}
