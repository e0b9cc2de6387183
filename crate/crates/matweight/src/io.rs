//! Weight and sparse-family files.
//!
//! Weight files hold one entry per grid cell; matrix entries are row-major
//! `[re, im]` pairs of decimal strings that parse back to the same bits.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use matweight_core::dyadic::DyadicInterval;
use matweight_core::weight::{CellGrid, Domain, PiecewiseWeight};
use matweight_core::{CMatrix, PdMatrix, C64};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Schema(String),
    #[error("cell {index}: {msg}")]
    Cell { index: i64, msg: String },
    #[error(transparent)]
    Engine(#[from] matweight_core::Error),
}

pub type IoResult<T> = Result<T, IoError>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window_exp: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellJson {
    index: i64,
    matrix: Vec<[String; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightJson {
    dim: usize,
    domain: DomainJson,
    level: i32,
    cells: Vec<CellJson>,
}

/// Shortest decimal that parses back to `x`.
pub fn float_string(x: f64) -> String {
    format!("{x:?}")
}

fn parse_float(s: &str, index: i64) -> IoResult<f64> {
    let x: f64 = s.trim().parse().map_err(|_| IoError::Cell { index, msg: format!("entry {s:?} is not a number") })?;
    if !x.is_finite() {
        return Err(IoError::Cell { index, msg: format!("entry {s:?} is not finite") });
    }
    Ok(x)
}

fn read(path: &Path) -> IoResult<String> {
    fs::read_to_string(path).map_err(|source| IoError::Fs { path: path.display().to_string(), source })
}

fn write(path: &Path, text: &str) -> IoResult<()> {
    fs::write(path, text).map_err(|source| IoError::Fs { path: path.display().to_string(), source })
}

pub fn weight_to_json(w: &PiecewiseWeight) -> String {
    let grid = w.grid();
    let domain = match grid.domain {
        Domain::Unit => DomainJson { kind: "unit".into(), window_exp: None },
        Domain::Line { window_exp } => DomainJson { kind: "line".into(), window_exp: Some(window_exp) },
    };
    let cells = (0..grid.count())
        .map(|i| {
            let m = w.value(i).matrix();
            // nalgebra iterates column-major; the file is row-major
            let matrix = (0..w.dim())
                .flat_map(|r| (0..w.dim()).map(move |c| (r, c)))
                .map(|(r, c)| [float_string(m[(r, c)].re), float_string(m[(r, c)].im)])
                .collect();
            CellJson { index: grid.cell(i).index, matrix }
        })
        .collect();
    let file = WeightJson { dim: w.dim(), domain, level: grid.level, cells };
    serde_json::to_string(&file).expect("weight serializes")
}

pub fn weight_from_json(text: &str) -> IoResult<PiecewiseWeight> {
    let file: WeightJson = serde_json::from_str(text)?;
    let d = file.dim;
    if d == 0 || d > matweight_core::hermitian::MAX_DIM {
        return Err(IoError::Schema(format!("dim {d} outside 1..={}", matweight_core::hermitian::MAX_DIM)));
    }
    let domain = match (file.domain.kind.as_str(), file.domain.window_exp) {
        ("unit", None) => Domain::Unit,
        ("unit", Some(_)) => return Err(IoError::Schema("unit domain takes no window_exp".into())),
        ("line", Some(window_exp)) => Domain::Line { window_exp },
        ("line", None) => return Err(IoError::Schema("line domain needs window_exp".into())),
        (k, _) => return Err(IoError::Schema(format!("unknown domain kind {k:?}"))),
    };
    let grid = CellGrid::new(domain, file.level)?;
    let first = grid.first_index();
    let n = grid.count();
    let mut slots: Vec<Option<PdMatrix>> = vec![None; n];
    // Counterexample weights repeat a handful of matrices over millions of cells.
    let mut seen: HashMap<Vec<u64>, PdMatrix> = HashMap::new();
    for cell in file.cells {
        let index = cell.index;
        let pos = index - first;
        if pos < 0 || pos >= n as i64 {
            return Err(IoError::Cell { index, msg: format!("index outside {first}..{}", first + n as i64) });
        }
        if cell.matrix.len() != d * d {
            return Err(IoError::Cell { index, msg: format!("expected {} matrix entries, found {}", d * d, cell.matrix.len()) });
        }
        let mut entries = Vec::with_capacity(d * d);
        for [re, im] in &cell.matrix {
            entries.push(C64::new(parse_float(re, index)?, parse_float(im, index)?));
        }
        let key: Vec<u64> = entries.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect();
        let m = match seen.get(&key) {
            Some(m) => m.clone(),
            None => {
                let m = PdMatrix::new(CMatrix::from_fn(d, d, |r, c| entries[r * d + c])).map_err(|e| IoError::Cell { index, msg: e.to_string() })?;
                seen.insert(key, m.clone());
                m
            }
        };
        let slot = &mut slots[pos as usize];
        if slot.is_some() {
            return Err(IoError::Cell { index, msg: "duplicate cell".into() });
        }
        *slot = Some(m);
    }
    let mut values = Vec::with_capacity(n);
    for (pos, v) in slots.into_iter().enumerate() {
        values.push(v.ok_or(IoError::Cell { index: first + pos as i64, msg: "missing cell".into() })?);
    }
    Ok(PiecewiseWeight::from_cells(grid, values)?)
}

pub fn save_weight(w: &PiecewiseWeight, path: &Path) -> IoResult<()> {
    write(path, &weight_to_json(w))
}

pub fn load_weight(path: &Path) -> IoResult<PiecewiseWeight> {
    weight_from_json(&read(path)?)
}

/// A dyadic family with its claimed sparseness, not yet verified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseFile {
    pub epsilon: f64,
    /// `(level, index)` pairs.
    pub intervals: Vec<(i32, i64)>,
}

impl SparseFile {
    pub fn new(family: &[DyadicInterval], epsilon: f64) -> Self {
        Self { epsilon, intervals: family.iter().map(|q| (q.level, q.index)).collect() }
    }

    pub fn family(&self) -> Vec<DyadicInterval> {
        self.intervals.iter().map(|&(l, i)| DyadicInterval::new(l, i)).collect()
    }
}

pub fn save_sparse(s: &SparseFile, path: &Path) -> IoResult<()> {
    write(path, &serde_json::to_string(s).expect("sparse family serializes"))
}

pub fn load_sparse(path: &Path) -> IoResult<SparseFile> {
    Ok(serde_json::from_str(&read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use matweight_core::weight::{counterexample_weight, extend_to_line, random_weight};

    fn bitwise_equal(a: &PiecewiseWeight, b: &PiecewiseWeight) -> bool {
        a.grid() == b.grid() && (0..a.cell_count()).all(|i| a.value(i).same_entries(b.value(i)))
    }

    #[test]
    fn random_roundtrip_is_exact() {
        for seed in 0..5 {
            let w = random_weight(3, 4, 1.3, seed).unwrap();
            let back = weight_from_json(&weight_to_json(&w)).unwrap();
            assert!(bitwise_equal(&w, &back));
        }
    }

    #[test]
    fn counterexample_roundtrip() {
        let w = counterexample_weight(2.0, 2.0, 10).unwrap();
        let back = weight_from_json(&weight_to_json(&w)).unwrap();
        assert!(bitwise_equal(&w, &back));
        assert_eq!(back.palette().len(), w.palette().len());
    }

    #[test]
    fn line_domain_roundtrip_through_file() {
        let w = extend_to_line(&counterexample_weight(2.0, 2.0, 3).unwrap(), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        save_weight(&w, &path).unwrap();
        let back = load_weight(&path).unwrap();
        assert!(bitwise_equal(&w, &back));
        assert!(std::fs::read_to_string(&path).unwrap().contains("\"window_exp\":1"));
    }

    #[test]
    fn floats_are_shortest_and_exact() {
        for x in [0.1, 1.0 / 3.0, -0.0, 5e-324, 1e300, f64::MAX] {
            let s = float_string(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(float_string(0.1), "0.1");
    }

    #[test]
    fn wrong_entry_count_names_the_cell() {
        let text = r#"{"dim":1,"domain":{"kind":"unit"},"level":1,"cells":[
            {"index":0,"matrix":[["1","0"]]},
            {"index":1,"matrix":[["1","0"],["2","0"]]}]}"#;
        let err = weight_from_json(text).unwrap_err();
        assert!(matches!(err, IoError::Cell { index: 1, .. }), "{err}");
        assert!(err.to_string().contains("expected 1 matrix entries, found 2"));
    }

    #[test]
    fn schema_violations() {
        let missing = r#"{"dim":1,"domain":{"kind":"unit"},"level":1,"cells":[{"index":0,"matrix":[["1","0"]]}]}"#;
        assert!(matches!(weight_from_json(missing), Err(IoError::Cell { index: 1, .. })));
        let not_pd = r#"{"dim":1,"domain":{"kind":"unit"},"level":0,"cells":[{"index":0,"matrix":[["-1","0"]]}]}"#;
        assert!(matches!(weight_from_json(not_pd), Err(IoError::Cell { index: 0, .. })));
        let bad_num = r#"{"dim":1,"domain":{"kind":"unit"},"level":0,"cells":[{"index":0,"matrix":[["x","0"]]}]}"#;
        assert!(matches!(weight_from_json(bad_num), Err(IoError::Cell { index: 0, .. })));
        let no_window = r#"{"dim":1,"domain":{"kind":"line"},"level":0,"cells":[]}"#;
        assert!(matches!(weight_from_json(no_window), Err(IoError::Schema(_))));
        let extra = r#"{"dim":1,"domain":{"kind":"unit"},"level":0,"cells":[],"x":1}"#;
        assert!(matches!(weight_from_json(extra), Err(IoError::Json(_))));
    }

    #[test]
    fn sparse_roundtrip() {
        let s = matweight_core::dyadic::generate_sparse(6, 0.5, 3).unwrap();
        let file = SparseFile::new(s.intervals(), s.epsilon());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        save_sparse(&file, &path).unwrap();
        let back = load_sparse(&path).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.family(), s.intervals());
    }
}
