//! Report document, claim aggregation across resolutions and CSV series emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::verify::{ClaimRecord, Verdict};

/// A claim at one resolution.
#[derive(Debug, Clone, Serialize)]
pub struct LevelEntry {
    #[serde(rename = "N")]
    pub n: usize,
    pub measured: BTreeMap<String, f64>,
    pub bound: BTreeMap<String, f64>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// A registry claim merged over every resolution it was evaluated at. `measured`, `bound`
/// and `tolerance` repeat the finest level.
#[derive(Debug, Clone, Serialize)]
pub struct Claim {
    pub id: String,
    pub anchor: String,
    pub measured: BTreeMap<String, f64>,
    pub bound: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub resolutions: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<LevelEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesRef {
    pub name: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub path: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub command: String,
    pub config: RunConfig,
    pub resolutions: Vec<usize>,
    /// Constant name → value per resolution.
    pub constants: BTreeMap<String, Vec<f64>>,
    pub claims: Vec<Claim>,
    pub series: Vec<SeriesRef>,
}

impl ReportDocument {
    pub fn has_failures(&self) -> bool {
        self.claims.iter().any(|c| c.verdict.is_fail())
    }

    pub fn claim(&self, id: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path, file: &str) -> Result<PathBuf> {
        let path = dir.join(file);
        std::fs::write(&path, self.to_json()).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Ok(path)
    }
}

/// Merges per-level records and cross-level records into one claim per registry id,
/// in registry order. Ids with no record become not-applicable with `missing`.
pub fn aggregate(registry: &[(&str, &str)], levels: &[(usize, Vec<ClaimRecord>)], cross: Vec<ClaimRecord>, missing: &str) -> Vec<Claim> {
    let all_n: Vec<usize> = levels.iter().map(|l| l.0).collect();
    registry
        .iter()
        .map(|&(id, anchor)| {
            if let Some(c) = cross.iter().find(|c| c.id == id) {
                return Claim {
                    id: id.into(),
                    anchor: anchor.into(),
                    measured: c.measured.clone(),
                    bound: c.bound.clone(),
                    tolerance: c.tolerance,
                    verdict: c.verdict.clone(),
                    resolutions: all_n.clone(),
                    levels: Vec::new(),
                    notes: c.notes.clone(),
                };
            }
            let entries: Vec<(usize, &ClaimRecord)> =
                levels.iter().flat_map(|(n, recs)| recs.iter().filter(|r| r.id == id).map(move |r| (*n, r))).collect();
            let Some(&(_, last)) = entries.last() else {
                return Claim {
                    id: id.into(),
                    anchor: anchor.into(),
                    measured: BTreeMap::new(),
                    bound: BTreeMap::new(),
                    tolerance: 0.0,
                    verdict: Verdict::NotApplicable(missing.into()),
                    resolutions: Vec::new(),
                    levels: Vec::new(),
                    notes: Vec::new(),
                };
            };
            let verdicts: Vec<&Verdict> = entries.iter().map(|e| &e.1.verdict).collect();
            let verdict = if verdicts.iter().any(|v| v.is_fail()) {
                Verdict::Fail
            } else if verdicts.iter().any(|v| **v == Verdict::Pass) {
                Verdict::Pass
            } else {
                (*verdicts[0]).clone()
            };
            let mut notes: Vec<String> = Vec::new();
            for (_, r) in &entries {
                for n in &r.notes {
                    if !notes.contains(n) {
                        notes.push(n.clone());
                    }
                }
            }
            Claim {
                id: id.into(),
                anchor: anchor.into(),
                measured: last.measured.clone(),
                bound: last.bound.clone(),
                tolerance: last.tolerance,
                verdict,
                resolutions: entries.iter().map(|e| e.0).collect(),
                levels: entries
                    .iter()
                    .map(|(n, r)| LevelEntry { n: *n, measured: r.measured.clone(), bound: r.bound.clone(), verdict: r.verdict.clone(), notes: r.notes.clone() })
                    .collect(),
                notes,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Index(usize),
    Real(f64),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Index(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

/// A rectangular table destined for `<name>_<N>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Series {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = self.columns.join(",");
        out.push('\n');
        for (k, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(Error::Spectrum(format!(
                    "series {}: row {k} has {} cells, expected {}",
                    self.name,
                    row.len(),
                    self.columns.len()
                )));
            }
            for (j, c) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                match c {
                    Cell::Index(v) => write!(out, "{v}").unwrap(),
                    Cell::Real(v) => write!(out, "{v:.16e}").unwrap(),
                }
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Writes `<name>_<n>.csv` into `dir` and returns its path.
pub fn emit_series(series: &Series, n: usize, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("{}_{n}.csv", series.name));
    let text = series.to_csv()?;
    std::fs::write(&path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_format_is_exact() {
        let mut s = Series::new("eigenvalues_L", &["i", "re_lambda", "im_lambda", "modulus"]);
        s.push(vec![1.into(), 0.1.into(), (-2.5e-300).into(), std::f64::consts::PI.into()]);
        let csv = s.to_csv().unwrap();
        assert_eq!(csv, "i,re_lambda,im_lambda,modulus\n1,1.0000000000000001e-1,-2.5000000000000000e-300,3.1415926535897931e0\n");
        // 17 significant digits round-trip
        for field in csv.lines().nth(1).unwrap().split(',').skip(1) {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), field);
        }
        s.push(vec![2.into()]);
        assert!(s.to_csv().is_err());
    }

    #[test]
    fn emit_names_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Series::new("fov_L", &["phi", "re_z", "im_z"]);
        s.push(vec![0.0.into(), 1.0.into(), 0.0.into()]);
        let p = emit_series(&s, 32, dir.path()).unwrap();
        assert_eq!(p.file_name().unwrap(), "fov_L_32.csv");
        assert!(!std::fs::read_to_string(&p).unwrap().contains('\r'));
        let missing = dir.path().join("nope");
        match emit_series(&s, 32, &missing) {
            Err(Error::Io { path, .. }) => assert!(path.contains("nope")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn aggregation_covers_registry_once() {
        let reg = [("a", "first"), ("b", "second"), ("c", "third"), ("x", "cross")];
        let pass = |id: &str| ClaimRecord::new(id, 0.1).measure("v", 1.0);
        let levels = vec![
            (8, vec![pass("a"), pass("b").verdict(Verdict::Fail)]),
            (16, vec![pass("a").measure("v", 2.0), pass("b")]),
        ];
        let claims = aggregate(&reg, &levels, vec![pass("x")], "not evaluated");
        let ids: Vec<&str> = claims.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c", "x"]);
        assert_eq!(claims[0].verdict, Verdict::Pass);
        assert_eq!(claims[0].measured["v"], 2.0);
        assert_eq!(claims[0].resolutions, [8, 16]);
        assert_eq!(claims[1].verdict, Verdict::Fail);
        assert!(matches!(claims[2].verdict, Verdict::NotApplicable(_)));
        assert_eq!(claims[3].resolutions, [8, 16]);
        assert_eq!(claims[3].anchor, "cross");
    }
}
