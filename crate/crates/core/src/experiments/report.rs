use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    Info,
    Invalid,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Info => "INFO",
            Verdict::Invalid => "INVALID",
        }
    }

    fn from_margin(margin: f64, err: f64) -> Self {
        if margin > err {
            Verdict::Pass
        } else if margin < -err {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub section: String,
    pub params: Params,
    pub measured: f64,
    pub bound: f64,
    /// Positive when the bound holds.
    pub margin: f64,
    pub err: f64,
    pub verdict: Verdict,
    pub flag: String,
}

impl Row {
    fn new(section: &str, params: Params, measured: f64, bound: f64, margin: f64, err: f64, verdict: Verdict) -> Self {
        Self { section: section.to_string(), params, measured, bound, margin, err, verdict, flag: String::new() }
    }

    /// Checks `measured ≤ bound`.
    pub fn upper(section: &str, params: Params, measured: f64, bound: f64, err: f64) -> Self {
        let margin = bound - measured;
        Self::new(section, params, measured, bound, margin, err, Verdict::from_margin(margin, err))
    }

    /// Checks `measured ≥ bound`.
    pub fn lower(section: &str, params: Params, measured: f64, bound: f64, err: f64) -> Self {
        let margin = measured - bound;
        Self::new(section, params, measured, bound, margin, err, Verdict::from_margin(margin, err))
    }

    pub fn info(section: &str, params: Params, measured: f64, err: f64) -> Self {
        Self::new(section, params, measured, f64::NAN, f64::NAN, err, Verdict::Info)
    }

    pub fn invalid(section: &str, params: Params, flag: &str) -> Self {
        let mut r = Self::new(section, params, f64::NAN, f64::NAN, f64::NAN, f64::NAN, Verdict::Invalid);
        r.flag = flag.to_string();
        r
    }

    /// Marks a zero-margin comparison of exactly computed quantities as held.
    pub fn exact_tie(mut self) -> Self {
        if self.margin == 0.0 && self.err == 0.0 {
            self.verdict = Verdict::Pass;
            self = self.with_flag("exact");
        }
        self
    }

    pub fn with_flag(mut self, flag: &str) -> Self {
        if !flag.is_empty() {
            if !self.flag.is_empty() {
                self.flag.push(';');
            }
            self.flag.push_str(flag);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitStats {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

/// Least-squares line `y = slope·x + intercept`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> FitStats {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    FitStats { slope, intercept, r2, n: xs.len() }
}

/// First 16 hex digits of SHA-256 over the canonical JSON of `(id, config)`.
pub fn config_hash<T: Serialize>(id: &str, config: &T) -> Result<String> {
    let canonical = serde_json::to_string(&json!({"id": id, "config": serde_json::to_value(config)?}))?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(hex::encode(digest)[..16].to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub id: String,
    pub config_hash: String,
    pub rows: Vec<Row>,
    pub fit: Option<FitStats>,
    pub summary: BTreeMap<String, f64>,
    pub runtime_secs: f64,
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

impl ExperimentReport {
    pub fn new<T: Serialize>(id: &str, config: &T) -> Result<Self> {
        Ok(Self {
            id: id.to_string(),
            config_hash: config_hash(id, config)?,
            rows: Vec::new(),
            fit: None,
            summary: BTreeMap::new(),
            runtime_secs: 0.0,
        })
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.rows.iter().filter(|r| r.verdict == v).count()
    }

    pub fn has_failures(&self) -> bool {
        self.count(Verdict::Fail) > 0
    }

    pub fn rows_in<'a>(&'a self, section: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.section == section)
    }

    pub fn to_csv(&self) -> Result<String> {
        let keys: BTreeSet<&str> = self.rows.iter().flat_map(|r| r.params.keys().map(String::as_str)).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["section".to_string()];
        header.extend(keys.iter().map(|k| k.to_string()));
        header.extend(["measured", "bound", "margin", "err", "verdict", "flag", "config_hash"].map(String::from));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.section.clone()];
            rec.extend(keys.iter().map(|k| r.params.get(*k).map_or(String::new(), |v| fmt(*v))));
            rec.extend([fmt(r.measured), fmt(r.bound), fmt(r.margin), fmt(r.err)]);
            rec.extend([r.verdict.as_str().to_string(), r.flag.clone(), self.config_hash.clone()]);
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary_json(&self) -> Value {
        json!({
            "id": self.id,
            "config_hash": self.config_hash,
            "pass_counts": {
                "PASS": self.count(Verdict::Pass),
                "FAIL": self.count(Verdict::Fail),
                "INCONCLUSIVE": self.count(Verdict::Inconclusive),
                "INFO": self.count(Verdict::Info),
                "INVALID": self.count(Verdict::Invalid),
            },
            "fit_stats": self.fit,
            "summary": self.summary,
            "runtime_secs": self.runtime_secs,
        })
    }
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| crate::Error::Io(e.to_string()))?;
    Ok(())
}
