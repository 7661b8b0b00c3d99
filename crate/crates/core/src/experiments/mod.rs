//! Scripted experiments. Each produces an [`ExperimentReport`] whose rows carry
//! a measured value, the predicted bound and a verdict derived from the margin
//! and the propagated error.

pub mod census;
pub mod counterexample;
pub mod lemmas;
pub mod logbeta;
pub mod oracle;
pub mod positive;
pub mod remark;
pub mod weights;

mod report;

pub use report::{config_hash, fit_line, write_atomic, ExperimentReport, FitStats, Params, Row, Verdict};

use std::str::FromStr;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Log-spaced points from `a` to `b` inclusive.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Trapezoid rule on a sorted grid with an error estimate from the rule on
/// every second point.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let rule = |idx: &[usize]| -> f64 {
        idx.windows(2).map(|w| 0.5 * (xs[w[1]] - xs[w[0]]) * (ys[w[0]] + ys[w[1]])).sum()
    };
    let all: Vec<usize> = (0..xs.len()).collect();
    let mut half: Vec<usize> = (0..xs.len()).step_by(2).collect();
    if half.last() != Some(&(xs.len() - 1)) {
        half.push(xs.len() - 1);
    }
    let fine = rule(&all);
    let coarse = rule(&half);
    (fine, (fine - coarse).abs() / 3.0)
}

/// Trapezoid weights of a sorted grid.
pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { xs[i] - xs[i - 1] } else { 0.0 };
            let right = if i + 1 < n { xs[i + 1] - xs[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Order-preserving parallel map.
pub fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> Result<U> + Sync + Send) -> Result<Vec<U>> {
    items.par_iter().map(f).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    LogBeta,
    Remark,
    Counterexample,
    Positive,
    Census,
    Oracle,
    Lemmas,
    Weights,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::Oracle,
        ExperimentId::LogBeta,
        ExperimentId::Remark,
        ExperimentId::Counterexample,
        ExperimentId::Lemmas,
        ExperimentId::Positive,
        ExperimentId::Census,
        ExperimentId::Weights,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::LogBeta => "logbeta",
            ExperimentId::Remark => "remark",
            ExperimentId::Counterexample => "counterexample",
            ExperimentId::Positive => "positive",
            ExperimentId::Census => "census",
            ExperimentId::Oracle => "oracle",
            ExperimentId::Lemmas => "lemmas",
            ExperimentId::Weights => "weights",
        }
    }
}

impl FromStr for ExperimentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Merges `overrides` into the serialized defaults and deserializes the result.
pub fn merge_config<T: Serialize + DeserializeOwned>(defaults: T, overrides: Option<&Value>) -> Result<T> {
    let mut base = serde_json::to_value(defaults)?;
    if let Some(Value::Object(o)) = overrides {
        let map = base.as_object_mut().expect("configs serialize to objects");
        for (k, v) in o {
            if !map.contains_key(k) {
                return Err(Error::Config(format!("unknown config key '{k}'")));
            }
            map.insert(k.clone(), v.clone());
        }
    } else if let Some(other) = overrides {
        return Err(Error::Config(format!("config must be a JSON object, got {other}")));
    }
    serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))
}

/// Serialized default config of an experiment.
pub fn default_config(id: ExperimentId) -> Result<Value> {
    Ok(match id {
        ExperimentId::LogBeta => serde_json::to_value(logbeta::LogBetaConfig::default())?,
        ExperimentId::Remark => serde_json::to_value(remark::RemarkConfig::default())?,
        ExperimentId::Counterexample => serde_json::to_value(counterexample::CounterexampleConfig::default())?,
        ExperimentId::Positive => serde_json::to_value(positive::PositiveConfig::default())?,
        ExperimentId::Census => serde_json::to_value(census::CensusConfig::default())?,
        ExperimentId::Oracle => serde_json::to_value(oracle::OracleConfig::default())?,
        ExperimentId::Lemmas => serde_json::to_value(lemmas::LemmaConfig::default())?,
        ExperimentId::Weights => serde_json::to_value(weights::WeightsConfig::default())?,
    })
}

/// Runs an experiment with defaults overridden by `overrides`.
pub fn run_experiment(id: ExperimentId, overrides: Option<&Value>) -> Result<ExperimentReport> {
    match id {
        ExperimentId::LogBeta => logbeta::run(&merge_config(logbeta::LogBetaConfig::default(), overrides)?),
        ExperimentId::Remark => remark::run(&merge_config(remark::RemarkConfig::default(), overrides)?),
        ExperimentId::Counterexample => {
            counterexample::run(&merge_config(counterexample::CounterexampleConfig::default(), overrides)?)
        }
        ExperimentId::Positive => positive::run(&merge_config(positive::PositiveConfig::default(), overrides)?),
        ExperimentId::Census => census::run(&merge_config(census::CensusConfig::default(), overrides)?),
        ExperimentId::Oracle => oracle::run(&merge_config(oracle::OracleConfig::default(), overrides)?),
        ExperimentId::Lemmas => lemmas::run(&merge_config(lemmas::LemmaConfig::default(), overrides)?),
        ExperimentId::Weights => weights::run(&merge_config(weights::WeightsConfig::default(), overrides)?),
    }
}
