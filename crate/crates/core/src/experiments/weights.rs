//! Admissibility probes for weights: linear lower bound, doubling and tail
//! integrability of `1/φ`.

use serde::{Deserialize, Serialize};

use super::{par_map, ExperimentReport, Params, Row};
use crate::error::{Error, Result};
use crate::norms::{weight_admissibility, Weight, WeightGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightCase {
    pub weight: Weight,
    /// Expected overall outcome; `None` reports without checking.
    pub expect_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub cases: Vec<WeightCase>,
    pub r_probe: f64,
    pub grid: WeightGrid,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            cases: vec![
                WeightCase { weight: Weight::Psi { m: 2.0 }, expect_pass: Some(true) },
                WeightCase { weight: Weight::Psi { m: 1.0 }, expect_pass: Some(false) },
                WeightCase { weight: Weight::Power { exponent: 1.5 }, expect_pass: Some(true) },
            ],
            r_probe: 1e6,
            grid: WeightGrid::default(),
        }
    }
}

fn flag(ok: bool) -> f64 {
    if ok {
        1.0
    } else {
        0.0
    }
}

pub fn run(cfg: &WeightsConfig) -> Result<ExperimentReport> {
    let start = std::time::Instant::now();
    if cfg.cases.is_empty() {
        return Err(Error::Config("need at least one weight".into()));
    }
    let mut report = ExperimentReport::new("weights", cfg)?;
    let results = par_map(&cfg.cases, |c| weight_admissibility(&c.weight, cfg.r_probe, &cfg.grid))?;
    for (i, (case, w)) in cfg.cases.iter().zip(&results).enumerate() {
        let base = Params::from([("weight".into(), i as f64), ("r_probe".into(), w.r_probe)]);
        let with = |k: &str, v: f64| {
            let mut p = base.clone();
            p.insert(k.into(), v);
            p
        };
        let name = w.weight.as_str();
        report.push(Row::info("lower", with("witness", w.lower_ratio_witness), w.lower_ratio_min, 0.0).with_flag(name));
        report.push(Row::info("doubling", with("witness", w.doubling_witness), w.doubling_constant, 0.0).with_flag(name));
        report.push(
            Row::info("tail", with("block_exponent", w.tail_block_exponent), w.tail_block_ratio, 0.0)
                .with_flag(name)
                .with_flag(if w.tail_convergent { "convergent" } else { "divergent" }),
        );
        let mut partial = 0.0;
        for (j, b) in w.tail_blocks.iter().enumerate() {
            partial += b;
            let mut p = with("j", j as f64);
            p.insert("partial_sum".into(), partial);
            report.push(Row::info("tail_block", p, *b, 0.0).with_flag(name));
        }
        let row = match case.expect_pass {
            Some(true) => Row::lower("admissible", base.clone(), flag(w.pass), 0.5, 0.0),
            Some(false) => Row::upper("admissible", base.clone(), flag(w.pass), 0.5, 0.0),
            None => Row::info("admissible", base.clone(), flag(w.pass), 0.0),
        };
        report.push(row.with_flag(name));
    }
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
