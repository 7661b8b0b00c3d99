//! Decay of `M_γ χ_[-β,β]` under monotone-derivative phases and the
//! integrability of the resulting envelope.

use serde::{Deserialize, Serialize};

use super::{log_space, par_map, ExperimentReport, Params, Row};
use crate::error::{Error, Result};
use crate::gauss::integrate_real;
use crate::maximal::{maximal_value, MCut, SearchConfig};
use crate::oscquad::ibp_tail_bound;
use crate::phase::Phase;
use crate::testfns::{char_fn, TestFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemarkConfig {
    /// `γ(t) = t^k` for integer `k`, `|t|^k` otherwise.
    pub k_exponent: f64,
    pub beta: f64,
    /// Explicit sample points; overrides the log-spaced grid when nonempty.
    pub xs: Vec<f64>,
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_x: usize,
    pub tail_blocks: usize,
    pub search: SearchConfig,
}

impl Default for RemarkConfig {
    fn default() -> Self {
        Self {
            k_exponent: 2.0,
            beta: 0.5,
            xs: Vec::new(),
            x_lo: 2.0,
            x_hi: 100.0,
            n_x: 30,
            tail_blocks: 24,
            search: SearchConfig { m_cut: MCut::Value(1.0), ..SearchConfig::default() },
        }
    }
}

pub fn remark_phase(k: f64) -> Result<Phase> {
    if !(k > 1.0) || !k.is_finite() {
        return Err(Error::Config(format!("k_exponent must exceed 1, got {k}")));
    }
    if k.fract() == 0.0 && k <= 64.0 {
        Phase::laurent(&[(k as i32, 1.0)])
    } else {
        Phase::curved_constant(&[(1.0, k)])
    }
}

/// `2 / ((x - β) |γ'(x - β)|)`.
pub fn remark_bound(phase: &Phase, beta: f64, x: f64) -> Result<f64> {
    let u = x - beta;
    Ok(2.0 / (u * phase.dt(0.0, u)?.abs()))
}

pub fn run(cfg: &RemarkConfig) -> Result<ExperimentReport> {
    let start = std::time::Instant::now();
    cfg.search.validate()?;
    if !(cfg.beta > 0.0) {
        return Err(Error::Config("beta must be positive".into()));
    }
    let phase = remark_phase(cfg.k_exponent)?;
    let xs = if cfg.xs.is_empty() {
        if !(cfg.x_hi > cfg.x_lo && cfg.x_lo > 0.0) || cfg.n_x == 0 {
            return Err(Error::Config("need 0 < x_lo < x_hi and n_x >= 1".into()));
        }
        log_space(cfg.x_lo, cfg.x_hi, cfg.n_x)
    } else {
        cfg.xs.clone()
    };
    let mut report = ExperimentReport::new("remark", cfg)?;
    let f = TestFn::from(char_fn(cfg.beta)?);

    let valid: Vec<f64> = xs.iter().copied().filter(|&x| x > cfg.beta).collect();
    let x_max = valid.iter().copied().fold(0.0, f64::max);
    let condition = if valid.is_empty() {
        Ok(())
    } else {
        let x_min = valid.iter().copied().fold(f64::INFINITY, f64::min);
        ibp_tail_bound(&phase, x_min - cfg.beta, x_max + cfg.beta).map(|_| ())
    };
    let samples = match condition {
        Ok(()) => par_map(&valid, |&x| maximal_value(&f, &phase, x, &cfg.search))?,
        Err(_) => Vec::new(),
    };

    let k = cfg.k_exponent;
    let mut it = samples.iter();
    for &x in &xs {
        let p = Params::from([("x".into(), x)]);
        if x <= cfg.beta {
            report.push(Row::invalid("pointwise", p, "x<=beta"));
            continue;
        }
        let Some(s) = it.next() else {
            report.push(Row::invalid("pointwise", p, "condition"));
            continue;
        };
        let mut p = p;
        p.insert("scaled".into(), s.value * x.powf(k));
        report.push(Row::upper("pointwise", p, s.value, remark_bound(&phase, cfg.beta, x)?, s.err));
    }

    // Dyadic blocks of ∫ 2/((x-β)|γ'(x-β)|) starting above 2β.
    let j0 = (2.0 * cfg.beta).log2().ceil().max(1.0) as i32;
    let mut partial = 0.0;
    let mut blocks = Vec::new();
    for j in j0..j0 + cfg.tail_blocks as i32 {
        let (a, b) = (2f64.powi(j), 2f64.powi(j + 1));
        let g = |x: f64| remark_bound(&phase, cfg.beta, x).unwrap_or(f64::INFINITY);
        let (v, e) = integrate_real(g, a, b, 1e-12, 40);
        partial += v;
        blocks.push(v);
        let p = Params::from([("j".into(), j as f64), ("partial_sum".into(), partial)]);
        report.push(Row::info("tail_block", p, v, e));
    }
    if blocks.len() >= 2 {
        let n = blocks.len();
        let ratio = blocks[n - 1] / blocks[n - 2];
        report.push(Row::upper("tail_ratio", Params::new(), ratio, 0.9, 0.0));
        report.summary.insert("tail_partial_sum".into(), partial);
    }
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Verdict;

    #[test]
    fn bound_substitution() {
        let phase = remark_phase(2.0).unwrap();
        let b = remark_bound(&phase, 0.5, 10.0).unwrap();
        assert!((b - 2.0 / (9.5 * 19.0)).abs() < 1e-15);
        assert!((b - 0.01108).abs() < 1e-5);
    }

    #[test]
    fn invalid_points_are_flagged() {
        let cfg = RemarkConfig { xs: vec![0.25, 10.0], ..RemarkConfig::default() };
        let r = run(&cfg).unwrap();
        let rows: Vec<_> = r.rows_in("pointwise").collect();
        assert_eq!(rows[0].verdict, Verdict::Invalid);
        assert_eq!(rows[0].flag, "x<=beta");
        assert_eq!(rows[1].verdict, Verdict::Pass);
        assert_eq!(r.rows_in("tail_ratio").next().unwrap().verdict, Verdict::Pass);
    }

    #[test]
    fn scaled_values_stay_bounded() {
        let cfg = RemarkConfig { n_x: 6, x_lo: 10.0, x_hi: 100.0, ..RemarkConfig::default() };
        let r = run(&cfg).unwrap();
        let scaled: Vec<f64> = r.rows_in("pointwise").map(|row| row.params["scaled"]).collect();
        // bound · x² → 1 as x → ∞
        assert!(scaled.iter().all(|s| *s < 1.5), "{scaled:?}");
    }
}
