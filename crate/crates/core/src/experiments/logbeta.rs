//! Growth of `‖M_γ f_β‖₁` over the window `[1+β, X(β)]` against `log(1/β)`.

use serde::{Deserialize, Serialize};

use super::{fit_line, log_space, par_map, trapezoid, trapezoid_weights, ExperimentReport, Params, Row};
use crate::error::{Error, Result};
use crate::maximal::{maximal_value, MCut, SearchConfig};
use crate::phase::Phase;
use crate::testfns::{atom_fbeta, TestFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogBetaConfig {
    pub phase: Phase,
    pub betas: Vec<f64>,
    /// Pointwise check rows per β.
    pub samples: usize,
    /// Window grid points between consecutive pointwise samples.
    pub refine: usize,
    pub search: SearchConfig,
}

impl Default for LogBetaConfig {
    fn default() -> Self {
        Self {
            phase: Phase::laurent(&[(3, 1.0)]).expect("t^3 is a valid phase"),
            betas: [-2.0, -2.5, -3.0, -3.5, -4.0, -4.5, -5.0].iter().map(|e| 10f64.powf(*e)).collect(),
            samples: 20,
            refine: 4,
            search: SearchConfig { m_cut: MCut::Value(1.0), ..SearchConfig::default() },
        }
    }
}

/// `(d, c)` with `c = 2d · max_j ‖c_j‖∞`.
pub fn window_constant(phase: &Phase) -> Result<(u32, f64)> {
    match phase {
        Phase::Laurent { degree, coeffs } if *degree >= 2 => {
            let max_sup = coeffs.iter().map(|c| c.sup).fold(0.0, f64::max);
            Ok((*degree, 2.0 * *degree as f64 * max_sup))
        }
        _ => Err(Error::Config("logbeta needs a laurent phase of degree >= 2".into())),
    }
}

/// `X(β) = (1/(2cβ))^{1/(d-1)}`.
pub fn window_end(d: u32, c: f64, beta: f64) -> f64 {
    (1.0 / (2.0 * c * beta)).powf(1.0 / (d as f64 - 1.0))
}

impl LogBetaConfig {
    fn validate(&self) -> Result<()> {
        self.search.validate()?;
        if self.betas.is_empty() {
            return Err(Error::Config("betas must be nonempty".into()));
        }
        if self.betas.iter().any(|b| !(1e-5..=1e-1).contains(b)) {
            return Err(Error::Config("betas must lie in [1e-5, 1e-1]".into()));
        }
        if self.betas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("betas must be strictly decreasing".into()));
        }
        if self.samples < 2 || self.refine == 0 {
            return Err(Error::Config("need samples >= 2 and refine >= 1".into()));
        }
        Ok(())
    }
}

struct Window {
    beta: f64,
    grid: Vec<f64>,
}

pub fn run(cfg: &LogBetaConfig) -> Result<ExperimentReport> {
    let start = std::time::Instant::now();
    cfg.validate()?;
    let (d, c) = window_constant(&cfg.phase)?;
    let mut report = ExperimentReport::new("logbeta", cfg)?;
    report.summary.insert("c".into(), c);
    report.summary.insert("d".into(), d as f64);

    let n = cfg.refine * (cfg.samples - 1) + 1;
    let mut windows = Vec::new();
    for &beta in &cfg.betas {
        let x_end = window_end(d, c, beta);
        if x_end <= 1.0 + beta {
            report.push(Row::invalid("window", Params::from([("beta".into(), beta)]), "empty_window"));
            continue;
        }
        windows.push(Window { beta, grid: log_space(1.0 + beta, x_end, n) });
    }

    let tasks: Vec<(usize, f64)> =
        windows.iter().enumerate().flat_map(|(i, w)| w.grid.iter().map(move |&x| (i, x))).collect();
    let fns: Vec<TestFn> = windows.iter().map(|w| atom_fbeta(w.beta).map(TestFn::from)).collect::<Result<_>>()?;
    let samples = par_map(&tasks, |&(i, x)| maximal_value(&fns[i], &cfg.phase, x, &cfg.search))?;

    let (mut logs, mut masses) = (Vec::new(), Vec::new());
    for (wi, w) in windows.iter().enumerate() {
        let s = &samples[wi * n..(wi + 1) * n];
        for (j, sample) in s.iter().enumerate().step_by(cfg.refine) {
            let p = Params::from([("beta".into(), w.beta), ("x".into(), sample.x), ("index".into(), j as f64)]);
            report.push(Row::lower("pointwise", p, sample.value, 1.0 / (8.0 * sample.x), sample.err));
        }
        // ∫ M dx = ∫ M·x d(ln x)
        let lx: Vec<f64> = w.grid.iter().map(|x| x.ln()).collect();
        let integrand: Vec<f64> = s.iter().map(|p| p.value * p.x).collect();
        let (mass, trap_err) = trapezoid(&lx, &integrand);
        let weights = trapezoid_weights(&lx);
        let quad: f64 = weights.iter().zip(s).map(|(wt, p)| wt * p.x * p.err).sum();
        let x_end = *w.grid.last().unwrap();
        let predicted = (x_end / (1.0 + w.beta)).ln() / 8.0;
        let p = Params::from([("beta".into(), w.beta), ("x_end".into(), x_end)]);
        report.push(Row::lower("window", p, mass, predicted, quad + trap_err));
        logs.push((1.0 / w.beta).ln());
        masses.push(mass);
    }

    if logs.len() >= 2 {
        let fit = fit_line(&logs, &masses);
        report.fit = Some(fit);
        let span = (cfg.betas[0] / cfg.betas[cfg.betas.len() - 1]).log10();
        let p = Params::from([("decades".into(), span)]);
        report.push(Row::lower("fit_slope", p.clone(), fit.slope, 0.0, 0.0));
        report.push(Row::lower("fit_r2", p, fit.r2, 0.99, 0.0));
        let increasing = masses.windows(2).filter(|m| m[1] > m[0]).count();
        let steps = masses.windows(2).count();
        report.push(Row::lower("monotone", Params::new(), increasing as f64, steps as f64 - 0.5, 0.0));
    }
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_end_matches_substitution() {
        let (d, c) = window_constant(&Phase::laurent(&[(3, 1.0)]).unwrap()).unwrap();
        assert_eq!((d, c), (3, 6.0));
        assert!((window_end(d, c, 1e-3) - (1.0f64 / 0.012).sqrt()).abs() < 1e-12);
        assert!((window_end(d, c, 1e-3) - 9.13).abs() < 5e-3);
    }

    #[test]
    fn rejects_bad_betas() {
        let bad = LogBetaConfig { betas: vec![1e-3, 1e-2], ..LogBetaConfig::default() };
        assert!(run(&bad).is_err());
        let bad = LogBetaConfig { betas: vec![0.5], ..LogBetaConfig::default() };
        assert!(run(&bad).is_err());
        let bad = LogBetaConfig { phase: Phase::quadratic_constant(1.0).unwrap(), ..LogBetaConfig::default() };
        assert!(run(&bad).is_err());
    }

    #[test]
    fn small_run_passes_pointwise() {
        let cfg = LogBetaConfig { betas: vec![1e-2, 1e-3], samples: 4, refine: 2, ..LogBetaConfig::default() };
        let r = run(&cfg).unwrap();
        assert_eq!(r.rows_in("pointwise").count(), 8);
        assert!(r.rows_in("pointwise").all(|row| row.verdict == super::super::Verdict::Pass));
        let w: Vec<f64> = r.rows_in("window").map(|row| row.measured).collect();
        assert!(w[1] > w[0]);
    }
}
