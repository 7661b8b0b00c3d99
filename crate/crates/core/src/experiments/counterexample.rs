//! Window mass of `M_γ g_K` for the truncated counterexample series, tracked
//! against the divergent and the atomic comparators.

use serde::{Deserialize, Serialize};

use super::logbeta::{window_constant, window_end};
use super::{log_space, par_map, trapezoid, trapezoid_weights, ExperimentReport, Params, Row};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::maximal::{maximal_value, MCut, SearchConfig};
use crate::phase::{Coeff, Phase};
use crate::testfns::{counterexample_part1, counterexample_part2, CounterexampleSpec, CounterexampleVariant, TestFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub variant: CounterexampleVariant,
    pub ks: Vec<usize>,
    pub points_per_window: usize,
    /// Defaults to `cos(x)·0.05t²` for part 1 and `0.01t²` for part 2.
    pub phase: Option<Phase>,
    /// Part 1 only; estimated from the phase when absent.
    pub delta: Option<f64>,
    pub search: SearchConfig,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            variant: CounterexampleVariant::Part1,
            ks: vec![10, 50, 100],
            points_per_window: 24,
            phase: None,
            delta: None,
            search: SearchConfig { m_cut: MCut::Value(1.0), ..SearchConfig::default() },
        }
    }
}

pub fn default_phase(variant: CounterexampleVariant) -> Phase {
    match variant {
        CounterexampleVariant::Part1 => Phase::separable(
            Coeff::new(Expr::parse("cos(x)").expect("valid expression"), 1.0, None).expect("valid coefficient"),
            Expr::parse("0.05*t^2").expect("valid expression"),
        ),
        CounterexampleVariant::Part2 => Phase::laurent(&[(2, 0.01)]).expect("valid phase"),
    }
}

/// Largest `δ` on a `10⁻⁴` grid with `‖α‖∞ |β(t) - β(0)| ≤ 1/10` for `|t| ≤ δ`.
pub fn estimate_delta(phase: &Phase) -> Result<f64> {
    let Phase::Separable { alpha, beta } = phase else {
        return Err(Error::Config("part 1 needs a separable phase".into()));
    };
    let step = 1e-4;
    let b0 = beta.eval(0.0);
    let ok = |t: f64| alpha.sup * (beta.eval(t) - b0).abs() <= 0.1;
    let mut i = 0u32;
    while i < 200_000 && ok((i + 1) as f64 * step) && ok(-((i + 1) as f64) * step) {
        i += 1;
    }
    if i == 0 {
        return Err(Error::Config("phase varies by more than 1/10 at every scale".into()));
    }
    Ok(i as f64 * step)
}

/// `Σ_{k≤K} 1/(k log(k+1))`.
pub fn divergent_comparator(k_max: usize) -> f64 {
    (1..=k_max).map(|k| 1.0 / (k as f64 * ((k + 1) as f64).ln())).sum()
}

/// `Σ_{k≤K} 1/(k log²(k+1))`.
pub fn atomic_comparator(k_max: usize) -> f64 {
    (1..=k_max).map(|k| 1.0 / (k as f64 * ((k + 1) as f64).ln().powi(2))).sum()
}

struct Window {
    k_max: usize,
    index: usize,
    center: f64,
    /// Distances from the center spanned by the window.
    lo: f64,
    hi: f64,
    clipped: bool,
    predicted: f64,
}

fn part1_windows(spec: &CounterexampleSpec, delta: f64) -> Vec<std::result::Result<Window, usize>> {
    let terms = &spec.terms;
    terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut hi = delta;
            let mut clipped = false;
            if let Some(next) = terms.get(i + 1) {
                let room = next.center - next.half_width - t.center;
                if room < hi {
                    hi = room;
                    clipped = true;
                }
            }
            let lo = t.half_width;
            if hi <= lo {
                return Err(t.index);
            }
            let predicted = lo / 10.0 * (hi / lo).ln();
            Ok(Window { k_max: spec.count, index: t.index, center: t.center, lo, hi, clipped, predicted })
        })
        .collect()
}

fn part2_windows(spec: &CounterexampleSpec, phase: &Phase) -> Result<Vec<std::result::Result<Window, usize>>> {
    let (d, c) = window_constant(phase)?;
    let terms = &spec.terms;
    Ok(terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let lo = 1.0 + t.half_width;
            let mut hi = window_end(d, c, t.half_width);
            let mut clipped = false;
            if let Some(next) = terms.get(i + 1) {
                let mid = 0.5 * (next.center - t.center);
                if mid < hi {
                    hi = mid;
                    clipped = true;
                }
            }
            if hi <= lo {
                return Err(t.index);
            }
            let predicted = t.h1_coeff / 8.0 * (hi / lo).ln();
            Ok(Window { k_max: spec.count, index: t.index, center: t.center, lo, hi, clipped, predicted })
        })
        .collect())
}

pub fn run(cfg: &CounterexampleConfig) -> Result<ExperimentReport> {
    let start = std::time::Instant::now();
    cfg.search.validate()?;
    if cfg.ks.is_empty() || cfg.points_per_window < 3 {
        return Err(Error::Config("need nonempty ks and points_per_window >= 3".into()));
    }
    let limit = match cfg.variant {
        CounterexampleVariant::Part1 => 200,
        CounterexampleVariant::Part2 => 4,
    };
    if cfg.ks.iter().any(|&k| k == 0 || k > limit) || cfg.ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("ks must be strictly increasing within 1..={limit}")));
    }
    let phase = cfg.phase.clone().unwrap_or_else(|| default_phase(cfg.variant));
    let mut report = ExperimentReport::new("counterexample", cfg)?;

    let delta = match cfg.variant {
        CounterexampleVariant::Part1 => {
            let d = match cfg.delta {
                Some(d) if d > 0.0 => d,
                Some(d) => return Err(Error::Config(format!("delta must be positive, got {d}"))),
                None => estimate_delta(&phase)?,
            };
            report.summary.insert("delta".into(), d);
            d
        }
        CounterexampleVariant::Part2 => f64::NAN,
    };

    let mut fns = Vec::new();
    let mut windows = Vec::new();
    for &k in &cfg.ks {
        let (f, spec) = match cfg.variant {
            CounterexampleVariant::Part1 => counterexample_part1(k)?,
            CounterexampleVariant::Part2 => counterexample_part2(k)?,
        };
        report.summary.insert(format!("overlaps_K{k}"), spec.overlaps.len() as f64);
        let ws = match cfg.variant {
            CounterexampleVariant::Part1 => part1_windows(&spec, delta),
            CounterexampleVariant::Part2 => part2_windows(&spec, &phase)?,
        };
        windows.push(ws);
        fns.push(TestFn::from(f));
    }

    let n = cfg.points_per_window;
    let tasks: Vec<(usize, f64)> = windows
        .iter()
        .enumerate()
        .flat_map(|(ki, ws)| {
            ws.iter().flatten().flat_map(move |w| log_space(w.lo, w.hi, n).into_iter().map(move |d| (ki, w.center + d)))
        })
        .collect();
    let samples = par_map(&tasks, |&(ki, x)| maximal_value(&fns[ki], &phase, x, &cfg.search))?;

    let mut cursor = 0;
    let mut totals = Vec::new();
    for (ki, ws) in windows.iter().enumerate() {
        let k_max = cfg.ks[ki];
        let (mut mass, mut mass_err, mut predicted) = (0.0, 0.0, 0.0);
        for w in ws {
            let w = match w {
                Ok(w) => w,
                Err(index) => {
                    let p = Params::from([("K".into(), k_max as f64), ("k".into(), *index as f64)]);
                    report.push(Row::invalid("window", p, "empty_window"));
                    continue;
                }
            };
            let s = &samples[cursor..cursor + n];
            cursor += n;
            let dists: Vec<f64> = s.iter().map(|p| p.x - w.center).collect();
            let ld: Vec<f64> = dists.iter().map(|d| d.ln()).collect();
            let integrand: Vec<f64> = s.iter().zip(&dists).map(|(p, d)| p.value * d).collect();
            let (m, trap_err) = trapezoid(&ld, &integrand);
            let quad: f64 = trapezoid_weights(&ld).iter().zip(s.iter().zip(&dists)).map(|(wt, (p, d))| wt * p.err * d).sum();
            let p = Params::from([
                ("K".into(), w.k_max as f64),
                ("k".into(), w.index as f64),
                ("x_lo".into(), w.center + w.lo),
                ("x_hi".into(), w.center + w.hi),
            ]);
            let row = Row::lower("window", p, m, w.predicted, quad + trap_err);
            report.push(if w.clipped { row.with_flag("clipped") } else { row });
            mass += m;
            mass_err += quad + trap_err;
            predicted += w.predicted;
        }
        let (div, h1) = match cfg.variant {
            CounterexampleVariant::Part1 => (divergent_comparator(k_max), atomic_comparator(k_max)),
            CounterexampleVariant::Part2 => {
                let b: Vec<f64> = (1..=k_max).map(crate::testfns::part2_beta).collect();
                (b.iter().map(|b| b * b.ln().abs()).sum(), b.iter().sum())
            }
        };
        let p = Params::from([
            ("K".into(), k_max as f64),
            ("divergent_comparator".into(), div),
            ("atomic_comparator".into(), h1),
            ("ratio".into(), mass / div),
        ]);
        report.push(Row::lower("total", p, mass, predicted, mass_err));
        totals.push((k_max, mass, mass_err, mass / div, h1));
    }

    for w in totals.windows(2) {
        let p = Params::from([("K".into(), w[1].0 as f64)]);
        report.push(Row::lower("growth", p, w[1].1 - w[0].1, 0.0, w[0].2 + w[1].2));
    }
    let ratios: Vec<f64> = totals.iter().map(|t| t.3).collect();
    if ratios.len() >= 2 {
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        report.summary.insert("ratio_min".into(), min);
        report.summary.insert("ratio_max".into(), max);
        report.push(Row::upper("ratio_spread", Params::new(), max / min, 20.0, 0.0));
    }
    if cfg.variant == CounterexampleVariant::Part1 {
        let k0 = cfg.ks[0].max(2);
        let cap = atomic_comparator(k0) + 1.0 / (k0 as f64).ln();
        for t in &totals {
            report.push(Row::upper("atomic_bound", Params::from([("K".into(), t.0 as f64)]), t.4, cap, 0.0));
        }
    }
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
