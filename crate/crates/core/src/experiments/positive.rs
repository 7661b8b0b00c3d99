//! `‖M_γ f‖₁ / ‖f‖_{C_{p,l}}` over translates and dilates of a bump, with the
//! far tail bounded by integration by parts.

use serde::{Deserialize, Serialize};

use super::census::{weak_constant, Tally};
use super::{log_space, par_map, trapezoid, trapezoid_weights, ExperimentReport, Params, Row};
use crate::error::{Error, Result};
use crate::gauss::integrate_real;
use crate::maximal::{maximal_value, CaseLabel, MCut, SearchConfig};
use crate::norms::{cpl_norm, weighted_l1};
use crate::phase::Phase;
use crate::testfns::{smooth_bump, SmoothTestFn, TestFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositiveConfig {
    pub phases: Vec<Phase>,
    pub translations: Vec<f64>,
    pub dilations: Vec<f64>,
    pub height: f64,
    pub p: f64,
    pub l: f64,
    pub epsilon: f64,
    /// Defaults to `2(R + M_cut) + 8` per member.
    pub x_max: Option<f64>,
    pub points_near: usize,
    pub points_far: usize,
    pub search: SearchConfig,
}

impl Default for PositiveConfig {
    fn default() -> Self {
        Self {
            phases: vec![
                Phase::quadratic_constant(1.0).expect("valid phase"),
                Phase::curved_constant(&[(1.0, 2.5)]).expect("valid phase"),
            ],
            translations: vec![0.0, 2.0, 5.0, 10.0, 20.0],
            dilations: vec![0.5, 1.0, 2.0, 4.0],
            height: 1.0,
            p: 2.0,
            l: 1.5,
            epsilon: 0.5,
            x_max: None,
            points_near: 120,
            points_far: 60,
            search: SearchConfig { m_cut: MCut::Auto, ..SearchConfig::default() },
        }
    }
}

/// Far-field envelope of `M_γ f(x)` for `|x| - R ≥ M_cut`:
/// `[(2‖f‖∞ + ‖f'‖₁)/m + ‖f‖₁ K/m²] / (2(|x| - R))` with `m ≤ |∂_u γ|` and
/// `K ≥ |∂²_u γ|` over `|u| ∈ [|x| - R, |x| + R]`.
pub fn tail_envelope(f: &SmoothTestFn, phase: &Phase, ax: f64) -> Option<f64> {
    let r = f.support_radius();
    let (lo, hi) = (ax - r, ax + r);
    let m = phase.dt_lower_bound(lo, hi)?;
    let k = phase.dtt_upper_bound(lo, hi)?;
    if !(m > 0.0) || !(lo > 0.0) {
        return None;
    }
    let d1 = f.deriv_norm_closed(1.0)?;
    Some(((2.0 * f.sup_norm() + d1) / m + f.l1_norm() * k / (m * m)) / (2.0 * lo))
}

pub struct TailBound {
    pub value: f64,
    pub blocks: usize,
    pub ratio: f64,
    pub divergent: bool,
}

/// `2 ∫_{X}^{∞} envelope` on dyadic blocks plus a geometric remainder.
pub fn tail_bound(f: &SmoothTestFn, phase: &Phase, x_max: f64) -> Option<TailBound> {
    let env = |x: f64| tail_envelope(f, phase, x).unwrap_or(f64::INFINITY);
    let mut sum = 0.0;
    let mut prev = f64::NAN;
    let mut ratio = f64::NAN;
    let mut blocks = 0;
    for j in 0..60 {
        let a = x_max * 2f64.powi(j);
        tail_envelope(f, phase, a)?;
        let (v, _) = integrate_real(env, a, 2.0 * a, 1e-12, 40);
        if !v.is_finite() {
            return None;
        }
        ratio = v / prev;
        sum += v;
        prev = v;
        blocks += 1;
        if j >= 3 && v < 1e-14 * sum {
            break;
        }
    }
    let divergent = !(ratio < 0.9);
    let remainder = if divergent { f64::INFINITY } else { prev * ratio / (1.0 - ratio) };
    Some(TailBound { value: 2.0 * (sum + remainder), blocks, ratio, divergent })
}

struct Member {
    phase_index: usize,
    b: f64,
    s: f64,
    f: SmoothTestFn,
    x_max: f64,
    grid: Vec<f64>,
}

fn member_grid(f: &SmoothTestFn, x_max: f64, near: usize, far: usize) -> Vec<f64> {
    let (lo, hi) = f.support();
    let (el, er) = ((lo - 1.0).max(-x_max), (hi + 1.0).min(x_max));
    let mut xs: Vec<f64> = (0..near).map(|i| el + (er - el) * i as f64 / (near - 1) as f64).collect();
    xs.extend(log_space(1e-2, x_max - er, far).into_iter().map(|u| er + u));
    xs.extend(log_space(1e-2, x_max + el, far).into_iter().map(|u| el - u));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

pub fn run(cfg: &PositiveConfig) -> Result<ExperimentReport> {
    let start = std::time::Instant::now();
    cfg.search.validate()?;
    if cfg.phases.is_empty() || cfg.translations.is_empty() || cfg.dilations.is_empty() {
        return Err(Error::Config("phases, translations and dilations must be nonempty".into()));
    }
    if cfg.points_near < 2 || cfg.points_far < 2 {
        return Err(Error::Config("need points_near >= 2 and points_far >= 2".into()));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", cfg.epsilon)));
    }
    let search = SearchConfig { epsilon: cfg.epsilon, ..cfg.search };
    let mut report = ExperimentReport::new("positive", cfg)?;
    let mut cuts = Vec::new();
    for phase in &cfg.phases {
        phase.check_curvature().map_err(|e| Error::Config(e.to_string()))?;
        let m = search
            .m_cut
            .resolve(phase)
            .ok_or_else(|| Error::Config("no cutoff available for this phase; set m_cut".into()))?;
        cuts.push(m);
    }

    let mut members = Vec::new();
    let mut invalid = Vec::new();
    for (pi, m_cut) in cuts.iter().enumerate() {
        for &b in &cfg.translations {
            for &s in &cfg.dilations {
                let f = smooth_bump(b, s, cfg.height)?;
                let r = f.support_radius();
                let x_max = cfg.x_max.unwrap_or(2.0 * (r + m_cut) + 8.0);
                if x_max < r + m_cut {
                    invalid.push((pi, b, s));
                    continue;
                }
                let grid = member_grid(&f, x_max, cfg.points_near, cfg.points_far);
                members.push(Member { phase_index: pi, b, s, f, x_max, grid });
            }
        }
    }
    let tasks: Vec<(usize, f64)> =
        members.iter().enumerate().flat_map(|(i, m)| m.grid.iter().map(move |&x| (i, x))).collect();
    let fns: Vec<TestFn> = members.iter().map(|m| TestFn::from(m.f)).collect();
    let samples = par_map(&tasks, |&(i, x)| maximal_value(&fns[i], &cfg.phases[members[i].phase_index], x, &search))?;

    for (pi, b, s) in invalid {
        let p = Params::from([("phase".into(), pi as f64), ("b".into(), b), ("s".into(), s)]);
        report.push(Row::invalid("member", p, "x_max<M_cut"));
    }
    // (phase, b, s, ratio, divergent)
    let mut ratios: Vec<(usize, f64, f64, f64, bool)> = Vec::new();
    let mut cursor = 0;
    let c_w = weak_constant();
    for m in &members {
        let s = &samples[cursor..cursor + m.grid.len()];
        cursor += m.grid.len();
        let values: Vec<f64> = s.iter().map(|p| p.value).collect();
        let (integral, trap_err) = trapezoid(&m.grid, &values);
        let cells = trapezoid_weights(&m.grid);
        let quad: f64 = cells.iter().zip(s).map(|(w, p)| w * p.err).sum();
        let f = TestFn::from(m.f);
        let cpl = cpl_norm(&f, cfg.p, cfg.l)?.expect("bumps have a derivative");
        let mut p = Params::from([
            ("phase".into(), m.phase_index as f64),
            ("b".into(), m.b),
            ("s".into(), m.s),
            ("x_max".into(), m.x_max),
            ("integral".into(), integral),
            ("cpl".into(), cpl),
        ]);
        if cpl == 0.0 {
            report.push(Row::info("member", p, f64::NAN, 0.0).with_flag("trivial"));
            continue;
        }
        let tail = tail_bound(&m.f, &cfg.phases[m.phase_index], m.x_max);
        let (tail_value, divergent) = match &tail {
            Some(t) => (t.value, t.divergent),
            None => (f64::INFINITY, true),
        };
        p.insert("tail".into(), tail_value);
        let ratio = (integral + tail_value) / cpl;
        let row = Row::info("member", p, ratio, (quad + trap_err) / cpl);
        report.push(if divergent { row.with_flag("divergent") } else { row });
        ratios.push((m.phase_index, m.b, m.s, ratio, divergent));

        let tally = Tally::new(s, &cells);
        let a3 = tally.measure_of(CaseLabel::A3);
        let wl1 = weighted_l1(&f, 1.0 + cfg.epsilon)?.value;
        let p = Params::from([
            ("phase".into(), m.phase_index as f64),
            ("b".into(), m.b),
            ("s".into(), m.s),
            ("needed_constant".into(), a3 / (8.0 * wl1)),
        ]);
        report.push(Row::upper("a3_measure", p, a3, 8.0 * c_w * wl1, 0.0));
    }

    for pi in 0..cfg.phases.len() {
        let mine: Vec<_> = ratios.iter().filter(|r| r.0 == pi).collect();
        if mine.is_empty() {
            continue;
        }
        let flagged = mine.iter().filter(|r| r.4).count();
        let p = Params::from([("phase".into(), pi as f64)]);
        report.push(Row::upper("divergence", p.clone(), flagged as f64, 0.5, 0.0));
        let vals: Vec<f64> = mine.iter().map(|r| r.3).collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        report.summary.insert(format!("max_ratio_phase{pi}"), max);
        report.push(Row::upper("ratio_spread", p.clone(), max / min, 100.0, 0.0));
        let translated: Vec<f64> =
            mine.iter().filter(|r| r.2 == 1.0 && [0.0, 5.0, 20.0].contains(&r.1)).map(|r| r.3).collect();
        if translated.len() == 3 {
            let tmax = translated.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tmin = translated.iter().copied().fold(f64::INFINITY, f64::min);
            report.push(Row::upper("translation_spread", p, tmax / tmin, 10.0, 0.0));
        }
    }
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Verdict;

    #[test]
    fn envelope_decays_like_inverse_square_for_quadratic() {
        let f = smooth_bump(0.0, 1.0, 1.0).unwrap();
        let phase = Phase::quadratic_constant(1.0).unwrap();
        let a = tail_envelope(&f, &phase, 100.0).unwrap();
        let b = tail_envelope(&f, &phase, 200.0).unwrap();
        assert!((a / b - 4.0).abs() < 0.2, "{}", a / b);
        assert!(tail_envelope(&f, &phase, 0.5).is_none());
        let t = tail_bound(&f, &phase, 12.0).unwrap();
        assert!(!t.divergent && (t.ratio - 0.5).abs() < 0.05 && t.value.is_finite());
    }

    #[test]
    fn envelope_dominates_measured_values() {
        let f = smooth_bump(0.0, 1.0, 1.0).unwrap();
        let phase = Phase::curved_constant(&[(1.0, 2.5)]).unwrap();
        let cfg = SearchConfig::default();
        for x in [5.0, 12.0, 40.0] {
            let s = maximal_value(&TestFn::from(f), &phase, x, &cfg).unwrap();
            assert!(s.value <= tail_envelope(&f, &phase, x).unwrap() + s.err, "{x}");
        }
    }

    #[test]
    fn zero_height_is_trivial() {
        let cfg = PositiveConfig {
            phases: vec![Phase::quadratic_constant(1.0).unwrap()],
            translations: vec![0.0],
            dilations: vec![1.0],
            height: 0.0,
            points_near: 5,
            points_far: 3,
            ..PositiveConfig::default()
        };
        let r = run(&cfg).unwrap();
        assert_eq!(r.rows_in("member").next().unwrap().flag, "trivial");
    }

    #[test]
    fn explicit_small_x_max_is_invalid() {
        let cfg = PositiveConfig {
            phases: vec![Phase::quadratic_constant(1.0).unwrap()],
            translations: vec![0.0],
            dilations: vec![1.0],
            x_max: Some(1.5),
            ..PositiveConfig::default()
        };
        let r = run(&cfg).unwrap();
        assert_eq!(r.rows_in("member").next().unwrap().verdict, Verdict::Invalid);
    }
}
