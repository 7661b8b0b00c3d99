//! `M_γ f(x) = sup_r |(1/2r) ∫_{x-r}^{x+r} f(t) e^{iγ(x, x-t)} dt|`, the half-value
//! radius `r(x)` and the case split `A1`–`A4`.
//!
//! The sup is approximated on a logarithmic radius grid that also contains
//! every radius at which `x ± r` crosses a structural point of `f`. Local
//! maxima are refined by golden-section search, then a branch-and-bound pass
//! bounds `|average|` between evaluated radii; the remaining gap between the
//! largest bound and the best value found goes into `err`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oscquad::{PrimitiveTable, DEFAULT_TOL};
use crate::phase::Phase;
use crate::testfns::TestFn;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MCut {
    Auto,
    Value(f64),
}

impl Serialize for MCut {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MCut::Auto => s.serialize_str("auto"),
            MCut::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for MCut {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) if s == "auto" => Ok(MCut::Auto),
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(MCut::Value)
                .ok_or_else(|| serde::de::Error::custom("m_cut is not a finite number")),
            other => Err(serde::de::Error::custom(format!("m_cut must be \"auto\" or a number, got {other}"))),
        }
    }
}

impl MCut {
    /// Numeric cutoff for `phase`, or `None` when no automatic rule applies.
    pub fn resolve(&self, phase: &Phase) -> Option<f64> {
        match self {
            MCut::Value(v) => Some(*v),
            MCut::Auto => phase.auto_cutoff(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub r_min_scale: f64,
    pub points_per_decade: usize,
    pub refine_top_k: usize,
    pub quad_tol: f64,
    pub epsilon: f64,
    pub m_cut: MCut,
    /// Fraction of the maximal value defining `r(x)`.
    pub half_factor: f64,
    pub gap_rtol: f64,
    pub gap_atol: f64,
    /// Budget for branch-and-bound evaluations.
    pub max_evals: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            r_min_scale: 1e-4,
            points_per_decade: 64,
            refine_top_k: 5,
            quad_tol: DEFAULT_TOL,
            epsilon: 0.5,
            m_cut: MCut::Auto,
            half_factor: 0.5,
            gap_rtol: 1e-2,
            gap_atol: 1e-12,
            max_evals: 20_000,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.r_min_scale > 0.0 && self.r_min_scale < 1.0) {
            return bad(format!("r_min_scale must lie in (0, 1), got {}", self.r_min_scale));
        }
        if self.points_per_decade < 4 {
            return bad(format!("points_per_decade must be >= 4, got {}", self.points_per_decade));
        }
        if !(self.quad_tol > 0.0) {
            return bad(format!("quad_tol must be positive, got {}", self.quad_tol));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.half_factor > 0.0 && self.half_factor <= 1.0) {
            return bad(format!("half_factor must lie in (0, 1], got {}", self.half_factor));
        }
        if !(self.gap_rtol >= 0.0 && self.gap_atol >= 0.0) {
            return bad("gap tolerances must be nonnegative".into());
        }
        if let MCut::Value(m) = self.m_cut {
            if !(m >= 1.0) || !m.is_finite() {
                return bad(format!("m_cut must be >= 1, got {m}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    A1,
    A2,
    A3,
    #[serde(rename = "A4_1")]
    A41,
    #[serde(rename = "A4_2")]
    A42,
    #[serde(rename = "unclassified")]
    Unclassified,
}

impl CaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseLabel::A1 => "A1",
            CaseLabel::A2 => "A2",
            CaseLabel::A3 => "A3",
            CaseLabel::A41 => "A4_1",
            CaseLabel::A42 => "A4_2",
            CaseLabel::Unclassified => "unclassified",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximalSample {
    pub x: f64,
    pub value: f64,
    pub r_star: f64,
    pub r_half: f64,
    /// `quad_err + gap`.
    pub err: f64,
    pub quad_err: f64,
    pub gap: f64,
    pub case_label: CaseLabel,
    /// Set when the case decision was within `err` of a threshold.
    pub tie: bool,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Eval {
    r: f64,
    /// `|average|`
    avg: f64,
    /// Error of the average.
    err: f64,
}

impl Eval {
    fn integral(&self) -> f64 {
        self.avg * 2.0 * self.r
    }
    fn integral_err(&self) -> f64 {
        self.err * 2.0 * self.r
    }
}

struct Candidate {
    ub: f64,
    lo: Eval,
    hi: Eval,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ub.total_cmp(&other.ub).then(other.lo.r.total_cmp(&self.lo.r))
    }
}

struct Search<'a> {
    f: &'a TestFn,
    phase: &'a Phase,
    x: f64,
    table: PrimitiveTable<'a>,
    evals: Vec<Eval>,
    /// Zero phase on a step function: `|average|` is monotone between structural radii.
    monotone: bool,
    grid: Vec<f64>,
}

const GOLDEN_ITERS: usize = 40;
const BISECT_ITERS: usize = 60;

impl<'a> Search<'a> {
    fn new(f: &'a TestFn, phase: &'a Phase, x: f64, cfg: &SearchConfig) -> Result<Self> {
        let (lo, hi) = f.support();
        let table = PrimitiveTable::build(f, phase, x, lo, hi, cfg.quad_tol)?;
        let dist = if x < lo {
            lo - x
        } else if x > hi {
            x - hi
        } else {
            0.0
        };
        let r_min = cfg.r_min_scale * (1.0 + dist);
        let r_max = 2.0 * (x.abs() + f.support_radius());
        let decades = (r_max / r_min).log10();
        let n = (decades * cfg.points_per_decade as f64).ceil().max(1.0) as usize;
        let mut grid: Vec<f64> = (0..=n).map(|i| r_min * (r_max / r_min).powf(i as f64 / n as f64)).collect();
        grid.extend(
            f.structural_points()
                .into_iter()
                .map(|b| (x - b).abs())
                .filter(|&r| r > 0.0 && r <= r_max),
        );
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
        Ok(Self {
            f,
            phase,
            x,
            table,
            evals: Vec::new(),
            monotone: phase.is_zero() && f.is_step(),
            grid,
        })
    }

    fn eval(&mut self, r: f64) -> Eval {
        let (v, e) = self.table.average(r);
        let ev = Eval { r, avg: v.norm(), err: e };
        self.evals.push(ev);
        ev
    }

    fn eval_grid(&mut self) -> Vec<Eval> {
        let grid = std::mem::take(&mut self.grid);
        let out = grid.iter().map(|&r| self.eval(r)).collect();
        self.grid = grid;
        out
    }

    fn golden(&mut self, mut a: f64, mut b: f64) {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = self.eval(c).avg;
        let mut fd = self.eval(d).avg;
        for _ in 0..GOLDEN_ITERS {
            if b - a <= 1e-13 * b {
                break;
            }
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = self.eval(c).avg;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = self.eval(d).avg;
            }
        }
    }

    /// Upper bound for `|average|` on `[lo.r, hi.r]`.
    fn interval_bound(&self, lo: &Eval, hi: &Eval) -> f64 {
        if self.monotone {
            return (lo.avg + lo.err).max(hi.avg + hi.err);
        }
        let (r0, r1) = (lo.r, hi.r);
        let x = self.x;
        let (i0, i1) = (lo.integral() + lo.integral_err(), hi.integral() + hi.integral_err());
        let mass = self.f.abs_mass(x + r0, x + r1) + self.f.abs_mass(x - r1, x - r0);
        let swept = (i0 + i1 + mass) / (4.0 * r0);
        let curvature = self.phase.dt_abs_bound(x, r0, r1).map(|g| {
            let amp = self.f.sup_abs_on(x + r0, x + r1) + self.f.sup_abs_on(x - r1, x - r0);
            let slope = self.f.deriv_sup_on(x + r0, x + r1) + self.f.deriv_sup_on(x - r1, x - r0);
            let k2 = slope + amp * g;
            let h = r1 - r0;
            (i0.max(i1) + k2 * h * h / 8.0) / (2.0 * r0)
        });
        match curvature {
            Some(c) if c.is_finite() => swept.min(c),
            _ => swept,
        }
    }

    /// Bound on `(0, r_first]`.
    fn origin_bound(&self, first: &Eval) -> f64 {
        if self.monotone {
            return first.avg + first.err;
        }
        self.f.sup_abs_on(self.x - first.r, self.x + first.r)
    }

    fn branch_and_bound(&mut self, cfg: &SearchConfig) -> f64 {
        let mut pts = self.evals.clone();
        pts.sort_by(|a, b| a.r.total_cmp(&b.r));
        pts.dedup_by(|a, b| a.r == b.r);
        let mut best = pts.iter().fold(0.0f64, |m, e| m.max(e.avg));
        let origin = self.origin_bound(&pts[0]);
        let mut heap: BinaryHeap<Candidate> = pts
            .windows(2)
            .map(|w| Candidate { ub: self.interval_bound(&w[0], &w[1]), lo: w[0], hi: w[1] })
            .collect();
        let mut used = 0usize;
        while let Some(top) = heap.peek() {
            let slack = cfg.gap_rtol * best + cfg.gap_atol + 2.0 * top.lo.err.max(top.hi.err);
            if top.ub <= best + slack || used >= cfg.max_evals {
                break;
            }
            let top = heap.pop().unwrap();
            let mid = 0.5 * (top.lo.r + top.hi.r);
            if !(top.lo.r < mid && mid < top.hi.r) || top.hi.r - top.lo.r <= 1e-13 * top.hi.r {
                // unsplittable; keep its bound as the final gap witness
                heap.push(Candidate { ub: top.ub, lo: top.lo, hi: top.hi });
                break;
            }
            let m = self.eval(mid);
            used += 1;
            best = best.max(m.avg);
            heap.push(Candidate { ub: self.interval_bound(&top.lo, &m), lo: top.lo, hi: m });
            heap.push(Candidate { ub: self.interval_bound(&m, &top.hi), lo: m, hi: top.hi });
        }
        let max_ub = heap.peek().map_or(0.0, |c| c.ub).max(origin);
        (max_ub - best).max(0.0)
    }

    fn sorted_evals(&self) -> Vec<Eval> {
        let mut pts = self.evals.clone();
        pts.sort_by(|a, b| a.r.total_cmp(&b.r));
        pts
    }

    /// Smallest evaluated radius reaching `threshold`, refined by bisection
    /// against its predecessor.
    fn half_radius(&mut self, threshold: f64) -> f64 {
        let pts = self.sorted_evals();
        let Some(i) = pts.iter().position(|e| e.avg >= threshold) else {
            return pts.last().map_or(0.0, |e| e.r);
        };
        if i == 0 {
            return pts[0].r;
        }
        let (mut lo, mut hi) = (pts[i - 1].r, pts[i].r);
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if !(lo < mid && mid < hi) {
                break;
            }
            let (v, _) = self.table.average(mid);
            if v.norm() >= threshold {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

fn validate_x(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("x must be finite, got {x}")))
    }
}

/// Approximates `M_γ f(x)` with a propagated error bound.
pub fn maximal_value(f: &TestFn, phase: &Phase, x: f64, cfg: &SearchConfig) -> Result<MaximalSample> {
    cfg.validate()?;
    validate_x(x)?;
    if f.pieces().is_empty() {
        let r = cfg.r_min_scale;
        return Ok(MaximalSample {
            x,
            value: 0.0,
            r_star: r,
            r_half: r,
            err: 0.0,
            quad_err: 0.0,
            gap: 0.0,
            case_label: classify_with(cfg, phase, x, 0.0, r, 0.0)?.0,
            tie: false,
            evals: 0,
        });
    }
    let mut s = Search::new(f, phase, x, cfg)?;
    let grid = s.eval_grid();
    let mut local: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let left = i == 0 || grid[i - 1].avg <= grid[i].avg;
            let right = i + 1 == grid.len() || grid[i + 1].avg <= grid[i].avg;
            left && right && grid[i].avg > 0.0
        })
        .collect();
    local.sort_by(|&a, &b| grid[b].avg.total_cmp(&grid[a].avg).then(a.cmp(&b)));
    if !s.monotone {
        for &i in local.iter().take(cfg.refine_top_k) {
            let a = if i == 0 { grid[0].r * 0.5 } else { grid[i - 1].r };
            let b = if i + 1 == grid.len() { grid[i].r } else { grid[i + 1].r };
            s.golden(a, b);
        }
    }
    let gap = s.branch_and_bound(cfg);
    let best = s
        .evals
        .iter()
        .copied()
        .max_by(|a, b| a.avg.total_cmp(&b.avg).then(b.r.total_cmp(&a.r)))
        .expect("grid is nonempty");
    let r_half = s.half_radius(cfg.half_factor * best.avg);
    let (label, tie) = classify_with(cfg, phase, x, best.avg, r_half, best.err + gap)?;
    Ok(MaximalSample {
        x,
        value: best.avg,
        r_star: best.r,
        r_half,
        err: best.err + gap,
        quad_err: best.err,
        gap,
        case_label: label,
        tie,
        evals: s.evals.len(),
    })
}

fn classify_with(cfg: &SearchConfig, phase: &Phase, x: f64, value: f64, r_half: f64, err: f64) -> Result<(CaseLabel, bool)> {
    match cfg.m_cut.resolve(phase) {
        Some(m) => classify_values(x, value, r_half, err, m, cfg.epsilon),
        None => Ok((CaseLabel::Unclassified, false)),
    }
}

/// Recomputes `r(x)` for an existing sample on a fresh radius grid.
pub fn radius_function(f: &TestFn, phase: &Phase, x: f64, sample: &MaximalSample, cfg: &SearchConfig) -> Result<f64> {
    cfg.validate()?;
    validate_x(x)?;
    if f.pieces().is_empty() {
        return Ok(cfg.r_min_scale);
    }
    let mut s = Search::new(f, phase, x, cfg)?;
    s.eval_grid();
    s.eval(sample.r_star);
    Ok(s.half_radius(cfg.half_factor * sample.value))
}

fn classify_values(x: f64, value: f64, r_half: f64, err: f64, m_cut: f64, epsilon: f64) -> Result<(CaseLabel, bool)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Precondition(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(m_cut >= 1.0) {
        return Err(Error::Precondition(format!("M_cut must be >= 1, got {m_cut}")));
    }
    let ax = x.abs();
    if ax <= m_cut {
        return Ok((CaseLabel::A1, false));
    }
    if r_half <= ax / 2.0 {
        let threshold = ax.powf(-(1.0 + epsilon));
        if value <= threshold + err {
            return Ok((CaseLabel::A2, value > threshold - err));
        }
        return Ok((CaseLabel::A3, false));
    }
    if r_half >= 2.0 * ax {
        Ok((CaseLabel::A41, false))
    } else {
        Ok((CaseLabel::A42, false))
    }
}

/// Case label for a sample; the flag marks decisions within `err` of a threshold.
pub fn classify_case(sample: &MaximalSample, m_cut: f64, epsilon: f64) -> Result<(CaseLabel, bool)> {
    classify_values(sample.x, sample.value, sample.r_half, sample.err, m_cut, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfns::{atom_fbeta, char_fn};

    fn chi() -> TestFn {
        TestFn::Step(char_fn(1.0).unwrap())
    }

    fn zero_cfg() -> SearchConfig {
        SearchConfig { m_cut: MCut::Value(1.0), ..SearchConfig::default() }
    }

    #[test]
    fn characteristic_function_outside() {
        let s = maximal_value(&chi(), &Phase::Zero, 3.0, &zero_cfg()).unwrap();
        // closed form 1/(1 + |x|) attained at r = |x| + 1
        assert!((s.value - 0.25).abs() < 1e-15);
        assert!((s.r_star - 4.0).abs() < 1e-12);
        assert_eq!(s.gap, 0.0);
        assert!((s.r_half - 8.0 / 3.0).abs() < 1e-10, "{}", s.r_half);
    }

    #[test]
    fn characteristic_function_inside() {
        let cfg = zero_cfg();
        let s = maximal_value(&chi(), &Phase::Zero, 0.0, &cfg).unwrap();
        assert_eq!(s.value, 1.0);
        assert_eq!(s.r_half, cfg.r_min_scale);
        assert_eq!(s.case_label, CaseLabel::A1);
    }

    #[test]
    fn cubic_phase_atom_lower_bound() {
        let f = TestFn::Step(atom_fbeta(0.01).unwrap());
        let p = Phase::laurent(&[(3, 1.0)]).unwrap();
        let s = maximal_value(&f, &p, 2.0, &SearchConfig::default()).unwrap();
        assert!(s.value >= 1.0 / 16.0 - s.err, "{s:?}");
    }

    #[test]
    fn half_radius_not_below_distance_to_support() {
        let f = TestFn::Step(atom_fbeta(0.5).unwrap());
        let p = Phase::quadratic_constant(1.0).unwrap();
        for x in [2.0, -3.5, 7.0] {
            let s = maximal_value(&f, &p, x, &SearchConfig::default()).unwrap();
            assert!(s.r_half >= x.abs() - 0.5);
            assert!(s.r_half <= s.r_star);
            let again = radius_function(&f, &p, x, &s, &SearchConfig::default()).unwrap();
            assert!(again <= s.r_star * (1.0 + 1e-12));
            assert!(again >= x.abs() - 0.5);
        }
    }

    #[test]
    fn classification_examples() {
        let base = MaximalSample {
            x: 0.5,
            value: 0.1,
            r_star: 1.0,
            r_half: 1.0,
            err: 0.0,
            quad_err: 0.0,
            gap: 0.0,
            case_label: CaseLabel::Unclassified,
            tie: false,
            evals: 0,
        };
        assert_eq!(classify_case(&base, 1.0, 0.5).unwrap().0, CaseLabel::A1);
        let a2 = MaximalSample { x: 10.0, value: 1e-4, r_half: 2.0, ..base };
        assert_eq!(classify_case(&a2, 1.0, 0.5).unwrap(), (CaseLabel::A2, false));
        let a3 = MaximalSample { value: 0.05, ..a2 };
        assert_eq!(classify_case(&a3, 1.0, 0.5).unwrap().0, CaseLabel::A3);
        let a41 = MaximalSample { x: 10.0, r_half: 25.0, ..base };
        assert_eq!(classify_case(&a41, 1.0, 0.5).unwrap().0, CaseLabel::A41);
        let a42 = MaximalSample { x: 10.0, r_half: 12.0, ..base };
        assert_eq!(classify_case(&a42, 1.0, 0.5).unwrap().0, CaseLabel::A42);
        let tie = MaximalSample { value: 10f64.powf(-1.5), err: 1e-6, ..a2 };
        assert_eq!(classify_case(&tie, 1.0, 0.5).unwrap(), (CaseLabel::A2, true));
        assert!(classify_case(&base, 1.0, 1.5).is_err());
    }

    #[test]
    fn search_config_json() {
        let c: SearchConfig = serde_json::from_str(r#"{"m_cut":"auto","points_per_decade":32}"#).unwrap();
        assert_eq!(c.m_cut, MCut::Auto);
        assert_eq!(c.points_per_decade, 32);
        let d: SearchConfig = serde_json::from_str(r#"{"m_cut":2.5}"#).unwrap();
        assert_eq!(d.m_cut, MCut::Value(2.5));
        assert!(serde_json::from_str::<SearchConfig>(r#"{"m_cut":"big"}"#).is_err());
        assert!(SearchConfig { epsilon: 1.5, ..SearchConfig::default() }.validate().is_err());
    }

    #[test]
    fn oscillatory_value_dominated_by_hardy_littlewood() {
        let f = TestFn::Step(crate::testfns::PiecewiseConstantFn::new(vec![-1.0, 0.3, 2.0], vec![2.0, 0.5]).unwrap());
        let p = Phase::quadratic_constant(3.0).unwrap();
        let cfg = SearchConfig::default();
        for x in [-4.0, -0.5, 0.3, 1.7, 6.0] {
            let osc = maximal_value(&f, &p, x, &cfg).unwrap();
            let hl = maximal_value(&f, &Phase::Zero, x, &zero_cfg()).unwrap();
            assert!(osc.value <= hl.value + osc.err + 1e-12, "x={x}: {} > {}", osc.value, hl.value);
        }
    }
}
