//! Oscillatory integrals `∫_a^b f(t) e^{iγ(x, x-t)} dt` and centered averages.
//!
//! A [`PrimitiveTable`] partitions the clipped support of `f` into panels whose
//! phase variation is at most π/2, resolves each panel with adaptive GK15 and
//! keeps prefix sums, so any sub-interval integral costs two partial panels.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauss::gk15;
use crate::phase::Phase;
use crate::testfns::TestFn;

/// Absolute tolerance per unit length.
pub const DEFAULT_TOL: f64 = 1e-8;
pub const MAX_DEPTH: u32 = 40;
const PANEL_PHASE_BUDGET: f64 = FRAC_PI_2;
const MAX_PANELS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadMethod {
    Adaptive,
    IbpAccelerated,
    ExactPiecewise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: Complex64,
    pub abs_error_estimate: f64,
    pub panels_used: usize,
    pub method: QuadMethod,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
    /// Constant amplitude of the underlying piece, if any.
    constant: Option<f64>,
    exact: bool,
}

/// Prefix-summed panel table for one `(f, γ, x)` over a window `[lo, hi]`.
pub struct PrimitiveTable<'a> {
    f: &'a TestFn,
    phase: &'a Phase,
    x: f64,
    lo: f64,
    hi: f64,
    panels: Vec<Panel>,
    cum: Vec<Complex64>,
    cum_err: Vec<f64>,
}

impl<'a> PrimitiveTable<'a> {
    pub fn build(f: &'a TestFn, phase: &'a Phase, x: f64, lo: f64, hi: f64, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
        }
        if !(lo <= hi) {
            return Err(Error::Precondition(format!("need a <= b, got [{lo}, {hi}]")));
        }
        let mut table = Self { f, phase, x, lo, hi, panels: Vec::new(), cum: Vec::new(), cum_err: Vec::new() };
        for piece in f.pieces() {
            let (a, b) = (piece.a.max(lo), piece.b.min(hi));
            if a >= b {
                continue;
            }
            if phase.has_negative_powers() && a <= x && x <= b {
                return Err(Error::Domain(format!(
                    "phase is singular at t = {x}, inside the support piece [{a}, {b}]"
                )));
            }
            if phase.is_zero() {
                if let Some(v) = piece.constant {
                    table.panels.push(Panel {
                        a,
                        b,
                        value: Complex64::new(v * (b - a), 0.0),
                        err: 0.0,
                        constant: Some(v),
                        exact: true,
                    });
                    continue;
                }
            }
            if a < x && x < b {
                table.resolve_piece(a, x, piece.constant, tol)?;
                table.resolve_piece(x, b, piece.constant, tol)?;
            } else {
                table.resolve_piece(a, b, piece.constant, tol)?;
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut acc_err = 0.0;
        table.cum.push(acc);
        table.cum_err.push(acc_err);
        for p in &table.panels {
            acc += p.value;
            acc_err += p.err;
            table.cum.push(acc);
            table.cum_err.push(acc_err);
        }
        Ok(table)
    }

    #[inline]
    fn amplitude(&self, constant: Option<f64>, t: f64) -> f64 {
        match constant {
            Some(v) => v,
            None => self.f.eval(t),
        }
    }

    #[inline]
    fn integrand(&self, constant: Option<f64>, t: f64) -> Complex64 {
        let amp = self.amplitude(constant, t);
        match self.phase.eval(self.x, self.x - t) {
            Ok(g) => Complex64::from_polar(amp, g),
            Err(_) => Complex64::new(f64::NAN, f64::NAN),
        }
    }

    fn variation(&self, a: f64, b: f64) -> f64 {
        let w = b - a;
        let slope = [a, 0.5 * (a + b), b]
            .into_iter()
            .filter_map(|t| self.phase.dt(self.x, self.x - t).ok())
            .fold(0.0, |m: f64, d| m.max(d.abs()));
        let drift = match (self.phase.eval(self.x, self.x - a), self.phase.eval(self.x, self.x - b)) {
            (Ok(ga), Ok(gb)) => (gb - ga).abs(),
            _ => f64::INFINITY,
        };
        (w * slope).max(drift)
    }

    /// Error level set by rounding of the phase: `γ` is known only to
    /// `O(ε|γ|)` radians, so panels cannot resolve below that relative level.
    fn rounding_floor(&self, constant: Option<f64>, a: f64, b: f64) -> f64 {
        let gamma = self.phase.eval(self.x, self.x - 0.5 * (a + b)).map_or(0.0, f64::abs);
        let amp = match constant {
            Some(v) => v.abs(),
            None => self.f.sup_abs_on(a, b),
        };
        64.0 * f64::EPSILON * (1.0 + gamma) * amp * (b - a)
    }

    fn resolve_piece(&mut self, a: f64, b: f64, constant: Option<f64>, tol: f64) -> Result<()> {
        let mut stack = vec![(a, b, 0u32, false)];
        while let Some((lo, hi, depth, sized)) = stack.pop() {
            if self.panels.len() > MAX_PANELS {
                return Err(Error::Overflow(format!(
                    "phase too oscillatory: more than {MAX_PANELS} panels on [{a}, {b}] at x = {}",
                    self.x
                )));
            }
            let mid = 0.5 * (lo + hi);
            let splittable = depth < MAX_DEPTH && lo < mid && mid < hi;
            if !sized {
                if splittable && self.variation(lo, hi) > PANEL_PHASE_BUDGET {
                    stack.push((mid, hi, depth + 1, false));
                    stack.push((lo, mid, depth + 1, false));
                    continue;
                }
            }
            let (value, err) = gk15(|t| self.integrand(constant, t), lo, hi);
            if !(value.re.is_finite() && value.im.is_finite()) {
                return Err(Error::Overflow(format!("integrand not representable on [{lo}, {hi}]")));
            }
            if err > tol * (hi - lo) && err > self.rounding_floor(constant, lo, hi) && splittable {
                stack.push((mid, hi, depth + 1, true));
                stack.push((lo, mid, depth + 1, true));
                continue;
            }
            self.panels.push(Panel { a: lo, b: hi, value, err, constant, exact: false });
        }
        Ok(())
    }

    pub fn panels_used(&self) -> usize {
        self.panels.len()
    }

    pub fn is_exact(&self) -> bool {
        self.panels.iter().all(|p| p.exact)
    }

    fn partial(&self, k: usize, u: f64, v: f64) -> (Complex64, f64) {
        let p = &self.panels[k];
        if u <= p.a && v >= p.b {
            return (p.value, p.err);
        }
        if v <= u {
            return (Complex64::new(0.0, 0.0), 0.0);
        }
        if p.exact {
            let c = p.constant.unwrap_or(0.0);
            return (Complex64::new(c * (v - u), 0.0), 0.0);
        }
        let (val, err) = gk15(|t| self.integrand(p.constant, t), u, v);
        (val, err)
    }

    /// Integral over `[s1, s2] ∩ [lo, hi]` with its error estimate.
    pub fn integrate(&self, s1: f64, s2: f64) -> (Complex64, f64) {
        let (s1, s2) = (s1.max(self.lo), s2.min(self.hi));
        let zero = (Complex64::new(0.0, 0.0), 0.0);
        if s1 >= s2 || self.panels.is_empty() {
            return zero;
        }
        let k1 = self.panels.partition_point(|p| p.b <= s1);
        let k2 = self.panels.partition_point(|p| p.a < s2);
        if k1 >= k2 {
            return zero;
        }
        let k2 = k2 - 1;
        if k1 == k2 {
            let p = &self.panels[k1];
            return self.partial(k1, s1.max(p.a), s2.min(p.b));
        }
        let (v1, e1) = self.partial(k1, s1.max(self.panels[k1].a), self.panels[k1].b);
        let (v2, e2) = self.partial(k2, self.panels[k2].a, s2.min(self.panels[k2].b));
        let inner = self.cum[k2] - self.cum[k1 + 1];
        let inner_err = (self.cum_err[k2] - self.cum_err[k1 + 1]).max(0.0);
        (v1 + inner + v2, e1 + inner_err + e2)
    }

    /// Average over `[x - r, x + r]`.
    pub fn average(&self, r: f64) -> (Complex64, f64) {
        let (v, e) = self.integrate(self.x - r, self.x + r);
        (v / (2.0 * r), e / (2.0 * r))
    }

    fn result(&self, value: Complex64, err: f64) -> QuadResult {
        QuadResult {
            value,
            abs_error_estimate: err,
            panels_used: self.panels.len(),
            method: if self.is_exact() { QuadMethod::ExactPiecewise } else { QuadMethod::Adaptive },
        }
    }
}

/// `∫_a^b f(t) e^{iγ(x, x-t)} dt`.
pub fn osc_integral(f: &TestFn, phase: &Phase, x: f64, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    let table = PrimitiveTable::build(f, phase, x, a, b, tol)?;
    let (v, e) = table.integrate(a, b);
    Ok(table.result(v, e))
}

/// `(1/2r) ∫_{x-r}^{x+r} f(t) e^{iγ(x, x-t)} dt`.
pub fn average(f: &TestFn, phase: &Phase, x: f64, r: f64, tol: f64) -> Result<QuadResult> {
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("radius must be positive, got {r}")));
    }
    let q = osc_integral(f, phase, x, x - r, x + r, tol)?;
    Ok(QuadResult { value: q.value / (2.0 * r), abs_error_estimate: q.abs_error_estimate / (2.0 * r), ..q })
}

const MONOTONE_GRID: usize = 257;

fn check_ibp_setting(phase: &Phase, a: f64, b: f64) -> Result<()> {
    if !phase.is_x_independent() {
        return Err(Error::Precondition("integration-by-parts bound needs an x-independent phase".into()));
    }
    if !(a < b) {
        return Err(Error::Precondition(format!("need a < b, got [{a}, {b}]")));
    }
    if a <= 0.0 && 0.0 <= b {
        return Err(Error::Precondition(format!("interval [{a}, {b}] contains 0")));
    }
    let mut prev: Option<f64> = None;
    let mut direction = 0.0f64;
    for i in 0..MONOTONE_GRID {
        let t = a + (b - a) * i as f64 / (MONOTONE_GRID - 1) as f64;
        let d = phase.dt(0.0, t)?.abs();
        if d == 0.0 {
            return Err(Error::Precondition(format!("γ' vanishes at {t}")));
        }
        if let Some(p) = prev {
            let step = (d - p).signum();
            if d != p {
                if direction != 0.0 && step != direction {
                    return Err(Error::Precondition(format!("|γ'| is not monotone on [{a}, {b}]")));
                }
                direction = step;
            }
        }
        prev = Some(d);
    }
    Ok(())
}

/// `4 / min(|γ'(a)|, |γ'(b)|)`, bounding `|∫_a^b e^{iγ(t)} dt|` when `|γ'|` is
/// positive and monotone on `[a, b]`.
pub fn ibp_tail_bound(phase: &Phase, a: f64, b: f64) -> Result<f64> {
    check_ibp_setting(phase, a, b)?;
    let da = phase.dt(0.0, a)?.abs();
    let db = phase.dt(0.0, b)?.abs();
    Ok(4.0 / da.min(db))
}

/// Boundary terms `[e^{iγ}/(iγ')]_a^b`, with the remaining integral bounded by
/// the total variation `|1/γ'(b) - 1/γ'(a)|` of the monotone `1/γ'`.
pub fn ibp_accelerated(phase: &Phase, a: f64, b: f64) -> Result<QuadResult> {
    check_ibp_setting(phase, a, b)?;
    let i = Complex64::new(0.0, 1.0);
    let term = |t: f64| -> Result<(Complex64, f64)> {
        let d = phase.dt(0.0, t)?;
        Ok((Complex64::from_polar(1.0, phase.eval(0.0, t)?) / (i * d), 1.0 / d))
    };
    let (va, ia) = term(a)?;
    let (vb, ib) = term(b)?;
    Ok(QuadResult {
        value: vb - va,
        abs_error_estimate: (ib - ia).abs(),
        panels_used: 0,
        method: QuadMethod::IbpAccelerated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfns::{atom_fbeta, char_fn, smooth_bump, PiecewiseConstantFn};
    use std::f64::consts::PI;

    /// Midpoint rule with repeated halving until two levels agree.
    fn oracle(g: impl Fn(f64) -> Complex64, a: f64, b: f64) -> Complex64 {
        let mut n = 1024usize;
        let mid = |n: usize| {
            let h = (b - a) / n as f64;
            (0..n).map(|i| g(a + (i as f64 + 0.5) * h)).sum::<Complex64>() * h
        };
        let mut prev = mid(n);
        loop {
            n *= 2;
            let cur = mid(n);
            // Richardson step for the O(h²) midpoint rule
            let extrap = cur + (cur - prev) / 3.0;
            if (cur - prev).norm() < 1e-9 || n > 1 << 24 {
                return extrap;
            }
            prev = cur;
        }
    }

    #[test]
    fn constant_zero_phase_is_exact() {
        let f = TestFn::Step(PiecewiseConstantFn::indicator(-10.0, 10.0).unwrap());
        let q = osc_integral(&f, &Phase::Zero, 0.0, 0.0, 3.0, DEFAULT_TOL).unwrap();
        assert_eq!(q.value, Complex64::new(3.0, 0.0));
        assert_eq!(q.abs_error_estimate, 0.0);
        assert_eq!(q.method, QuadMethod::ExactPiecewise);
    }

    #[test]
    fn linear_phase_full_period_vanishes() {
        let f = TestFn::Step(PiecewiseConstantFn::indicator(-100.0, 100.0).unwrap());
        let p = Phase::laurent(&[(1, 1.0)]).unwrap();
        let q = osc_integral(&f, &p, 0.0, 0.0, 2.0 * PI, DEFAULT_TOL).unwrap();
        assert!(q.value.norm() < 1e-12, "{}", q.value);
        assert!(q.abs_error_estimate <= DEFAULT_TOL * 2.0 * PI);
    }

    #[test]
    fn fresnel_window() {
        let f = TestFn::Step(PiecewiseConstantFn::indicator(-50.0, 50.0).unwrap());
        let p = Phase::quadratic_constant(1.0).unwrap();
        let q = osc_integral(&f, &p, 0.0, -50.0, 50.0, DEFAULT_TOL).unwrap();
        let limit = Complex64::from_polar(PI.sqrt(), PI / 4.0);
        assert!((q.value - limit).norm() <= 0.05);
        let o = oracle(|t| Complex64::from_polar(1.0, t * t), -50.0, 50.0);
        assert!((q.value - o).norm() < 1e-7, "{} vs {}", q.value, o);
    }

    #[test]
    fn average_examples() {
        let chi = TestFn::Step(char_fn(1.0).unwrap());
        let a = average(&chi, &Phase::Zero, 0.0, 2.0, DEFAULT_TOL).unwrap();
        assert_eq!(a.value.re, 0.5);
        let b = average(&chi, &Phase::Zero, 3.0, 4.0, DEFAULT_TOL).unwrap();
        assert_eq!(b.value.re, 0.25);
        let atom = TestFn::Step(atom_fbeta(1.0).unwrap());
        for x in [-3.0, 0.0, 0.4, 7.0] {
            let c = average(&atom, &Phase::Zero, x, x.abs() + 1.0, DEFAULT_TOL).unwrap();
            assert!(c.value.norm() < 1e-15);
        }
    }

    #[test]
    fn singular_phase_inside_support_is_rejected() {
        let f = TestFn::Step(char_fn(1.0).unwrap());
        let p = Phase::laurent(&[(-1, 1.0)]).unwrap();
        assert!(matches!(osc_integral(&f, &p, 0.5, -1.0, 1.0, DEFAULT_TOL), Err(Error::Domain(_))));
        assert!(osc_integral(&f, &p, 3.0, -1.0, 1.0, DEFAULT_TOL).is_ok());
    }

    #[test]
    fn smooth_bump_matches_oracle() {
        let b = smooth_bump(1.0, 2.0, 1.5).unwrap();
        let f = TestFn::Bump(b);
        let p = Phase::curved_constant(&[(0.5, 2.0), (1.0, 2.5)]).unwrap();
        let x = 4.0;
        let q = osc_integral(&f, &p, x, -3.0, 5.0, DEFAULT_TOL).unwrap();
        let o = oracle(|t| Complex64::from_polar(b.eval(t), p.eval(x, x - t).unwrap()), -1.0, 3.0);
        assert!((q.value - o).norm() < 1e-8, "{} vs {}", q.value, o);
    }

    #[test]
    fn table_subintervals_match_direct_integration() {
        let f = TestFn::Step(PiecewiseConstantFn::new(vec![-2.0, -0.5, 1.0, 3.0], vec![1.0, -2.0, 0.5]).unwrap());
        let p = Phase::laurent(&[(2, 1.0), (3, 0.2)]).unwrap();
        let x = 0.7;
        let table = PrimitiveTable::build(&f, &p, x, -10.0, 10.0, DEFAULT_TOL).unwrap();
        for &(s1, s2) in &[(-1.9, 2.9), (0.0, 0.1), (-0.6, -0.4), (-3.0, 5.0), (2.0, 2.0)] {
            let (v, e) = table.integrate(s1, s2);
            let direct = osc_integral(&f, &p, x, s1, s2, DEFAULT_TOL).unwrap();
            assert!((v - direct.value).norm() <= e + direct.abs_error_estimate + 1e-14);
        }
    }

    #[test]
    fn ibp_bound_examples() {
        let sq = Phase::laurent(&[(2, 1.0)]).unwrap();
        let bound = ibp_tail_bound(&sq, 10.0, 20.0).unwrap();
        assert!((bound - 0.2).abs() < 1e-15);
        let exact = oracle(|t| Complex64::from_polar(1.0, t * t), 10.0, 20.0).norm();
        assert!((exact - 0.056_307_656_017_43).abs() < 1e-9, "{exact}");
        assert!(exact <= bound);
        let cube = Phase::laurent(&[(3, 1.0)]).unwrap();
        assert!((ibp_tail_bound(&cube, 5.0, 6.0).unwrap() - 4.0 / 75.0).abs() < 1e-15);
        assert!(ibp_tail_bound(&sq, -3.0, 2.0).is_err());
    }

    #[test]
    fn ibp_accelerated_brackets_adaptive() {
        let sq = Phase::laurent(&[(2, 1.0)]).unwrap();
        let fast = ibp_accelerated(&sq, 10.0, 20.0).unwrap();
        let f = TestFn::Step(PiecewiseConstantFn::indicator(-100.0, 100.0).unwrap());
        // γ(0, 0 - t) = t² so the table integrates the same function
        let slow = osc_integral(&f, &sq, 0.0, 10.0, 20.0, DEFAULT_TOL).unwrap();
        assert!((fast.value - slow.value).norm() <= fast.abs_error_estimate + slow.abs_error_estimate);
    }
}
