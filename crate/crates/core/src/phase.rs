//! Phase families `γ(x, t)` and the binomial machinery used to expand
//! `γ(x, x - t)` around `t = 0`.
//!
//! Coefficient functions are expressions in `x` carrying an explicitly
//! declared sup bound (and, where needed, a bound on the reciprocal). The
//! bounds are never inferred by sampling; [`Phase::check_bounds`] only
//! verifies that declared bounds are consistent with sampled values.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::expr::Expr;

/// A bounded coefficient function `c(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coeff {
    pub expr: Expr,
    /// Declared `‖c‖∞`.
    pub sup: f64,
    /// Declared `‖1/c‖∞`, when the coefficient must stay away from zero.
    pub inv_sup: Option<f64>,
}

impl Coeff {
    pub fn constant(c: f64) -> Self {
        Self {
            expr: Expr::constant(c),
            sup: c.abs(),
            inv_sup: if c != 0.0 { Some(1.0 / c.abs()) } else { None },
        }
    }

    pub fn new(expr: Expr, sup: f64, inv_sup: Option<f64>) -> Result<Self> {
        if !(sup >= 0.0 && sup.is_finite()) {
            return Err(Error::Config(format!("sup bound must be finite and >= 0, got {sup}")));
        }
        if let Some(s) = inv_sup {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("inverse sup bound must be finite and > 0, got {s}")));
            }
        }
        Ok(Self { expr, sup, inv_sup })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.expr.eval(x)
    }

    pub fn is_zero(&self) -> bool {
        self.sup == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvedTerm {
    pub coeff: Coeff,
    pub exponent: f64,
}

/// Phase `γ(x, t)`; the operator always evaluates it as `γ(x, x - s)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    Zero,
    /// `α(x) β(t)`.
    Separable { alpha: Coeff, beta: Expr },
    /// `Σ_{j=-d}^{d} c_j(x) t^j`; `coeffs[j + d]` holds `c_j`.
    Laurent { degree: u32, coeffs: Vec<Coeff> },
    /// `Σ_j c_j(x) |t|^{d_j}` with strictly increasing exponents.
    Curved { terms: Vec<CurvedTerm> },
    /// `a(x) t²`.
    Quadratic { a: Coeff },
}

#[inline]
pub(crate) fn pow_abs(u: f64, d: f64) -> f64 {
    if u == 0.0 {
        if d > 0.0 {
            0.0
        } else if d == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        (d * u.abs().ln()).exp()
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("{what} is not representable ({v})")))
    }
}

impl Phase {
    pub fn zero() -> Self {
        Phase::Zero
    }

    /// Laurent polynomial from `(power, constant coefficient)` pairs.
    pub fn laurent(terms: &[(i32, f64)]) -> Result<Self> {
        let degree = terms.iter().map(|(j, _)| j.unsigned_abs()).max().unwrap_or(0);
        if degree == 0 {
            return Err(Error::Config("laurent phase needs a nonzero power".into()));
        }
        let mut coeffs = vec![Coeff::constant(0.0); 2 * degree as usize + 1];
        for &(j, c) in terms {
            let idx = (j + degree as i32) as usize;
            let old = coeffs[idx].eval(0.0);
            coeffs[idx] = Coeff::constant(old + c);
        }
        Ok(Phase::Laurent { degree, coeffs })
    }

    pub fn laurent_with(degree: u32, coeffs: Vec<Coeff>) -> Result<Self> {
        if degree == 0 || coeffs.len() != 2 * degree as usize + 1 {
            return Err(Error::Config(format!(
                "laurent phase of degree {degree} needs {} coefficients",
                2 * degree + 1
            )));
        }
        Ok(Phase::Laurent { degree, coeffs })
    }

    /// Curved power sum from `(coefficient, exponent)` pairs.
    pub fn curved(terms: Vec<(Coeff, f64)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Config("curved phase needs at least one term".into()));
        }
        if terms.windows(2).any(|w| !(w[0].1 < w[1].1)) {
            return Err(Error::Config("curved exponents must be strictly increasing".into()));
        }
        if terms.iter().any(|(_, d)| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::Config("curved exponents must be positive".into()));
        }
        let top = &terms.last().unwrap().0;
        if top.inv_sup.is_none() {
            return Err(Error::Config(
                "top coefficient of a curved phase needs a bound on its reciprocal".into(),
            ));
        }
        Ok(Phase::Curved {
            terms: terms
                .into_iter()
                .map(|(coeff, exponent)| CurvedTerm { coeff, exponent })
                .collect(),
        })
    }

    pub fn curved_constant(terms: &[(f64, f64)]) -> Result<Self> {
        Self::curved(terms.iter().map(|&(c, d)| (Coeff::constant(c), d)).collect())
    }

    pub fn quadratic(a: Coeff) -> Result<Self> {
        if a.inv_sup.is_none() {
            return Err(Error::Config("quadratic coefficient needs a bound on 1/a".into()));
        }
        Ok(Phase::Quadratic { a })
    }

    pub fn quadratic_constant(a: f64) -> Result<Self> {
        if a == 0.0 {
            return Err(Error::Config("quadratic coefficient must be nonzero".into()));
        }
        Self::quadratic(Coeff::constant(a))
    }

    pub fn separable(alpha: Coeff, beta: Expr) -> Self {
        Phase::Separable { alpha, beta }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Phase::Zero)
    }

    /// True when no coefficient depends on `x`.
    pub fn is_x_independent(&self) -> bool {
        match self {
            Phase::Zero => true,
            Phase::Separable { alpha, .. } => alpha.expr.is_constant(),
            Phase::Laurent { coeffs, .. } => coeffs.iter().all(|c| c.expr.is_constant()),
            Phase::Curved { terms } => terms.iter().all(|t| t.coeff.expr.is_constant()),
            Phase::Quadratic { a } => a.expr.is_constant(),
        }
    }

    pub fn has_negative_powers(&self) -> bool {
        match self {
            Phase::Laurent { degree, coeffs } => {
                coeffs[..*degree as usize].iter().any(|c| !c.is_zero())
            }
            _ => false,
        }
    }

    /// Whether `γ(x, ·)` is singular at `t = 0`.
    pub fn singular_at_origin(&self) -> bool {
        match self {
            Phase::Laurent { .. } => self.has_negative_powers(),
            Phase::Curved { terms } => terms.iter().any(|t| !t.coeff.is_zero() && t.exponent < 1.0),
            _ => false,
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        let v = match self {
            Phase::Zero => 0.0,
            Phase::Separable { alpha, beta } => alpha.eval(x) * beta.eval(t),
            Phase::Laurent { degree, coeffs } => {
                let d = *degree as i32;
                if t == 0.0 && self.has_negative_powers() {
                    return Err(Error::Domain("laurent phase with negative powers at t = 0".into()));
                }
                let mut acc = 0.0;
                for (idx, c) in coeffs.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let j = idx as i32 - d;
                    acc += c.eval(x) * t.powi(j);
                }
                acc
            }
            Phase::Curved { terms } => {
                let mut acc = 0.0;
                for term in terms {
                    if term.coeff.is_zero() {
                        continue;
                    }
                    if t == 0.0 && term.exponent <= 0.0 {
                        return Err(Error::Domain("nonpositive exponent at t = 0".into()));
                    }
                    acc += term.coeff.eval(x) * pow_abs(t, term.exponent);
                }
                acc
            }
            Phase::Quadratic { a } => a.eval(x) * t * t,
        };
        finite(v, "phase value")
    }

    /// `∂γ/∂t` at `(x, u)`.
    pub fn dt(&self, x: f64, u: f64) -> Result<f64> {
        let v = match self {
            Phase::Zero => 0.0,
            Phase::Separable { alpha, beta } => alpha.eval(x) * beta.eval_dual(u).1,
            Phase::Laurent { degree, coeffs } => {
                let d = *degree as i32;
                if u == 0.0 && self.has_negative_powers() {
                    return Err(Error::Domain("laurent phase with negative powers at u = 0".into()));
                }
                let mut acc = 0.0;
                for (idx, c) in coeffs.iter().enumerate() {
                    let j = idx as i32 - d;
                    if c.is_zero() || j == 0 {
                        continue;
                    }
                    acc += c.eval(x) * j as f64 * u.powi(j - 1);
                }
                acc
            }
            Phase::Curved { terms } => {
                if u == 0.0 {
                    if self.singular_at_origin() {
                        return Err(Error::Domain("curved exponent below 1 at u = 0".into()));
                    }
                    0.0
                } else {
                    let s: f64 = terms
                        .iter()
                        .filter(|t| !t.coeff.is_zero())
                        .map(|t| t.coeff.eval(x) * t.exponent * pow_abs(u, t.exponent - 1.0))
                        .sum();
                    u.signum() * s
                }
            }
            Phase::Quadratic { a } => 2.0 * a.eval(x) * u,
        };
        finite(v, "phase derivative")
    }

    /// Verifies that declared sup bounds dominate the sampled coefficient values.
    pub fn check_bounds(&self, xs: &[f64]) -> Result<()> {
        let coeffs: Vec<&Coeff> = match self {
            Phase::Zero => vec![],
            Phase::Separable { alpha, .. } => vec![alpha],
            Phase::Laurent { coeffs, .. } => coeffs.iter().collect(),
            Phase::Curved { terms } => terms.iter().map(|t| &t.coeff).collect(),
            Phase::Quadratic { a } => vec![a],
        };
        for c in coeffs {
            for &x in xs {
                let v = c.eval(x);
                if v.abs() > c.sup * (1.0 + 1e-12) {
                    return Err(Error::Precondition(format!(
                        "coefficient {} = {v} at x = {x} exceeds declared sup {}",
                        c.expr, c.sup
                    )));
                }
                if let Some(inv) = c.inv_sup {
                    if v == 0.0 || 1.0 / v.abs() > inv * (1.0 + 1e-12) {
                        return Err(Error::Precondition(format!(
                            "1/{} at x = {x} exceeds declared bound {inv}",
                            c.expr
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Curvature exponents `(d_1, ..., d_m)` for the curved and quadratic families.
    pub fn curvature_exponents(&self) -> Option<Vec<f64>> {
        match self {
            Phase::Curved { terms } => Some(terms.iter().map(|t| t.exponent).collect()),
            Phase::Quadratic { .. } => Some(vec![2.0]),
            _ => None,
        }
    }

    /// `(coefficient, exponent)` view of the curved and quadratic families.
    fn power_terms(&self) -> Option<Vec<(&Coeff, f64)>> {
        match self {
            Phase::Curved { terms } => Some(terms.iter().map(|t| (&t.coeff, t.exponent)).collect()),
            Phase::Quadratic { a } => Some(vec![(a, 2.0)]),
            _ => None,
        }
    }

    /// Requires the curvature hypotheses `2 ≤ d_1 < … < d_m` with `d_m > 2`
    /// (or the quadratic family).
    pub fn check_curvature(&self) -> Result<()> {
        match self {
            Phase::Quadratic { .. } => Ok(()),
            Phase::Curved { terms } => {
                let first = terms[0].exponent;
                let last = terms.last().unwrap().exponent;
                if first < 2.0 || last <= 2.0 {
                    return Err(Error::Precondition(format!(
                        "curved phase needs d_1 >= 2 and d_m > 2 (got {first}, {last})"
                    )));
                }
                Ok(())
            }
            _ => Err(Error::Precondition("phase is not a curved power sum or quadratic".into())),
        }
    }

    /// Smallest `M ≥ 1` such that the top term dominates twice the lower ones:
    /// `d_m ‖1/c_m‖∞⁻¹ M^{d_m-1} ≥ 2 Σ_{j<m} d_j ‖c_j‖∞ M^{d_j-1}`.
    pub fn auto_cutoff(&self) -> Option<f64> {
        let terms = self.power_terms()?;
        let (top, dm) = *terms.last().unwrap();
        let lead = dm / top.inv_sup?;
        let holds = |m: f64| {
            let lower: f64 = terms[..terms.len() - 1]
                .iter()
                .map(|(c, d)| d * c.sup * m.powf(d - 1.0))
                .sum();
            lead * m.powf(dm - 1.0) >= 2.0 * lower
        };
        if holds(1.0) {
            return Some(1.0);
        }
        let mut hi = 2.0;
        while !holds(hi) {
            hi *= 2.0;
            if hi > 1e12 {
                return None;
            }
        }
        let mut lo = hi / 2.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if holds(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Upper bound for `|∂_t γ(x, u)|` over `0 < u_lo ≤ |u| ≤ u_hi` at fixed `x`;
    /// `None` for separable phases, whose `β'` has no closed-form bound.
    pub fn dt_abs_bound(&self, x: f64, u_lo: f64, u_hi: f64) -> Option<f64> {
        let edge = |p: f64| pow_abs(u_lo, p).max(pow_abs(u_hi, p));
        match self {
            Phase::Zero => Some(0.0),
            Phase::Separable { .. } => None,
            Phase::Laurent { degree, coeffs } => Some(
                coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(idx, c)| {
                        let j = idx as i32 - *degree as i32;
                        c.eval(x).abs() * j.unsigned_abs() as f64 * edge(j as f64 - 1.0)
                    })
                    .sum(),
            ),
            Phase::Curved { terms } => Some(
                terms
                    .iter()
                    .map(|t| t.coeff.eval(x).abs() * t.exponent * edge(t.exponent - 1.0))
                    .sum(),
            ),
            Phase::Quadratic { a } => Some(2.0 * a.eval(x).abs() * u_hi),
        }
    }

    /// Lower bound for `|∂_t γ(x, u)|` over `u_lo ≤ |u| ≤ u_hi`, uniform in `x`,
    /// built from the declared coefficient bounds.
    pub fn dt_lower_bound(&self, u_lo: f64, u_hi: f64) -> Option<f64> {
        let terms = self.power_terms()?;
        let (top, dm) = *terms.last().unwrap();
        let lead = dm / top.inv_sup? * u_lo.powf(dm - 1.0).min(u_hi.powf(dm - 1.0));
        let lower: f64 = terms[..terms.len() - 1]
            .iter()
            .map(|(c, d)| d * c.sup * u_lo.powf(d - 1.0).max(u_hi.powf(d - 1.0)))
            .sum();
        Some(lead - lower)
    }

    /// Upper bound for `|∂²_t γ(x, u)|` over `u_lo ≤ |u| ≤ u_hi`.
    pub fn dtt_upper_bound(&self, u_lo: f64, u_hi: f64) -> Option<f64> {
        let terms = self.power_terms()?;
        Some(
            terms
                .iter()
                .map(|(c, d)| {
                    c.sup * d * (d - 1.0).abs() * u_lo.powf(d - 2.0).max(u_hi.powf(d - 2.0))
                })
                .sum(),
        )
    }
}

/// `γ(x, t)` for the given phase.
pub fn eval_phase(phase: &Phase, x: f64, t: f64) -> Result<f64> {
    phase.eval(x, t)
}

/// `∂γ/∂t (x, u)`.
pub fn phase_dt(phase: &Phase, x: f64, u: f64) -> Result<f64> {
    phase.dt(x, u)
}

fn laurent_parts(phase: &Phase, x_lo: f64, x_hi: f64, beta: f64) -> Result<(u32, &[Coeff])> {
    let Phase::Laurent { degree, coeffs } = phase else {
        return Err(Error::Precondition("derivative bound needs a laurent phase".into()));
    };
    if *degree < 2 {
        return Err(Error::Precondition("derivative bound needs degree d >= 2".into()));
    }
    if x_lo - beta < 1.0 {
        return Err(Error::Precondition(format!(
            "need x_lo - beta >= 1, got {}",
            x_lo - beta
        )));
    }
    if x_hi < x_lo {
        return Err(Error::Precondition("x_hi < x_lo".into()));
    }
    Ok((*degree, coeffs))
}

/// `c · x_hi^{d-1}` with `c = 2d · max_j ‖c_j‖∞`, the constant used in the
/// lower-bound argument for atoms under Laurent phases.
///
/// This constant can fail to dominate `|∂_u γ|` when many coefficients have
/// adversarial signs (the sum of `|j|` over `j = -d..d` is `d(d+1)`, not `2d`);
/// [`rigorous_derivative_sup_bound`] is always dominating.
pub fn derivative_sup_bound(phase: &Phase, x_lo: f64, x_hi: f64, beta: f64) -> Result<f64> {
    let (d, coeffs) = laurent_parts(phase, x_lo, x_hi, beta)?;
    let max_sup = coeffs.iter().map(|c| c.sup).fold(0.0, f64::max);
    let c = 2.0 * d as f64 * max_sup;
    finite(c * x_hi.powi(d as i32 - 1), "derivative bound")
}

/// Term-by-term dominating bound for `sup |∂_u γ(x, u)|` over
/// `u ∈ [x_lo - beta, x_hi]`.
pub fn rigorous_derivative_sup_bound(phase: &Phase, x_lo: f64, x_hi: f64, beta: f64) -> Result<f64> {
    let (d, coeffs) = laurent_parts(phase, x_lo, x_hi, beta)?;
    let u_lo = x_lo - beta;
    let mut acc = 0.0;
    for (idx, c) in coeffs.iter().enumerate() {
        let j = idx as i32 - d as i32;
        if j == 0 {
            continue;
        }
        let u = if j >= 1 { x_hi } else { u_lo };
        acc += j.unsigned_abs() as f64 * c.sup * u.powi(j - 1);
    }
    finite(acc, "derivative bound")
}

/// Generalized binomial coefficient `C(k, l)` for real `k`.
pub fn binomial(k: f64, l: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..l {
        acc *= (k - i as f64) / (i as f64 + 1.0);
    }
    acc
}

/// Upper bound for `Σ_{l ≥ L} l |C(k, l)|`, namely `C_k / (L - ⌊k⌋)` with
/// `C_k = k (k-1) ⋯ (k - ⌊k⌋)`.
pub fn binom_series_tail(k: f64, big_l: u32) -> Result<f64> {
    if !(k >= 2.0) || !k.is_finite() {
        return Err(Error::Precondition(format!("need k >= 2, got {k}")));
    }
    let fk = k.floor();
    if (big_l as f64) < fk + 2.0 {
        return Err(Error::Precondition(format!(
            "need L >= floor(k) + 2 = {}, got {big_l}",
            fk + 2.0
        )));
    }
    let ck: f64 = (0..=fk as u32).map(|i| k - i as f64).product();
    Ok(ck / (big_l as f64 - fk))
}

/// Bound on `Σ_{l > last} |C(d, l)| ρ^l`, with `ρ < 1`.
fn binomial_tail_weighted(d: f64, last: u32, rho: f64) -> Result<f64> {
    let first_lemma = (d.floor() as u32 + 2).max(2);
    let mut acc = 0.0;
    let mut l = last + 1;
    while l < first_lemma {
        acc += binomial(d, l).abs() * rho.powi(l as i32);
        l += 1;
    }
    Ok(acc + rho.powi(l as i32) * binom_series_tail(d, l)?)
}

/// Truncated modified phase
/// `Σ_j c_j(x) Σ_{l=2}^{L} C(d_j, l) (∓t)^l |x|^{d_j - l}` (minus sign for
/// `x > 0`) together with a rigorous bound on the omitted tail.
pub fn modified_amplitude_phase(phase: &Phase, x: f64, t: f64, big_l: u32) -> Result<(f64, f64)> {
    let terms = phase
        .power_terms()
        .ok_or_else(|| Error::Precondition("modified phase needs a curved or quadratic phase".into()))?;
    if x == 0.0 || t.abs() >= x.abs() {
        return Err(Error::Domain(format!("expansion needs 0 < |t| < |x|, got t={t}, x={x}")));
    }
    if t == 0.0 {
        return Ok((0.0, 0.0));
    }
    let s = if x > 0.0 { -t } else { t };
    let ax = x.abs();
    let rho = t.abs() / ax;
    let mut value = 0.0;
    let mut tail = 0.0;
    for (c, d) in terms {
        let cx = c.eval(x);
        let mut inner = 0.0;
        for l in 2..=big_l {
            let b = binomial(d, l);
            if b == 0.0 {
                continue;
            }
            inner += b * s.powi(l as i32) * pow_abs(ax, d - l as f64);
        }
        value += cx * inner;
        if d >= 2.0 {
            tail += cx.abs() * pow_abs(ax, d) * binomial_tail_weighted(d, big_l.max(1), rho)?;
        } else {
            return Err(Error::Precondition(format!("exponent {d} < 2 in expansion")));
        }
    }
    Ok((finite(value, "modified phase")?, finite(tail, "tail bound")?))
}

/// Truncation level `⌊d_m⌋ + 2 + ⌈log(1/tol) / log(|x|/|t|)⌉`.
pub fn default_truncation(phase: &Phase, x: f64, t: f64, tol: f64) -> Result<u32> {
    let exps = phase
        .curvature_exponents()
        .ok_or_else(|| Error::Precondition("truncation needs a curved or quadratic phase".into()))?;
    let dm = *exps.last().unwrap();
    let base = dm.floor() as u32 + 2;
    if t == 0.0 {
        return Ok(base);
    }
    if t.abs() >= x.abs() {
        return Err(Error::Domain("need |t| < |x|".into()));
    }
    let extra = ((1.0 / tol).ln() / (x.abs() / t.abs()).ln()).ceil().max(0.0);
    Ok(base + extra as u32)
}

/// JSON document describing a phase.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PhaseSpec {
    pub family: String,
    #[serde(default)]
    pub coeffs: Vec<Value>,
    #[serde(default)]
    pub exponents: Vec<f64>,
    #[serde(default)]
    pub sup_bounds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inv_sup_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<String>,
}

fn coeff_from_json(v: &Value, sup: Option<f64>, inv: Option<f64>) -> Result<Coeff> {
    match v {
        Value::Number(n) => {
            let c = n.as_f64().ok_or_else(|| Error::Parse("bad coefficient".into()))?;
            let mut k = Coeff::constant(c);
            if let Some(s) = sup {
                if s < c.abs() {
                    return Err(Error::Config(format!("sup bound {s} below |{c}|")));
                }
                k.sup = s;
            }
            if inv.is_some() {
                k.inv_sup = inv;
            }
            Ok(k)
        }
        Value::String(s) => {
            let expr = Expr::parse(s)?;
            if expr.is_constant() {
                return coeff_from_json(&Value::from(expr.eval(0.0)), sup, inv);
            }
            let sup = sup.ok_or_else(|| {
                Error::Config(format!("coefficient '{s}' depends on x and needs a declared sup bound"))
            })?;
            Coeff::new(expr, sup, inv)
        }
        _ => Err(Error::Parse("coefficient must be a number or expression string".into())),
    }
}

impl PhaseSpec {
    pub fn to_phase(&self) -> Result<Phase> {
        let sup = |i: usize| self.sup_bounds.get(i).copied();
        match self.family.as_str() {
            "zero" => Ok(Phase::Zero),
            "laurent" => {
                if self.coeffs.len() != self.exponents.len() || self.coeffs.is_empty() {
                    return Err(Error::Config("laurent needs matching coeffs and exponents".into()));
                }
                let mut pairs = Vec::new();
                for (i, (c, e)) in self.coeffs.iter().zip(&self.exponents).enumerate() {
                    if e.fract() != 0.0 {
                        return Err(Error::Config(format!("laurent exponent {e} is not an integer")));
                    }
                    pairs.push((*e as i32, coeff_from_json(c, sup(i), None)?));
                }
                let degree = pairs.iter().map(|(j, _)| j.unsigned_abs()).max().unwrap();
                if degree == 0 {
                    return Err(Error::Config("laurent phase needs a nonzero power".into()));
                }
                let mut coeffs = vec![Coeff::constant(0.0); 2 * degree as usize + 1];
                for (j, c) in pairs {
                    let idx = (j + degree as i32) as usize;
                    if !coeffs[idx].is_zero() {
                        return Err(Error::Config(format!("duplicate laurent power {j}")));
                    }
                    coeffs[idx] = c;
                }
                Phase::laurent_with(degree, coeffs)
            }
            "curved" => {
                if self.coeffs.len() != self.exponents.len() || self.coeffs.is_empty() {
                    return Err(Error::Config("curved needs matching coeffs and exponents".into()));
                }
                let m = self.coeffs.len();
                let terms = self
                    .coeffs
                    .iter()
                    .zip(&self.exponents)
                    .enumerate()
                    .map(|(i, (c, e))| {
                        let inv = if i + 1 == m { self.inv_sup_bound } else { None };
                        Ok((coeff_from_json(c, sup(i), inv)?, *e))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Phase::curved(terms)
            }
            "quadratic" => {
                let c = self
                    .coeffs
                    .first()
                    .ok_or_else(|| Error::Config("quadratic needs one coefficient".into()))?;
                Phase::quadratic(coeff_from_json(c, sup(0), self.inv_sup_bound)?)
            }
            "separable" => {
                let c = self
                    .coeffs
                    .first()
                    .ok_or_else(|| Error::Config("separable needs alpha as first coefficient".into()))?;
                let beta = self
                    .beta
                    .as_deref()
                    .ok_or_else(|| Error::Config("separable needs a 'beta' expression".into()))?;
                Ok(Phase::separable(coeff_from_json(c, sup(0), None)?, Expr::parse(beta)?))
            }
            other => Err(Error::Config(format!("unknown phase family '{other}'"))),
        }
    }

    pub fn from_phase(phase: &Phase) -> Self {
        let cv = |c: &Coeff| {
            if c.expr.is_constant() {
                Value::from(c.eval(0.0))
            } else {
                Value::from(c.expr.source().to_string())
            }
        };
        let mut spec = PhaseSpec {
            family: String::new(),
            coeffs: vec![],
            exponents: vec![],
            sup_bounds: vec![],
            inv_sup_bound: None,
            beta: None,
        };
        match phase {
            Phase::Zero => spec.family = "zero".into(),
            Phase::Laurent { degree, coeffs } => {
                spec.family = "laurent".into();
                for (idx, c) in coeffs.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    spec.coeffs.push(cv(c));
                    spec.exponents.push((idx as i64 - *degree as i64) as f64);
                    spec.sup_bounds.push(c.sup);
                }
            }
            Phase::Curved { terms } => {
                spec.family = "curved".into();
                for t in terms {
                    spec.coeffs.push(cv(&t.coeff));
                    spec.exponents.push(t.exponent);
                    spec.sup_bounds.push(t.coeff.sup);
                }
                spec.inv_sup_bound = terms.last().and_then(|t| t.coeff.inv_sup);
            }
            Phase::Quadratic { a } => {
                spec.family = "quadratic".into();
                spec.coeffs.push(cv(a));
                spec.sup_bounds.push(a.sup);
                spec.inv_sup_bound = a.inv_sup;
            }
            Phase::Separable { alpha, beta } => {
                spec.family = "separable".into();
                spec.coeffs.push(cv(alpha));
                spec.sup_bounds.push(alpha.sup);
                spec.beta = Some(beta.source().to_string());
            }
        }
        spec
    }
}

impl Serialize for Phase {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PhaseSpec::from_phase(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        PhaseSpec::deserialize(d)?.to_phase().map_err(serde::de::Error::custom)
    }
}
