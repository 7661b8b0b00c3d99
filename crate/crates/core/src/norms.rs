//! Norms and functionals of test functions, the exact Hardy–Littlewood maximal
//! function of step functions, and admissibility checks for weights.

use std::f64::consts::E;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::gauss::integrate_real;
use crate::maximal::{maximal_value, SearchConfig};
use crate::phase::Phase;
use crate::testfns::{PiecewiseConstantFn, SmoothTestFn, TestFn};

const NUMERIC_TOL: f64 = 1e-12;
const NUMERIC_DEPTH: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Computed {
    pub value: f64,
    pub err: f64,
    pub method: Method,
}

impl Computed {
    fn exact(value: f64) -> Self {
        Self { value, err: 0.0, method: Method::Exact }
    }
    fn numeric((value, err): (f64, f64)) -> Self {
        Self { value, err, method: Method::Quadrature }
    }
}

/// Integrates `g` over the bump support, split at the center and at 0.
fn bump_quad(b: &SmoothTestFn, g: impl Fn(f64) -> f64) -> (f64, f64) {
    let (lo, hi) = b.support();
    let mut cuts = vec![lo, hi, b.center];
    if lo < 0.0 && 0.0 < hi {
        cuts.push(0.0);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2).fold((0.0, 0.0), |(v, e), w| {
        let (dv, de) = integrate_real(&g, w[0], w[1], NUMERIC_TOL, NUMERIC_DEPTH);
        (v + dv, e + de)
    })
}

/// `sign(u)|u|^{l+1}/(l+1)`, an antiderivative of `|u|^l`.
fn abs_power_primitive(u: f64, l: f64) -> f64 {
    u.signum() * u.abs().powf(l + 1.0) / (l + 1.0)
}

/// `∫ (1 + |x|^l) |f|`.
pub fn weighted_l1(f: &TestFn, l: f64) -> Result<Computed> {
    if !(l >= 0.0) || !l.is_finite() {
        return Err(Error::Precondition(format!("weight exponent must be >= 0, got {l}")));
    }
    match f {
        TestFn::Step(s) => Ok(Computed::exact(
            s.intervals()
                .map(|(a, b, v)| v.abs() * ((b - a) + abs_power_primitive(b, l) - abs_power_primitive(a, l)))
                .sum(),
        )),
        TestFn::Bump(b) if l.fract() == 0.0 => {
            let p = b.polynomial();
            let k = l as i32;
            // ∫ p(t) t^m over [u, v]
            let moment = |m: i32, u: f64, v: f64| -> f64 {
                p.iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let n = i as i32 + m + 1;
                        c * (v.powi(n) - u.powi(n)) / n as f64
                    })
                    .sum()
            };
            let (lo, hi) = b.support();
            let sign = b.height.signum();
            let neg = if lo < 0.0 { moment(k, lo, hi.min(0.0)) * if k % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 };
            let pos = if hi > 0.0 { moment(k, lo.max(0.0), hi) } else { 0.0 };
            Ok(Computed::exact(sign * (moment(0, lo, hi) + neg + pos)))
        }
        TestFn::Bump(b) => Ok(Computed::numeric(bump_quad(b, |t| (1.0 + t.abs().powf(l)) * b.eval(t).abs()))),
    }
}

/// `∫ |f| log(e + |f|)`.
pub fn llogl_norm(f: &TestFn) -> Computed {
    match f {
        TestFn::Step(s) => Computed::exact(s.intervals().map(|(a, b, v)| v.abs() * (E + v.abs()).ln() * (b - a)).sum()),
        TestFn::Bump(b) => Computed::numeric(bump_quad(b, |t| {
            let v = b.eval(t).abs();
            v * (E + v).ln()
        })),
    }
}

/// `‖f‖_q` for `q ≥ 1` (including `∞`).
pub fn lq_norm(f: &TestFn, q: f64) -> Result<Computed> {
    if !(q >= 1.0) {
        return Err(Error::Precondition(format!("need q >= 1, got {q}")));
    }
    Ok(match f {
        TestFn::Step(s) if q.is_infinite() => Computed::exact(s.sup_norm()),
        TestFn::Step(s) => Computed::exact(s.intervals().map(|(a, b, v)| v.abs().powf(q) * (b - a)).sum::<f64>().powf(1.0 / q)),
        TestFn::Bump(b) if q == 1.0 => Computed::exact(b.l1_norm()),
        TestFn::Bump(b) if q == 2.0 => Computed::exact(b.l2_norm()),
        TestFn::Bump(b) if q.is_infinite() => Computed::exact(b.sup_norm()),
        TestFn::Bump(b) => {
            let (v, e) = bump_quad(b, |t| b.eval(t).abs().powf(q));
            Computed::numeric((v.powf(1.0 / q), e / q * v.powf(1.0 / q - 1.0)))
        }
    })
}

/// `‖f'‖_p`; `None` for step functions, whose derivative is a measure.
pub fn lp_derivative(f: &TestFn, p: f64) -> Result<Option<Computed>> {
    if !(p >= 1.0) {
        return Err(Error::Precondition(format!("need p >= 1, got {p}")));
    }
    Ok(match f {
        TestFn::Step(_) => None,
        TestFn::Bump(b) => Some(match b.deriv_norm_closed(p) {
            Some(v) => Computed::exact(v),
            None => {
                let (v, e) = bump_quad(b, |t| b.deriv(t).abs().powf(p));
                Computed::numeric((v.powf(1.0 / p), e / p * v.powf(1.0 / p - 1.0)))
            }
        }),
    })
}

/// `‖(1 + |x|^l) f‖_1 + ‖f'‖_p`, or `None` when `f'` is not a function.
pub fn cpl_norm(f: &TestFn, p: f64, l: f64) -> Result<Option<f64>> {
    let w = weighted_l1(f, l)?;
    Ok(lp_derivative(f, p)?.map(|d| w.value + d.value))
}

fn undefined_if_none<S: Serializer>(v: &Option<Computed>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(c) => c.serialize(s),
        None => s.serialize_str("undefined"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub p: f64,
    pub l: f64,
    pub l1: Computed,
    pub weighted_l1: Computed,
    #[serde(serialize_with = "undefined_if_none")]
    pub lp_derivative: Option<Computed>,
    pub llogl: Computed,
    pub cpl: Option<f64>,
}

pub fn norm_report(f: &TestFn, p: f64, l: f64) -> Result<NormReport> {
    let weighted = weighted_l1(f, l)?;
    let deriv = lp_derivative(f, p)?;
    Ok(NormReport {
        p,
        l,
        l1: lq_norm(f, 1.0)?,
        weighted_l1: weighted,
        lp_derivative: deriv,
        llogl: llogl_norm(f),
        cpl: deriv.map(|d| weighted.value + d.value),
    })
}

/// Exact `sup_r (1/2r) ∫_{x-r}^{x+r} |f|` by enumeration of the radii where
/// `x ± r` meets a breakpoint.
pub fn hl_maximal_exact(f: &PiecewiseConstantFn, x: f64) -> f64 {
    let left = f.intervals().filter(|&(a, b, _)| a < x && x <= b).map(|(_, _, v)| v.abs()).next().unwrap_or(0.0);
    let right = f.intervals().filter(|&(a, b, _)| a <= x && x < b).map(|(_, _, v)| v.abs()).next().unwrap_or(0.0);
    // r → 0 limit; the mass is linear in r below the nearest breakpoint radius
    let limit = 0.5 * (left + right);
    f.breakpoints()
        .iter()
        .map(|b| (x - b).abs())
        .filter(|&r| r > 0.0)
        .map(|r| f.abs_mass(x - r, x + r) / (2.0 * r))
        .fold(limit, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `‖f‖_q ≤ 2 ‖f‖_{C_{p,0}}` with `‖f‖_{C_{p,0}} = ‖2f‖_1 + ‖f'‖_p`.
pub fn check_embedding_q(f: &SmoothTestFn, p: f64, q: f64) -> Result<BoundCheck> {
    let tf = TestFn::Bump(*f);
    let lhs = lq_norm(&tf, q)?;
    let c = cpl_norm(&tf, p, 0.0)?.expect("bumps have a derivative in every L^p");
    let rhs = 2.0 * c;
    Ok(BoundCheck { lhs: lhs.value, rhs, pass: lhs.value <= rhs + lhs.err + 1e-12 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LloglCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// Smallest `C` with `lhs ≤ |S| + C·∫|f|log(e+|f|)`.
    pub minimal_c: f64,
    pub err: f64,
}

const LLOGL_GRID: usize = 401;

/// `∫_S Mf ≤ |S| + C ∫ |f| log(e + |f|)` for the Hardy–Littlewood `M`.
pub fn check_llogl_lemma(f: &TestFn, s: (f64, f64), c_test: f64) -> Result<LloglCheck> {
    let (a, b) = s;
    if !(a < b) || !(b - a).is_finite() {
        return Err(Error::Precondition(format!("need a finite interval, got [{a}, {b}]")));
    }
    let (lhs, err) = match f {
        TestFn::Step(step) => {
            let mut cuts: Vec<f64> = step.breakpoints().iter().copied().filter(|&t| a < t && t < b).collect();
            cuts.extend([a, b]);
            cuts.sort_by(f64::total_cmp);
            cuts.windows(2).fold((0.0, 0.0), |(v, e), w| {
                let (dv, de) = integrate_real(|x| hl_maximal_exact(step, x), w[0], w[1], 1e-10, 24);
                (v + dv, e + de)
            })
        }
        TestFn::Bump(bump) => {
            let abs = TestFn::Bump(SmoothTestFn { height: bump.height.abs(), ..*bump });
            let cfg = SearchConfig::default();
            let h = (b - a) / (LLOGL_GRID - 1) as f64;
            let samples = (0..LLOGL_GRID)
                .map(|i| maximal_value(&abs, &Phase::Zero, a + h * i as f64, &cfg))
                .collect::<Result<Vec<_>>>()?;
            let w = |i: usize| if i == 0 || i + 1 == LLOGL_GRID { 0.5 * h } else { h };
            let v: f64 = samples.iter().enumerate().map(|(i, m)| w(i) * m.value).sum();
            let e: f64 = samples.iter().enumerate().map(|(i, m)| w(i) * m.err).sum();
            // halving estimate for the trapezoid rule
            let coarse: f64 = samples
                .iter()
                .enumerate()
                .step_by(2)
                .map(|(i, m)| if i == 0 || i + 1 == LLOGL_GRID { h * m.value } else { 2.0 * h * m.value })
                .sum();
            (v, e + (v - coarse).abs() / 3.0)
        }
    };
    let measure = b - a;
    let ll = llogl_norm(f).value;
    let rhs = measure + c_test * ll;
    let minimal_c = if ll > 0.0 { ((lhs - measure) / ll).max(0.0) } else { 0.0 };
    Ok(LloglCheck { lhs, rhs, pass: lhs <= rhs, minimal_c, err })
}

/// Weight `φ ≥ 1` on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Weight {
    /// `1 + |x| (log|x|)^m` for `|x| ≥ 1`, and `1` otherwise.
    Psi { m: f64 },
    /// `1 + |x|^e`.
    Power { exponent: f64 },
    Custom { expr: Expr },
}

impl Weight {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Weight::Psi { m } => {
                if x.abs() >= 1.0 {
                    1.0 + x.abs() * x.abs().ln().powf(*m)
                } else {
                    1.0
                }
            }
            Weight::Power { exponent } => 1.0 + x.abs().powf(*exponent),
            Weight::Custom { expr } => expr.eval(x),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Weight::Psi { m } => format!("psi_{m}"),
            Weight::Power { exponent } => format!("1+|x|^{exponent}"),
            Weight::Custom { expr } => expr.source().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightGrid {
    pub points_per_decade: usize,
    pub x_min: f64,
    /// Dyadic block ratio below which the tail counts as geometric.
    pub geometric_ratio: f64,
    /// Power-law decay exponent of blocks (in the block index) needed for summability.
    pub min_block_exponent: f64,
    /// Tolerated logarithmic slope of the checked ratios over the last decade.
    pub trend_tol: f64,
}

impl Default for WeightGrid {
    fn default() -> Self {
        Self { points_per_decade: 64, x_min: 1e-3, geometric_ratio: 0.9, min_block_exponent: 1.5, trend_tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightReport {
    pub weight: String,
    pub r_probe: f64,
    pub lower_ratio_min: f64,
    pub lower_ratio_witness: f64,
    pub lower_ok: bool,
    pub doubling_constant: f64,
    pub doubling_witness: f64,
    pub doubling_ok: bool,
    pub tail_blocks: Vec<f64>,
    pub tail_block_ratio: f64,
    pub tail_block_exponent: f64,
    pub tail_convergent: bool,
    pub pass: bool,
}

fn slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    (b, my - b * mx)
}

/// Probes `φ ≳ 1 + |x|`, `φ(2x) ≲ φ(x)` and `∫_{|x|>R} 1/φ < ∞` on grids up to `r_probe`.
pub fn weight_admissibility(phi: &Weight, r_probe: f64, grid: &WeightGrid) -> Result<WeightReport> {
    if !(r_probe >= 16.0) || !r_probe.is_finite() {
        return Err(Error::Precondition(format!("probe radius must be >= 16, got {r_probe}")));
    }
    let decades = (r_probe / grid.x_min).log10();
    let n = (decades * grid.points_per_decade as f64).ceil() as usize;
    let xs: Vec<f64> = (0..=n).map(|i| grid.x_min * (r_probe / grid.x_min).powf(i as f64 / n as f64)).collect();
    let last_decade: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] >= r_probe / 10.0).collect();
    let trend = |vals: &[f64]| {
        let lx: Vec<f64> = last_decade.iter().map(|&i| xs[i].ln()).collect();
        let ly: Vec<f64> = last_decade.iter().map(|&i| vals[i].ln()).collect();
        slope(&lx, &ly).0
    };

    let both = |x: f64| [phi.eval(x), phi.eval(-x)];
    let lower: Vec<f64> = xs.iter().map(|&x| both(x).iter().fold(f64::INFINITY, |m, v| m.min(*v)) / (1.0 + x)).collect();
    let (li, lmin) = lower.iter().enumerate().fold((0, f64::INFINITY), |(bi, bm), (i, &v)| if v < bm { (i, v) } else { (bi, bm) });
    let lower_ok = lmin > 0.0 && lmin.is_finite() && trend(&lower) >= -grid.trend_tol;

    let doubling: Vec<f64> = xs
        .iter()
        .map(|&x| (phi.eval(2.0 * x) / phi.eval(x)).max(phi.eval(-2.0 * x) / phi.eval(-x)))
        .collect();
    let (di, dmax) = doubling.iter().enumerate().fold((0, 0.0), |(bi, bm), (i, &v)| if v > bm { (i, v) } else { (bi, bm) });
    let doubling_ok = dmax.is_finite() && trend(&doubling) <= grid.trend_tol;

    let j_max = r_probe.log2().floor() as i32;
    let blocks: Vec<f64> = (0..j_max)
        .map(|j| {
            let (a, b) = (2f64.powi(j), 2f64.powi(j + 1));
            integrate_real(|x| 1.0 / phi.eval(x) + 1.0 / phi.eval(-x), a, b, 1e-12, NUMERIC_DEPTH).0
        })
        .collect();
    let tail = &blocks[blocks.len() / 2..];
    let ratio = tail.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let idx: Vec<f64> = (blocks.len() / 2..blocks.len()).map(|j| (j as f64).max(1.0).ln()).collect();
    let lb: Vec<f64> = tail.iter().map(|b| b.ln()).collect();
    let exponent = -slope(&idx, &lb).0;
    let tail_convergent = ratio <= grid.geometric_ratio || exponent >= grid.min_block_exponent;

    Ok(WeightReport {
        weight: phi.name(),
        r_probe,
        lower_ratio_min: lmin,
        lower_ratio_witness: xs[li],
        lower_ok,
        doubling_constant: dmax,
        doubling_witness: xs[di],
        doubling_ok,
        tail_blocks: blocks,
        tail_block_ratio: ratio,
        tail_block_exponent: exponent,
        tail_convergent,
        pass: lower_ok && doubling_ok && tail_convergent,
    })
}
