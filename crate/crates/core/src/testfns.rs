//! Step functions, smooth bumps and the two truncated counterexample series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step function: `values[i]` on `(breakpoints[i], breakpoints[i + 1])`, zero
/// outside `[breakpoints[0], breakpoints[n]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepRepr", into = "StepRepr")]
pub struct PiecewiseConstantFn {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StepRepr {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<StepRepr> for PiecewiseConstantFn {
    type Error = Error;
    fn try_from(r: StepRepr) -> Result<Self> {
        Self::new(r.breakpoints, r.values)
    }
}

impl From<PiecewiseConstantFn> for StepRepr {
    fn from(f: PiecewiseConstantFn) -> Self {
        StepRepr { breakpoints: f.breakpoints, values: f.values }
    }
}

impl PiecewiseConstantFn {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || values.len() + 1 != breakpoints.len() {
            return Err(Error::Config(format!(
                "step function needs n+1 breakpoints for n values (got {} and {})",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Config("step function data must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("breakpoints must be strictly increasing".into()));
        }
        Ok(Self { breakpoints, values })
    }

    /// Sum of weighted indicators `v·χ_(a,b)`; overlapping pieces add.
    pub fn from_pieces(pieces: &[(f64, f64, f64)]) -> Result<Self> {
        let mut pts: Vec<f64> = pieces.iter().flat_map(|&(a, b, _)| [a, b]).collect();
        if pieces.iter().any(|&(a, b, _)| !(a < b)) {
            return Err(Error::Config("piece endpoints must satisfy a < b".into()));
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        if pts.len() < 2 {
            return Err(Error::Config("no pieces".into()));
        }
        let values = pts
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                pieces.iter().filter(|&&(a, b, _)| a < m && m < b).map(|p| p.2).sum::<f64>() + 0.0
            })
            .collect();
        Self::new(pts, values).map(Self::merged)
    }

    /// Drops breakpoints separating equal values.
    fn merged(self) -> Self {
        let mut bps = vec![self.breakpoints[0]];
        let mut vals: Vec<f64> = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            if vals.last() == Some(&v) {
                *bps.last_mut().unwrap() = self.breakpoints[i + 1];
            } else {
                vals.push(v);
                bps.push(self.breakpoints[i + 1]);
            }
        }
        Self { breakpoints: bps, values: vals }
    }

    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![1.0])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints.windows(2).zip(&self.values).map(|(w, &v)| (w[0], w[1], v))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let bp = &self.breakpoints;
        if t < bp[0] || t > bp[bp.len() - 1] {
            return 0.0;
        }
        let i = bp.partition_point(|&b| b <= t);
        if i == 0 || i > self.values.len() {
            return 0.0;
        }
        self.values[i - 1]
    }

    pub fn l1_norm(&self) -> f64 {
        self.intervals().map(|(a, b, v)| v.abs() * (b - a)).sum()
    }

    pub fn integral(&self) -> f64 {
        self.intervals().map(|(a, b, v)| v * (b - a)).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn support_radius(&self) -> f64 {
        self.breakpoints[0].abs().max(self.breakpoints[self.breakpoints.len() - 1].abs())
    }

    /// `∫_a^b |f|`.
    pub fn abs_mass(&self, a: f64, b: f64) -> f64 {
        self.intervals()
            .map(|(lo, hi, v)| v.abs() * (hi.min(b) - lo.max(a)).max(0.0))
            .sum()
    }

    /// `sup |f|` over `(a, b)`.
    pub fn sup_abs_on(&self, a: f64, b: f64) -> f64 {
        self.intervals()
            .filter(|&(lo, hi, _)| lo < b && hi > a)
            .fold(0.0, |m, (_, _, v)| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { breakpoints: self.breakpoints.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn translated(&self, b: f64) -> Self {
        Self { breakpoints: self.breakpoints.iter().map(|t| t + b).collect(), values: self.values.clone() }
    }

    pub fn abs(&self) -> Self {
        Self { breakpoints: self.breakpoints.clone(), values: self.values.iter().map(|v| v.abs()).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let pieces: Vec<_> = self.intervals().chain(other.intervals()).collect();
        Self::from_pieces(&pieces).expect("sum of valid step functions is valid")
    }
}

/// `f(t) = h (1 - u²)²` for `|u| ≤ 1`, `u = (t - c)/s`; a C¹ bump with
/// closed-form norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothTestFn {
    pub center: f64,
    pub scale: f64,
    pub height: f64,
}

impl SmoothTestFn {
    pub fn support(&self) -> (f64, f64) {
        (self.center - self.scale, self.center + self.scale)
    }

    pub fn support_radius(&self) -> f64 {
        self.center.abs() + self.scale
    }

    pub fn eval(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.scale;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let w = 1.0 - u * u;
        self.height * w * w
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.scale;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        -4.0 * self.height * u * (1.0 - u * u) / self.scale
    }

    pub fn l1_norm(&self) -> f64 {
        16.0 * self.height.abs() * self.scale / 15.0
    }

    pub fn integral(&self) -> f64 {
        16.0 * self.height * self.scale / 15.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.height.abs()
    }

    pub fn l2_norm(&self) -> f64 {
        (256.0 * self.height * self.height * self.scale / 315.0).sqrt()
    }

    /// `‖f'‖_p` for `p ∈ {1, 2, ∞}`; `None` otherwise.
    pub fn deriv_norm_closed(&self, p: f64) -> Option<f64> {
        let h = self.height.abs();
        let s = self.scale;
        if p == 1.0 {
            Some(2.0 * h)
        } else if p == 2.0 {
            Some((256.0 * h * h / (105.0 * s)).sqrt())
        } else if p.is_infinite() {
            Some(8.0 * h / (3.0 * 3f64.sqrt() * s))
        } else {
            None
        }
    }

    /// Antiderivative of `(1 - u²)²` in `u`.
    fn profile_primitive(u: f64) -> f64 {
        let u = u.clamp(-1.0, 1.0);
        u - 2.0 * u.powi(3) / 3.0 + u.powi(5) / 5.0
    }

    pub fn abs_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let ua = (a - self.center) / self.scale;
        let ub = (b - self.center) / self.scale;
        self.height.abs() * self.scale * (Self::profile_primitive(ub) - Self::profile_primitive(ua))
    }

    pub fn sup_abs_on(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.support();
        let (a, b) = (a.max(lo), b.min(hi));
        if a >= b {
            return 0.0;
        }
        let t = self.center.clamp(a, b);
        self.eval(t).abs()
    }

    pub fn deriv_sup_on(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.support();
        let (a, b) = (a.max(lo), b.min(hi));
        if a >= b {
            return 0.0;
        }
        let peak = self.scale / 3f64.sqrt();
        [a, b, self.center - peak, self.center + peak]
            .into_iter()
            .filter(|t| (a..=b).contains(t))
            .map(|t| self.deriv(t).abs())
            .fold(0.0, f64::max)
    }

    /// Polynomial coefficients (ascending powers of `t`) of `h (1 - ((t-c)/s)²)²`.
    pub fn polynomial(&self) -> [f64; 5] {
        let (c, s, h) = (self.center, self.scale, self.height);
        let s2 = s * s;
        // 1 - u² = q0 + q1 t + q2 t²
        let q = [1.0 - c * c / s2, 2.0 * c / s2, -1.0 / s2];
        let mut p = [0.0; 5];
        for i in 0..3 {
            for j in 0..3 {
                p[i + j] += h * q[i] * q[j];
            }
        }
        p
    }
}

/// Test function accepted by the quadrature and maximal modules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TestFn {
    Step(PiecewiseConstantFn),
    Bump(SmoothTestFn),
}

/// A maximal interval on which the function is constant (`Some(v)`) or smooth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    pub constant: Option<f64>,
}

impl TestFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TestFn::Step(f) => f.eval(t),
            TestFn::Bump(f) => f.eval(t),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            TestFn::Step(f) => (f.breakpoints[0], f.breakpoints[f.breakpoints.len() - 1]),
            TestFn::Bump(f) => f.support(),
        }
    }

    pub fn support_radius(&self) -> f64 {
        match self {
            TestFn::Step(f) => f.support_radius(),
            TestFn::Bump(f) => f.support_radius(),
        }
    }

    /// Nonzero pieces in increasing order.
    pub fn pieces(&self) -> Vec<Piece> {
        match self {
            TestFn::Step(f) => f
                .intervals()
                .filter(|&(_, _, v)| v != 0.0)
                .map(|(a, b, v)| Piece { a, b, constant: Some(v) })
                .collect(),
            TestFn::Bump(f) => {
                let (a, b) = f.support();
                if f.height == 0.0 {
                    vec![]
                } else {
                    vec![Piece { a, b, constant: None }]
                }
            }
        }
    }

    /// Points where `f` or `f'` may jump.
    pub fn structural_points(&self) -> Vec<f64> {
        match self {
            TestFn::Step(f) => f.breakpoints.clone(),
            TestFn::Bump(f) => {
                let (a, b) = f.support();
                vec![a, b]
            }
        }
    }

    pub fn l1_norm(&self) -> f64 {
        match self {
            TestFn::Step(f) => f.l1_norm(),
            TestFn::Bump(f) => f.l1_norm(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            TestFn::Step(f) => f.sup_norm(),
            TestFn::Bump(f) => f.sup_norm(),
        }
    }

    pub fn abs_mass(&self, a: f64, b: f64) -> f64 {
        match self {
            TestFn::Step(f) => f.abs_mass(a, b),
            TestFn::Bump(f) => f.abs_mass(a, b),
        }
    }

    pub fn sup_abs_on(&self, a: f64, b: f64) -> f64 {
        match self {
            TestFn::Step(f) => f.sup_abs_on(a, b),
            TestFn::Bump(f) => f.sup_abs_on(a, b),
        }
    }

    /// `sup |f'|` over the open interval `(a, b)`; zero on step interiors.
    pub fn deriv_sup_on(&self, a: f64, b: f64) -> f64 {
        match self {
            TestFn::Step(_) => 0.0,
            TestFn::Bump(f) => f.deriv_sup_on(a, b),
        }
    }

    pub fn is_step(&self) -> bool {
        matches!(self, TestFn::Step(_))
    }
}

impl From<PiecewiseConstantFn> for TestFn {
    fn from(f: PiecewiseConstantFn) -> Self {
        TestFn::Step(f)
    }
}

impl From<SmoothTestFn> for TestFn {
    fn from(f: SmoothTestFn) -> Self {
        TestFn::Bump(f)
    }
}

/// Odd atom `(1/2β)(χ_[0,β] - χ_[-β,0])`.
pub fn atom_fbeta(beta: f64) -> Result<PiecewiseConstantFn> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Config(format!("atom scale must be positive, got {beta}")));
    }
    let v = 1.0 / (2.0 * beta);
    PiecewiseConstantFn::new(vec![-beta, 0.0, beta], vec![-v, v])
}

/// Indicator of `[-β, β]`.
pub fn char_fn(beta: f64) -> Result<PiecewiseConstantFn> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Config(format!("half-width must be positive, got {beta}")));
    }
    PiecewiseConstantFn::indicator(-beta, beta)
}

pub fn smooth_bump(center: f64, scale: f64, height: f64) -> Result<SmoothTestFn> {
    if !(scale > 0.0) || !scale.is_finite() || !center.is_finite() || !height.is_finite() {
        return Err(Error::Config(format!("invalid bump ({center}, {scale}, {height})")));
    }
    Ok(SmoothTestFn { center, scale, height })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CounterexampleVariant {
    Part1,
    Part2,
}

/// One translated atom of a counterexample series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleTerm {
    pub index: usize,
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
    /// Coefficient of the term in the atomic decomposition.
    pub h1_coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    pub variant: CounterexampleVariant,
    pub count: usize,
    pub terms: Vec<CounterexampleTerm>,
    /// `Σ` of atomic coefficients: an upper bound for the H¹ norm.
    pub h1_bound: f64,
    /// Index pairs of terms whose supports intersect.
    pub overlaps: Vec<(usize, usize)>,
}

fn log2p1(k: usize) -> f64 {
    ((k + 1) as f64).ln().powi(2)
}

fn overlaps(terms: &[CounterexampleTerm]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            if (a.center - b.center).abs() < a.half_width + b.half_width {
                out.push((a.index, b.index));
            }
        }
    }
    out
}

fn assemble(
    variant: CounterexampleVariant,
    terms: Vec<CounterexampleTerm>,
) -> Result<(PiecewiseConstantFn, CounterexampleSpec)> {
    let pieces: Vec<_> = terms
        .iter()
        .flat_map(|t| {
            [
                (t.center - t.half_width, t.center, -t.amplitude),
                (t.center, t.center + t.half_width, t.amplitude),
            ]
        })
        .collect();
    let f = PiecewiseConstantFn::from_pieces(&pieces)?;
    let spec = CounterexampleSpec {
        variant,
        count: terms.len(),
        h1_bound: terms.iter().map(|t| t.h1_coeff).sum(),
        overlaps: overlaps(&terms),
        terms,
    };
    Ok((f, spec))
}

/// `Σ_{k≤K} h_k(· - k²)` with `h_k = χ_[0,w_k] - χ_[-w_k,0]`,
/// `w_k = 1/(k log²(k+1))`.
pub fn counterexample_part1(k_max: usize) -> Result<(PiecewiseConstantFn, CounterexampleSpec)> {
    if k_max == 0 {
        return Err(Error::Config("need K >= 1".into()));
    }
    let terms = (1..=k_max)
        .map(|k| {
            let n = k as f64 * log2p1(k);
            CounterexampleTerm {
                index: k,
                center: (k * k) as f64,
                half_width: 1.0 / n,
                // (2/n)·(n/2)
                amplitude: 1.0,
                h1_coeff: 1.0 / n,
            }
        })
        .collect();
    assemble(CounterexampleVariant::Part1, terms)
}

/// `β_n = 1/(n log²(n+1))`.
pub fn part2_beta(n: usize) -> f64 {
    1.0 / (n as f64 * log2p1(n))
}

/// `Σ_{n≤N} β_n f_{β_n}(· - 2^{2^n})`.
pub fn counterexample_part2(n_max: usize) -> Result<(PiecewiseConstantFn, CounterexampleSpec)> {
    if !(1..=4).contains(&n_max) {
        return Err(Error::Config(format!("part-2 truncation must be in 1..=4, got {n_max}")));
    }
    let terms = (1..=n_max)
        .map(|n| {
            let beta = part2_beta(n);
            CounterexampleTerm {
                index: n,
                center: 2f64.powi(1 << n),
                half_width: beta,
                amplitude: beta / (2.0 * beta),
                h1_coeff: beta,
            }
        })
        .collect();
    assemble(CounterexampleVariant::Part2, terms)
}
