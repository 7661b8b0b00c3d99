use num_complex::Complex64;
use proptest::prelude::*;

use oscimax::experiments::lemmas::brute_tails;
use oscimax::experiments::{Params, Row, Verdict};
use oscimax::gauss::integrate_real;
use oscimax::maximal::{maximal_value, MCut, SearchConfig};
use oscimax::norms::{hl_maximal_exact, weighted_l1};
use oscimax::oscquad::{ibp_tail_bound, osc_integral};
use oscimax::phase::{
    binom_series_tail, eval_phase, modified_amplitude_phase, phase_dt, rigorous_derivative_sup_bound, Coeff,
    Phase,
};
use oscimax::testfns::{counterexample_part1, PiecewiseConstantFn, TestFn};

const TOL: f64 = 1e-10;

fn fast_search() -> SearchConfig {
    SearchConfig { points_per_decade: 32, m_cut: MCut::Value(1.0), ..SearchConfig::default() }
}

prop_compose! {
    fn step_fn(max_pieces: usize, lo: f64, hi: f64)
        (n in 1..=max_pieces)
        (cuts in proptest::collection::vec(lo..hi, n + 1),
         values in proptest::collection::vec(-2.0f64..2.0, n))
        -> PiecewiseConstantFn
    {
        let mut cuts = cuts;
        cuts.sort_by(f64::total_cmp);
        for i in 1..cuts.len() {
            if cuts[i] <= cuts[i - 1] + 1e-3 {
                cuts[i] = cuts[i - 1] + 1e-3;
            }
        }
        PiecewiseConstantFn::new(cuts, values).unwrap()
    }
}

fn phase_family() -> impl Strategy<Value = Phase> {
    prop_oneof![
        (0.1f64..3.0).prop_map(|a| Phase::quadratic_constant(a).unwrap()),
        (-1.0f64..1.0).prop_map(|c| Phase::laurent(&[(2, c), (3, 0.3)]).unwrap()),
        (0.2f64..2.0, 2.0f64..3.5).prop_map(|(c, d)| Phase::curved_constant(&[(c, d)]).unwrap()),
    ]
}

/// Composite Simpson on `[a, b]` for a smooth complex integrand.
fn simpson(g: &dyn Fn(f64) -> Complex64, a: f64, b: f64, n: usize) -> Complex64 {
    let h = (b - a) / n as f64;
    let mut acc = g(a) + g(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += g(a + i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// Piecewise Simpson oracle with a halving-based stability estimate.
fn brute_osc(f: &PiecewiseConstantFn, phase: &Phase, x: f64, a: f64, b: f64, n: usize) -> (Complex64, f64) {
    let mut coarse = Complex64::new(0.0, 0.0);
    let mut fine = Complex64::new(0.0, 0.0);
    for (lo, hi, v) in f.intervals() {
        let (lo, hi) = (lo.max(a), hi.min(b));
        if lo >= hi || v == 0.0 {
            continue;
        }
        let g = |t: f64| Complex64::from_polar(v, eval_phase(phase, x, x - t).unwrap());
        coarse += simpson(&g, lo, hi, n);
        fine += simpson(&g, lo, hi, 2 * n);
    }
    (fine, (fine - coarse).norm())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn binomial_consistency(k in 2u32..7, x in 1.0f64..10.0, rho in -0.9f64..0.9) {
        let t = rho * x;
        prop_assume!(t != 0.0);
        let phase = Phase::curved_constant(&[(1.0, k as f64)]).unwrap();
        let (value, tail) = modified_amplitude_phase(&phase, x, t, k).unwrap();
        prop_assert_eq!(tail, 0.0);
        let kf = k as f64;
        let expansion = x.powi(k as i32) - kf * t * x.powi(k as i32 - 1) + value;
        let exact = eval_phase(&phase, x, x - t).unwrap();
        prop_assert!((expansion - exact).abs() <= 1e-12 * x.powi(k as i32) * 2f64.powi(k as i32));
    }

    #[test]
    fn expansion_identity(c in 0.1f64..2.0, d in 2.0f64..4.5, x in 0.5f64..20.0, rho in -0.9f64..0.9, big_l in 4u32..30) {
        let t = rho * x;
        prop_assume!(t != 0.0);
        let phase = Phase::curved_constant(&[(c, d)]).unwrap();
        prop_assume!((big_l as f64) >= d.floor() + 2.0);
        let (value, tail) = modified_amplitude_phase(&phase, x, t, big_l).unwrap();
        let lhs = c * (x - t).abs().powf(d);
        let rhs = c * x.powf(d) - c * d * t * x.powf(d - 1.0) + value;
        let rounding = 1e-12 * c * x.powf(d) * 2f64.powf(d) * big_l as f64;
        prop_assert!((lhs - rhs).abs() <= tail + rounding, "|{lhs} - {rhs}| > {tail}");
    }

    #[test]
    fn rigorous_derivative_bound_dominates(
        coeffs in proptest::collection::vec(-2.0f64..2.0, 7),
        x_lo in 2.0f64..5.0,
        span in 0.0f64..5.0,
        beta in 0.0f64..1.0,
    ) {
        let terms: Vec<(i32, f64)> = coeffs.iter().enumerate().map(|(i, &c)| (i as i32 - 3, c)).collect();
        let phase = Phase::laurent(&terms).unwrap();
        let x_hi = x_lo + span;
        let bound = rigorous_derivative_sup_bound(&phase, x_lo, x_hi, beta).unwrap();
        let (u_lo, n) = (x_lo - beta, 2000);
        let dense = (0..=n)
            .map(|i| u_lo + (x_hi - u_lo) * i as f64 / n as f64)
            .map(|u| phase_dt(&phase, 0.0, u).unwrap().abs())
            .fold(0.0, f64::max);
        prop_assert!(bound - dense >= -1e-12 * bound.max(1.0), "{bound} < {dense}");
    }

    #[test]
    fn series_tail_monotone_and_dominating(k in 2.0f64..6.0) {
        let l_max = 40;
        let first = k.floor() as u32 + 2;
        let brute = brute_tails(k, l_max, 200_000);
        let mut prev = f64::INFINITY;
        for l in first..=l_max {
            let bound = binom_series_tail(k, l).unwrap();
            prop_assert!(bound <= prev);
            prop_assert!(brute[l as usize] <= bound * (1.0 + 1e-12) + 1e-300);
            prev = bound;
        }
    }

    #[test]
    fn osc_integral_matches_brute_oracle(
        f in step_fn(4, -2.0, 2.0),
        phase in phase_family(),
        x in -3.0f64..3.0,
        a in -3.0f64..0.0,
        len in 0.5f64..4.0,
    ) {
        let b = a + len;
        prop_assume!(!(phase.has_negative_powers()));
        let q = osc_integral(&TestFn::from(f.clone()), &phase, x, a, b, TOL).unwrap();
        let (oracle, stability) = brute_osc(&f, &phase, x, a, b, 4000);
        let diff = (q.value - oracle).norm();
        let allowed = (TOL * len).max(stability) + q.abs_error_estimate + 1e-6 * oracle.norm().max(1e-3);
        prop_assert!(diff <= allowed, "{diff} > {allowed}");
    }

    #[test]
    fn osc_integral_is_linear(
        f in step_fn(4, -2.0, 2.0),
        g in step_fn(4, -2.0, 2.0),
        phase in phase_family(),
        x in -2.0f64..2.0,
    ) {
        let (ff, gg) = (TestFn::from(f.clone()), TestFn::from(g.clone()));
        let sum = TestFn::from(f.add(&g));
        let qf = osc_integral(&ff, &phase, x, -2.5, 2.5, TOL).unwrap();
        let qg = osc_integral(&gg, &phase, x, -2.5, 2.5, TOL).unwrap();
        let qs = osc_integral(&sum, &phase, x, -2.5, 2.5, TOL).unwrap();
        let diff = (qs.value - qf.value - qg.value).norm();
        let allowed = qs.abs_error_estimate + qf.abs_error_estimate + qg.abs_error_estimate + 1e-12;
        prop_assert!(diff <= allowed, "{diff} > {allowed}");
    }

    #[test]
    fn negated_phase_conjugates(f in step_fn(4, -2.0, 2.0), a in 0.1f64..3.0, x in -2.0f64..2.0) {
        let tf = TestFn::from(f);
        let plus = Phase::quadratic_constant(a).unwrap();
        let minus = Phase::quadratic_constant(-a).unwrap();
        let qp = osc_integral(&tf, &plus, x, -2.5, 2.5, TOL).unwrap();
        let qm = osc_integral(&tf, &minus, x, -2.5, 2.5, TOL).unwrap();
        let diff = (qp.value.conj() - qm.value).norm();
        prop_assert!(diff <= qp.abs_error_estimate + qm.abs_error_estimate + 1e-12);
    }

    #[test]
    fn ibp_bound_dominates(a in 0.5f64..20.0, len in 0.1f64..10.0, cubic in proptest::bool::ANY) {
        let phase = if cubic {
            Phase::laurent(&[(3, 1.0)]).unwrap()
        } else {
            Phase::quadratic_constant(1.0).unwrap()
        };
        let b = a + len;
        let bound = ibp_tail_bound(&phase, a, b).unwrap();
        let one = TestFn::from(PiecewiseConstantFn::indicator(a, b).unwrap());
        // x = 0 so that γ(x, x - t) = γ(-t); the integral of e^{iγ(-t)} over [-b, -a]
        let q = osc_integral(&one, &phase, 0.0, a, b, TOL).unwrap();
        let mirrored = TestFn::from(PiecewiseConstantFn::indicator(-b, -a).unwrap());
        let qm = osc_integral(&mirrored, &phase, 0.0, -b, -a, TOL).unwrap();
        prop_assert!(qm.value.norm() <= bound + qm.abs_error_estimate);
        prop_assert!(q.value.norm() <= bound + q.abs_error_estimate);
    }

    #[test]
    fn step_norms_match_quadrature(f in step_fn(6, -5.0, 5.0)) {
        let (lo, hi) = (f.breakpoints()[0], *f.breakpoints().last().unwrap());
        let numeric: f64 = f
            .intervals()
            .map(|(a, b, _)| integrate_real(|t| f.eval(t).abs(), a, b, 1e-13, 30).0)
            .sum();
        prop_assert!((numeric - f.l1_norm()).abs() <= 1e-9 * f.l1_norm().max(1.0));
        prop_assert_eq!(f.support_radius(), lo.abs().max(hi.abs()));
        let signed: f64 = f.intervals().map(|(a, b, v)| v * (b - a)).sum();
        prop_assert!((signed - f.integral()).abs() <= 1e-12 * f.l1_norm().max(1.0));
    }

    #[test]
    fn weighted_l1_structure(f in step_fn(5, 1.0, 6.0), mirror in proptest::bool::ANY, l1 in 0.0f64..2.0, dl in 0.0f64..1.0) {
        let f = if mirror { f.translated(-7.0) } else { f };
        let tf = TestFn::from(f.clone());
        let at_zero = weighted_l1(&tf, 0.0).unwrap().value;
        prop_assert!((at_zero - 2.0 * f.l1_norm()).abs() <= 1e-12 * f.l1_norm().max(1.0));
        let low = weighted_l1(&tf, l1).unwrap();
        let high = weighted_l1(&tf, l1 + dl).unwrap();
        prop_assert!(high.value + high.err + 1e-12 >= low.value - low.err);
    }

    #[test]
    fn verdict_rule(margin in -1.0f64..1.0, err in 0.0f64..0.5) {
        let row = Row::upper("s", Params::new(), 1.0 - margin, 1.0, err);
        let expected = if row.margin > err {
            Verdict::Pass
        } else if row.margin < -err {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        };
        prop_assert_eq!(row.verdict, expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn hl_exact_matches_dense_radius_scan(f in step_fn(6, -5.0, 5.0), x in -6.0f64..6.0) {
        let exact = hl_maximal_exact(&f, x);
        let dists: Vec<f64> = f.breakpoints().iter().map(|b| (x - b).abs()).filter(|&d| d > 0.0).collect();
        let r_lo = dists.iter().cloned().fold(f64::INFINITY, f64::min) * 1e-3;
        let r_hi = dists.iter().cloned().fold(0.0, f64::max) * 2.0;
        let n = 10_000;
        let ratio = (r_hi / r_lo).powf(1.0 / (n - 1) as f64);
        let brute = (0..n)
            .map(|i| r_lo * ratio.powi(i))
            .map(|r| f.abs_mass(x - r, x + r) / (2.0 * r))
            .fold(0.0, f64::max);
        prop_assert!(brute <= exact * (1.0 + 1e-9) + 1e-15);
        // past the maximizing radius the average decays no faster than r*/r
        prop_assert!(exact - brute <= (ratio - 1.0) * exact + 1e-12, "{exact} vs {brute}");
    }

    #[test]
    fn zero_phase_reduces_to_hardy_littlewood(f in step_fn(5, -3.0, 3.0), x in -5.0f64..5.0) {
        let s = maximal_value(&TestFn::from(f.abs()), &Phase::zero(), x, &fast_search()).unwrap();
        let exact = hl_maximal_exact(&f, x);
        prop_assert!((s.value - exact).abs() <= s.err.max(1e-6), "{} vs {exact}, err {}", s.value, s.err);
    }

    #[test]
    fn domination_by_hardy_littlewood(f in step_fn(4, -3.0, 3.0), phase in phase_family(), x in -5.0f64..5.0) {
        let s = maximal_value(&TestFn::from(f.clone()), &phase, x, &fast_search()).unwrap();
        prop_assert!(s.value <= hl_maximal_exact(&f, x) + s.err + 1e-12);
    }

    #[test]
    fn sublinear(f in step_fn(3, -3.0, 3.0), g in step_fn(3, -3.0, 3.0), phase in phase_family(), x in -4.0f64..4.0) {
        let cfg = fast_search();
        let mf = maximal_value(&TestFn::from(f.clone()), &phase, x, &cfg).unwrap();
        let mg = maximal_value(&TestFn::from(g.clone()), &phase, x, &cfg).unwrap();
        let ms = maximal_value(&TestFn::from(f.add(&g)), &phase, x, &cfg).unwrap();
        prop_assert!(ms.value <= mf.value + mg.value + ms.err + mf.err + mg.err + 1e-12);
    }

    #[test]
    fn translation_covariant(f in step_fn(3, -2.0, 2.0), a in 0.2f64..2.0, b in -5.0f64..5.0, x in -4.0f64..4.0) {
        let phase = Phase::quadratic_constant(a).unwrap();
        let cfg = fast_search();
        let moved = maximal_value(&TestFn::from(f.translated(b)), &phase, x + b, &cfg).unwrap();
        let base = maximal_value(&TestFn::from(f), &phase, x, &cfg).unwrap();
        prop_assert!((moved.value - base.value).abs() <= moved.err + base.err + 1e-9);
    }

    #[test]
    fn grid_refinement_stable(f in step_fn(3, -2.0, 2.0), phase in phase_family(), x in -4.0f64..4.0) {
        let tf = TestFn::from(f);
        let coarse = maximal_value(&tf, &phase, x, &fast_search()).unwrap();
        let fine = maximal_value(&tf, &phase, x, &SearchConfig { points_per_decade: 64, ..fast_search() }).unwrap();
        prop_assert!((coarse.value - fine.value).abs() <= 2.0 * coarse.err.max(fine.err) + 1e-12);
    }
}

#[test]
fn part1_atomic_sums_increase_and_stay_bounded() {
    let (_, spec) = counterexample_part1(2000).unwrap();
    let mut partial = 0.0;
    for term in &spec.terms {
        let next = partial + term.h1_coeff;
        assert!(next > partial);
        partial = next;
    }
    // Σ_{k>10} 1/(k ln²(k+1)) ≤ ∫_10^∞ dt/(t ln² t)
    let k = spec.terms.len();
    let head: f64 = spec.terms.iter().take(10).map(|t| t.h1_coeff).sum();
    assert!(partial <= head + 1.0 / (10f64).ln());
    assert!((partial - spec.h1_bound).abs() < 1e-12);
    assert_eq!(k, 2000);
}

#[test]
fn part1_supports_are_reported() {
    let (_, spec) = counterexample_part1(100).unwrap();
    for w in spec.terms.windows(2) {
        assert!(w[0].center < w[1].center);
    }
    let observed: Vec<_> = spec
        .terms
        .iter()
        .enumerate()
        .flat_map(|(i, a)| spec.terms[i + 1..].iter().map(move |b| (a, b)))
        .filter(|(a, b)| (a.center - b.center).abs() < a.half_width + b.half_width)
        .map(|(a, b)| (a.index, b.index))
        .collect();
    assert_eq!(observed, spec.overlaps);
}

#[test]
fn coefficient_bounds_are_declared_not_sampled() {
    let c = Coeff::constant(-2.0);
    assert_eq!(c.eval(123.0), -2.0);
    let phase = Phase::quadratic(c).unwrap();
    assert!(phase.check_bounds(&[0.0, 1.0, 5.0]).is_ok());
}
