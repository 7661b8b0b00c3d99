//! Zero-phase search against the exact Hardy–Littlewood maximal function, and
//! domination `M_γ f ≤ M f` under oscillatory phases, on random step functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{par_map, ExperimentReport, Params, Row};
use crate::error::{Error, Result};
use crate::maximal::{maximal_value, MCut, SearchConfig};
use crate::norms::hl_maximal_exact;
use crate::phase::Phase;
use crate::testfns::{PiecewiseConstantFn, TestFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub seed: u64,
    pub functions: usize,
    pub points: usize,
    pub max_pieces: usize,
    /// Functions (a prefix of the corpus) also checked under `phases`.
    pub domination_functions: usize,
    pub phases: Vec<Phase>,
    /// Absolute floor of the zero-phase tolerance.
    pub abs_tol: f64,
    pub search: SearchConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            functions: 100,
            points: 50,
            max_pieces: 8,
            domination_functions: 20,
            phases: vec![
                Phase::laurent(&[(2, 1.0)]).expect("valid phase"),
                Phase::laurent(&[(3, 1.0)]).expect("valid phase"),
                Phase::quadratic_constant(1.0).expect("valid phase"),
                Phase::curved_constant(&[(1.0, 2.5)]).expect("valid phase"),
            ],
            abs_tol: 1e-6,
            search: SearchConfig { m_cut: MCut::Value(1.0), ..SearchConfig::default() },
        }
    }
}

/// Random step function on `[-5, 5]` with `1..=max_pieces` pieces and values in `[-3, 3]`.
pub fn random_step(rng: &mut ChaCha8Rng, max_pieces: usize) -> Result<PiecewiseConstantFn> {
    let n = rng.gen_range(1..=max_pieces);
    let mut bps: Vec<f64> = (0..=n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    if bps.len() < 2 {
        bps = vec![-1.0, 1.0];
    }
    let values = (1..bps.len()).map(|_| rng.gen_range(-3.0..3.0)).collect();
    PiecewiseConstantFn::new(bps, values)
}

struct Case {
    f: PiecewiseConstantFn,
    xs: Vec<f64>,
}

pub fn run(cfg: &OracleConfig) -> Result<ExperimentReport> {
    let start = std::time::Instant::now();
    cfg.search.validate()?;
    if cfg.functions == 0 || cfg.points == 0 || cfg.max_pieces == 0 {
        return Err(Error::Config("functions, points and max_pieces must be positive".into()));
    }
    let mut report = ExperimentReport::new("oracle", cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cases = Vec::new();
    for _ in 0..cfg.functions {
        let f = random_step(&mut rng, cfg.max_pieces)?;
        let xs = (0..cfg.points).map(|_| rng.gen_range(-10.0..10.0)).collect();
        cases.push(Case { f, xs });
    }

    let abs_fns: Vec<TestFn> = cases.iter().map(|c| TestFn::from(c.f.abs())).collect();
    let tasks: Vec<(usize, f64)> =
        cases.iter().enumerate().flat_map(|(i, c)| c.xs.iter().map(move |&x| (i, x))).collect();
    let zero = par_map(&tasks, |&(i, x)| maximal_value(&abs_fns[i], &Phase::Zero, x, &cfg.search))?;
    for (i, c) in cases.iter().enumerate() {
        let s = &zero[i * cfg.points..(i + 1) * cfg.points];
        let (worst, worst_x) = s
            .iter()
            .map(|p| ((p.value - hl_maximal_exact(&c.f, p.x)).abs() - p.err.max(cfg.abs_tol), p.x))
            .fold((f64::NEG_INFINITY, f64::NAN), |a, b| if b.0 > a.0 { b } else { a });
        let p = Params::from([
            ("function".into(), i as f64),
            ("pieces".into(), c.f.values().len() as f64),
            ("worst_x".into(), worst_x),
        ]);
        report.push(Row::upper("zero_phase", p, worst, 0.0, 0.0));
    }

    let signed: Vec<TestFn> = cases.iter().map(|c| TestFn::from(c.f.clone())).collect();
    let n_dom = cfg.domination_functions.min(cases.len());
    let dom_tasks: Vec<(usize, usize, f64)> = (0..cfg.phases.len())
        .flat_map(|pi| tasks[..n_dom * cfg.points].iter().map(move |&(i, x)| (pi, i, x)))
        .collect();
    let dom = par_map(&dom_tasks, |&(pi, i, x)| maximal_value(&signed[i], &cfg.phases[pi], x, &cfg.search))?;
    for pi in 0..cfg.phases.len() {
        for i in 0..n_dom {
            let off = (pi * n_dom + i) * cfg.points;
            let s = &dom[off..off + cfg.points];
            let (worst, worst_x) = s
                .iter()
                .map(|p| (p.value - p.err - hl_maximal_exact(&cases[i].f, p.x), p.x))
                .fold((f64::NEG_INFINITY, f64::NAN), |a, b| if b.0 > a.0 { b } else { a });
            let p = Params::from([("phase".into(), pi as f64), ("function".into(), i as f64), ("worst_x".into(), worst_x)]);
            report.push(Row::upper("domination", p, worst, 0.0, 0.0));
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
    fn corpus_is_seeded() {
        let a = random_step(&mut ChaCha8Rng::seed_from_u64(3), 8).unwrap();
        let b = random_step(&mut ChaCha8Rng::seed_from_u64(3), 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_run_passes() {
        let cfg = OracleConfig { functions: 4, points: 5, domination_functions: 2, ..OracleConfig::default() };
        let r = run(&cfg).unwrap();
        assert_eq!(r.rows_in("zero_phase").count(), 4);
        assert_eq!(r.rows_in("domination").count(), 8);
        assert!(r.rows.iter().all(|row| row.verdict == Verdict::Pass), "{:?}", r.rows);
    }
}
