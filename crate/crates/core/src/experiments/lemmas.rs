//! Auxiliary inequalities: binomial series tails, the `L log L` embedding of
//! `C_{p,0}`, the `L^q` embedding and the local `L log L` bound for `M`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{par_map, ExperimentReport, Params, Row};
use crate::error::{Error, Result};
use crate::norms::{check_embedding_q, check_llogl_lemma, cpl_norm, llogl_norm};
use crate::phase::{binom_series_tail, binomial};
use crate::testfns::{smooth_bump, SmoothTestFn, TestFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaConfig {
    pub seed: u64,
    pub corpus_size: usize,
    pub ks: Vec<f64>,
    pub l_max: u32,
    /// Terms summed by the brute-force tails.
    pub brute_terms: u32,
    pub p: f64,
    pub c_test: f64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            seed: 11,
            corpus_size: 50,
            ks: vec![2.0, 2.5, 3.7, 5.0],
            l_max: 60,
            brute_terms: 1_000_000,
            p: 2.0,
            c_test: 10.0,
        }
    }
}

/// `log(e+1) + log(e+3)`.
pub fn embedding_constant() -> f64 {
    let e = std::f64::consts::E;
    (e + 1.0).ln() + (e + 3.0).ln()
}

/// `Σ_{l=L}^{n} l |C(k, l)|` for every `L ≤ l_max`, summed from the far end.
pub fn brute_tails(k: f64, l_max: u32, n: u32) -> Vec<f64> {
    let mut terms = Vec::with_capacity(n as usize + 1);
    let mut c: f64 = 1.0;
    for l in 0..=n {
        terms.push(l as f64 * c.abs());
        c *= (k - l as f64) / (l as f64 + 1.0);
    }
    let mut tails = vec![0.0; l_max as usize + 1];
    let mut acc = 0.0;
    for l in (0..=n as usize).rev() {
        acc += terms[l];
        if l <= l_max as usize {
            tails[l] = acc;
        }
    }
    tails
}

/// Seeded bumps; odd members are rescaled to a `C_{p,0}` norm in `[0.5, 2]`.
pub fn bump_corpus(seed: u64, n: usize, p: f64) -> Result<Vec<SmoothTestFn>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let c = rng.gen_range(-5.0..5.0);
            let s = rng.gen_range(0.2..3.0);
            let h = rng.gen_range(0.1..3.0);
            let target = rng.gen_range(0.5..2.0);
            let f = smooth_bump(c, s, h)?;
            if i % 2 == 1 {
                let norm = cpl_norm(&TestFn::from(f), p, 0.0)?.expect("bumps have a derivative");
                smooth_bump(c, s, h * target / norm)
            } else {
                Ok(f)
            }
        })
        .collect()
}

pub fn run(cfg: &LemmaConfig) -> Result<ExperimentReport> {
    let start = std::time::Instant::now();
    if cfg.corpus_size == 0 || cfg.ks.is_empty() || !(cfg.p >= 1.0) || !(cfg.c_test > 0.0) {
        return Err(Error::Config("need a nonempty corpus, ks, p >= 1 and c_test > 0".into()));
    }
    if cfg.brute_terms <= cfg.l_max {
        return Err(Error::Config("brute_terms must exceed l_max".into()));
    }
    let mut report = ExperimentReport::new("lemmas", cfg)?;

    for &k in &cfg.ks {
        let tails = brute_tails(k, cfg.l_max, cfg.brute_terms);
        let first = k.floor() as u32 + 2;
        for l in first..=cfg.l_max {
            let bound = binom_series_tail(k, l)?;
            let measured = tails[l as usize];
            let p = Params::from([("k".into(), k), ("L".into(), l as f64)]);
            // integer k: both sides vanish identically
            let row = if bound == 0.0 && measured == 0.0 && binomial(k, l) == 0.0 {
                Row::upper("serie", p, measured, bound, 0.0).exact_tie()
            } else {
                Row::upper("serie", p, measured, bound, 0.0)
            };
            report.push(row);
        }
    }

    let corpus = bump_corpus(cfg.seed, cfg.corpus_size, cfg.p)?;
    let a = embedding_constant();
    let llogl = par_map(&corpus, |f| {
        let s = (f.center - 2.0 * f.scale - 1.0, f.center + 2.0 * f.scale + 1.0);
        check_llogl_lemma(&TestFn::from(*f), s, cfg.c_test)
    })?;
    let mut minimal_c: f64 = 0.0;
    for (i, (f, ll)) in corpus.iter().zip(&llogl).enumerate() {
        let tf = TestFn::from(*f);
        let c0 = cpl_norm(&tf, cfg.p, 0.0)?.expect("bumps have a derivative");
        let base = Params::from([("member".into(), i as f64), ("cp0".into(), c0)]);
        if c0 <= 2.0 {
            let v = llogl_norm(&tf);
            report.push(Row::upper("embedding", base.clone(), v.value, a, v.err));
        }
        for q in [1.0, 2.0, f64::INFINITY] {
            let chk = check_embedding_q(f, cfg.p, q)?;
            let mut p = base.clone();
            p.insert("q".into(), if q.is_infinite() { -1.0 } else { q });
            report.push(Row::upper("proposition", p, chk.lhs, chk.rhs, 0.0));
        }
        let mut p = base.clone();
        p.insert("minimal_c".into(), ll.minimal_c);
        report.push(Row::upper("llogl", p, ll.lhs, ll.rhs, ll.err));
        minimal_c = minimal_c.max(ll.minimal_c);
    }
    report.summary.insert("llogl_minimal_c".into(), minimal_c);
    report.push(Row::info("llogl_minimal_c", Params::new(), minimal_c, 0.0));
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Verdict;

    #[test]
    fn constant_value() {
        assert!((embedding_constant() - 3.056_930_068_146_902).abs() < 1e-12);
        assert!(embedding_constant() <= 3.0585);
    }

    #[test]
    fn brute_tails_match_direct_sum() {
        let t = brute_tails(2.5, 10, 5000);
        let direct: f64 = (4..=5000u32).map(|l| l as f64 * binomial(2.5, l).abs()).sum();
        assert!((t[4] - direct).abs() < 1e-12 * direct.max(1.0));
        assert_eq!(brute_tails(2.0, 10, 100)[4], 0.0);
    }

    #[test]
    fn integer_exponent_rows_are_exact() {
        let cfg = LemmaConfig { corpus_size: 2, ks: vec![2.0], l_max: 8, brute_terms: 100, ..LemmaConfig::default() };
        let r = run(&cfg).unwrap();
        assert!(r.rows_in("serie").all(|row| row.verdict == Verdict::Pass && row.flag == "exact"));
    }
}
