//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use oscimax::experiments::census::weak_constant;
use oscimax::experiments::lemmas::embedding_constant;
use oscimax::experiments::{run_experiment, ExperimentId, ExperimentReport, Row, Verdict};

const EMBEDDING_LIMIT: f64 = 3.0585;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(ok: bool, what: impl Into<String>, failures: &mut Vec<String>) {
    if !ok {
        failures.push(what.into());
    }
}

fn outcome(failures: Vec<String>, detail: String) -> Outcome {
    if failures.is_empty() {
        Outcome { pass: true, detail }
    } else {
        Outcome { pass: false, detail: format!("{detail}; failed: {}", failures.join(", ")) }
    }
}

fn all_pass<'a>(rows: impl Iterator<Item = &'a Row>) -> (usize, bool) {
    let mut n = 0;
    let mut ok = true;
    for r in rows {
        n += 1;
        ok &= r.verdict == Verdict::Pass;
    }
    (n, ok)
}

fn param(r: &Row, key: &str) -> f64 {
    r.params.get(key).copied().unwrap_or(f64::NAN)
}

fn run_in_pool(id: ExperimentId, threads: usize) -> (ExperimentReport, Duration) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
    let start = Instant::now();
    let report = pool.install(|| run_experiment(id, None)).unwrap_or_else(|e| panic!("{}: {e}", id.name()));
    (report, start.elapsed())
}

fn zero_phase_oracle(r: &ExperimentReport, t: Duration) -> Outcome {
    let mut f = Vec::new();
    let (zero, zero_ok) = all_pass(r.rows_in("zero_phase"));
    let (dom, dom_ok) = all_pass(r.rows_in("domination"));
    check(zero == 100, format!("{zero} zero-phase functions"), &mut f);
    check(zero_ok, "zero-phase mismatch beyond max(err, 1e-6)", &mut f);
    check(dom > 0 && dom_ok, "domination violated", &mut f);
    check(t < Duration::from_secs(60), "runtime", &mut f);
    outcome(f, format!("{zero} functions x 50 points, {dom} domination checks, {:.1}s", t.as_secs_f64()))
}

fn pointwise_lower_bound(r: &ExperimentReport, t: Duration) -> Outcome {
    let mut f = Vec::new();
    let c = r.summary.get("c").copied().unwrap_or(f64::NAN);
    check(c == 6.0, format!("c = {c}"), &mut f);
    let mut total = 0;
    for beta in [1e-2, 1e-3, 1e-4] {
        let rows: Vec<&Row> =
            r.rows_in("pointwise").filter(|row| (param(row, "beta") / beta - 1.0).abs() < 1e-9).collect();
        let x_hi = (1.0 / (2.0 * c * beta)).sqrt();
        let in_range = rows.iter().all(|row| {
            let x = param(row, "x");
            x >= 1.0 + beta - 1e-12 && x <= x_hi * (1.0 + 1e-12)
        });
        let (n, ok) = all_pass(rows.iter().copied());
        check(n == 20, format!("beta={beta}: {n} samples"), &mut f);
        check(in_range, format!("beta={beta}: sample outside window"), &mut f);
        check(ok, format!("beta={beta}: value below 1/(8x) - err"), &mut f);
        total += n;
    }
    check(t < Duration::from_secs(600), "runtime", &mut f);
    outcome(f, format!("{total} samples at or above 1/(8x) - err, {:.1}s", t.as_secs_f64()))
}

fn log_growth(r: &ExperimentReport) -> Outcome {
    let mut f = Vec::new();
    let fit = r.fit.expect("logbeta fits a line");
    let decades = r.rows_in("fit_r2").map(|row| param(row, "decades")).next().unwrap_or(0.0);
    check(fit.slope > 0.0, "slope not positive", &mut f);
    check(fit.r2 >= 0.99, "R^2 below 0.99", &mut f);
    check(decades >= 2.5, format!("only {decades} decades"), &mut f);
    outcome(f, format!("slope {:.4}, R^2 {:.6}, {} betas over {decades} decades", fit.slope, fit.r2, fit.n))
}

fn remark_decay(r: &ExperimentReport, t: Duration) -> Outcome {
    let mut f = Vec::new();
    let (n, ok) = all_pass(r.rows_in("pointwise"));
    let xs_ok = r.rows_in("pointwise").all(|row| (2.0..=100.0 + 1e-9).contains(&param(row, "x")));
    check(n == 30, format!("{n} points"), &mut f);
    check(ok, "decay bound exceeded", &mut f);
    check(xs_ok, "x outside [2, 100]", &mut f);
    check(r.count(Verdict::Fail) == 0, "FAIL rows present", &mut f);
    check(t < Duration::from_secs(300), "runtime", &mut f);
    outcome(f, format!("{n} points below the decay law, {} FAIL rows, {:.1}s", r.count(Verdict::Fail), t.as_secs_f64()))
}

fn counterexample_growth(r: &ExperimentReport) -> Outcome {
    let mut f = Vec::new();
    let totals: Vec<&Row> = r.rows_in("total").collect();
    let ks: Vec<f64> = totals.iter().map(|row| param(row, "K")).collect();
    check(ks == [10.0, 50.0, 100.0], format!("K values {ks:?}"), &mut f);
    let (growth, growth_ok) = all_pass(r.rows_in("growth"));
    check(growth == 2 && growth_ok, "window mass not increasing in K", &mut f);
    let (_, spread_ok) = all_pass(r.rows_in("ratio_spread"));
    check(spread_ok, "ratio spread above 20", &mut f);
    let (_, atomic_ok) = all_pass(r.rows_in("atomic_bound"));
    check(atomic_ok, "atomic comparator above its bound", &mut f);
    check(r.count(Verdict::Fail) == 0, "FAIL rows present", &mut f);
    let lo = r.summary.get("ratio_min").copied().unwrap_or(f64::NAN);
    let hi = r.summary.get("ratio_max").copied().unwrap_or(f64::NAN);
    outcome(f, format!("ratio in [{lo:.4}, {hi:.4}], spread {:.3}", hi / lo))
}

fn lemma_suite(r: &ExperimentReport, t: Duration) -> Outcome {
    let mut f = Vec::new();
    let (serie, serie_ok) = all_pass(r.rows_in("serie"));
    let ks: std::collections::BTreeSet<u64> = r.rows_in("serie").map(|row| param(row, "k").to_bits()).collect();
    let l_max = r.rows_in("serie").map(|row| param(row, "L")).fold(0.0, f64::max);
    check(serie_ok && ks.len() == 4 && l_max == 60.0, "serie tails", &mut f);
    let (emb, emb_ok) = all_pass(r.rows_in("embedding"));
    let worst = r.rows_in("embedding").map(|row| row.measured + row.err).fold(0.0, f64::max);
    check(emb > 0 && emb_ok && worst <= EMBEDDING_LIMIT, "embedding", &mut f);
    check(embedding_constant() <= EMBEDDING_LIMIT, "embedding constant", &mut f);
    let (prop, prop_ok) = all_pass(r.rows_in("proposition"));
    check(prop == 150 && prop_ok, format!("proposition ({prop} checks)"), &mut f);
    let (ll, ll_ok) = all_pass(r.rows_in("llogl"));
    check(ll == 50 && ll_ok, "llogl with C = 10", &mut f);
    let min_c = r.summary.get("llogl_minimal_c").copied().unwrap_or(f64::NAN);
    check(min_c.is_finite(), "minimal C not reported", &mut f);
    check(t < Duration::from_secs(120), "runtime", &mut f);
    outcome(
        f,
        format!(
            "{serie} tail checks, {emb} embedding members (max {worst:.4}), {prop} embeddings, minimal C {min_c:.4}, {:.1}s",
            t.as_secs_f64()
        ),
    )
}

fn boundedness_ratio(positive: &ExperimentReport, census: &ExperimentReport, t: Duration) -> Outcome {
    let mut f = Vec::new();
    let mut members: BTreeMap<u64, usize> = BTreeMap::new();
    for row in positive.rows_in("member") {
        check(row.verdict == Verdict::Info && row.measured.is_finite(), "member ratio not finite", &mut f);
        *members.entry(param(row, "phase").to_bits()).or_default() += 1;
    }
    check(members.len() == 2 && members.values().all(|&n| n == 20), format!("corpus sizes {members:?}"), &mut f);
    let (_, spread_ok) = all_pass(positive.rows_in("ratio_spread"));
    check(spread_ok, "max/min ratio above 100", &mut f);
    let (_, div_ok) = all_pass(positive.rows_in("divergence"));
    let flagged = positive.rows.iter().any(|row| row.flag.contains("divergent"));
    check(div_ok && !flagged, "divergence flags", &mut f);
    let c_w = weak_constant();
    check(c_w <= 4.0, "C_w above 4", &mut f);
    let (a3, a3_ok) = all_pass(positive.rows_in("a3_measure").chain(census.rows_in("a3_measure")));
    check(a3_ok, "|A3| above 8 C_w ||(1+|t|^1.5) f||_1", &mut f);
    check(t < Duration::from_secs(1200), "runtime", &mut f);
    let spreads: Vec<String> = positive.rows_in("ratio_spread").map(|row| format!("{:.2}", row.measured)).collect();
    outcome(
        f,
        format!("ratio spreads [{}], {a3} A3 checks with C_w {c_w:.4}, {:.1}s", spreads.join(", "), t.as_secs_f64()),
    )
}

fn weight_admissibility(r: &ExperimentReport, t: Duration) -> Outcome {
    let mut f = Vec::new();
    let tail_flag = |name: &str| {
        r.rows_in("tail").find(|row| row.flag.split(';').next() == Some(name)).map(|row| row.flag.clone())
    };
    let psi2 = r.rows_in("admissible").find(|row| row.flag == "psi_2");
    check(psi2.is_some_and(|row| row.measured == 1.0 && param(row, "r_probe") >= 1e6), "psi_2 not admissible", &mut f);
    check(tail_flag("psi_1").is_some_and(|fl| fl.contains("divergent")), "psi_1 tail not flagged", &mut f);
    check(tail_flag("psi_2").is_some_and(|fl| fl.contains("convergent")), "psi_2 tail flagged", &mut f);
    let (_, ok) = all_pass(r.rows_in("admissible"));
    check(ok, "admissibility expectations", &mut f);
    check(t < Duration::from_secs(60), "runtime", &mut f);
    outcome(f, format!("psi_2 admissible, psi_1 divergent tail, {:.1}s", t.as_secs_f64()))
}

fn main() -> ExitCode {
    let ids = [
        ExperimentId::Oracle,
        ExperimentId::LogBeta,
        ExperimentId::Remark,
        ExperimentId::Counterexample,
        ExperimentId::Lemmas,
        ExperimentId::Positive,
        ExperimentId::Census,
        ExperimentId::Weights,
    ];
    let mut reports: BTreeMap<&str, (ExperimentReport, Duration)> = BTreeMap::new();
    for id in ids {
        reports.insert(id.name(), run_in_pool(id, 1));
    }
    let get = |name: &str| &reports[name];

    let mut outcomes = Vec::new();
    let (r, t) = get("oracle");
    outcomes.push(zero_phase_oracle(r, *t));
    let (r, t) = get("logbeta");
    outcomes.push(pointwise_lower_bound(r, *t));
    outcomes.push(log_growth(r));
    let (r, t) = get("remark");
    outcomes.push(remark_decay(r, *t));
    outcomes.push(counterexample_growth(&get("counterexample").0));
    let (r, t) = get("lemmas");
    outcomes.push(lemma_suite(r, *t));
    let ((pos, tp), (cen, tc)) = (get("positive"), get("census"));
    outcomes.push(boundedness_ratio(pos, cen, *tp + *tc));
    let (r, t) = get("weights");
    outcomes.push(weight_admissibility(r, *t));

    let mut diverged = Vec::new();
    for id in ids {
        let (again, _) = run_in_pool(id, 2);
        let first = reports[id.name()].0.to_csv().expect("csv");
        if again.to_csv().expect("csv") != first {
            diverged.push(id.name());
        }
    }
    outcomes.push(outcome(
        diverged.iter().map(|n| format!("{n} CSV differs")).collect(),
        format!("{} experiments byte-identical at 1 and 2 workers", ids.len() - diverged.len()),
    ));

    let mut failed = 0;
    for (i, o) in outcomes.iter().enumerate() {
        println!("{} criterion {}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
