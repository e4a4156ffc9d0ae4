//! Acceptance checks for the whole detector, ordered from unit-level
//! exactness to full simulation studies. Each test prints one summary
//! line (visible with --nocapture) and enforces its stated tolerance.

mod common;

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use coders::autoencoder::{objective_gradient, NetworkParameters};
use coders::changepoint::{
    critical_value, detect_changepoint, RightVarianceWeight, Series, SnTestConfig,
};
use coders::data::{Categories, ResponseMatrix};
use coders::lsp::l_pattern;
use coders::pipeline::{run_study, Dims, StudyPlan, StudyReport};
use coders::screeners::{longstring_flags, longstring_index, longstring_row};
use coders::seed;
use coders::simulate::{simulate, CarelessType, SimulationSpec};
use rand::Rng;

const MASTER: u64 = 20260814;

#[test]
fn a01_pattern_scores_reproduce_worked_examples() {
    let lag2 = l_pattern(&[1, 2, 1, 2, 1, 4, 3, 5, 4, 5, 4], 2).unwrap();
    assert_eq!(lag2, vec![4, 4, 4, 4, 1, 1, 1, 4, 4, 4, 4]);
    let lag1 = l_pattern(&[3, 2, 3, 3, 1, 4, 1, 1, 1], 1).unwrap();
    assert_eq!(lag1, vec![1, 1, 2, 2, 1, 1, 3, 3, 3]);
    println!("PASS 01 both worked pattern-score examples reproduced exactly");
}

#[test]
fn a02_longstring_equals_lag_one_pattern_maximum() {
    let mut rng = seed::rng(MASTER, "longstring", 0);
    for _ in 0..10_000 {
        let p = rng.random_range(2..=50);
        let l = rng.random_range(2..=5u8);
        let x: Vec<u8> = (0..p).map(|_| rng.random_range(1..=l)).collect();
        let max_run = l_pattern(&x, 1).unwrap().into_iter().max().unwrap();
        assert_eq!(longstring_row(&x), max_run, "vector {x:?}");
    }
    println!("PASS 02 longstring equals max lag-1 pattern score on 10,000 random vectors");
}

#[test]
fn a03_pattern_scores_match_bruteforce_oracle() {
    let mut checked = 0usize;
    // exhaustive over the ternary alphabet up to length 8
    for p in 2..=8usize {
        for code in 0..3usize.pow(p as u32) {
            let mut x = Vec::with_capacity(p);
            let mut c = code;
            for _ in 0..p {
                x.push((c % 3 + 1) as u8);
                c /= 3;
            }
            for l in 1..=5.min(p - 1) {
                assert_eq!(
                    l_pattern(&x, l).unwrap(),
                    common::oracle_l_pattern(&x, l),
                    "x={x:?} l={l}"
                );
                checked += 1;
            }
        }
    }
    // random longer vectors
    let mut rng = seed::rng(MASTER, "pattern-oracle", 0);
    for _ in 0..10_000 {
        let p = rng.random_range(9..=12);
        let x: Vec<u8> = (0..p).map(|_| rng.random_range(1..=3)).collect();
        for l in 1..=5 {
            assert_eq!(
                l_pattern(&x, l).unwrap(),
                common::oracle_l_pattern(&x, l),
                "x={x:?} l={l}"
            );
            checked += 1;
        }
    }
    println!("PASS 03 pattern scores match the brute-force oracle on {checked} cases");
}

#[test]
fn a04_statistic_trace_matches_bruteforce_oracle() {
    let mut entries = 0usize;
    for r in 0..1000u64 {
        let mut rng = seed::rng(MASTER, "trace-oracle", r);
        let p = rng.random_range(4..=50usize);
        let d = if r % 2 == 0 { 1 } else { 2 };
        let shift_at = if r % 3 == 0 { Some(rng.random_range(2..=p)) } else { None };
        let points: Vec<Vec<f64>> = (1..=p)
            .map(|j| {
                (0..d)
                    .map(|_| {
                        let base: f64 = rng.sample(rand_distr::StandardNormal);
                        base + if shift_at.is_some_and(|k| j >= k) { 2.5 } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let series = if d == 1 {
            Series::univariate(points.iter().map(|v| v[0]).collect()).unwrap()
        } else {
            let first: Vec<f64> = points.iter().map(|v| v[0]).collect();
            let second: Vec<f64> = points.iter().map(|v| v[1]).collect();
            Series::bivariate(&first, &second).unwrap()
        };
        for weight in [RightVarianceWeight::Symmetric, RightVarianceWeight::LeftSegment] {
            if weight == RightVarianceWeight::LeftSegment && r % 4 != 0 {
                continue;
            }
            let cfg = SnTestConfig { right_weight: weight, ..SnTestConfig::default() };
            let got = detect_changepoint(&series, &cfg).unwrap().trace;
            let want =
                common::oracle_trace(&points, weight == RightVarianceWeight::Symmetric);
            assert_eq!(got.len(), want.len());
            for (i, (g, w)) in got.iter().zip(&want).enumerate() {
                match (g, w) {
                    (None, None) => {}
                    (Some(a), Some(b)) => {
                        assert!(
                            (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs())),
                            "series {r} k={} got {a} want {b}",
                            i + 2
                        );
                        entries += 1;
                    }
                    other => panic!("series {r} k={}: exclusion mismatch {other:?}", i + 2),
                }
            }
        }
    }
    println!("PASS 04 statistic trace matches direct formulas on {entries} entries (rel 1e-10)");
}

#[test]
fn a05_critical_value_table_is_exact() {
    let table = [
        (0.01, 1, 68.6),
        (0.005, 1, 84.6),
        (0.001, 1, 121.9),
        (0.01, 2, 117.7),
        (0.005, 2, 135.3),
        (0.001, 2, 192.5),
    ];
    for (alpha, d, want) in table {
        assert_eq!(critical_value(alpha, d).unwrap(), want);
    }
    assert!(critical_value(0.05, 1).is_err());
    assert!(critical_value(0.01, 3).is_err());
    println!("PASS 05 critical-value table exact at all six tabulated entries");
}

#[test]
fn a06_test_size_stays_near_nominal_level() {
    let cfg = SnTestConfig { alpha: 0.01, ..SnTestConfig::default() };
    let p = 300;
    let mut rejections = 0usize;
    for r in 0..1000u64 {
        let mut rng = seed::rng(MASTER, "size", r);
        let y: Vec<f64> = (0..p).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        if detect_changepoint(&Series::univariate(y).unwrap(), &cfg).unwrap().flagged {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / 1000.0;
    assert!(
        (0.002..=0.03).contains(&rate),
        "rejection rate {rate} outside [0.002, 0.03]"
    );
    println!("PASS 06 null rejection rate {rate} within [0.002, 0.03] at the 1% level");
}

#[test]
fn a07_mean_shift_detected_with_accurate_onset() {
    let cfg = SnTestConfig { alpha: 0.01, ..SnTestConfig::default() };
    let p = 300;
    let onset = 150usize;
    let mut detected = 0usize;
    let mut abs_err = 0.0f64;
    for r in 0..200u64 {
        let mut rng = seed::rng(MASTER, "power", r);
        let y: Vec<f64> = (1..=p)
            .map(|j| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
                    + if j >= onset { 3.0 } else { 0.0 }
            })
            .collect();
        let res = detect_changepoint(&Series::univariate(y).unwrap(), &cfg).unwrap();
        if res.flagged {
            detected += 1;
            abs_err += (res.onset.unwrap() as f64 - onset as f64).abs();
        }
    }
    let rate = detected as f64 / 200.0;
    let mae = abs_err / detected as f64;
    assert!(rate >= 0.95, "detection rate {rate} below 0.95");
    assert!(mae <= 5.0, "onset MAE {mae} above 5");
    println!("PASS 07 three-sigma shift: detection rate {rate}, onset MAE {mae:.3}");
}

#[test]
fn a08_analytic_gradient_matches_finite_differences() {
    let mut rng = seed::rng(MASTER, "gradient", 0);
    let rows: Vec<Vec<i64>> =
        (0..4).map(|_| (0..6).map(|_| rng.random_range(1..=5)).collect()).collect();
    let m = ResponseMatrix::from_rows(&rows, Categories::Uniform(5)).unwrap();
    let params = NetworkParameters::init(6, 2, m.categories(), MASTER).unwrap();
    let (_, analytic) = objective_gradient(&params, &m, 1.0).unwrap();
    let flat = params.flatten();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for t in 0..flat.len() {
        let mut probe = params.clone();
        let mut bumped = flat.clone();
        bumped[t] = flat[t] + h;
        probe.assign_flat(&bumped).unwrap();
        let up = objective_gradient(&probe, &m, 1.0).unwrap().0;
        bumped[t] = flat[t] - h;
        probe.assign_flat(&bumped).unwrap();
        let down = objective_gradient(&probe, &m, 1.0).unwrap().0;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[t].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[t] - numeric).abs() / denom);
    }
    assert!(worst <= 1e-4, "worst relative gradient error {worst}");
    println!(
        "PASS 08 analytic gradient matches central differences over {} parameters (worst rel {worst:.2e})",
        flat.len()
    );
}

struct StudyArtifacts {
    plan: StudyPlan,
    report: StudyReport,
    wall: Duration,
}

fn desk_plan() -> StudyPlan {
    // n=200 respondents, 300 items in 30 constructs, one fifth careless
    let base = SimulationSpec { n: 200, gamma: 0.2, ..SimulationSpec::new(0) };
    StudyPlan::new(base, MASTER)
}

fn desk_study() -> &'static StudyArtifacts {
    static STUDY: OnceLock<StudyArtifacts> = OnceLock::new();
    STUDY.get_or_init(|| {
        let plan = desk_plan();
        let start = Instant::now();
        let report = run_study(&plan).expect("study runs");
        StudyArtifacts { plan, report, wall: start.elapsed() }
    })
}

#[test]
fn a09_desk_scale_study_meets_error_targets() {
    let study = desk_study();
    let cell = &study.report.cells[0];
    assert_eq!(cell.dims, Dims::Both);
    assert_eq!(cell.alpha, 0.001);
    let eval = &cell.evaluation;
    assert_eq!(eval.attentive_total, 1600);
    assert_eq!(eval.careless_total, 400);

    let fpr = eval.false_positive_rate().unwrap();
    assert!(fpr <= 0.02, "false positive rate {fpr} above 2%");

    let fnr_of = |t: CarelessType| eval.by_type[&t].false_negative_rate().unwrap();
    let straightline = fnr_of(CarelessType::Straightline);
    let pattern = fnr_of(CarelessType::Pattern);
    let extreme = fnr_of(CarelessType::Extreme);
    let random = fnr_of(CarelessType::Random);
    assert!(straightline <= 0.05, "straightlining FNR {straightline} above 5%");
    assert!(pattern <= 0.05, "pattern FNR {pattern} above 5%");
    assert!(extreme <= 0.40, "extreme FNR {extreme} above 40%");

    let s = &eval.by_type[&CarelessType::Straightline];
    let q = &eval.by_type[&CarelessType::Pattern];
    let invariable_mae =
        (s.onset_error_sum + q.onset_error_sum) / (s.flagged + q.flagged) as f64;
    assert!(invariable_mae <= 5.0, "invariable onset MAE {invariable_mae} above 5");

    println!(
        "PASS 09 study (10 replicates in {:.1?}): FPR {fpr:.4}, FNR straightline {straightline:.3} \
         pattern {pattern:.3} extreme {extreme:.3} random {random:.3} (unconstrained), \
         invariable onset MAE {invariable_mae:.2}",
        study.wall
    );
}

#[test]
fn a10_false_positive_rate_robust_to_prevalence() {
    let plan = StudyPlan { prevalences: vec![0.0, 0.4], ..desk_plan() };
    let report = run_study(&plan).expect("study runs");
    let mut rates = Vec::new();
    for cell in &report.cells {
        let fpr = cell.evaluation.false_positive_rate().unwrap();
        assert!(
            fpr <= 0.02,
            "false positive rate {fpr} above 2% at prevalence {}",
            cell.gamma
        );
        rates.push((cell.gamma, fpr));
    }
    println!("PASS 10 false positive rate by prevalence: {rates:?}");
}

#[test]
fn a11_study_reruns_are_bit_identical() {
    let study = desk_study();
    let again = run_study(&study.plan).expect("study runs");
    assert_eq!(study.report, again, "rerun with the same seed changed some number");
    println!("PASS 11 rerun with the same master seed reproduced the study bit for bit");
}

#[test]
fn a12_longstring_screener_separates_straightliners() {
    let plan = desk_plan();
    let mut straight_total = 0usize;
    let mut straight_flagged = 0usize;
    let mut attentive_total = 0usize;
    let mut attentive_flagged = 0usize;
    for r in 0..plan.replicates {
        let spec = plan.replicate_spec(r, 0, 0).unwrap();
        let survey = simulate(&spec).unwrap();
        let flags = longstring_flags(&longstring_index(&survey.responses), 6);
        for (row, &flag) in survey.truth.rows.iter().zip(&flags) {
            match row.careless_type {
                Some(CarelessType::Straightline) => {
                    straight_total += 1;
                    straight_flagged += usize::from(flag);
                }
                None => {
                    attentive_total += 1;
                    attentive_flagged += usize::from(flag);
                }
                _ => {}
            }
        }
    }
    let hit = straight_flagged as f64 / straight_total as f64;
    let false_alarm = attentive_flagged as f64 / attentive_total as f64;
    assert!(hit >= 0.95, "longstring caught only {hit} of straightliners");
    assert!(false_alarm <= 0.01, "longstring flagged {false_alarm} of attentive respondents");
    println!(
        "PASS 12 longstring flags {hit:.3} of straightliners, {false_alarm:.4} of attentive respondents"
    );
}
