//! Acceptance criteria 1-8. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion fails. Tolerances are pinned below.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specificity::corpus::synthetic::{synthetic_book, synthetic_lexicons, TRANSCRIPT_IDS};
use specificity::corpus::{generate_synthetic_corpus, Book, CharacterName, SpecificityLabel, Turn};
use specificity::eval::{
    apply_thresholds, cross_validate, paired_t_test, quadratic_weighted_kappa, search_thresholds,
    ConfusionMatrix, CvOptions, CvReport, Metadata, ThresholdPair,
};
use specificity::features::{
    extract_book, extract_semantic, fit_lexical_vocab, parse_feature_sets, Resources,
};
use specificity::lexicons::LexiconBundle;
use specificity::ml::{information_gain, logistic_gradient_check, LogisticObjective};
use specificity::neural::{gradient_check, JointConfig, JointModel, ParamGroup};
use specificity::pipeline::{ExperimentSpec, ModelKind};

const TABLE3: [[u64; 3]; 3] = [[352, 360, 18], [280, 565, 129], [4, 139, 210]];
const TABLE3_QWK: f64 = 0.495;
const TABLE3_TOL: f64 = 0.001;
const LABEL_COUNTS: [u64; 3] = [730, 974, 353];
const SYNTH_SEED: u64 = 7;
const SYNTH_N: usize = 300;
const LINEAR_MIN_QWK: f64 = 0.6;
const JOINT_MARGIN: f64 = 0.05;
const JOINT_HIDDEN: usize = 50;
const RUNTIME_BUDGET: Duration = Duration::from_secs(600);
const LOGISTIC_GRAD_TOL: f64 = 1e-6;
const JOINT_GRAD_TOL: f64 = 1e-4;
const GRAD_CHECKS: usize = 200;
const FD_STEP: f64 = 1e-5;
const IG_TOL: f64 = 1e-12;
const T_ORACLE: f64 = 3.464101615137755;
const P_ORACLE: f64 = 0.07417990022744853;
const TTEST_TOL: f64 = 0.001;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Written past the test harness capture so the lines show in plain
/// `cargo test` output.
fn report(id: usize, title: &str, o: &Outcome) {
    let line = format!(
        "acceptance criterion {id} [{}] {title}: {}\n",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn table3() -> ConfusionMatrix {
    ConfusionMatrix::from_counts(TABLE3.iter().map(|r| r.to_vec()).collect()).unwrap()
}

fn synthetic_resources() -> Resources {
    let mut r = Resources::new(synthetic_lexicons(SYNTH_SEED));
    for id in TRANSCRIPT_IDS {
        r.add_book(id, synthetic_book());
    }
    r
}

fn criterion_1() -> Outcome {
    let k = quadratic_weighted_kappa(&table3()).unwrap();
    check((k - TABLE3_QWK).abs() <= TABLE3_TOL, format!("qwk = {k:.6}, expected {TABLE3_QWK} +/- {TABLE3_TOL}"))
}

fn criterion_2() -> Outcome {
    let rows = table3().row_sums();
    check(rows == LABEL_COUNTS, format!("row sums {rows:?}, expected {LABEL_COUNTS:?}"))
}

fn criterion_3() -> Outcome {
    use SpecificityLabel::*;
    let t = ThresholdPair::new(0.02, 0.78).unwrap();
    let cases = [(0.01, Low), (0.02, Low), (0.5, Medium), (0.78, Medium), (0.781, High)];
    let mapped: Vec<SpecificityLabel> = cases.iter().map(|(s, _)| apply_thresholds(*s, t).unwrap()).collect();
    let boundaries = cases.iter().zip(&mapped).all(|((_, want), got)| want == got);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (s, l) in [(0.1, Low), (0.5, Medium), (0.9, High)] {
        scores.extend([s; 10]);
        labels.extend([l; 10]);
    }
    let (pair, k) = search_thresholds(&scores, &labels, 0.001).unwrap();
    check(
        boundaries && k == 1.0,
        format!("boundary labels {mapped:?}; separable grid search qwk = {k} at ({}, {})", pair.t1, pair.t2),
    )
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let turns = generate_synthetic_corpus(SYNTH_SEED, SYNTH_N).unwrap();
    let res = synthetic_resources();
    let options = CvOptions {
        folds: 10,
        seed: SYNTH_SEED,
        ..CvOptions::default()
    };
    let linear_spec = ExperimentSpec::new(parse_feature_sets("speciteller").unwrap(), ModelKind::Linear);
    let linear = cross_validate(&turns, &res, &linear_spec, &options).unwrap();
    let mut joint_spec = ExperimentSpec::new(
        parse_feature_sets("speciteller+semantic+embeddings").unwrap(),
        ModelKind::Joint,
    );
    joint_spec.neural = JointConfig {
        hidden: JOINT_HIDDEN,
        seed: SYNTH_SEED,
        ..JointConfig::default()
    };
    let joint = cross_validate(&turns, &res, &joint_spec, &options).unwrap();
    let elapsed = started.elapsed();
    let pass = linear.mean_qwk > LINEAR_MIN_QWK
        && joint.mean_qwk >= linear.mean_qwk - JOINT_MARGIN
        && elapsed < RUNTIME_BUDGET;
    check(
        pass,
        format!(
            "linear speciteller mean qwk {:.4} (> {LINEAR_MIN_QWK}), joint h={JOINT_HIDDEN} mean qwk {:.4} (>= linear - {JOINT_MARGIN}), {:.0}s (< {}s)",
            linear.mean_qwk,
            joint.mean_qwk,
            elapsed.as_secs_f64(),
            RUNTIME_BUDGET.as_secs()
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = 70;
    let x: Vec<Vec<f64>> = (0..25).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let y: Vec<usize> = (0..25).map(|i| i % 3).collect();
    let objective = LogisticObjective::new(&x, &y, 0.5).unwrap();
    let params: Vec<f64> = (0..objective.n_params()).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let logistic = logistic_gradient_check(&objective, &params, GRAD_CHECKS, FD_STEP, 1);

    let config = JointConfig {
        hidden: 8,
        fc: 6,
        seed: 5,
        ..JointConfig::default()
    };
    let names: Vec<String> = (0..4).map(|i| format!("h{i}")).collect();
    let model = JointModel::new(config, names).unwrap();
    let hand = [0.4, -1.2, 0.3, 2.0];
    let sample = [("Marta found the lamp in chapter 3.", &hand[..], 2)];
    let joint = gradient_check(&model, &sample, ParamGroup::All, GRAD_CHECKS, FD_STEP, 2).unwrap();
    check(
        logistic < LOGISTIC_GRAD_TOL && joint < JOINT_GRAD_TOL,
        format!(
            "logistic max rel err {logistic:.2e} (< {LOGISTIC_GRAD_TOL:e}, {} params), joint max rel err {joint:.2e} (< {JOINT_GRAD_TOL:e}, {GRAD_CHECKS} of {} params)",
            GRAD_CHECKS.min(objective.n_params()),
            model.params.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let counts: Vec<Vec<u64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(0..20)).collect()).collect();
        let m = ConfusionMatrix::from_counts(counts).unwrap();
        let (Ok(a), Ok(b)) = (quadratic_weighted_kappa(&m), quadratic_weighted_kappa(&m.transpose())) else {
            continue;
        };
        if (a - b).abs() > 1e-12 {
            failures.push("symmetry");
        }
        if a >= 0.0 && m.counts[0][1] > 0 {
            let mut moved = m.clone();
            moved.counts[0][1] -= 1;
            moved.counts[0][2] += 1;
            if let Ok(after) = quadratic_weighted_kappa(&moved) {
                if after > a + 1e-12 {
                    failures.push("monotone penalty");
                }
            }
        }
    }
    let diag = ConfusionMatrix::from_counts(vec![vec![4, 0, 0], vec![0, 7, 0], vec![0, 0, 2]]).unwrap();
    if quadratic_weighted_kappa(&diag).unwrap() != 1.0 {
        failures.push("diagonal");
    }
    let perfect = information_gain(&[0.0, 0.0, 1.0, 1.0], &[0, 0, 1, 1], 10).unwrap();
    let independent = information_gain(&[0.0, 1.0, 0.0, 1.0], &[0, 0, 1, 1], 10).unwrap();
    if (perfect - 1.0).abs() > IG_TOL || independent.abs() > IG_TOL {
        failures.push("information gain");
    }
    let t = paired_t_test(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
    if (t.t - T_ORACLE).abs() > TTEST_TOL || (t.p - P_ORACLE).abs() > TTEST_TOL {
        failures.push("t-test");
    }
    check(
        failures.is_empty(),
        format!(
            "IG {perfect} / {independent}, t = {:.4}, p = {:.4}{}",
            t.t,
            t.p,
            if failures.is_empty() { String::new() } else { format!("; failed: {failures:?}") }
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let packaged = Resources::new(LexiconBundle::packaged());

    let long = Turn::new("T", "1", "S", &"x".repeat(25));
    let sem = extract_semantic(&packaged.annotate(&long), &packaged.bundle);
    if sem.dense["sem.len20"] != 1.0 {
        failures.push("length-20 overflow");
    }

    let mut texts = vec!["storm"; 4];
    texts.extend(["lamp"; 5]);
    let turns: Vec<Turn> = texts.iter().enumerate().map(|(i, t)| Turn::new("T", &i.to_string(), "S", t)).collect();
    let vocab = fit_lexical_vocab(&packaged.annotate_all(&turns));
    if vocab.contains_key("storm") || !vocab.contains_key("lamp") {
        failures.push("min-frequency 5");
    }

    let t = ThresholdPair::new(0.02, 0.78).unwrap();
    if apply_thresholds(0.02, t).unwrap() != SpecificityLabel::Low
        || apply_thresholds(0.78, t).unwrap() != SpecificityLabel::Medium
        || apply_thresholds(0.7800001, t).unwrap() != SpecificityLabel::High
    {
        failures.push("threshold boundaries");
    }

    let res = synthetic_resources();
    let corpus = generate_synthetic_corpus(SYNTH_SEED, 120).unwrap();
    let bounded = [
        "book.jaccard_whole",
        "book.cosine_whole",
        "book.jaccard_sentence_max",
        "book.cosine_sentence_max",
    ];
    for at in res.annotate_all(&corpus) {
        let v = extract_book(&at, &res.bundle);
        if bounded.iter().any(|n| !(0.0..=1.0).contains(&v.dense[*n])) {
            failures.push("similarity range");
            break;
        }
    }

    let mut biff = Resources::new(LexiconBundle::packaged());
    let characters = vec![CharacterName {
        first: "Biff".into(),
        last: Some("Loman".into()),
        nicknames: vec![],
    }];
    biff.add_book("T", Book::new("Salesman", characters, "Biff returns home.").unwrap());
    let turn = Turn::new("T", "1", "S", "I did not like Biff");
    let v = extract_book(&biff.annotate(&turn), &biff.bundle);
    let (count, norm) = (v.dense["book.char_mentions"], v.dense["book.char_mentions_norm"]);
    if count != 1.0 || norm != 0.2 {
        failures.push("character count example");
    }
    check(
        failures.is_empty(),
        format!("character mentions {count}, normalized {norm}{}", if failures.is_empty() {
            String::new()
        } else {
            format!("; failed: {failures:?}")
        }),
    )
}

fn criterion_8() -> Outcome {
    let turns = generate_synthetic_corpus(SYNTH_SEED, SYNTH_N).unwrap();
    let res = synthetic_resources();
    let options = CvOptions {
        folds: 10,
        seed: SYNTH_SEED,
        ..CvOptions::default()
    };
    let specs = [
        ExperimentSpec::new(parse_feature_sets("speciteller").unwrap(), ModelKind::Linear),
        ExperimentSpec::new(parse_feature_sets("pedagogical").unwrap(), ModelKind::Linear),
    ];
    let run = || {
        let reports = specs.iter().map(|s| cross_validate(&turns, &res, s, &options).unwrap()).collect();
        CvReport::new(reports, Metadata::now(Instant::now())).content_json()
    };
    let (a, b) = (run(), run());
    check(a == b, format!("two cv runs, {} report bytes each, identical: {}", a.len(), a == b))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 8] = [
        ("QWK on the reference confusion matrix", criterion_1),
        ("confusion-matrix marginals match label counts", criterion_2),
        ("threshold semantics and separable grid search", criterion_3),
        ("synthetic cross-validation, linear and joint models", criterion_4),
        ("gradient oracles", criterion_5),
        ("metric property suite", criterion_6),
        ("feature-rule fidelity", criterion_7),
        ("cross-validation reproducibility", criterion_8),
    ];
    let mut failed = Vec::new();
    for (i, (title, run)) in criteria.iter().enumerate() {
        let outcome = run();
        report(i + 1, title, &outcome);
        if !outcome.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
