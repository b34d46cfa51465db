use std::time::Instant;

use specificity::corpus::synthetic::{synthetic_book, synthetic_lexicons, TRANSCRIPT_IDS};
use specificity::corpus::{generate_synthetic_corpus, stratified_folds, Turn};
use specificity::eval::{
    cross_validate, render_coefficients, render_results_table, CvOptions, CvReport, Metadata,
};
use specificity::features::{parse_feature_sets, Resources};
use specificity::pipeline::{ExperimentSpec, ModelKind, TrainedPipeline, VocabFit};

fn resources() -> Resources {
    let mut r = Resources::new(synthetic_lexicons(2));
    for id in TRANSCRIPT_IDS {
        r.add_book(id, synthetic_book());
    }
    r
}

fn spec(sets: &str) -> ExperimentSpec {
    ExperimentSpec::new(parse_feature_sets(sets).unwrap(), ModelKind::Linear)
}

fn options(folds: usize) -> CvOptions {
    CvOptions {
        folds,
        seed: 4,
        ..CvOptions::default()
    }
}

#[test]
fn report_shape_and_aggregates() {
    let turns = generate_synthetic_corpus(2, 120).unwrap();
    let r = cross_validate(&turns, &resources(), &spec("speciteller+semantic"), &options(5)).unwrap();
    assert_eq!(r.fold_qwk.len(), 5);
    let mean = r.fold_qwk.iter().sum::<f64>() / 5.0;
    assert!((r.mean_qwk - mean).abs() < 1e-15);
    assert_eq!(r.pooled_confusion.total(), 120);
    assert_eq!(
        r.pooled_confusion.row_sums(),
        r.label_counts.iter().map(|&c| c as u64).collect::<Vec<_>>()
    );
    let coefs = r.coefficients.as_ref().unwrap();
    assert!(coefs.windows(2).all(|w| w[0].weight.abs() >= w[1].weight.abs()));
    assert!(r.fold_histories.is_none() && r.fold_selections.is_none());
}

#[test]
fn job_count_does_not_change_results() {
    let turns = generate_synthetic_corpus(2, 120).unwrap();
    let res = resources();
    let s = spec("lexical+pedagogical");
    let one = cross_validate(&turns, &res, &s, &options(4)).unwrap();
    let mut parallel = options(4);
    parallel.jobs = 3;
    let three = cross_validate(&turns, &res, &s, &parallel).unwrap();
    assert_eq!(one.fold_qwk, three.fold_qwk);
    assert_eq!(one.fold_selections, three.fold_selections);
    assert_eq!(one.fold_selections.as_ref().unwrap().len(), 4);
}

/// With train-split vocabularies, what the test fold contains cannot reach
/// the fitted pipeline.
#[test]
fn test_fold_text_does_not_leak_into_fitting() {
    let turns = generate_synthetic_corpus(2, 100).unwrap();
    let folds = stratified_folds(&turns, 5, 1).unwrap();
    let test: Vec<usize> = folds.test_indices(0);
    let mut altered: Vec<Turn> = turns.clone();
    for &i in &test {
        altered[i].text = "zebra zebra zebra quantum quantum quantum quantum quantum".into();
    }
    let res = resources();
    let s = spec("lexical+syntactic+pedagogical");
    let fit = |ts: &[Turn], mode: VocabFit| {
        let ann = res.annotate_all(ts);
        let train: Vec<_> = folds.train_indices(0).into_iter().map(|i| ann[i].clone()).collect();
        let vocab = match mode {
            VocabFit::Train => train.clone(),
            VocabFit::Corpus => ann.clone(),
        };
        TrainedPipeline::fit(&s, &train, &vocab, &res.bundle, "fold-0").unwrap()
    };
    assert_eq!(fit(&turns, VocabFit::Train), fit(&altered, VocabFit::Train));
    let leaky = fit(&altered, VocabFit::Corpus);
    assert!(leaky.schema.lexical_vocab().contains_key("quantum"));
}

#[test]
fn transcript_grouping_keeps_transcripts_whole() {
    let turns = generate_synthetic_corpus(2, 120).unwrap();
    let mut o = options(2);
    o.group_by_transcript = true;
    let r = cross_validate(&turns, &resources(), &spec("semantic"), &o).unwrap();
    assert_eq!(r.fold_qwk.len(), 2);
    o.folds = 10;
    assert!(cross_validate(&turns, &resources(), &spec("semantic"), &o).is_err());
}

#[test]
fn report_tables_and_significance() {
    let turns = generate_synthetic_corpus(2, 120).unwrap();
    let res = resources();
    let reports = ["speciteller", "semantic", "pedagogical"]
        .iter()
        .map(|s| cross_validate(&turns, &res, &spec(s), &options(5)).unwrap())
        .collect();
    let report = CvReport::new(reports, Metadata::now(Instant::now()));
    assert!(report.experiments[0].significance.is_none());
    let sig = report.experiments[1].significance.as_ref().unwrap();
    assert_eq!(sig.baseline, "speciteller");
    assert!(sig.p.is_some_and(|p| (0.0..=1.0).contains(&p)));

    let table = render_results_table(&report.experiments);
    assert_eq!(table.lines().count(), 2 + 3);
    assert!(table.contains("pedagogical"));
    let coefs = render_coefficients(&report.experiments[2], 12).unwrap();
    assert_eq!(coefs.lines().count(), 2 + 12);

    let back = CvReport::from_json(&report.to_json()).unwrap();
    assert_eq!(back, report);
}
