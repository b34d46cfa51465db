use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{paired_t_test, quadratic_weighted_kappa, ConfusionMatrix, EvalError};
use crate::corpus::{stratified_folds, transcript_folds, FoldAssignment, SpecificityLabel, Turn};
use crate::features::{AnnotatedTurn, Resources};
use crate::neural::TrainingHistory;
use crate::pipeline::{
    ExperimentSpec, PipelineError, TrainedModel, TrainedPipeline, VocabFit, FORMAT_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    /// Keep whole transcripts in one fold.
    pub group_by_transcript: bool,
    /// Folds evaluated concurrently; results do not depend on it.
    pub jobs: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 10,
            seed: 0,
            group_by_transcript: false,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub feature: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub baseline: String,
    pub t: Option<f64>,
    pub df: Option<f64>,
    /// Two-tailed p of the paired t-test on per-fold QWK.
    pub p: Option<f64>,
    pub error: Option<String>,
}

/// Cross-validation results for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub spec: ExperimentSpec,
    pub options: CvOptions,
    pub n_turns: usize,
    pub label_counts: [usize; 3],
    pub fold_qwk: Vec<f64>,
    pub mean_qwk: f64,
    pub sd_qwk: f64,
    pub pooled_confusion: ConfusionMatrix,
    pub pooled_qwk: f64,
    /// Folds whose predictions used a single label; their QWK is 0.
    pub degenerate_folds: Vec<usize>,
    /// High-label coefficients of a linear model refitted on all turns,
    /// largest magnitude first.
    pub coefficients: Option<Vec<Coefficient>>,
    /// Pedagogical columns chosen in each fold.
    pub fold_selections: Option<Vec<Vec<String>>>,
    pub fold_histories: Option<Vec<TrainingHistory>>,
    pub significance: Option<Significance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub toolkit_version: String,
    pub created_unix_seconds: u64,
    pub elapsed_seconds: f64,
}

impl Metadata {
    pub fn now(started: Instant) -> Self {
        Metadata {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            elapsed_seconds: started.elapsed().as_secs_f64(),
        }
    }
}

/// Reports of several experiments, significance taken against the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub format_version: u32,
    pub experiments: Vec<EvalReport>,
    /// Run-dependent details; ignore when comparing reports.
    pub metadata: Metadata,
}

impl CvReport {
    pub fn new(mut experiments: Vec<EvalReport>, metadata: Metadata) -> Self {
        if let Some((base, rest)) = experiments.split_first_mut() {
            for r in rest {
                r.significance = Some(compare(base, r));
            }
        }
        CvReport {
            format_version: FORMAT_VERSION,
            experiments,
            metadata,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON of everything except the metadata block.
    pub fn content_json(&self) -> String {
        serde_json::to_string_pretty(&self.experiments).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let report: CvReport = serde_json::from_str(text)?;
        if report.format_version != FORMAT_VERSION {
            return Err(PipelineError::Version {
                found: report.format_version,
            });
        }
        Ok(report)
    }
}

/// Paired t-test of `other` against `baseline` over per-fold QWK.
pub fn compare(baseline: &EvalReport, other: &EvalReport) -> Significance {
    match paired_t_test(&other.fold_qwk, &baseline.fold_qwk) {
        Ok(r) => Significance {
            baseline: baseline.name.clone(),
            t: Some(r.t),
            df: Some(r.df),
            p: Some(r.p),
            error: None,
        },
        Err(e) => Significance {
            baseline: baseline.name.clone(),
            t: None,
            df: None,
            p: None,
            error: Some(e.to_string()),
        },
    }
}

pub fn build_folds(turns: &[Turn], options: &CvOptions) -> Result<FoldAssignment, PipelineError> {
    Ok(if options.group_by_transcript {
        transcript_folds(turns, options.folds, options.seed)?
    } else {
        stratified_folds(turns, options.folds, options.seed)?
    })
}

/// QWK for one fold. A fold predicted with a single label scores 0 (chance).
fn fold_kappa(m: &ConfusionMatrix) -> Result<(f64, bool), EvalError> {
    match quadratic_weighted_kappa(m) {
        Ok(k) => Ok((k, false)),
        Err(EvalError::DegenerateMarginals) => Ok((0.0, true)),
        Err(e) => Err(e),
    }
}

struct FoldOutcome {
    confusion: ConfusionMatrix,
    selection: Option<Vec<String>>,
    history: Option<TrainingHistory>,
}

fn run_fold(
    spec: &ExperimentSpec,
    annotated: &[AnnotatedTurn],
    folds: &FoldAssignment,
    fold: usize,
    resources: &Resources,
) -> Result<FoldOutcome, PipelineError> {
    let train: Vec<AnnotatedTurn> = folds.train_indices(fold).into_iter().map(|i| annotated[i].clone()).collect();
    let test: Vec<AnnotatedTurn> = folds.test_indices(fold).into_iter().map(|i| annotated[i].clone()).collect();
    let vocab = match spec.vocab_fit {
        VocabFit::Train => &train[..],
        VocabFit::Corpus => annotated,
    };
    let mut spec = spec.clone();
    spec.neural.seed = spec.neural.seed.wrapping_add(fold as u64);
    let pipeline = TrainedPipeline::fit(&spec, &train, vocab, &resources.bundle, &format!("fold-{fold}"))?;
    let predicted = pipeline.predict_all(&test, &resources.bundle)?;
    let truth: Vec<SpecificityLabel> = test.iter().map(|at| at.turn.gold_label.expect("labeled")).collect();
    let confusion = ConfusionMatrix::from_labels(&truth, &predicted)?;
    let history = match pipeline.model {
        TrainedModel::Joint { history, .. } => Some(history),
        TrainedModel::Linear { .. } => None,
    };
    info!("{}: fold {fold} done", spec.name);
    Ok(FoldOutcome {
        confusion,
        selection: pipeline.selected,
        history,
    })
}

/// k-fold cross-validation of one experiment. Vocabularies, pedagogical
/// selection, standardization and the model are fitted on each training
/// split; per-fold results are merged in fold order.
pub fn cross_validate(
    turns: &[Turn],
    resources: &Resources,
    spec: &ExperimentSpec,
    options: &CvOptions,
) -> Result<EvalReport, PipelineError> {
    spec.validate()?;
    let folds = build_folds(turns, options)?;
    let annotated = resources.annotate_all(turns);
    let run = |f: usize| run_fold(spec, &annotated, &folds, f, resources);
    let outcomes: Vec<FoldOutcome> = if options.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..folds.k()).into_par_iter().map(run).collect::<Result<_, _>>())?
    } else {
        (0..folds.k()).map(run).collect::<Result<_, _>>()?
    };

    let mut pooled = ConfusionMatrix::zeros(3);
    let mut fold_qwk = Vec::with_capacity(outcomes.len());
    let mut degenerate_folds = Vec::new();
    for (f, o) in outcomes.iter().enumerate() {
        pooled.add(&o.confusion);
        let (k, degenerate) = fold_kappa(&o.confusion)?;
        if degenerate {
            warn!("{}: fold {f} predicted a single label", spec.name);
            degenerate_folds.push(f);
        }
        fold_qwk.push(k);
    }
    let n = fold_qwk.len() as f64;
    let mean_qwk = fold_qwk.iter().sum::<f64>() / n;
    let sd_qwk = (fold_qwk.iter().map(|k| (k - mean_qwk).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let pooled_qwk = fold_kappa(&pooled)?.0;

    let coefficients = if spec.model == crate::pipeline::ModelKind::Linear {
        let full = TrainedPipeline::fit(spec, &annotated, &annotated, &resources.bundle, "all")?;
        full.linear_model().map(|m| {
            m.ranked_coefficients(SpecificityLabel::High)
                .into_iter()
                .map(|(feature, weight)| Coefficient { feature, weight })
                .collect()
        })
    } else {
        None
    };

    let mut label_counts = [0; 3];
    for t in turns {
        if let Some(l) = t.gold_label {
            label_counts[l.ordinal()] += 1;
        }
    }
    let fold_selections: Option<Vec<Vec<String>>> = outcomes.iter().map(|o| o.selection.clone()).collect();
    let fold_histories: Option<Vec<TrainingHistory>> = outcomes.into_iter().map(|o| o.history).collect();
    Ok(EvalReport {
        name: spec.name.clone(),
        spec: spec.clone(),
        options: *options,
        n_turns: turns.len(),
        label_counts,
        fold_qwk,
        mean_qwk,
        sd_qwk,
        pooled_confusion: pooled,
        pooled_qwk,
        degenerate_folds,
        coefficients,
        fold_selections,
        fold_histories,
        significance: None,
    })
}

/// Results table: one row per experiment with mean and pooled QWK. Rows
/// after the first are marked `*` when p < 0.05 against the first.
pub fn render_results_table(reports: &[EvalReport]) -> String {
    let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(0).max(11);
    let mut out = format!(
        "{:<width$}  {:<6}  {:>10}  {:>8}  {:>12}  {:>8}\n",
        "Feature set", "Model", "QWK (mean)", "(sd)", "QWK (pooled)", "p"
    );
    out.push_str(&"-".repeat(width + 54));
    out.push('\n');
    for r in reports {
        let (p, mark) = match r.significance.as_ref().and_then(|s| s.p) {
            Some(p) => (format!("{p:.4}"), if p < 0.05 { "*" } else { "" }),
            None => ("-".to_string(), ""),
        };
        out.push_str(&format!(
            "{:<width$}  {:<6}  {:>9.4}{:1}  {:>8.4}  {:>12.4}  {:>8}\n",
            r.name,
            r.spec.model.to_string(),
            r.mean_qwk,
            mark,
            r.sd_qwk,
            r.pooled_qwk,
            p
        ));
    }
    out
}

/// Top `n` coefficients of a linear experiment.
pub fn render_coefficients(report: &EvalReport, n: usize) -> Option<String> {
    let coefs = report.coefficients.as_ref()?;
    let width = coefs.iter().take(n).map(|c| c.feature.len()).max().unwrap_or(0).max(7);
    let mut out = format!("{}\n{:<width$}  {:>11}\n", report.name, "Feature", "Coefficient");
    for c in coefs.iter().take(n) {
        out.push_str(&format!("{:<width$}  {:>11.4}\n", c.feature, c.weight));
    }
    Some(out)
}

pub fn render_confusion(m: &ConfusionMatrix) -> String {
    let names = ["low", "med", "high"];
    let mut out = format!("{:<6}{:>8}{:>8}{:>8}\n", "truth", "low", "med", "high");
    for (i, row) in m.counts.iter().enumerate() {
        out.push_str(&format!("{:<6}", names.get(i).copied().unwrap_or("?")));
        for c in row {
            out.push_str(&format!("{c:>8}"));
        }
        out.push('\n');
    }
    out
}
