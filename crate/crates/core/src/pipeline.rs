//! Experiment definitions and fitted pipelines: schema fitting, feature
//! selection, standardization and model training on one training split.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, SpecificityLabel};
use crate::features::{
    format_feature_sets, AnnotatedTurn, FeatureError, FeatureSchema, FeatureSet, PEDAGOGICAL_FIXED,
};
use crate::lexicons::LexiconBundle;
use crate::ml::{
    default_k_per_set, select_pedagogical_features, set_prefix, train_logistic, LinearModel, MlError,
    Standardizer, DEFAULT_L2, RANKED_SETS,
};
use crate::neural::{train_joint, JointConfig, JointModel, NeuralError, TrainingHistory};

/// Version of the serialized pipeline and report formats.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error("turn {0} has no gold label")]
    Unlabeled(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("pipeline JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("pipeline format version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Linear,
    /// Character LSTM trained jointly with the handcrafted features.
    Joint,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Joint => "joint",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "logistic" => Ok(ModelKind::Linear),
            "joint" | "joint-neural" | "neural" => Ok(ModelKind::Joint),
            other => Err(PipelineError::Config(format!("unknown model {other:?}"))),
        }
    }
}

/// Where n-gram vocabularies are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VocabFit {
    /// Training split only.
    #[default]
    Train,
    /// Whole corpus, test folds included.
    Corpus,
}

impl std::str::FromStr for VocabFit {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(VocabFit::Train),
            "corpus" => Ok(VocabFit::Corpus),
            other => Err(PipelineError::Config(format!("unknown vocab-fit mode {other:?}"))),
        }
    }
}

/// One model configuration: feature sets plus classifier settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Display name; defaults to the `+`-joined feature sets.
    pub name: String,
    pub sets: BTreeSet<FeatureSet>,
    pub model: ModelKind,
    pub l2: f64,
    pub k_per_set: BTreeMap<FeatureSet, usize>,
    pub neural: JointConfig,
    pub vocab_fit: VocabFit,
}

impl ExperimentSpec {
    pub fn new(sets: BTreeSet<FeatureSet>, model: ModelKind) -> Self {
        ExperimentSpec {
            name: format_feature_sets(&sets),
            sets,
            model,
            l2: DEFAULT_L2,
            k_per_set: default_k_per_set(),
            neural: JointConfig::default(),
            vocab_fit: VocabFit::Train,
        }
    }

    /// Feature sets that are extracted by hand, i.e. without the embeddings.
    pub fn handcrafted_sets(&self) -> BTreeSet<FeatureSet> {
        self.sets.iter().copied().filter(|s| *s != FeatureSet::Embeddings).collect()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.sets.is_empty() {
            return bad("no feature sets".into());
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be finite and non-negative, got {}", self.l2));
        }
        match self.model {
            ModelKind::Linear => {
                if self.sets.contains(&FeatureSet::Embeddings) {
                    return bad("the embeddings set requires the joint model".into());
                }
            }
            ModelKind::Joint => {
                if !self.sets.contains(&FeatureSet::Embeddings) {
                    return bad("the joint model needs the embeddings set".into());
                }
                let hand = self.handcrafted_sets();
                if hand.is_empty() {
                    return bad("the joint model needs handcrafted features".into());
                }
                if let Some(s) = hand
                    .iter()
                    .find(|s| !matches!(s, FeatureSet::Speciteller | FeatureSet::Semantic))
                {
                    return bad(format!(
                        "the joint model only takes speciteller and semantic features, not {s}"
                    ));
                }
                self.neural
                    .validate_for_training()
                    .map_err(|e| PipelineError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrainedModel {
    Linear { model: LinearModel },
    Joint { model: JointModel, history: TrainingHistory },
}

/// Everything needed to score new turns with the same columns as training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub format_version: u32,
    pub spec: ExperimentSpec,
    pub schema: FeatureSchema,
    /// Columns kept after pedagogical selection; `None` keeps the schema.
    pub selected: Option<Vec<String>>,
    pub standardizer: Standardizer,
    pub model: TrainedModel,
}

fn gold_labels(turns: &[AnnotatedTurn]) -> Result<Vec<SpecificityLabel>, PipelineError> {
    turns
        .iter()
        .map(|at| {
            at.turn
                .gold_label
                .ok_or_else(|| PipelineError::Unlabeled(at.turn.key().to_string()))
        })
        .collect()
}

/// Names kept when the pedagogical set is requested: its selected features
/// plus every column some other requested set asks for.
fn pedagogical_columns(sets: &BTreeSet<FeatureSet>, names: &[String], picked: &[String]) -> Vec<String> {
    let picked: BTreeSet<&str> = picked.iter().map(String::as_str).collect();
    let in_pool = |n: &str| {
        PEDAGOGICAL_FIXED.contains(&n)
            || RANKED_SETS
                .iter()
                .any(|s| set_prefix(*s).is_some_and(|p| n.starts_with(p)))
    };
    let requested_elsewhere = |n: &str| {
        (n.starts_with("spec.") && sets.contains(&FeatureSet::Speciteller))
            || RANKED_SETS
                .iter()
                .any(|s| sets.contains(s) && set_prefix(*s).is_some_and(|p| n.starts_with(p)))
    };
    names
        .iter()
        .filter(|n| !in_pool(n) || picked.contains(n.as_str()) || requested_elsewhere(n))
        .cloned()
        .collect()
}

impl TrainedPipeline {
    /// Fits on `train`. Vocabularies come from `vocab_turns` (the training
    /// split itself unless the corpus-wide mode is selected by the caller).
    pub fn fit(
        spec: &ExperimentSpec,
        train: &[AnnotatedTurn],
        vocab_turns: &[AnnotatedTurn],
        bundle: &LexiconBundle,
        fitted_on: &str,
    ) -> Result<Self, PipelineError> {
        spec.validate()?;
        let labels = gold_labels(train)?;
        let schema = FeatureSchema::fit(&spec.handcrafted_sets(), vocab_turns, bundle.embeddings.dim(), fitted_on)?;
        let names = schema.names();
        let mut rows = schema.matrix(train, bundle)?;
        let selected = if spec.sets.contains(&FeatureSet::Pedagogical) {
            let picked = select_pedagogical_features(&names, &rows, &labels, &spec.k_per_set)?;
            Some(pedagogical_columns(&spec.sets, &names, &picked))
        } else {
            None
        };
        let (kept_names, n_dense) = match &selected {
            Some(cols) => {
                let idx = column_indices(&names, cols)?;
                rows = rows.into_iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect();
                let dense: BTreeSet<&String> = schema.dense_names().iter().collect();
                (cols.clone(), cols.iter().filter(|c| dense.contains(c)).count())
            }
            None => (names.clone(), schema.n_dense()),
        };
        let standardizer = Standardizer::fit(&rows, &kept_names[..n_dense])?;
        standardizer.transform_all(&mut rows);
        let model = match spec.model {
            ModelKind::Linear => TrainedModel::Linear {
                model: train_logistic(&rows, &labels, &kept_names, spec.l2, spec.neural.seed)?,
            },
            ModelKind::Joint => {
                let texts: Vec<&str> = train.iter().map(|at| at.turn.text.as_str()).collect();
                let (model, history) = train_joint(&texts, &rows, &labels, &kept_names, &spec.neural)?;
                TrainedModel::Joint { model, history }
            }
        };
        Ok(TrainedPipeline {
            format_version: FORMAT_VERSION,
            spec: spec.clone(),
            schema,
            selected,
            standardizer,
            model,
        })
    }

    /// Standardized model input for one turn.
    pub fn features(&self, at: &AnnotatedTurn, bundle: &LexiconBundle) -> Result<Vec<f64>, PipelineError> {
        let fv = self.schema.extract(at, bundle)?;
        let full = self.schema.to_row(&fv);
        let mut row = match &self.selected {
            Some(cols) => column_indices(&self.schema.names(), cols)?
                .into_iter()
                .map(|j| full[j])
                .collect(),
            None => full,
        };
        self.standardizer.transform(&mut row);
        Ok(row)
    }

    pub fn predict_proba(&self, at: &AnnotatedTurn, bundle: &LexiconBundle) -> Result<[f64; 3], PipelineError> {
        let row = self.features(at, bundle)?;
        Ok(match &self.model {
            TrainedModel::Linear { model } => model.predict_proba(&row)?,
            TrainedModel::Joint { model, .. } => model.forward(&at.turn.text, &row)?.0,
        })
    }

    /// Most probable label; ties go to the lower label.
    pub fn predict(&self, at: &AnnotatedTurn, bundle: &LexiconBundle) -> Result<SpecificityLabel, PipelineError> {
        let p = self.predict_proba(at, bundle)?;
        let best = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
        Ok(SpecificityLabel::from_ordinal(best).expect("three labels"))
    }

    pub fn predict_all(&self, turns: &[AnnotatedTurn], bundle: &LexiconBundle) -> Result<Vec<SpecificityLabel>, PipelineError> {
        turns.iter().map(|at| self.predict(at, bundle)).collect()
    }

    pub fn linear_model(&self) -> Option<&LinearModel> {
        match &self.model {
            TrainedModel::Linear { model } => Some(model),
            TrainedModel::Joint { .. } => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pipeline serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let version: serde_json::Value = serde_json::from_str(text)?;
        let found = version.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != FORMAT_VERSION {
            return Err(PipelineError::Version { found });
        }
        Ok(serde_json::from_str(text)?)
    }
}

fn column_indices(names: &[String], cols: &[String]) -> Result<Vec<usize>, PipelineError> {
    let pos: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    cols.iter()
        .map(|c| {
            pos.get(c.as_str())
                .copied()
                .ok_or_else(|| PipelineError::Ml(MlError::MissingFeature(c.clone())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::{synthetic_book, synthetic_lexicons, TRANSCRIPT_IDS};
    use crate::corpus::generate_synthetic_corpus;
    use crate::features::{parse_feature_sets, Resources};

    fn resources() -> Resources {
        let mut r = Resources::new(synthetic_lexicons(1));
        for id in TRANSCRIPT_IDS {
            r.add_book(id, synthetic_book());
        }
        r
    }

    #[test]
    fn joint_rejects_other_handcrafted_sets() {
        let mut spec = ExperimentSpec::new(parse_feature_sets("speciteller+lexical+embeddings").unwrap(), ModelKind::Joint);
        spec.neural.hidden = 50;
        assert!(matches!(spec.validate(), Err(PipelineError::Config(_))));
        spec.sets = parse_feature_sets("speciteller+semantic+embeddings").unwrap();
        spec.validate().unwrap();
        let linear = ExperimentSpec::new(parse_feature_sets("speciteller+embeddings").unwrap(), ModelKind::Linear);
        assert!(linear.validate().is_err());
    }

    #[test]
    fn pedagogical_pipeline_roundtrip() {
        let res = resources();
        let turns = generate_synthetic_corpus(3, 120).unwrap();
        let ann = res.annotate_all(&turns);
        let spec = ExperimentSpec::new(parse_feature_sets("pedagogical").unwrap(), ModelKind::Linear);
        let p = TrainedPipeline::fit(&spec, &ann, &ann, &res.bundle, "all").unwrap();
        let cols = p.selected.as_ref().unwrap();
        assert_eq!(cols.len(), 6 + 3 + 2 + 3);
        assert_eq!(&cols[..6], &PEDAGOGICAL_FIXED.map(String::from)[..]);
        let back = TrainedPipeline::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.predict_all(&ann, &res.bundle).unwrap(), p.predict_all(&ann, &res.bundle).unwrap());
    }

    #[test]
    fn pedagogical_with_explicit_set_keeps_that_set() {
        let names: Vec<String> = ["sem.deictic", "spec.polar", "pron.any", "pron.total", "book.char_present"]
            .map(String::from)
            .to_vec();
        let picked = vec!["spec.polar".to_string(), "book.char_present".to_string()];
        let sets = parse_feature_sets("pedagogical+pronoun").unwrap();
        assert_eq!(
            pedagogical_columns(&sets, &names, &picked),
            ["sem.deictic", "spec.polar", "pron.any", "pron.total", "book.char_present"].map(String::from)
        );
    }

    #[test]
    fn version_is_checked() {
        let text = r#"{"format_version": 99}"#;
        assert!(matches!(TrainedPipeline::from_json(text), Err(PipelineError::Version { found: 99 })));
    }
}
