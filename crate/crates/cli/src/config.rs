//! Experiment configuration file (TOML) and its resolution against flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specificity::eval::CvOptions;
use specificity::features::{parse_feature_sets, FeatureSet};
use specificity::ml::default_k_per_set;
use specificity::neural::JointConfig;
use specificity::pipeline::{ExperimentSpec, ModelKind, VocabFit};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub folds: Option<usize>,
    pub jobs: Option<usize>,
    pub group_by_transcript: bool,
    pub threshold_step: Option<f64>,
    pub allow_missing_lexicons: bool,
    /// Transcript files (JSON lines).
    pub corpus: Vec<PathBuf>,
    /// Lexicon table directory; the packaged tables are used when absent.
    pub lexicon_dir: Option<PathBuf>,
    /// Extra gazetteer entries (`phrase<TAB>category`).
    pub gazetteer: Option<PathBuf>,
    /// transcript id -> book file.
    pub books: BTreeMap<String, PathBuf>,
    /// Defaults shared by every experiment.
    pub neural: Option<JointConfig>,
    pub vocab_fit: Option<String>,
    pub strict_charset: bool,
    #[serde(rename = "experiment")]
    pub experiments: Vec<ExperimentEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentEntry {
    pub name: Option<String>,
    /// `+`-joined feature sets, e.g. `speciteller+semantic`.
    pub sets: String,
    pub model: Option<String>,
    pub l2: Option<f64>,
    pub k_per_set: BTreeMap<String, usize>,
    pub vocab_fit: Option<String>,
    pub neural: Option<JointConfig>,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub jobs: Option<usize>,
    pub allow_missing_lexicons: bool,
    pub group_by_transcript: bool,
    pub fit_vocab: Option<String>,
    pub strict_charset: bool,
}

pub const DEFAULT_FOLDS: usize = 10;

impl ExperimentConfig {
    /// Reads a config file; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut config: ExperimentConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.corpus.iter_mut().for_each(fix);
        self.lexicon_dir.iter_mut().for_each(fix);
        self.gazetteer.iter_mut().for_each(fix);
        self.books.values_mut().for_each(fix);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(folds) = o.folds {
            self.folds = Some(folds);
        }
        if let Some(jobs) = o.jobs {
            self.jobs = Some(jobs);
        }
        self.allow_missing_lexicons |= o.allow_missing_lexicons;
        self.group_by_transcript |= o.group_by_transcript;
        self.strict_charset |= o.strict_charset;
        if let Some(fit) = &o.fit_vocab {
            self.vocab_fit = Some(fit.clone());
            for e in &mut self.experiments {
                e.vocab_fit = None;
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let folds = self.folds.unwrap_or(DEFAULT_FOLDS);
        if folds < 2 {
            return Err(format!("folds must be at least 2, got {folds}"));
        }
        if let Some(step) = self.threshold_step {
            if !(step > 0.0 && step <= 1.0) {
                return Err(format!("threshold_step must be in (0, 1], got {step}"));
            }
        }
        if self.jobs == Some(0) {
            return Err("jobs must be at least 1".into());
        }
        let mut paths: Vec<&PathBuf> = self.corpus.iter().chain(self.books.values()).collect();
        paths.extend(self.gazetteer.iter());
        if !self.allow_missing_lexicons {
            paths.extend(self.lexicon_dir.iter());
        }
        if let Some(missing) = paths.into_iter().find(|p| !p.exists()) {
            return Err(format!("{} does not exist", missing.display()));
        }
        for spec in self.specs()? {
            spec.validate().map_err(|e| format!("experiment {:?}: {e}", spec.name))?;
        }
        Ok(())
    }

    pub fn cv_options(&self) -> CvOptions {
        CvOptions {
            folds: self.folds.unwrap_or(DEFAULT_FOLDS),
            seed: self.seed,
            group_by_transcript: self.group_by_transcript,
            jobs: self.jobs.unwrap_or(1),
        }
    }

    /// Experiments with file defaults and the global seed filled in.
    pub fn specs(&self) -> Result<Vec<ExperimentSpec>, String> {
        self.experiments.iter().map(|e| self.spec(e)).collect()
    }

    fn spec(&self, e: &ExperimentEntry) -> Result<ExperimentSpec, String> {
        let sets = parse_feature_sets(&e.sets).map_err(|err| err.to_string())?;
        let model = match &e.model {
            Some(m) => m.parse::<ModelKind>().map_err(|err| err.to_string())?,
            None if sets.contains(&FeatureSet::Embeddings) => ModelKind::Joint,
            None => ModelKind::Linear,
        };
        let mut spec = ExperimentSpec::new(sets, model);
        if let Some(name) = &e.name {
            spec.name = name.clone();
        }
        if let Some(l2) = e.l2 {
            spec.l2 = l2;
        }
        if !e.k_per_set.is_empty() {
            let mut k = default_k_per_set();
            for (set, n) in &e.k_per_set {
                let set: FeatureSet = set.parse().map_err(|err: specificity::features::FeatureError| err.to_string())?;
                k.insert(set, *n);
            }
            spec.k_per_set = k;
        }
        if let Some(fit) = e.vocab_fit.as_ref().or(self.vocab_fit.as_ref()) {
            spec.vocab_fit = fit.parse::<VocabFit>().map_err(|err| err.to_string())?;
        }
        // The global seed drives every model so that `--seed` alone reruns
        // an experiment.
        let mut neural = e.neural.clone().or_else(|| self.neural.clone()).unwrap_or_default();
        neural.seed = self.seed;
        neural.strict_charset |= self.strict_charset;
        spec.neural = neural;
        Ok(spec)
    }
}
