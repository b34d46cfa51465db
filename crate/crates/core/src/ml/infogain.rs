use std::collections::{BTreeMap, HashMap};

use log::warn;

use super::MlError;
use crate::corpus::SpecificityLabel;
use crate::features::{FeatureSet, PEDAGOGICAL_FIXED};

pub const DEFAULT_BINS: usize = 10;

fn entropy<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

/// Bin index per value. Columns with at most two distinct values keep
/// them as categories; others get equal-frequency bins whose cut points are
/// sample quantiles (duplicates merged, so ties never straddle a cut).
pub fn discretize(column: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= 2 || bins < 2 {
        return column
            .iter()
            .map(|v| distinct.partition_point(|d| d < v))
            .collect();
    }
    let n = sorted.len();
    let mut cuts: Vec<f64> = (1..bins).map(|k| sorted[k * n / bins]).collect();
    cuts.dedup();
    column.iter().map(|v| cuts.partition_point(|c| c <= v)).collect()
}

/// `H(Y) - sum_v p(v) H(Y | v)` in bits.
pub fn information_gain(column: &[f64], labels: &[usize], bins: usize) -> Result<f64, MlError> {
    if column.len() != labels.len() {
        return Err(MlError::LengthMismatch {
            left: column.len(),
            right: labels.len(),
        });
    }
    if column.len() < 2 {
        return Err(MlError::Empty);
    }
    let mut label_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *label_counts.entry(l).or_default() += 1;
    }
    let mut joint: HashMap<usize, BTreeMap<usize, usize>> = HashMap::new();
    for (b, &l) in discretize(column, bins).into_iter().zip(labels) {
        *joint.entry(b).or_default().entry(l).or_default() += 1;
    }
    let n = labels.len() as f64;
    let conditional: f64 = joint
        .values()
        .map(|counts| {
            let size: usize = counts.values().sum();
            size as f64 / n * entropy(counts.values().copied())
        })
        .sum();
    Ok((entropy(label_counts.values().copied()) - conditional).max(0.0))
}

/// Feature-name prefix of each IG-ranked set.
pub fn set_prefix(set: FeatureSet) -> Option<&'static str> {
    match set {
        FeatureSet::Pronoun => Some("pron."),
        FeatureSet::NamedEntity => Some("ne."),
        FeatureSet::Book => Some("book."),
        _ => None,
    }
}

pub const RANKED_SETS: [FeatureSet; 3] = [FeatureSet::Pronoun, FeatureSet::NamedEntity, FeatureSet::Book];

/// Default number of features kept from each ranked set.
pub fn default_k_per_set() -> BTreeMap<FeatureSet, usize> {
    BTreeMap::from([(FeatureSet::Pronoun, 3), (FeatureSet::NamedEntity, 2), (FeatureSet::Book, 3)])
}

/// Columns of one ranked set, sorted by decreasing information gain with
/// ties kept in column order.
pub fn rank_by_information_gain(
    names: &[String],
    rows: &[Vec<f64>],
    labels: &[SpecificityLabel],
    set: FeatureSet,
) -> Result<Vec<(String, f64)>, MlError> {
    let prefix = set_prefix(set).ok_or(MlError::NotRankable(set))?;
    let y: Vec<usize> = labels.iter().map(|l| l.ordinal()).collect();
    let mut ranked = Vec::new();
    for (j, name) in names.iter().enumerate() {
        if name.starts_with(prefix) {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            ranked.push((name.clone(), information_gain(&column, &y, DEFAULT_BINS)?));
        }
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked)
}

/// The six fixed interpretable features followed by the top-k columns of
/// each ranked set (pronoun, named entity, book), ranked on the given
/// training rows only.
pub fn select_pedagogical_features(
    names: &[String],
    rows: &[Vec<f64>],
    labels: &[SpecificityLabel],
    k_per_set: &BTreeMap<FeatureSet, usize>,
) -> Result<Vec<String>, MlError> {
    let mut selected: Vec<String> = PEDAGOGICAL_FIXED.iter().map(|s| s.to_string()).collect();
    if let Some(missing) = selected.iter().find(|f| !names.contains(f)) {
        return Err(MlError::MissingFeature(missing.clone()));
    }
    for set in RANKED_SETS {
        let k = k_per_set.get(&set).copied().unwrap_or(0);
        if k == 0 {
            continue;
        }
        let ranked = rank_by_information_gain(names, rows, labels, set)?;
        if k > ranked.len() {
            warn!("k={k} exceeds the {} features of the {set} set; keeping all", ranked.len());
        }
        selected.extend(ranked.into_iter().take(k).map(|(n, _)| n));
    }
    Ok(selected)
}
