//! Training-set poisoning: QUID label flipping and two baselines.
//!
//! QUID splits the training set into clean and poisoned parts, encodes
//! everything with the victim's encoder, and relabels each poisoned sample
//! with the class whose clean states are farthest from it on average.
//! Dataset size never changes; clean rows are passed through untouched.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{round_half_up, LabeledDataset};
use crate::encode::EncoderConfig;
use crate::error::{Error, Result};
use crate::ess::{class_mean_distances, encode_all, extreme_class, DistanceMetric};
use crate::noise::NoiseModel;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    Quid,
    RandomFlip,
    BilevelRandom,
}

impl AttackMode {
    pub fn name(self) -> &'static str {
        match self {
            AttackMode::Quid => "quid",
            AttackMode::RandomFlip => "random_flip",
            AttackMode::BilevelRandom => "bilevel_random",
        }
    }
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quid" => Ok(AttackMode::Quid),
            "random_flip" | "random" => Ok(AttackMode::RandomFlip),
            "bilevel_random" | "bilevel" => Ok(AttackMode::BilevelRandom),
            other => Err(Error::Config(format!("unknown attack mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoisonSpec {
    pub epsilon: f64,
    pub mode: AttackMode,
    pub metric: DistanceMetric,
    pub seed: u64,
    /// Noise on the adversary's encoder evaluations.
    pub noise: Option<NoiseModel>,
}

impl PoisonSpec {
    pub fn new(mode: AttackMode, epsilon: f64, seed: u64) -> Self {
        Self {
            epsilon,
            mode,
            metric: DistanceMetric::Frobenius,
            seed,
            noise: None,
        }
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Range(format!("poison ratio {} not in [0, 1]", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelChange {
    pub index: usize,
    pub old_label: usize,
    pub new_label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoisonOutcome {
    pub dataset: LabeledDataset,
    /// Ascending.
    pub poisoned_indices: Vec<usize>,
    /// One entry per poisoned index, same order.
    pub changes: Vec<LabelChange>,
}

impl PoisonOutcome {
    fn unchanged(ds: &LabeledDataset) -> Self {
        Self {
            dataset: ds.clone(),
            poisoned_indices: Vec::new(),
            changes: Vec::new(),
        }
    }

    /// Number of poisoned rows whose label actually changed.
    pub fn flipped(&self) -> usize {
        self.changes.iter().filter(|c| c.old_label != c.new_label).count()
    }

    /// `index,old_label,new_label,was_poisoned` for every row.
    pub fn outcome_csv(&self, original: &LabeledDataset) -> String {
        let mut out = String::from("index,old_label,new_label,was_poisoned\n");
        let mut changes = self.changes.iter().peekable();
        for i in 0..original.len() {
            let poisoned = changes.peek().is_some_and(|c| c.index == i);
            if poisoned {
                changes.next();
            }
            writeln!(
                out,
                "{i},{},{},{}",
                original.label(i),
                self.dataset.label(i),
                u8::from(poisoned)
            )
            .expect("string write");
        }
        out
    }
}

/// Uniform random poison subset of size round(ε·n); returns (clean, poison),
/// each ascending.
pub fn split_poison_set(ds: &LabeledDataset, epsilon: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Range(format!("poison ratio {epsilon} not in [0, 1]")));
    }
    let n = ds.len();
    let k = round_half_up(epsilon * n as f64).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::derived_rng(seed, &[seed::label_key("poison-split")]));
    let mut poison = order[..k].to_vec();
    let mut clean = order[k..].to_vec();
    poison.sort_unstable();
    clean.sort_unstable();
    Ok((clean, poison))
}

/// QUID label assignment: each poisoned sample gets the class whose clean
/// encoded states are farthest from it on average.
pub fn quid_poison(ds: &LabeledDataset, spec: &PoisonSpec, cfg: &EncoderConfig) -> Result<PoisonOutcome> {
    spec.check()?;
    let (clean, poison) = split_poison_set(ds, spec.epsilon, spec.seed)?;
    if poison.is_empty() {
        return Ok(PoisonOutcome::unchanged(ds));
    }
    let mut present: Vec<usize> = clean.iter().map(|&i| ds.label(i)).collect();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Infeasible(format!(
            "clean set has {} class(es); QUID needs at least two",
            present.len()
        )));
    }
    let noise = spec.noise.as_ref();
    let clean_states = encode_all(ds, &clean, cfg, noise)?;
    let poison_states = encode_all(ds, &poison, cfg, noise)?;
    let new_labels: Vec<usize> = poison_states
        .par_iter()
        .map(|(rho, _)| {
            let means = class_mean_distances(rho, &clean_states, spec.metric)?;
            Ok(extreme_class(&means, true).expect("clean set non-empty"))
        })
        .collect::<Result<_>>()?;
    relabel(ds, poison, new_labels)
}

fn relabel(ds: &LabeledDataset, poison: Vec<usize>, new_labels: Vec<usize>) -> Result<PoisonOutcome> {
    let mut labels = ds.labels().to_vec();
    let changes = poison
        .iter()
        .zip(&new_labels)
        .map(|(&index, &new_label)| {
            labels[index] = new_label;
            LabelChange {
                index,
                old_label: ds.label(index),
                new_label,
            }
        })
        .collect();
    Ok(PoisonOutcome {
        dataset: ds.with_labels(labels)?,
        poisoned_indices: poison,
        changes,
    })
}

/// Baseline: each poisoned label becomes a uniformly drawn different class.
pub fn random_flip(ds: &LabeledDataset, spec: &PoisonSpec) -> Result<PoisonOutcome> {
    spec.check()?;
    let classes = ds.class_count();
    if classes < 2 {
        return Err(Error::Infeasible("random flipping needs at least two classes".into()));
    }
    let (_, poison) = split_poison_set(ds, spec.epsilon, spec.seed)?;
    let mut rng = seed::derived_rng(spec.seed, &[seed::label_key("random-flip")]);
    let new_labels = poison
        .iter()
        .map(|&i| {
            let old = ds.label(i);
            let r = rng.random_range(0..classes - 1);
            if r >= old {
                r + 1
            } else {
                r
            }
        })
        .collect();
    relabel(ds, poison, new_labels)
}

/// Baseline: poisoned features are replaced with uniform draws over the
/// encoder's scale range, then labeled by the QUID rule.
pub fn bilevel_random(ds: &LabeledDataset, spec: &PoisonSpec, cfg: &EncoderConfig) -> Result<PoisonOutcome> {
    spec.check()?;
    let (_, poison) = split_poison_set(ds, spec.epsilon, spec.seed)?;
    if poison.is_empty() {
        return Ok(PoisonOutcome::unchanged(ds));
    }
    let range = cfg.scale_range;
    let mut rng = seed::derived_rng(spec.seed, &[seed::label_key("bilevel-features")]);
    let mut features = ds.features().to_vec();
    for &i in &poison {
        for v in features[i].iter_mut() {
            *v = rng.random_range(range.lo..=range.hi);
        }
    }
    let randomized = ds.with_features(features)?;
    let mut outcome = quid_poison(&randomized, spec, cfg)?;
    for change in &mut outcome.changes {
        change.old_label = ds.label(change.index);
    }
    Ok(outcome)
}

/// Dispatches on `spec.mode`.
pub fn poison(ds: &LabeledDataset, spec: &PoisonSpec, cfg: &EncoderConfig) -> Result<PoisonOutcome> {
    match spec.mode {
        AttackMode::Quid => quid_poison(ds, spec, cfg),
        AttackMode::RandomFlip => random_flip(ds, spec),
        AttackMode::BilevelRandom => bilevel_random(ds, spec, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_clusters, SynthSpec};
    use std::f64::consts::PI;

    fn two_cluster_1q() -> LabeledDataset {
        let features = vec![
            vec![0.0], vec![0.1], vec![6.2], vec![0.05], vec![0.15],
            vec![PI], vec![PI + 0.1], vec![PI - 0.1], vec![PI + 0.05], vec![PI - 0.02],
        ];
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        LabeledDataset::new(features, labels, 2).unwrap()
    }

    #[test]
    fn split_sizes() {
        let ds = two_cluster_1q();
        let (c, p) = split_poison_set(&ds, 0.0, 1).unwrap();
        assert_eq!((c.len(), p.len()), (10, 0));
        let (c, p) = split_poison_set(&ds, 1.0, 1).unwrap();
        assert_eq!((c.len(), p.len()), (0, 10));
        let (c, p) = split_poison_set(&ds, 0.5, 4).unwrap();
        assert_eq!((c.len(), p.len()), (5, 5));
        assert_eq!((c.clone(), p.clone()), split_poison_set(&ds, 0.5, 4).unwrap());
        let mut all: Vec<usize> = c.into_iter().chain(p).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        // round half up: 0.25 * 10 = 2.5 → 3
        assert_eq!(split_poison_set(&ds, 0.25, 1).unwrap().1.len(), 3);
        assert!(split_poison_set(&ds, 1.2, 1).is_err());
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let ds = two_cluster_1q();
        let cfg = EncoderConfig::angle(1, 1);
        for mode in [AttackMode::Quid, AttackMode::RandomFlip, AttackMode::BilevelRandom] {
            let out = poison(&ds, &PoisonSpec::new(mode, 0.0, 3), &cfg).unwrap();
            assert_eq!(out.dataset, ds);
            assert!(out.poisoned_indices.is_empty());
        }
    }

    #[test]
    fn quid_sends_samples_to_the_antipodal_class() {
        let ds = two_cluster_1q();
        let cfg = EncoderConfig::angle(1, 1);
        let out = quid_poison(&ds, &PoisonSpec::new(AttackMode::Quid, 0.4, 8), &cfg).unwrap();
        assert_eq!(out.poisoned_indices.len(), 4);
        for c in &out.changes {
            assert_eq!(c.new_label, 1 - c.old_label);
        }
    }

    #[test]
    fn quid_needs_two_clean_classes() {
        let ds = two_cluster_1q().with_labels(vec![0; 10]).unwrap();
        let err = quid_poison(&ds, &PoisonSpec::new(AttackMode::Quid, 0.5, 1), &EncoderConfig::angle(1, 1)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn random_flip_never_keeps_the_label() {
        let ds = synth_clusters(&SynthSpec::new(4, 2, 30, 0.3, 2)).unwrap();
        let out = random_flip(&ds, &PoisonSpec::new(AttackMode::RandomFlip, 0.6, 5)).unwrap();
        assert_eq!(out.poisoned_indices.len(), 72);
        assert!(out.changes.iter().all(|c| c.new_label != c.old_label && c.new_label < 4));
        assert_eq!(out.flipped(), 72);

        let two = two_cluster_1q();
        let out = random_flip(&two, &PoisonSpec::new(AttackMode::RandomFlip, 0.5, 5)).unwrap();
        assert!(out.changes.iter().all(|c| c.new_label == 1 - c.old_label));
    }

    #[test]
    fn bilevel_features_stay_in_range_and_follow_quid() {
        let ds = synth_clusters(&SynthSpec::new(3, 4, 10, 0.3, 2)).unwrap();
        let cfg = EncoderConfig::angle_for_dim(2, 4);
        let spec = PoisonSpec::new(AttackMode::BilevelRandom, 0.5, 13);
        let out = bilevel_random(&ds, &spec, &cfg).unwrap();
        for &i in &out.poisoned_indices {
            assert!(out.dataset.feature(i).iter().all(|&v| cfg.scale_range.contains(v)));
            assert_ne!(out.dataset.feature(i), ds.feature(i));
        }
        let again = quid_poison(&out.dataset, &PoisonSpec { mode: AttackMode::Quid, ..spec }, &cfg).unwrap();
        assert_eq!(again.dataset.labels(), out.dataset.labels());
    }

    #[test]
    fn outcome_csv_has_a_row_per_sample() {
        let ds = two_cluster_1q();
        let out = quid_poison(&ds, &PoisonSpec::new(AttackMode::Quid, 0.5, 2), &EncoderConfig::angle(1, 1)).unwrap();
        let csv = out.outcome_csv(&ds);
        assert_eq!(csv.lines().count(), 11);
        assert_eq!(csv.lines().filter(|l| l.ends_with(",1")).count(), 5);
    }
}
