//! Partition-aggregation defense.
//!
//! The training set is split into k disjoint partitions by a seeded hash of
//! the sample index, one QNN is trained per partition, and predictions are a
//! plurality vote. A poisoned sample can only influence the single member
//! whose partition contains it.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::qnn::{argmax, load_checkpoint, save_checkpoint, train, QnnModel, TrainConfig, TrainReport};
use crate::seed;

/// Deterministic k-way partition of `0..n`.
///
/// Indices are ranked by `derive(seed, index)` and dealt round-robin by rank,
/// so partition sizes differ by at most one, `k = 1` is the whole set and
/// `k = n` gives singletons. Each partition is sorted ascending.
pub fn partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(Error::Range("partition count must be positive".into()));
    }
    if k > n {
        return Err(Error::Range(format!("cannot split {n} samples into {k} partitions")));
    }
    let mut ranked: Vec<(u64, usize)> = (0..n).map(|i| (seed::derive(seed, &[i as u64]), i)).collect();
    ranked.sort_unstable();
    let mut parts = vec![Vec::with_capacity(n / k + 1); k];
    for (rank, (_, i)) in ranked.into_iter().enumerate() {
        parts[rank % k].push(i);
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok(parts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefenseConfig {
    pub k: usize,
    pub train: TrainConfig,
    pub partition_seed: u64,
}

impl DefenseConfig {
    pub fn new(k: usize, train: TrainConfig, partition_seed: u64) -> Self {
        Self {
            k,
            train,
            partition_seed,
        }
    }

    /// Training config for member `m`. Member 0 keeps the base seed so a
    /// one-member ensemble is exactly the undefended model.
    pub fn member_config(&self, m: usize) -> TrainConfig {
        let mut cfg = self.train.clone();
        if m > 0 {
            cfg.seed = seed::derive(self.train.seed, &[seed::label_key("member"), m as u64]);
        }
        cfg
    }
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self::new(3, TrainConfig::default(), 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    pub members: Vec<QnnModel>,
    pub partitions: Vec<Vec<usize>>,
}

/// Plurality vote over member predictions; ties go to the smallest class.
pub fn vote(predictions: &[usize], n_classes: usize) -> Result<usize> {
    if predictions.is_empty() {
        return Err(Error::Shape("cannot vote with an empty ensemble".into()));
    }
    let mut counts = vec![0usize; n_classes.max(1)];
    for &p in predictions {
        if p >= counts.len() {
            counts.resize(p + 1, 0);
        }
        counts[p] += 1;
    }
    let best = *counts.iter().max().expect("non-empty");
    Ok(counts.iter().position(|&c| c == best).expect("max exists"))
}

impl EnsembleModel {
    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn n_classes(&self) -> usize {
        self.members.first().map_or(0, QnnModel::n_classes)
    }

    pub fn member_predictions(&self, x: &[f64], noise: Option<&NoiseModel>, shots: u32, seed: u64) -> Result<Vec<usize>> {
        self.members
            .iter()
            .enumerate()
            .map(|(m, model)| model.predict(x, noise, shots, seed::derive(seed, &[m as u64])))
            .collect()
    }

    pub fn predict(&self, x: &[f64], noise: Option<&NoiseModel>, shots: u32, seed: u64) -> Result<usize> {
        vote(&self.member_predictions(x, noise, shots, seed)?, self.n_classes())
    }

    /// Fraction of samples whose vote matches the label.
    pub fn accuracy(&self, ds: &LabeledDataset, noise: Option<&NoiseModel>, shots: u32, seed: u64) -> Result<f64> {
        if ds.is_empty() {
            return Err(Error::Shape("cannot evaluate on an empty dataset".into()));
        }
        let hits: Vec<bool> = (0..ds.len())
            .into_par_iter()
            .map(|i| Ok(self.predict(ds.feature(i), noise, shots, seed::derive(seed, &[i as u64]))? == ds.label(i)))
            .collect::<Result<_>>()?;
        Ok(hits.iter().filter(|&&h| h).count() as f64 / ds.len() as f64)
    }

    /// Writes `member_<m>.json` per member plus `partition.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (m, model) in self.members.iter().enumerate() {
            save_checkpoint(model, dir.join(format!("member_{m}.json")))?;
        }
        let path = dir.join("partition.json");
        let map = PartitionMap {
            k: self.k(),
            partitions: self.partitions.clone(),
        };
        std::fs::write(&path, serde_json::to_string_pretty(&map)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("partition.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let map: PartitionMap = serde_json::from_str(&text)?;
        if map.partitions.len() != map.k {
            return Err(Error::Config(format!("partition map lists {} partitions for k = {}", map.partitions.len(), map.k)));
        }
        let members = (0..map.k)
            .map(|m| load_checkpoint(dir.join(format!("member_{m}.json"))))
            .collect::<Result<_>>()?;
        Ok(Self {
            members,
            partitions: map.partitions,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PartitionMap {
    k: usize,
    partitions: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct EnsembleTraining {
    pub ensemble: EnsembleModel,
    pub reports: Vec<TrainReport>,
    /// Partitions missing at least one class of the training set.
    pub warnings: Vec<String>,
}

/// Trains one member per partition of `train_set`. Members train
/// independently and in parallel.
pub fn train_ensemble(
    prototype: &QnnModel,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    config: &DefenseConfig,
) -> Result<EnsembleTraining> {
    let partitions = partition(train_set.len(), config.k, config.partition_seed)?;
    let present: Vec<bool> = train_set.class_indices().iter().map(|c| !c.is_empty()).collect();
    let mut warnings = Vec::new();
    for (m, part) in partitions.iter().enumerate() {
        let mut seen = vec![false; present.len()];
        for &i in part {
            seen[train_set.label(i)] = true;
        }
        let missing: Vec<usize> = (0..present.len()).filter(|&c| present[c] && !seen[c]).collect();
        if !missing.is_empty() {
            warnings.push(format!("partition {m} has no samples of classes {missing:?}"));
        }
    }
    let reports: Vec<TrainReport> = partitions
        .par_iter()
        .enumerate()
        .map(|(m, part)| train(prototype, &train_set.subset(part), test_set, &config.member_config(m)))
        .collect::<Result<_>>()?;
    Ok(EnsembleTraining {
        ensemble: EnsembleModel {
            members: reports.iter().map(|r| r.model.clone()).collect(),
            partitions,
        },
        reports,
        warnings,
    })
}

/// Vote margin: top count minus runner-up count.
pub fn vote_gap(predictions: &[usize], n_classes: usize) -> usize {
    let mut counts = vec![0usize; n_classes.max(1)];
    for &p in predictions {
        if p >= counts.len() {
            counts.resize(p + 1, 0);
        }
        counts[p] += 1;
    }
    let winner = argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
    let runner_up = counts
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != winner)
        .map(|(_, &n)| n)
        .max()
        .unwrap_or(0);
    counts[winner] - runner_up
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, synth_clusters, SynthSpec};
    use crate::encode::EncoderConfig;
    use crate::pqc::{build_template, Preset};
    use proptest::prelude::*;

    #[test]
    fn partition_edge_cases() {
        assert_eq!(partition(5, 1, 3).unwrap(), vec![vec![0, 1, 2, 3, 4]]);
        let singles = partition(4, 4, 3).unwrap();
        assert!(singles.iter().all(|p| p.len() == 1));
        assert_eq!(partition(20, 3, 8).unwrap(), partition(20, 3, 8).unwrap());
        assert_ne!(partition(20, 3, 8).unwrap(), partition(20, 3, 9).unwrap());
        assert!(partition(3, 4, 0).is_err());
        assert!(partition(3, 0, 0).is_err());
    }

    #[test]
    fn vote_examples() {
        assert_eq!(vote(&[2, 2, 2], 3).unwrap(), 2);
        assert_eq!(vote(&[0, 1, 1], 2).unwrap(), 1);
        assert_eq!(vote(&[0, 1], 2).unwrap(), 0);
        assert_eq!(vote(&[3, 1], 4).unwrap(), 1);
        assert!(vote(&[], 2).is_err());
        assert_eq!(vote_gap(&[0, 1, 1], 2), 1);
        assert_eq!(vote_gap(&[2, 2, 2], 3), 3);
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_and_covering(n in 1usize..200, k in 1usize..10, seed: u64) {
            prop_assume!(k <= n);
            let parts = partition(n, k, seed).unwrap();
            let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn unanimous_vote_is_the_shared_prediction(c in 0usize..5, k in 1usize..8) {
            prop_assert_eq!(vote(&vec![c; k], 5).unwrap(), c);
        }
    }

    /// Changing fewer than ⌈gap/2⌉ member predictions never moves the vote.
    #[test]
    fn vote_is_stable_below_half_the_gap() {
        let classes: usize = 3;
        for k in 1..=5usize {
            let total = classes.pow(k as u32);
            for code in 0..total {
                let preds: Vec<usize> = (0..k).map(|m| code / classes.pow(m as u32) % classes).collect();
                let base = vote(&preds, classes).unwrap();
                let budget = vote_gap(&preds, classes).div_ceil(2);
                for mask in 0..(1usize << k) {
                    let changed = mask.count_ones() as usize;
                    if changed >= budget {
                        continue;
                    }
                    let members: Vec<usize> = (0..k).filter(|m| mask >> m & 1 == 1).collect();
                    for repl in 0..classes.pow(changed as u32) {
                        let mut p = preds.clone();
                        for (j, &m) in members.iter().enumerate() {
                            p[m] = repl / classes.pow(j as u32) % classes;
                        }
                        assert_eq!(vote(&p, classes).unwrap(), base, "{preds:?} -> {p:?}");
                    }
                }
            }
        }
    }

    fn setup() -> (QnnModel, LabeledDataset, LabeledDataset) {
        let ds = synth_clusters(&SynthSpec::new(2, 2, 30, 0.2, 4)).unwrap();
        let (tr, te) = split(&ds, 0.7, true, 4).unwrap();
        let model = QnnModel::new(EncoderConfig::angle(2, 1), build_template(Preset::Pqc1, 2, 1).unwrap(), 2, 1).unwrap();
        (model, tr, te)
    }

    #[test]
    fn single_member_matches_plain_training() {
        let (model, tr, te) = setup();
        let base = TrainConfig {
            epochs: 2,
            seed: 3,
            ..TrainConfig::default()
        };
        let plain = train(&model, &tr, &te, &base).unwrap();
        let ens = train_ensemble(&model, &tr, &te, &DefenseConfig::new(1, base, 9)).unwrap();
        assert_eq!(ens.reports.len(), 1);
        assert_eq!(ens.reports[0].model, plain.model);
        assert_eq!(ens.reports[0].test_accuracy, plain.test_accuracy);
    }

    #[test]
    fn ensemble_round_trips_through_a_directory() {
        let (model, tr, te) = setup();
        let cfg = DefenseConfig::new(
            3,
            TrainConfig {
                epochs: 1,
                ..TrainConfig::default()
            },
            2,
        );
        let out = train_ensemble(&model, &tr, &te, &cfg).unwrap();
        assert_eq!(out.reports.len(), 3);
        let seeds: Vec<u64> = (0..3).map(|m| cfg.member_config(m).seed).collect();
        assert!(seeds[0] != seeds[1] && seeds[1] != seeds[2]);
        let dir = tempfile::tempdir().unwrap();
        out.ensemble.save(dir.path()).unwrap();
        assert_eq!(EnsembleModel::load(dir.path()).unwrap(), out.ensemble);
    }
}
