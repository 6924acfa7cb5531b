//! Encoder state similarity.
//!
//! Samples of one class should land close together in state space once
//! encoded. This module measures that by labeling held-out samples with the
//! class whose reference states are nearest on average, and reports how
//! often that label is right.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split_indices, LabeledDataset};
use crate::encode::{encode, EncoderConfig};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::simcore::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    Frobenius,
    Trace,
    HilbertSchmidt,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 3] = [
        DistanceMetric::Frobenius,
        DistanceMetric::Trace,
        DistanceMetric::HilbertSchmidt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::Frobenius => "frobenius",
            DistanceMetric::Trace => "trace",
            DistanceMetric::HilbertSchmidt => "hilbert_schmidt",
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frobenius" => Ok(DistanceMetric::Frobenius),
            "trace" => Ok(DistanceMetric::Trace),
            "hs" | "hilbert_schmidt" => Ok(DistanceMetric::HilbertSchmidt),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// d(σ, ρ) under the chosen metric.
///
/// * frobenius: ‖σ − ρ‖_F
/// * trace: ½ Σ |λ_i(σ − ρ)| (singular values of a Hermitian matrix are |λ|)
/// * hilbert_schmidt: 1 − |Tr(σ†ρ)| / dim, which is not zero at σ = ρ
pub fn distance(sigma: &DensityMatrix, rho: &DensityMatrix, metric: DistanceMetric) -> Result<f64> {
    if sigma.dim() != rho.dim() {
        return Err(Error::Shape(format!(
            "cannot compare {0}×{0} and {1}×{1} density matrices",
            sigma.dim(),
            rho.dim()
        )));
    }
    let (a, b) = (sigma.data(), rho.data());
    Ok(match metric {
        DistanceMetric::Frobenius => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt(),
        DistanceMetric::Trace => {
            let dim = sigma.dim();
            let diff = DMatrix::from_fn(dim, dim, |i, j| {
                let d_ij = a[i * dim + j] - b[i * dim + j];
                let d_ji = a[j * dim + i] - b[j * dim + i];
                (d_ij + d_ji.conj()) * 0.5
            });
            0.5 * diff.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>()
        }
        DistanceMetric::HilbertSchmidt => {
            let inner: num_complex::Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
            1.0 - inner.norm() / sigma.dim() as f64
        }
    })
}

/// Mean distance from `query` to the reference states of each class.
///
/// Entry `c` is `None` when class `c` has no reference states. Each class's
/// distances are summed in sorted order so the result does not depend on
/// the order of `reference`.
pub fn class_mean_distances(
    query: &DensityMatrix,
    reference: &[(DensityMatrix, usize)],
    metric: DistanceMetric,
) -> Result<Vec<Option<f64>>> {
    let classes = reference.iter().map(|(_, c)| c + 1).max().unwrap_or(0);
    let mut per_class = vec![Vec::new(); classes];
    for (state, class) in reference {
        per_class[*class].push(distance(query, state, metric)?);
    }
    Ok(per_class
        .into_iter()
        .map(|mut ds| {
            if ds.is_empty() {
                return None;
            }
            ds.sort_by(f64::total_cmp);
            Some(ds.iter().sum::<f64>() / ds.len() as f64)
        })
        .collect())
}

/// Index of the smallest (or largest) present entry; ties go to the lowest index.
pub(crate) fn extreme_class(means: &[Option<f64>], largest: bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (c, m) in means.iter().enumerate() {
        let Some(m) = *m else { continue };
        let better = match best {
            None => true,
            Some((_, b)) => {
                if largest {
                    m > b
                } else {
                    m < b
                }
            }
        };
        if better {
            best = Some((c, m));
        }
    }
    best.map(|(c, _)| c)
}

/// The class whose reference states are nearest on average.
pub fn nearest_class_label(
    rho: &DensityMatrix,
    reference: &[(DensityMatrix, usize)],
    metric: DistanceMetric,
) -> Result<usize> {
    if reference.is_empty() {
        return Err(Error::Shape("reference set is empty".into()));
    }
    let means = class_mean_distances(rho, reference, metric)?;
    Ok(extreme_class(&means, false).expect("non-empty reference"))
}

/// How the dataset is divided into reference and held-out samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutSplit {
    pub fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for HoldoutSplit {
    fn default() -> Self {
        Self {
            fraction: 0.5,
            seed: 0,
            stratified: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDistances {
    pub class: usize,
    pub intra_mean: f64,
    pub inter_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssReport {
    pub metric: DistanceMetric,
    pub per_class: Vec<ClassDistances>,
    pub accuracy: f64,
    pub n_reference: usize,
    pub n_holdout: usize,
    /// Wall-clock seconds spent on distance evaluation and labeling.
    pub seconds: f64,
}

impl EssReport {
    /// `metric,class,intra_mean,inter_mean` rows.
    pub fn class_rows_csv(&self, with_header: bool) -> String {
        let mut out = String::new();
        if with_header {
            out.push_str("metric,class,intra_mean,inter_mean\n");
        }
        for row in &self.per_class {
            writeln!(out, "{},{},{},{}", self.metric, row.class, row.intra_mean, row.inter_mean)
                .expect("string write");
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "metric": self.metric.name(),
            "accuracy": self.accuracy,
            "n_reference": self.n_reference,
            "n_holdout": self.n_holdout,
            "seconds": self.seconds,
        })
    }
}

pub(crate) fn encode_all(
    ds: &LabeledDataset,
    indices: &[usize],
    cfg: &EncoderConfig,
    noise: Option<&NoiseModel>,
) -> Result<Vec<(DensityMatrix, usize)>> {
    indices
        .par_iter()
        .map(|&i| Ok((encode(ds.feature(i), cfg, noise)?, ds.label(i))))
        .collect()
}

/// Labels held-out samples by nearest class and scores the labels.
pub fn validate_ess(
    ds: &LabeledDataset,
    cfg: &EncoderConfig,
    metric: DistanceMetric,
    noise: Option<&NoiseModel>,
    split: &HoldoutSplit,
) -> Result<EssReport> {
    let present = ds.class_indices().iter().filter(|c| !c.is_empty()).count();
    if present < 2 {
        return Err(Error::Degenerate("ESS validation needs at least two classes".into()));
    }
    if !(split.fraction > 0.0 && split.fraction < 1.0) {
        return Err(Error::Range(format!("holdout fraction {} not in (0, 1)", split.fraction)));
    }
    let (ref_idx, hold_idx) = split_indices(ds, 1.0 - split.fraction, split.stratified, split.seed)?;
    let reference = encode_all(ds, &ref_idx, cfg, noise)?;
    let holdout = encode_all(ds, &hold_idx, cfg, noise)?;

    let start = Instant::now();
    let scored: Vec<(usize, usize, Vec<Option<f64>>)> = holdout
        .par_iter()
        .map(|(rho, label)| {
            let means = class_mean_distances(rho, &reference, metric)?;
            let predicted = extreme_class(&means, false).expect("non-empty reference");
            Ok((*label, predicted, means))
        })
        .collect::<Result<_>>()?;
    let seconds = start.elapsed().as_secs_f64();

    let correct = scored.iter().filter(|(y, p, _)| y == p).count();
    let mut per_class = Vec::new();
    for class in 0..ds.class_count() {
        let rows: Vec<&Vec<Option<f64>>> = scored
            .iter()
            .filter(|(y, _, _)| *y == class)
            .map(|(_, _, m)| m)
            .collect();
        if rows.is_empty() {
            continue;
        }
        let mut intra = 0.0;
        let mut inter = 0.0;
        let mut inter_n = 0usize;
        for means in &rows {
            intra += means.get(class).copied().flatten().unwrap_or(f64::NAN);
            for (c, m) in means.iter().enumerate() {
                if let (true, Some(m)) = (c != class, m) {
                    inter += m;
                    inter_n += 1;
                }
            }
        }
        per_class.push(ClassDistances {
            class,
            intra_mean: intra / rows.len() as f64,
            inter_mean: if inter_n == 0 { f64::NAN } else { inter / inter_n as f64 },
        });
    }
    Ok(EssReport {
        metric,
        per_class,
        accuracy: correct as f64 / scored.len() as f64,
        n_reference: reference.len(),
        n_holdout: scored.len(),
        seconds,
    })
}

/// ESS accuracy for every (encoder, noise level) pair on a shared split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingComparison {
    pub noise_levels: Vec<f64>,
    /// `accuracy[i][j]`: encoder `i` at noise level `j`.
    pub accuracy: Vec<Vec<f64>>,
}

/// Noise level `p` means amplitude damping and depolarizing, both at `p`,
/// after every gate; `p = 0` runs noiseless.
pub fn compare_encodings(
    ds: &LabeledDataset,
    cfgs: &[EncoderConfig],
    metric: DistanceMetric,
    noise_levels: &[f64],
    split: &HoldoutSplit,
) -> Result<EncodingComparison> {
    if cfgs.is_empty() {
        return Err(Error::Config("no encoder configurations to compare".into()));
    }
    let accuracy = cfgs
        .iter()
        .map(|cfg| {
            noise_levels
                .iter()
                .map(|&p| {
                    let model = (p > 0.0).then(|| NoiseModel::uniform(p)).transpose()?;
                    Ok(validate_ess(ds, cfg, metric, model.as_ref(), split)?.accuracy)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodingComparison {
        noise_levels: noise_levels.to_vec(),
        accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_clusters, SynthSpec};
    use std::f64::consts::PI;

    fn basis(bit: usize) -> DensityMatrix {
        let mut rho = DensityMatrix::ground_state(1).unwrap();
        if bit == 1 {
            rho.apply_gate_mut(&crate::simcore::GateOp::x(0)).unwrap();
        }
        rho
    }

    fn equatorial(angle: f64) -> DensityMatrix {
        encode(&[angle], &EncoderConfig::angle(1, 1), None).unwrap()
    }

    #[test]
    fn metric_examples() {
        let (z, o) = (basis(0), basis(1));
        assert!((distance(&z, &o, DistanceMetric::Frobenius).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!((distance(&z, &o, DistanceMetric::Trace).unwrap() - 1.0).abs() < 1e-12);
        let p = equatorial(0.8);
        assert!((distance(&p, &p, DistanceMetric::HilbertSchmidt).unwrap() - 0.5).abs() < 1e-12);
        assert!(distance(&z, &DensityMatrix::ground_state(2).unwrap(), DistanceMetric::Trace).is_err());
    }

    #[test]
    fn nearest_label_examples() {
        let reference = vec![(equatorial(0.0), 0), (equatorial(0.1), 0), (equatorial(PI), 1), (equatorial(PI - 0.1), 1)];
        assert_eq!(nearest_class_label(&equatorial(0.05), &reference, DistanceMetric::Frobenius).unwrap(), 0);
        assert_eq!(nearest_class_label(&equatorial(PI), &reference, DistanceMetric::Trace).unwrap(), 1);

        let single = vec![(equatorial(2.0), 3)];
        assert_eq!(nearest_class_label(&equatorial(0.0), &single, DistanceMetric::Frobenius).unwrap(), 3);

        // query on the equator between |0⟩ and |1⟩ is equidistant
        let tie = vec![(basis(0), 0), (basis(1), 1)];
        for m in DistanceMetric::ALL {
            assert_eq!(nearest_class_label(&equatorial(0.3), &tie, m).unwrap(), 0);
        }
        assert!(nearest_class_label(&basis(0), &[], DistanceMetric::Frobenius).is_err());
    }

    #[test]
    fn metric_names_parse() {
        assert_eq!("hs".parse::<DistanceMetric>().unwrap(), DistanceMetric::HilbertSchmidt);
        assert!("fidelity".parse::<DistanceMetric>().is_err());
    }

    #[test]
    fn separated_clusters_label_well() {
        let ds = synth_clusters(&SynthSpec::new(4, 8, 60, 0.2, 3)).unwrap();
        let cfg = EncoderConfig::angle_for_dim(4, 8);
        let report = validate_ess(&ds, &cfg, DistanceMetric::Frobenius, None, &HoldoutSplit::default()).unwrap();
        assert!(report.accuracy >= 0.95, "{}", report.accuracy);
        assert_eq!(report.per_class.len(), 4);
        for row in &report.per_class {
            assert!(row.intra_mean < row.inter_mean);
        }
        assert_eq!(report.class_rows_csv(true).lines().count(), 5);
    }

    #[test]
    fn identical_encoders_give_identical_columns() {
        let ds = synth_clusters(&SynthSpec::new(3, 4, 20, 0.3, 9)).unwrap();
        let cfg = EncoderConfig::angle_for_dim(2, 4);
        let split = HoldoutSplit::default();
        let cmp = compare_encodings(&ds, &[cfg.clone(), cfg.clone()], DistanceMetric::Frobenius, &[0.0, 0.05], &split).unwrap();
        assert_eq!(cmp.accuracy[0], cmp.accuracy[1]);
        let plain = validate_ess(&ds, &cfg, DistanceMetric::Frobenius, None, &split).unwrap();
        assert_eq!(cmp.accuracy[0][0], plain.accuracy);
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let ds = synth_clusters(&SynthSpec::new(2, 2, 4, 0.3, 1)).unwrap();
        let one_class = ds.with_labels(vec![0; ds.len()]).unwrap();
        let cfg = EncoderConfig::angle(1, 2);
        assert!(validate_ess(&one_class, &cfg, DistanceMetric::Frobenius, None, &HoldoutSplit::default()).is_err());
        let bad = HoldoutSplit { fraction: 1.0, ..HoldoutSplit::default() };
        assert!(validate_ess(&ds, &cfg, DistanceMetric::Frobenius, None, &bad).is_err());
    }
}
