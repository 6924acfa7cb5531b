//! Labeled datasets: CSV ingestion, synthetic clusters, splits and scaling.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Feature rows with integer class labels in `0..class_count`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_count: usize,
    header: Option<String>,
    provenance: String,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let dim = features.first().map_or(1, Vec::len);
        if dim == 0 {
            return Err(Error::Shape("feature dimension must be at least 1".into()));
        }
        if let Some(i) = features.iter().position(|r| r.len() != dim) {
            return Err(Error::Shape(format!("row {i} has {} features, expected {dim}", features[i].len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Shape(format!("label {bad} outside 0..{class_count}")));
        }
        Ok(Self {
            features,
            labels,
            class_count,
            header: None,
            provenance: String::new(),
        })
    }

    pub fn with_provenance(mut self, note: impl Into<String>) -> Self {
        self.provenance = note.into();
        self
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Indices of each class, in ascending order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            header: self.header.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Replaces labels, keeping features and class count.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        let mut out = Self::new(self.features.clone(), labels, self.class_count)?;
        out.header = self.header.clone();
        out.provenance = self.provenance.clone();
        Ok(out)
    }

    pub fn with_features(&self, features: Vec<Vec<f64>>) -> Result<Self> {
        let mut out = Self::new(features, self.labels.clone(), self.class_count)?;
        out.header = self.header.clone();
        out.provenance = self.provenance.clone();
        Ok(out)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        if let Some(h) = &self.header {
            out.push_str(h);
            out.push('\n');
        }
        for (row, label) in self.features.iter().zip(&self.labels) {
            for v in row {
                write!(out, "{v},").expect("string write");
            }
            writeln!(out, "{label}").expect("string write");
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, has_header, path)
    }

    /// Parses `d` feature columns followed by one integer label column.
    pub fn parse_csv(text: &str, has_header: bool, origin: &Path) -> Result<Self> {
        let mut lines = text
            .split('\n')
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let header = if has_header {
            lines.next().map(|(_, l)| l.to_string())
        } else {
            None
        };
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut width = None;
        for (idx, line) in lines {
            let row = idx + 1;
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() < 2 {
                return Err(Error::parse(origin, row, "need at least one feature column and a label"));
            }
            match width {
                None => width = Some(cells.len()),
                Some(w) if w != cells.len() => {
                    return Err(Error::parse(origin, row, format!("ragged row: {} columns, expected {w}", cells.len())));
                }
                _ => {}
            }
            let (label_cell, feature_cells) = cells.split_last().expect("non-empty");
            let x = feature_cells
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    cell.parse::<f64>().map_err(|_| {
                        Error::parse(origin, row, format!("column {}: `{cell}` is not a number", c + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let label: i64 = label_cell.parse().map_err(|_| {
                Error::parse(origin, row, format!("label `{label_cell}` is not an integer"))
            })?;
            if label < 0 {
                return Err(Error::parse(origin, row, format!("negative label {label}")));
            }
            features.push(x);
            labels.push(label as usize);
        }
        if labels.is_empty() {
            return Err(Error::parse(origin, 1, "no data rows"));
        }
        let class_count = labels.iter().max().expect("non-empty") + 1;
        let mut ds = Self::new(features, labels, class_count)?;
        ds.header = header;
        ds.provenance = format!("csv:{}", origin.display());
        Ok(ds)
    }
}

/// Closed interval used for feature scaling and synthetic data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ZERO_TWO_PI: Interval = Interval {
        lo: 0.0,
        hi: std::f64::consts::TAU,
    };
    pub const MINUS_PI_PI: Interval = Interval {
        lo: -std::f64::consts::PI,
        hi: std::f64::consts::PI,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Range(format!("interval [{lo}, {hi}] is empty or non-finite")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }
}

impl Default for Interval {
    fn default() -> Self {
        Self::ZERO_TWO_PI
    }
}

/// Per-feature min–max affine map onto a target interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    range: Interval,
}

impl FeatureScaler {
    pub fn fit(rows: &[Vec<f64>], range: Interval) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Degenerate("cannot fit a scaler on zero samples".into()))?;
        let mut mins = first.clone();
        let mut maxs = first.clone();
        for row in rows {
            if row.len() != mins.len() {
                return Err(Error::Shape("ragged feature matrix".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Ok(Self { mins, maxs, range })
    }

    pub fn range(&self) -> Interval {
        self.range
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.maxs[j] - self.mins[j];
                if span == 0.0 {
                    self.range.midpoint()
                } else {
                    let t = (v - self.mins[j]) / span;
                    (self.range.lo + t * self.range.width()).clamp(self.range.lo, self.range.hi)
                }
            })
            .collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.maxs[j] - self.mins[j];
                if span == 0.0 {
                    self.mins[j]
                } else {
                    self.mins[j] + (v - self.range.lo) / self.range.width() * span
                }
            })
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    pub fn transform_dataset(&self, ds: &LabeledDataset) -> LabeledDataset {
        ds.with_features(self.transform(ds.features()))
            .expect("shape preserved")
    }
}

/// Min–max scales every column onto `range`; constant columns map to the midpoint.
pub fn scale_features(rows: &[Vec<f64>], range: Interval) -> Result<Vec<Vec<f64>>> {
    Ok(FeatureScaler::fit(rows, range)?.transform(rows))
}

/// Parameters for [`synth_clusters`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub spread: f64,
    pub seed: u64,
    #[serde(default)]
    pub range: Interval,
}

impl SynthSpec {
    pub fn new(classes: usize, dim: usize, per_class: usize, spread: f64, seed: u64) -> Self {
        Self {
            classes,
            dim,
            per_class,
            spread,
            seed,
            range: Interval::ZERO_TWO_PI,
        }
    }
}

const MEAN_RETRIES: usize = 10_000;

/// Gaussian clusters around well-separated class means, clipped into range.
///
/// Class means are drawn uniformly in `range^dim` and rejected until every
/// pair is at least `range.width() / (2 C)` apart.
pub fn synth_clusters(spec: &SynthSpec) -> Result<LabeledDataset> {
    if spec.classes < 2 {
        return Err(Error::Config("synthetic data needs at least 2 classes".into()));
    }
    if spec.dim == 0 || spec.per_class == 0 {
        return Err(Error::Config("dimension and per-class count must be positive".into()));
    }
    if !(spec.spread >= 0.0) {
        return Err(Error::Range(format!("spread {} must be non-negative", spec.spread)));
    }
    let range = spec.range;
    let min_sep = range.width() / (2.0 * spec.classes as f64);
    let mut rng = seed::derived_rng(spec.seed, &[seed::label_key("synth-means")]);
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(spec.classes);
    let mut attempts = 0;
    while means.len() < spec.classes {
        attempts += 1;
        if attempts > MEAN_RETRIES {
            return Err(Error::Infeasible(format!(
                "could not place {} class means {min_sep:.3} apart in {} dimensions",
                spec.classes, spec.dim
            )));
        }
        let candidate: Vec<f64> = (0..spec.dim)
            .map(|_| rng.random_range(range.lo..range.hi))
            .collect();
        let far_enough = means.iter().all(|m| {
            m.iter()
                .zip(&candidate)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                >= min_sep
        });
        if far_enough {
            means.push(candidate);
        }
    }
    let mut rng = seed::derived_rng(spec.seed, &[seed::label_key("synth-samples")]);
    let noise = Normal::new(0.0, spec.spread.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Range(e.to_string()))?;
    let mut features = Vec::with_capacity(spec.classes * spec.per_class);
    let mut labels = Vec::with_capacity(spec.classes * spec.per_class);
    for (class, mean) in means.iter().enumerate() {
        for _ in 0..spec.per_class {
            let row = mean
                .iter()
                .map(|&m| {
                    if spec.spread == 0.0 {
                        m
                    } else {
                        (m + noise.sample(&mut rng)).clamp(range.lo, range.hi)
                    }
                })
                .collect();
            features.push(row);
            labels.push(class);
        }
    }
    Ok(LabeledDataset::new(features, labels, spec.classes)?.with_provenance(format!(
        "synth:classes={},dim={},per_class={},spread={},seed={}",
        spec.classes, spec.dim, spec.per_class, spec.spread, spec.seed
    )))
}

/// Deterministic index split; each side is returned in ascending order.
pub fn split_indices(
    ds: &LabeledDataset,
    train_fraction: f64,
    stratified: bool,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Range(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    let mut rng = seed::derived_rng(seed, &[seed::label_key("split")]);
    let groups: Vec<Vec<usize>> = if stratified {
        ds.class_indices()
    } else {
        vec![(0..ds.len()).collect()]
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut group in groups {
        group.shuffle(&mut rng);
        let k = round_half_up(train_fraction * group.len() as f64).min(group.len());
        train.extend_from_slice(&group[..k]);
        test.extend_from_slice(&group[k..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Degenerate(format!(
            "split of {} samples at {train_fraction} leaves one side empty",
            ds.len()
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(
    ds: &LabeledDataset,
    train_fraction: f64,
    stratified: bool,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (tr, te) = split_indices(ds, train_fraction, stratified, seed)?;
    Ok((ds.subset(&tr), ds.subset(&te)))
}

pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn parse(text: &str) -> Result<LabeledDataset> {
        LabeledDataset::parse_csv(text, false, Path::new("mem.csv"))
    }

    #[test]
    fn parses_minimal_csv() {
        let ds = parse("0.1,0.2,0\n0.3,0.4,1").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.class_count(), 2);
        assert_eq!(ds.feature(1), &[0.3, 0.4]);
    }

    #[test]
    fn accepts_crlf_and_header() {
        let ds = LabeledDataset::parse_csv("a,b,y\r\n1,2,0\r\n3,4,2\r\n", true, Path::new("m")).unwrap();
        assert_eq!(ds.labels(), &[0, 2]);
        assert_eq!(ds.class_count(), 3);
        assert!(ds.to_csv_string().starts_with("a,b,y\n"));
    }

    #[test]
    fn csv_errors_name_the_row() {
        let err = parse("1,2,0\n1,0\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("ragged"), "{err}");
        let err = parse("1,x,0\n").unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("not a number"), "{err}");
        let err = parse("1,2,0\n1,2,-1\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("negative"), "{err}");
        assert!(parse("").is_err());
        assert!(parse("\n\n").is_err());
    }

    #[test]
    fn scaling_rules() {
        let col = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
        let out = scale_features(&col(&[0.0, 1.0, 2.0]), Interval::ZERO_TWO_PI).unwrap();
        assert_eq!(out, col(&[0.0, PI, TAU]));
        let out = scale_features(&col(&[5.0, 5.0, 5.0]), Interval::ZERO_TWO_PI).unwrap();
        assert_eq!(out, col(&[PI, PI, PI]));
        let out = scale_features(&col(&[-1.0, 1.0]), Interval::MINUS_PI_PI).unwrap();
        assert_eq!(out, col(&[-PI, PI]));
        assert!(scale_features(&[], Interval::ZERO_TWO_PI).is_err());
    }

    #[test]
    fn scaler_inverse_recovers_raw_values() {
        let rows = vec![vec![1.0, -3.0], vec![2.5, 4.0], vec![7.0, 0.5]];
        let s = FeatureScaler::fit(&rows, Interval::ZERO_TWO_PI).unwrap();
        for r in &rows {
            let back = s.inverse_row(&s.transform_row(r));
            for (a, b) in back.iter().zip(r) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn synth_matches_requested_shape() {
        let ds = synth_clusters(&SynthSpec::new(4, 8, 250, 0.3, 7)).unwrap();
        assert_eq!(ds.len(), 1000);
        assert_eq!(ds.dim(), 8);
        assert!(ds.features().iter().flatten().all(|&v| Interval::ZERO_TWO_PI.contains(v)));
        assert_eq!(ds, synth_clusters(&SynthSpec::new(4, 8, 250, 0.3, 7)).unwrap());
    }

    #[test]
    fn zero_spread_collapses_to_means() {
        let ds = synth_clusters(&SynthSpec::new(3, 2, 5, 0.0, 1)).unwrap();
        for class in ds.class_indices() {
            let first = ds.feature(class[0]).to_vec();
            assert!(class.iter().all(|&i| ds.feature(i) == first.as_slice()));
        }
    }

    #[test]
    fn synth_rejects_single_class() {
        assert!(synth_clusters(&SynthSpec::new(1, 2, 5, 0.1, 1)).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = synth_clusters(&SynthSpec::new(4, 8, 250, 0.3, 3)).unwrap();
        let (tr, te) = split_indices(&ds, 0.7, false, 11).unwrap();
        assert_eq!((tr.len(), te.len()), (700, 300));
        assert_eq!((tr.clone(), te.clone()), split_indices(&ds, 0.7, false, 11).unwrap());
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());

        let (tr, _) = split(&ds, 0.7, true, 11).unwrap();
        for class in tr.class_indices() {
            assert!((174..=176).contains(&class.len()));
        }
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        let ds = parse("1,0\n2,1\n").unwrap();
        assert!(split(&ds, 0.0, false, 1).is_err());
        assert!(split(&ds, 1.0, false, 1).is_err());
        assert!(split(&ds, 0.9, false, 1).is_err());
    }

    proptest::proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            rows in proptest::collection::vec(
                (proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 3), 0usize..4),
                1..20,
            ),
        ) {
            let (features, labels): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            let ds = LabeledDataset::new(features, labels, 4).unwrap();
            let back = parse(&ds.to_csv_string()).unwrap();
            proptest::prop_assert_eq!(back.features(), ds.features());
            proptest::prop_assert_eq!(back.labels(), ds.labels());
        }
    }
}
