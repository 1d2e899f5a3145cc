//! Labelled feature vectors, CSV ingestion, and synthetic multi-modal data.
//!
//! Datasets keep positives first, negatives after, regardless of input
//! order; the original row position of every sample is retained so reports
//! can point back at source rows. The CSV format is headerless:
//! `label,f1,...,fD` with labels `1`/`+1`/`-1` and constant dimension.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    /// Returns +1.0 or -1.0.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_value(value: f64) -> Option<Self> {
        if value == 1.0 {
            Some(Label::Positive)
        } else if value == -1.0 {
            Some(Label::Negative)
        } else {
            None
        }
    }
}

/// One labelled feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Label,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: Label) -> Result<Self> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(
                "sample features must be finite".to_string(),
            ));
        }
        Ok(Sample { features, label })
    }
}

/// A dataset ordered positives-first.
///
/// `mode_ids`, when present, records one planted ground-truth subclass id per
/// positive sample; `-1` marks a planted outlier.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    n_pos: usize,
    n_neg: usize,
    dim: usize,
    mode_ids: Option<Vec<i64>>,
    source_rows: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from samples in arbitrary order.
    ///
    /// Samples are stably reordered positives-first and their original
    /// positions recorded. Requires at least one sample of each class and a
    /// consistent feature dimension.
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let dim = match samples.first() {
            Some(s) => s.features.len(),
            None => return Err(Error::EmptyClass { class: "positive" }),
        };
        for s in &samples {
            if s.features.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: s.features.len(),
                });
            }
        }
        let mut ordered = Vec::with_capacity(samples.len());
        let mut source_rows = Vec::with_capacity(samples.len());
        for (row, s) in samples.iter().enumerate() {
            if s.label == Label::Positive {
                ordered.push(s.clone());
                source_rows.push(row);
            }
        }
        let n_pos = ordered.len();
        for (row, s) in samples.iter().enumerate() {
            if s.label == Label::Negative {
                ordered.push(s.clone());
                source_rows.push(row);
            }
        }
        let n_neg = ordered.len() - n_pos;
        if n_pos == 0 {
            return Err(Error::EmptyClass { class: "positive" });
        }
        if n_neg == 0 {
            return Err(Error::EmptyClass { class: "negative" });
        }
        Ok(Dataset {
            samples: ordered,
            n_pos,
            n_neg,
            dim,
            mode_ids: None,
            source_rows,
        })
    }

    /// Builds a positives-first dataset directly, trusting the given order.
    fn from_ordered(
        samples: Vec<Sample>,
        n_pos: usize,
        mode_ids: Option<Vec<i64>>,
        source_rows: Vec<usize>,
    ) -> Self {
        let n_neg = samples.len() - n_pos;
        let dim = samples.first().map_or(0, |s| s.features.len());
        debug_assert!(samples[..n_pos].iter().all(|s| s.label == Label::Positive));
        debug_assert!(samples[n_pos..].iter().all(|s| s.label == Label::Negative));
        Dataset {
            samples,
            n_pos,
            n_neg,
            dim,
            mode_ids,
            source_rows,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, idx: usize) -> &Sample {
        &self.samples[idx]
    }

    /// The positive samples, indices `0..n_pos`.
    pub fn positives(&self) -> &[Sample] {
        &self.samples[..self.n_pos]
    }

    /// The negative samples, indices `n_pos..len`.
    pub fn negatives(&self) -> &[Sample] {
        &self.samples[self.n_pos..]
    }

    /// Planted ground-truth subclass ids, one per positive (`-1` = outlier).
    pub fn mode_ids(&self) -> Option<&[i64]> {
        self.mode_ids.as_deref()
    }

    /// Original input-row position of each stored sample.
    pub fn source_rows(&self) -> &[usize] {
        &self.source_rows
    }

    /// Attaches planted ground truth, one id per positive sample.
    pub fn attach_mode_ids(&mut self, mode_ids: Vec<i64>) -> Result<()> {
        if mode_ids.len() != self.n_pos {
            return Err(Error::Dimension {
                expected: self.n_pos,
                found: mode_ids.len(),
            });
        }
        self.mode_ids = Some(mode_ids);
        Ok(())
    }

    /// A new dataset containing only the given positives plus all negatives.
    ///
    /// `keep` holds positive indices into this dataset; their relative order
    /// is preserved.
    pub fn restrict_positives(&self, keep: &[usize]) -> Dataset {
        let mut samples = Vec::with_capacity(keep.len() + self.n_neg);
        let mut source_rows = Vec::with_capacity(keep.len() + self.n_neg);
        let mode_ids = self.mode_ids.as_ref().map(|ids| {
            keep.iter().map(|&i| ids[i]).collect::<Vec<_>>()
        });
        for &i in keep {
            assert!(i < self.n_pos, "positive index out of range");
            samples.push(self.samples[i].clone());
            source_rows.push(self.source_rows[i]);
        }
        for i in self.n_pos..self.samples.len() {
            samples.push(self.samples[i].clone());
            source_rows.push(self.source_rows[i]);
        }
        Dataset::from_ordered(samples, keep.len(), mode_ids, source_rows)
    }

    /// Loads a headerless CSV of `label,f1,...,fD` rows.
    ///
    /// Rows are reordered positives-first (stable within each class).
    /// Row numbers in errors are 1-based.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);
        let mut samples = Vec::new();
        let mut dim: Option<usize> = None;
        for (idx, line) in reader.lines().enumerate() {
            let row = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let label_field = fields.next().unwrap_or("").trim();
            let label_value: f64 = label_field.parse().map_err(|_| Error::Parse {
                row,
                message: format!("cannot parse label {label_field:?}"),
            })?;
            let label = Label::from_value(label_value).ok_or_else(|| Error::Parse {
                row,
                message: format!("label must be +1 or -1, got {label_field:?}"),
            })?;
            let mut features = Vec::new();
            for field in fields {
                let field = field.trim();
                let value: f64 = field.parse().map_err(|_| Error::Parse {
                    row,
                    message: format!("cannot parse feature {field:?}"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse {
                        row,
                        message: format!("feature {field:?} is not finite"),
                    });
                }
                features.push(value);
            }
            match dim {
                None => dim = Some(features.len()),
                Some(d) if d != features.len() => {
                    return Err(Error::Dimension {
                        expected: d,
                        found: features.len(),
                    })
                }
                _ => {}
            }
            samples.push(Sample { features, label });
        }
        Dataset::new(samples)
    }

    /// Writes the dataset back in the same CSV format, full precision.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for s in &self.samples {
            let _ = write!(out, "{}", if s.label == Label::Positive { 1 } else { -1 });
            for v in &s.features {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Writes the `{ "mode_ids": [...] }` ground-truth sidecar.
    pub fn write_mode_ids(&self, path: impl AsRef<Path>) -> Result<()> {
        let ids = self
            .mode_ids
            .as_ref()
            .ok_or_else(|| Error::InvalidSpec("dataset has no mode ids".to_string()))?;
        let sidecar = ModeIdSidecar {
            mode_ids: ids.clone(),
        };
        let json = serde_json::to_string(&sidecar)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Reads a `{ "mode_ids": [...] }` sidecar file.
    pub fn load_mode_ids(path: impl AsRef<Path>) -> Result<Vec<i64>> {
        let text = std::fs::read_to_string(path)?;
        let sidecar: ModeIdSidecar = serde_json::from_str(&text)?;
        Ok(sidecar.mode_ids)
    }

    /// Row count, dimension, and a content hash of the stored samples.
    pub fn fingerprint(&self) -> DatasetFingerprint {
        let mut hasher = Sha256::new();
        let mut line = String::new();
        for s in &self.samples {
            line.clear();
            let _ = write!(line, "{}", if s.label == Label::Positive { 1 } else { -1 });
            for v in &s.features {
                let _ = write!(line, ",{v}");
            }
            line.push('\n');
            hasher.update(line.as_bytes());
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        DatasetFingerprint {
            rows: self.samples.len(),
            dim: self.dim,
            content_hash: hex,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModeIdSidecar {
    mode_ids: Vec<i64>,
}

/// Identity of the dataset an ensemble was mined from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub rows: usize,
    pub dim: usize,
    pub content_hash: String,
}

/// One isotropic Gaussian mode of planted positives.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpec {
    pub mean: Vec<f64>,
    pub stddev: f64,
    pub count: usize,
}

/// Recipe for a synthetic multi-modal dataset.
///
/// Positives are drawn per mode; planted outliers are positives drawn
/// uniformly inside a ball of radius `2 * neg_spread` around the negative
/// mean (the origin), so they sit in negative-dominated territory.
/// Negatives come from a zero-mean Gaussian with stddev `neg_spread`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub dim: usize,
    pub modes: Vec<ModeSpec>,
    pub outlier_count: usize,
    pub neg_count: usize,
    pub neg_spread: f64,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidSpec("dim must be >= 1".to_string()));
        }
        if self.neg_count == 0 {
            return Err(Error::InvalidSpec("neg_count must be >= 1".to_string()));
        }
        if !(self.neg_spread > 0.0) {
            return Err(Error::InvalidSpec("neg_spread must be positive".to_string()));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if m.mean.len() != self.dim {
                return Err(Error::InvalidSpec(format!(
                    "mode {i} mean has dimension {}, expected {}",
                    m.mean.len(),
                    self.dim
                )));
            }
            if !(m.stddev > 0.0) {
                return Err(Error::InvalidSpec(format!("mode {i} stddev must be positive")));
            }
        }
        for i in 0..self.modes.len() {
            for j in (i + 1)..self.modes.len() {
                if self.modes[i].mean == self.modes[j].mean {
                    return Err(Error::InvalidSpec(format!(
                        "mode means {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Generates a dataset from a synthesis spec; pure in the spec (and seed).
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = StandardNormal;
    let mut samples = Vec::new();
    let mut mode_ids = Vec::new();

    for (mode_idx, mode) in spec.modes.iter().enumerate() {
        for _ in 0..mode.count {
            let features: Vec<f64> = (0..spec.dim)
                .map(|d| {
                    let z: f64 = normal.sample(&mut rng);
                    mode.mean[d] + mode.stddev * z
                })
                .collect();
            samples.push(Sample {
                features,
                label: Label::Positive,
            });
            mode_ids.push(mode_idx as i64);
        }
    }

    // Planted outliers: uniform inside a ball of radius 2 * neg_spread
    // around the negative mean, labelled positive.
    let radius = 2.0 * spec.neg_spread;
    for _ in 0..spec.outlier_count {
        let direction: Vec<f64> = (0..spec.dim).map(|_| normal.sample(&mut rng)).collect();
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let u: f64 = rng.random_range(0.0..1.0);
        let r = radius * u.powf(1.0 / spec.dim as f64);
        let features: Vec<f64> = direction.iter().map(|v| v / norm * r).collect();
        samples.push(Sample {
            features,
            label: Label::Positive,
        });
        mode_ids.push(-1);
    }

    let n_pos = samples.len();
    for _ in 0..spec.neg_count {
        let features: Vec<f64> = (0..spec.dim)
            .map(|_| {
                let z: f64 = normal.sample(&mut rng);
                spec.neg_spread * z
            })
            .collect();
        samples.push(Sample {
            features,
            label: Label::Negative,
        });
    }

    let source_rows = (0..samples.len()).collect();
    Ok(Dataset::from_ordered(
        samples,
        n_pos,
        Some(mode_ids),
        source_rows,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_mode_spec(seed: u64) -> SynthSpec {
        SynthSpec {
            dim: 2,
            modes: vec![
                ModeSpec {
                    mean: vec![3.0, 3.0],
                    stddev: 0.5,
                    count: 20,
                },
                ModeSpec {
                    mean: vec![-3.0, 3.0],
                    stddev: 0.5,
                    count: 10,
                },
            ],
            outlier_count: 3,
            neg_count: 40,
            neg_spread: 1.0,
            seed,
        }
    }

    #[test]
    fn new_reorders_positives_first_and_keeps_source_rows() {
        let samples = vec![
            Sample::new(vec![-1.0, 0.0], Label::Negative).unwrap(),
            Sample::new(vec![1.0, 0.0], Label::Positive).unwrap(),
            Sample::new(vec![-2.0, 0.0], Label::Negative).unwrap(),
            Sample::new(vec![2.0, 0.0], Label::Positive).unwrap(),
        ];
        let ds = Dataset::new(samples).unwrap();
        assert_eq!(ds.n_pos(), 2);
        assert_eq!(ds.n_neg(), 2);
        assert_eq!(ds.sample(0).features[0], 1.0);
        assert_eq!(ds.sample(1).features[0], 2.0);
        assert_eq!(ds.source_rows(), &[1, 3, 0, 2]);
    }

    #[test]
    fn load_csv_minimal_and_reordering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "+1,1.0,0.0\n-1,-1.0,0.0\n").unwrap();
        let ds = Dataset::load_csv(&path).unwrap();
        assert_eq!((ds.n_pos(), ds.n_neg(), ds.dim()), (1, 1, 2));

        std::fs::write(&path, "-1,-1.0,0.0\n+1,1.0,0.0\n").unwrap();
        let ds = Dataset::load_csv(&path).unwrap();
        assert_eq!(ds.sample(0).label, Label::Positive);
        assert_eq!(ds.source_rows(), &[1, 0]);
    }

    #[test]
    fn load_csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");

        std::fs::write(&path, "+1,1.0,abc\n").unwrap();
        match Dataset::load_csv(&path) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected parse error, got {other:?}"),
        }

        std::fs::write(&path, "+1,1.0,2.0\n-1,1.0\n").unwrap();
        assert!(matches!(
            Dataset::load_csv(&path),
            Err(Error::Dimension { .. })
        ));

        std::fs::write(&path, "+1,1.0\n+1,2.0\n").unwrap();
        assert!(matches!(
            Dataset::load_csv(&path),
            Err(Error::EmptyClass { class: "negative" })
        ));

        std::fs::write(&path, "+2,1.0\n").unwrap();
        assert!(matches!(Dataset::load_csv(&path), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn generate_single_mode_counts() {
        let spec = SynthSpec {
            dim: 3,
            modes: vec![ModeSpec {
                mean: vec![1.0, 2.0, 3.0],
                stddev: 0.5,
                count: 10,
            }],
            outlier_count: 0,
            neg_count: 20,
            neg_spread: 1.0,
            seed: 7,
        };
        let ds = generate(&spec).unwrap();
        assert_eq!((ds.n_pos(), ds.n_neg()), (10, 20));
        assert!(ds.mode_ids().unwrap().iter().all(|&m| m == 0));
    }

    #[test]
    fn generate_is_deterministic() {
        let spec = two_mode_spec(42);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generate_mode_histogram() {
        let spec = SynthSpec {
            dim: 2,
            modes: vec![
                ModeSpec { mean: vec![4.0, 0.0], stddev: 0.3, count: 20 },
                ModeSpec { mean: vec![-4.0, 0.0], stddev: 0.3, count: 10 },
                ModeSpec { mean: vec![0.0, 4.0], stddev: 0.3, count: 5 },
            ],
            outlier_count: 0,
            neg_count: 10,
            neg_spread: 1.0,
            seed: 1,
        };
        let ds = generate(&spec).unwrap();
        let ids = ds.mode_ids().unwrap();
        let count = |m: i64| ids.iter().filter(|&&x| x == m).count();
        assert_eq!((count(0), count(1), count(2)), (20, 10, 5));
    }

    #[test]
    fn outliers_stay_inside_ball() {
        let spec = SynthSpec {
            dim: 2,
            modes: vec![ModeSpec { mean: vec![5.0, 0.0], stddev: 0.2, count: 5 }],
            outlier_count: 50,
            neg_count: 10,
            neg_spread: 1.5,
            seed: 3,
        };
        let ds = generate(&spec).unwrap();
        let ids = ds.mode_ids().unwrap();
        for (i, &id) in ids.iter().enumerate() {
            if id == -1 {
                let norm: f64 = ds.sample(i).features.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(norm <= 2.0 * 1.5 + 1e-12);
            }
        }
    }

    #[test]
    fn csv_round_trip_preserves_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let a_path = dir.path().join("a.csv");
        let b_path = dir.path().join("b.csv");
        let ds = generate(&two_mode_spec(9)).unwrap();
        ds.write_csv(&a_path).unwrap();
        let reloaded = Dataset::load_csv(&a_path).unwrap();
        reloaded.write_csv(&b_path).unwrap();
        assert_eq!(
            std::fs::read(&a_path).unwrap(),
            std::fs::read(&b_path).unwrap()
        );
        assert_eq!(reloaded.fingerprint(), ds.fingerprint());
    }

    #[test]
    fn mode_id_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.mode_ids.json");
        let ds = generate(&two_mode_spec(11)).unwrap();
        ds.write_mode_ids(&path).unwrap();
        let ids = Dataset::load_mode_ids(&path).unwrap();
        assert_eq!(ids, ds.mode_ids().unwrap());
    }

    #[test]
    fn restrict_positives_keeps_negatives_and_ground_truth() {
        let ds = generate(&two_mode_spec(5)).unwrap();
        let keep = vec![0, 2, 29];
        let sub = ds.restrict_positives(&keep);
        assert_eq!(sub.n_pos(), 3);
        assert_eq!(sub.n_neg(), ds.n_neg());
        assert_eq!(sub.sample(1), ds.sample(2));
        assert_eq!(sub.mode_ids().unwrap()[2], ds.mode_ids().unwrap()[29]);
    }

    proptest! {
        #[test]
        fn positives_first_invariant_holds(labels in proptest::collection::vec(prop::bool::ANY, 2..40)) {
            prop_assume!(labels.iter().any(|&b| b) && labels.iter().any(|&b| !b));
            let samples: Vec<Sample> = labels
                .iter()
                .enumerate()
                .map(|(i, &pos)| Sample {
                    features: vec![i as f64],
                    label: if pos { Label::Positive } else { Label::Negative },
                })
                .collect();
            let ds = Dataset::new(samples).unwrap();
            for (i, s) in ds.samples().iter().enumerate() {
                if i < ds.n_pos() {
                    prop_assert_eq!(s.label, Label::Positive);
                } else {
                    prop_assert_eq!(s.label, Label::Negative);
                }
            }
            // stability: source rows increase within each class
            let rows = ds.source_rows();
            prop_assert!(rows[..ds.n_pos()].windows(2).all(|w| w[0] < w[1]));
            prop_assert!(rows[ds.n_pos()..].windows(2).all(|w| w[0] < w[1]));
        }
    }
}
