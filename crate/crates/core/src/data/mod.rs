//! Labeled datasets: synthetic generators, CIFAR-10 ingestion, splitting,
//! standardization and image augmentation.

pub mod augment;
pub mod cifar;

use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::gates::RngState;
use crate::net::Scalar;

pub use augment::{augment_image, AugmentParams};
pub use cifar::{decode_records, encode_records, load_cifar10, CifarRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Vector,
    /// Channel-planar `(c, h, w)` layout, row-major inside each plane.
    Image {
        height: usize,
        width: usize,
        channels: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub features: Array2<f32>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub kind: DataKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: LabeledSet,
    pub val: LabeledSet,
    pub test: LabeledSet,
}

impl LabeledSet {
    pub fn new(
        features: Array2<f32>,
        labels: Vec<usize>,
        class_count: usize,
        kind: DataKind,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features contain non-finite values"));
        }
        if let DataKind::Image {
            height,
            width,
            channels,
        } = kind
        {
            if height * width * channels != features.ncols() {
                return Err(Error::shape(format!(
                    "image {channels}x{height}x{width} does not match {} features",
                    features.ncols()
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            class_count,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            kind: self.kind,
        }
    }

    /// Rows `idx` converted to the network's element type.
    pub fn batch<T: Scalar>(&self, idx: &[usize]) -> (Array2<T>, Vec<usize>) {
        let mut x = Array2::zeros((idx.len(), self.input_dim()));
        for (mut row, &i) in x.outer_iter_mut().zip(idx) {
            row.zip_mut_with(&self.features.row(i), |d, &s| {
                *d = T::from_f64_lossy(s as f64)
            });
        }
        (x, idx.iter().map(|&i| self.labels[i]).collect())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.class_count];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }

    /// Writes `x0,x1,...,label` CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header: Vec<String> = (0..self.input_dim()).map(|i| format!("x{i}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, y) in self.features.outer_iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads the CSV layout produced by [`LabeledSet::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let header = r.headers()?.clone();
        let dim = header
            .len()
            .checked_sub(1)
            .filter(|&d| d > 0)
            .ok_or_else(|| {
                Error::config(
                    path.display().to_string(),
                    "csv needs feature columns and a label",
                )
            })?;
        if header.get(dim) != Some("label") {
            return Err(Error::config(
                format!("{}:1", path.display()),
                "last column must be `label`",
            ));
        }
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad =
                |what: &str| Error::config(format!("{}:{line}", path.display()), what.to_string());
            if rec.len() != dim + 1 {
                return Err(bad("wrong number of columns"));
            }
            for f in rec.iter().take(dim) {
                values.push(
                    f.trim()
                        .parse::<f32>()
                        .map_err(|_| bad("feature is not a number"))?,
                );
            }
            labels.push(
                rec[dim]
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| bad("label is not a class index"))?,
            );
        }
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        let n = labels.len();
        let features = Array2::from_shape_vec((n, dim), values).expect("sized by loop");
        Self::new(features, labels, classes, DataKind::Vector)
    }
}

/// Interleaved 2-D spiral arms, one per class. Point `i` of arm `c` sits at
/// radius `t = (i + 1) / n` and angle `2πc/C + 4t + noise·ε`, `ε ~ N(0, 1)`.
pub fn gen_spirals(
    n_per_class: usize,
    classes: usize,
    noise: f64,
    rng: &mut RngState,
) -> Result<LabeledSet> {
    if n_per_class == 0 || classes == 0 {
        return Err(Error::invalid(
            "spirals need at least one class and one point",
        ));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::invalid(format!(
            "noise = {noise} must be non-negative"
        )));
    }
    let n = n_per_class * classes;
    let mut features = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for c in 0..classes {
        for i in 0..n_per_class {
            let t = (i + 1) as f64 / n_per_class as f64;
            let theta =
                std::f64::consts::TAU * c as f64 / classes as f64 + 4.0 * t + noise * rng.normal();
            let row = c * n_per_class + i;
            features[[row, 0]] = (t * theta.sin()) as f32;
            features[[row, 1]] = (t * theta.cos()) as f32;
            labels.push(c);
        }
    }
    LabeledSet::new(features, labels, classes, DataKind::Vector)
}

/// Seeded shuffle, then the first `⌊n·val_fraction⌋` rows become validation.
pub fn split_validation(
    set: &LabeledSet,
    val_fraction: f64,
    rng: &mut RngState,
) -> Result<(LabeledSet, LabeledSet)> {
    let (train_idx, val_idx) = split_indices(set.len(), val_fraction, rng)?;
    Ok((set.subset(&train_idx), set.subset(&val_idx)))
}

pub fn split_indices(
    n: usize,
    val_fraction: f64,
    rng: &mut RngState,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "val_fraction = {val_fraction} is outside (0, 1)"
        )));
    }
    let n_val = (n as f64 * val_fraction).floor() as usize;
    if n_val == 0 || n_val == n {
        return Err(Error::invalid(format!(
            "val_fraction {val_fraction} of {n} rows leaves an empty side"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    let train = idx.split_off(n_val);
    Ok((train, idx))
}

/// Per-channel (images) or per-feature (vectors) standardization fitted on
/// one set and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Array1<f64>,
    std: Array1<f64>,
    plane: usize,
}

impl Standardizer {
    pub fn fit(set: &LabeledSet) -> Self {
        let (groups, plane) = match set.kind {
            DataKind::Vector => (set.input_dim(), 1),
            DataKind::Image {
                height,
                width,
                channels,
            } => (channels, height * width),
        };
        let mut sum = Array1::<f64>::zeros(groups);
        let mut sq = Array1::<f64>::zeros(groups);
        for row in set.features.outer_iter() {
            for (j, &v) in row.iter().enumerate() {
                let g = j / plane;
                sum[g] += v as f64;
                sq[g] += (v as f64) * (v as f64);
            }
        }
        let count = (set.len() * plane).max(1) as f64;
        let mean = &sum / count;
        let std = (&sq / count - &mean * &mean).mapv(|v| {
            let s = v.max(0.0).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        });
        Self { mean, std, plane }
    }

    pub fn apply(&self, set: &mut LabeledSet) {
        for mut row in set.features.outer_iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                let g = j / self.plane;
                *v = ((*v as f64 - self.mean[g]) / self.std[g]) as f32;
            }
        }
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn std(&self) -> &Array1<f64> {
        &self.std
    }
}

impl DatasetSplit {
    /// Standardizes all three parts with statistics of the training part.
    pub fn standardized(mut self) -> Self {
        let s = Standardizer::fit(&self.train);
        s.apply(&mut self.train);
        s.apply(&mut self.val);
        s.apply(&mut self.test);
        self
    }

    pub fn check(&self) -> Result<()> {
        let c = self.train.class_count;
        if self.val.class_count != c || self.test.class_count != c {
            return Err(Error::invalid("split parts disagree on class count"));
        }
        if self.train.is_empty() || self.val.is_empty() {
            return Err(Error::invalid(
                "train and validation parts must be nonempty",
            ));
        }
        let d = self.train.input_dim();
        if self.val.input_dim() != d || self.test.input_dim() != d {
            return Err(Error::shape("split parts disagree on feature count"));
        }
        Ok(())
    }
}
