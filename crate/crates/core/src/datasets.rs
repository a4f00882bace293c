//! SONAR, WDBC and MNIST loaders.
//!
//! Features are scaled into `[-1, 1]` (write currents need `|x| <= 1`) and
//! targets are bipolar one-vs-rest codes. Expected on-disk layouts:
//!
//! * SONAR: UCI `sonar.all-data`, 208 rows of 60 reals and a `R`/`M` label.
//! * WDBC: UCI `wdbc.data`, 569 rows of `id, B|M, 30 reals`.
//! * MNIST: the four idx files (`train-images-idx3-ubyte`, ...) in one
//!   directory, uncompressed.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetId {
    Sonar,
    Wbcd,
    Mnist,
}

impl std::str::FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sonar" => Ok(DatasetId::Sonar),
            "wbcd" | "wdbc" => Ok(DatasetId::Wbcd),
            "mnist" => Ok(DatasetId::Mnist),
            other => Err(Error::Config(format!("unknown dataset `{other}`"))),
        }
    }
}

impl std::fmt::Display for DatasetId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DatasetId::Sonar => "sonar",
            DatasetId::Wbcd => "wbcd",
            DatasetId::Mnist => "mnist",
        })
    }
}

/// Test-set sizes used for the two small UCI sets.
pub const SONAR_TEST: usize = 104;
pub const WBCD_TEST: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    dims: usize,
    outputs: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        dims: usize,
        outputs: usize,
        features: Vec<f64>,
        targets: Vec<f64>,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let name = name.into();
        let n = features.len() / dims.max(1);
        if dims == 0 || outputs == 0 || features.len() != n * dims || targets.len() != n * outputs {
            return Err(Error::dataset(&name, "feature/target shapes disagree"));
        }
        let mut seen = vec![false; n];
        for &k in train.iter().chain(&test) {
            if k >= n || std::mem::replace(&mut seen[k], true) {
                return Err(Error::dataset(&name, "split indices overlap or are out of range"));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::dataset(&name, "split does not cover every sample"));
        }
        Ok(Self {
            name,
            dims,
            outputs,
            features,
            targets,
            train,
            test,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn features(&self, k: usize) -> &[f64] {
        &self.features[k * self.dims..(k + 1) * self.dims]
    }

    pub fn target(&self, k: usize) -> &[f64] {
        &self.targets[k * self.outputs..(k + 1) * self.outputs]
    }

    /// Keeps only the first `n` training samples.
    pub fn with_train_subset(mut self, n: usize) -> Self {
        self.train.truncate(n);
        self
    }

    /// Rescales every feature into `[-1, 1]` using the training rows' range;
    /// test values outside that range are clipped.
    pub fn normalize(&mut self) {
        let d = self.dims;
        for col in 0..d {
            let (lo, hi) = self
                .train
                .iter()
                .map(|&k| self.features[k * d + col])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            let span = hi - lo;
            for k in 0..self.len() {
                let v = &mut self.features[k * d + col];
                *v = if span > 0.0 {
                    (2.0 * (*v - lo) / span - 1.0).clamp(-1.0, 1.0)
                } else {
                    0.0
                };
            }
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::dataset(path, e.to_string()))
}

fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::dataset(path, format!("line {line}: `{}` is not a number", s.trim())))
}

/// Splits a class sequence into train/test.
///
/// Within each class consecutive samples are paired and a seeded coin
/// decides which member of each pair is held out, so train and test see
/// matching neighbourhoods of the (angle-ordered) recordings. Leftover
/// unpaired samples fill the test set up to `test_count`, the rest train.
pub fn paired_split(labels: &[usize], test_count: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream(seed, StreamKind::Split, 0);
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut leftovers = Vec::new();
    for c in 0..classes {
        let members: Vec<usize> = (0..labels.len()).filter(|&k| labels[k] == c).collect();
        let mut chunks = members.chunks_exact(2);
        for pair in &mut chunks {
            let mut pair = [pair[0], pair[1]];
            pair.shuffle(&mut rng);
            train.push(pair[0]);
            test.push(pair[1]);
        }
        leftovers.extend_from_slice(chunks.remainder());
    }
    leftovers.shuffle(&mut rng);
    for k in leftovers {
        if test.len() < test_count {
            test.push(k);
        } else {
            train.push(k);
        }
    }
    // Pairs can overshoot a requested test size below half the data.
    while test.len() > test_count {
        train.push(test.pop().expect("non-empty"));
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Class-stratified random split with `test_count` held-out samples.
pub fn stratified_split(labels: &[usize], test_count: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream(seed, StreamKind::Split, 1);
    let n = labels.len();
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut assigned = 0usize;
    for c in 0..classes {
        let mut members: Vec<usize> = (0..n).filter(|&k| labels[k] == c).collect();
        members.shuffle(&mut rng);
        let share = if c + 1 == classes {
            test_count - assigned
        } else {
            ((members.len() * test_count) as f64 / n as f64).round() as usize
        };
        let share = share.min(members.len());
        assigned += share;
        test.extend_from_slice(&members[..share]);
        train.extend_from_slice(&members[share..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Loads UCI SONAR (`R` -> -1, `M` -> +1) with a paired 104/104 split.
pub fn load_sonar(path: &Path, split_seed: u64) -> Result<Dataset> {
    let text = read_text(path)?;
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 61 {
            return Err(Error::dataset(path, format!("line {}: expected 61 fields, found {}", n + 1, fields.len())));
        }
        for f in &fields[..60] {
            features.push(parse_f64(path, n + 1, f)?);
        }
        let (t, c) = match fields[60].trim() {
            "R" => (-1.0, 0),
            "M" => (1.0, 1),
            other => return Err(Error::dataset(path, format!("line {}: unknown label `{other}`", n + 1))),
        };
        targets.push(t);
        labels.push(c);
    }
    if labels.len() != 208 {
        return Err(Error::dataset(path, format!("expected 208 rows, found {}", labels.len())));
    }
    let (train, test) = paired_split(&labels, SONAR_TEST, split_seed);
    let mut ds = Dataset::new("sonar", 60, 1, features, targets, train, test)?;
    ds.normalize();
    Ok(ds)
}

/// Loads UCI WDBC (`B` -> -1, `M` -> +1) with a stratified 369/200 split.
pub fn load_wbcd(path: &Path, split_seed: u64) -> Result<Dataset> {
    let text = read_text(path)?;
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 32 {
            return Err(Error::dataset(path, format!("line {}: expected 32 fields, found {}", n + 1, fields.len())));
        }
        let (t, c) = match fields[1].trim() {
            "B" => (-1.0, 0),
            "M" => (1.0, 1),
            other => return Err(Error::dataset(path, format!("line {}: unknown diagnosis `{other}`", n + 1))),
        };
        for f in &fields[2..] {
            features.push(parse_f64(path, n + 1, f)?);
        }
        targets.push(t);
        labels.push(c);
    }
    if labels.len() != 569 {
        return Err(Error::dataset(path, format!("expected 569 rows, found {}", labels.len())));
    }
    let (train, test) = stratified_split(&labels, WBCD_TEST, split_seed);
    let mut ds = Dataset::new("wbcd", 30, 1, features, targets, train, test)?;
    ds.normalize();
    Ok(ds)
}

fn read_idx(path: &Path, magic: u32, dims: usize) -> Result<(Vec<usize>, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::dataset(path, e.to_string()))?;
    let header = 4 + 4 * dims;
    let word = |k: usize| u32::from_be_bytes(bytes[4 * k..4 * k + 4].try_into().expect("4 bytes"));
    if bytes.len() < 4 || word(0) != magic {
        return Err(Error::dataset(path, format!("bad magic, expected 0x{magic:08x}")));
    }
    if bytes.len() < header {
        return Err(Error::dataset(path, "truncated idx header"));
    }
    let shape: Vec<usize> = (1..=dims).map(|k| word(k) as usize).collect();
    let payload: usize = shape.iter().product();
    if bytes.len() != header + payload {
        return Err(Error::dataset(
            path,
            format!("expected {} payload bytes, found {}", payload, bytes.len() - header),
        ));
    }
    Ok((shape, bytes[header..].to_vec()))
}

fn mnist_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// Loads MNIST: 60000 training then 10000 test images, pixels mapped
/// affinely from `[0, 255]` to `[-1, 1]`, ten bipolar outputs.
pub fn load_mnist(dir: &Path) -> Result<Dataset> {
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut counts = Vec::new();
    for (images, labels) in [
        ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    ] {
        let ipath = mnist_file(dir, images);
        let lpath = mnist_file(dir, labels);
        let (ishape, pixels) = read_idx(&ipath, 0x0000_0803, 3)?;
        let (lshape, labs) = read_idx(&lpath, 0x0000_0801, 1)?;
        if ishape[1] != 28 || ishape[2] != 28 {
            return Err(Error::dataset(&ipath, format!("expected 28x28 images, found {}x{}", ishape[1], ishape[2])));
        }
        if ishape[0] != lshape[0] {
            return Err(Error::dataset(&lpath, "image and label counts differ"));
        }
        features.extend(pixels.iter().map(|&p| f64::from(p) / 127.5 - 1.0));
        for &l in &labs {
            if l > 9 {
                return Err(Error::dataset(&lpath, format!("label {l} out of range")));
            }
            targets.extend((0..10).map(|c| if c == l as usize { 1.0 } else { -1.0 }));
        }
        counts.push(ishape[0]);
    }
    let train: Vec<usize> = (0..counts[0]).collect();
    let test: Vec<usize> = (counts[0]..counts[0] + counts[1]).collect();
    Dataset::new("mnist", 784, 10, features, targets, train, test)
}

/// Loads a dataset from the conventional layout under `root`
/// (`sonar.all-data`, `wdbc.data`, `mnist/`).
pub fn load(id: DatasetId, root: &Path, split_seed: u64) -> Result<Dataset> {
    match id {
        DatasetId::Sonar => load_sonar(&root.join("sonar.all-data"), split_seed),
        DatasetId::Wbcd => load_wbcd(&root.join("wdbc.data"), split_seed),
        DatasetId::Mnist => load_mnist(&root.join("mnist")),
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// Percentage of misclassified samples. Single-output rows compare signs,
/// multi-output rows compare argmax. `outputs` and `targets` are row-major
/// with `width` values per sample.
pub fn classification_error(outputs: &[f64], targets: &[f64], width: usize) -> Result<f64> {
    if width == 0 || outputs.len() != targets.len() || outputs.len() % width != 0 {
        return Err(Error::DimensionMismatch {
            context: "classification outputs",
            expected: targets.len(),
            got: outputs.len(),
        });
    }
    let n = outputs.len() / width;
    if n == 0 {
        return Ok(0.0);
    }
    let wrong = outputs
        .chunks_exact(width)
        .zip(targets.chunks_exact(width))
        .filter(|(o, t)| {
            if width == 1 {
                (o[0] >= 0.0) != (t[0] >= 0.0)
            } else {
                argmax(o) != argmax(t)
            }
        })
        .count();
    Ok(100.0 * wrong as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn error_rate_extremes() {
        let t = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(classification_error(&t, &t, 1).unwrap(), 0.0);
        let neg: Vec<f64> = t.iter().map(|v| -v).collect();
        assert_eq!(classification_error(&neg, &t, 1).unwrap(), 100.0);
        let t10 = [-1., -1., 1., -1., -1., -1., -1., -1., -1., -1.];
        let o10 = [0.1, 0.2, 0.9, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.3];
        assert_eq!(classification_error(&o10, &t10, 10).unwrap(), 0.0);
        assert!(classification_error(&t, &t[..3], 1).is_err());
    }

    #[test]
    fn random_guessing_is_near_half() {
        let mut rng = stream(11, StreamKind::Init, 0);
        let n = 10_000;
        let targets: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let outputs: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let e = classification_error(&outputs, &targets, 1).unwrap();
        // 3 sigma of a binomial(1e4, 0.5) proportion is 1.5 points
        assert!((e - 50.0).abs() < 1.5, "{e}");
    }

    #[test]
    fn paired_split_is_disjoint_stratified_and_seeded() {
        let labels: Vec<usize> = (0..208).map(|k| usize::from(k >= 97)).collect();
        let (tr, te) = paired_split(&labels, 104, 3);
        assert_eq!(te.len(), 104);
        assert_eq!(tr.len(), 104);
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..208).collect::<Vec<_>>());
        let rocks_test = te.iter().filter(|&&k| labels[k] == 0).count();
        assert!((48..=49).contains(&rocks_test));
        assert_eq!(paired_split(&labels, 104, 3), (tr.clone(), te.clone()));
        assert_ne!(paired_split(&labels, 104, 4).1, te);
    }

    #[test]
    fn stratified_split_sizes() {
        let labels: Vec<usize> = (0..569).map(|k| usize::from(k % 8 < 3)).collect();
        let (tr, te) = stratified_split(&labels, 200, 1);
        assert_eq!((tr.len(), te.len()), (369, 200));
        let pos = labels.iter().filter(|&&l| l == 1).count() as f64 / 569.0;
        let pos_test = te.iter().filter(|&&k| labels[k] == 1).count() as f64 / 200.0;
        assert!((pos - pos_test).abs() < 0.01);
    }

    fn toy() -> Dataset {
        let features = vec![0.0, 10.0, 2.0, 20.0, 4.0, 30.0, 8.0, 5.0];
        Dataset::new("toy", 2, 1, features, vec![1.0, -1.0, 1.0, -1.0], vec![0, 1, 2], vec![3]).unwrap()
    }

    #[test]
    fn normalization_uses_train_rows_and_is_idempotent() {
        let mut ds = toy();
        ds.normalize();
        assert_eq!(ds.features(0), &[-1.0, -1.0]);
        assert_eq!(ds.features(2), &[1.0, 1.0]);
        // test row: 8 clips to the train max, 5 clips to the train min
        assert_eq!(ds.features(3), &[1.0, -1.0]);
        let once = ds.clone();
        ds.normalize();
        assert_eq!(ds, once);
    }

    #[test]
    fn overlapping_split_is_rejected() {
        let r = Dataset::new("bad", 1, 1, vec![0.0, 1.0], vec![1.0, -1.0], vec![0, 1], vec![1]);
        assert!(r.is_err());
    }

    #[test]
    fn truncated_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let sonar = dir.path().join("sonar.all-data");
        std::fs::write(&sonar, "0.1,0.2,R\n").unwrap();
        assert!(load_sonar(&sonar, 0).is_err());

        let mnist = dir.path().join("mnist");
        std::fs::create_dir(&mnist).unwrap();
        let mut header = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 28, 0, 0, 0, 28];
        header.extend(vec![0u8; 28 * 28]); // one image short
        std::fs::write(mnist.join("train-images-idx3-ubyte"), &header).unwrap();
        let err = load_mnist(&mnist).unwrap_err().to_string();
        assert!(err.contains("payload"), "{err}");

        std::fs::write(mnist.join("train-images-idx3-ubyte"), [0, 0, 8, 1, 0, 0, 0, 0]).unwrap();
        let err = load_mnist(&mnist).unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");
    }
}
