//! Probes that try to recover the task from a low-dimensional PCA embedding
//! of its adapted parameters: amplitude regression for sine tasks and
//! embedding-conditioned classification for prototype tasks.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffcore::{self, mlp_layers, Batch, LossKind, MlpParams};
use crate::error::{Error, Result};
use crate::meta::{Adam, AdamConfig, AdaptedParamsMatrix, TaskDescriptor};
use crate::numerics::{DenseMatrix, SeededRng};
use crate::subspace::PcaResult;
use crate::taskgen::PrototypeFamilySpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "defaults::hidden")]
    pub hidden: usize,
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::test_fraction")]
    pub test_fraction: f64,
}

mod defaults {
    pub fn hidden() -> usize {
        64
    }
    pub fn lr() -> f64 {
        1e-3
    }
    pub fn epochs() -> usize {
        500
    }
    pub fn test_fraction() -> f64 {
        0.2
    }
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            hidden: defaults::hidden(),
            lr: defaults::lr(),
            epochs: defaults::epochs(),
            test_fraction: defaults::test_fraction(),
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::InvalidConfig {
                field: format!("probe.{field}"),
                message: message.into(),
            })
        };
        if self.hidden == 0 {
            return bad("hidden", "must be >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be finite and > 0");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be >= 1");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction", "must lie strictly between 0 and 1");
        }
        Ok(())
    }
}

/// Disjoint train/test row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Random split holding out `round(m * test_fraction)` rows.
    pub fn random(m: usize, test_fraction: f64, rng: &mut SeededRng) -> Result<Self> {
        let n_test = (m as f64 * test_fraction).round() as usize;
        let mut order: Vec<usize> = (0..m).collect();
        rng.shuffle(&mut order);
        let test = order[..n_test.min(m)].to_vec();
        let train = order[n_test.min(m)..].to_vec();
        Self::new(train, test, m)
    }

    pub fn new(train: Vec<usize>, test: Vec<usize>, m: usize) -> Result<Self> {
        if train.is_empty() || test.is_empty() {
            return Err(Error::Argument(format!(
                "degenerate split: {} train and {} test rows",
                train.len(),
                test.len()
            )));
        }
        let mut seen = vec![false; m];
        for &i in train.iter().chain(&test) {
            if i >= m || seen[i] {
                return Err(Error::Argument(format!(
                    "split index {i} is out of range or repeated"
                )));
            }
            seen[i] = true;
        }
        Ok(Self { train, test })
    }
}

/// What the probe has to predict for each task.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeTargets {
    /// `M x N` amplitude vectors.
    Amplitudes(DenseMatrix),
    /// Labeled points of every task.
    LabeledPoints(Vec<Batch>),
}

impl ProbeTargets {
    pub fn len(&self) -> usize {
        match self {
            ProbeTargets::Amplitudes(a) => a.rows(),
            ProbeTargets::LabeledPoints(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn from_amplitudes(descriptors: &[TaskDescriptor]) -> Result<Self> {
        let rows = descriptors
            .iter()
            .enumerate()
            .map(|(i, d)| match d {
                TaskDescriptor::Amplitudes(a) => Ok(a.clone()),
                _ => Err(Error::Argument(format!(
                    "descriptor {i} is not an amplitude vector"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Err(Error::Argument("no descriptors".into()));
        }
        Ok(ProbeTargets::Amplitudes(DenseMatrix::from_rows(&rows)?))
    }

    /// Draws fresh labeled points for every task from its prototypes, using
    /// the family's noise level and `query_per_class` points per class.
    pub fn sample_from_prototypes(
        descriptors: &[TaskDescriptor],
        spec: &PrototypeFamilySpec,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let batches = descriptors
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let TaskDescriptor::Prototypes(protos) = d else {
                    return Err(Error::Argument(format!("descriptor {i} has no prototypes")));
                };
                let per = spec.query_per_class;
                let n = protos.rows() * per;
                let mut x = DenseMatrix::zeros(n, protos.cols());
                let mut labels = Vec::with_capacity(n);
                for c in 0..protos.rows() {
                    for s in 0..per {
                        for (j, &p) in protos.row(c).iter().enumerate() {
                            x.set(c * per + s, j, rng.normal(p, spec.noise_std)?);
                        }
                        labels.push(c);
                    }
                }
                Batch::classification(x, labels)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProbeTargets::LabeledPoints(batches))
    }
}

/// PCA codes of the adapted parameters with the matching probe targets.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedTaskSet {
    pub z: DenseMatrix,
    pub targets: ProbeTargets,
    pub split: Split,
}

impl EmbeddedTaskSet {
    pub fn k(&self) -> usize {
        self.z.cols()
    }

    /// Same set with the rows of `z` permuted, destroying the task link.
    pub fn shuffled(&self, rng: &mut SeededRng) -> Self {
        let mut order: Vec<usize> = (0..self.z.rows()).collect();
        rng.shuffle(&mut order);
        Self {
            z: self.z.select_rows(&order),
            ..self.clone()
        }
    }
}

pub fn embed(
    points: &AdaptedParamsMatrix,
    pca: &PcaResult,
    k: usize,
    targets: ProbeTargets,
    split: Split,
) -> Result<EmbeddedTaskSet> {
    if k == 0 {
        return Err(Error::Argument("embedding size k must be >= 1".into()));
    }
    if targets.len() != points.len() {
        return Err(Error::Dimension(format!(
            "{} targets for {} adapted parameter rows",
            targets.len(),
            points.len()
        )));
    }
    Split::new(split.train.clone(), split.test.clone(), points.len())?;
    let dim = points.matrix.cols();
    if k > dim {
        return Err(Error::Argument(format!(
            "embedding size {k} exceeds the parameter dimension {dim}"
        )));
    }
    // directions past the numerical rank carry no variance: their codes are zero
    let kept = k.min(pca.n_components());
    let proj = pca.project(&points.matrix, kept)?;
    let z = DenseMatrix::from_fn(proj.rows(), k, |i, j| if j < kept { proj.get(i, j) } else { 0.0 });
    Ok(EmbeddedTaskSet { z, targets, split })
}

/// Per-column shift and scale fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(m: &DenseMatrix) -> Self {
        let n = m.rows() as f64;
        let mut mean = vec![0.0; m.cols()];
        for r in m.row_iter() {
            for (a, v) in mean.iter_mut().zip(r) {
                *a += v / n;
            }
        }
        let mut var = vec![0.0; m.cols()];
        for r in m.row_iter() {
            for ((a, v), mu) in var.iter_mut().zip(r).zip(&mean) {
                *a += (v - mu) * (v - mu) / n;
            }
        }
        // constant columns are only centred
        let scale = var
            .iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, m: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| {
            (m.get(i, j) - self.mean[j]) / self.scale[j]
        })
    }

    pub fn invert(&self, m: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| {
            m.get(i, j) * self.scale[j] + self.mean[j]
        })
    }
}

/// A trained probe together with its input/output scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub params: MlpParams,
    pub input_scaling: Standardizer,
    /// Present for regression probes.
    pub output_scaling: Option<Standardizer>,
}

impl ProbeModel {
    pub fn predict(&self, inputs: &DenseMatrix) -> Result<DenseMatrix> {
        let out = diffcore::forward(&self.params, &self.input_scaling.apply(inputs))?;
        Ok(match &self.output_scaling {
            Some(s) => s.invert(&out),
            None => out,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeFit {
    pub model: ProbeModel,
    /// Test MSE in original units, or test accuracy.
    pub test_metric: f64,
    /// Same metric for the best constant prediction learned from the train split.
    pub baseline: f64,
}

fn train_probe(
    batch: &Batch,
    out_dim: usize,
    kind: LossKind,
    config: &ProbeConfig,
    rng: &mut SeededRng,
) -> Result<MlpParams> {
    let layers = mlp_layers(batch.inputs.cols(), &[config.hidden], out_dim);
    let mut params = MlpParams::init(layers, rng)?;
    let mut adam = Adam::new(AdamConfig::with_lr(config.lr), params.len());
    for _ in 0..config.epochs {
        let g = diffcore::grad(&params, batch, kind)?;
        adam.update(params.theta_mut(), &g);
    }
    Ok(params)
}

fn mse(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let n = a.data().len() as f64;
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n
}

/// Fits `z -> amplitudes` on the train split and scores the test split.
pub fn fit_amplitude_regressor(
    set: &EmbeddedTaskSet,
    config: &ProbeConfig,
    seed: u64,
) -> Result<ProbeFit> {
    config.validate()?;
    let ProbeTargets::Amplitudes(amps) = &set.targets else {
        return Err(Error::Argument(
            "amplitude regression needs amplitude targets".into(),
        ));
    };
    let split = Split::new(set.split.train.clone(), set.split.test.clone(), set.z.rows())?;
    let z_train = set.z.select_rows(&split.train);
    let y_train = amps.select_rows(&split.train);
    let input_scaling = Standardizer::fit(&z_train);
    let output_scaling = Standardizer::fit(&y_train);
    let batch = Batch::regression(input_scaling.apply(&z_train), output_scaling.apply(&y_train))?;
    let mut rng = SeededRng::new(seed);
    let params = train_probe(&batch, amps.cols(), LossKind::Mse, config, &mut rng)?;
    let model = ProbeModel {
        params,
        input_scaling,
        output_scaling: Some(output_scaling),
    };
    let y_test = amps.select_rows(&split.test);
    let pred = model.predict(&set.z.select_rows(&split.test))?;
    let constant = DenseMatrix::from_fn(y_test.rows(), y_test.cols(), |_, j| {
        model.output_scaling.as_ref().expect("regression scaling").mean[j]
    });
    Ok(ProbeFit {
        test_metric: mse(&pred, &y_test),
        baseline: mse(&constant, &y_test),
        model,
    })
}

/// Stacks `[x, z_task]` rows for the given tasks.
fn conditioned_batch(set: &EmbeddedTaskSet, batches: &[Batch], rows: &[usize]) -> Result<Batch> {
    let k = set.z.cols();
    let d = batches[rows[0]].inputs.cols();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for &t in rows {
        let b = &batches[t];
        if b.inputs.cols() != d {
            return Err(Error::Dimension(format!(
                "task {t} has {}-dimensional points, expected {d}",
                b.inputs.cols()
            )));
        }
        let l = b.labels().ok_or_else(|| {
            Error::Argument(format!("task {t} has regression targets"))
        })?;
        for (i, x) in b.inputs.row_iter().enumerate() {
            data.extend_from_slice(x);
            data.extend_from_slice(set.z.row(t));
            labels.push(l[i]);
        }
    }
    Batch::classification(DenseMatrix::new(labels.len(), d + k, data)?, labels)
}

/// Fits `[x, z] -> label` on the points of the train tasks and reports the
/// accuracy on the points of the held-out tasks.
pub fn fit_conditioned_classifier(
    set: &EmbeddedTaskSet,
    config: &ProbeConfig,
    seed: u64,
) -> Result<ProbeFit> {
    config.validate()?;
    let ProbeTargets::LabeledPoints(batches) = &set.targets else {
        return Err(Error::Argument(
            "conditioned classification needs labeled points".into(),
        ));
    };
    let split = Split::new(set.split.train.clone(), set.split.test.clone(), set.z.rows())?;
    let train = conditioned_batch(set, batches, &split.train)?;
    let test = conditioned_batch(set, batches, &split.test)?;
    let labels = train.labels().expect("classification batch");
    let n_classes = batches
        .iter()
        .filter_map(|b| b.labels())
        .flatten()
        .max()
        .map_or(1, |m| m + 1);
    let input_scaling = Standardizer::fit(&train.inputs);
    let scaled = Batch::classification(input_scaling.apply(&train.inputs), labels.to_vec())?;
    let mut rng = SeededRng::new(seed);
    let params = train_probe(&scaled, n_classes, LossKind::SoftmaxCrossEntropy, config, &mut rng)?;
    let model = ProbeModel {
        params,
        input_scaling,
        output_scaling: None,
    };
    let logits = model.predict(&test.inputs)?;
    let test_labels = test.labels().expect("classification batch");
    let accuracy = diffcore::accuracy_of_logits(&logits, test_labels);
    // majority class of the train split
    let mut counts = vec![0usize; n_classes];
    labels.iter().for_each(|&l| counts[l] += 1);
    let majority = (0..n_classes).max_by_key(|&c| (counts[c], usize::MAX - c)).unwrap_or(0);
    let baseline =
        test_labels.iter().filter(|&&l| l == majority).count() as f64 / test_labels.len() as f64;
    Ok(ProbeFit {
        model,
        test_metric: accuracy,
        baseline,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMetric {
    Mse,
    Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub k: usize,
    pub seed: u64,
    pub metric: ProbeMetric,
    pub value: f64,
}

/// Trains one probe per `(k, seed)`. The split depends only on the seed, so
/// every k of a seed is scored on the same held-out tasks.
#[allow(clippy::too_many_arguments)]
pub fn probe_sweep(
    points: &AdaptedParamsMatrix,
    pca: &PcaResult,
    targets: &ProbeTargets,
    k_values: &[usize],
    seeds: &[u64],
    config: &ProbeConfig,
    shuffle_z: bool,
) -> Result<Vec<ProbeRecord>> {
    config.validate()?;
    if k_values.is_empty() || seeds.is_empty() {
        return Err(Error::Argument("k list and seed list must be non-empty".into()));
    }
    let jobs: Vec<(usize, u64)> = k_values
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    jobs.par_iter()
        .map(|&(k, seed)| {
            let mut rng = SeededRng::new(seed);
            let split = Split::random(points.len(), config.test_fraction, &mut rng)?;
            let mut set = embed(points, pca, k, targets.clone(), split)?;
            if shuffle_z {
                set = set.shuffled(&mut rng);
            }
            let (metric, fit) = match targets {
                ProbeTargets::Amplitudes(_) => {
                    (ProbeMetric::Mse, fit_amplitude_regressor(&set, config, seed)?)
                }
                ProbeTargets::LabeledPoints(_) => (
                    ProbeMetric::Accuracy,
                    fit_conditioned_classifier(&set, config, seed)?,
                ),
            };
            Ok(ProbeRecord {
                k,
                seed,
                metric,
                value: fit.test_metric,
            })
        })
        .collect()
}

pub fn write_records<W: Write>(records: &[ProbeRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<ProbeRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn save_records(records: &[ProbeRecord], path: &Path) -> Result<()> {
    write_records(records, std::fs::File::create(path)?)
}

pub fn load_records(path: &Path) -> Result<Vec<ProbeRecord>> {
    read_records(std::fs::File::open(path)?).map_err(|e| Error::format(path, e.to_string()))
}

/// Median of the metric per k, in the order of first appearance.
pub fn median_by_k(records: &[ProbeRecord]) -> Vec<(usize, f64)> {
    let mut ks: Vec<usize> = Vec::new();
    for r in records {
        if !ks.contains(&r.k) {
            ks.push(r.k);
        }
    }
    ks.into_iter()
        .map(|k| {
            let mut v: Vec<f64> = records.iter().filter(|r| r.k == k).map(|r| r.value).collect();
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let med = if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            };
            (k, med)
        })
        .collect()
}
