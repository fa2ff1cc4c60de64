//! Synthetic task families: sums of sinusoids and prototype-grid N-way
//! K-shot classification.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffcore::{Batch, LossKind};
use crate::error::{Error, Result};
use crate::meta::{Task, TaskDescriptor};
use crate::numerics::{DenseMatrix, SeededRng};

/// Upper bound on `grid_points_per_axis ^ input_dim` unless overridden.
pub const DEFAULT_MAX_GRID_POINTS: usize = 1 << 20;

/// Tasks `y = Σ_k A_k sin(k x)`, `k = 1..=n_sines`, with `A_k ~ U[amp_lo, amp_hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineFamilySpec {
    pub n_sines: usize,
    #[serde(default = "defaults::amp_lo")]
    pub amp_lo: f64,
    #[serde(default = "defaults::amp_hi")]
    pub amp_hi: f64,
    #[serde(default = "defaults::x_lo")]
    pub x_lo: f64,
    #[serde(default = "defaults::x_hi")]
    pub x_hi: f64,
    #[serde(default = "defaults::support_size")]
    pub support_size: usize,
    #[serde(default = "defaults::query_size")]
    pub query_size: usize,
    #[serde(default)]
    pub support_x: XSampling,
}

/// How the support inputs of a sine task are placed. Query inputs are always
/// drawn uniformly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XSampling {
    /// i.i.d. `U[x_lo, x_hi)`.
    #[default]
    Uniform,
    /// Midpoints of `support_size` equal cells of `[x_lo, x_hi)`, identical for every task.
    Grid,
}

/// Classes centred on points of a regular grid in `R^input_dim`, samples
/// drawn from `N(prototype, noise_std^2 I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrototypeFamilySpec {
    pub n_classes: usize,
    #[serde(default = "defaults::shots")]
    pub shots: usize,
    #[serde(default = "defaults::input_dim")]
    pub input_dim: usize,
    #[serde(default = "defaults::grid_points_per_axis")]
    pub grid_points_per_axis: usize,
    #[serde(default = "defaults::grid_spacing")]
    pub grid_spacing: f64,
    #[serde(default = "defaults::noise_std")]
    pub noise_std: f64,
    #[serde(default = "defaults::query_per_class")]
    pub query_per_class: usize,
    #[serde(default = "defaults::max_grid_points")]
    pub max_grid_points: usize,
}

mod defaults {
    pub fn amp_lo() -> f64 {
        0.1
    }
    pub fn amp_hi() -> f64 {
        5.0
    }
    pub fn x_lo() -> f64 {
        -5.0
    }
    pub fn x_hi() -> f64 {
        5.0
    }
    pub fn support_size() -> usize {
        10
    }
    pub fn query_size() -> usize {
        50
    }
    pub fn shots() -> usize {
        5
    }
    pub fn input_dim() -> usize {
        4
    }
    pub fn grid_points_per_axis() -> usize {
        4
    }
    pub fn grid_spacing() -> f64 {
        2.0
    }
    pub fn noise_std() -> f64 {
        0.25
    }
    pub fn query_per_class() -> usize {
        15
    }
    pub fn max_grid_points() -> usize {
        super::DEFAULT_MAX_GRID_POINTS
    }
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field: field.into(),
        message: message.into(),
    }
}

impl SineFamilySpec {
    pub fn new(n_sines: usize) -> Self {
        Self {
            n_sines,
            amp_lo: defaults::amp_lo(),
            amp_hi: defaults::amp_hi(),
            x_lo: defaults::x_lo(),
            x_hi: defaults::x_hi(),
            support_size: defaults::support_size(),
            query_size: defaults::query_size(),
            support_x: XSampling::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sines == 0 {
            return Err(invalid("n_sines", "must be >= 1"));
        }
        if !(self.amp_lo < self.amp_hi) {
            return Err(invalid("amp_lo", "must be < amp_hi"));
        }
        if !(self.x_lo < self.x_hi) {
            return Err(invalid("x_lo", "must be < x_hi"));
        }
        if self.support_size == 0 {
            return Err(invalid("support_size", "must be >= 1"));
        }
        if self.query_size == 0 {
            return Err(invalid("query_size", "must be >= 1"));
        }
        Ok(())
    }
}

/// `Σ_k A_k sin(k x)` with `k` starting at 1.
pub fn sine_sum(amplitudes: &[f64], x: f64) -> f64 {
    amplitudes
        .iter()
        .enumerate()
        .map(|(k, a)| a * ((k + 1) as f64 * x).sin())
        .sum()
}

fn sine_batch(amplitudes: &[f64], xs: Vec<f64>) -> Result<Batch> {
    let ys = xs.iter().map(|&x| sine_sum(amplitudes, x)).collect();
    let n = xs.len();
    Batch::regression(DenseMatrix::new(n, 1, xs)?, DenseMatrix::new(n, 1, ys)?)
}

pub fn sample_sine_task(spec: &SineFamilySpec, rng: &mut SeededRng) -> Result<Task> {
    spec.validate()?;
    let amplitudes = (0..spec.n_sines)
        .map(|_| rng.uniform(spec.amp_lo, spec.amp_hi))
        .collect::<Result<Vec<_>>>()?;
    let mut draw_x = |n: usize| -> Result<Vec<f64>> {
        (0..n).map(|_| rng.uniform(spec.x_lo, spec.x_hi)).collect()
    };
    let support_x = match spec.support_x {
        XSampling::Uniform => draw_x(spec.support_size)?,
        XSampling::Grid => {
            let step = (spec.x_hi - spec.x_lo) / spec.support_size as f64;
            (0..spec.support_size)
                .map(|i| spec.x_lo + (i as f64 + 0.5) * step)
                .collect()
        }
    };
    let query_x = draw_x(spec.query_size)?;
    Ok(Task {
        support: sine_batch(&amplitudes, support_x)?,
        query: sine_batch(&amplitudes, query_x)?,
        descriptor: TaskDescriptor::Amplitudes(amplitudes),
    })
}

impl PrototypeFamilySpec {
    pub fn new(n_classes: usize) -> Self {
        Self {
            n_classes,
            shots: defaults::shots(),
            input_dim: defaults::input_dim(),
            grid_points_per_axis: defaults::grid_points_per_axis(),
            grid_spacing: defaults::grid_spacing(),
            noise_std: defaults::noise_std(),
            query_per_class: defaults::query_per_class(),
            max_grid_points: defaults::max_grid_points(),
        }
    }

    /// Number of grid points, or a size error when it exceeds `max_grid_points`.
    pub fn grid_size(&self) -> Result<usize> {
        let mut total: usize = 1;
        for _ in 0..self.input_dim {
            total = total
                .checked_mul(self.grid_points_per_axis)
                .filter(|&t| t <= self.max_grid_points)
                .ok_or_else(|| {
                    Error::Argument(format!(
                        "grid of {}^{} points exceeds the cap of {}",
                        self.grid_points_per_axis, self.input_dim, self.max_grid_points
                    ))
                })?;
        }
        Ok(total)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 {
            return Err(invalid("n_classes", "must be >= 1"));
        }
        if self.shots == 0 {
            return Err(invalid("shots", "must be >= 1"));
        }
        if self.input_dim == 0 {
            return Err(invalid("input_dim", "must be >= 1"));
        }
        if self.grid_points_per_axis == 0 {
            return Err(invalid("grid_points_per_axis", "must be >= 1"));
        }
        if !(self.grid_spacing > 0.0 && self.grid_spacing.is_finite()) {
            return Err(invalid("grid_spacing", "must be finite and > 0"));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(invalid("noise_std", "must be finite and > 0"));
        }
        if self.query_per_class == 0 {
            return Err(invalid("query_per_class", "must be >= 1"));
        }
        let available = self.grid_size()?;
        if available < self.n_classes {
            return Err(Error::Argument(format!(
                "{} classes requested but the grid has only {available} prototypes",
                self.n_classes
            )));
        }
        Ok(())
    }

    /// Grid point with lexicographic index `index` (axis 0 varies slowest).
    pub fn grid_point(&self, mut index: usize) -> Vec<f64> {
        let p = self.grid_points_per_axis;
        let centre = (p as f64 - 1.0) / 2.0;
        let mut point = vec![0.0; self.input_dim];
        for axis in (0..self.input_dim).rev() {
            let digit = index % p;
            index /= p;
            point[axis] = (digit as f64 - centre) * self.grid_spacing;
        }
        point
    }
}

/// All grid points, one per row, in lexicographic order of the per-axis index.
pub fn grid_prototypes(spec: &PrototypeFamilySpec) -> Result<DenseMatrix> {
    let total = spec.grid_size()?;
    let mut data = Vec::with_capacity(total * spec.input_dim);
    for i in 0..total {
        data.extend(spec.grid_point(i));
    }
    DenseMatrix::new(total, spec.input_dim, data)
}

fn noisy_samples(
    prototypes: &DenseMatrix,
    per_class: usize,
    std: f64,
    rng: &mut SeededRng,
) -> Result<Batch> {
    let (n_classes, dim) = prototypes.shape();
    let mut inputs = Vec::with_capacity(n_classes * per_class * dim);
    let mut labels = Vec::with_capacity(n_classes * per_class);
    for c in 0..n_classes {
        for _ in 0..per_class {
            for &centre in prototypes.row(c) {
                inputs.push(rng.normal(centre, std)?);
            }
            labels.push(c);
        }
    }
    Batch::classification(DenseMatrix::new(labels.len(), dim, inputs)?, labels)
}

pub fn sample_prototype_task(spec: &PrototypeFamilySpec, rng: &mut SeededRng) -> Result<Task> {
    spec.validate()?;
    let picks = rng.choose_distinct(spec.grid_size()?, spec.n_classes)?;
    let rows: Vec<Vec<f64>> = picks.iter().map(|&i| spec.grid_point(i)).collect();
    let prototypes = DenseMatrix::from_rows(&rows)?;
    let support = noisy_samples(&prototypes, spec.shots, spec.noise_std, rng)?;
    let query = noisy_samples(&prototypes, spec.query_per_class, spec.noise_std, rng)?;
    Ok(Task {
        support,
        query,
        descriptor: TaskDescriptor::Prototypes(prototypes),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskFamily {
    Sine(SineFamilySpec),
    Prototypes(PrototypeFamilySpec),
}

impl TaskFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            TaskFamily::Sine(s) => s.validate(),
            TaskFamily::Prototypes(p) => p.validate(),
        }
    }

    pub fn sample(&self, rng: &mut SeededRng) -> Result<Task> {
        match self {
            TaskFamily::Sine(s) => sample_sine_task(s, rng),
            TaskFamily::Prototypes(p) => sample_prototype_task(p, rng),
        }
    }

    pub fn sample_many(&self, n: usize, rng: &mut SeededRng) -> Result<Vec<Task>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    pub fn loss_kind(&self) -> LossKind {
        match self {
            TaskFamily::Sine(_) => LossKind::Mse,
            TaskFamily::Prototypes(_) => LossKind::SoftmaxCrossEntropy,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            TaskFamily::Sine(_) => 1,
            TaskFamily::Prototypes(p) => p.input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            TaskFamily::Sine(_) => 1,
            TaskFamily::Prototypes(p) => p.n_classes,
        }
    }

    /// Number of sines or number of classes.
    pub fn size(&self) -> usize {
        match self {
            TaskFamily::Sine(s) => s.n_sines,
            TaskFamily::Prototypes(p) => p.n_classes,
        }
    }

    pub fn with_size(&self, n: usize) -> TaskFamily {
        let mut f = self.clone();
        match &mut f {
            TaskFamily::Sine(s) => s.n_sines = n,
            TaskFamily::Prototypes(p) => p.n_classes = n,
        }
        f
    }
}

pub fn save_tasks(path: &Path, tasks: &[Task]) -> Result<()> {
    serde_json::to_writer(BufWriter::new(File::create(path)?), tasks)?;
    Ok(())
}

pub fn load_tasks(path: &Path) -> Result<Vec<Task>> {
    let file = File::open(path)?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::format(path, format!("invalid task file: {e}")))
}
