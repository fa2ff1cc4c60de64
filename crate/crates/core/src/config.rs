//! Experiment configuration: one JSON document describing the task family,
//! network, meta-training, analysis and probe settings, plus optional sweep
//! axes that expand into child runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffcore::{mlp_layers, param_count, LayerSpec};
use crate::error::{Error, Result};
use crate::meta::{AdamConfig, MetaMethod, MethodKind, TrainConfig};
use crate::reconstruct::ProbeConfig;
use crate::subspace::{DEFAULT_ISOMAP_THRESHOLD, DEFAULT_N_NEIGHBORS, DEFAULT_PCA_THRESHOLD};
use crate::taskgen::TaskFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Hidden layer widths, input side first.
    #[serde(default = "defaults::hidden")]
    pub hidden: Vec<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: defaults::hidden(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "defaults::n_neighbors")]
    pub n_neighbors: usize,
    /// Inclusive `[lo, hi]` range of embedding sizes to scan.
    #[serde(default = "defaults::k_range")]
    pub k_range: [usize; 2],
    #[serde(default = "defaults::pca_threshold")]
    pub pca_threshold: f64,
    #[serde(default = "defaults::isomap_threshold")]
    pub isomap_threshold: f64,
    #[serde(default = "defaults::n_collect_tasks")]
    pub n_collect_tasks: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            n_neighbors: defaults::n_neighbors(),
            k_range: defaults::k_range(),
            pca_threshold: defaults::pca_threshold(),
            isomap_threshold: defaults::isomap_threshold(),
            n_collect_tasks: defaults::n_collect_tasks(),
        }
    }
}

impl AnalysisConfig {
    pub fn k_values(&self) -> Vec<usize> {
        (self.k_range[0]..=self.k_range[1]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    #[serde(default = "defaults::probe_k")]
    pub k_values: Vec<usize>,
    #[serde(default = "defaults::probe_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub probe: ProbeConfig,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            k_values: defaults::probe_k(),
            seeds: defaults::probe_seeds(),
            probe: ProbeConfig::default(),
        }
    }
}

/// Sweep axes; every non-empty list replaces the matching base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Number of sines or classes.
    #[serde(default)]
    pub n: Vec<usize>,
    /// Width of the last hidden layer.
    #[serde(default)]
    pub hidden_width: Vec<usize>,
    #[serde(default)]
    pub method: Vec<MethodKind>,
    #[serde(default)]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaConfig {
    pub seed: u64,
    pub method: MethodKind,
    pub family: TaskFamily,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default = "defaults::inner_lr")]
    pub inner_lr: f64,
    #[serde(default = "defaults::outer_lr")]
    pub outer_lr: f64,
    /// Outer learning rate of the Meta-Curvature blocks; defaults to `outer_lr`.
    #[serde(default)]
    pub curvature_lr: Option<f64>,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::batches_per_epoch")]
    pub batches_per_epoch: usize,
    #[serde(default = "defaults::meta_batch_size")]
    pub meta_batch_size: usize,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub reconstruct: ReconstructConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

mod defaults {
    use super::*;

    pub fn hidden() -> Vec<usize> {
        vec![40, 40]
    }
    pub fn n_neighbors() -> usize {
        DEFAULT_N_NEIGHBORS
    }
    pub fn k_range() -> [usize; 2] {
        [1, 10]
    }
    pub fn pca_threshold() -> f64 {
        DEFAULT_PCA_THRESHOLD
    }
    pub fn isomap_threshold() -> f64 {
        DEFAULT_ISOMAP_THRESHOLD
    }
    pub fn n_collect_tasks() -> usize {
        500
    }
    pub fn probe_k() -> Vec<usize> {
        (1..=6).collect()
    }
    pub fn probe_seeds() -> Vec<u64> {
        (0..5).collect()
    }
    pub fn inner_lr() -> f64 {
        0.01
    }
    pub fn outer_lr() -> f64 {
        1e-3
    }
    pub fn epochs() -> usize {
        100
    }
    pub fn batches_per_epoch() -> usize {
        100
    }
    pub fn meta_batch_size() -> usize {
        32
    }
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field: field.into(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

fn at_least_one(field: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(invalid(field, "must be >= 1"))
    }
}

impl MetaConfig {
    /// Default settings for a family; only seed, method and family are required.
    pub fn new(seed: u64, method: MethodKind, family: TaskFamily) -> Self {
        Self {
            seed,
            method,
            family,
            network: NetworkConfig::default(),
            inner_lr: defaults::inner_lr(),
            outer_lr: defaults::outer_lr(),
            curvature_lr: None,
            epochs: defaults::epochs(),
            batches_per_epoch: defaults::batches_per_epoch(),
            meta_batch_size: defaults::meta_batch_size(),
            analysis: AnalysisConfig::default(),
            reconstruct: ReconstructConfig::default(),
            output_dir: None,
            sweep: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: MetaConfig = serde_json::from_str(text).map_err(|e| Error::InvalidConfig {
            field: missing_field(&e.to_string()).unwrap_or_else(|| "<document>".into()),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        mlp_layers(
            self.family.input_dim(),
            &self.network.hidden,
            self.family.output_dim(),
        )
    }

    pub fn method(&self) -> MetaMethod {
        MetaMethod {
            kind: self.method,
            inner_lr: self.inner_lr,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            method: self.method(),
            outer: AdamConfig::with_lr(self.outer_lr),
            curvature_lr: self.curvature_lr,
            epochs: self.epochs,
            batches_per_epoch: self.batches_per_epoch,
            meta_batch_size: self.meta_batch_size,
        }
    }

    /// Checks every field; the error names the first offending one.
    pub fn validate(&self) -> Result<()> {
        self.family.validate().map_err(|e| match e {
            Error::InvalidConfig { field, message } => Error::InvalidConfig {
                field: format!("family.{field}"),
                message,
            },
            other => other,
        })?;
        if self.network.hidden.is_empty() {
            return Err(invalid("network.hidden", "needs at least one hidden layer"));
        }
        if self.network.hidden.contains(&0) {
            return Err(invalid("network.hidden", "widths must be >= 1"));
        }
        positive("inner_lr", self.inner_lr)?;
        positive("outer_lr", self.outer_lr)?;
        if let Some(lr) = self.curvature_lr {
            positive("curvature_lr", lr)?;
        }
        // epochs = 0 is a valid no-op run
        at_least_one("batches_per_epoch", self.batches_per_epoch)?;
        at_least_one("meta_batch_size", self.meta_batch_size)?;

        let a = &self.analysis;
        at_least_one("analysis.n_neighbors", a.n_neighbors)?;
        if a.n_collect_tasks < 2 {
            return Err(invalid("analysis.n_collect_tasks", "must be >= 2"));
        }
        if a.n_neighbors >= a.n_collect_tasks {
            return Err(invalid(
                "analysis.n_neighbors",
                format!("must be < n_collect_tasks ({})", a.n_collect_tasks),
            ));
        }
        let k_cap = (a.n_collect_tasks - 1).min(param_count(&self.layers()));
        let [lo, hi] = a.k_range;
        if lo == 0 || lo > hi || hi > k_cap {
            return Err(invalid(
                "analysis.k_range",
                format!("must satisfy 1 <= lo <= hi <= {k_cap}, got [{lo}, {hi}]"),
            ));
        }
        if !(a.pca_threshold > 0.0 && a.pca_threshold <= 1.0) {
            return Err(invalid("analysis.pca_threshold", "must lie in (0, 1]"));
        }
        if !(a.isomap_threshold >= 0.0 && a.isomap_threshold < 1.0) {
            return Err(invalid("analysis.isomap_threshold", "must lie in [0, 1)"));
        }

        let r = &self.reconstruct;
        if r.k_values.is_empty() || r.k_values.contains(&0) {
            return Err(invalid("reconstruct.k_values", "needs values >= 1"));
        }
        if r.seeds.is_empty() {
            return Err(invalid("reconstruct.seeds", "needs at least one seed"));
        }
        r.probe.validate().map_err(|e| match e {
            Error::InvalidConfig { field, message } => Error::InvalidConfig {
                field: format!("reconstruct.{field}"),
                message,
            },
            other => other,
        })?;

        if let Some(s) = &self.sweep {
            if s.n.contains(&0) {
                return Err(invalid("sweep.n", "values must be >= 1"));
            }
            if s.hidden_width.contains(&0) {
                return Err(invalid("sweep.hidden_width", "values must be >= 1"));
            }
        }
        Ok(())
    }

    /// Cartesian product of the sweep axes as `(name, config)` pairs; a config
    /// without sweep yields itself under the name `"run"`.
    pub fn expand(&self) -> Result<Vec<(String, MetaConfig)>> {
        let Some(sweep) = &self.sweep else {
            let mut c = self.clone();
            c.sweep = None;
            return Ok(vec![("run".into(), c)]);
        };
        let or_base = |v: &Vec<usize>, base: usize| if v.is_empty() { vec![base] } else { v.clone() };
        let last = *self.network.hidden.last().expect("validated");
        let ns = or_base(&sweep.n, self.family.size());
        let widths = or_base(&sweep.hidden_width, last);
        let methods = if sweep.method.is_empty() {
            vec![self.method]
        } else {
            sweep.method.clone()
        };
        let seeds = if sweep.seeds.is_empty() {
            vec![self.seed]
        } else {
            sweep.seeds.clone()
        };
        let mut out = Vec::new();
        for &n in &ns {
            for &w in &widths {
                for &m in &methods {
                    for &s in &seeds {
                        let mut c = self.clone();
                        c.sweep = None;
                        c.family = self.family.with_size(n);
                        *c.network.hidden.last_mut().expect("validated") = w;
                        c.method = m;
                        c.seed = s;
                        c.validate()?;
                        out.push((format!("n{n}_w{w}_{m}_s{s}"), c));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Pulls the field name out of serde's "missing field `x`" / "unknown field `x`" messages.
fn missing_field(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

/// JSON schema of [`MetaConfig`], for editors and external validation.
pub const CONFIG_SCHEMA: &str = include_str!("../schema/meta_config.schema.json");
