//! MAML and Meta-Curvature: one-step adaptation, exact second-order
//! meta-gradients, the outer training loop, and collection of the adapted
//! parameter vectors.
//!
//! For a task with support loss `L_S` and query loss `L_Q`, adaptation is
//! `θ' = θ - α P g_S` with `P = I` (MAML) or the block-diagonal
//! Meta-Curvature matrix `G` (one dense block per layer). The meta-gradient of
//! `L_Q(θ')` is `g_Q - α H_S Pᵀ g_Q`, and for Meta-Curvature
//! `∂/∂G_ℓ = -α g_{Q,ℓ} g_{S,ℓ}ᵀ`.

use std::fs::File;
use std::io::BufReader;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffcore::{self, Batch, Evaluation, LayerSpec, LossKind, MlpParams, Targets};
use crate::error::{Error, Result};
use crate::numerics::{gemm, DenseMatrix, SeededRng};
use crate::taskgen::TaskFamily;

/// Ground-truth parameters of a task, when the family has them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskDescriptor {
    Amplitudes(Vec<f64>),
    /// One prototype per row, row index = class label.
    Prototypes(DenseMatrix),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub support: Batch,
    pub query: Batch,
    pub descriptor: TaskDescriptor,
}

impl Task {
    pub fn loss_kind(&self) -> LossKind {
        match self.support.targets {
            Targets::Values(_) => LossKind::Mse,
            Targets::Labels(_) => LossKind::SoftmaxCrossEntropy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Maml,
    MetaCurvature,
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MethodKind::Maml => "maml",
            MethodKind::MetaCurvature => "meta_curvature",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaMethod {
    pub kind: MethodKind,
    pub inner_lr: f64,
}

impl MetaMethod {
    pub fn maml(inner_lr: f64) -> Self {
        Self {
            kind: MethodKind::Maml,
            inner_lr,
        }
    }

    pub fn meta_curvature(inner_lr: f64) -> Self {
        Self {
            kind: MethodKind::MetaCurvature,
            inner_lr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Adam moments for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Self {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaState {
    pub params: MlpParams,
    /// Meta-Curvature blocks, one `p_ℓ x p_ℓ` matrix per layer.
    pub curvature: Option<Vec<DenseMatrix>>,
    pub theta_optimizer: Adam,
    pub curvature_optimizers: Vec<Adam>,
    pub epoch: usize,
}

impl MetaState {
    /// Wraps initial parameters; Meta-Curvature blocks start at the identity.
    pub fn new(params: MlpParams, kind: MethodKind, adam: AdamConfig) -> Self {
        let theta_optimizer = Adam::new(adam, params.len());
        let (curvature, curvature_optimizers) = match kind {
            MethodKind::Maml => (None, Vec::new()),
            MethodKind::MetaCurvature => {
                let blocks: Vec<DenseMatrix> = params
                    .layers()
                    .iter()
                    .map(|l| DenseMatrix::identity(l.param_count()))
                    .collect();
                let opts = blocks
                    .iter()
                    .map(|b| Adam::new(adam, b.data().len()))
                    .collect();
                (Some(blocks), opts)
            }
        };
        Self {
            params,
            curvature,
            theta_optimizer,
            curvature_optimizers,
            epoch: 0,
        }
    }

    /// Fresh network with the default initialization.
    pub fn init(
        layers: Vec<LayerSpec>,
        kind: MethodKind,
        adam: AdamConfig,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Ok(Self::new(MlpParams::init(layers, rng)?, kind, adam))
    }

    fn blocks_for(&self, method: &MetaMethod) -> Result<Option<&[DenseMatrix]>> {
        match method.kind {
            MethodKind::Maml => Ok(None),
            MethodKind::MetaCurvature => {
                let blocks = self.curvature.as_deref().ok_or_else(|| {
                    Error::Argument("Meta-Curvature needs curvature blocks in the state".into())
                })?;
                let layers = self.params.layers();
                if blocks.len() != layers.len()
                    || blocks
                        .iter()
                        .zip(layers)
                        .any(|(b, l)| b.shape() != (l.param_count(), l.param_count()))
                {
                    return Err(Error::Dimension(
                        "curvature blocks do not match the layer sizes".into(),
                    ));
                }
                Ok(Some(blocks))
            }
        }
    }
}

/// Applies the block-diagonal curvature to each vector: `G_ℓ x_ℓ`, or
/// `G_ℓᵀ x_ℓ` when `transpose` is set. All vectors go through one matrix
/// product per layer, so the result for a vector does not depend on which
/// other vectors share the call.
fn precondition(
    blocks: &[DenseMatrix],
    ranges: &[Range<usize>],
    vecs: &[Vec<f64>],
    transpose: bool,
) -> Vec<Vec<f64>> {
    let t = vecs.len();
    let mut out: Vec<Vec<f64>> = vecs.iter().map(|v| vec![0.0; v.len()]).collect();
    for (g, range) in blocks.iter().zip(ranges) {
        let p = range.len();
        let mut stacked = Vec::with_capacity(t * p);
        for v in vecs {
            stacked.extend_from_slice(&v[range.clone()]);
        }
        let x = crate::numerics::View::new(&stacked, t, p);
        let mut res = vec![0.0; t * p];
        // rows of X times Gᵀ give G x; rows of X times G give Gᵀ x
        let gv = if transpose { g.view() } else { g.view().t() };
        gemm(1.0, x, gv, 0.0, &mut res);
        for (o, chunk) in out.iter_mut().zip(res.chunks_exact(p)) {
            o[range.clone()].copy_from_slice(chunk);
        }
    }
    out
}

fn inner_steps(
    state: &MetaState,
    method: &MetaMethod,
    support_grads: Vec<Vec<f64>>,
) -> Result<Vec<Vec<f64>>> {
    Ok(match state.blocks_for(method)? {
        None => support_grads,
        Some(blocks) => precondition(blocks, &state.params.layer_ranges(), &support_grads, false),
    })
}

fn step_params(theta: &MlpParams, step: &[f64], alpha: f64) -> Result<MlpParams> {
    let adapted = theta
        .theta()
        .iter()
        .zip(step)
        .map(|(t, s)| t - alpha * s)
        .collect();
    theta.with_theta(adapted)
}

fn check_alpha(method: &MetaMethod) -> Result<()> {
    if !(method.inner_lr >= 0.0 && method.inner_lr.is_finite()) {
        return Err(Error::Argument(format!(
            "inner learning rate must be finite and >= 0, got {}",
            method.inner_lr
        )));
    }
    Ok(())
}

/// Adapts to every task with one inner gradient step.
pub fn adapt_all(state: &MetaState, tasks: &[Task], method: &MetaMethod) -> Result<Vec<MlpParams>> {
    check_alpha(method)?;
    let grads = tasks
        .par_iter()
        .map(|t| diffcore::grad(&state.params, &t.support, t.loss_kind()))
        .collect::<Result<Vec<_>>>()?;
    let steps = inner_steps(state, method, grads)?;
    steps
        .iter()
        .map(|s| step_params(&state.params, s, method.inner_lr))
        .collect()
}

/// `θ' = θ - α P ∇L_S(θ)`.
pub fn adapt(state: &MetaState, task: &Task, method: &MetaMethod) -> Result<MlpParams> {
    let mut out = adapt_all(state, std::slice::from_ref(task), method)?;
    Ok(out.pop().expect("one task"))
}

/// Mean post-adaptation query loss over `tasks`.
pub fn meta_objective(state: &MetaState, tasks: &[Task], method: &MetaMethod) -> Result<f64> {
    if tasks.is_empty() {
        return Err(Error::Argument("meta-objective needs at least one task".into()));
    }
    let adapted = adapt_all(state, tasks, method)?;
    let mut total = 0.0;
    for (p, t) in adapted.iter().zip(tasks) {
        total += diffcore::loss(p, &t.query, t.loss_kind())?;
    }
    Ok(total / tasks.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaGradient {
    pub d_theta: Vec<f64>,
    pub d_curvature: Option<Vec<DenseMatrix>>,
    pub mean_query_loss: f64,
    /// Only for classification tasks.
    pub mean_query_accuracy: Option<f64>,
}

pub fn meta_gradient(state: &MetaState, tasks: &[Task], method: &MetaMethod) -> Result<MetaGradient> {
    if tasks.is_empty() {
        return Err(Error::Argument("meta-gradient needs at least one task".into()));
    }
    check_alpha(method)?;
    let alpha = method.inner_lr;
    let theta = &state.params;
    let blocks = state.blocks_for(method)?;
    let ranges = theta.layer_ranges();

    let support: Vec<Evaluation<'_>> = tasks
        .par_iter()
        .map(|t| Evaluation::new(theta, &t.support, t.loss_kind()))
        .collect::<Result<_>>()?;
    let support_grads: Vec<Vec<f64>> = support.iter().map(|e| e.grad().to_vec()).collect();
    let steps = match blocks {
        None => support_grads.clone(),
        Some(b) => precondition(b, &ranges, &support_grads, false),
    };

    struct QueryOutcome {
        loss: f64,
        accuracy: Option<f64>,
        grad: Vec<f64>,
    }
    let query: Vec<QueryOutcome> = tasks
        .par_iter()
        .zip(&steps)
        .map(|(t, s)| {
            let adapted = step_params(theta, s, alpha)?;
            let e = Evaluation::new(&adapted, &t.query, t.loss_kind())?;
            let accuracy = t
                .query
                .labels()
                .map(|l| diffcore::accuracy_of_logits(e.outputs(), l));
            Ok(QueryOutcome {
                loss: e.loss(),
                accuracy,
                grad: e.into_grad(),
            })
        })
        .collect::<Result<_>>()?;
    let query_grads: Vec<Vec<f64>> = query.iter().map(|q| q.grad.clone()).collect();
    let directions = match blocks {
        None => query_grads.clone(),
        Some(b) => precondition(b, &ranges, &query_grads, true),
    };

    let per_task: Vec<Vec<f64>> = support
        .par_iter()
        .zip(&directions)
        .zip(&query_grads)
        .map(|((e, u), g_q)| {
            let h = e.hvp(u)?;
            Ok(g_q.iter().zip(&h).map(|(g, h)| g - alpha * h).collect())
        })
        .collect::<Result<_>>()?;

    // fixed task-order reduction
    let t = tasks.len() as f64;
    let mut d_theta = vec![0.0; theta.len()];
    for contrib in &per_task {
        for (acc, c) in d_theta.iter_mut().zip(contrib) {
            *acc += c;
        }
    }
    d_theta.iter_mut().for_each(|x| *x /= t);

    let mean_query_loss = query.iter().map(|q| q.loss).sum::<f64>() / t;
    let mean_query_accuracy = if query.iter().all(|q| q.accuracy.is_some()) {
        Some(query.iter().filter_map(|q| q.accuracy).sum::<f64>() / t)
    } else {
        None
    };

    let d_curvature = blocks.map(|blocks| {
        blocks
            .iter()
            .zip(&ranges)
            .map(|(_, range)| {
                let p = range.len();
                let stack = |vs: &[Vec<f64>]| {
                    let mut s = Vec::with_capacity(vs.len() * p);
                    for v in vs {
                        s.extend_from_slice(&v[range.clone()]);
                    }
                    s
                };
                let q = stack(&query_grads);
                let s = stack(&support_grads);
                let mut dg = DenseMatrix::zeros(p, p);
                gemm(
                    -alpha / t,
                    crate::numerics::View::new(&q, tasks.len(), p).t(),
                    crate::numerics::View::new(&s, tasks.len(), p),
                    0.0,
                    dg.data_mut(),
                );
                dg
            })
            .collect()
    });

    Ok(MetaGradient {
        d_theta,
        d_curvature,
        mean_query_loss,
        mean_query_accuracy,
    })
}

/// Outer-loop settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: MetaMethod,
    pub outer: AdamConfig,
    /// Learning rate for the curvature blocks; `None` uses `outer.lr`.
    #[serde(default)]
    pub curvature_lr: Option<f64>,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub meta_batch_size: usize,
}

impl TrainConfig {
    pub fn curvature_adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.curvature_lr.unwrap_or(self.outer.lr),
            ..self.outer
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::InvalidConfig {
                field: field.into(),
                message: message.into(),
            })
        };
        if !(self.method.inner_lr > 0.0 && self.method.inner_lr.is_finite()) {
            return bad("inner_lr", "must be finite and > 0");
        }
        if !(self.outer.lr > 0.0 && self.outer.lr.is_finite()) {
            return bad("outer_lr", "must be finite and > 0");
        }
        if let Some(lr) = self.curvature_lr {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad("curvature_lr", "must be finite and > 0");
            }
        }
        if self.batches_per_epoch == 0 {
            return bad("batches_per_epoch", "must be >= 1");
        }
        if self.meta_batch_size == 0 {
            return bad("meta_batch_size", "must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_query_loss: f64,
    pub mean_query_accuracy: Option<f64>,
}

/// Applies one outer optimizer step with the given meta-gradient.
pub fn apply_meta_gradient(state: &mut MetaState, grad: &MetaGradient) {
    state
        .theta_optimizer
        .update(state.params.theta_mut(), &grad.d_theta);
    if let (Some(blocks), Some(d_blocks)) = (state.curvature.as_mut(), grad.d_curvature.as_ref()) {
        for ((b, d), opt) in blocks
            .iter_mut()
            .zip(d_blocks)
            .zip(state.curvature_optimizers.iter_mut())
        {
            opt.update(b.data_mut(), d.data());
        }
    }
}

/// Runs `epochs x batches_per_epoch` outer steps on freshly sampled meta-batches.
pub fn train<F>(
    config: &TrainConfig,
    mut state: MetaState,
    mut sampler: F,
    rng: &mut SeededRng,
) -> Result<(MetaState, Vec<EpochRecord>)>
where
    F: FnMut(&mut SeededRng) -> Result<Task>,
{
    config.validate()?;
    if config.epochs == 0 {
        return Ok((state, Vec::new()));
    }
    state.theta_optimizer.config = config.outer;
    for opt in &mut state.curvature_optimizers {
        opt.config = config.curvature_adam();
    }
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let epoch = state.epoch + 1;
        let mut loss_sum = 0.0;
        let mut acc_sum = 0.0;
        let mut has_acc = true;
        for _ in 0..config.batches_per_epoch {
            let tasks = (0..config.meta_batch_size)
                .map(|_| sampler(rng))
                .collect::<Result<Vec<_>>>()?;
            let grad = match meta_gradient(&state, &tasks, &config.method) {
                Ok(g) => g,
                Err(Error::NonFinite { .. }) => {
                    return Err(Error::Diverged {
                        epoch,
                        loss: f64::NAN,
                    })
                }
                Err(e) => return Err(e),
            };
            if !grad.mean_query_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: grad.mean_query_loss,
                });
            }
            loss_sum += grad.mean_query_loss;
            match grad.mean_query_accuracy {
                Some(a) => acc_sum += a,
                None => has_acc = false,
            }
            apply_meta_gradient(&mut state, &grad);
        }
        let n = config.batches_per_epoch as f64;
        state.epoch = epoch;
        history.push(EpochRecord {
            epoch,
            mean_query_loss: loss_sum / n,
            mean_query_accuracy: has_acc.then_some(acc_sum / n),
        });
    }
    Ok((state, history))
}

/// Rows are task-adapted parameter vectors, aligned with `descriptors`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedParamsMatrix {
    pub matrix: DenseMatrix,
    pub layers: Vec<LayerSpec>,
    pub descriptors: Vec<TaskDescriptor>,
}

#[derive(Serialize, Deserialize)]
struct AdaptedSidecar {
    rows: usize,
    cols: usize,
    layers: Vec<LayerSpec>,
    descriptors: Vec<TaskDescriptor>,
}

impl AdaptedParamsMatrix {
    pub fn from_matrix(matrix: DenseMatrix, layers: Vec<LayerSpec>) -> Result<Self> {
        if matrix.cols() != diffcore::param_count(&layers) {
            return Err(Error::Dimension(format!(
                "matrix has {} columns but the layers hold {} parameters",
                matrix.cols(),
                diffcore::param_count(&layers)
            )));
        }
        let descriptors = vec![TaskDescriptor::None; matrix.rows()];
        Ok(Self {
            matrix,
            layers,
            descriptors,
        })
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    /// Writes `<stem>.bin` (binary matrix) and `<stem>.json` (layers and descriptors).
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        self.matrix.save_binary(dir.join(format!("{stem}.bin")))?;
        let sidecar = AdaptedSidecar {
            rows: self.matrix.rows(),
            cols: self.matrix.cols(),
            layers: self.layers.clone(),
            descriptors: self.descriptors.clone(),
        };
        let f = std::io::BufWriter::new(File::create(dir.join(format!("{stem}.json")))?);
        serde_json::to_writer(f, &sidecar)?;
        Ok(())
    }

    pub fn load(bin_path: &Path, json_path: &Path) -> Result<Self> {
        let matrix = DenseMatrix::load_binary(bin_path)?;
        let sidecar: AdaptedSidecar =
            serde_json::from_reader(BufReader::new(File::open(json_path)?))
                .map_err(|e| Error::format(json_path, e.to_string()))?;
        if sidecar.rows != matrix.rows()
            || sidecar.cols != matrix.cols()
            || sidecar.descriptors.len() != matrix.rows()
            || diffcore::param_count(&sidecar.layers) != matrix.cols()
        {
            return Err(Error::format(
                json_path,
                format!(
                    "descriptor file describes {}x{} with {} descriptors, matrix is {}x{}",
                    sidecar.rows,
                    sidecar.cols,
                    sidecar.descriptors.len(),
                    matrix.rows(),
                    matrix.cols()
                ),
            ));
        }
        Ok(Self {
            matrix,
            layers: sidecar.layers,
            descriptors: sidecar.descriptors,
        })
    }
}

pub fn collect_adapted(
    state: &MetaState,
    tasks: &[Task],
    method: &MetaMethod,
) -> Result<AdaptedParamsMatrix> {
    if tasks.is_empty() {
        return Err(Error::Argument("need at least one task to collect".into()));
    }
    let adapted = adapt_all(state, tasks, method)?;
    let rows: Vec<Vec<f64>> = adapted.into_iter().map(MlpParams::into_theta).collect();
    Ok(AdaptedParamsMatrix {
        matrix: DenseMatrix::from_rows(&rows)?,
        layers: state.params.layers().to_vec(),
        descriptors: tasks.iter().map(|t| t.descriptor.clone()).collect(),
    })
}

/// JSON sidecar of a checkpoint directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub method: MetaMethod,
    pub epoch: usize,
    pub seed: u64,
    pub layers: Vec<LayerSpec>,
    pub family: TaskFamily,
    pub outer: AdamConfig,
    #[serde(default)]
    pub curvature_lr: Option<f64>,
    pub adam_step: u64,
}

pub const CHECKPOINT_STEM: &str = "checkpoint";

/// Files written by [`save_checkpoint`], relative to the directory.
pub fn checkpoint_files(state: &MetaState) -> Vec<String> {
    let mut files = vec![
        format!("{CHECKPOINT_STEM}.json"),
        format!("{CHECKPOINT_STEM}_theta.bin"),
        format!("{CHECKPOINT_STEM}_adam.bin"),
    ];
    if let Some(blocks) = &state.curvature {
        for l in 0..blocks.len() {
            files.push(format!("{CHECKPOINT_STEM}_g{l}.bin"));
            files.push(format!("{CHECKPOINT_STEM}_g{l}_adam.bin"));
        }
    }
    files
}

fn adam_matrix(opt: &Adam) -> Result<DenseMatrix> {
    let mut data = opt.m.clone();
    data.extend_from_slice(&opt.v);
    DenseMatrix::new(2, opt.m.len(), data)
}

fn adam_from(config: AdamConfig, step: u64, m: DenseMatrix, path: &Path, len: usize) -> Result<Adam> {
    if m.shape() != (2, len) {
        return Err(Error::format(
            path,
            format!("expected 2 x {len} optimizer moments, found {:?}", m.shape()),
        ));
    }
    Ok(Adam {
        config,
        m: m.row(0).to_vec(),
        v: m.row(1).to_vec(),
        step,
    })
}

pub fn save_checkpoint(
    dir: &Path,
    state: &MetaState,
    method: &MetaMethod,
    seed: u64,
    family: &TaskFamily,
) -> Result<()> {
    let meta = CheckpointMeta {
        method: *method,
        epoch: state.epoch,
        seed,
        layers: state.params.layers().to_vec(),
        family: family.clone(),
        outer: state.theta_optimizer.config,
        curvature_lr: state
            .curvature_optimizers
            .first()
            .map(|o| o.config.lr)
            .filter(|&lr| lr != state.theta_optimizer.config.lr),
        adam_step: state.theta_optimizer.step,
    };
    let theta = DenseMatrix::new(1, state.params.len(), state.params.theta().to_vec())?;
    theta.save_binary(dir.join(format!("{CHECKPOINT_STEM}_theta.bin")))?;
    adam_matrix(&state.theta_optimizer)?.save_binary(dir.join(format!("{CHECKPOINT_STEM}_adam.bin")))?;
    if let Some(blocks) = &state.curvature {
        for (l, (b, opt)) in blocks.iter().zip(&state.curvature_optimizers).enumerate() {
            b.save_binary(dir.join(format!("{CHECKPOINT_STEM}_g{l}.bin")))?;
            adam_matrix(opt)?.save_binary(dir.join(format!("{CHECKPOINT_STEM}_g{l}_adam.bin")))?;
        }
    }
    let f = File::create(dir.join(format!("{CHECKPOINT_STEM}.json")))?;
    serde_json::to_writer_pretty(f, &meta)?;
    Ok(())
}

/// Loads a checkpoint given the path of its JSON sidecar.
pub fn load_checkpoint(json_path: &Path) -> Result<(MetaState, CheckpointMeta)> {
    let dir = json_path.parent().unwrap_or(Path::new("."));
    let meta: CheckpointMeta = serde_json::from_reader(BufReader::new(File::open(json_path)?))
        .map_err(|e| Error::format(json_path, e.to_string()))?;
    let theta_path = dir.join(format!("{CHECKPOINT_STEM}_theta.bin"));
    let theta = DenseMatrix::load_binary(&theta_path)?;
    let want = diffcore::param_count(&meta.layers);
    if theta.shape() != (1, want) {
        return Err(Error::format(
            &theta_path,
            format!(
                "layers need {want} parameters, checkpoint holds {}x{}",
                theta.rows(),
                theta.cols()
            ),
        ));
    }
    let params = MlpParams::new(meta.layers.clone(), theta.into_data())
        .map_err(|e| Error::format(&theta_path, e.to_string()))?;
    let mut state = MetaState::new(params, meta.method.kind, meta.outer);
    state.epoch = meta.epoch;
    let adam_path = dir.join(format!("{CHECKPOINT_STEM}_adam.bin"));
    state.theta_optimizer = adam_from(
        meta.outer,
        meta.adam_step,
        DenseMatrix::load_binary(&adam_path)?,
        &adam_path,
        want,
    )?;
    if let Some(blocks) = state.curvature.as_mut() {
        for (l, (b, opt)) in blocks
            .iter_mut()
            .zip(state.curvature_optimizers.iter_mut())
            .enumerate()
        {
            let path = dir.join(format!("{CHECKPOINT_STEM}_g{l}.bin"));
            let loaded = DenseMatrix::load_binary(&path)?;
            if loaded.shape() != b.shape() {
                return Err(Error::format(
                    &path,
                    format!("expected block {:?}, found {:?}", b.shape(), loaded.shape()),
                ));
            }
            *b = loaded;
            let path = dir.join(format!("{CHECKPOINT_STEM}_g{l}_adam.bin"));
            let len = b.data().len();
            let config = AdamConfig {
                lr: meta.curvature_lr.unwrap_or(meta.outer.lr),
                ..meta.outer
            };
            *opt = adam_from(config, meta.adam_step, DenseMatrix::load_binary(&path)?, &path, len)?;
        }
    }
    Ok((state, meta))
}
