//! Fully connected networks with exact gradients and Hessian-vector products.
//!
//! Parameters live in one flat vector. Layers are stored in order; within a
//! layer the weight matrix `W` (`out_dim x in_dim`, row-major, so
//! `W[o][i]` is at `offset + o * in_dim + i`) comes first, followed by the
//! `out_dim` biases. A layer computes `z = W a + b`, `a' = act(z)`.
//!
//! Gradients are analytic backpropagation. Hessian-vector products use a
//! forward-over-reverse pass (the R-operator). ReLU is piecewise linear, so its
//! second derivative contributes nothing; the subgradient at exactly 0 is 0.

use std::fs::File;
use std::io::BufReader;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gemm, DenseMatrix, SeededRng, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Identity => z,
        }
    }

    #[inline]
    fn slope(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        (self.in_dim + 1) * self.out_dim
    }

    pub fn weight_count(&self) -> usize {
        self.in_dim * self.out_dim
    }
}

/// ReLU hidden layers followed by a linear output layer.
pub fn mlp_layers(input_dim: usize, hidden: &[usize], output_dim: usize) -> Vec<LayerSpec> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(input_dim);
    dims.extend_from_slice(hidden);
    dims.push(output_dim);
    let last = dims.len() - 2;
    dims.windows(2)
        .enumerate()
        .map(|(l, w)| {
            let act = if l == last {
                Activation::Identity
            } else {
                Activation::Relu
            };
            LayerSpec::new(w[0], w[1], act)
        })
        .collect()
}

pub fn validate_layers(layers: &[LayerSpec]) -> Result<()> {
    let Some(last) = layers.last() else {
        return Err(Error::Argument("network needs at least one layer".into()));
    };
    for (l, spec) in layers.iter().enumerate() {
        if spec.in_dim == 0 || spec.out_dim == 0 {
            return Err(Error::Argument(format!("layer {l} has a zero dimension")));
        }
        if l > 0 && layers[l - 1].out_dim != spec.in_dim {
            return Err(Error::Dimension(format!(
                "layer {l} expects {} inputs but layer {} produces {}",
                spec.in_dim,
                l - 1,
                layers[l - 1].out_dim
            )));
        }
    }
    if last.activation != Activation::Identity {
        return Err(Error::Argument(
            "the output layer must use the identity activation".into(),
        ));
    }
    Ok(())
}

pub fn param_count(layers: &[LayerSpec]) -> usize {
    layers.iter().map(LayerSpec::param_count).sum()
}

/// Flat index ranges of each layer's parameters.
pub fn layer_ranges(layers: &[LayerSpec]) -> Vec<Range<usize>> {
    let mut start = 0;
    layers
        .iter()
        .map(|l| {
            let r = start..start + l.param_count();
            start = r.end;
            r
        })
        .collect()
}

/// Where a flat parameter index lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSlot {
    Weight { layer: usize, row: usize, col: usize },
    Bias { layer: usize, row: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<LayerSpec>,
    theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsSidecar {
    layers: Vec<LayerSpec>,
    param_count: usize,
}

impl MlpParams {
    pub fn new(layers: Vec<LayerSpec>, theta: Vec<f64>) -> Result<Self> {
        validate_layers(&layers)?;
        let want = param_count(&layers);
        if theta.len() != want {
            return Err(Error::Dimension(format!(
                "network needs {want} parameters, got {}",
                theta.len()
            )));
        }
        Ok(Self { layers, theta })
    }

    pub fn zeros(layers: Vec<LayerSpec>) -> Result<Self> {
        let n = param_count(&layers);
        Self::new(layers, vec![0.0; n])
    }

    /// Weights uniform on `±sqrt(6 / (in + out))`, biases zero.
    pub fn init(layers: Vec<LayerSpec>, rng: &mut SeededRng) -> Result<Self> {
        validate_layers(&layers)?;
        let mut theta = Vec::with_capacity(param_count(&layers));
        for l in &layers {
            let bound = (6.0 / (l.in_dim + l.out_dim) as f64).sqrt();
            for _ in 0..l.weight_count() {
                theta.push(rng.uniform(-bound, bound)?);
            }
            theta.extend(std::iter::repeat_n(0.0, l.out_dim));
        }
        Self::new(layers, theta)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn into_theta(self) -> Vec<f64> {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn layer_ranges(&self) -> Vec<Range<usize>> {
        layer_ranges(&self.layers)
    }

    /// Same architecture, different parameter vector.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Self::new(self.layers.clone(), theta)
    }

    pub fn slot(&self, index: usize) -> Option<ParamSlot> {
        let mut start = 0;
        for (layer, l) in self.layers.iter().enumerate() {
            let local = index.checked_sub(start)?;
            if local < l.weight_count() {
                return Some(ParamSlot::Weight {
                    layer,
                    row: local / l.in_dim,
                    col: local % l.in_dim,
                });
            }
            if local < l.param_count() {
                return Some(ParamSlot::Bias {
                    layer,
                    row: local - l.weight_count(),
                });
            }
            start += l.param_count();
        }
        None
    }

    pub fn index_of(&self, slot: ParamSlot) -> Option<usize> {
        let (layer, local) = match slot {
            ParamSlot::Weight { layer, row, col } => {
                let l = self.layers.get(layer)?;
                if row >= l.out_dim || col >= l.in_dim {
                    return None;
                }
                (layer, row * l.in_dim + col)
            }
            ParamSlot::Bias { layer, row } => {
                let l = self.layers.get(layer)?;
                if row >= l.out_dim {
                    return None;
                }
                (layer, l.weight_count() + row)
            }
        };
        Some(self.layer_ranges()[layer].start + local)
    }

    /// Writes `<stem>.bin` (a 1 x P matrix) and `<stem>.json` (layer specs).
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let m = DenseMatrix::new(1, self.theta.len(), self.theta.clone())?;
        m.save_binary(dir.join(format!("{stem}.bin")))?;
        let sidecar = ParamsSidecar {
            layers: self.layers.clone(),
            param_count: self.theta.len(),
        };
        serde_json::to_writer_pretty(File::create(dir.join(format!("{stem}.json")))?, &sidecar)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let json_path = dir.join(format!("{stem}.json"));
        let sidecar: ParamsSidecar =
            serde_json::from_reader(BufReader::new(File::open(&json_path)?))?;
        let bin_path = dir.join(format!("{stem}.bin"));
        let m = DenseMatrix::load_binary(&bin_path)?;
        if m.rows() != 1 || m.cols() != sidecar.param_count {
            return Err(Error::format(
                bin_path,
                format!(
                    "expected a 1 x {} parameter row, found {} x {}",
                    sidecar.param_count,
                    m.rows(),
                    m.cols()
                ),
            ));
        }
        Self::new(sidecar.layers, m.into_data())
    }

    fn first_non_finite(&self) -> Option<usize> {
        self.theta.iter().position(|v| !v.is_finite())
    }

    fn weights(&self, layer: usize, range: &Range<usize>) -> View<'_> {
        let l = &self.layers[layer];
        View::new(
            &self.theta[range.start..range.start + l.weight_count()],
            l.out_dim,
            l.in_dim,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    /// `n x d_out` regression targets.
    Values(DenseMatrix),
    /// One class index per row.
    Labels(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub inputs: DenseMatrix,
    pub targets: Targets,
}

impl Batch {
    pub fn regression(inputs: DenseMatrix, targets: DenseMatrix) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::Argument("batch must contain at least one row".into()));
        }
        if targets.rows() != inputs.rows() {
            return Err(Error::Dimension(format!(
                "{} inputs but {} targets",
                inputs.rows(),
                targets.rows()
            )));
        }
        Ok(Self {
            inputs,
            targets: Targets::Values(targets),
        })
    }

    pub fn classification(inputs: DenseMatrix, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::Argument("batch must contain at least one row".into()));
        }
        if labels.len() != inputs.rows() {
            return Err(Error::Dimension(format!(
                "{} inputs but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        Ok(Self {
            inputs,
            targets: Targets::Labels(labels),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Labels(l) => Some(l),
            Targets::Values(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    SoftmaxCrossEntropy,
}

struct Tape {
    /// `acts[0]` is the input; `acts[l + 1]` is the output of layer `l`.
    acts: Vec<DenseMatrix>,
    /// Pre-activations per layer.
    pre: Vec<DenseMatrix>,
}

fn check_inputs(params: &MlpParams, inputs: &DenseMatrix) -> Result<()> {
    if inputs.cols() != params.input_dim() {
        return Err(Error::Dimension(format!(
            "network takes {} input features, got {}",
            params.input_dim(),
            inputs.cols()
        )));
    }
    Ok(())
}

fn check_batch(params: &MlpParams, batch: &Batch, kind: LossKind) -> Result<()> {
    check_inputs(params, &batch.inputs)?;
    if batch.is_empty() {
        return Err(Error::Argument("batch must contain at least one row".into()));
    }
    let out = params.output_dim();
    match (&batch.targets, kind) {
        (Targets::Values(t), LossKind::Mse) => {
            if t.shape() != (batch.len(), out) {
                return Err(Error::Dimension(format!(
                    "targets are {}x{}, network output is {}x{out}",
                    t.rows(),
                    t.cols(),
                    batch.len()
                )));
            }
        }
        (Targets::Labels(labels), LossKind::SoftmaxCrossEntropy) => {
            if let Some(&bad) = labels.iter().find(|&&c| c >= out) {
                return Err(Error::Argument(format!(
                    "label {bad} out of range for {out} classes"
                )));
            }
        }
        _ => {
            return Err(Error::Argument(format!(
                "loss {kind:?} does not match the batch target form"
            )))
        }
    }
    Ok(())
}

fn run_forward(params: &MlpParams, inputs: &DenseMatrix) -> Tape {
    let n = inputs.rows();
    let ranges = params.layer_ranges();
    let mut acts = Vec::with_capacity(params.layers.len() + 1);
    let mut pre = Vec::with_capacity(params.layers.len());
    acts.push(inputs.clone());
    for (l, spec) in params.layers.iter().enumerate() {
        let range = &ranges[l];
        let bias = &params.theta[range.start + spec.weight_count()..range.end];
        let mut z = DenseMatrix::zeros(n, spec.out_dim);
        gemm(
            1.0,
            acts[l].view(),
            params.weights(l, range).t(),
            0.0,
            z.data_mut(),
        );
        for i in 0..n {
            for (zi, b) in z.row_mut(i).iter_mut().zip(bias) {
                *zi += b;
            }
        }
        let mut a = z.clone();
        a.data_mut()
            .iter_mut()
            .for_each(|v| *v = spec.activation.apply(*v));
        pre.push(z);
        acts.push(a);
    }
    Tape { acts, pre }
}

fn non_finite(params: &MlpParams) -> Error {
    Error::NonFinite {
        param_index: params.first_non_finite(),
    }
}

pub fn forward(params: &MlpParams, inputs: &DenseMatrix) -> Result<DenseMatrix> {
    check_inputs(params, inputs)?;
    if params.first_non_finite().is_some() {
        return Err(non_finite(params));
    }
    let mut tape = run_forward(params, inputs);
    let out = tape.acts.pop().expect("at least one layer");
    if out.data().iter().any(|v| !v.is_finite()) {
        return Err(non_finite(params));
    }
    Ok(out)
}

fn softmax_row(z: &[f64], out: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
    // log-sum-exp
    max + sum.ln()
}

/// Loss value and `dL/dz` at the output layer.
fn output_loss(
    logits: &DenseMatrix,
    targets: &Targets,
    kind: LossKind,
) -> (f64, DenseMatrix, Option<DenseMatrix>) {
    let (n, d) = logits.shape();
    match (kind, targets) {
        (LossKind::Mse, Targets::Values(t)) => {
            let scale = 1.0 / (n * d) as f64;
            let mut delta = DenseMatrix::zeros(n, d);
            let mut total = 0.0;
            for ((g, &z), &y) in delta.data_mut().iter_mut().zip(logits.data()).zip(t.data()) {
                let r = z - y;
                total += r * r;
                *g = 2.0 * scale * r;
            }
            (total * scale, delta, None)
        }
        (LossKind::SoftmaxCrossEntropy, Targets::Labels(labels)) => {
            let mut probs = DenseMatrix::zeros(n, d);
            let mut total = 0.0;
            for (i, &c) in labels.iter().enumerate() {
                let lse = softmax_row(logits.row(i), probs.row_mut(i));
                total += lse - logits.get(i, c);
            }
            let mut delta = probs.clone();
            for (i, &c) in labels.iter().enumerate() {
                let row = delta.row_mut(i);
                row[c] -= 1.0;
                row.iter_mut().for_each(|g| *g /= n as f64);
            }
            (total / n as f64, delta, Some(probs))
        }
        _ => unreachable!("checked by check_batch"),
    }
}

/// Forward and backward pass at fixed parameters, reusable for several
/// Hessian-vector products.
pub struct Evaluation<'a> {
    params: &'a MlpParams,
    kind: LossKind,
    tape: Tape,
    /// `dL/dz` per layer.
    deltas: Vec<DenseMatrix>,
    probs: Option<DenseMatrix>,
    loss: f64,
    grad: Vec<f64>,
}

impl<'a> Evaluation<'a> {
    pub fn new(params: &'a MlpParams, batch: &Batch, kind: LossKind) -> Result<Self> {
        check_batch(params, batch, kind)?;
        // ReLU would silently clamp a NaN parameter
        if params.first_non_finite().is_some() {
            return Err(non_finite(params));
        }
        let tape = run_forward(params, &batch.inputs);
        let logits = tape.acts.last().expect("output layer");
        if logits.data().iter().any(|v| !v.is_finite()) {
            return Err(non_finite(params));
        }
        let (loss, delta_out, probs) = output_loss(logits, &batch.targets, kind);
        if !loss.is_finite() {
            return Err(non_finite(params));
        }

        let layers = params.layers();
        let ranges = params.layer_ranges();
        let n = batch.len();
        let mut grad = vec![0.0; params.len()];
        let mut deltas = vec![DenseMatrix::zeros(0, 0); layers.len()];
        let mut delta = delta_out;
        for l in (0..layers.len()).rev() {
            let spec = &layers[l];
            let range = &ranges[l];
            let (gw, gb) = grad[range.clone()].split_at_mut(spec.weight_count());
            gemm(1.0, delta.view().t(), tape.acts[l].view(), 0.0, gw);
            column_sums_into(&delta, gb);
            if l > 0 {
                let mut back = DenseMatrix::zeros(n, spec.in_dim);
                gemm(
                    1.0,
                    delta.view(),
                    params.weights(l, range),
                    0.0,
                    back.data_mut(),
                );
                let act = layers[l - 1].activation;
                for (b, &z) in back.data_mut().iter_mut().zip(tape.pre[l - 1].data()) {
                    *b *= act.slope(z);
                }
                deltas[l] = std::mem::replace(&mut delta, back);
            } else {
                deltas[0] = std::mem::replace(&mut delta, DenseMatrix::zeros(0, 0));
            }
        }

        Ok(Self {
            params,
            kind,
            tape,
            deltas,
            probs,
            loss,
            grad,
        })
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn into_grad(self) -> Vec<f64> {
        self.grad
    }

    pub fn outputs(&self) -> &DenseMatrix {
        self.tape.acts.last().expect("output layer")
    }

    /// Hessian of the loss times `v`.
    pub fn hvp(&self, v: &[f64]) -> Result<Vec<f64>> {
        let params = self.params;
        if v.len() != params.len() {
            return Err(Error::Dimension(format!(
                "direction has length {}, network has {} parameters",
                v.len(),
                params.len()
            )));
        }
        let layers = params.layers();
        let ranges = params.layer_ranges();
        let n = self.tape.acts[0].rows();
        let dir_weights = |l: usize| {
            let s = &layers[l];
            View::new(
                &v[ranges[l].start..ranges[l].start + s.weight_count()],
                s.out_dim,
                s.in_dim,
            )
        };

        // R-forward: tangents of pre-activations and activations
        let mut r_acts: Vec<DenseMatrix> = Vec::with_capacity(layers.len() + 1);
        let mut r_pre: Vec<DenseMatrix> = Vec::with_capacity(layers.len());
        r_acts.push(DenseMatrix::zeros(n, layers[0].in_dim));
        for (l, spec) in layers.iter().enumerate() {
            let range = &ranges[l];
            let mut rz = DenseMatrix::zeros(n, spec.out_dim);
            if l > 0 {
                gemm(
                    1.0,
                    r_acts[l].view(),
                    params.weights(l, range).t(),
                    0.0,
                    rz.data_mut(),
                );
            }
            gemm(
                1.0,
                self.tape.acts[l].view(),
                dir_weights(l).t(),
                1.0,
                rz.data_mut(),
            );
            let c = &v[range.start + spec.weight_count()..range.end];
            for i in 0..n {
                for (x, b) in rz.row_mut(i).iter_mut().zip(c) {
                    *x += b;
                }
            }
            let mut ra = rz.clone();
            for (x, &z) in ra.data_mut().iter_mut().zip(self.tape.pre[l].data()) {
                *x *= spec.activation.slope(z);
            }
            r_pre.push(rz);
            r_acts.push(ra);
        }

        // R of the output delta
        let last = layers.len() - 1;
        let rz_out = &r_pre[last];
        let (rows, d) = rz_out.shape();
        let mut r_delta = DenseMatrix::zeros(rows, d);
        match self.kind {
            LossKind::Mse => {
                let scale = 2.0 / (rows * d) as f64;
                for (o, &x) in r_delta.data_mut().iter_mut().zip(rz_out.data()) {
                    *o = scale * x;
                }
            }
            LossKind::SoftmaxCrossEntropy => {
                let probs = self.probs.as_ref().expect("softmax probabilities");
                for i in 0..rows {
                    let p = probs.row(i);
                    let rz = rz_out.row(i);
                    let pr: f64 = p.iter().zip(rz).map(|(a, b)| a * b).sum();
                    for (j, o) in r_delta.row_mut(i).iter_mut().enumerate() {
                        *o = p[j] * (rz[j] - pr) / rows as f64;
                    }
                }
            }
        }

        // R-backward
        let mut out = vec![0.0; params.len()];
        for l in (0..layers.len()).rev() {
            let spec = &layers[l];
            let range = &ranges[l];
            let delta = &self.deltas[l];
            let (hw, hb) = out[range.clone()].split_at_mut(spec.weight_count());
            gemm(1.0, r_delta.view().t(), self.tape.acts[l].view(), 0.0, hw);
            if l > 0 {
                gemm(1.0, delta.view().t(), r_acts[l].view(), 1.0, hw);
            }
            column_sums_into(&r_delta, hb);
            if l > 0 {
                let mut back = DenseMatrix::zeros(n, spec.in_dim);
                gemm(
                    1.0,
                    r_delta.view(),
                    params.weights(l, range),
                    0.0,
                    back.data_mut(),
                );
                gemm(1.0, delta.view(), dir_weights(l), 1.0, back.data_mut());
                let act = layers[l - 1].activation;
                for (b, &z) in back.data_mut().iter_mut().zip(self.tape.pre[l - 1].data()) {
                    *b *= act.slope(z);
                }
                r_delta = back;
            }
        }
        Ok(out)
    }
}

fn column_sums_into(m: &DenseMatrix, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for r in m.row_iter() {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
}

pub fn loss(params: &MlpParams, batch: &Batch, kind: LossKind) -> Result<f64> {
    Ok(Evaluation::new(params, batch, kind)?.loss())
}

pub fn grad(params: &MlpParams, batch: &Batch, kind: LossKind) -> Result<Vec<f64>> {
    Ok(Evaluation::new(params, batch, kind)?.into_grad())
}

pub fn loss_and_grad(params: &MlpParams, batch: &Batch, kind: LossKind) -> Result<(f64, Vec<f64>)> {
    let e = Evaluation::new(params, batch, kind)?;
    Ok((e.loss(), e.into_grad()))
}

pub fn hvp(params: &MlpParams, batch: &Batch, kind: LossKind, v: &[f64]) -> Result<Vec<f64>> {
    Evaluation::new(params, batch, kind)?.hvp(v)
}

/// Fraction of rows whose arg-max logit equals the label (ties go to the lower class index).
pub fn accuracy(params: &MlpParams, batch: &Batch) -> Result<f64> {
    let labels = batch
        .labels()
        .ok_or_else(|| Error::Argument("accuracy needs a labeled batch".into()))?;
    let logits = forward(params, &batch.inputs)?;
    Ok(accuracy_of_logits(&logits, labels))
}

pub(crate) fn accuracy_of_logits(logits: &DenseMatrix, labels: &[usize]) -> f64 {
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(i, &c)| argmax(logits.row(i)) == c)
        .count();
    hits as f64 / labels.len() as f64
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
