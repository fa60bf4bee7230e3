//! Hybrid training on a toy classification task.
//!
//! Model: raw input `R` (`d_in x N`) → features `X = W R` → covariance
//! pooling with matrix square root → upper triangle of `Q` → linear head →
//! softmax cross-entropy. Training starts with the Newton-Schulz layer and
//! swaps to the eigendecomposition forward with an exact-gradient scheme late
//! in the schedule.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::layer::{GcpLayer, GcpLayerConfig};
use crate::matrix::Matrix;
use crate::spectral::{condition_number, eigh, FeatureMatrix};
use crate::svd_grad::BackwardScheme;
use crate::synth::{gaussian_matrix, random_orthogonal, seeded_rng};

pub const DEFAULT_WARMUP_FRAC: f64 = 0.05;
pub const DEFAULT_SWITCH_FRAC: f64 = 0.6;
pub const MOMENTUM: f64 = 0.9;

/// When to swap the layer and how the learning rate evolves.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridSchedule {
    /// Step at which the Newton-Schulz layer is replaced; `None` never swaps.
    pub switch_step: Option<usize>,
    /// Steps after the swap that keep the pre-swap learning rate.
    pub warmup_steps: usize,
    pub post_switch_scheme: BackwardScheme,
    /// `(step, lr)` pairs sorted by step; the first must be at step 0.
    pub lr_schedule: Vec<(usize, f64)>,
}

impl HybridSchedule {
    /// Default learning-rate plan for `steps` steps: `lr0`, then /10 at 70%
    /// and again at 90%.
    pub fn default_lr(steps: usize, lr0: f64) -> Vec<(usize, f64)> {
        vec![(0, lr0), (steps * 7 / 10, lr0 * 0.1), (steps * 9 / 10, lr0 * 0.01)]
    }

    /// Schedule from fractions of the run length. A switch fraction of 1 or
    /// more means no swap.
    pub fn from_fractions(
        steps: usize,
        switch_frac: f64,
        warmup_frac: f64,
        post_switch_scheme: BackwardScheme,
        lr_schedule: Vec<(usize, f64)>,
    ) -> Result<Self> {
        let switch_step = if switch_frac >= 1.0 { None } else { Some((switch_frac.max(0.0) * steps as f64).round() as usize) };
        let s = Self {
            switch_step,
            warmup_steps: (warmup_frac.max(0.0) * steps as f64).round() as usize,
            post_switch_scheme,
            lr_schedule,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr_schedule.is_empty() || self.lr_schedule[0].0 != 0 {
            return Err(Error::invalid("learning-rate schedule must start at step 0"));
        }
        if self.lr_schedule.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid("learning-rate schedule steps must increase"));
        }
        if self.lr_schedule.iter().any(|&(_, lr)| !(lr > 0.0) || !lr.is_finite()) {
            return Err(Error::invalid("learning rates must be positive and finite"));
        }
        if let Some(s) = self.switch_step {
            let last_decay = self.lr_schedule.last().map(|p| p.0).unwrap_or(0);
            if self.lr_schedule.len() > 1 && s >= last_decay {
                return Err(Error::invalid(format!(
                    "switch step {s} must precede the final learning-rate decay at step {last_decay}"
                )));
            }
        }
        Ok(())
    }

    fn scheduled_lr(&self, step: usize) -> f64 {
        self.lr_schedule.iter().take_while(|&&(s, _)| s <= step).last().map(|p| p.1).unwrap_or(self.lr_schedule[0].1)
    }

    /// Learning rate in force at `step`, holding the pre-swap rate through
    /// the warm-up window.
    pub fn lr_at(&self, step: usize) -> f64 {
        if let Some(s) = self.switch_step {
            if step >= s && step < s + self.warmup_steps {
                return self.scheduled_lr(s.saturating_sub(1));
            }
        }
        self.scheduled_lr(step)
    }

    pub fn switched(&self, step: usize) -> bool {
        self.switch_step.map_or(false, |s| step >= s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    /// Each class scales up its own block of low-variance input directions.
    Gaussian,
    /// The class signal sits only in the two smallest-variance directions.
    Fine,
}

impl core::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(DatasetKind::Gaussian),
            "fine" => Ok(DatasetKind::Fine),
            other => Err(Error::invalid(format!("unknown dataset `{other}`"))),
        }
    }
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Gaussian => "gaussian",
            DatasetKind::Fine => "fine",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyModelSpec {
    pub classes: usize,
    /// Raw input channels.
    pub d_in: usize,
    /// Pooled feature channels.
    pub d: usize,
    /// Spatial positions per sample.
    pub n: usize,
    pub samples_per_class: usize,
    pub batch_size: usize,
    pub steps: usize,
    /// Newton-Schulz iterations before the swap.
    pub ns_iterations: usize,
    pub dataset: DatasetKind,
    /// L2 penalty on the projection and head weights.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for ToyModelSpec {
    fn default() -> Self {
        Self {
            classes: 3,
            d_in: 8,
            d: 8,
            n: 32,
            samples_per_class: 40,
            batch_size: 12,
            steps: 600,
            ns_iterations: 20,
            dataset: DatasetKind::Gaussian,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

impl ToyModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.d_in < 2 || self.d < 2 || self.n < 2 {
            return Err(Error::invalid("toy model needs at least 2 classes, channels and positions"));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::invalid("weight decay must be finite and non-negative"));
        }
        if self.samples_per_class == 0 || self.batch_size == 0 || self.steps == 0 || self.ns_iterations == 0 {
            return Err(Error::invalid("sample count, batch size, steps and iterations must be positive"));
        }
        Ok(())
    }
}

/// A labelled set of raw inputs.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub inputs: Vec<Matrix>,
    pub labels: Vec<usize>,
}

/// Input channel scales: geometric from 1 down to 1e-1.
fn channel_scales(d_in: usize) -> Vec<f64> {
    (0..d_in).map(|k| 10f64.powf(-1.0 * k as f64 / (d_in - 1) as f64)).collect()
}

pub fn make_dataset(spec: &ToyModelSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed ^ 0x5eed_da7a);
    let mix = random_orthogonal(spec.d_in, &mut rng);
    let base = channel_scales(spec.d_in);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for c in 0..spec.classes {
        let mut scales = base.clone();
        match spec.dataset {
            DatasetKind::Gaussian => {
                // Every channel's variance is rescaled by a class-specific
                // random factor.
                for sc in scales.iter_mut() {
                    let g: f64 = rng.sample(rand_distr::StandardNormal);
                    *sc *= (0.5 * g).exp();
                }
            }
            DatasetKind::Fine => {
                let k = spec.d_in - 1 - (c % 2);
                scales[k] *= 1.0 + 1.5 * (c as f64 / (spec.classes - 1) as f64);
            }
        }
        for _ in 0..spec.samples_per_class {
            let z = gaussian_matrix(spec.d_in, spec.n, &mut rng);
            let mut scaled = z;
            for i in 0..spec.d_in {
                for j in 0..spec.n {
                    scaled[(i, j)] *= scales[i];
                }
            }
            inputs.push(mix.matmul(&scaled));
            labels.push(c);
        }
    }
    Ok(Dataset { inputs, labels })
}

/// Trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyModel {
    pub w: Matrix,
    pub head: Matrix,
    pub bias: Vec<f64>,
}

impl ToyModel {
    pub fn init(spec: &ToyModelSpec) -> Self {
        let mut rng = seeded_rng(spec.seed ^ 0x0001_dea1);
        // Random projection with singular values spread from 1 down to
        // 1e-3: the starting features are badly conditioned.
        let u = random_orthogonal(spec.d, &mut rng);
        let v = random_orthogonal(spec.d_in, &mut rng);
        let sv = crate::synth::geometric_spectrum(spec.d.min(spec.d_in), 1e3);
        let w = Matrix::from_fn(spec.d, spec.d_in, |i, j| (0..sv.len()).map(|k| u[(i, k)] * sv[k] * v[(j, k)]).sum());
        let feat = spec.d * (spec.d + 1) / 2;
        Self { w, head: Matrix::zeros(spec.classes, feat), bias: vec![0.0; spec.classes] }
    }
}

struct SampleResult {
    loss: f64,
    correct: bool,
    cond: f64,
    grad_w: Matrix,
    grad_head: Matrix,
    grad_bias: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.iter().map(|e| e / s).collect()
}

fn run_sample(model: &ToyModel, layer: &GcpLayer, input: &Matrix, label: usize) -> Result<SampleResult> {
    let x = FeatureMatrix::new(model.w.matmul(input))?;
    let (q, cache) = layer.forward(&x)?;
    let cond = condition_number(&eigh(cache.covariance())?).value;
    let v = q.upper_triangle();
    let logits: Vec<f64> = (0..model.head.rows())
        .map(|c| crate::matrix::dot(model.head.row(c), &v) + model.bias[c])
        .collect();
    let probs = softmax(&logits);
    let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
    let predicted = (0..probs.len()).fold(0, |best, c| if probs[c] > probs[best] { c } else { best });

    let mut delta = probs;
    delta[label] -= 1.0;
    let grad_head = Matrix::from_fn(model.head.rows(), v.len(), |c, k| delta[c] * v[k]);
    let mut grad_v = vec![0.0; v.len()];
    for (c, &dc) in delta.iter().enumerate() {
        for (k, g) in grad_v.iter_mut().enumerate() {
            *g += dc * model.head[(c, k)];
        }
    }
    let d = q.dim();
    let mut grad_q = Matrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            grad_q[(i, j)] = grad_v[k];
            k += 1;
        }
    }
    let grad_x = layer.backward(&cache, &grad_q)?;
    let grad_w = grad_x.matmul_t(input);
    Ok(SampleResult { loss, correct: predicted == label, cond, grad_w, grad_head, grad_bias: delta })
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub mean_cond: f64,
    pub scheme: String,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainingOutcome {
    Completed,
    Diverged { step: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<StepRecord>,
    pub outcome: TrainingOutcome,
    /// Relative difference of the two layers' outputs on the batch at the
    /// swap step, if a swap happened.
    pub swap_gap: Option<f64>,
    /// Training-set error rate of the final model (absent after divergence).
    pub final_train_error: Option<f64>,
}

impl TrainingLog {
    pub fn completed(&self) -> bool {
        self.outcome == TrainingOutcome::Completed
    }

    /// Mean batch loss over the last tenth of the logged steps.
    pub fn final_loss(&self) -> f64 {
        tail_mean(&self.records, |r| r.loss)
    }

    /// Mean logged condition number over the first tenth of the steps.
    pub fn early_mean_cond(&self) -> f64 {
        let n = (self.records.len() / 10).max(1).min(self.records.len());
        self.records[..n].iter().map(|r| r.mean_cond).sum::<f64>() / n as f64
    }

    /// Mean logged condition number over the last tenth of the steps.
    pub fn late_mean_cond(&self) -> f64 {
        tail_mean(&self.records, |r| r.mean_cond)
    }
}

fn tail_mean(records: &[StepRecord], f: impl Fn(&StepRecord) -> f64) -> f64 {
    if records.is_empty() {
        return f64::NAN;
    }
    let n = (records.len() / 10).max(1);
    records[records.len() - n..].iter().map(f).sum::<f64>() / n as f64
}

fn layer_output_gap(model: &ToyModel, a: &GcpLayer, b: &GcpLayer, inputs: &[&Matrix]) -> Result<f64> {
    let mut worst = 0.0f64;
    for input in inputs {
        let x = FeatureMatrix::new(model.w.matmul(input))?;
        let (qa, _) = a.forward(&x)?;
        let (qb, _) = b.forward(&x)?;
        worst = worst.max(qa.as_matrix().max_abs_diff(qb.as_matrix()) / qb.as_matrix().max_abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Classification error of `model` on the whole set under `layer`.
pub fn train_error(model: &ToyModel, layer: &GcpLayer, data: &Dataset) -> Result<f64> {
    let mut wrong = 0;
    for (input, &label) in data.inputs.iter().zip(&data.labels) {
        if !run_sample(model, layer, input, label)?.correct {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / data.inputs.len() as f64)
}

/// Runs SGD with momentum 0.9 on the toy task under the hybrid schedule.
/// Any numerical failure stops the run; the log up to that point is kept.
pub fn run_hybrid_training(spec: &ToyModelSpec, schedule: &HybridSchedule, data: &Dataset) -> Result<TrainingLog> {
    spec.validate()?;
    schedule.validate()?;
    if data.inputs.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let ns_layer = GcpLayer::new(GcpLayerConfig::newton_schulz(spec.ns_iterations)?)?;
    let eig_layer = GcpLayer::new(GcpLayerConfig::eig(schedule.post_switch_scheme)?)?;

    let mut model = ToyModel::init(spec);
    let mut vel_w = Matrix::zeros(model.w.rows(), model.w.cols());
    let mut vel_head = Matrix::zeros(model.head.rows(), model.head.cols());
    let mut vel_bias = vec![0.0; model.bias.len()];

    let mut rng = seeded_rng(spec.seed ^ 0x00b4_7c4e);
    let mut order: Vec<usize> = (0..data.inputs.len()).collect();
    let mut cursor = order.len();

    let mut records = Vec::with_capacity(spec.steps);
    let mut swap_gap = None;
    for step in 0..spec.steps {
        let switched = schedule.switched(step);
        let layer = if switched { &eig_layer } else { &ns_layer };
        let lr = schedule.lr_at(step);

        let mut batch = Vec::with_capacity(spec.batch_size);
        for _ in 0..spec.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        if schedule.switch_step == Some(step) {
            let inputs: Vec<&Matrix> = batch.iter().map(|&i| &data.inputs[i]).collect();
            swap_gap = Some(layer_output_gap(&model, &ns_layer, &eig_layer, &inputs)?);
        }

        let scheme = if switched { schedule.post_switch_scheme.describe() } else { format!("ns({})", spec.ns_iterations) };
        let mut g_w = Matrix::zeros(model.w.rows(), model.w.cols());
        let mut g_head = Matrix::zeros(model.head.rows(), model.head.cols());
        let mut g_bias = vec![0.0; model.bias.len()];
        let (mut loss, mut correct, mut cond) = (0.0, 0usize, 0.0);
        let mut failure = None;
        for &i in &batch {
            match run_sample(&model, layer, &data.inputs[i], data.labels[i]) {
                Ok(r) => {
                    loss += r.loss;
                    correct += r.correct as usize;
                    cond += r.cond;
                    g_w = g_w.add(&r.grad_w);
                    g_head = g_head.add(&r.grad_head);
                    g_bias.iter_mut().zip(&r.grad_bias).for_each(|(a, b)| *a += b);
                }
                Err(e) => {
                    failure = Some(format!("{e}"));
                    break;
                }
            }
        }
        let b = spec.batch_size as f64;
        if failure.is_none() && !(loss.is_finite() && g_w.is_finite() && g_head.is_finite()) {
            failure = Some(String::from("non-finite loss or gradient"));
        }
        if let Some(reason) = failure {
            return Ok(TrainingLog {
                records,
                outcome: TrainingOutcome::Diverged { step, reason },
                swap_gap,
                final_train_error: None,
            });
        }
        records.push(StepRecord { step, loss: loss / b, accuracy: correct as f64 / b, mean_cond: cond / b, scheme, lr });

        let inv_b = 1.0 / b;
        let wd = spec.weight_decay;
        vel_w = vel_w.scale(MOMENTUM).add(&g_w.scale(inv_b)).add(&model.w.scale(wd));
        vel_head = vel_head.scale(MOMENTUM).add(&g_head.scale(inv_b)).add(&model.head.scale(wd));
        for (v, g) in vel_bias.iter_mut().zip(&g_bias) {
            *v = MOMENTUM * *v + g * inv_b;
        }
        model.w = model.w.sub(&vel_w.scale(lr));
        model.head = model.head.sub(&vel_head.scale(lr));
        for (p, v) in model.bias.iter_mut().zip(&vel_bias) {
            *p -= lr * v;
        }
    }

    let final_layer = if schedule.switched(spec.steps) { &eig_layer } else { &ns_layer };
    let final_train_error = match train_error(&model, final_layer, data) {
        Ok(e) => Some(e),
        Err(e) => {
            return Ok(TrainingLog {
                records,
                outcome: TrainingOutcome::Diverged { step: spec.steps, reason: format!("{e}") },
                swap_gap,
                final_train_error: None,
            })
        }
    };
    Ok(TrainingLog { records, outcome: TrainingOutcome::Completed, swap_gap, final_train_error })
}
