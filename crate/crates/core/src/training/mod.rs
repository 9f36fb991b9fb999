//! Stage-wise training of update networks: stage `t` learns from estimates
//! produced by the frozen stages before it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::feedback::{EncodeFeedback, FeedbackError, ForwardModel, StageNetworks};
use crate::tasks::{ObsOf, Sample, Split, Task, TaskKind};
use crate::tensornet::{read_weights_file, write_weights_file, AdamConfig, AdamState, Gradients, Network, Tape, TensorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainingError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("no training samples")]
    EmptyTrainSet,
    #[error("non-finite loss at stage {stage}, epoch {epoch}")]
    NonFiniteLoss { stage: usize, epoch: usize },
    #[error("stage {stage} weights changed while training a later stage")]
    FrozenStageModified { stage: usize },
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("io: {0}")]
    Io(String),
}

/// Hyper-parameters of stage-wise training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StagePlan {
    pub stages: usize,
    pub epochs: usize,
    /// Stop a stage after this many epochs without a new best validation loss.
    pub patience: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Learning rate multiplier applied after every epoch.
    pub lr_decay: f64,
    pub seed: u64,
}

impl StagePlan {
    pub fn new(stages: usize, seed: u64) -> Self {
        StagePlan {
            stages,
            epochs: 50,
            patience: 10,
            batch_size: 32,
            lr: 1e-3,
            lr_decay: 0.95,
            seed,
        }
    }

    pub fn for_task(kind: TaskKind, seed: u64) -> Self {
        Self::new(kind.default_stages(), seed)
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: &str| Err(TrainingError::InvalidPlan(m.to_string()));
        if self.stages == 0 {
            return bad("stages must be at least 1");
        }
        if self.epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return bad("epochs, patience and batch size must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr must be positive and lr_decay in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub stage: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Training log as CSV with header `epoch,stage,train_loss,val_loss`.
pub fn log_csv(logs: &[EpochLog]) -> String {
    let mut s = String::from("epoch,stage,train_loss,val_loss\n");
    for l in logs {
        let _ = writeln!(s, "{},{},{:.6e},{:.6e}", l.epoch, l.stage, l.train_loss, l.val_loss);
    }
    s
}

/// One sample as seen by stage `t`: its current estimate and simulation.
#[derive(Debug, Clone)]
pub struct StageSample<O> {
    pub variant: usize,
    pub x: Vec<f64>,
    pub y_t: O,
    pub y: O,
    pub x_gt: Vec<f64>,
}

/// `(x⁰, f(x⁰), y, x_gt)` for every sample.
pub fn initial_stage_data<T: Task>(task: &T, samples: &[&Sample<ObsOf<T>>]) -> Vec<StageSample<ObsOf<T>>> {
    let x0 = task.initial_estimate();
    samples
        .par_iter()
        .map(|s| StageSample {
            variant: s.variant,
            x: x0.clone(),
            y_t: task.model(s.variant).simulate(&x0),
            y: s.y.clone(),
            x_gt: s.x_gt.clone(),
        })
        .collect()
}

/// Raw network update `g(x, y_t, y)` in f64.
pub fn predict_update<M: EncodeFeedback + ?Sized>(
    net: &Network<f32>,
    model: &M,
    x: &[f64],
    y_t: &M::Obs,
    y: &M::Obs,
) -> Result<Vec<f64>, TrainingError> {
    let input = model.encode(x, y_t, y)?;
    let mut tape = Tape::new();
    let aux = (!input.aux.is_empty()).then_some(input.aux.as_slice());
    let out = net.forward_slice(&mut tape, &input.data, aux)?;
    Ok(out.iter().map(|&v| v as f64).collect())
}

/// Advances every sample by one undamped step of `net`:
/// `x ← project(x + g)`, `y_t ← f(x)`.
pub fn roll_forward<T: Task>(
    task: &T,
    net: &Network<f32>,
    data: &[StageSample<ObsOf<T>>],
) -> Result<Vec<StageSample<ObsOf<T>>>, TrainingError> {
    data.par_iter()
        .map(|s| {
            let model = task.model(s.variant);
            let delta = predict_update(net, model, &s.x, &s.y_t, &s.y)?;
            let mut x: Vec<f64> = s.x.iter().zip(&delta).map(|(a, d)| a + d).collect();
            model.project(&mut x);
            let y_t = model.simulate(&x);
            Ok(StageSample {
                variant: s.variant,
                x,
                y_t,
                y: s.y.clone(),
                x_gt: s.x_gt.clone(),
            })
        })
        .collect()
}

/// Mean of the task's primary metric over the current estimates.
pub fn mean_primary_error<T: Task>(task: &T, data: &[StageSample<ObsOf<T>>]) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let k = task.primary_metric();
    let errs: Vec<f64> = data
        .par_iter()
        .map(|s| task.metrics(s.variant, &s.x, &s.x_gt).values[k])
        .collect();
    errs.iter().sum::<f64>() / errs.len() as f64
}

/// Samples per gradient chunk. Chunks are summed in a fixed order so the
/// result does not depend on the thread count.
const GRAD_CHUNK: usize = 4;

/// Loss of `x + g(x)` against the ground truth, and its gradient with
/// respect to the network parameters accumulated into `grads`.
fn sample_loss_grad<T: Task>(
    task: &T,
    net: &Network<f32>,
    s: &StageSample<ObsOf<T>>,
    scale: f64,
    tape: &mut Tape<f32>,
    grads: Option<&mut Gradients<f32>>,
) -> Result<f64, TrainingError> {
    let model = task.model(s.variant);
    let input = model.encode(&s.x, &s.y_t, &s.y)?;
    let aux = (!input.aux.is_empty()).then_some(input.aux.as_slice());
    let out = net.forward_slice(tape, &input.data, aux)?;
    let pred: Vec<f64> = s.x.iter().zip(out).map(|(a, &d)| a + d as f64).collect();
    let (loss, g) = task.loss(s.variant, &pred, &s.x_gt);
    if let Some(grads) = grads {
        let upstream: Vec<f32> = g.iter().map(|v| (v * scale) as f32).collect();
        net.backward(tape, &upstream, grads)?;
    }
    Ok(loss)
}

/// Mean loss over `data`, `None` when empty.
pub fn mean_loss<T: Task>(task: &T, net: &Network<f32>, data: &[StageSample<ObsOf<T>>]) -> Result<Option<f64>, TrainingError> {
    if data.is_empty() {
        return Ok(None);
    }
    let losses = data
        .par_iter()
        .map_init(Tape::new, |tape, s| sample_loss_grad(task, net, s, 1.0, tape, None))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(Some(losses.iter().sum::<f64>() / losses.len() as f64))
}

/// One Adam step on the mean loss of `batch`. Returns the batch mean loss.
fn train_batch<T: Task>(
    task: &T,
    net: &mut Network<f32>,
    adam: &mut AdamState<f32>,
    batch: &[&StageSample<ObsOf<T>>],
) -> Result<f64, TrainingError> {
    let scale = 1.0 / batch.len() as f64;
    let net_ref = &*net;
    let partials = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = net_ref.zero_grads();
            let mut tape = Tape::new();
            let mut loss = 0.0;
            for s in chunk {
                loss += sample_loss_grad(task, net_ref, s, scale, &mut tape, Some(&mut grads))?;
            }
            Ok((loss, grads))
        })
        .collect::<Result<Vec<_>, TrainingError>>()?;
    let mut total = net.zero_grads();
    let mut loss = 0.0;
    for (l, g) in partials {
        loss += l;
        for (t, p) in total.iter_mut().zip(&g) {
            t.data_mut().iter_mut().zip(p.data()).for_each(|(a, b)| *a += *b);
        }
    }
    loss *= scale;
    if !loss.is_finite() {
        return Err(TrainingError::NonFiniteLoss { stage: 0, epoch: 0 });
    }
    adam.step(net.params_mut(), &total)?;
    Ok(loss)
}

fn stage_rng(seed: u64, stage: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    rng
}

fn fresh_network<T: Task>(task: &T, rng: &mut ChaCha8Rng) -> Result<Network<f32>, TrainingError> {
    let mut net = task.network()?;
    net.init_uniform(rng, true);
    Ok(net)
}

/// Outcome of fitting one network: the best-validation weights.
struct Fit {
    net: Network<f32>,
    best_epoch: usize,
    logs: Vec<EpochLog>,
}

/// Trains `net` for up to `plan.epochs` epochs. `epoch_data` supplies the
/// (train, val) sets of each epoch, which lets the shared variant
/// regenerate them from the current weights.
fn fit<T, F>(
    task: &T,
    mut net: Network<f32>,
    rng: &mut ChaCha8Rng,
    plan: &StagePlan,
    stage: usize,
    mut epoch_data: F,
) -> Result<Fit, TrainingError>
where
    T: Task,
    F: FnMut(&Network<f32>) -> Result<(Vec<StageSample<ObsOf<T>>>, Vec<StageSample<ObsOf<T>>>), TrainingError>,
{
    let mut adam = AdamState::new(
        net.params(),
        AdamConfig {
            lr: plan.lr,
            ..AdamConfig::default()
        },
    );
    let mut best: Option<(f64, Network<f32>, usize)> = None;
    let mut logs = Vec::new();
    let mut stale = 0;
    for epoch in 0..plan.epochs {
        let (train, val) = epoch_data(&net)?;
        if train.is_empty() {
            return Err(TrainingError::EmptyTrainSet);
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(rng);
        let mut sum = 0.0;
        for idx in order.chunks(plan.batch_size) {
            let batch: Vec<&StageSample<_>> = idx.iter().map(|&i| &train[i]).collect();
            let l = train_batch(task, &mut net, &mut adam, &batch).map_err(|e| match e {
                TrainingError::NonFiniteLoss { .. } | TrainingError::Tensor(TensorError::NonFinite { .. }) => {
                    TrainingError::NonFiniteLoss { stage, epoch }
                }
                other => other,
            })?;
            sum += l * batch.len() as f64;
        }
        let train_loss = sum / train.len() as f64;
        // Selection falls back to the training set when there is no
        // validation split.
        let val_loss = match mean_loss(task, &net, &val)? {
            Some(v) => v,
            None => mean_loss(task, &net, &train)?.unwrap_or(train_loss),
        };
        if !val_loss.is_finite() || !train_loss.is_finite() {
            return Err(TrainingError::NonFiniteLoss { stage, epoch });
        }
        logs.push(EpochLog {
            stage,
            epoch,
            train_loss,
            val_loss,
        });
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, net.clone(), epoch));
            stale = 0;
        } else {
            stale += 1;
            if stale >= plan.patience {
                break;
            }
        }
        adam.config.lr *= plan.lr_decay;
    }
    let (_, net, best_epoch) = best.expect("at least one epoch");
    Ok(Fit { net, best_epoch, logs })
}

/// Per-stage networks and their training record.
#[derive(Debug, Clone)]
pub struct TrainedStages {
    pub networks: Vec<Network<f32>>,
    pub logs: Vec<EpochLog>,
    pub best_epochs: Vec<usize>,
    /// Mean primary metric of the training estimates `x^t`, `t = 0..=T`.
    pub train_error: Vec<f64>,
    pub checksums: Vec<u64>,
}

impl TrainedStages {
    pub fn stage_networks(&self) -> StageNetworks {
        StageNetworks::per_stage(self.networks.clone())
    }
}

fn split_refs<O>(samples: &[Sample<O>], split: Split) -> Vec<&Sample<O>> {
    samples.iter().filter(|s| s.split == split).collect()
}

/// Trains one network per stage. Stage `t` sees the estimates produced by
/// rolling every train and validation sample through the frozen stages
/// `0..t` once, without damping. Each stage keeps its best-validation epoch.
pub fn train_stagewise<T: Task>(task: &T, samples: &[Sample<ObsOf<T>>], plan: &StagePlan) -> Result<TrainedStages, TrainingError> {
    plan.validate()?;
    let train_refs = split_refs(samples, Split::Train);
    if train_refs.is_empty() {
        return Err(TrainingError::EmptyTrainSet);
    }
    let mut train = initial_stage_data(task, &train_refs);
    let mut val = initial_stage_data(task, &split_refs(samples, Split::Val));
    let mut out = TrainedStages {
        networks: Vec::with_capacity(plan.stages),
        logs: Vec::new(),
        best_epochs: Vec::new(),
        train_error: vec![mean_primary_error(task, &train)],
        checksums: Vec::new(),
    };
    for stage in 0..plan.stages {
        let mut rng = stage_rng(plan.seed, stage);
        let net = fresh_network(task, &mut rng)?;
        let f = fit(task, net, &mut rng, plan, stage, |_| Ok((train.clone(), val.clone())))?;
        for (t, (net, sum)) in out.networks.iter().zip(&out.checksums).enumerate() {
            if net.checksum() != *sum {
                return Err(TrainingError::FrozenStageModified { stage: t });
            }
        }
        train = roll_forward(task, &f.net, &train)?;
        val = roll_forward(task, &f.net, &val)?;
        out.train_error.push(mean_primary_error(task, &train));
        out.checksums.push(f.net.checksum());
        out.logs.extend(f.logs);
        out.best_epochs.push(f.best_epoch);
        out.networks.push(f.net);
    }
    Ok(out)
}

/// One network applied at every stage. Every epoch regenerates the union of
/// the stage datasets `t = 0..T` by rolling the samples through the current
/// weights.
pub fn train_shared<T: Task>(task: &T, samples: &[Sample<ObsOf<T>>], plan: &StagePlan) -> Result<(Network<f32>, Vec<EpochLog>), TrainingError> {
    plan.validate()?;
    let train_refs = split_refs(samples, Split::Train);
    if train_refs.is_empty() {
        return Err(TrainingError::EmptyTrainSet);
    }
    let train0 = initial_stage_data(task, &train_refs);
    let val0 = initial_stage_data(task, &split_refs(samples, Split::Val));
    let unroll = |net: &Network<f32>, start: &[StageSample<ObsOf<T>>]| -> Result<Vec<StageSample<ObsOf<T>>>, TrainingError> {
        let mut all = start.to_vec();
        let mut cur = start.to_vec();
        for _ in 1..plan.stages {
            cur = roll_forward(task, net, &cur)?;
            all.extend(cur.iter().cloned());
        }
        Ok(all)
    };
    let mut rng = stage_rng(plan.seed, 0);
    let net = fresh_network(task, &mut rng)?;
    let f = fit(task, net, &mut rng, plan, 0, |net| Ok((unroll(net, &train0)?, unroll(net, &val0)?)))?;
    Ok((f.net, f.logs))
}

/// Single-shot regressor: the stage-0 network of a one-stage plan, mapping
/// the observation (with the fixed initial simulation) straight to an
/// estimate.
pub fn regression_baseline<T: Task>(task: &T, samples: &[Sample<ObsOf<T>>], plan: &StagePlan) -> Result<Network<f32>, TrainingError> {
    let plan = StagePlan { stages: 1, ..*plan };
    Ok(train_stagewise(task, samples, &plan)?.networks.remove(0))
}

pub fn stage_weights_path(dir: &Path, stage: usize) -> PathBuf {
    dir.join(format!("stage{stage}.dfnw"))
}

/// Writes `stage{t}.dfnw` for every network.
pub fn save_stage_networks(dir: &Path, nets: &[Network<f32>]) -> Result<(), TrainingError> {
    std::fs::create_dir_all(dir).map_err(|e| TrainingError::Io(format!("{}: {e}", dir.display())))?;
    for (t, net) in nets.iter().enumerate() {
        write_weights_file(net, &stage_weights_path(dir, t))?;
    }
    Ok(())
}

/// Reads `stage0.dfnw`, `stage1.dfnw`, … until the first missing file.
pub fn load_stage_networks(dir: &Path, template: &Network<f32>) -> Result<Vec<Network<f32>>, TrainingError> {
    let mut nets = Vec::new();
    loop {
        let path = stage_weights_path(dir, nets.len());
        if !path.exists() {
            break;
        }
        nets.push(read_weights_file(template, &path)?);
    }
    if nets.is_empty() {
        return Err(TrainingError::Io(format!("no stage0.dfnw in {}", dir.display())));
    }
    Ok(nets)
}
