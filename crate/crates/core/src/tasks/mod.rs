//! The three inverse problems: object pose from a silhouette, lighting from a
//! shaded image, and joint rotations from joint positions.

mod ik;
mod light;
mod manifest;
mod pose;

pub use ik::{ik_loss, ik_metrics, sample_ik_rotations, IkModel, IkTask, IkLossWeights};
pub use light::{light_metrics, sample_light, LightKind, LightModel, LightTask, DEFAULT_LIGHT_OUTLIER};
pub use manifest::{load_dataset, parse_positions, save_dataset, Dataset, ObsFile, Record, TaskSpec, MANIFEST};
pub use pose::{pose_metrics, sample_pose, PoseModel, PoseTask, DEFAULT_ANCHOR};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::feedback::{EncodeFeedback, ForwardModel};
use crate::tensornet::{Network, TensorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("dataset needs at least 10 samples, got {0}")]
    TooFewSamples(usize),
    #[error("unknown task '{0}'")]
    UnknownTask(String),
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Render(#[from] crate::render::RenderError),
    #[error(transparent)]
    Kinematics(#[from] crate::kinematics::KinematicsError),
    #[error("invalid task parameter: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Pose,
    Light,
    Ik,
}

impl TaskKind {
    pub fn parse(s: &str) -> Result<Self, TaskError> {
        match s {
            "pose" => Ok(TaskKind::Pose),
            "light" => Ok(TaskKind::Light),
            "ik" => Ok(TaskKind::Ik),
            _ => Err(TaskError::UnknownTask(s.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Pose => "pose",
            TaskKind::Light => "light",
            TaskKind::Ik => "ik",
        }
    }

    /// Unrolled stage count used when none is given.
    pub fn default_stages(self) -> usize {
        match self {
            TaskKind::Pose => 5,
            TaskKind::Light => 7,
            TaskKind::Ik => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Split sizes for `count` samples: 10% validation and 20% test, rounded
/// down, the rest training.
pub fn split_sizes(count: usize) -> (usize, usize, usize) {
    let val = count / 10;
    let test = count / 5;
    (count - val - test, val, test)
}

/// Ground truth with its simulated observation.
#[derive(Debug, Clone)]
pub struct Sample<O> {
    pub index: usize,
    pub split: Split,
    /// Which forward model of the task produced `y` (e.g. the object shape).
    pub variant: usize,
    pub x_gt: Vec<f64>,
    pub y: O,
}

/// Per-sample evaluation: task metrics in [`Task::metric_names`] order and an
/// outlier flag where the task defines one.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub values: Vec<f64>,
    pub outlier: Option<bool>,
}

/// A family of forward models plus everything needed to learn and evaluate
/// an update network for them.
pub trait Task: Sync {
    type Model: EncodeFeedback;

    fn kind(&self) -> TaskKind;

    fn variant_count(&self) -> usize {
        1
    }

    fn model(&self, variant: usize) -> &Self::Model;

    /// Draws `(variant, x_gt)`.
    fn sample(&self, rng: &mut ChaCha8Rng) -> (usize, Vec<f64>);

    /// The fixed starting estimate `x^0`.
    fn initial_estimate(&self) -> Vec<f64>;

    /// Fresh, zero-initialized update network.
    fn network(&self) -> Result<Network<f32>, TensorError>;

    /// Training loss of a raw (unprojected) prediction and its gradient.
    fn loss(&self, variant: usize, pred_raw: &[f64], gt: &[f64]) -> (f64, Vec<f64>);

    fn metric_names(&self) -> &'static [&'static str];

    fn metrics(&self, variant: usize, pred: &[f64], gt: &[f64]) -> MetricRow;

    /// Index into the metric row of the rotation-like error used for
    /// summaries.
    fn primary_metric(&self) -> usize {
        0
    }
}

/// Shortcut for the observation type of a task.
pub type ObsOf<T> = <<T as Task>::Model as ForwardModel>::Obs;

/// Deterministic dataset: sample `i` draws from its own stream of a
/// ChaCha8 generator seeded with `seed`, so samples are independent of
/// scheduling.
pub fn generate_dataset<T: Task>(task: &T, count: usize, seed: u64) -> Result<Vec<Sample<ObsOf<T>>>, TaskError> {
    if count < 10 {
        return Err(TaskError::TooFewSamples(count));
    }
    let (train, val, _) = split_sizes(count);
    Ok((0..count)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let (variant, x_gt) = task.sample(&mut rng);
            let y = task.model(variant).simulate(&x_gt);
            let split = if index < train {
                Split::Train
            } else if index < train + val {
                Split::Val
            } else {
                Split::Test
            };
            Sample {
                index,
                split,
                variant,
                x_gt,
                y,
            }
        })
        .collect())
}

/// Re-simulates `x_gt` for every sample and rebuilds the observations.
pub fn rebuild_samples<T: Task>(task: &T, records: Vec<Record>) -> Vec<Sample<ObsOf<T>>> {
    records
        .into_par_iter()
        .map(|Record { index, split, variant, x_gt }| {
            let y = task.model(variant).simulate(&x_gt);
            Sample {
                index,
                split,
                variant,
                x_gt,
                y,
            }
        })
        .collect()
}

pub(crate) fn random_unit_vector<R: rand::Rng + ?Sized>(rng: &mut R) -> crate::geometry::Vec3 {
    use crate::geometry::Vec3;
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n2 = v.norm_squared();
        if n2 > 1e-6 && n2 <= 1.0 {
            return v.scale(1.0 / n2.sqrt());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_examples() {
        assert_eq!(split_sizes(100), (70, 10, 20));
        assert_eq!(split_sizes(2000), (1400, 200, 400));
        assert_eq!(split_sizes(19), (15, 1, 3));
    }
}
