use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::feedback::{EncodeFeedback, EstimateLayout, FeedbackError, ForwardModel, NetInput};
use crate::geometry::{axis_angle_to_quat, quat_angle, Quat, Vec3};
use crate::kinematics::{fk_backward, fk_energy, forward_kinematics_with, FkConvention, Skeleton};
use crate::tensornet::{MlpConfig, Network, TensorError};

use super::{random_unit_vector, MetricRow, Task, TaskKind};

pub const MAX_JOINT_ANGLE_DEG: f64 = 30.0;

/// Per-joint rotations about uniform random axes with angles uniform in
/// `[−30°, 30°]`.
pub fn sample_ik_rotations<R: Rng + ?Sized>(rng: &mut R, joints: usize) -> Vec<Quat> {
    (0..joints)
        .map(|_| {
            let axis = random_unit_vector(rng);
            let angle = rng.gen_range(-MAX_JOINT_ANGLE_DEG..=MAX_JOINT_ANGLE_DEG);
            axis_angle_to_quat(axis, angle).expect("unit axis")
        })
        .collect()
}

pub(crate) fn quats_of(x: &[f64]) -> Vec<Quat> {
    x.chunks_exact(4).map(Quat::from_slice).collect()
}

/// `(mean joint position error in cm, mean joint angular error in °)`.
pub fn ik_metrics(pred: &[Quat], gt: &[Quat], skel: &Skeleton, convention: FkConvention) -> (f64, f64) {
    let yp = forward_kinematics_with(skel, pred, convention).expect("valid prediction");
    let yg = forward_kinematics_with(skel, gt, convention).expect("valid ground truth");
    let n = skel.len() as f64;
    let pos = yp.iter().zip(&yg).map(|(a, b)| a.distance(*b)).sum::<f64>() / n;
    let ang = pred
        .iter()
        .zip(gt)
        .map(|(a, b)| quat_angle(*a, *b).expect("unit rotations"))
        .sum::<f64>()
        / n;
    (pos * 100.0, ang)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkLossWeights {
    pub position: f64,
    pub rotation: f64,
}

impl Default for IkLossWeights {
    fn default() -> Self {
        IkLossWeights {
            position: 1.0,
            rotation: 1.0,
        }
    }
}

/// `w_pos·‖FK(q) − FK(g)‖² + w_rot·Σ_n min(‖q_n − g_n‖², ‖q_n + g_n‖²)` with
/// `q` the normalized blocks of `pred_raw`, and its gradient with respect to
/// `pred_raw`.
pub fn ik_loss(
    pred_raw: &[f64],
    gt: &[f64],
    skel: &Skeleton,
    convention: FkConvention,
    weights: IkLossWeights,
) -> (f64, Vec<f64>) {
    let n = skel.len();
    assert_eq!(pred_raw.len(), 4 * n, "prediction length");
    assert_eq!(gt.len(), 4 * n, "ground truth length");
    let norms: Vec<f64> = pred_raw.chunks_exact(4).map(|c| Quat::from_slice(c).norm()).collect();
    let q: Vec<Quat> = pred_raw
        .chunks_exact(4)
        .zip(&norms)
        .map(|(c, &len)| {
            if len > 0.0 {
                Quat::new(c[0] / len, c[1] / len, c[2] / len, c[3] / len)
            } else {
                Quat::IDENTITY
            }
        })
        .collect();
    let g = quats_of(gt);

    let yp = forward_kinematics_with(skel, &q, convention).expect("normalized rotations");
    let yg = forward_kinematics_with(skel, &g, convention).expect("unit ground truth");
    let mut loss = 0.0;
    let mut dy = Vec::with_capacity(n);
    for (a, b) in yp.iter().zip(&yg) {
        let d = *a - *b;
        loss += weights.position * d.norm_squared();
        dy.push(d.scale(2.0 * weights.position));
    }
    let mut gq = fk_backward(skel, &q, &dy, convention).expect("matching lengths");
    for j in 0..n {
        let s = if q[j].dot(g[j]) >= 0.0 { 1.0 } else { -1.0 };
        let diff = [q[j].w - s * g[j].w, q[j].x - s * g[j].x, q[j].y - s * g[j].y, q[j].z - s * g[j].z];
        loss += weights.rotation * diff.iter().map(|v| v * v).sum::<f64>();
        for c in 0..4 {
            gq[j][c] += 2.0 * weights.rotation * diff[c];
        }
    }
    // through q = p / ‖p‖: dL/dp = (g − q (q·g)) / ‖p‖
    let mut grad = vec![0.0; 4 * n];
    for j in 0..n {
        if norms[j] == 0.0 {
            continue;
        }
        let qa = q[j].to_array();
        let dot: f64 = (0..4).map(|c| qa[c] * gq[j][c]).sum();
        for c in 0..4 {
            grad[4 * j + c] = (gq[j][c] - qa[c] * dot) / norms[j];
        }
    }
    (loss, grad)
}

/// Forward kinematics as a forward model; the estimate is one quaternion per
/// joint and the observation the joint positions.
#[derive(Debug, Clone)]
pub struct IkModel {
    pub skeleton: Skeleton,
    pub convention: FkConvention,
    layout: EstimateLayout,
}

impl IkModel {
    pub fn new(skeleton: Skeleton, convention: FkConvention) -> Self {
        let layout = EstimateLayout::quats(skeleton.len());
        IkModel {
            skeleton,
            convention,
            layout,
        }
    }
}

impl ForwardModel for IkModel {
    type Obs = Vec<Vec3>;

    fn layout(&self) -> &EstimateLayout {
        &self.layout
    }

    fn simulate(&self, x: &[f64]) -> Vec<Vec3> {
        forward_kinematics_with(&self.skeleton, &quats_of(x), self.convention).expect("projected rotations are unit")
    }

    fn data_energy(&self, sim: &Vec<Vec3>, obs: &Vec<Vec3>) -> f64 {
        fk_energy(sim, obs).unwrap_or(f64::NAN)
    }
}

impl EncodeFeedback for IkModel {
    /// `[y, y^t, y − y^t]` flattened, with the rotations as auxiliary input.
    fn encode(&self, x: &[f64], y_t: &Vec<Vec3>, y: &Vec<Vec3>) -> Result<NetInput, FeedbackError> {
        let n = self.skeleton.len();
        if y.len() != n || y_t.len() != n || x.len() != 4 * n {
            return Err(FeedbackError::Encode(format!(
                "skeleton has {n} joints, got {} targets, {} simulated, {} rotation values",
                y.len(),
                y_t.len(),
                x.len()
            )));
        }
        let mut data = Vec::with_capacity(9 * n);
        data.extend(y.iter().flat_map(|p| p.to_array()).map(|v| v as f32));
        data.extend(y_t.iter().flat_map(|p| p.to_array()).map(|v| v as f32));
        data.extend(y.iter().zip(y_t).flat_map(|(a, b)| (*a - *b).to_array()).map(|v| v as f32));
        Ok(NetInput {
            shape: vec![9 * n],
            data,
            aux: x.iter().map(|&v| v as f32).collect(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct IkTask {
    pub weights: IkLossWeights,
    model: IkModel,
}

impl IkTask {
    pub fn new(skeleton: Skeleton, convention: FkConvention) -> Self {
        IkTask {
            weights: IkLossWeights::default(),
            model: IkModel::new(skeleton, convention),
        }
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.model.skeleton
    }

    pub fn convention(&self) -> FkConvention {
        self.model.convention
    }
}

impl Task for IkTask {
    type Model = IkModel;

    fn kind(&self) -> TaskKind {
        TaskKind::Ik
    }

    fn model(&self, _: usize) -> &IkModel {
        &self.model
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (usize, Vec<f64>) {
        let q = sample_ik_rotations(rng, self.model.skeleton.len());
        (0, q.iter().flat_map(|q| q.to_array()).collect())
    }

    fn initial_estimate(&self) -> Vec<f64> {
        (0..self.model.skeleton.len()).flat_map(|_| Quat::IDENTITY.to_array()).collect()
    }

    fn network(&self) -> Result<Network<f32>, TensorError> {
        let n = self.model.skeleton.len();
        MlpConfig::new(9 * n, 4 * n, 4 * n).build()
    }

    fn loss(&self, _: usize, pred_raw: &[f64], gt: &[f64]) -> (f64, Vec<f64>) {
        ik_loss(pred_raw, gt, &self.model.skeleton, self.model.convention, self.weights)
    }

    fn metric_names(&self) -> &'static [&'static str] {
        &["pos_err_cm", "ang_err_deg"]
    }

    fn metrics(&self, _: usize, pred: &[f64], gt: &[f64]) -> MetricRow {
        let (p, a) = ik_metrics(&quats_of(pred), &quats_of(gt), &self.model.skeleton, self.model.convention);
        MetricRow {
            values: vec![p, a],
            outlier: None,
        }
    }

    fn primary_metric(&self) -> usize {
        1
    }
}
