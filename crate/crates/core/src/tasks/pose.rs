use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::feedback::{EncodeFeedback, EstimateLayout, FeedbackError, ForwardModel, NetInput};
use crate::geometry::{axis_angle_to_quat, quat_angle, Pose6DoF, Quat, Vec3};
use crate::render::{make_primitive, rasterize, silhouette_energy, Camera, Image, Primitive, RenderMode, TriangleMesh};
use crate::tensornet::{mse_loss, ConvNetConfig, Network, TensorError};

use super::{random_unit_vector, MetricRow, Task, TaskError, TaskKind};

/// Where objects sit in front of the camera; pose translations are offsets
/// from here.
pub const DEFAULT_ANCHOR: Vec3 = Vec3::new(0.0, 0.0, -1.5);

pub const MAX_ANGLE_DEG: f64 = 40.0;
pub const MAX_OFFSET: f64 = 0.2;
pub const OUTLIER_TRANS: f64 = 0.2;
pub const OUTLIER_ROT_DEG: f64 = 30.0;

/// Rotation about a uniformly random axis by an angle uniform in
/// `[−40°, 40°]`, and a translation offset uniform in `[−0.2, 0.2]³` m.
pub fn sample_pose<R: Rng + ?Sized>(rng: &mut R) -> Pose6DoF {
    let axis = random_unit_vector(rng);
    let angle = rng.gen_range(-MAX_ANGLE_DEG..=MAX_ANGLE_DEG);
    let rotation = axis_angle_to_quat(axis, angle).expect("unit axis");
    let t = Vec3::new(
        rng.gen_range(-MAX_OFFSET..=MAX_OFFSET),
        rng.gen_range(-MAX_OFFSET..=MAX_OFFSET),
        rng.gen_range(-MAX_OFFSET..=MAX_OFFSET),
    );
    Pose6DoF::new(rotation, t)
}

/// `(translation error m, rotation error °, outlier)`.
pub fn pose_metrics(pred: &Pose6DoF, gt: &Pose6DoF) -> (f64, f64, bool) {
    let trans = pred.translation.distance(gt.translation);
    let rot = quat_angle(pred.rotation, gt.rotation).unwrap_or(180.0);
    (trans, rot, trans > OUTLIER_TRANS || rot > OUTLIER_ROT_DEG)
}

/// Silhouette renderer of one mesh. The estimate is
/// `[qw, qx, qy, qz, tx, ty, tz]` with `t` relative to the anchor.
#[derive(Debug, Clone)]
pub struct PoseModel {
    pub mesh: TriangleMesh,
    pub camera: Camera,
    pub anchor: Vec3,
    layout: EstimateLayout,
}

impl PoseModel {
    pub fn new(mesh: TriangleMesh, camera: Camera, anchor: Vec3) -> Self {
        PoseModel {
            mesh,
            camera,
            anchor,
            layout: EstimateLayout::pose(),
        }
    }

    /// Camera-space pose of an estimate.
    pub fn world_pose(&self, x: &[f64]) -> Pose6DoF {
        let p = Pose6DoF::from_slice(x);
        Pose6DoF::new(p.rotation, p.translation + self.anchor)
    }
}

impl ForwardModel for PoseModel {
    type Obs = Image;

    fn layout(&self) -> &EstimateLayout {
        &self.layout
    }

    fn simulate(&self, x: &[f64]) -> Image {
        rasterize(&self.mesh, &self.world_pose(x), &self.camera, &RenderMode::Silhouette)
    }

    fn data_energy(&self, sim: &Image, obs: &Image) -> f64 {
        silhouette_energy(sim, obs).unwrap_or(f64::NAN)
    }
}

/// Planar stack of `[y, y^t, y − y^t]` for every channel of `y`.
pub(crate) fn image_stack(y_t: &Image, y: &Image) -> Result<(Vec<usize>, Vec<f32>), FeedbackError> {
    if (y.width, y.height, y.channels) != (y_t.width, y_t.height, y_t.channels) {
        return Err(FeedbackError::Encode(format!(
            "observation is {}×{}×{}, simulation {}×{}×{}",
            y.width, y.height, y.channels, y_t.width, y_t.height, y_t.channels
        )));
    }
    let a = y.to_planar();
    let b = y_t.to_planar();
    let mut data = Vec::with_capacity(3 * a.len());
    data.extend_from_slice(&a);
    data.extend_from_slice(&b);
    data.extend(a.iter().zip(&b).map(|(p, q)| p - q));
    Ok((vec![3 * y.channels, y.height, y.width], data))
}

impl EncodeFeedback for PoseModel {
    fn encode(&self, x: &[f64], y_t: &Image, y: &Image) -> Result<NetInput, FeedbackError> {
        if (y.width, y.height) != (self.camera.width, self.camera.height) {
            return Err(FeedbackError::Encode(format!(
                "observation is {}×{}, camera renders {}×{}",
                y.width, y.height, self.camera.width, self.camera.height
            )));
        }
        let (shape, data) = image_stack(y_t, y)?;
        Ok(NetInput {
            shape,
            data,
            aux: x.iter().map(|&v| v as f32).collect(),
        })
    }
}

/// Pose estimation over a set of primitive shapes; the variant of a sample
/// is its shape.
#[derive(Debug, Clone)]
pub struct PoseTask {
    pub shapes: Vec<Primitive>,
    pub size: f64,
    models: Vec<PoseModel>,
}

impl PoseTask {
    pub fn new(shapes: Vec<Primitive>, size: f64, resolution: usize) -> Result<Self, TaskError> {
        if shapes.is_empty() {
            return Err(TaskError::Invalid("pose task needs at least one shape".into()));
        }
        let camera = Camera::with_resolution(resolution, resolution)?;
        let models = shapes
            .iter()
            .map(|&s| Ok(PoseModel::new(make_primitive(s, size)?, camera, DEFAULT_ANCHOR)))
            .collect::<Result<Vec<_>, TaskError>>()?;
        Ok(PoseTask { shapes, size, models })
    }

    /// Cube, icosphere and cylinder of 0.5 m.
    pub fn standard(resolution: usize) -> Result<Self, TaskError> {
        PoseTask::new(
            vec![
                Primitive::Cube,
                Primitive::Icosphere { subdivisions: 2 },
                Primitive::Cylinder { segments: 16 },
            ],
            0.5,
            resolution,
        )
    }

    /// Single-mesh task around an arbitrary mesh.
    pub fn from_mesh(mesh: TriangleMesh, resolution: usize) -> Result<Self, TaskError> {
        let camera = Camera::with_resolution(resolution, resolution)?;
        Ok(PoseTask {
            shapes: Vec::new(),
            size: 0.0,
            models: vec![PoseModel::new(mesh, camera, DEFAULT_ANCHOR)],
        })
    }

    pub fn resolution(&self) -> usize {
        self.models[0].camera.width
    }
}

impl Task for PoseTask {
    type Model = PoseModel;

    fn kind(&self) -> TaskKind {
        TaskKind::Pose
    }

    fn variant_count(&self) -> usize {
        self.models.len()
    }

    fn model(&self, variant: usize) -> &PoseModel {
        &self.models[variant]
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (usize, Vec<f64>) {
        let variant = rng.gen_range(0..self.models.len());
        (variant, sample_pose(rng).to_vec())
    }

    fn initial_estimate(&self) -> Vec<f64> {
        Pose6DoF::new(Quat::IDENTITY, Vec3::ZERO).to_vec()
    }

    fn network(&self) -> Result<Network<f32>, TensorError> {
        let r = self.resolution();
        ConvNetConfig::new(3, r, r, 7, 7).build()
    }

    fn loss(&self, _: usize, pred_raw: &[f64], gt: &[f64]) -> (f64, Vec<f64>) {
        mse_loss(pred_raw, gt).expect("matching lengths")
    }

    fn metric_names(&self) -> &'static [&'static str] {
        &["trans_err_m", "rot_err_deg"]
    }

    fn metrics(&self, _: usize, pred: &[f64], gt: &[f64]) -> MetricRow {
        let (t, r, out) = pose_metrics(&Pose6DoF::from_slice(pred), &Pose6DoF::from_slice(gt));
        MetricRow {
            values: vec![t, r],
            outlier: Some(out),
        }
    }

    fn primary_metric(&self) -> usize {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn samples_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let p = sample_pose(&mut rng);
            assert!(quat_angle(p.rotation, Quat::IDENTITY).unwrap() <= 40.0 + 1e-9);
            for c in p.translation.to_array() {
                assert!(c.abs() <= 0.2);
            }
        }
    }

    #[test]
    fn metric_examples() {
        let id = Pose6DoF::new(Quat::IDENTITY, Vec3::ZERO);
        assert_eq!(pose_metrics(&id, &id), (0.0, 0.0, false));
        let rot = |deg: f64, t: f64| Pose6DoF::new(axis_angle_to_quat(Vec3::Z, deg).unwrap(), Vec3::new(t, 0.0, 0.0));
        assert!(pose_metrics(&rot(5.0, 0.3), &id).2);
        assert!(pose_metrics(&rot(31.0, 0.1), &id).2);
        assert!(!pose_metrics(&rot(29.0, 0.1), &id).2);
    }

    #[test]
    fn identity_estimate_matches_identity_ground_truth() {
        let task = PoseTask::standard(32).unwrap();
        let x0 = task.initial_estimate();
        for v in 0..task.variant_count() {
            let m = task.model(v);
            let y = m.simulate(&x0);
            assert!(y.coverage() > 0);
            assert_eq!(m.data_energy(&m.simulate(&x0), &y), 0.0);
        }
    }

    #[test]
    fn encoding_shapes() {
        let task = PoseTask::standard(64).unwrap();
        let m = task.model(0);
        let x = task.initial_estimate();
        let y = m.simulate(&x);
        let input = m.encode(&x, &y, &y).unwrap();
        assert_eq!(input.shape, vec![3, 64, 64]);
        assert_eq!(input.aux.len(), 7);
        assert!(input.data[2 * 64 * 64..].iter().all(|&v| v == 0.0));
        let small = Image::new(32, 32, 1);
        assert!(m.encode(&x, &small, &small).is_err());
    }
}
