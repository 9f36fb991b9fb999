use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::feedback::{EncodeFeedback, EstimateLayout, FeedbackError, ForwardModel, NetInput, Segment};
use crate::geometry::{axis_angle_to_quat, Pose6DoF, Vec3};
use crate::render::{
    make_primitive, mean_squared_difference, rasterize, Camera, Image, Light, Primitive, RenderMode, TriangleMesh,
};
use crate::tensornet::{mse_loss, ConvNetConfig, Network, TensorError};

use super::pose::{image_stack, DEFAULT_ANCHOR};
use super::{random_unit_vector, MetricRow, Task, TaskError, TaskKind};

pub const DEFAULT_LIGHT_OUTLIER: f64 = 0.5;
pub const DEFAULT_ALBEDO: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LightKind {
    /// Estimate is the unit travel direction of the light.
    Directional,
    /// Estimate is the light position relative to the object anchor.
    Point,
}

impl LightKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "directional" => Some(LightKind::Directional),
            "point" => Some(LightKind::Point),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LightKind::Directional => "directional",
            LightKind::Point => "point",
        }
    }
}

/// A point `p` uniform on the unit hemisphere facing the camera (`p_z ≥ 0`
/// relative to the object). Point lights sit at `p`; directional lights
/// travel from `p` toward the object, i.e. along `−p`.
pub fn sample_light<R: Rng + ?Sized>(rng: &mut R, kind: LightKind) -> Vec3 {
    let mut p = random_unit_vector(rng);
    if p.z < 0.0 {
        p.z = -p.z;
    }
    match kind {
        LightKind::Directional => -p,
        LightKind::Point => p,
    }
}

/// `(mean squared component error, mse > threshold)`.
pub fn light_metrics(pred: Vec3, gt: Vec3, threshold: f64) -> (f64, bool) {
    let mse = (pred - gt).norm_squared() / 3.0;
    (mse, mse > threshold)
}

/// Lambertian renderer of a fixed scene lit by the estimated light.
#[derive(Debug, Clone)]
pub struct LightModel {
    pub mesh: TriangleMesh,
    pub object_pose: Pose6DoF,
    pub camera: Camera,
    pub kind: LightKind,
    pub intensity: f64,
    pub albedo: [f64; 3],
    layout: EstimateLayout,
}

impl LightModel {
    pub fn new(mesh: TriangleMesh, object_pose: Pose6DoF, camera: Camera, kind: LightKind) -> Self {
        let layout = match kind {
            LightKind::Directional => EstimateLayout::new(vec![Segment::UnitVector(3)]),
            LightKind::Point => EstimateLayout::new(vec![Segment::Vector(3)]),
        };
        LightModel {
            mesh,
            object_pose,
            camera,
            kind,
            intensity: 1.0,
            albedo: [DEFAULT_ALBEDO; 3],
            layout,
        }
    }

    pub fn light(&self, x: &[f64]) -> Light {
        let v = Vec3::from_slice(x);
        match self.kind {
            LightKind::Directional => Light::Directional {
                direction: v,
                intensity: self.intensity,
            },
            LightKind::Point => Light::Point {
                position: self.object_pose.translation + v,
                intensity: self.intensity,
            },
        }
    }
}

impl ForwardModel for LightModel {
    type Obs = Image;

    fn layout(&self) -> &EstimateLayout {
        &self.layout
    }

    fn simulate(&self, x: &[f64]) -> Image {
        let mode = RenderMode::Lambertian {
            light: self.light(x),
            albedo: self.albedo,
        };
        rasterize(&self.mesh, &self.object_pose, &self.camera, &mode)
    }

    fn data_energy(&self, sim: &Image, obs: &Image) -> f64 {
        mean_squared_difference(sim, obs).unwrap_or(f64::NAN)
    }
}

impl EncodeFeedback for LightModel {
    fn encode(&self, x: &[f64], y_t: &Image, y: &Image) -> Result<NetInput, FeedbackError> {
        if (y.width, y.height, y.channels) != (self.camera.width, self.camera.height, 3) {
            return Err(FeedbackError::Encode(format!(
                "observation is {}×{}×{}, expected {}×{}×3",
                y.width, y.height, y.channels, self.camera.width, self.camera.height
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

#[derive(Debug, Clone)]
pub struct LightTask {
    pub outlier_threshold: f64,
    model: LightModel,
}

impl LightTask {
    pub fn new(model: LightModel) -> Self {
        LightTask {
            outlier_threshold: DEFAULT_LIGHT_OUTLIER,
            model,
        }
    }

    /// A sphere with a smaller cube beside it, tilted toward the camera.
    pub fn standard(kind: LightKind, resolution: usize) -> Result<Self, TaskError> {
        let sphere = make_primitive(Primitive::Icosphere { subdivisions: 2 }, 0.6)?;
        let cube = make_primitive(Primitive::Cube, 0.3)?.translated(Vec3::new(0.3, -0.2, 0.15));
        let mesh = TriangleMesh::merge(&[sphere, cube]);
        let rotation = axis_angle_to_quat(Vec3::new(1.0, 1.0, 0.0), 25.0).expect("nonzero axis");
        let camera = Camera::with_resolution(resolution, resolution)?;
        Ok(LightTask::new(LightModel::new(
            mesh,
            Pose6DoF::new(rotation, DEFAULT_ANCHOR),
            camera,
            kind,
        )))
    }

    pub fn light_kind(&self) -> LightKind {
        self.model.kind
    }

    pub fn resolution(&self) -> usize {
        self.model.camera.width
    }
}

impl Task for LightTask {
    type Model = LightModel;

    fn kind(&self) -> TaskKind {
        TaskKind::Light
    }

    fn model(&self, _: usize) -> &LightModel {
        &self.model
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (usize, Vec<f64>) {
        (0, sample_light(rng, self.model.kind).to_array().to_vec())
    }

    /// The hemisphere pole: a light straight in front of the object.
    fn initial_estimate(&self) -> Vec<f64> {
        match self.model.kind {
            LightKind::Directional => vec![0.0, 0.0, -1.0],
            LightKind::Point => vec![0.0, 0.0, 1.0],
        }
    }

    fn network(&self) -> Result<Network<f32>, TensorError> {
        let r = self.resolution();
        ConvNetConfig::new(9, r, r, 3, 3).build()
    }

    fn loss(&self, _: usize, pred_raw: &[f64], gt: &[f64]) -> (f64, Vec<f64>) {
        mse_loss(pred_raw, gt).expect("matching lengths")
    }

    fn metric_names(&self) -> &'static [&'static str] {
        &["mse"]
    }

    fn metrics(&self, _: usize, pred: &[f64], gt: &[f64]) -> MetricRow {
        let (mse, out) = light_metrics(Vec3::from_slice(pred), Vec3::from_slice(gt), self.outlier_threshold);
        MetricRow {
            values: vec![mse],
            outlier: Some(out),
        }
    }
}
