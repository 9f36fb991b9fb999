use crate::geometry::Quat;

/// One block of a flat estimate vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    /// Four components `(w, x, y, z)` renormalized by projection.
    Quat,
    /// Unconstrained reals.
    Vector(usize),
    /// Reals renormalized to unit length by projection.
    UnitVector(usize),
}

impl Segment {
    pub fn len(self) -> usize {
        match self {
            Segment::Quat => 4,
            Segment::Vector(n) | Segment::UnitVector(n) => n,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

/// Decomposition of an estimate vector into manifold blocks, e.g.
/// `[Quat, Vector(3)]` for a 6-DoF pose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimateLayout {
    segments: Vec<Segment>,
}

impl EstimateLayout {
    pub fn new(segments: Vec<Segment>) -> Self {
        EstimateLayout { segments }
    }

    pub fn pose() -> Self {
        EstimateLayout::new(vec![Segment::Quat, Segment::Vector(3)])
    }

    pub fn quats(count: usize) -> Self {
        EstimateLayout::new(vec![Segment::Quat; count])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.segments.iter().map(|s| s.len()).sum()
    }

    /// Renormalizes every constrained block in place. A zero quaternion
    /// becomes the identity; a zero unit vector becomes the last basis
    /// vector.
    pub fn project(&self, x: &mut [f64]) {
        let mut at = 0;
        for seg in &self.segments {
            let n = seg.len();
            let block = &mut x[at..at + n];
            match seg {
                Segment::Quat => {
                    let q = Quat::from_slice(block).normalize().unwrap_or(Quat::IDENTITY);
                    block.copy_from_slice(&q.to_array());
                }
                Segment::UnitVector(_) => {
                    let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 && norm.is_finite() {
                        block.iter_mut().for_each(|v| *v /= norm);
                    } else if let Some((last, rest)) = block.split_last_mut() {
                        rest.iter_mut().for_each(|v| *v = 0.0);
                        *last = 1.0;
                    }
                }
                Segment::Vector(_) => {}
            }
            at += n;
        }
    }

    /// Whether every constrained block is within `tol` of unit norm.
    pub fn is_valid(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let mut at = 0;
        for seg in &self.segments {
            let n = seg.len();
            let block = &x[at..at + n];
            if !block.iter().all(|v| v.is_finite()) {
                return false;
            }
            if matches!(seg, Segment::Quat | Segment::UnitVector(_)) {
                let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > tol {
                    return false;
                }
            }
            at += n;
        }
        true
    }
}

/// Deterministic simulator `f: x → y` with a data energy.
pub trait ForwardModel: Sync {
    type Obs: Clone + Send + Sync;

    fn layout(&self) -> &EstimateLayout;

    fn simulate(&self, x: &[f64]) -> Self::Obs;

    /// Non-negative discrepancy, zero when `sim == obs`.
    fn data_energy(&self, sim: &Self::Obs, obs: &Self::Obs) -> f64;

    /// Maps an arbitrary vector back onto the estimate manifold.
    fn project(&self, x: &mut [f64]) {
        self.layout().project(x);
    }

    fn dim(&self) -> usize {
        self.layout().dim()
    }
}

/// Inputs of an update network: a flat primary tensor (image stack or
/// position vector) and an auxiliary vector holding the current estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
    pub aux: Vec<f32>,
}

/// Forward models whose feedback can be fed to an update network.
pub trait EncodeFeedback: ForwardModel {
    fn encode(&self, x: &[f64], y_t: &Self::Obs, y: &Self::Obs) -> Result<NetInput, super::FeedbackError>;
}
