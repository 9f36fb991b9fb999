use std::f64::consts::PI;

use crate::geometry::{euler_from_quat, Quat};

use super::ClassicError;

pub const VARIANCE_FLOOR: f64 = 1e-6;
pub const DEFAULT_PRIOR_WEIGHT: f64 = 0.001;

/// Independent Gaussians over the XYZ Euler angles of every joint.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEulerPrior {
    pub mean: Vec<[f64; 3]>,
    pub variance: Vec<[f64; 3]>,
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Population mean and variance of each joint's Euler angles over the
/// training rotations (`samples[i][joint]`), with variances floored at
/// [`VARIANCE_FLOOR`].
pub fn fit_euler_prior(samples: &[Vec<Quat>]) -> Result<GaussianEulerPrior, ClassicError> {
    if samples.len() < 2 {
        return Err(ClassicError::PriorData(format!("need at least 2 samples, got {}", samples.len())));
    }
    let joints = samples[0].len();
    if joints == 0 || samples.iter().any(|s| s.len() != joints) {
        return Err(ClassicError::PriorData("samples differ in joint count or are empty".into()));
    }
    let n = samples.len() as f64;
    let mut mean = vec![[0.0; 3]; joints];
    let mut variance = vec![[0.0; 3]; joints];
    let angles: Vec<Vec<[f64; 3]>> = samples.iter().map(|s| s.iter().map(|q| euler_from_quat(*q)).collect()).collect();
    for j in 0..joints {
        for k in 0..3 {
            let m = angles.iter().map(|a| a[j][k]).sum::<f64>() / n;
            let v = angles.iter().map(|a| (a[j][k] - m) * (a[j][k] - m)).sum::<f64>() / n;
            mean[j][k] = m;
            variance[j][k] = v.max(VARIANCE_FLOOR);
        }
    }
    Ok(GaussianEulerPrior { mean, variance })
}

impl GaussianEulerPrior {
    pub fn joints(&self) -> usize {
        self.mean.len()
    }

    /// Negative log density without its constant: zero at the mean.
    pub fn energy(&self, rotations: &[Quat]) -> f64 {
        rotations
            .iter()
            .zip(self.mean.iter().zip(&self.variance))
            .map(|(q, (m, v))| {
                let a = euler_from_quat(*q);
                (0..3).map(|k| wrap(a[k] - m[k]).powi(2) / (2.0 * v[k])).sum::<f64>()
            })
            .sum()
    }
}
