//! Energy-minimization baselines: Adam and L-BFGS on `E_data + λ·E_prior`,
//! with finite-difference gradients where no analytic one is available.

mod minimize;
mod prior;

pub use minimize::{minimize_adam, minimize_lbfgs, AdamParams, DEFAULT_LBFGS_MEMORY};
pub use crate::training::regression_baseline;
pub use prior::{fit_euler_prior, GaussianEulerPrior, DEFAULT_PRIOR_WEIGHT, VARIANCE_FLOOR};

use std::time::Duration;

use rayon::prelude::*;
use thiserror::Error;

use crate::feedback::{ForwardModel, Segment};
use crate::geometry::Quat;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassicError {
    #[error("energy is not finite at the starting point")]
    NonFiniteStart,
    #[error("starting point has {actual} values, energy expects {expected}")]
    Dimension { expected: usize, actual: usize },
    #[error("invalid stop rule: {0}")]
    StopRule(String),
    #[error("cannot fit prior: {0}")]
    PriorData(String),
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Silhouettes are piecewise constant, so pose gradients need steps that
/// move edges across pixel centres.
pub const POSE_FD_STEP: f64 = 1e-3;

/// A scalar objective over a flat parameter vector.
pub trait Energy: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> f64;

    /// Analytic gradient, if the energy has one.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Maps an iterate back onto the feasible set after each step.
    fn project(&self, _x: &mut [f64]) {}

    fn fd_step(&self) -> f64 {
        DEFAULT_FD_STEP
    }
}

/// Central differences `(E(x + εe_i) − E(x − εe_i)) / 2ε`. Coordinates are
/// probed in parallel; each entry depends only on its own two evaluations.
/// Costs `2·dim` evaluations.
pub fn finite_difference_gradient<E: Energy + ?Sized>(energy: &E, x: &[f64]) -> Vec<f64> {
    let h = energy.fd_step();
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut probe = x.to_vec();
            probe[i] = x[i] + h;
            let up = energy.eval(&probe);
            probe[i] = x[i] - h;
            let down = energy.eval(&probe);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Gradient plus the number of energy evaluations it took.
pub fn gradient_of<E: Energy + ?Sized>(energy: &E, x: &[f64]) -> (Vec<f64>, usize) {
    match energy.gradient(x) {
        Some(g) => (g, 0),
        None => (finite_difference_gradient(energy, x), 2 * x.len()),
    }
}

/// `Σ (‖q‖² − 1)²` over the quaternion blocks of `x`.
pub fn unit_norm_penalty(segments: &[Segment], x: &[f64]) -> f64 {
    let mut at = 0;
    let mut total = 0.0;
    for s in segments {
        if *s == Segment::Quat {
            let n2: f64 = x[at..at + 4].iter().map(|v| v * v).sum();
            total += (n2 - 1.0).powi(2);
        }
        at += s.len();
    }
    total
}

/// `E_data(f(project(x)), y) + w_prior·E_prior + w_unit·Σ(‖q‖² − 1)²` for a
/// forward model. The prior sees the quaternion blocks of the projected
/// estimate.
pub struct ModelEnergy<'a, M: ForwardModel> {
    pub model: &'a M,
    pub obs: &'a M::Obs,
    pub prior: Option<(&'a GaussianEulerPrior, f64)>,
    pub unit_penalty: f64,
    pub fd_step: f64,
    /// Keep iterates on the manifold after every step.
    pub project_iterates: bool,
}

impl<'a, M: ForwardModel> ModelEnergy<'a, M> {
    pub fn new(model: &'a M, obs: &'a M::Obs) -> Self {
        ModelEnergy {
            model,
            obs,
            prior: None,
            unit_penalty: 0.0,
            fd_step: DEFAULT_FD_STEP,
            project_iterates: true,
        }
    }

    pub fn data_energy(&self, x: &[f64]) -> f64 {
        let mut p = x.to_vec();
        self.model.project(&mut p);
        self.model.data_energy(&self.model.simulate(&p), self.obs)
    }
}

impl<M: ForwardModel> Energy for ModelEnergy<'_, M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut p = x.to_vec();
        self.model.project(&mut p);
        let mut e = self.model.data_energy(&self.model.simulate(&p), self.obs);
        if let Some((prior, w)) = self.prior {
            let mut quats = Vec::new();
            let mut at = 0;
            for s in self.model.layout().segments() {
                if *s == Segment::Quat {
                    quats.push(Quat::from_slice(&p[at..at + 4]));
                }
                at += s.len();
            }
            e += w * prior.energy(&quats);
        }
        if self.unit_penalty > 0.0 {
            e += self.unit_penalty * unit_norm_penalty(self.model.layout().segments(), x);
        }
        e
    }

    fn project(&self, x: &mut [f64]) {
        if self.project_iterates {
            self.model.project(x);
        }
    }

    fn fd_step(&self) -> f64 {
        self.fd_step
    }
}

/// When a minimizer stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_iter: usize,
    /// Stop after this many consecutive iterations without a new best energy.
    pub patience: usize,
    pub max_time: Option<Duration>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            max_iter: 500,
            patience: 20,
            max_time: None,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<(), ClassicError> {
        if self.max_iter == 0 || self.patience == 0 {
            return Err(ClassicError::StopRule("max_iter and patience must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    Patience,
    Time,
    /// Gradient vanished.
    Converged,
    /// Energy became non-finite; the best point seen is returned.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimized {
    /// Best point seen.
    pub x: Vec<f64>,
    pub energy: f64,
    /// Best energy after each iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
    /// Iterations where the L-BFGS line search failed and a gradient step
    /// was taken instead.
    pub fallback_steps: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        a: Vec<f64>,
    }

    impl Energy for Quadratic {
        fn dim(&self) -> usize {
            self.a.len()
        }
        fn eval(&self, x: &[f64]) -> f64 {
            x.iter().zip(&self.a).map(|(v, a)| (v - a) * (v - a)).sum()
        }
    }

    #[test]
    fn central_differences_are_exact_on_quadratics() {
        let e = Quadratic { a: vec![1.0, -2.0] };
        let g = finite_difference_gradient(&e, &[0.5, 0.5]);
        assert!((g[0] + 1.0).abs() < 1e-9 && (g[1] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn penalty_vanishes_on_unit_quaternions() {
        let segs = [Segment::Quat, Segment::Vector(3)];
        assert_eq!(unit_norm_penalty(&segs, &[1.0, 0.0, 0.0, 0.0, 5.0, 5.0, 5.0]), 0.0);
        assert_eq!(unit_norm_penalty(&segs, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]), 9.0);
    }
}
