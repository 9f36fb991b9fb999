//! The feedback solver: repeatedly simulate the current estimate, compare
//! with the observation, and apply a learned (or supplied) additive update.

mod model;
mod solver;

pub use model::{EncodeFeedback, EstimateLayout, ForwardModel, NetInput, Segment};
pub use solver::{
    adaptive_step, runtime_breakdown, solve, DampedStep, OracleUpdate, RuntimeBreakdown, SolverConfig, StageNetworks,
    StepRecord, Trajectory, UpdateFn, ZeroUpdate, DEFAULT_LAMBDA_FLOOR,
};

use crate::tensornet::TensorError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeedbackError {
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("estimate has {actual} values, model expects {expected}")]
    EstimateLength { expected: usize, actual: usize },
    #[error("stage {stage}: update has {actual} values, model expects {expected}")]
    UpdateLength { stage: usize, expected: usize, actual: usize },
    #[error("stage {stage}: update is not finite")]
    NonFiniteUpdate { stage: usize },
    #[error("candidate energy is not finite at lambda {lambda}")]
    NonFiniteEnergy { lambda: f64 },
    #[error("stage {stage}: candidate energy is not finite at lambda {lambda}")]
    NonFiniteEnergyAt { stage: usize, lambda: f64 },
    #[error("no network for stage {stage}")]
    MissingNetwork { stage: usize },
    #[error("stage {stage}: {source}")]
    Network { stage: usize, source: TensorError },
    #[error("cannot encode network input: {0}")]
    Encode(String),
    #[error("trajectory has no steps")]
    EmptyTrajectory,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// `f(x) = x`, `E = Σ (sim − obs)²`.
    struct Identity {
        layout: EstimateLayout,
        calls: AtomicUsize,
    }

    impl Identity {
        fn new(dim: usize) -> Self {
            Identity {
                layout: EstimateLayout::new(vec![Segment::Vector(dim)]),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl ForwardModel for Identity {
        type Obs = Vec<f64>;
        fn layout(&self) -> &EstimateLayout {
            &self.layout
        }
        fn simulate(&self, x: &[f64]) -> Vec<f64> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            x.to_vec()
        }
        fn data_energy(&self, sim: &Vec<f64>, obs: &Vec<f64>) -> f64 {
            sim.iter().zip(obs).map(|(a, b)| (a - b) * (a - b)).sum()
        }
    }

    /// Proposes a fixed Δ at every stage.
    struct Constant(Vec<f64>);

    impl<M: ForwardModel> UpdateFn<M> for Constant {
        fn delta(&self, _: &M, _: usize, _: &[f64], _: &M::Obs, _: &M::Obs) -> Result<Vec<f64>, FeedbackError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn damping_example_halves_twice() {
        let m = Identity::new(1);
        let step = adaptive_step(&m, &[0.0], &[4.0], &vec![1.0], 1.0, DEFAULT_LAMBDA_FLOOR).unwrap();
        assert_eq!((step.x[0], step.lambda), (1.0, 0.25));
        assert_eq!(step.energy, 0.0);
        assert_eq!(step.evaluations, 3);
    }

    #[test]
    fn zero_delta_stalls_at_floor() {
        let m = Identity::new(1);
        let step = adaptive_step(&m, &[0.0], &[0.0], &vec![1.0], 1.0, DEFAULT_LAMBDA_FLOOR).unwrap();
        assert!(step.stalled);
        assert_eq!(step.x, vec![0.0]);
        assert_eq!(step.lambda, DEFAULT_LAMBDA_FLOOR);
        assert_eq!(step.evaluations, 11);
    }

    #[test]
    fn descent_direction_accepts_full_step() {
        let m = Identity::new(1);
        let step = adaptive_step(&m, &[0.0], &[0.5], &vec![1.0], 1.0, DEFAULT_LAMBDA_FLOOR).unwrap();
        assert_eq!(step.lambda, 1.0);
        assert!(!step.stalled);
    }

    #[test]
    fn oracle_reaches_target_in_one_stage() {
        let m = Identity::new(3);
        let gt = vec![0.5, -1.0, 2.0];
        let traj = solve(&m, &gt, &[0.0; 3], &OracleUpdate { target: gt.clone() }, &SolverConfig::new(3)).unwrap();
        assert_eq!(traj.states[1], gt);
        assert_eq!(traj.energies[1], 0.0);
    }

    #[test]
    fn zero_update_keeps_estimate() {
        let m = Identity::new(2);
        let y = vec![1.0, 1.0];
        let traj = solve(&m, &y, &[0.25, 0.0], &ZeroUpdate, &SolverConfig::new(4)).unwrap();
        assert_eq!(traj.states.len(), 5);
        assert!(traj.states.iter().all(|s| s == &vec![0.25, 0.0]));
        assert!(traj.energies.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn tolerance_stops_after_first_stage() {
        let m = Identity::new(2);
        let mut cfg = SolverConfig::new(5);
        cfg.tolerance = Some(1e-12);
        let traj = solve(&m, &vec![1.0, 0.0], &[0.0, 0.0], &ZeroUpdate, &cfg).unwrap();
        assert!(traj.converged);
        assert_eq!(traj.steps.len(), 1);
    }

    #[test]
    fn undamped_call_counts() {
        let m = Identity::new(2);
        let mut cfg = SolverConfig::new(6);
        cfg.evaluate_final = false;
        let traj = solve(&m, &vec![1.0, 0.0], &[0.0, 0.0], &Constant(vec![0.1, 0.1]), &cfg).unwrap();
        assert_eq!(m.calls.load(Ordering::Relaxed), 6);
        assert_eq!(traj.forward_calls, 6);
        assert_eq!(traj.update_calls, 6);
        assert_eq!(traj.final_energy(), None);
    }

    #[test]
    fn damped_energies_never_increase() {
        let m = Identity::new(2);
        let cfg = SolverConfig::new(8).with_damping(true);
        let traj = solve(&m, &vec![1.0, -1.0], &[0.0, 0.0], &Constant(vec![3.0, 0.7]), &cfg).unwrap();
        assert_eq!(traj.monotonicity_violations(), 0);
        assert_eq!(traj.energies.len(), 9);
        assert_eq!(traj.forward_calls, m.calls.load(Ordering::Relaxed));
        assert!(traj.steps.iter().any(|s| s.lambda < 1.0));
    }

    #[test]
    fn non_finite_update_names_stage() {
        struct Bad;
        impl UpdateFn<Identity> for Bad {
            fn delta(&self, _: &Identity, stage: usize, _: &[f64], _: &Vec<f64>, _: &Vec<f64>) -> Result<Vec<f64>, FeedbackError> {
                Ok(vec![if stage == 2 { f64::NAN } else { 0.0 }])
            }
        }
        let m = Identity::new(1);
        let err = solve(&m, &vec![0.0], &[0.0], &Bad, &SolverConfig::new(4)).unwrap_err();
        assert_eq!(err, FeedbackError::NonFiniteUpdate { stage: 2 });
    }

    #[test]
    fn breakdown_means() {
        let m = Identity::new(1);
        let mut traj = solve(&m, &vec![0.0], &[0.0], &ZeroUpdate, &SolverConfig::new(2)).unwrap();
        for s in &mut traj.steps {
            s.forward_ms = 2.0;
            s.update_ms = 1.0;
        }
        let b = runtime_breakdown(&traj).unwrap();
        assert_eq!((b.forward_ms, b.update_ms, b.total_ms), (2.0, 1.0, 3.0));
        traj.steps.clear();
        assert_eq!(runtime_breakdown(&traj), Err(FeedbackError::EmptyTrajectory));
    }
}
