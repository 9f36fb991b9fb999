//! The feedback loop with a hand-written update rule: an overshooting
//! oracle step on an IK problem, with and without damping.

use deep_feedback::feedback::{solve, FeedbackError, ForwardModel, SolverConfig, UpdateFn};
use deep_feedback::kinematics::{random_chain, FkConvention};
use deep_feedback::tasks::{IkTask, Task};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Moves 2.5 times the way to the answer, so undamped steps overshoot.
struct Overshoot {
    target: Vec<f64>,
}

impl<M: ForwardModel + ?Sized> UpdateFn<M> for Overshoot {
    fn delta(&self, _: &M, _: usize, x: &[f64], _: &M::Obs, _: &M::Obs) -> Result<Vec<f64>, FeedbackError> {
        Ok(self.target.iter().zip(x).map(|(g, v)| 2.5 * (g - v)).collect())
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let task = IkTask::new(random_chain(&mut rng, 6), FkConvention::World);
    let (variant, x_gt) = task.sample(&mut rng);
    let model = task.model(variant);
    let y = model.simulate(&x_gt);
    let update = Overshoot { target: x_gt };

    for damping in [false, true] {
        let cfg = SolverConfig::new(6).with_damping(damping);
        let traj = solve(model, &y, &task.initial_estimate(), &update, &cfg).unwrap();
        let e: Vec<String> = traj.energies.iter().map(|v| format!("{v:.2e}")).collect();
        let lambdas: Vec<f64> = traj.steps.iter().map(|s| s.lambda).collect();
        println!("damping {damping:<5} E = [{}]", e.join(", "));
        println!("              lambda = {lambdas:?}, stalls {}", traj.stalls());
    }
}
