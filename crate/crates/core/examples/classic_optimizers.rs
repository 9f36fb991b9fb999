//! Adam and L-BFGS on the Rosenbrock function through the `Energy` trait.

use deep_feedback::classic::{minimize_adam, minimize_lbfgs, AdamParams, Energy, StopRule};

struct Rosenbrock;

impl Energy for Rosenbrock {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let t = x[1] - x[0] * x[0];
        Some(vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * t, 200.0 * t])
    }
}

fn main() {
    let x0 = [-1.2, 1.0];
    let stop = StopRule {
        max_iter: 5000,
        patience: 200,
        max_time: None,
    };
    let a = minimize_adam(&Rosenbrock, &x0, AdamParams::new(0.02), &stop).unwrap();
    let l = minimize_lbfgs(&Rosenbrock, &x0, 10, &stop).unwrap();
    for (name, r) in [("adam", &a), ("lbfgs", &l)] {
        println!(
            "{name:>6}: x = [{:.6}, {:.6}]  E = {:.3e}  iterations {}  stop {:?}",
            r.x[0], r.x[1], r.energy, r.iterations, r.reason
        );
    }
}
