use std::collections::VecDeque;
use std::time::Instant;

use super::{gradient_of, ClassicError, Energy, Minimized, StopReason, StopRule};

pub const DEFAULT_LBFGS_MEMORY: usize = 10;

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
const GRADIENT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn new(lr: f64) -> Self {
        AdamParams {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

fn check_start<E: Energy + ?Sized>(energy: &E, x0: &[f64], stop: &StopRule) -> Result<(), ClassicError> {
    stop.validate()?;
    if x0.len() != energy.dim() {
        return Err(ClassicError::Dimension {
            expected: energy.dim(),
            actual: x0.len(),
        });
    }
    Ok(())
}

/// Best-seen bookkeeping shared by both minimizers.
struct Tracker {
    best_x: Vec<f64>,
    best_e: f64,
    stale: usize,
    trace: Vec<f64>,
    evaluations: usize,
}

impl Tracker {
    fn new(x: &[f64], e: f64) -> Self {
        Tracker {
            best_x: x.to_vec(),
            best_e: e,
            stale: 0,
            trace: Vec::new(),
            evaluations: 1,
        }
    }

    fn observe(&mut self, x: &[f64], e: f64) {
        if e < self.best_e {
            self.best_e = e;
            self.best_x.copy_from_slice(x);
            self.stale = 0;
        } else {
            self.stale += 1;
        }
    }

    fn finish(self, iterations: usize, reason: StopReason, fallback_steps: usize) -> Minimized {
        Minimized {
            x: self.best_x,
            energy: self.best_e,
            trace: self.trace,
            iterations,
            evaluations: self.evaluations,
            reason,
            fallback_steps,
        }
    }
}

/// Adam on the energy. Each iteration evaluates `E` at the current iterate,
/// checks the stop rule, then takes one step along the (analytic or
/// finite-difference) gradient and projects. At most `max_iter` iterates are
/// evaluated, so a finite-difference run costs at most `max_iter·(1 + 2·dim)`
/// evaluations. `iterations` counts steps taken.
pub fn minimize_adam<E: Energy + ?Sized>(
    energy: &E,
    x0: &[f64],
    params: AdamParams,
    stop: &StopRule,
) -> Result<Minimized, ClassicError> {
    check_start(energy, x0, stop)?;
    let start = Instant::now();
    let mut x = x0.to_vec();
    energy.project(&mut x);
    let e0 = energy.eval(&x);
    if !e0.is_finite() {
        return Err(ClassicError::NonFiniteStart);
    }
    let mut track = Tracker::new(&x, e0);
    let n = x.len();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut steps = 0;
    loop {
        if steps > 0 {
            let e = energy.eval(&x);
            track.evaluations += 1;
            if !e.is_finite() {
                return Ok(track.finish(steps, StopReason::NonFinite, 0));
            }
            track.observe(&x, e);
        }
        track.trace.push(track.best_e);
        if track.stale >= stop.patience {
            return Ok(track.finish(steps, StopReason::Patience, 0));
        }
        // Iterates evaluated so far: steps + 1. Another step would need one more.
        if steps + 1 >= stop.max_iter {
            return Ok(track.finish(steps, StopReason::MaxIterations, 0));
        }
        if stop.max_time.is_some_and(|t| start.elapsed() >= t) {
            return Ok(track.finish(steps, StopReason::Time, 0));
        }
        let (g, cost) = gradient_of(energy, &x);
        track.evaluations += cost;
        if g.iter().any(|v| !v.is_finite()) {
            return Ok(track.finish(steps, StopReason::NonFinite, 0));
        }
        steps += 1;
        let t = steps as i32;
        let c1 = 1.0 - params.beta1.powi(t);
        let c2 = 1.0 - params.beta2.powi(t);
        for i in 0..n {
            m[i] = params.beta1 * m[i] + (1.0 - params.beta1) * g[i];
            v[i] = params.beta2 * v[i] + (1.0 - params.beta2) * g[i] * g[i];
            x[i] -= params.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + params.eps);
        }
        energy.project(&mut x);
    }
}

/// Two-loop recursion: `-H·g` for the inverse Hessian approximation built
/// from the stored `(s, y)` pairs, scaled by `s·y / y·y` of the newest pair.
fn lbfgs_direction(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; pairs.len()];
    for (k, (s, y, rho)) in pairs.iter().enumerate().rev() {
        let a = rho * dot(s, &q);
        alpha[k] = a;
        axpy(-a, y, &mut q);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (k, (s, y, rho)) in pairs.iter().enumerate() {
        let b = rho * dot(y, &q);
        axpy(alpha[k] - b, s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

/// Backtracking Armijo search along `d`. Returns the accepted projected
/// point and its energy.
fn backtrack<E: Energy + ?Sized>(
    energy: &E,
    x: &[f64],
    e: f64,
    g: &[f64],
    d: &[f64],
    evaluations: &mut usize,
) -> Option<(Vec<f64>, f64)> {
    let slope = dot(g, d);
    let mut alpha = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let mut trial: Vec<f64> = x.iter().zip(d).map(|(x, d)| x + alpha * d).collect();
        energy.project(&mut trial);
        let et = energy.eval(&trial);
        *evaluations += 1;
        if et.is_finite() && et <= e + ARMIJO_C1 * alpha * slope && et < e {
            return Some((trial, et));
        }
        alpha *= 0.5;
    }
    None
}

/// L-BFGS with `memory` correction pairs and a backtracking Armijo line
/// search. Pairs failing the curvature check `s·y > 0` reset the memory.
/// When the quasi-Newton direction fails to produce a decrease, a
/// steepest-descent step is tried instead and counted in
/// `fallback_steps`; if that fails as well the run stops as converged.
pub fn minimize_lbfgs<E: Energy + ?Sized>(
    energy: &E,
    x0: &[f64],
    memory: usize,
    stop: &StopRule,
) -> Result<Minimized, ClassicError> {
    check_start(energy, x0, stop)?;
    if memory == 0 {
        return Err(ClassicError::StopRule("L-BFGS memory must be positive".into()));
    }
    let start = Instant::now();
    let mut x = x0.to_vec();
    energy.project(&mut x);
    let mut e = energy.eval(&x);
    if !e.is_finite() {
        return Err(ClassicError::NonFiniteStart);
    }
    let mut track = Tracker::new(&x, e);
    let (mut g, cost) = gradient_of(energy, &x);
    track.evaluations += cost;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(memory);
    let mut fallbacks = 0;
    let mut iterations = 0;
    track.trace.push(e);
    loop {
        if g.iter().any(|v| !v.is_finite()) {
            return Ok(track.finish(iterations, StopReason::NonFinite, fallbacks));
        }
        if g.iter().all(|v| v.abs() <= GRADIENT_TOLERANCE) {
            return Ok(track.finish(iterations, StopReason::Converged, fallbacks));
        }
        if track.stale >= stop.patience {
            return Ok(track.finish(iterations, StopReason::Patience, fallbacks));
        }
        if iterations >= stop.max_iter {
            return Ok(track.finish(iterations, StopReason::MaxIterations, fallbacks));
        }
        if stop.max_time.is_some_and(|t| start.elapsed() >= t) {
            return Ok(track.finish(iterations, StopReason::Time, fallbacks));
        }
        let mut d = lbfgs_direction(&g, &pairs);
        if dot(&d, &g) >= 0.0 {
            d = g.iter().map(|v| -v).collect();
        }
        let accepted = match backtrack(energy, &x, e, &g, &d, &mut track.evaluations) {
            Some(step) => Some(step),
            None => {
                fallbacks += 1;
                pairs.clear();
                let sd: Vec<f64> = g.iter().map(|v| -v).collect();
                backtrack(energy, &x, e, &g, &sd, &mut track.evaluations)
            }
        };
        iterations += 1;
        let Some((x_new, e_new)) = accepted else {
            track.trace.push(track.best_e);
            return Ok(track.finish(iterations, StopReason::Converged, fallbacks));
        };
        let (g_new, cost) = gradient_of(energy, &x_new);
        track.evaluations += cost;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if pairs.len() == memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        } else {
            // Armijo alone does not guarantee positive curvature; stale
            // pairs would keep producing the same poor direction.
            pairs.clear();
        }
        x = x_new;
        e = e_new;
        g = g_new;
        track.observe(&x, e);
        track.trace.push(track.best_e);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Shifted {
        a: Vec<f64>,
        analytic: bool,
    }

    impl Energy for Shifted {
        fn dim(&self) -> usize {
            self.a.len()
        }
        fn eval(&self, x: &[f64]) -> f64 {
            x.iter().zip(&self.a).map(|(v, a)| (v - a) * (v - a)).sum()
        }
        fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
            self.analytic
                .then(|| x.iter().zip(&self.a).map(|(v, a)| 2.0 * (v - a)).collect())
        }
    }

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

    struct Constant;

    impl Energy for Constant {
        fn dim(&self) -> usize {
            3
        }
        fn eval(&self, _: &[f64]) -> f64 {
            4.0
        }
    }

    fn non_increasing(trace: &[f64]) -> bool {
        trace.windows(2).all(|w| w[1] <= w[0])
    }

    #[test]
    fn adam_reaches_quadratic_minimum() {
        let e = Shifted {
            a: vec![0.3, -0.7, 1.1],
            analytic: true,
        };
        let r = minimize_adam(&e, &[0.0; 3], AdamParams::new(0.01), &StopRule::default()).unwrap();
        assert!(r.iterations <= 500);
        for (x, a) in r.x.iter().zip(&e.a) {
            assert!((x - a).abs() < 1e-6, "{x} vs {a}");
        }
        assert!(non_increasing(&r.trace));
    }

    #[test]
    fn adam_patience_on_constant_energy() {
        let stop = StopRule {
            patience: 7,
            ..StopRule::default()
        };
        let r = minimize_adam(&Constant, &[0.1, 0.2, 0.3], AdamParams::new(0.1), &stop).unwrap();
        assert_eq!(r.reason, StopReason::Patience);
        assert_eq!(r.iterations, 7);
        assert_eq!(r.x, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn adam_evaluation_budget() {
        let e = Shifted {
            a: vec![1.0; 4],
            analytic: false,
        };
        let stop = StopRule {
            max_iter: 30,
            patience: 1000,
            max_time: None,
        };
        let r = minimize_adam(&e, &[0.0; 4], AdamParams::new(1e-3), &stop).unwrap();
        assert!(r.evaluations <= 30 * (1 + 2 * 4), "{}", r.evaluations);
    }

    #[test]
    fn adam_rejects_non_finite_start() {
        struct Nan;
        impl Energy for Nan {
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, _: &[f64]) -> f64 {
                f64::NAN
            }
        }
        assert_eq!(
            minimize_adam(&Nan, &[0.0], AdamParams::new(0.1), &StopRule::default()),
            Err(ClassicError::NonFiniteStart)
        );
    }

    #[test]
    fn lbfgs_rosenbrock() {
        let stop = StopRule {
            max_iter: 200,
            patience: 200,
            max_time: None,
        };
        let r = minimize_lbfgs(&Rosenbrock, &[-1.2, 1.0], DEFAULT_LBFGS_MEMORY, &stop).unwrap();
        assert!(r.energy < 1e-8, "E = {} after {}", r.energy, r.iterations);
        assert!(r.iterations <= 200);
        assert!(non_increasing(&r.trace));
    }

    #[test]
    fn lbfgs_identity_hessian_in_two_iterations() {
        let e = Shifted {
            a: vec![2.0, -1.0, 0.5],
            analytic: true,
        };
        let r = minimize_lbfgs(&e, &[0.0; 3], DEFAULT_LBFGS_MEMORY, &StopRule::default()).unwrap();
        assert!(r.iterations <= 2, "{}", r.iterations);
        assert!(r.energy < 1e-20);
    }

    #[test]
    fn lbfgs_zero_gradient_returns_start() {
        let e = Shifted {
            a: vec![0.25, 0.5],
            analytic: true,
        };
        let r = minimize_lbfgs(&e, &[0.25, 0.5], DEFAULT_LBFGS_MEMORY, &StopRule::default()).unwrap();
        assert_eq!(r.x, vec![0.25, 0.5]);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.reason, StopReason::Converged);
    }

    #[test]
    fn lbfgs_with_finite_differences() {
        let e = Shifted {
            a: vec![0.3, -0.2],
            analytic: false,
        };
        let r = minimize_lbfgs(&e, &[1.0, 1.0], DEFAULT_LBFGS_MEMORY, &StopRule::default()).unwrap();
        assert!(r.energy < 1e-12);
    }
}
