use std::time::Instant;

use crate::tensornet::{Network, Tape};

use super::{EncodeFeedback, FeedbackError, ForwardModel};

/// The update function `g(x^t, y^t, y) → Δ` of one solver stage.
pub trait UpdateFn<M: ForwardModel + ?Sized>: Sync {
    fn delta(&self, model: &M, stage: usize, x: &[f64], y_t: &M::Obs, y: &M::Obs) -> Result<Vec<f64>, FeedbackError>;

    /// Number of distinct stages this update can serve, `None` if unlimited.
    fn stage_limit(&self) -> Option<usize> {
        None
    }
}

/// Always proposes `Δ = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroUpdate;

impl<M: ForwardModel + ?Sized> UpdateFn<M> for ZeroUpdate {
    fn delta(&self, model: &M, _: usize, _: &[f64], _: &M::Obs, _: &M::Obs) -> Result<Vec<f64>, FeedbackError> {
        Ok(vec![0.0; model.dim()])
    }
}

/// Debug update that jumps straight to a known answer: `Δ = x_gt − x^t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleUpdate {
    pub target: Vec<f64>,
}

impl<M: ForwardModel + ?Sized> UpdateFn<M> for OracleUpdate {
    fn delta(&self, _: &M, _: usize, x: &[f64], _: &M::Obs, _: &M::Obs) -> Result<Vec<f64>, FeedbackError> {
        Ok(self.target.iter().zip(x).map(|(g, v)| g - v).collect())
    }
}

/// Per-stage update networks, or one network shared by every stage.
#[derive(Debug, Clone)]
pub struct StageNetworks {
    nets: Vec<Network<f32>>,
    shared: bool,
}

impl StageNetworks {
    pub fn per_stage(nets: Vec<Network<f32>>) -> Self {
        StageNetworks { nets, shared: false }
    }

    pub fn shared(net: Network<f32>) -> Self {
        StageNetworks {
            nets: vec![net],
            shared: true,
        }
    }

    pub fn is_shared(&self) -> bool {
        self.shared
    }

    pub fn networks(&self) -> &[Network<f32>] {
        &self.nets
    }

    pub fn network(&self, stage: usize) -> Option<&Network<f32>> {
        if self.shared {
            self.nets.first()
        } else {
            self.nets.get(stage)
        }
    }

    /// Evaluates the network of `stage` on encoded feedback.
    pub fn predict<M: EncodeFeedback + ?Sized>(
        &self,
        model: &M,
        stage: usize,
        x: &[f64],
        y_t: &M::Obs,
        y: &M::Obs,
    ) -> Result<Vec<f64>, FeedbackError> {
        let net = self.network(stage).ok_or(FeedbackError::MissingNetwork { stage })?;
        let input = model.encode(x, y_t, y)?;
        let mut tape = Tape::new();
        let aux = (!input.aux.is_empty()).then_some(input.aux.as_slice());
        let out = net
            .forward_slice(&mut tape, &input.data, aux)
            .map_err(|source| FeedbackError::Network { stage, source })?;
        Ok(out.iter().map(|&v| v as f64).collect())
    }
}

impl<M: EncodeFeedback + ?Sized> UpdateFn<M> for StageNetworks {
    fn delta(&self, model: &M, stage: usize, x: &[f64], y_t: &M::Obs, y: &M::Obs) -> Result<Vec<f64>, FeedbackError> {
        self.predict(model, stage, x, y_t, y)
    }

    fn stage_limit(&self) -> Option<usize> {
        (!self.shared).then_some(self.nets.len())
    }
}

pub const DEFAULT_LAMBDA_FLOOR: f64 = 1.0 / 1024.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub stages: usize,
    pub damping: bool,
    pub lambda_floor: f64,
    /// Stop once `‖x^{t+1} − x^t‖` falls below this.
    pub tolerance: Option<f64>,
    /// Simulate the final estimate so the trajectory carries `E^T`. This is
    /// one forward call beyond the `T` the loop itself makes.
    pub evaluate_final: bool,
    /// Keep every simulated observation `y^t` in the trajectory.
    pub record_observations: bool,
}

impl SolverConfig {
    pub fn new(stages: usize) -> Self {
        SolverConfig {
            stages,
            damping: false,
            lambda_floor: DEFAULT_LAMBDA_FLOOR,
            tolerance: None,
            evaluate_final: true,
            record_observations: false,
        }
    }

    pub fn with_damping(mut self, on: bool) -> Self {
        self.damping = on;
        self
    }

    pub fn validate(&self) -> Result<(), FeedbackError> {
        if self.stages == 0 {
            return Err(FeedbackError::InvalidConfig("stage count must be at least 1".into()));
        }
        if !(self.lambda_floor > 0.0 && self.lambda_floor <= 1.0) {
            return Err(FeedbackError::InvalidConfig("lambda floor must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// One solver stage: how `x^{t+1}` was obtained from `x^t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub lambda: f64,
    pub stalled: bool,
    pub forward_calls: usize,
    pub forward_ms: f64,
    pub update_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory<O> {
    /// `x^0 … x^k`.
    pub states: Vec<Vec<f64>>,
    /// `E_data` of each state that was simulated.
    pub energies: Vec<f64>,
    pub steps: Vec<StepRecord>,
    /// `y^0 …` when requested in the config.
    pub observations: Vec<O>,
    pub converged: bool,
    /// Every call of `f`, including damping retries and the final evaluation.
    pub forward_calls: usize,
    pub update_calls: usize,
}

impl<O> Trajectory<O> {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds x^0")
    }

    pub fn final_energy(&self) -> Option<f64> {
        (self.energies.len() == self.states.len()).then(|| *self.energies.last().expect("nonempty"))
    }

    /// Count of consecutive energy pairs with `E^{t+1} > E^t`.
    pub fn monotonicity_violations(&self) -> usize {
        self.energies.windows(2).filter(|w| w[1] > w[0]).count()
    }

    pub fn stalls(&self) -> usize {
        self.steps.iter().filter(|s| s.stalled).count()
    }
}

/// Result of one damped step.
#[derive(Debug, Clone)]
pub struct DampedStep<O> {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub stalled: bool,
    pub energy: f64,
    /// Simulation of the returned `x`, absent on a stall (the caller already
    /// holds it).
    pub obs: Option<O>,
    pub evaluations: usize,
}

/// Tries `x + λΔ` for `λ = 1, ½, ¼, …` until the data energy drops strictly
/// below `e_prev` or `λ` reaches the floor. On failure `x` is kept.
pub fn adaptive_step<M: ForwardModel + ?Sized>(
    model: &M,
    x: &[f64],
    delta: &[f64],
    y: &M::Obs,
    e_prev: f64,
    lambda_floor: f64,
) -> Result<DampedStep<M::Obs>, FeedbackError> {
    let mut lambda = 1.0;
    let mut evaluations = 0;
    loop {
        let mut cand: Vec<f64> = x.iter().zip(delta).map(|(a, d)| a + lambda * d).collect();
        model.project(&mut cand);
        let sim = model.simulate(&cand);
        let e = model.data_energy(&sim, y);
        evaluations += 1;
        if !e.is_finite() {
            return Err(FeedbackError::NonFiniteEnergy { lambda });
        }
        if e < e_prev {
            return Ok(DampedStep {
                x: cand,
                lambda,
                stalled: false,
                energy: e,
                obs: Some(sim),
                evaluations,
            });
        }
        if lambda <= lambda_floor {
            return Ok(DampedStep {
                x: x.to_vec(),
                lambda,
                stalled: true,
                energy: e_prev,
                obs: None,
                evaluations,
            });
        }
        lambda *= 0.5;
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Runs the feedback loop: at each stage simulate `y^t = f(x^t)`, ask the
/// update for `Δ`, and set `x^{t+1} = project(x^t + λΔ)`.
pub fn solve<M, U>(model: &M, y: &M::Obs, x0: &[f64], update: &U, cfg: &SolverConfig) -> Result<Trajectory<M::Obs>, FeedbackError>
where
    M: ForwardModel + ?Sized,
    U: UpdateFn<M> + ?Sized,
{
    cfg.validate()?;
    if let Some(limit) = update.stage_limit() {
        if limit < cfg.stages {
            return Err(FeedbackError::InvalidConfig(format!(
                "{} stages requested but only {limit} networks supplied",
                cfg.stages
            )));
        }
    }
    let dim = model.dim();
    if x0.len() != dim {
        return Err(FeedbackError::EstimateLength {
            expected: dim,
            actual: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    model.project(&mut x);

    let mut traj = Trajectory {
        states: vec![x.clone()],
        energies: Vec::with_capacity(cfg.stages + 1),
        steps: Vec::with_capacity(cfg.stages),
        observations: Vec::new(),
        converged: false,
        forward_calls: 0,
        update_calls: 0,
    };
    // y^t of the current state when already known from a damped step
    let mut current: Option<(M::Obs, f64)> = None;

    for stage in 0..cfg.stages {
        let t0 = Instant::now();
        let mut forward_calls = 0;
        let (y_t, e_t) = match current.take() {
            Some(c) => c,
            None => {
                let sim = model.simulate(&x);
                let e = model.data_energy(&sim, y);
                forward_calls += 1;
                traj.energies.push(e);
                (sim, e)
            }
        };
        let mut forward_ms = ms(t0);

        let t1 = Instant::now();
        let delta = update.delta(model, stage, &x, &y_t, y)?;
        let update_ms = ms(t1);
        traj.update_calls += 1;
        if delta.len() != dim {
            return Err(FeedbackError::UpdateLength {
                stage,
                expected: dim,
                actual: delta.len(),
            });
        }
        if !delta.iter().all(|d| d.is_finite()) {
            return Err(FeedbackError::NonFiniteUpdate { stage });
        }
        if cfg.record_observations {
            traj.observations.push(y_t.clone());
        }

        let (next, lambda, stalled) = if cfg.damping {
            let t2 = Instant::now();
            let step = adaptive_step(model, &x, &delta, y, e_t, cfg.lambda_floor).map_err(|e| match e {
                FeedbackError::NonFiniteEnergy { lambda } => FeedbackError::NonFiniteEnergyAt { stage, lambda },
                other => other,
            })?;
            forward_ms += ms(t2);
            forward_calls += step.evaluations;
            traj.energies.push(step.energy);
            current = Some(match step.obs {
                Some(obs) => (obs, step.energy),
                None => (y_t, e_t),
            });
            (step.x, step.lambda, step.stalled)
        } else {
            let mut next: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
            model.project(&mut next);
            (next, 1.0, false)
        };

        traj.forward_calls += forward_calls;
        traj.steps.push(StepRecord {
            lambda,
            stalled,
            forward_calls,
            forward_ms,
            update_ms,
        });
        let moved = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        x = next;
        traj.states.push(x.clone());
        if !stalled && cfg.tolerance.is_some_and(|tol| moved < tol) {
            traj.converged = true;
            break;
        }
    }

    match current {
        Some((obs, _)) => {
            if cfg.record_observations {
                traj.observations.push(obs);
            }
        }
        None if cfg.evaluate_final => {
            let sim = model.simulate(&x);
            traj.forward_calls += 1;
            traj.energies.push(model.data_energy(&sim, y));
            if cfg.record_observations {
                traj.observations.push(sim);
            }
        }
        None => {}
    }
    Ok(traj)
}

/// Mean per-stage cost of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeBreakdown {
    pub forward_ms: f64,
    pub update_ms: f64,
    pub total_ms: f64,
}

pub fn runtime_breakdown<O>(traj: &Trajectory<O>) -> Result<RuntimeBreakdown, FeedbackError> {
    if traj.steps.is_empty() {
        return Err(FeedbackError::EmptyTrajectory);
    }
    let n = traj.steps.len() as f64;
    let forward_ms = traj.steps.iter().map(|s| s.forward_ms).sum::<f64>() / n;
    let update_ms = traj.steps.iter().map(|s| s.update_ms).sum::<f64>() / n;
    Ok(RuntimeBreakdown {
        forward_ms,
        update_ms,
        total_ms: forward_ms + update_ms,
    })
}
