use std::time::Instant;

use rayon::prelude::*;

use crate::classic::{
    fit_euler_prior, minimize_adam, minimize_lbfgs, AdamParams, GaussianEulerPrior, ModelEnergy, StopRule, DEFAULT_FD_STEP,
    POSE_FD_STEP,
};
use crate::feedback::{solve, ForwardModel, SolverConfig, StageNetworks, Trajectory};
use crate::geometry::Quat;
use crate::tasks::{MetricRow, ObsOf, Sample, Split, Task, TaskKind};

use super::config::{Mode, Timing};
use super::report::{aggregate, lower_median, BenchReport, ReportRow};
use super::PipelineError;

/// Knobs shared by every bench mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    /// Stages to unroll; defaults to the number of networks supplied.
    pub stages: Option<usize>,
    pub adam_lr: f64,
    pub lbfgs_memory: usize,
    pub stop: StopRule,
    /// Weight of the Euler-angle prior in the IK energy.
    pub prior_weight: f64,
    pub fd_step: f64,
}

impl BenchSettings {
    pub fn for_task(kind: TaskKind) -> Self {
        BenchSettings {
            stages: None,
            adam_lr: default_adam_lr(kind),
            lbfgs_memory: crate::classic::DEFAULT_LBFGS_MEMORY,
            stop: StopRule::default(),
            prior_weight: crate::classic::DEFAULT_PRIOR_WEIGHT,
            fd_step: default_fd_step(kind),
        }
    }
}

pub fn default_adam_lr(kind: TaskKind) -> f64 {
    match kind {
        TaskKind::Pose => 0.01,
        TaskKind::Light | TaskKind::Ik => 0.05,
    }
}

/// Silhouette and shading energies are piecewise constant at pixel scale,
/// so their differences need steps that move edges.
pub fn default_fd_step(kind: TaskKind) -> f64 {
    match kind {
        TaskKind::Pose | TaskKind::Light => POSE_FD_STEP,
        TaskKind::Ik => DEFAULT_FD_STEP,
    }
}

/// Outcome of one test instance under one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceResult {
    pub index: usize,
    pub x: Vec<f64>,
    pub metrics: MetricRow,
    pub steps: usize,
    pub forward_ms: f64,
    pub update_ms: f64,
    pub total_ms: f64,
    pub final_energy: f64,
    /// `E_data` along the feedback trajectory; empty for classic modes.
    pub energies: Vec<f64>,
    pub stalled: Vec<bool>,
    /// Primary metric of each feedback state `x^0 … x^T`.
    pub stage_errors: Vec<f64>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeResult {
    pub mode: Mode,
    pub instances: Vec<InstanceResult>,
}

/// Gaussian Euler prior over the training rotations of an IK dataset.
pub fn ik_prior<O>(samples: &[Sample<O>]) -> Result<GaussianEulerPrior, PipelineError> {
    let rots: Vec<Vec<Quat>> = samples
        .iter()
        .filter(|s| s.split == Split::Train)
        .map(|s| s.x_gt.chunks(4).map(Quat::from_slice).collect())
        .collect();
    fit_euler_prior(&rots).map_err(|e| PipelineError::Report(e.to_string()))
}

fn feedback_instance<T: Task>(
    task: &T,
    s: &Sample<ObsOf<T>>,
    nets: &StageNetworks,
    cfg: &SolverConfig,
) -> Result<(InstanceResult, Trajectory<ObsOf<T>>), PipelineError> {
    let model = task.model(s.variant);
    let traj = solve(model, &s.y, &task.initial_estimate(), nets, cfg)?;
    let forward_ms: f64 = traj.steps.iter().map(|r| r.forward_ms).sum();
    let update_ms: f64 = traj.steps.iter().map(|r| r.update_ms).sum();
    let k = task.primary_metric();
    let x = traj.final_state().to_vec();
    let result = InstanceResult {
        index: s.index,
        metrics: task.metrics(s.variant, &x, &s.x_gt),
        steps: traj.steps.len(),
        forward_ms,
        update_ms,
        // Loop bookkeeping outside the two timed phases is not attributed.
        total_ms: forward_ms + update_ms,
        final_energy: traj.final_energy().unwrap_or(f64::NAN),
        energies: traj.energies.clone(),
        stalled: traj.steps.iter().map(|r| r.stalled).collect(),
        stage_errors: traj
            .states
            .iter()
            .map(|st| task.metrics(s.variant, st, &s.x_gt).values[k])
            .collect(),
        violations: traj.monotonicity_violations(),
        x,
    };
    Ok((result, traj))
}

enum Classic {
    Adam,
    Lbfgs,
}

fn classic_instance<T: Task>(
    task: &T,
    s: &Sample<ObsOf<T>>,
    which: Classic,
    x0: &[f64],
    prior: Option<&GaussianEulerPrior>,
    settings: &BenchSettings,
) -> Result<(Vec<f64>, usize, f64, f64), PipelineError> {
    let model = task.model(s.variant);
    let mut energy = ModelEnergy::new(model, &s.y);
    energy.fd_step = settings.fd_step;
    energy.prior = prior.map(|p| (p, settings.prior_weight));
    let start = Instant::now();
    let r = match which {
        Classic::Adam => minimize_adam(&energy, x0, AdamParams::new(settings.adam_lr), &settings.stop),
        Classic::Lbfgs => minimize_lbfgs(&energy, x0, settings.lbfgs_memory, &settings.stop),
    }
    .map_err(|e| PipelineError::Report(e.to_string()))?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let mut x = r.x;
    model.project(&mut x);
    let e = energy.data_energy(&x);
    Ok((x, r.iterations, e, ms))
}

fn classic_result<T: Task>(task: &T, s: &Sample<ObsOf<T>>, x: Vec<f64>, steps: usize, e: f64, ms: f64) -> InstanceResult {
    InstanceResult {
        index: s.index,
        metrics: task.metrics(s.variant, &x, &s.x_gt),
        steps,
        forward_ms: ms,
        update_ms: 0.0,
        total_ms: ms,
        final_energy: e,
        energies: Vec::new(),
        stalled: Vec::new(),
        stage_errors: Vec::new(),
        violations: 0,
        x,
    }
}

/// Runs `mode` over `instances` in parallel; results keep input order.
pub fn run_mode<T: Task>(
    task: &T,
    instances: &[&Sample<ObsOf<T>>],
    mode: Mode,
    nets: Option<&StageNetworks>,
    prior: Option<&GaussianEulerPrior>,
    settings: &BenchSettings,
) -> Result<ModeResult, PipelineError> {
    let need = || {
        nets.ok_or_else(|| PipelineError::Usage(format!("mode {} needs --weights", mode.name())))
    };
    let stages = |n: &StageNetworks| settings.stages.unwrap_or(n.networks().len());
    let prior = if task.kind() == TaskKind::Ik { prior } else { None };
    let results: Result<Vec<InstanceResult>, PipelineError> = match mode {
        Mode::Feedback | Mode::FeedbackDamping => {
            let nets = need()?;
            let cfg = SolverConfig::new(stages(nets)).with_damping(mode == Mode::FeedbackDamping);
            instances
                .par_iter()
                .map(|s| feedback_instance(task, s, nets, &cfg).map(|r| r.0))
                .collect()
        }
        Mode::Regression => {
            let first = need()?
                .network(0)
                .ok_or(PipelineError::Usage("weights directory holds no stage-0 network".into()))?;
            let single = StageNetworks::per_stage(vec![first.clone()]);
            let cfg = SolverConfig::new(1);
            instances
                .par_iter()
                .map(|s| feedback_instance(task, s, &single, &cfg).map(|r| r.0))
                .collect()
        }
        Mode::Adam | Mode::Lbfgs => instances
            .par_iter()
            .map(|s| {
                let which = if mode == Mode::Adam { Classic::Adam } else { Classic::Lbfgs };
                let (x, steps, e, ms) = classic_instance(task, s, which, &task.initial_estimate(), prior, settings)?;
                Ok(classic_result(task, s, x, steps, e, ms))
            })
            .collect(),
        Mode::FeedbackThenLbfgs => {
            let nets = need()?;
            let cfg = SolverConfig::new(stages(nets));
            instances
                .par_iter()
                .map(|s| {
                    let (mut fb, _) = feedback_instance(task, s, nets, &cfg)?;
                    let (x, steps, e, ms) = classic_instance(task, s, Classic::Lbfgs, &fb.x, prior, settings)?;
                    // With a prior the refined point may trade data energy
                    // for plausibility; keep whichever fits the data better.
                    if e <= fb.final_energy {
                        fb.metrics = task.metrics(s.variant, &x, &s.x_gt);
                        fb.x = x;
                        fb.final_energy = e;
                    }
                    fb.steps += steps;
                    fb.forward_ms += ms;
                    fb.total_ms += ms;
                    Ok(fb)
                })
                .collect()
        }
    };
    Ok(ModeResult {
        mode,
        instances: results?,
    })
}

/// Collapses one mode's instances into a report row.
pub fn report_row(result: &ModeResult, timing: Timing) -> Result<ReportRow, PipelineError> {
    let inst = &result.instances;
    let rows: Vec<MetricRow> = inst.iter().map(|r| r.metrics.clone()).collect();
    let summary = aggregate(&rows)?;
    let n = inst.len() as f64;
    let mean = |f: &dyn Fn(&InstanceResult) -> f64| inst.iter().map(f).sum::<f64>() / n;
    let (time_ms, forward_ms, update_ms) = match timing {
        Timing::Wall => (mean(&|r| r.total_ms), mean(&|r| r.forward_ms), mean(&|r| r.update_ms)),
        Timing::None => (0.0, 0.0, 0.0),
    };
    let curve_len = inst.iter().map(|r| r.stage_errors.len()).min().unwrap_or(0);
    let stage_medians = (0..curve_len)
        .map(|t| lower_median(&inst.iter().map(|r| r.stage_errors[t]).collect::<Vec<_>>()).expect("nonempty"))
        .collect();
    Ok(ReportRow {
        method: result.mode.name().to_string(),
        steps: mean(&|r| r.steps as f64),
        time_ms,
        summary,
        forward_ms,
        update_ms,
        monotonicity_violations: inst.iter().map(|r| r.violations).sum(),
        stage_medians,
    })
}

/// Runs every mode on the test split and assembles the report.
pub fn bench<T: Task>(
    task: &T,
    samples: &[Sample<ObsOf<T>>],
    modes: &[Mode],
    nets: Option<&StageNetworks>,
    settings: &BenchSettings,
    timing: Timing,
) -> Result<(BenchReport, Vec<ModeResult>), PipelineError> {
    let test: Vec<&Sample<ObsOf<T>>> = samples.iter().filter(|s| s.split == Split::Test).collect();
    if test.is_empty() {
        return Err(PipelineError::Report("dataset has no test samples".into()));
    }
    let prior = match task.kind() {
        TaskKind::Ik if modes.iter().any(|m| matches!(m, Mode::Adam | Mode::Lbfgs | Mode::FeedbackThenLbfgs)) => {
            Some(ik_prior(samples)?)
        }
        _ => None,
    };
    let mut results = Vec::with_capacity(modes.len());
    let mut rows = Vec::with_capacity(modes.len());
    for &mode in modes {
        let r = run_mode(task, &test, mode, nets, prior.as_ref(), settings)?;
        rows.push(report_row(&r, timing)?);
        results.push(r);
    }
    let names = task.metric_names();
    let report = BenchReport {
        metric_names: names.iter().map(|s| s.to_string()).collect(),
        curve_metric: names[task.primary_metric()].to_string(),
        rows,
    };
    Ok((report, results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{random_chain, FkConvention};
    use crate::tasks::{generate_dataset, IkTask};
    use crate::training::{train_stagewise, StagePlan};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ik_modes_end_to_end() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let task = IkTask::new(random_chain(&mut rng, 3), FkConvention::World);
        let data = generate_dataset(&task, 30, 3).unwrap();
        let plan = StagePlan {
            epochs: 3,
            ..StagePlan::new(2, 0)
        };
        let nets = train_stagewise(&task, &data, &plan).unwrap().stage_networks();
        let mut settings = BenchSettings::for_task(TaskKind::Ik);
        settings.stop.max_iter = 20;
        let (report, results) = bench(&task, &data, &Mode::ALL, Some(&nets), &settings, Timing::None).unwrap();
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + Mode::ALL.len());
        let regression = report.rows.iter().find(|r| r.method == "regression").unwrap();
        assert_eq!(regression.steps, 1.0);
        let damped = report.rows.iter().find(|r| r.method == "feedback+damping").unwrap();
        assert_eq!(damped.monotonicity_violations, 0);
        let fb = &results[0].instances;
        let combo = &results[5].instances;
        for (a, b) in fb.iter().zip(combo) {
            assert!(b.final_energy <= a.final_energy);
        }
        let (again, _) = bench(&task, &data, &Mode::ALL, Some(&nets), &settings, Timing::None).unwrap();
        assert_eq!(again.to_csv(), csv);
    }
}
