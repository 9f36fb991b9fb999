//! Trains a three-stage IK solver on a random chain and compares it with
//! single-shot regression and L-BFGS.

use deep_feedback::pipeline::{bench, BenchSettings, Mode, Timing};
use deep_feedback::kinematics::{random_chain, FkConvention};
use deep_feedback::tasks::{generate_dataset, IkTask, Task};
use deep_feedback::training::{train_stagewise, StagePlan};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let skel = random_chain(&mut ChaCha8Rng::seed_from_u64(1), 6);
    let task = IkTask::new(skel, FkConvention::World);
    let data = generate_dataset(&task, 600, 1).unwrap();
    let plan = StagePlan {
        epochs: 20,
        ..StagePlan::new(3, 1)
    };
    let trained = train_stagewise(&task, &data, &plan).unwrap();
    println!("mean training angular error per stage: {:?}", trained.train_error);

    let mut settings = BenchSettings::for_task(task.kind());
    settings.stop.max_iter = 100;
    let modes = [Mode::Regression, Mode::Feedback, Mode::FeedbackDamping, Mode::Lbfgs];
    let (report, _) = bench(&task, &data, &modes, Some(&trained.stage_networks()), &settings, Timing::Wall).unwrap();
    print!("{}", report.to_csv());
}
