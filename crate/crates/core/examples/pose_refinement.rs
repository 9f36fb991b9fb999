//! Desk-sized pose estimation from 32×32 silhouettes of a cube: stage-wise
//! training, then per-stage error curves for the learned solver.

use deep_feedback::pipeline::{bench, BenchSettings, Mode, Timing};
use deep_feedback::render::Primitive;
use deep_feedback::tasks::{generate_dataset, PoseTask, Task};
use deep_feedback::training::{train_stagewise, StagePlan};

fn main() {
    let task = PoseTask::new(vec![Primitive::Cube], 0.5, 32).unwrap();
    let data = generate_dataset(&task, 1000, 2).unwrap();
    let plan = StagePlan {
        epochs: 8,
        ..StagePlan::new(3, 2)
    };
    let trained = train_stagewise(&task, &data, &plan).unwrap();
    for log in trained.logs.iter().filter(|l| l.epoch % 4 == 0) {
        println!("stage {} epoch {:>2}  train {:.5}  val {:.5}", log.stage, log.epoch, log.train_loss, log.val_loss);
    }

    let mut settings = BenchSettings::for_task(task.kind());
    settings.stop.max_iter = 40;
    let modes = [Mode::Regression, Mode::Feedback, Mode::FeedbackDamping, Mode::FeedbackThenLbfgs];
    let (report, _) = bench(&task, &data, &modes, Some(&trained.stage_networks()), &settings, Timing::Wall).unwrap();
    print!("{}", report.to_csv());
    for row in &report.rows {
        if !row.stage_medians.is_empty() {
            println!("{:<20} median rotation error per stage {:.2?}", row.method, row.stage_medians);
        }
    }
}
