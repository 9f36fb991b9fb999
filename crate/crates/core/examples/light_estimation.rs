//! Recovers a directional light from shaded renderings of a sphere and a
//! cube.

use deep_feedback::pipeline::{bench, BenchSettings, Mode, Timing};
use deep_feedback::tasks::{generate_dataset, LightKind, LightTask, Task};
use deep_feedback::training::{train_stagewise, StagePlan};

fn main() {
    let task = LightTask::standard(LightKind::Directional, 24).unwrap();
    let data = generate_dataset(&task, 300, 3).unwrap();
    let plan = StagePlan {
        epochs: 8,
        ..StagePlan::new(4, 3)
    };
    let nets = train_stagewise(&task, &data, &plan).unwrap().stage_networks();
    let mut settings = BenchSettings::for_task(task.kind());
    settings.stop.max_iter = 30;
    let modes = [Mode::Regression, Mode::Feedback, Mode::FeedbackDamping];
    let (report, results) = bench(&task, &data, &modes, Some(&nets), &settings, Timing::Wall).unwrap();
    print!("{}", report.to_csv());
    let first = &results[1].instances[0];
    println!("sample {}: estimated direction {:.3?}", first.index, first.x);
}
