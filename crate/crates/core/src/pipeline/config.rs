//! Flat `key = value` run configuration. Command-line flags use the same
//! keys and override the file.
//!
//! | key | meaning |
//! |---|---|
//! | `task` | `pose`, `light` or `ik` |
//! | `data` | dataset directory |
//! | `out` | output directory (generate-data, train) or report file (bench) |
//! | `weights` | directory holding `stage{t}.dfnw` |
//! | `seed`, `count` | dataset seed and size |
//! | `mode` | bench modes, comma separated |
//! | `stages` | unrolled stage count |
//! | `resolution` | image side for pose and light |
//! | `shapes` | pose primitives, comma separated (`cube`, `icosphere2`, `cylinder16`, …) |
//! | `size` | pose primitive size in metres |
//! | `light` | `directional` or `point` |
//! | `joints`, `bvh`, `convention` | IK skeleton: random chain length, or a BVH file; `world` or `local` FK |
//! | `epochs`, `patience`, `batch`, `lr`, `lr_decay`, `shared` | training |
//! | `damping`, `timing` | solver damping; `wall` or `none` timing columns |
//! | `max_iter`, `opt_patience`, `adam_lr`, `lbfgs_memory`, `prior_weight` | classic baselines |
//! | `obs`, `variant`, `update`, `target`, `dump_trajectory` | solve |

use std::path::PathBuf;

use crate::kinematics::FkConvention;
use crate::render::Primitive;
use crate::tasks::{LightKind, TaskKind};

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Feedback,
    FeedbackDamping,
    Regression,
    Adam,
    Lbfgs,
    FeedbackThenLbfgs,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Feedback,
        Mode::FeedbackDamping,
        Mode::Regression,
        Mode::Adam,
        Mode::Lbfgs,
        Mode::FeedbackThenLbfgs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Feedback => "feedback",
            Mode::FeedbackDamping => "feedback+damping",
            Mode::Regression => "regression",
            Mode::Adam => "adam",
            Mode::Lbfgs => "lbfgs",
            Mode::FeedbackThenLbfgs => "feedback-then-lbfgs",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn needs_weights(self) -> bool {
        !matches!(self, Mode::Adam | Mode::Lbfgs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Timing {
    #[default]
    Wall,
    /// Time columns are written as zero, for byte-identical reports.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateKind {
    #[default]
    Learned,
    Zero,
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Option<TaskKind>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub seed: u64,
    pub count: usize,
    pub modes: Vec<Mode>,
    pub stages: Option<usize>,
    pub resolution: usize,
    pub shapes: Vec<Primitive>,
    pub size: f64,
    pub light: LightKind,
    pub joints: usize,
    pub bvh: Option<PathBuf>,
    pub convention: FkConvention,
    pub epochs: usize,
    pub patience: usize,
    pub batch: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub shared: bool,
    pub damping: bool,
    pub timing: Timing,
    pub max_iter: usize,
    pub opt_patience: usize,
    pub adam_lr: Option<f64>,
    pub lbfgs_memory: usize,
    pub prior_weight: f64,
    pub obs: Option<PathBuf>,
    pub variant: usize,
    pub update: UpdateKind,
    pub target: Option<Vec<f64>>,
    pub dump_trajectory: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: None,
            data: None,
            out: None,
            weights: None,
            seed: 0,
            count: 100,
            modes: vec![Mode::Feedback],
            stages: None,
            resolution: 64,
            shapes: vec![
                Primitive::Cube,
                Primitive::Icosphere { subdivisions: 2 },
                Primitive::Cylinder { segments: 16 },
            ],
            size: 0.5,
            light: LightKind::Directional,
            joints: 8,
            bvh: None,
            convention: FkConvention::World,
            epochs: 50,
            patience: 10,
            batch: 32,
            lr: 1e-3,
            lr_decay: 0.95,
            shared: false,
            damping: false,
            timing: Timing::Wall,
            max_iter: 500,
            opt_patience: 20,
            adam_lr: None,
            lbfgs_memory: crate::classic::DEFAULT_LBFGS_MEMORY,
            prior_weight: crate::classic::DEFAULT_PRIOR_WEIGHT,
            obs: None,
            variant: 0,
            update: UpdateKind::Learned,
            target: None,
            dump_trajectory: None,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, PipelineError> {
    v.parse()
        .map_err(|_| PipelineError::Usage(format!("{key}: cannot parse '{v}'")))
}

fn flag(key: &str, v: &str) -> Result<bool, PipelineError> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(PipelineError::Usage(format!("{key}: expected true or false, got '{v}'"))),
    }
}

impl RunConfig {
    /// Sets one key. Unknown keys and malformed values are usage errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let v = value.trim();
        let usage = |m: String| PipelineError::Usage(m);
        match key.trim().replace('-', "_").as_str() {
            "task" => self.task = Some(TaskKind::parse(v).map_err(|_| usage(format!("unknown task '{v}'")))?),
            "data" => self.data = Some(v.into()),
            "out" => self.out = Some(v.into()),
            "weights" => self.weights = Some(v.into()),
            "seed" => self.seed = num("seed", v)?,
            "count" => self.count = num("count", v)?,
            "mode" => {
                self.modes = v
                    .split(',')
                    .map(|m| Mode::parse(m.trim()).ok_or_else(|| usage(format!("unknown mode '{m}'"))))
                    .collect::<Result<_, _>>()?
            }
            "stages" => self.stages = Some(num("stages", v)?),
            "resolution" => self.resolution = num("resolution", v)?,
            "shapes" => {
                self.shapes = v
                    .split(',')
                    .map(|s| Primitive::parse(s.trim()).ok_or_else(|| usage(format!("unknown shape '{s}'"))))
                    .collect::<Result<_, _>>()?
            }
            "size" => self.size = num("size", v)?,
            "light" => self.light = LightKind::parse(v).ok_or_else(|| usage(format!("unknown light '{v}'")))?,
            "joints" => self.joints = num("joints", v)?,
            "bvh" => self.bvh = Some(v.into()),
            "convention" => {
                self.convention = FkConvention::parse(v).ok_or_else(|| usage(format!("unknown convention '{v}'")))?
            }
            "epochs" => self.epochs = num("epochs", v)?,
            "patience" => self.patience = num("patience", v)?,
            "batch" => self.batch = num("batch", v)?,
            "lr" => self.lr = num("lr", v)?,
            "lr_decay" => self.lr_decay = num("lr_decay", v)?,
            "shared" => self.shared = flag("shared", v)?,
            "damping" => self.damping = flag("damping", v)?,
            "timing" => {
                self.timing = match v {
                    "wall" => Timing::Wall,
                    "none" => Timing::None,
                    _ => return Err(usage(format!("timing: expected wall or none, got '{v}'"))),
                }
            }
            "max_iter" => self.max_iter = num("max_iter", v)?,
            "opt_patience" => self.opt_patience = num("opt_patience", v)?,
            "adam_lr" => self.adam_lr = Some(num("adam_lr", v)?),
            "lbfgs_memory" => self.lbfgs_memory = num("lbfgs_memory", v)?,
            "prior_weight" => self.prior_weight = num("prior_weight", v)?,
            "obs" => self.obs = Some(v.into()),
            "variant" => self.variant = num("variant", v)?,
            "update" => {
                self.update = match v {
                    "learned" => UpdateKind::Learned,
                    "zero" => UpdateKind::Zero,
                    "oracle" => UpdateKind::Oracle,
                    _ => return Err(usage(format!("update: expected learned, zero or oracle, got '{v}'"))),
                }
            }
            "target" => {
                self.target = Some(
                    v.split(',')
                        .map(|t| num::<f64>("target", t.trim()))
                        .collect::<Result<_, _>>()?,
                )
            }
            "dump_trajectory" => self.dump_trajectory = Some(v.into()),
            other => return Err(usage(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| PipelineError::Config {
                line: i + 1,
                msg: "expected 'key = value'".into(),
            })?;
            self.set(k, v).map_err(|e| PipelineError::Config {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<RunConfig, PipelineError> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn require_task(&self) -> Result<TaskKind, PipelineError> {
        self.task.ok_or_else(|| PipelineError::Usage("--task is required".into()))
    }

    pub fn require_path<'a>(&'a self, p: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf, PipelineError> {
        p.as_ref().ok_or_else(|| PipelineError::Usage(format!("--{} is required", key.replace('_', "-"))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_and_overrides() {
        let mut c = RunConfig::parse("# bench\ntask = ik\nmode = adam, lbfgs\nseed = 7\ntiming = none\n").unwrap();
        assert_eq!(c.task, Some(TaskKind::Ik));
        assert_eq!(c.modes, vec![Mode::Adam, Mode::Lbfgs]);
        c.set("seed", "9").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.timing, Timing::None);
    }

    #[test]
    fn errors_name_the_line() {
        match RunConfig::parse("task = pose\nbogus = 1\n") {
            Err(PipelineError::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse("task = moon"), Err(PipelineError::Config { line: 1, .. })));
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(Mode::parse(m.name()), Some(m));
        }
    }
}
