//! Dataset directories.
//!
//! `manifest.txt` is line oriented:
//!
//! ```text
//! # deep-feedback dataset v1
//! task = pose
//! seed = 7
//! count = 100
//! resolution = 64
//! shapes = cube icosphere2 cylinder16
//! size = 0.5
//! sample <index> <split> <variant> <x_gt values…>
//! ```
//!
//! Light datasets carry `light = directional|point` and `resolution`; IK
//! datasets carry `convention = world|local` and one
//! `joint <name> <parent index or -> <x> <y> <z>` line per joint. Floats
//! are written in shortest round-trip form, so `x_gt` reloads bit-exactly
//! and observations are re-simulated from it. The `obs/` directory holds a
//! PGM, PPM or text file per sample for inspection.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::geometry::Vec3;
use crate::kinematics::{FkConvention, Skeleton};
use crate::render::{Image, Primitive};

use super::{IkTask, LightKind, LightTask, PoseTask, Sample, Split, TaskError, TaskKind};

pub const MANIFEST: &str = "manifest.txt";
const HEADER: &str = "# deep-feedback dataset v1";

/// Everything needed to rebuild a task's forward models.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    Pose {
        shapes: Vec<Primitive>,
        size: f64,
        resolution: usize,
    },
    Light {
        kind: LightKind,
        resolution: usize,
    },
    Ik {
        skeleton: Skeleton,
        convention: FkConvention,
    },
}

impl TaskSpec {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskSpec::Pose { .. } => TaskKind::Pose,
            TaskSpec::Light { .. } => TaskKind::Light,
            TaskSpec::Ik { .. } => TaskKind::Ik,
        }
    }

    pub fn pose_task(&self) -> Option<Result<PoseTask, TaskError>> {
        match self {
            TaskSpec::Pose {
                shapes,
                size,
                resolution,
            } => Some(PoseTask::new(shapes.clone(), *size, *resolution)),
            _ => None,
        }
    }

    pub fn light_task(&self) -> Option<Result<LightTask, TaskError>> {
        match self {
            TaskSpec::Light { kind, resolution } => Some(LightTask::standard(*kind, *resolution)),
            _ => None,
        }
    }

    pub fn ik_task(&self) -> Option<IkTask> {
        match self {
            TaskSpec::Ik { skeleton, convention } => Some(IkTask::new(skeleton.clone(), *convention)),
            _ => None,
        }
    }

    fn write(&self, out: &mut String) {
        let _ = writeln!(out, "task = {}", self.kind().name());
        match self {
            TaskSpec::Pose {
                shapes,
                size,
                resolution,
            } => {
                let names: Vec<String> = shapes.iter().map(Primitive::name).collect();
                let _ = writeln!(out, "resolution = {resolution}");
                let _ = writeln!(out, "shapes = {}", names.join(" "));
                let _ = writeln!(out, "size = {size}");
            }
            TaskSpec::Light { kind, resolution } => {
                let _ = writeln!(out, "resolution = {resolution}");
                let _ = writeln!(out, "light = {}", kind.name());
            }
            TaskSpec::Ik { skeleton, convention } => {
                let _ = writeln!(out, "convention = {}", convention.name());
                for j in 0..skeleton.len() {
                    let r = skeleton.reference()[j];
                    let parent = skeleton.parent(j).map_or("-".to_string(), |p| p.to_string());
                    let _ = writeln!(out, "joint {} {parent} {} {} {}", skeleton.names()[j], r.x, r.y, r.z);
                }
            }
        }
    }
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub index: usize,
    pub split: Split,
    pub variant: usize,
    pub x_gt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: TaskSpec,
    pub seed: u64,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn records_from<O>(samples: &[Sample<O>]) -> Vec<Record> {
        samples
            .iter()
            .map(|s| Record {
                index: s.index,
                split: s.split,
                variant: s.variant,
                x_gt: s.x_gt.clone(),
            })
            .collect()
    }

    pub fn manifest_text(&self) -> String {
        let mut out = format!("{HEADER}\n");
        self.spec.write(&mut out);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "count = {}", self.records.len());
        for r in &self.records {
            let _ = write!(out, "sample {} {} {}", r.index, r.split.name(), r.variant);
            for v in &r.x_gt {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Dataset, TaskError> {
        let err = |line: usize, msg: String| TaskError::Manifest { line, msg };
        let mut kv = std::collections::BTreeMap::new();
        let mut joints = Vec::new();
        let mut records = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let mut words = l.split_whitespace();
            match words.next() {
                Some("sample") => {
                    let w: Vec<&str> = words.collect();
                    if w.len() < 4 {
                        return Err(err(line, "sample needs index, split, variant and values".into()));
                    }
                    let index = w[0].parse().map_err(|_| err(line, format!("bad index '{}'", w[0])))?;
                    let split = Split::parse(w[1]).ok_or_else(|| err(line, format!("bad split '{}'", w[1])))?;
                    let variant = w[2].parse().map_err(|_| err(line, format!("bad variant '{}'", w[2])))?;
                    let x_gt = w[3..]
                        .iter()
                        .map(|v| v.parse::<f64>().map_err(|_| err(line, format!("bad number '{v}'"))))
                        .collect::<Result<Vec<_>, _>>()?;
                    records.push(Record {
                        index,
                        split,
                        variant,
                        x_gt,
                    });
                }
                Some("joint") => {
                    let w: Vec<&str> = words.collect();
                    if w.len() != 5 {
                        return Err(err(line, "joint needs name, parent and three coordinates".into()));
                    }
                    let parent = if w[1] == "-" {
                        None
                    } else {
                        Some(w[1].parse::<usize>().map_err(|_| err(line, format!("bad parent '{}'", w[1])))?)
                    };
                    let c = w[2..]
                        .iter()
                        .map(|v| v.parse::<f64>().map_err(|_| err(line, format!("bad number '{v}'"))))
                        .collect::<Result<Vec<_>, _>>()?;
                    joints.push((w[0].to_string(), parent, Vec3::new(c[0], c[1], c[2]), line));
                }
                _ => {
                    let (k, v) = l
                        .split_once('=')
                        .ok_or_else(|| err(line, format!("expected 'key = value', found '{l}'")))?;
                    kv.insert(k.trim().to_string(), (v.trim().to_string(), line));
                }
            }
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| err(0, format!("missing key '{k}'")));
        let num = |k: &str| -> Result<usize, TaskError> {
            let (v, line) = get(k)?;
            v.parse().map_err(|_| err(*line, format!("bad value for '{k}'")))
        };
        let (task, task_line) = get("task")?;
        let spec = match TaskKind::parse(task).map_err(|e| err(*task_line, e.to_string()))? {
            TaskKind::Pose => {
                let (shapes, line) = get("shapes")?;
                let shapes = shapes
                    .split_whitespace()
                    .map(|s| Primitive::parse(s).ok_or_else(|| err(*line, format!("unknown shape '{s}'"))))
                    .collect::<Result<Vec<_>, _>>()?;
                let (size, line) = get("size")?;
                TaskSpec::Pose {
                    shapes,
                    size: size.parse().map_err(|_| err(*line, "bad size".into()))?,
                    resolution: num("resolution")?,
                }
            }
            TaskKind::Light => {
                let (kind, line) = get("light")?;
                TaskSpec::Light {
                    kind: LightKind::parse(kind).ok_or_else(|| err(*line, format!("unknown light '{kind}'")))?,
                    resolution: num("resolution")?,
                }
            }
            TaskKind::Ik => {
                let (conv, line) = get("convention")?;
                let convention =
                    FkConvention::parse(conv).ok_or_else(|| err(*line, format!("unknown convention '{conv}'")))?;
                let first = joints.first().map_or(0, |j| j.3);
                let skeleton = Skeleton::new(
                    joints.iter().map(|j| j.0.clone()).collect(),
                    joints.iter().map(|j| j.1).collect(),
                    joints.iter().map(|j| j.2).collect(),
                )
                .map_err(|e| err(first, e.to_string()))?;
                TaskSpec::Ik { skeleton, convention }
            }
        };
        let (seed, line) = get("seed")?;
        let seed = seed.parse().map_err(|_| err(*line, "bad seed".into()))?;
        let count = num("count")?;
        if count != records.len() {
            return Err(err(0, format!("count = {count} but {} sample lines", records.len())));
        }
        Ok(Dataset { spec, seed, records })
    }
}

/// Observation types that can be stored next to the manifest.
pub trait ObsFile: Sized {
    fn extension(&self) -> &'static str;
    fn to_bytes(&self) -> Vec<u8>;
}

impl ObsFile for Image {
    fn extension(&self) -> &'static str {
        if self.channels == 1 {
            "pgm"
        } else {
            "ppm"
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.to_pnm()
    }
}

impl ObsFile for Vec<Vec3> {
    fn extension(&self) -> &'static str {
        "txt"
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut s = String::new();
        for p in self {
            let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
        }
        s.into_bytes()
    }
}

/// Parses joint positions written by [`ObsFile::to_bytes`], one `x y z` per
/// line.
pub fn parse_positions(text: &str) -> Result<Vec<Vec3>, TaskError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|w| w.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| TaskError::Manifest {
                    line: i + 1,
                    msg: "malformed number".into(),
                })?;
            if v.len() != 3 {
                return Err(TaskError::Manifest {
                    line: i + 1,
                    msg: format!("expected 3 coordinates, found {}", v.len()),
                });
            }
            Ok(Vec3::new(v[0], v[1], v[2]))
        })
        .collect()
}

fn io(e: std::io::Error) -> TaskError {
    TaskError::Io(e.to_string())
}

/// Writes `manifest.txt` and `obs/<index>.<ext>` under `dir`.
pub fn save_dataset<O: ObsFile>(dir: &Path, spec: &TaskSpec, seed: u64, samples: &[Sample<O>]) -> Result<(), TaskError> {
    let obs_dir = dir.join("obs");
    fs::create_dir_all(&obs_dir).map_err(io)?;
    let ds = Dataset {
        spec: spec.clone(),
        seed,
        records: Dataset::records_from(samples),
    };
    fs::write(dir.join(MANIFEST), ds.manifest_text()).map_err(io)?;
    for s in samples {
        let name = format!("{:05}.{}", s.index, s.y.extension());
        fs::write(obs_dir.join(name), s.y.to_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, TaskError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| TaskError::Io(format!("{}: {e}", path.display())))?;
    Dataset::parse(&text)
}
