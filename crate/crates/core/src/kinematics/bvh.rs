//! Subset of the BVH motion-capture format: `HIERARCHY` with `ROOT`, `JOINT`,
//! `End Site`, `OFFSET` and `CHANNELS`, followed by an optional `MOTION`
//! block.

use std::fmt::Write as _;

use crate::geometry::{axis_angle_to_quat, Quat, Vec3};

use super::{KinematicsError, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    fn parse(s: &str) -> Option<Channel> {
        Some(match s {
            "Xposition" => Channel::Xposition,
            "Yposition" => Channel::Yposition,
            "Zposition" => Channel::Zposition,
            "Xrotation" => Channel::Xrotation,
            "Yrotation" => Channel::Yrotation,
            "Zrotation" => Channel::Zrotation,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Xposition => "Xposition",
            Channel::Yposition => "Yposition",
            Channel::Zposition => "Zposition",
            Channel::Xrotation => "Xrotation",
            Channel::Yrotation => "Yrotation",
            Channel::Zrotation => "Zrotation",
        }
    }

    fn rotation_axis(self) -> Option<Vec3> {
        match self {
            Channel::Xrotation => Some(Vec3::X),
            Channel::Yrotation => Some(Vec3::Y),
            Channel::Zrotation => Some(Vec3::Z),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Motion {
    pub frame_time: f64,
    /// One row per frame, values in channel declaration order.
    pub frames: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvhFile {
    pub skeleton: Skeleton,
    /// Channels of each joint, in joint order. End sites have none.
    pub channels: Vec<Vec<Channel>>,
    pub motion: Option<Motion>,
}

impl BvhFile {
    pub fn channel_count(&self) -> usize {
        self.channels.iter().map(Vec::len).sum()
    }

    /// Per-joint Euler channels `(channel, degrees)` of one frame, in the
    /// declared order.
    pub fn frame_euler(&self, frame: usize) -> Option<Vec<Vec<(Channel, f64)>>> {
        let values = self.motion.as_ref()?.frames.get(frame)?;
        let mut k = 0;
        let mut out = Vec::with_capacity(self.channels.len());
        for chans in &self.channels {
            let mut joint = Vec::new();
            for &c in chans {
                if c.rotation_axis().is_some() {
                    joint.push((c, values[k]));
                }
                k += 1;
            }
            out.push(joint);
        }
        Some(out)
    }

    /// Local joint rotations of one frame: the channel rotations composed in
    /// declaration order, `R = R_c1 · R_c2 · R_c3`.
    pub fn frame_local_rotations(&self, frame: usize) -> Option<Vec<Quat>> {
        let euler = self.frame_euler(frame)?;
        Some(
            euler
                .iter()
                .map(|joint| {
                    joint.iter().fold(Quat::IDENTITY, |acc, &(c, deg)| {
                        let axis = c.rotation_axis().expect("rotation channel");
                        acc * axis_angle_to_quat(axis, deg).expect("unit axis")
                    })
                })
                .collect(),
        )
    }
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(lines: &[(usize, &'a str)]) -> Self {
        let items = lines
            .iter()
            .flat_map(|&(n, l)| l.split_whitespace().map(move |t| (n, t)))
            .collect();
        Tokens {
            items,
            pos: 0,
            last_line: lines.last().map_or(1, |l| l.0),
        }
    }

    fn line(&self) -> usize {
        self.items.get(self.pos).map_or(self.last_line, |t| t.0)
    }

    fn err(&self, msg: impl Into<String>) -> KinematicsError {
        KinematicsError::Bvh {
            line: self.line(),
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|t| t.1)
    }

    fn next(&mut self) -> Result<&'a str, KinematicsError> {
        let t = self.peek().ok_or_else(|| self.err("unexpected end of hierarchy"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: &str) -> Result<(), KinematicsError> {
        let line = self.line();
        let got = self.next()?;
        if got == want {
            Ok(())
        } else {
            Err(KinematicsError::Bvh {
                line,
                msg: format!("expected '{want}', found '{got}'"),
            })
        }
    }

    fn number(&mut self) -> Result<f64, KinematicsError> {
        let line = self.line();
        let t = self.next()?;
        t.parse().map_err(|_| KinematicsError::Bvh {
            line,
            msg: format!("malformed number '{t}'"),
        })
    }

    fn offset(&mut self) -> Result<Vec3, KinematicsError> {
        self.expect("OFFSET")?;
        Ok(Vec3::new(self.number()?, self.number()?, self.number()?))
    }
}

#[derive(Default)]
struct Builder {
    names: Vec<String>,
    parents: Vec<Option<usize>>,
    reference: Vec<Vec3>,
    channels: Vec<Vec<Channel>>,
}

fn parse_joint(t: &mut Tokens, b: &mut Builder, name: String, parent: Option<usize>) -> Result<(), KinematicsError> {
    t.expect("{")?;
    let offset = t.offset()?;
    let base = parent.map_or(Vec3::ZERO, |p| b.reference[p]);
    let me = b.names.len();
    b.names.push(name);
    b.parents.push(parent);
    b.reference.push(base + offset);
    b.channels.push(Vec::new());
    if t.peek() == Some("CHANNELS") {
        t.next()?;
        let line = t.line();
        let count = t.number()?;
        if count < 0.0 || count.fract() != 0.0 {
            return Err(KinematicsError::Bvh {
                line,
                msg: "channel count must be a non-negative integer".into(),
            });
        }
        for _ in 0..count as usize {
            let line = t.line();
            let name = t.next()?;
            let c = Channel::parse(name).ok_or_else(|| KinematicsError::Bvh {
                line,
                msg: format!("unknown channel '{name}'"),
            })?;
            b.channels[me].push(c);
        }
    }
    loop {
        let line = t.line();
        match t.next()? {
            "}" => return Ok(()),
            "JOINT" => {
                let name = t.next()?.to_string();
                parse_joint(t, b, name, Some(me))?;
            }
            "End" => {
                t.expect("Site")?;
                t.expect("{")?;
                let offset = t.offset()?;
                t.expect("}")?;
                let name = format!("{}_end", b.names[me]);
                b.names.push(name);
                b.parents.push(Some(me));
                b.reference.push(b.reference[me] + offset);
                b.channels.push(Vec::new());
            }
            other => {
                return Err(KinematicsError::Bvh {
                    line,
                    msg: format!("expected JOINT, End Site or '}}', found '{other}'"),
                })
            }
        }
    }
}

pub fn load_bvh(text: &str) -> Result<BvhFile, KinematicsError> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
    let motion_at = lines.iter().position(|(_, l)| l.trim() == "MOTION");
    let (hier, rest) = lines.split_at(motion_at.unwrap_or(lines.len()));

    let mut t = Tokens::new(hier);
    t.expect("HIERARCHY")?;
    t.expect("ROOT")?;
    let name = t.next()?.to_string();
    let mut b = Builder::default();
    parse_joint(&mut t, &mut b, name, None)?;
    if let Some(extra) = t.peek() {
        return Err(t.err(format!("unexpected '{extra}' after root joint")));
    }
    let skeleton = Skeleton::new(b.names, b.parents, b.reference).map_err(|e| KinematicsError::Bvh {
        line: 1,
        msg: e.to_string(),
    })?;
    let channel_count: usize = b.channels.iter().map(Vec::len).sum();

    let motion = if rest.is_empty() {
        None
    } else {
        Some(parse_motion(&rest[1..], rest[0].0, channel_count)?)
    };
    Ok(BvhFile {
        skeleton,
        channels: b.channels,
        motion,
    })
}

fn parse_motion(lines: &[(usize, &str)], motion_line: usize, channels: usize) -> Result<Motion, KinematicsError> {
    let mut it = lines.iter().filter(|(_, l)| !l.trim().is_empty());
    let bad = |line: usize, msg: &str| KinematicsError::Bvh {
        line,
        msg: msg.to_string(),
    };
    let &(n, l) = it.next().ok_or_else(|| bad(motion_line, "missing 'Frames:'"))?;
    let count: usize = l
        .trim()
        .strip_prefix("Frames:")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(n, "expected 'Frames: <count>'"))?;
    let &(n, l) = it.next().ok_or_else(|| bad(n, "missing 'Frame Time:'"))?;
    let frame_time: f64 = l
        .trim()
        .strip_prefix("Frame Time:")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(n, "expected 'Frame Time: <seconds>'"))?;
    let mut frames = Vec::with_capacity(count);
    let mut last = n;
    for &(n, l) in it {
        last = n;
        let values = l
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad(n, "malformed number in frame"))?;
        if values.len() != channels {
            return Err(bad(
                n,
                &format!("frame has {} values, hierarchy declares {channels} channels", values.len()),
            ));
        }
        frames.push(values);
    }
    if frames.len() != count {
        return Err(bad(last, &format!("expected {count} frames, found {}", frames.len())));
    }
    Ok(Motion { frame_time, frames })
}

/// Writes the hierarchy of `skel` in depth-first order. Joints whose name
/// ends in `_end` and that have no children become `End Site`s; every other
/// joint gets three rotation channels `Zrotation Xrotation Yrotation`.
pub fn write_bvh(skel: &Skeleton) -> String {
    let n = skel.len();
    let mut children = vec![Vec::new(); n];
    for j in 1..n {
        if let Some(p) = skel.parent(j) {
            children[p].push(j);
        }
    }
    let mut out = String::from("HIERARCHY\n");
    fn emit(skel: &Skeleton, children: &[Vec<usize>], j: usize, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        let o = if j == 0 { skel.reference()[0] } else { skel.offset(j) };
        if j != 0 && children[j].is_empty() && skel.names()[j].ends_with("_end") {
            let _ = writeln!(out, "{pad}End Site\n{pad}{{\n{pad}  OFFSET {} {} {}\n{pad}}}", o.x, o.y, o.z);
            return;
        }
        let kw = if j == 0 { "ROOT" } else { "JOINT" };
        let _ = writeln!(out, "{pad}{kw} {}\n{pad}{{", skel.names()[j]);
        let _ = writeln!(out, "{pad}  OFFSET {} {} {}", o.x, o.y, o.z);
        let _ = writeln!(out, "{pad}  CHANNELS 3 Zrotation Xrotation Yrotation");
        for &c in &children[j] {
            emit(skel, children, c, depth + 1, out);
        }
        let _ = writeln!(out, "{pad}}}");
    }
    emit(skel, &children, 0, 0, &mut out);
    out
}
