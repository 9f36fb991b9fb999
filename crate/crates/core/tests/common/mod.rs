//! Independent reference implementations shared by the property suites and
//! the acceptance run.
#![allow(dead_code)]

use deep_feedback::geometry::{Pose6DoF, Quat, Vec3};
use deep_feedback::kinematics::{FkConvention, Skeleton};
use deep_feedback::render::{screen_vertices, Camera, TriangleMesh, SUBPIXEL_SCALE};
use deep_feedback::tensornet::{LayerKind, Network, Tape, Tensor};
use rand::Rng;

// ---- rasterizer ----

fn sign(v: i128) -> i32 {
    (v > 0) as i32 - (v < 0) as i32
}

/// Sign of the edge function of `a → b` at `p + (ε, ε²)`.
fn perturbed_side(a: [i64; 2], b: [i64; 2], p: [i64; 2]) -> i32 {
    let (dx, dy) = ((b[0] - a[0]) as i128, (b[1] - a[1]) as i128);
    let e = dx * (p[1] - a[1]) as i128 - dy * (p[0] - a[0]) as i128;
    // d/dε of the edge function is −dy, d/dε² is dx
    [e, -dy, dx].into_iter().map(sign).find(|&s| s != 0).unwrap_or(0)
}

/// Pixel-centre coverage by brute force over every projected triangle.
/// Points exactly on an edge are decided by nudging the sample by
/// `(ε, ε²)`, right then down.
pub fn silhouette_oracle(mesh: &TriangleMesh, pose: &Pose6DoF, cam: &Camera) -> Vec<bool> {
    let tris: Vec<[[i64; 2]; 3]> = screen_vertices(mesh, pose, cam).into_iter().flatten().collect();
    let half = SUBPIXEL_SCALE / 2;
    let mut out = vec![false; cam.width * cam.height];
    for py in 0..cam.height {
        for px in 0..cam.width {
            let p = [px as i64 * SUBPIXEL_SCALE + half, py as i64 * SUBPIXEL_SCALE + half];
            out[py * cam.width + px] = tris.iter().any(|&[a, b, c]| {
                let area = (b[0] - a[0]) as i128 * (c[1] - a[1]) as i128 - (b[1] - a[1]) as i128 * (c[0] - a[0]) as i128;
                if area == 0 {
                    return false;
                }
                let s = sign(area);
                [(a, b), (b, c), (c, a)].iter().all(|&(u, v)| perturbed_side(u, v, p) == s)
            });
        }
    }
    out
}

/// Back-projects pixel coordinates at depth `d`.
pub fn unproject(cam: &Camera, u: f64, v: f64, d: f64) -> Vec3 {
    Vec3::new((u - cam.cx) * d / cam.fx, -(v - cam.cy) * d / cam.fy, -d)
}

/// Triangle soup of `faces` faces in front of the camera, partly off-screen.
pub fn random_soup<R: Rng>(rng: &mut R, cam: &Camera, faces: usize) -> TriangleMesh {
    let (w, h) = (cam.width as f64, cam.height as f64);
    let v: Vec<Vec3> = (0..3 * faces)
        .map(|_| {
            unproject(
                cam,
                rng.gen_range(-0.2 * w..1.2 * w),
                rng.gen_range(-0.2 * h..1.2 * h),
                rng.gen_range(1.0..4.0),
            )
        })
        .collect();
    let f = (0..faces).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
    TriangleMesh::new(v, f).unwrap()
}

// ---- forward kinematics ----

pub type Mat4 = [[f64; 4]; 4];

pub fn rot4(q: Quat) -> Mat4 {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y), 0.0],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x), 0.0],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y), 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

pub fn trans4(t: Vec3) -> Mat4 {
    [[1.0, 0.0, 0.0, t.x], [0.0, 1.0, 0.0, t.y], [0.0, 0.0, 1.0, t.z], [0.0, 0.0, 0.0, 1.0]]
}

pub fn mul4(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn origin(m: &Mat4) -> Vec3 {
    Vec3::new(m[0][3], m[1][3], m[2][3])
}

/// Joint positions from a chain of homogeneous transforms.
pub fn matrix_fk(skel: &Skeleton, q: &[Quat], conv: FkConvention) -> Vec<Vec3> {
    let n = skel.len();
    let mut frames: Vec<Mat4> = Vec::with_capacity(n);
    frames.push(mul4(&trans4(skel.reference()[0]), &rot4(q[0])));
    for j in 1..n {
        let p = skel.parent(j).unwrap();
        let f = match conv {
            // frame orientation is the bone's own world rotation
            FkConvention::World => mul4(&mul4(&trans4(origin(&frames[p])), &rot4(q[j])), &trans4(skel.offset(j))),
            // orientation accumulates down the chain
            FkConvention::Local => mul4(&mul4(&frames[p], &trans4(skel.offset(j))), &rot4(q[j])),
        };
        frames.push(f);
    }
    frames.iter().map(origin).collect()
}

pub fn random_unit_quat<R: Rng>(rng: &mut R) -> Quat {
    loop {
        let q = Quat::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 0.1 && n <= 1.0 {
            return Quat::new(q.w / n, q.x / n, q.y / n, q.z / n);
        }
    }
}

// ---- gradients ----

/// `|a − n| / max(|a|, |n|)`, with differences below `floor` counted as
/// exact.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    let d = (a - n).abs();
    if d <= floor {
        0.0
    } else {
        d / a.abs().max(n.abs())
    }
}

fn weighted_output(net: &Network<f64>, x: &[f64], aux: Option<&[f64]>, c: &[f64]) -> f64 {
    let mut tape = Tape::new();
    let out = net.forward_slice(&mut tape, x, aux).unwrap();
    out.iter().zip(c).map(|(o, w)| o * w).sum()
}

/// Worst relative error of the analytic gradient of `Σ c_i · out_i` with
/// respect to parameters, input and auxiliary input, against central
/// differences.
pub fn network_gradient_error(net: &mut Network<f64>, x: &[f64], aux: Option<&[f64]>, c: &[f64]) -> f64 {
    const H: f64 = 1e-6;
    const FLOOR: f64 = 1e-9;
    let mut tape = Tape::new();
    net.forward_slice(&mut tape, x, aux).unwrap();
    let mut grads = net.zero_grads();
    let ig = net.backward(&tape, c, &mut grads).unwrap();
    let mut worst: f64 = 0.0;

    for pi in 0..net.params().len() {
        for k in 0..net.params()[pi].len() {
            let orig = net.params()[pi].data()[k];
            net.params_mut()[pi].data_mut()[k] = orig + H;
            let up = weighted_output(net, x, aux, c);
            net.params_mut()[pi].data_mut()[k] = orig - H;
            let down = weighted_output(net, x, aux, c);
            net.params_mut()[pi].data_mut()[k] = orig;
            worst = worst.max(rel_err(grads[pi].data()[k], (up - down) / (2.0 * H), FLOOR));
        }
    }
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        xp[k] = x[k] + H;
        let up = weighted_output(net, &xp, aux, c);
        xp[k] = x[k] - H;
        let down = weighted_output(net, &xp, aux, c);
        xp[k] = x[k];
        worst = worst.max(rel_err(ig.input[k], (up - down) / (2.0 * H), FLOOR));
    }
    if let Some(a) = aux {
        let mut ap = a.to_vec();
        for k in 0..a.len() {
            ap[k] = a[k] + H;
            let up = weighted_output(net, x, Some(&ap), c);
            ap[k] = a[k] - H;
            let down = weighted_output(net, x, Some(&ap), c);
            ap[k] = a[k];
            worst = worst.max(rel_err(ig.aux[k], (up - down) / (2.0 * H), FLOOR));
        }
    }
    worst
}

/// The layer under test wrapped in a small network, with random parameters
/// and inputs.
pub struct GradCase {
    pub net: Network<f64>,
    pub x: Vec<f64>,
    pub aux: Option<Vec<f64>>,
    pub c: Vec<f64>,
}

pub const LAYER_NAMES: [&str; 6] = ["dense", "conv2d", "relu", "max-pool2d", "flatten", "concat-aux"];

pub fn grad_case<R: Rng>(rng: &mut R, layer: &str) -> GradCase {
    let ch = rng.gen_range(1..=3);
    let side = rng.gen_range(4..=7);
    let (shape, layers): (Vec<usize>, Vec<LayerKind>) = match layer {
        "dense" => {
            let (i, o) = (rng.gen_range(1..=12), rng.gen_range(1..=8));
            (vec![i], vec![LayerKind::Dense { inputs: i, outputs: o }])
        }
        "conv2d" => (
            vec![ch, side, side],
            vec![LayerKind::Conv2d {
                in_channels: ch,
                out_channels: rng.gen_range(1..=3),
                kernel: rng.gen_range(1..=3),
                stride: rng.gen_range(1..=2),
            }],
        ),
        "relu" => (vec![ch, side, side], vec![LayerKind::Relu]),
        "max-pool2d" => (vec![ch, side, side], vec![LayerKind::MaxPool2d { size: rng.gen_range(2..=3) }]),
        "flatten" => (
            vec![ch, side, side],
            vec![LayerKind::Flatten, LayerKind::Dense { inputs: ch * side * side, outputs: 3 }],
        ),
        "concat-aux" => {
            let (i, a) = (rng.gen_range(1..=6), rng.gen_range(1..=5));
            (
                vec![i],
                vec![LayerKind::ConcatAux { len: a }, LayerKind::Dense { inputs: i + a, outputs: 2 }],
            )
        }
        other => panic!("unknown layer {other}"),
    };
    let mut net = Network::<f64>::new(&shape, layers).unwrap();
    for p in net.params_mut() {
        for v in p.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let len: usize = shape.iter().product();
    // inputs away from zero keep ReLU kinks out of the difference stencil
    let x = (0..len)
        .map(|_| {
            let v: f64 = rng.gen_range(0.05..1.0);
            if rng.gen() { v } else { -v }
        })
        .collect();
    let aux = (net.aux_len() > 0).then(|| (0..net.aux_len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let c = (0..net.output_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GradCase { net, x, aux, c }
}

pub fn tensor(shape: &[usize], data: Vec<f32>) -> Tensor<f32> {
    Tensor::from_vec(shape, data).unwrap()
}
