//! Renders a cube in the three modes and prints the silhouette as text.
//!
//! Pass a directory to also write PGM/PPM files.

use deep_feedback::geometry::{axis_angle_to_quat, Pose6DoF, Vec3};
use deep_feedback::render::{make_primitive, rasterize, Camera, Light, Primitive, RenderMode};

fn main() {
    let mesh = make_primitive(Primitive::Cube, 0.5).unwrap();
    let cam = Camera::with_resolution(32, 32).unwrap();
    let q = axis_angle_to_quat(Vec3::new(1.0, 1.0, 0.0), 35.0).unwrap();
    let pose = Pose6DoF::new(q, Vec3::new(0.05, 0.0, -1.5));

    let sil = rasterize(&mesh, &pose, &cam, &RenderMode::Silhouette);
    for row in sil.data.chunks(sil.width) {
        let line: String = row.iter().map(|&v| if v > 0.5 { '#' } else { '.' }).collect();
        println!("{line}");
    }
    println!("coverage {} px", sil.coverage());

    let depth = rasterize(&mesh, &pose, &cam, &RenderMode::Depth);
    let near = depth.data.iter().copied().filter(|&d| d > 0.0).fold(f32::INFINITY, f32::min);
    println!("nearest depth {near:.3} m");

    let light = Light::Directional {
        direction: Vec3::new(0.3, -0.4, -1.0).normalized().unwrap(),
        intensity: 1.0,
    };
    let shaded = rasterize(&mesh, &pose, &cam, &RenderMode::Lambertian { light, albedo: [0.9, 0.7, 0.5] });

    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::Path::new(&dir);
        std::fs::create_dir_all(dir).unwrap();
        sil.write_pnm(&dir.join("silhouette.pgm")).unwrap();
        shaded.write_pnm(&dir.join("shaded.ppm")).unwrap();
        println!("wrote images to {}", dir.display());
    }
}
