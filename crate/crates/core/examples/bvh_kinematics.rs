//! Parses a BVH skeleton, poses it from a motion frame and runs forward
//! kinematics in both frame conventions.

use deep_feedback::kinematics::{forward_kinematics_with, load_bvh, local_to_world, FkConvention};

const BVH: &str = "HIERARCHY
ROOT Hips
{
  OFFSET 0 1 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Spine
  {
    OFFSET 0 0.4 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    JOINT Neck
    {
      OFFSET 0 0.4 0
      CHANNELS 3 Zrotation Xrotation Yrotation
      End Site
      {
        OFFSET 0 0.2 0
      }
    }
  }
}
MOTION
Frames: 1
Frame Time: 0.033333
0 1 0 0 0 0 30 0 0 0 20 0
";

fn main() {
    let bvh = load_bvh(BVH).unwrap();
    let skel = &bvh.skeleton;
    let local = bvh.frame_local_rotations(0).unwrap();
    let world = local_to_world(skel, &local).unwrap();

    let a = forward_kinematics_with(skel, &local, FkConvention::Local).unwrap();
    let b = forward_kinematics_with(skel, &world, FkConvention::World).unwrap();
    for (j, name) in skel.names().iter().enumerate() {
        println!("{name:>8}  local {:?}", a[j]);
        println!("{:>8}  world {:?}", "", b[j]);
    }
}
