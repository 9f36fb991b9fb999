//! Rotations as unit quaternions: composition, angular distance and Euler
//! angles.

use deep_feedback::geometry::{axis_angle_to_quat, euler_from_quat, quat_angle, quat_from_euler, quat_rotate, Vec3};

fn main() {
    let yaw = axis_angle_to_quat(Vec3::Y, 30.0).unwrap();
    let pitch = axis_angle_to_quat(Vec3::X, 45.0).unwrap();
    let both = yaw * pitch;

    let v = Vec3::new(0.0, 0.0, -1.0);
    println!("rotated {:?}", quat_rotate(both, v).unwrap());
    println!("angle(yaw, yaw*pitch) = {:.3} deg", quat_angle(yaw, both).unwrap());
    // q and -q are the same rotation
    println!("angle(q, -q) = {:.3} deg", quat_angle(both, both.neg()).unwrap());

    let e = euler_from_quat(both);
    println!("euler xyz = [{:.4}, {:.4}, {:.4}] rad", e[0], e[1], e[2]);
    let back = quat_from_euler(e);
    println!("round trip error {:.2e} deg", quat_angle(both, back).unwrap());
}
