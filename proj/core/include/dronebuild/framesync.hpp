#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "dronebuild/gridworld.hpp"
#include "dronebuild/prng.hpp"

namespace dronebuild::plan {
struct ActionPlan;
}

namespace dronebuild::sync {

// Rigid transform: rotation matrix + translation in meters.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

bool is_orthonormal(const Eigen::Matrix3d& r, double tol = 1e-9);

Eigen::Matrix3d rot_z(double yaw_rad);
Eigen::Matrix3d rot_axis_angle(const Eigen::Vector3d& axis, double angle_rad);

// Offset between two tag positions, both expressed in the camera frame:
// p_origin - p_pad.
Eigen::Vector3d relative_translation(const Eigen::Vector3d& p_origin_cam,
                                     const Eigen::Vector3d& p_pad_cam);

// r_cam_world^-1 * r_cam_pad, the inverse taken as the transpose. Both inputs
// must be orthonormal; the result is orthonormal within 1e-9.
Eigen::Matrix3d relative_rotation(const Eigen::Matrix3d& r_cam_world,
                                  const Eigen::Matrix3d& r_cam_pad);

// t_rel + r_rel * p_notch_pad.
Eigen::Vector3d notch_world(const Eigen::Vector3d& t_rel, const Eigen::Matrix3d& r_rel,
                            const Eigen::Vector3d& p_notch_pad);

// World placement of the pad grid: cell (0,0) sits at notch_world, the pad
// axes are the columns of rotation_rel, cells are spacing_m apart, and a
// stacked block sits block_height_m above its base.
struct PadMap {
    Eigen::Vector3d notch_world = Eigen::Vector3d::Zero();
    Eigen::Matrix3d rotation_rel = Eigen::Matrix3d::Identity();
    double spacing_m = 0.04;
    int pad_size = 5;
    double block_height_m = 0.02;

    std::string to_json() const;
};

// World position of a pad cell. layer 1 addresses the slot on top of a
// layer-0 block. Throws on out-of-pad cells or layers outside {0, 1}.
Eigen::Vector3d interpolate_pad_point(const PadMap& map, grid::Cell cell, int layer);

// Composes the relative translation/rotation of the two tags into a PadMap.
// The origin tag is taken to sit at the world origin with axes aligned to the
// world frame.
PadMap pad_map_from_tags(const Pose& origin_tag_cam, const Pose& pad_tag_cam,
                         const Eigen::Vector3d& notch_offset_pad, double spacing_m,
                         int pad_size, double block_height_m = 0.02);

// Fixed-position variant: the anchor is the bottom-right pad corner point in
// world coordinates, the pad is level and rotated about z by yaw. The grid is
// indexed from the bottom-left, so the anchor is converted to the notch by
// walking (pad_size-1) cells back along the pad x-axis.
PadMap pad_map_hardcoded(const Eigen::Vector3d& anchor_world, double yaw_rad, double spacing_m,
                         int pad_size, double block_height_m = 0.02);

// One world waypoint per plan coordinate, order preserved.
std::vector<Eigen::Vector3d> plan_to_world(const plan::ActionPlan& p, const PadMap& map);

// --- simulated tag observation ----------------------------------------------

// Ground truth used to synthesize what a calibrated stationary camera would
// report for the origin tag and the pad tag.
struct TagScene {
    Pose pad_in_world;                                     // pad tag pose
    Pose camera_in_world;                                  // camera pose
    Eigen::Vector3d origin_tag_world = Eigen::Vector3d::Zero();  // origin tag position
};

struct TagObservations {
    Pose origin_tag;  // in camera frame
    Pose pad_tag;     // in camera frame
};

struct TagNoise {
    double sigma_translation_m = 0.0;  // per-axis Gaussian
    double sigma_rotation_rad = 0.0;   // axis-angle Gaussian magnitude
};

TagObservations observe_tags(const TagScene& scene);
TagObservations observe_tags(const TagScene& scene, const TagNoise& noise, rng::Stream& stream);

}  // namespace dronebuild::sync
