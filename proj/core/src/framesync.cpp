#include "dronebuild/framesync.hpp"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "dronebuild/planner.hpp"

namespace dronebuild::sync {

bool is_orthonormal(const Eigen::Matrix3d& r, double tol) {
    const Eigen::Matrix3d err = r.transpose() * r - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(r.determinant() - 1.0) <= tol;
}

Eigen::Matrix3d rot_z(double yaw_rad) {
    return Eigen::AngleAxisd(yaw_rad, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

Eigen::Matrix3d rot_axis_angle(const Eigen::Vector3d& axis, double angle_rad) {
    if (axis.norm() == 0.0) throw std::invalid_argument("rotation axis must be non-zero");
    return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

Eigen::Vector3d relative_translation(const Eigen::Vector3d& p_origin_cam,
                                     const Eigen::Vector3d& p_pad_cam) {
    return p_origin_cam - p_pad_cam;
}

Eigen::Matrix3d relative_rotation(const Eigen::Matrix3d& r_cam_world,
                                  const Eigen::Matrix3d& r_cam_pad) {
    if (!is_orthonormal(r_cam_world)) throw std::invalid_argument("r_cam_world is not orthonormal");
    if (!is_orthonormal(r_cam_pad)) throw std::invalid_argument("r_cam_pad is not orthonormal");
    return r_cam_world.transpose() * r_cam_pad;
}

Eigen::Vector3d notch_world(const Eigen::Vector3d& t_rel, const Eigen::Matrix3d& r_rel,
                            const Eigen::Vector3d& p_notch_pad) {
    return t_rel + r_rel * p_notch_pad;
}

Eigen::Vector3d interpolate_pad_point(const PadMap& map, grid::Cell cell, int layer) {
    if (cell.x < 0 || cell.x >= map.pad_size || cell.y < 0 || cell.y >= map.pad_size)
        throw std::invalid_argument("cell " + grid::to_string(cell) + " outside pad");
    if (layer != 0 && layer != 1) throw std::invalid_argument("layer must be 0 or 1");
    const Eigen::Vector3d local(cell.x * map.spacing_m, cell.y * map.spacing_m,
                                layer * map.block_height_m);
    return map.notch_world + map.rotation_rel * local;
}

PadMap pad_map_from_tags(const Pose& origin_tag_cam, const Pose& pad_tag_cam,
                         const Eigen::Vector3d& notch_offset_pad, double spacing_m, int pad_size,
                         double block_height_m) {
    if (!(spacing_m > 0.0)) throw std::invalid_argument("spacing_m must be > 0");
    const Eigen::Matrix3d r_rel = relative_rotation(origin_tag_cam.rotation, pad_tag_cam.rotation);
    const Eigen::Vector3d t_cam =
        relative_translation(origin_tag_cam.translation, pad_tag_cam.translation);
    // t_cam is the origin-minus-pad offset in camera axes. The notch equation
    // wants the pad position relative to the origin tag in world axes, so the
    // offset is negated and rotated by the inverse of the origin tag rotation.
    const Eigen::Vector3d t_rel_world = origin_tag_cam.rotation.transpose() * (-t_cam);
    PadMap map;
    map.notch_world = notch_world(t_rel_world, r_rel, notch_offset_pad);
    map.rotation_rel = r_rel;
    map.spacing_m = spacing_m;
    map.pad_size = pad_size;
    map.block_height_m = block_height_m;
    return map;
}

PadMap pad_map_hardcoded(const Eigen::Vector3d& anchor_world, double yaw_rad, double spacing_m,
                         int pad_size, double block_height_m) {
    if (!(spacing_m > 0.0)) throw std::invalid_argument("spacing_m must be > 0");
    PadMap map;
    map.rotation_rel = rot_z(yaw_rad);
    const Eigen::Vector3d corner_to_notch((pad_size - 1) * spacing_m, 0.0, 0.0);
    map.notch_world = anchor_world - map.rotation_rel * corner_to_notch;
    map.spacing_m = spacing_m;
    map.pad_size = pad_size;
    map.block_height_m = block_height_m;
    return map;
}

std::vector<Eigen::Vector3d> plan_to_world(const plan::ActionPlan& p, const PadMap& map) {
    std::vector<Eigen::Vector3d> waypoints;
    waypoints.reserve(p.coordinates.size());
    for (const auto& cell : p.coordinates) {
        const int layer = p.stacked.count(cell) ? 1 : 0;
        waypoints.push_back(interpolate_pad_point(map, cell, layer));
    }
    return waypoints;
}

TagObservations observe_tags(const TagScene& scene) {
    if (!is_orthonormal(scene.camera_in_world.rotation))
        throw std::invalid_argument("camera rotation is not orthonormal");
    if (!is_orthonormal(scene.pad_in_world.rotation))
        throw std::invalid_argument("pad rotation is not orthonormal");
    const Eigen::Matrix3d r_cw = scene.camera_in_world.rotation.transpose();
    const Eigen::Vector3d cam = scene.camera_in_world.translation;
    TagObservations obs;
    obs.origin_tag.rotation = r_cw;  // origin tag axes coincide with the world frame
    obs.origin_tag.translation = r_cw * (scene.origin_tag_world - cam);
    obs.pad_tag.rotation = r_cw * scene.pad_in_world.rotation;
    obs.pad_tag.translation = r_cw * (scene.pad_in_world.translation - cam);
    return obs;
}

namespace {

Pose perturb(const Pose& pose, const TagNoise& noise, rng::Stream& stream) {
    Pose out = pose;
    for (int i = 0; i < 3; ++i)
        out.translation[i] += stream.gaussian(noise.sigma_translation_m);
    if (noise.sigma_rotation_rad > 0.0) {
        Eigen::Vector3d axis;
        do {
            axis = Eigen::Vector3d(stream.gaussian(), stream.gaussian(), stream.gaussian());
        } while (axis.norm() < 1e-12);
        const double angle = stream.gaussian(noise.sigma_rotation_rad);
        out.rotation = rot_axis_angle(axis, angle) * out.rotation;
    }
    return out;
}

}  // namespace

TagObservations observe_tags(const TagScene& scene, const TagNoise& noise, rng::Stream& stream) {
    TagObservations obs = observe_tags(scene);
    obs.origin_tag = perturb(obs.origin_tag, noise, stream);
    obs.pad_tag = perturb(obs.pad_tag, noise, stream);
    return obs;
}

std::string PadMap::to_json() const {
    nlohmann::ordered_json j;
    j["notch_world"] = {notch_world.x(), notch_world.y(), notch_world.z()};
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int r = 0; r < 3; ++r) rows.push_back({rotation_rel(r, 0), rotation_rel(r, 1), rotation_rel(r, 2)});
    j["rotation_rel"] = rows;
    j["spacing_m"] = spacing_m;
    j["pad_size"] = pad_size;
    j["block_height_m"] = block_height_m;
    return j.dump();
}

}  // namespace dronebuild::sync
