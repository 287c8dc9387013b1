#pragma once

#include <array>

#include "dronebuild/gridworld.hpp"
#include "dronebuild/vision.hpp"

namespace dronebuild::sim {

// Oblique overview camera model. Depth (pad y) is foreshortened: one cell of
// depth moves a block up by cell_pitch_y_px while blocks stay block_px tall,
// so a block placed behind another is partially occluded and a stacked block
// overlaps its base almost entirely. Blocks use equal-luminance colors, which
// keeps block-over-block overlap invisible to the grayscale difference.
struct CameraParams {
    int cell_pitch_x_px = 36;
    int cell_pitch_y_px = 13;
    int block_px = 20;
    int stack_offset_px = 5;
    int margin_x_px = 30;
    int margin_top_px = 40;
    int margin_bottom_px = 45;

    int image_width(int pad_size) const { return 2 * margin_x_px + pad_size * cell_pitch_x_px; }
    int image_height(int pad_size) const {
        return margin_top_px + pad_size * cell_pitch_y_px + margin_bottom_px;
    }
    vision::PixelRect pad_region(int pad_size) const {
        return vision::PixelRect{margin_x_px, margin_top_px,
                                 margin_x_px + pad_size * cell_pitch_x_px,
                                 margin_top_px + pad_size * cell_pitch_y_px};
    }
    // p0 top-left, p1 top-right, p2 bottom-left, p3 bottom-right.
    std::array<vision::PixelPoint, 4> pad_corners(int pad_size) const;
    // Image-space center of a cell's footprint.
    vision::PixelPoint cell_center(int pad_size, grid::Cell cell) const;
};

// Deterministic raster of pad, notch marker, and blocks; identical state gives
// identical pixels.
vision::RgbFrame render_world(const grid::GridWorld& world, const grid::BuildState& state,
                              const CameraParams& camera);

// Detector thresholds matched to the camera geometry: eps_d is half a cell
// pitch, eps_A is 60% of one block's footprint.
vision::DetectorConfig make_detector_config(const CameraParams& camera);

}  // namespace dronebuild::sim
