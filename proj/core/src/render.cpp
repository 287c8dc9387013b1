#include "dronebuild/render.hpp"

#include <algorithm>
#include <cmath>

namespace dronebuild::sim {

namespace {

constexpr std::array<std::uint8_t, 3> kBackground{40, 40, 40};
constexpr std::array<std::uint8_t, 3> kPad{170, 170, 170};
constexpr std::array<std::uint8_t, 3> kNotch{90, 90, 90};

// Six block colors, all with integer mean (r+g+b)/3 == 120 so that block
// pixels covering other block pixels leave no grayscale difference.
constexpr std::array<std::array<std::uint8_t, 3>, 6> kBlockPalette{{
    {200, 80, 80},
    {80, 200, 80},
    {80, 80, 200},
    {170, 110, 80},
    {80, 170, 110},
    {110, 80, 170},
}};

void fill_rect(vision::RgbFrame& img, int x0, int y0, int x1, int y1,
               std::array<std::uint8_t, 3> rgb) {
    x0 = std::max(0, x0);
    y0 = std::max(0, y0);
    x1 = std::min(img.width, x1);
    y1 = std::min(img.height, y1);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) img.set(x, y, rgb);
}

}  // namespace

std::array<vision::PixelPoint, 4> CameraParams::pad_corners(int pad_size) const {
    const auto r = pad_region(pad_size);
    return {vision::PixelPoint{double(r.x0), double(r.y0)},
            vision::PixelPoint{double(r.x1), double(r.y0)},
            vision::PixelPoint{double(r.x0), double(r.y1)},
            vision::PixelPoint{double(r.x1), double(r.y1)}};
}

vision::PixelPoint CameraParams::cell_center(int pad_size, grid::Cell cell) const {
    const double cx = margin_x_px + (cell.x + 0.5) * cell_pitch_x_px;
    const double cy = margin_top_px + (pad_size - 1 - cell.y + 0.5) * cell_pitch_y_px;
    return vision::PixelPoint{cx, cy};
}

vision::RgbFrame render_world(const grid::GridWorld& world, const grid::BuildState& state,
                              const CameraParams& camera) {
    const int pad = state.pad_size();
    auto img = vision::RgbFrame::filled(camera.image_width(pad), camera.image_height(pad),
                                        kBackground);
    const auto region = camera.pad_region(pad);
    fill_rect(img, region.x0, region.y0, region.x1, region.y1, kPad);

    // Notch marker just outside the bottom-left pad corner (pad cell (0,0)).
    fill_rect(img, region.x0 - 8, region.y1 + 2, region.x0 - 2, region.y1 + 8, kNotch);

    // Painter's order: back rows first, then base blocks under stacked ones.
    std::vector<size_t> order(state.placed().size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const auto& pa = state.placed()[a];
        const auto& pb = state.placed()[b];
        if (pa.cell.y != pb.cell.y) return pa.cell.y > pb.cell.y;
        if (pa.layer != pb.layer) return pa.layer < pb.layer;
        if (pa.cell.x != pb.cell.x) return pa.cell.x < pb.cell.x;
        return pa.step_index < pb.step_index;
    });

    for (size_t i : order) {
        const auto& p = state.placed()[i];
        const auto c = camera.cell_center(pad, p.cell);
        const int half = camera.block_px / 2;
        const int x0 = static_cast<int>(std::floor(c.x - half + 0.5));
        const int y0 =
            static_cast<int>(std::floor(c.y - half + 0.5)) - p.layer * camera.stack_offset_px;
        fill_rect(img, x0, y0, x0 + camera.block_px, y0 + camera.block_px,
                  kBlockPalette[i % kBlockPalette.size()]);
    }
    (void)world;
    return img;
}

vision::DetectorConfig make_detector_config(const CameraParams& camera) {
    vision::DetectorConfig cfg;
    cfg.eps_d = camera.cell_pitch_x_px / 2.0;
    cfg.eps_A = 0.6 * camera.block_px * camera.block_px;
    return cfg;
}

}  // namespace dronebuild::sim
