#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dronebuild/gridworld.hpp"

namespace dronebuild::vision {

// Grayscale raster, row-major, origin at the top-left, intensities 0..255.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> px;

    static Frame filled(int w, int h, std::uint8_t value);
    std::uint8_t at(int x, int y) const { return px[static_cast<size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return px[static_cast<size_t>(y) * width + x]; }
    bool operator==(const Frame&) const = default;
};

// Interleaved RGB raster, same layout as Frame.
struct RgbFrame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> px;  // 3 * width * height

    static RgbFrame filled(int w, int h, std::array<std::uint8_t, 3> rgb);
    const std::uint8_t* at(int x, int y) const {
        return &px[(static_cast<size_t>(y) * width + x) * 3];
    }
    void set(int x, int y, std::array<std::uint8_t, 3> rgb);
    bool operator==(const RgbFrame&) const = default;
};

// Integer-mean grayscale conversion: (r + g + b) / 3.
Frame to_gray(const RgbFrame& frame);

void write_pgm(const Frame& frame, const std::filesystem::path& path);
Frame read_pgm(const std::filesystem::path& path);
void write_ppm(const RgbFrame& frame, const std::filesystem::path& path);
RgbFrame read_ppm(const std::filesystem::path& path);

struct PixelPoint {
    double x = 0.0;
    double y = 0.0;
};

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    bool contains(const PixelPoint& p) const {
        return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1;
    }
    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
};

struct TrackSample {
    int t = 0;
    double x = 0.0;
    double y = 0.0;
};

// Time-indexed pixel positions of one tracked feature point.
struct FeatureTrack {
    int point_id = 0;
    std::vector<TrackSample> positions;  // t strictly increasing

    std::optional<TrackSample> at(int t) const;
};

// Changed-pixel region of a difference frame.
struct ChangeRegion {
    std::vector<std::pair<int, int>> omega;  // (x, y) pixels
    PixelPoint centroid;
    int area = 0;
};

struct DetectorConfig {
    double pickup_threshold_T = 30.0;  // summed upward pixels
    int frame_gap = 3;
    int diff_binarize_threshold = 25;  // intensity
    double eps_d = 18.0;               // px, same-position distance threshold
    double eps_A = 240.0;              // px^2, small-change area threshold
};

struct PickupResult {
    bool picked_up = false;
    double delta_y_total = 0.0;
};

// Sums the upward displacement of every track between t and t + frame_gap
// (image rows grow downward, so upward motion is the negated row delta) and
// compares against the pickup threshold. Throws if the track list is empty or
// any track lacks a sample at t or t + frame_gap.
PickupResult pickup_detect(const std::vector<FeatureTrack>& tracks, int t,
                           const DetectorConfig& cfg);

// Per-pixel absolute difference. Throws on dimension mismatch.
Frame frame_diff(const Frame& before, const Frame& after);

// Largest 4-connected component of pixels strictly above the binarize
// threshold; nullopt when nothing exceeds it.
std::optional<ChangeRegion> change_region(const Frame& diff, const DetectorConfig& cfg);

// True iff the detector count increased by exactly one, or the difference
// region exists and its centroid falls inside the expected region.
bool dropoff_verify(int count_before, int count_after, const std::optional<ChangeRegion>& region,
                    const PixelRect& expected_region);

// Maps an image-space centroid to a pad cell via the corner points
// p0 top-left, p1 top-right, p2 bottom-left, p3 bottom-right. The raw grid
// row index counts from the top corner row, so it is flipped into the
// bottom-left-origin cell convention. Fractions at exactly 1.0 clamp to the
// last cell. Throws on degenerate corners or a centroid outside the quad.
grid::Cell centroid_to_grid(const PixelPoint& centroid, const std::array<PixelPoint, 4>& corners,
                            int pad_size);

enum class PlacementClass { Stacked, PlacedBehind, NewCell };

// Resolves whether a change near an existing block is a stack on top of it
// (small change area) or a distinct block sitting next to or behind it
// (full-size change area). With no prior placements everything is a new cell.
PlacementClass classify_stack(const PixelPoint& new_pos, const std::vector<PixelPoint>& existing,
                              double area, const DetectorConfig& cfg);

struct DetectedBlock {
    PixelRect bbox;
    int id = 0;
    PixelPoint centroid;
};

// Color-blob block detector with stable ids. Blocks are found as saturated
// (high-chroma) 4-connected components inside the pad region; ids persist
// across frames by nearest-centroid association.
class BlockDetector {
public:
    explicit BlockDetector(int chroma_threshold = 40, double association_radius_px = 24.0);

    std::vector<DetectedBlock> detect(const RgbFrame& frame, const PixelRect& pad_region);

private:
    int chroma_threshold_;
    double association_radius_px_;
    int next_id_ = 0;
    std::vector<std::pair<PixelPoint, int>> previous_;  // centroid, id
};

}  // namespace dronebuild::vision
