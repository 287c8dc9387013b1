#include "dronebuild/vision.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dronebuild::vision {

Frame Frame::filled(int w, int h, std::uint8_t value) {
    Frame f;
    f.width = w;
    f.height = h;
    f.px.assign(static_cast<size_t>(w) * h, value);
    return f;
}

RgbFrame RgbFrame::filled(int w, int h, std::array<std::uint8_t, 3> rgb) {
    RgbFrame f;
    f.width = w;
    f.height = h;
    f.px.resize(static_cast<size_t>(w) * h * 3);
    for (size_t i = 0; i < f.px.size(); i += 3) {
        f.px[i] = rgb[0];
        f.px[i + 1] = rgb[1];
        f.px[i + 2] = rgb[2];
    }
    return f;
}

void RgbFrame::set(int x, int y, std::array<std::uint8_t, 3> rgb) {
    auto* p = &px[(static_cast<size_t>(y) * width + x) * 3];
    p[0] = rgb[0];
    p[1] = rgb[1];
    p[2] = rgb[2];
}

Frame to_gray(const RgbFrame& frame) {
    Frame g;
    g.width = frame.width;
    g.height = frame.height;
    g.px.resize(static_cast<size_t>(frame.width) * frame.height);
    for (size_t i = 0; i < g.px.size(); ++i) {
        const size_t o = i * 3;
        g.px[i] = static_cast<std::uint8_t>((frame.px[o] + frame.px[o + 1] + frame.px[o + 2]) / 3);
    }
    return g;
}

namespace {

void write_netpbm(const std::filesystem::path& path, const char* magic, int w, int h,
                  const std::vector<std::uint8_t>& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << magic << "\n" << w << " " << h << "\n255\n";
    os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!os) throw std::runtime_error("short write to " + path.string());
}

std::vector<std::uint8_t> read_netpbm(const std::filesystem::path& path, const char* magic, int& w,
                                      int& h, int channels) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::string tag;
    int maxval = 0;
    is >> tag >> w >> h >> maxval;
    if (tag != magic || maxval != 255 || w <= 0 || h <= 0)
        throw std::runtime_error(path.string() + " is not a " + magic + " file");
    is.get();  // single whitespace after the header
    std::vector<std::uint8_t> data(static_cast<size_t>(w) * h * channels);
    is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (is.gcount() != static_cast<std::streamsize>(data.size()))
        throw std::runtime_error(path.string() + " truncated");
    return data;
}

}  // namespace

void write_pgm(const Frame& frame, const std::filesystem::path& path) {
    write_netpbm(path, "P5", frame.width, frame.height, frame.px);
}

Frame read_pgm(const std::filesystem::path& path) {
    Frame f;
    f.px = read_netpbm(path, "P5", f.width, f.height, 1);
    return f;
}

void write_ppm(const RgbFrame& frame, const std::filesystem::path& path) {
    write_netpbm(path, "P6", frame.width, frame.height, frame.px);
}

RgbFrame read_ppm(const std::filesystem::path& path) {
    RgbFrame f;
    f.px = read_netpbm(path, "P6", f.width, f.height, 3);
    return f;
}

std::optional<TrackSample> FeatureTrack::at(int t) const {
    for (const auto& s : positions)
        if (s.t == t) return s;
    return std::nullopt;
}

PickupResult pickup_detect(const std::vector<FeatureTrack>& tracks, int t,
                           const DetectorConfig& cfg) {
    if (tracks.empty()) throw std::invalid_argument("pickup_detect needs at least one track");
    double total = 0.0;
    for (const auto& track : tracks) {
        const auto a = track.at(t);
        const auto b = track.at(t + cfg.frame_gap);
        if (!a || !b)
            throw std::invalid_argument("track " + std::to_string(track.point_id) +
                                        " lacks samples at t and t+gap");
        total += -(b->y - a->y);  // rows shrink upward
    }
    return PickupResult{total > cfg.pickup_threshold_T, total};
}

Frame frame_diff(const Frame& before, const Frame& after) {
    if (before.width != after.width || before.height != after.height)
        throw std::invalid_argument("frame_diff dimension mismatch");
    Frame d;
    d.width = before.width;
    d.height = before.height;
    d.px.resize(before.px.size());
    for (size_t i = 0; i < d.px.size(); ++i)
        d.px[i] = static_cast<std::uint8_t>(std::abs(int(after.px[i]) - int(before.px[i])));
    return d;
}

std::optional<ChangeRegion> change_region(const Frame& diff, const DetectorConfig& cfg) {
    const int w = diff.width, h = diff.height;
    std::vector<int> label(static_cast<size_t>(w) * h, -1);
    int best_label = -1;
    size_t best_size = 0;
    std::vector<std::vector<std::pair<int, int>>> components;

    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t idx = static_cast<size_t>(y) * w + x;
            if (label[idx] != -1 || diff.px[idx] <= cfg.diff_binarize_threshold) continue;
            const int cur = static_cast<int>(components.size());
            components.emplace_back();
            stack.clear();
            stack.emplace_back(x, y);
            label[idx] = cur;
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                components[cur].emplace_back(cx, cy);
                constexpr int dx[4] = {1, -1, 0, 0};
                constexpr int dy[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    const int nx = cx + dx[k], ny = cy + dy[k];
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    const size_t nidx = static_cast<size_t>(ny) * w + nx;
                    if (label[nidx] != -1 || diff.px[nidx] <= cfg.diff_binarize_threshold) continue;
                    label[nidx] = cur;
                    stack.emplace_back(nx, ny);
                }
            }
            if (components[cur].size() > best_size) {
                best_size = components[cur].size();
                best_label = cur;
            }
        }
    }
    if (best_label < 0) return std::nullopt;

    ChangeRegion region;
    region.omega = std::move(components[best_label]);
    double sx = 0.0, sy = 0.0;
    for (const auto& [px, py] : region.omega) {
        sx += px;
        sy += py;
    }
    region.area = static_cast<int>(region.omega.size());
    region.centroid = PixelPoint{sx / region.area, sy / region.area};
    return region;
}

bool dropoff_verify(int count_before, int count_after, const std::optional<ChangeRegion>& region,
                    const PixelRect& expected_region) {
    if (count_after == count_before + 1) return true;
    return region.has_value() && expected_region.contains(region->centroid);
}

grid::Cell centroid_to_grid(const PixelPoint& centroid, const std::array<PixelPoint, 4>& corners,
                            int pad_size) {
    const PixelPoint& p0 = corners[0];
    const PixelPoint& p1 = corners[1];
    const PixelPoint& p2 = corners[2];
    const double dx = p1.x - p0.x;
    const double dy = p2.y - p0.y;
    if (dx == 0.0 || dy == 0.0) throw std::invalid_argument("degenerate pad corners");
    const double fx = (centroid.x - p0.x) / dx;
    const double fy = (centroid.y - p0.y) / dy;
    if (fx < 0.0 || fx > 1.0 || fy < 0.0 || fy > 1.0)
        throw std::invalid_argument("centroid outside pad quadrilateral");
    int xg = static_cast<int>(std::floor(fx * pad_size));
    int yg = static_cast<int>(std::floor(fy * pad_size));
    xg = std::clamp(xg, 0, pad_size - 1);
    yg = std::clamp(yg, 0, pad_size - 1);
    return grid::Cell{xg, pad_size - 1 - yg};
}

PlacementClass classify_stack(const PixelPoint& new_pos, const std::vector<PixelPoint>& existing,
                              double area, const DetectorConfig& cfg) {
    if (existing.empty()) return PlacementClass::NewCell;
    double min_d = std::numeric_limits<double>::infinity();
    for (const auto& p : existing)
        min_d = std::min(min_d, std::hypot(new_pos.x - p.x, new_pos.y - p.y));
    if (min_d >= cfg.eps_d) return PlacementClass::NewCell;
    return area < cfg.eps_A ? PlacementClass::Stacked : PlacementClass::PlacedBehind;
}

BlockDetector::BlockDetector(int chroma_threshold, double association_radius_px)
    : chroma_threshold_(chroma_threshold), association_radius_px_(association_radius_px) {}

std::vector<DetectedBlock> BlockDetector::detect(const RgbFrame& frame,
                                                 const PixelRect& pad_region) {
    const int x0 = std::max(0, pad_region.x0), x1 = std::min(frame.width, pad_region.x1);
    const int y0 = std::max(0, pad_region.y0), y1 = std::min(frame.height, pad_region.y1);
    const int w = frame.width;
    std::vector<char> mask(static_cast<size_t>(frame.width) * frame.height, 0);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const auto* p = frame.at(x, y);
            const int hi = std::max({p[0], p[1], p[2]});
            const int lo = std::min({p[0], p[1], p[2]});
            if (hi - lo > chroma_threshold_) mask[static_cast<size_t>(y) * w + x] = 1;
        }
    }

    std::vector<DetectedBlock> blocks;
    std::vector<std::pair<int, int>> stack;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            if (mask[static_cast<size_t>(y) * w + x] != 1) continue;
            stack.clear();
            stack.emplace_back(x, y);
            mask[static_cast<size_t>(y) * w + x] = 2;
            long sx = 0, sy = 0, n = 0;
            int bx0 = x, bx1 = x + 1, by0 = y, by1 = y + 1;
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                ++n;
                sx += cx;
                sy += cy;
                bx0 = std::min(bx0, cx);
                bx1 = std::max(bx1, cx + 1);
                by0 = std::min(by0, cy);
                by1 = std::max(by1, cy + 1);
                constexpr int dx[4] = {1, -1, 0, 0};
                constexpr int dy[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    const int nx = cx + dx[k], ny = cy + dy[k];
                    if (nx < x0 || nx >= x1 || ny < y0 || ny >= y1) continue;
                    if (mask[static_cast<size_t>(ny) * w + nx] != 1) continue;
                    mask[static_cast<size_t>(ny) * w + nx] = 2;
                    stack.emplace_back(nx, ny);
                }
            }
            DetectedBlock b;
            b.bbox = PixelRect{bx0, by0, bx1, by1};
            b.centroid = PixelPoint{double(sx) / n, double(sy) / n};
            b.id = -1;
            blocks.push_back(b);
        }
    }

    // Nearest-centroid association against the previous frame, closest pairs
    // first so a newcomer cannot steal an id from a closer match.
    struct Pair {
        double d;
        size_t block;
        size_t prev;
    };
    std::vector<Pair> pairs;
    for (size_t i = 0; i < blocks.size(); ++i)
        for (size_t j = 0; j < previous_.size(); ++j) {
            const double d = std::hypot(blocks[i].centroid.x - previous_[j].first.x,
                                        blocks[i].centroid.y - previous_[j].first.y);
            if (d <= association_radius_px_) pairs.push_back({d, i, j});
        }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.d != b.d) return a.d < b.d;
        if (a.block != b.block) return a.block < b.block;
        return a.prev < b.prev;
    });
    std::vector<char> block_taken(blocks.size(), 0), prev_taken(previous_.size(), 0);
    for (const auto& p : pairs) {
        if (block_taken[p.block] || prev_taken[p.prev]) continue;
        blocks[p.block].id = previous_[p.prev].second;
        block_taken[p.block] = 1;
        prev_taken[p.prev] = 1;
    }
    for (auto& b : blocks)
        if (b.id < 0) b.id = next_id_++;

    previous_.clear();
    for (const auto& b : blocks) previous_.emplace_back(b.centroid, b.id);
    return blocks;
}

}  // namespace dronebuild::vision
