#pragma once

#include <compare>
#include <set>
#include <string>
#include <vector>

namespace dronebuild::grid {

// Pad cell address. (0,0) is the bottom-left cell of the pad; x grows to the
// right, y grows away from the viewer.
struct Cell {
    int x = 0;
    int y = 0;
    auto operator<=>(const Cell&) const = default;
};

std::string to_string(const Cell& c);  // "(x, y)"

struct GridDims {
    int height = 1;  // vertical cells
    int width = 1;   // horizontal x cells
    int length = 1;  // horizontal y cells
};

// Discretized build volume holding a square build pad in the horizontal plane.
struct GridWorld {
    GridDims dims_cells;
    double cell_size_m = 0.01;
    int pad_size = 1;
    Cell pad_origin_cell;

    bool in_pad(Cell c) const {
        return c.x >= 0 && c.x < pad_size && c.y >= 0 && c.y < pad_size;
    }
};

// Validates and builds a world; throws std::invalid_argument naming the
// offending field.
GridWorld new_world(GridDims dims_cells, double cell_size_m, int pad_size, Cell pad_origin_cell);

// Convenience: a world just big enough to hold a pad of the given size.
GridWorld world_for_pad(int pad_size, double cell_size_m = 0.01);

enum class CellStatus : unsigned char { Free, Occupied, Stacked };

struct BlockPlacement {
    Cell cell;
    int layer = 0;  // 0 on the pad, 1 on top of a layer-0 block
    int step_index = 0;
    auto operator<=>(const BlockPlacement&) const = default;
};

// Pad occupancy plus the ordered ledger of placements. Pure value type:
// mutation always returns a new state.
class BuildState {
public:
    BuildState() = default;
    explicit BuildState(int pad_size);

    int pad_size() const { return pad_size_; }
    CellStatus at(Cell c) const;
    const std::vector<BlockPlacement>& placed() const { return placed_; }

    bool operator==(const BuildState&) const = default;

    friend BuildState apply_placement(const BuildState& state, Cell cell, bool stacked);

private:
    int pad_size_ = 0;
    std::vector<CellStatus> occupancy_;
    std::vector<BlockPlacement> placed_;
};

// o/x grid, one line per row, top row (y = pad_size-1) printed first, single
// spaces between symbols, no trailing whitespace. Occupied and Stacked both
// print "x".
std::string render_scene_text(const BuildState& state);

// Returns a new state with the block added; the input is untouched.
// Throws std::invalid_argument / std::logic_error on out-of-bounds cells,
// stacking on a free cell, or an already-full stack.
BuildState apply_placement(const BuildState& state, Cell cell, bool stacked);

std::set<Cell> occupied_cells(const BuildState& state);

struct ParsedScene {
    int pad_size = 0;
    std::set<Cell> occupied;
};

// Inverse of render_scene_text. Throws on ragged or non-o/x input.
ParsedScene parse_scene_text(const std::string& text);

}  // namespace dronebuild::grid
