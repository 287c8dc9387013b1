#include "dronebuild/gridworld.hpp"

#include <sstream>
#include <stdexcept>

namespace dronebuild::grid {

std::string to_string(const Cell& c) {
    std::ostringstream os;
    os << "(" << c.x << ", " << c.y << ")";
    return os.str();
}

GridWorld new_world(GridDims dims_cells, double cell_size_m, int pad_size, Cell pad_origin_cell) {
    if (dims_cells.height < 1) throw std::invalid_argument("dims_cells.height must be >= 1");
    if (dims_cells.width < 1) throw std::invalid_argument("dims_cells.width must be >= 1");
    if (dims_cells.length < 1) throw std::invalid_argument("dims_cells.length must be >= 1");
    if (!(cell_size_m > 0.0)) throw std::invalid_argument("cell_size_m must be > 0");
    if (pad_size < 1) throw std::invalid_argument("pad_size must be >= 1");
    if (pad_origin_cell.x < 0 || pad_origin_cell.y < 0)
        throw std::invalid_argument("pad_origin_cell must be non-negative");
    if (pad_origin_cell.x + pad_size > dims_cells.width)
        throw std::invalid_argument("pad_origin_cell.x + pad_size exceeds dims_cells.width");
    if (pad_origin_cell.y + pad_size > dims_cells.length)
        throw std::invalid_argument("pad_origin_cell.y + pad_size exceeds dims_cells.length");
    return GridWorld{dims_cells, cell_size_m, pad_size, pad_origin_cell};
}

GridWorld world_for_pad(int pad_size, double cell_size_m) {
    return new_world(GridDims{4, pad_size, pad_size}, cell_size_m, pad_size, Cell{0, 0});
}

BuildState::BuildState(int pad_size) : pad_size_(pad_size) {
    if (pad_size < 1) throw std::invalid_argument("pad_size must be >= 1");
    occupancy_.assign(static_cast<size_t>(pad_size) * pad_size, CellStatus::Free);
}

CellStatus BuildState::at(Cell c) const {
    if (c.x < 0 || c.x >= pad_size_ || c.y < 0 || c.y >= pad_size_)
        throw std::out_of_range("cell " + to_string(c) + " outside pad");
    return occupancy_[static_cast<size_t>(c.y) * pad_size_ + c.x];
}

std::string render_scene_text(const BuildState& state) {
    std::ostringstream os;
    const int n = state.pad_size();
    for (int y = n - 1; y >= 0; --y) {
        for (int x = 0; x < n; ++x) {
            if (x > 0) os << ' ';
            os << (state.at(Cell{x, y}) == CellStatus::Free ? 'o' : 'x');
        }
        if (y > 0) os << '\n';
    }
    return os.str();
}

BuildState apply_placement(const BuildState& state, Cell cell, bool stacked) {
    const int n = state.pad_size();
    if (cell.x < 0 || cell.x >= n || cell.y < 0 || cell.y >= n)
        throw std::invalid_argument("cell " + to_string(cell) + " outside pad");
    const CellStatus cur = state.at(cell);
    if (stacked) {
        if (cur == CellStatus::Free)
            throw std::logic_error("cannot stack on free cell " + to_string(cell));
        if (cur == CellStatus::Stacked)
            throw std::logic_error("cell " + to_string(cell) + " already carries a stacked block");
    } else {
        if (cur != CellStatus::Free)
            throw std::logic_error("cell " + to_string(cell) + " already occupied");
    }
    BuildState next = state;
    next.occupancy_[static_cast<size_t>(cell.y) * n + cell.x] =
        stacked ? CellStatus::Stacked : CellStatus::Occupied;
    const int step = next.placed_.empty() ? 0 : next.placed_.back().step_index + 1;
    next.placed_.push_back(BlockPlacement{cell, stacked ? 1 : 0, step});
    return next;
}

std::set<Cell> occupied_cells(const BuildState& state) {
    std::set<Cell> out;
    const int n = state.pad_size();
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            if (state.at(Cell{x, y}) != CellStatus::Free) out.insert(Cell{x, y});
    return out;
}

ParsedScene parse_scene_text(const std::string& text) {
    std::vector<std::vector<char>> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::vector<char> row;
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            if (tok != "o" && tok != "x")
                throw std::invalid_argument("scene text contains symbol '" + tok + "'");
            row.push_back(tok[0]);
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("scene text is empty");
    const int n = static_cast<int>(rows.size());
    ParsedScene scene;
    scene.pad_size = n;
    for (const auto& row : rows)
        if (static_cast<int>(row.size()) != n)
            throw std::invalid_argument("scene text is not a square grid");
    for (int r = 0; r < n; ++r) {
        const int y = n - 1 - r;  // first printed row is the top row
        for (int x = 0; x < n; ++x)
            if (rows[r][x] == 'x') scene.occupied.insert(Cell{x, y});
    }
    return scene;
}

}  // namespace dronebuild::grid
