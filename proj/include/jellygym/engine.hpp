#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "jellygym/common.hpp"

namespace jg::engine {

// Special tiles spawned by large matches. Striped tiles remember the axis of
// the match that created them.
enum class JokerKind : std::uint8_t { StripedRow = 0, StripedCol = 1, Wrapped = 2, ColorBomb = 3 };

// One cell's content, packed into a byte:
// 0 = empty, 1..6 = colors, 7 = blocker, 8..11 = jokers.
class Tile {
public:
    static constexpr int kMaxColor = 6;

    constexpr Tile() = default;

    static constexpr Tile empty() { return Tile(0); }
    static Tile color(int c) {
        if (c < 1 || c > kMaxColor) throw ValidationError("tile color out of range 1..6");
        return Tile(static_cast<std::uint8_t>(c));
    }
    static constexpr Tile blocker() { return Tile(7); }
    static constexpr Tile joker(JokerKind k) { return Tile(static_cast<std::uint8_t>(8 + static_cast<int>(k))); }

    bool is_empty() const { return code_ == 0; }
    bool is_color() const { return code_ >= 1 && code_ <= 6; }
    bool is_blocker() const { return code_ == 7; }
    bool is_joker() const { return code_ >= 8; }

    int color() const { return static_cast<int>(code_); }
    JokerKind joker_kind() const { return static_cast<JokerKind>(code_ - 8); }

    std::uint8_t code() const { return code_; }

    friend bool operator==(Tile a, Tile b) = default;

private:
    constexpr explicit Tile(std::uint8_t code) : code_(code) {}
    std::uint8_t code_ = 0;
};

// Swap directions in action-index order.
enum class Direction : std::uint8_t { Up = 0, Right = 1, Down = 2, Left = 3 };

struct Cell {
    int row = 0;
    int col = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
    friend bool operator<(const Cell& a, const Cell& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    }
};

struct Move {
    Cell cell;
    Direction dir = Direction::Up;

    Cell target() const {
        switch (dir) {
            case Direction::Up: return {cell.row - 1, cell.col};
            case Direction::Right: return {cell.row, cell.col + 1};
            case Direction::Down: return {cell.row + 1, cell.col};
            default: return {cell.row, cell.col - 1};
        }
    }
    friend bool operator==(const Move&, const Move&) = default;
};

// An m x n grid of tiles plus a per-cell playable mask. Holes from a level
// layout are non-playable and always hold Empty. Blockers sit on playable
// cells. `palette` is the number of colors refills draw from.
class Board {
public:
    static constexpr int kMinDim = 3;
    static constexpr int kMaxDim = 9;

    Board(int rows, int cols, int palette = 6);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int palette() const { return palette_; }

    bool in_bounds(int r, int c) const { return r >= 0 && r < rows_ && c >= 0 && c < cols_; }
    bool in_bounds(Cell p) const { return in_bounds(p.row, p.col); }

    Tile at(int r, int c) const { return cells_[idx(r, c)]; }
    Tile at(Cell p) const { return at(p.row, p.col); }
    void set(int r, int c, Tile t) { cells_[idx(r, c)] = t; }
    void set(Cell p, Tile t) { set(p.row, p.col, t); }

    bool playable(int r, int c) const { return mask_[idx(r, c)] != 0; }
    bool playable(Cell p) const { return playable(p.row, p.col); }
    void set_playable(int r, int c, bool v) { mask_[idx(r, c)] = v ? 1 : 0; }

    int playable_count() const;

    friend bool operator==(const Board&, const Board&) = default;

private:
    std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * cols_ + c; }

    int rows_;
    int cols_;
    int palette_;
    std::vector<Tile> cells_;
    std::vector<std::uint8_t> mask_;
};

enum class Orientation : std::uint8_t { Horizontal, Vertical, Cross };

// A maximal alignment of >= 3 equal colors. Overlapping horizontal and
// vertical runs sharing a cell are merged into a single Cross group.
struct MatchGroup {
    std::vector<Cell> cells;  // sorted row-major, unique
    Orientation orientation = Orientation::Horizontal;
    int color = 0;
    Cell pivot;  // run middle, or the intersection for a cross

    int length() const { return static_cast<int>(cells.size()); }
};

// Aggregate effect of one move's full cascade.
struct CascadeOutcome {
    int cleared_count = 0;      // color/joker tiles removed (blockers excluded)
    int matches_resolved = 0;
    int jokers_created = 0;
    int blockers_cleared = 0;
    std::array<int, 7> cleared_by_color{};  // indexed by color 1..6
};

struct ApplyResult {
    Board board;
    CascadeOutcome outcome;
    bool valid = false;
};

// Joker a resolved group spawns, if any: a cross spawns Wrapped, a straight
// five or more a ColorBomb, a straight four a Striped along the match axis.
// Returns false when the group is a plain triple.
bool joker_spawned_by(const MatchGroup& group, JokerKind& kind);

// Number of directed neighbor swaps on a full m x n board: 2(2mn - m - n).
int theoretical_move_count(int rows, int cols);

bool is_positionally_legal(const Board& board, const Move& move);

// Every move whose source and target are on-board playable cells, in
// cell-major order with directions Up, Right, Down, Left.
std::vector<Move> enumerate_positional_swaps(const Board& board);

std::vector<MatchGroup> find_matches(const Board& board);

// True iff the swap yields at least one match group or involves a joker.
// Swaps with or between blockers or empty cells are never valid.
// Positionally forbidden moves raise MoveError.
bool is_valid_move(const Board& board, const Move& move);

// Performs the swap and resolves the cascade to a fixpoint: clear matches,
// spawn jokers, damage adjacent blockers, apply gravity, refill from `rng`.
// An invalid move returns the board unchanged with valid = false.
ApplyResult apply_move(const Board& board, const Move& move, Rng& rng);

// Count of cells whose tiles differ. Boards must have equal dimensions.
int hamming_distance(const Board& a, const Board& b);

bool has_valid_move(const Board& board);

// Returns the board unchanged if a valid move exists; otherwise reshuffles
// the color tiles in place (blockers, jokers and holes stay put) until the
// board is match-free with at least one valid move. Gives up after 1000
// reshuffles with UnplayableBoardError.
Board ensure_playable(const Board& board, Rng& rng);

// Embeds the board top-left into a 9x9 grid whose padding cells are empty
// and non-playable.
Board zero_pad(const Board& board);

// Tiles fall to the bottom of each column segment; blockers and holes split
// segments and never move. Exposed for the conservation property tests.
void apply_gravity(Board& board);

// Fills the empty playable cells of `shape` with palette colors so that the
// result has no pre-existing match and at least one valid move.
Board generate_filled(const Board& shape, Rng& rng);

}  // namespace jg::engine
