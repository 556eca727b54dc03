#include "jellygym/engine.hpp"

#include <algorithm>
#include <numeric>

namespace jg::engine {

Board::Board(int rows, int cols, int palette)
    : rows_(rows), cols_(cols), palette_(palette) {
    if (rows < kMinDim || rows > kMaxDim || cols < kMinDim || cols > kMaxDim)
        throw DimensionError("board dimensions must be within 3..9, got " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    if (palette < 1 || palette > Tile::kMaxColor)
        throw ValidationError("palette must be within 1..6");
    cells_.assign(static_cast<std::size_t>(rows) * cols, Tile::empty());
    mask_.assign(static_cast<std::size_t>(rows) * cols, 1);
}

int Board::playable_count() const {
    int n = 0;
    for (auto m : mask_) n += m;
    return n;
}

int theoretical_move_count(int rows, int cols) {
    if (rows < Board::kMinDim || rows > Board::kMaxDim ||
        cols < Board::kMinDim || cols > Board::kMaxDim)
        throw DimensionError("move count defined for 3..9 dimensions only");
    return 2 * (2 * rows * cols - rows - cols);
}

bool is_positionally_legal(const Board& board, const Move& move) {
    Cell t = move.target();
    return board.in_bounds(move.cell) && board.in_bounds(t) &&
           board.playable(move.cell) && board.playable(t);
}

std::vector<Move> enumerate_positional_swaps(const Board& board) {
    std::vector<Move> out;
    for (int r = 0; r < board.rows(); ++r)
        for (int c = 0; c < board.cols(); ++c)
            for (int d = 0; d < 4; ++d) {
                Move m{{r, c}, static_cast<Direction>(d)};
                if (is_positionally_legal(board, m)) out.push_back(m);
            }
    return out;
}

namespace {

struct Run {
    std::vector<Cell> cells;  // in scan order along the run
    Orientation orientation;
    int color;
};

std::vector<Run> collect_runs(const Board& b) {
    std::vector<Run> runs;
    auto flush = [&](std::vector<Cell>& acc, Orientation o, int color) {
        if (acc.size() >= 3) runs.push_back({acc, o, color});
        acc.clear();
    };
    for (int r = 0; r < b.rows(); ++r) {
        std::vector<Cell> acc;
        int color = 0;
        for (int c = 0; c < b.cols(); ++c) {
            Tile t = b.at(r, c);
            if (t.is_color() && t.color() == color) {
                acc.push_back({r, c});
            } else {
                flush(acc, Orientation::Horizontal, color);
                color = t.is_color() ? t.color() : 0;
                if (color) acc.push_back({r, c});
            }
        }
        flush(acc, Orientation::Horizontal, color);
    }
    for (int c = 0; c < b.cols(); ++c) {
        std::vector<Cell> acc;
        int color = 0;
        for (int r = 0; r < b.rows(); ++r) {
            Tile t = b.at(r, c);
            if (t.is_color() && t.color() == color) {
                acc.push_back({r, c});
            } else {
                flush(acc, Orientation::Vertical, color);
                color = t.is_color() ? t.color() : 0;
                if (color) acc.push_back({r, c});
            }
        }
        flush(acc, Orientation::Vertical, color);
    }
    return runs;
}

}  // namespace

std::vector<MatchGroup> find_matches(const Board& board) {
    std::vector<Run> runs = collect_runs(board);

    // Union runs that share a cell. Same-orientation maximal runs are
    // disjoint, so every union joins a horizontal with a vertical run.
    std::vector<std::size_t> parent(runs.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };

    std::vector<std::vector<std::size_t>> runs_at(
        static_cast<std::size_t>(board.rows()) * board.cols());
    auto cell_index = [&](Cell p) {
        return static_cast<std::size_t>(p.row) * board.cols() + p.col;
    };
    for (std::size_t i = 0; i < runs.size(); ++i)
        for (Cell p : runs[i].cells) {
            for (std::size_t j : runs_at[cell_index(p)]) {
                std::size_t ri = find(i), rj = find(j);
                if (ri != rj) parent[ri] = rj;
            }
            runs_at[cell_index(p)].push_back(i);
        }

    std::vector<std::vector<std::size_t>> members(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) members[find(i)].push_back(i);

    std::vector<MatchGroup> groups;
    for (std::size_t root = 0; root < runs.size(); ++root) {
        if (members[root].empty()) continue;
        MatchGroup g;
        g.color = runs[root].color;
        bool has_h = false, has_v = false;
        std::vector<Cell> all;
        for (std::size_t i : members[root]) {
            (runs[i].orientation == Orientation::Horizontal ? has_h : has_v) = true;
            all.insert(all.end(), runs[i].cells.begin(), runs[i].cells.end());
        }
        std::sort(all.begin(), all.end());
        if (has_h && has_v) {
            g.orientation = Orientation::Cross;
            // Pivot = first cell shared by two runs.
            g.pivot = all.front();
            for (std::size_t i = 1; i < all.size(); ++i)
                if (all[i] == all[i - 1]) {
                    g.pivot = all[i];
                    break;
                }
        } else {
            const Run& only = runs[members[root].front()];
            g.orientation = only.orientation;
            g.pivot = only.cells[(only.cells.size() - 1) / 2];
        }
        all.erase(std::unique(all.begin(), all.end()), all.end());
        g.cells = std::move(all);
        groups.push_back(std::move(g));
    }
    return groups;
}

namespace {

// Length of the same-color line through `p` after a hypothetical swap.
bool match_through(const Board& b, Cell p) {
    Tile t = b.at(p);
    if (!t.is_color()) return false;
    int run = 1;
    for (int c = p.col - 1; c >= 0 && b.at(p.row, c) == t; --c) ++run;
    for (int c = p.col + 1; c < b.cols() && b.at(p.row, c) == t; ++c) ++run;
    if (run >= 3) return true;
    run = 1;
    for (int r = p.row - 1; r >= 0 && b.at(r, p.col) == t; --r) ++run;
    for (int r = p.row + 1; r < b.rows() && b.at(r, p.col) == t; ++r) ++run;
    return run >= 3;
}

}  // namespace

bool is_valid_move(const Board& board, const Move& move) {
    if (!is_positionally_legal(board, move))
        throw MoveError("positionally forbidden move at (" + std::to_string(move.cell.row) +
                        "," + std::to_string(move.cell.col) + ")");
    Cell src = move.cell, dst = move.target();
    Tile a = board.at(src), b = board.at(dst);
    if (a.is_blocker() || b.is_blocker() || a.is_empty() || b.is_empty()) return false;
    if (a.is_joker() || b.is_joker()) return true;
    Board sim = board;
    sim.set(src, b);
    sim.set(dst, a);
    return match_through(sim, src) || match_through(sim, dst);
}

void apply_gravity(Board& board) {
    for (int c = 0; c < board.cols(); ++c) {
        int r = 0;
        while (r < board.rows()) {
            if (!board.playable(r, c) || board.at(r, c).is_blocker()) {
                ++r;
                continue;
            }
            int end = r;
            while (end < board.rows() && board.playable(end, c) && !board.at(end, c).is_blocker())
                ++end;
            // Segment [r, end): let tiles settle at the bottom, order kept.
            std::vector<Tile> stack;
            for (int i = r; i < end; ++i)
                if (!board.at(i, c).is_empty()) stack.push_back(board.at(i, c));
            int write = end - 1;
            for (auto it = stack.rbegin(); it != stack.rend(); ++it) board.set(write--, c, *it);
            while (write >= r) board.set(write--, c, Tile::empty());
            r = end;
        }
    }
}

namespace {

void refill(Board& board, Rng& rng) {
    for (int c = 0; c < board.cols(); ++c)
        for (int r = 0; r < board.rows(); ++r)
            if (board.playable(r, c) && board.at(r, c).is_empty())
                board.set(r, c, Tile::color(1 + static_cast<int>(rng.index(board.palette()))));
}

int most_frequent_color(const Board& b) {
    std::array<int, 7> counts{};
    for (int r = 0; r < b.rows(); ++r)
        for (int c = 0; c < b.cols(); ++c)
            if (b.at(r, c).is_color()) ++counts[b.at(r, c).color()];
    int best = 1;
    for (int col = 2; col <= Tile::kMaxColor; ++col)
        if (counts[col] > counts[best]) best = col;
    return best;
}

using Flags = std::vector<std::uint8_t>;

void blast_from_joker(const Board& b, Cell at, JokerKind kind, Tile partner, Flags& blast) {
    auto mark = [&](int r, int c) {
        if (b.in_bounds(r, c) && b.playable(r, c))
            blast[static_cast<std::size_t>(r) * b.cols() + c] = 1;
    };
    switch (kind) {
        case JokerKind::StripedRow:
            for (int c = 0; c < b.cols(); ++c) mark(at.row, c);
            break;
        case JokerKind::StripedCol:
            for (int r = 0; r < b.rows(); ++r) mark(r, at.col);
            break;
        case JokerKind::Wrapped:
            for (int r = at.row - 1; r <= at.row + 1; ++r)
                for (int c = at.col - 1; c <= at.col + 1; ++c) mark(r, c);
            break;
        case JokerKind::ColorBomb: {
            // Swapped with a color: clear that color. In a joker-joker swap
            // there is no partner color; clear the most frequent one.
            int target = partner.is_color() ? partner.color() : most_frequent_color(b);
            for (int r = 0; r < b.rows(); ++r)
                for (int c = 0; c < b.cols(); ++c)
                    if (b.at(r, c).is_color() && b.at(r, c).color() == target) mark(r, c);
            mark(at.row, at.col);
            break;
        }
    }
}

}  // namespace

// Cross beats 4-in-line when one swap produces both.
bool joker_spawned_by(const MatchGroup& g, JokerKind& kind) {
    if (g.orientation == Orientation::Cross) {
        kind = JokerKind::Wrapped;
        return true;
    }
    if (g.length() >= 5) {
        kind = JokerKind::ColorBomb;
        return true;
    }
    if (g.length() == 4) {
        kind = g.orientation == Orientation::Horizontal ? JokerKind::StripedRow
                                                        : JokerKind::StripedCol;
        return true;
    }
    return false;
}

ApplyResult apply_move(const Board& board, const Move& move, Rng& rng) {
    if (!is_positionally_legal(board, move))
        throw MoveError("positionally forbidden move at (" + std::to_string(move.cell.row) +
                        "," + std::to_string(move.cell.col) + ")");
    if (!is_valid_move(board, move)) return {board, {}, false};

    Board work = board;
    Cell src = move.cell, dst = move.target();
    Tile moved = work.at(src), partner = work.at(dst);
    work.set(src, partner);
    work.set(dst, moved);

    CascadeOutcome out;
    const std::size_t ncells = static_cast<std::size_t>(work.rows()) * work.cols();
    Flags blast(ncells, 0);
    // A swap-triggered joker activation counts as one resolution, so a pure
    // blast with no follow-up match still reports matches_resolved >= 1.
    if (moved.is_joker()) {
        blast_from_joker(work, dst, moved.joker_kind(), partner, blast);
        ++out.matches_resolved;
    }
    if (partner.is_joker()) {
        blast_from_joker(work, src, partner.joker_kind(), moved, blast);
        ++out.matches_resolved;
    }

    bool first_round = true;
    for (int round = 0; round < 10000; ++round) {
        std::vector<MatchGroup> groups = find_matches(work);
        bool any_blast = std::any_of(blast.begin(), blast.end(), [](auto f) { return f != 0; });
        if (groups.empty() && !any_blast) break;

        out.matches_resolved += static_cast<int>(groups.size());

        Flags clear = blast;
        std::vector<std::pair<Cell, Tile>> spawns;
        for (const MatchGroup& g : groups) {
            for (Cell p : g.cells)
                clear[static_cast<std::size_t>(p.row) * work.cols() + p.col] = 1;
            JokerKind kind;
            if (joker_spawned_by(g, kind)) {
                Tile joker = Tile::joker(kind);
                Cell at = g.pivot;
                if (first_round) {
                    // The swapped cell hosts the joker when it took part.
                    auto in_group = [&](Cell q) {
                        return std::binary_search(g.cells.begin(), g.cells.end(), q);
                    };
                    if (in_group(dst)) at = dst;
                    else if (in_group(src)) at = src;
                }
                spawns.emplace_back(at, joker);
            }
        }

        std::vector<Cell> removed;
        for (int r = 0; r < work.rows(); ++r)
            for (int c = 0; c < work.cols(); ++c) {
                if (!clear[static_cast<std::size_t>(r) * work.cols() + c]) continue;
                Tile t = work.at(r, c);
                if (t.is_color()) {
                    ++out.cleared_count;
                    ++out.cleared_by_color[t.color()];
                    work.set(r, c, Tile::empty());
                    removed.push_back({r, c});
                } else if (t.is_joker()) {
                    ++out.cleared_count;
                    work.set(r, c, Tile::empty());
                    removed.push_back({r, c});
                } else if (t.is_blocker()) {
                    ++out.blockers_cleared;
                    work.set(r, c, Tile::empty());
                }
            }

        // One adjacent clear destroys a blocker.
        static constexpr int dr[4] = {-1, 1, 0, 0};
        static constexpr int dc[4] = {0, 0, -1, 1};
        for (Cell p : removed)
            for (int k = 0; k < 4; ++k) {
                int r = p.row + dr[k], c = p.col + dc[k];
                if (work.in_bounds(r, c) && work.at(r, c).is_blocker()) {
                    ++out.blockers_cleared;
                    work.set(r, c, Tile::empty());
                }
            }

        for (auto& [at, joker] : spawns)
            if (work.at(at).is_empty()) {
                work.set(at, joker);
                ++out.jokers_created;
            }

        apply_gravity(work);
        refill(work, rng);
        std::fill(blast.begin(), blast.end(), 0);
        first_round = false;
    }

    return {std::move(work), out, true};
}

int hamming_distance(const Board& a, const Board& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("hamming_distance requires identical board dimensions");
    int d = 0;
    for (int r = 0; r < a.rows(); ++r)
        for (int c = 0; c < a.cols(); ++c)
            if (a.at(r, c) != b.at(r, c)) ++d;
    return d;
}

bool has_valid_move(const Board& board) {
    for (int r = 0; r < board.rows(); ++r)
        for (int c = 0; c < board.cols(); ++c)
            for (int d = 0; d < 4; ++d) {
                Move m{{r, c}, static_cast<Direction>(d)};
                if (is_positionally_legal(board, m) && is_valid_move(board, m)) return true;
            }
    return false;
}

Board ensure_playable(const Board& board, Rng& rng) {
    if (has_valid_move(board)) return board;

    std::vector<Cell> color_cells;
    for (int r = 0; r < board.rows(); ++r)
        for (int c = 0; c < board.cols(); ++c)
            if (board.at(r, c).is_color()) color_cells.push_back({r, c});

    Board work = board;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<Tile> tiles;
        tiles.reserve(color_cells.size());
        for (Cell p : color_cells) tiles.push_back(work.at(p));
        rng.shuffle(tiles);
        for (std::size_t i = 0; i < color_cells.size(); ++i) work.set(color_cells[i], tiles[i]);
        if (find_matches(work).empty() && has_valid_move(work)) return work;
    }
    throw UnplayableBoardError("no playable configuration found within 1000 reshuffles");
}

Board zero_pad(const Board& board) {
    if (board.rows() == Board::kMaxDim && board.cols() == Board::kMaxDim) return board;
    Board padded(Board::kMaxDim, Board::kMaxDim, board.palette());
    for (int r = 0; r < Board::kMaxDim; ++r)
        for (int c = 0; c < Board::kMaxDim; ++c) padded.set_playable(r, c, false);
    for (int r = 0; r < board.rows(); ++r)
        for (int c = 0; c < board.cols(); ++c) {
            padded.set(r, c, board.at(r, c));
            padded.set_playable(r, c, board.playable(r, c));
        }
    return padded;
}

Board generate_filled(const Board& shape, Rng& rng) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        Board work = shape;
        for (int r = 0; r < work.rows(); ++r)
            for (int c = 0; c < work.cols(); ++c) {
                if (!work.playable(r, c) || !work.at(r, c).is_empty()) continue;
                // Re-roll colors that would complete a triple with the two
                // cells to the left or above.
                bool used[7] = {};
                auto same2 = [&](int r1, int c1, int r2, int c2) -> int {
                    if (!work.in_bounds(r1, c1) || !work.in_bounds(r2, c2)) return 0;
                    Tile a = work.at(r1, c1), b = work.at(r2, c2);
                    return (a.is_color() && a == b) ? a.color() : 0;
                };
                if (int col = same2(r, c - 1, r, c - 2)) used[col] = true;
                if (int col = same2(r - 1, c, r - 2, c)) used[col] = true;
                std::vector<int> allowed;
                for (int col = 1; col <= work.palette(); ++col)
                    if (!used[col]) allowed.push_back(col);
                int pick = allowed.empty() ? 1 + static_cast<int>(rng.index(work.palette()))
                                           : allowed[rng.index(allowed.size())];
                work.set(r, c, Tile::color(pick));
            }
        // Tight palettes can leave stray matches; repair them locally.
        for (int repair = 0; repair < 500; ++repair) {
            std::vector<MatchGroup> groups = find_matches(work);
            if (groups.empty()) break;
            for (const MatchGroup& g : groups) {
                int cur = work.at(g.pivot).color();
                int next = 1 + static_cast<int>(rng.index(work.palette()));
                if (work.palette() > 1 && next == cur) next = 1 + next % work.palette();
                work.set(g.pivot, Tile::color(next));
            }
        }
        if (!find_matches(work).empty()) continue;
        try {
            return ensure_playable(work, rng);
        } catch (const UnplayableBoardError&) {
            // fall through to a fresh fill
        }
    }
    throw UnplayableBoardError("could not generate a playable board for this layout");
}

}  // namespace jg::engine
