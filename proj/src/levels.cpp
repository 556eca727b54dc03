#include "jellygym/levels.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace jg::levels {

namespace {

// Non-hole cells; blockers count as playable board area.
int playable_cell_count(const LevelSpec& level) {
    if (level.layout.empty()) return level.rows * level.cols;
    int n = 0;
    for (const auto& row : level.layout)
        for (char ch : row)
            if (ch != '#') ++n;
    return n;
}

}  // namespace

void LevelSpec::validate() const {
    if (rows < engine::Board::kMinDim || rows > engine::Board::kMaxDim)
        throw ValidationError("level '" + name + "': rows must be within 3..9");
    if (cols < engine::Board::kMinDim || cols > engine::Board::kMaxDim)
        throw ValidationError("level '" + name + "': cols must be within 3..9");
    if (palette < 2 || palette > engine::Tile::kMaxColor)
        throw ValidationError("level '" + name + "': palette must be within 2..6");
    if (move_budget < 1)
        throw ValidationError("level '" + name + "': move_budget must be >= 1");
    if (objective.target < 1)
        throw ValidationError("level '" + name + "': objective.target must be >= 1");
    if (objective.kind == ObjectiveKind::CollectColor &&
        (objective.color < 1 || objective.color > palette))
        throw ValidationError("level '" + name + "': objective.color must be within the palette");
    if (!layout.empty()) {
        if (static_cast<int>(layout.size()) != rows)
            throw ValidationError("level '" + name + "': layout row count must equal rows");
        for (const auto& row : layout) {
            if (static_cast<int>(row.size()) != cols)
                throw ValidationError("level '" + name + "': layout row length must equal cols");
            for (char ch : row)
                if (ch != '.' && ch != '#' && ch != 'B')
                    throw ValidationError("level '" + name +
                                          "': layout cells must be '.', '#' or 'B'");
        }
    }
    if (playable_cell_count(*this) < 9)
        throw ValidationError("level '" + name + "': needs at least 9 playable cells");
}

engine::Board LevelSpec::shape_board() const {
    engine::Board board(rows, cols, palette);
    if (layout.empty()) return board;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            switch (layout[r][c]) {
                case '#': board.set_playable(r, c, false); break;
                case 'B': board.set(r, c, engine::Tile::blocker()); break;
                default: break;
            }
        }
    return board;
}

namespace {

using nlohmann::json;

template <typename T>
T require_field(const json& doc, const char* field) {
    if (!doc.contains(field)) throw ParseError(std::string("missing field '") + field + "'");
    try {
        return doc.at(field).get<T>();
    } catch (const json::exception&) {
        throw ParseError(std::string("field '") + field + "' has the wrong type");
    }
}

template <typename T>
T optional_field(const json& doc, const char* field, T fallback) {
    if (!doc.contains(field)) return fallback;
    try {
        return doc.at(field).get<T>();
    } catch (const json::exception&) {
        throw ParseError(std::string("field '") + field + "' has the wrong type");
    }
}

}  // namespace

LevelSpec parse_level(const std::string& document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::exception& e) {
        throw ParseError(std::string("level document is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("level document must be a JSON object");

    LevelSpec level;
    level.name = optional_field<std::string>(doc, "name", "");
    level.rows = require_field<int>(doc, "rows");
    level.cols = require_field<int>(doc, "cols");
    level.palette = require_field<int>(doc, "palette");
    level.move_budget = require_field<int>(doc, "move_budget");

    if (!doc.contains("objective")) throw ParseError("missing field 'objective'");
    const json& obj = doc.at("objective");
    if (!obj.is_object()) throw ParseError("field 'objective' must be an object");
    std::string type = require_field<std::string>(obj, "type");
    if (type == "collect_matches") level.objective.kind = ObjectiveKind::CollectMatches;
    else if (type == "collect_color") level.objective.kind = ObjectiveKind::CollectColor;
    else if (type == "clear_blockers") level.objective.kind = ObjectiveKind::ClearBlockers;
    else throw ParseError("field 'objective.type' must be one of collect_matches, collect_color, clear_blockers");
    level.objective.target = require_field<int>(obj, "target");
    if (level.objective.kind == ObjectiveKind::CollectColor)
        level.objective.color = require_field<int>(obj, "color");

    level.layout = optional_field<std::vector<std::string>>(doc, "layout", {});
    if (doc.contains("seed")) level.seed = require_field<std::uint64_t>(doc, "seed");

    level.validate();
    return level;
}

LevelSpec load_level_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open level file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_level(buf.str());
    } catch (ParseError& e) {
        throw ParseError(path + ": " + e.what());
    } catch (ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

MatchState init_match(const LevelSpec& level, Rng& rng) {
    level.validate();
    MatchState state;
    state.level = level;
    state.board = engine::generate_filled(level.shape_board(), rng);
    state.moves_left = level.move_budget;
    state.progress = 0;
    state.status = Status::InPlay;
    return state;
}

StepResult step(const MatchState& state, const engine::Move& move, Rng& rng) {
    if (state.status != Status::InPlay)
        throw LifecycleError("step on a terminal match");

    engine::ApplyResult applied = engine::apply_move(state.board, move, rng);
    if (!applied.valid) return {state, applied.outcome, false};

    MatchState next = state;
    next.board = std::move(applied.board);
    next.moves_left -= 1;
    switch (state.level.objective.kind) {
        case ObjectiveKind::CollectMatches:
            next.progress += applied.outcome.matches_resolved;
            break;
        case ObjectiveKind::CollectColor:
            next.progress += applied.outcome.cleared_by_color[state.level.objective.color];
            break;
        case ObjectiveKind::ClearBlockers:
            next.progress += applied.outcome.blockers_cleared;
            break;
    }
    if (next.progress >= state.level.objective.target) next.status = Status::Won;
    else if (next.moves_left == 0) next.status = Status::Lost;

    if (next.status == Status::InPlay)
        next.board = engine::ensure_playable(next.board, rng);

    return {std::move(next), applied.outcome, true};
}

double objective_scalar(const MatchState& state) {
    int remaining = std::max(0, state.level.objective.target - state.progress);
    return static_cast<double>(remaining) / state.level.objective.target;
}

}  // namespace jg::levels
