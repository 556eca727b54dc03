#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jellygym/engine.hpp"

namespace jg::levels {

enum class ObjectiveKind : std::uint8_t { CollectMatches, CollectColor, ClearBlockers };

struct Objective {
    ObjectiveKind kind = ObjectiveKind::CollectMatches;
    int target = 1;
    int color = 0;  // CollectColor only
};

// A level definition: board shape, palette, move budget and objective.
// Layout rows use '.' = playable, '#' = hole, 'B' = blocker; omitted layout
// means a full rectangle.
struct LevelSpec {
    std::string name;
    int rows = 9;
    int cols = 9;
    int palette = 6;
    int move_budget = 1;
    Objective objective;
    std::vector<std::string> layout;
    std::optional<std::uint64_t> seed;

    void validate() const;

    // Empty board carrying the layout's holes and blockers.
    engine::Board shape_board() const;
};

LevelSpec parse_level(const std::string& document);
LevelSpec load_level_file(const std::string& path);

enum class Status : std::uint8_t { InPlay, Won, Lost };

struct MatchState {
    LevelSpec level;
    engine::Board board{engine::Board::kMinDim, engine::Board::kMinDim};
    int moves_left = 0;
    int progress = 0;
    Status status = Status::InPlay;
};

// Board populated per the layout with no pre-existing matches and at least
// one valid move; full budget, zero progress.
MatchState init_match(const LevelSpec& level, Rng& rng);

struct StepResult {
    MatchState state;
    engine::CascadeOutcome outcome;
    bool valid = false;
};

// Applies the move. Valid moves consume one from the counter and add
// objective units; invalid moves leave the state untouched. Raises
// LifecycleError on a terminal state.
StepResult step(const MatchState& state, const engine::Move& move, Rng& rng);

// Remaining objective fraction in [0, 1].
double objective_scalar(const MatchState& state);

}  // namespace jg::levels
