#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "jellygym/agents.hpp"
#include "jellygym/levels.hpp"

namespace jg::harness {

enum class PlayMode : std::uint8_t { Train, Eval };

// A synthetic player. Eval selection is const so campaigns can share one
// player across threads; training hooks are no-ops except for the learning
// agent.
class Player {
public:
    virtual ~Player() = default;

    virtual std::string name() const = 0;
    virtual const agents::RewardConfig& reward_config() const;

    virtual engine::Move select_eval(const levels::MatchState& state, Rng& rng) const = 0;
    virtual engine::Move select_train(const levels::MatchState& state, Rng& rng) {
        return select_eval(state, rng);
    }

    virtual void observe(const levels::MatchState& /*before*/, const engine::Move& /*move*/,
                         const levels::MatchState& /*after*/,
                         const engine::CascadeOutcome& /*outcome*/, bool /*valid*/,
                         double /*reward*/) {}
    virtual void end_episode() {}

    // Writes the player's model, if it has one. Returns false otherwise.
    virtual bool save_model(const std::string& /*path*/, const nn::CheckpointMeta& /*meta*/) const {
        return false;
    }
};

class RandomPlayer final : public Player {
public:
    std::string name() const override { return "random"; }
    engine::Move select_eval(const levels::MatchState& state, Rng& rng) const override {
        return agents::random_player_select(state, rng);
    }
};

class SmartPlayer final : public Player {
public:
    std::string name() const override { return "smart"; }
    engine::Move select_eval(const levels::MatchState& state, Rng& rng) const override {
        return agents::smart_player_select(state, rng);
    }
};

// The learning agent: per-move supervised feedback, replayed Bellman updates
// against the oracle, oracle sync at episode end.
class JellyGymPlayer final : public Player {
public:
    JellyGymPlayer(agents::AgentConfig cfg, std::uint64_t seed);

    std::string name() const override { return "jellygym"; }
    const agents::RewardConfig& reward_config() const override { return agent_.config().reward; }

    engine::Move select_eval(const levels::MatchState& state, Rng& rng) const override;
    engine::Move select_train(const levels::MatchState& state, Rng& rng) override;

    void observe(const levels::MatchState& before, const engine::Move& move,
                 const levels::MatchState& after, const engine::CascadeOutcome& outcome,
                 bool valid, double reward) override;
    void end_episode() override;

    bool save_model(const std::string& path, const nn::CheckpointMeta& meta) const override;

    agents::DdqnAgent& agent() { return agent_; }
    const agents::DdqnAgent& agent() const { return agent_; }

private:
    agents::DdqnAgent agent_;
};

struct MatchResult {
    std::string level_name;
    std::string agent_name;
    bool won = false;
    int valid_moves_used = 0;
    int invalid_attempts = 0;
    double total_reward = 0.0;
    std::uint64_t seed = 0;
};

struct EvalRow {
    std::string level;
    std::string agent;
    int matches = 0;
    int wins = 0;
    double success_rate = 0.0;
    double mean_moves = 0.0;
    std::uint64_t base_seed = 0;
};

using EvaluationReport = std::vector<EvalRow>;

struct CurvePoint {
    int episode = 0;  // 1-based
    bool won = false;
    double cumulative_success_rate = 0.0;
    double episode_reward = 0.0;
};

using TrainingCurve = std::vector<CurvePoint>;

// Attempt cap guaranteeing termination even with a stalling player.
inline constexpr int kAttemptCapPerBudgetMove = 50;

MatchResult play_match(Player& player, const levels::LevelSpec& level, std::uint64_t seed,
                       PlayMode mode);
// Read-only playout; safe to run concurrently on a shared player.
MatchResult play_match_eval(const Player& player, const levels::LevelSpec& level,
                            std::uint64_t seed);

// Eval-mode matches with seeds base_seed..base_seed+matches-1, in parallel.
EvalRow evaluate(const Player& player, const levels::LevelSpec& level, int matches,
                 std::uint64_t base_seed);

// Sequential train-mode episodes with seeds base_seed..; appends one curve
// row per episode to curve_path and writes the final model to model_path
// (empty paths skip the file).
TrainingCurve train(Player& player, const levels::LevelSpec& level, int episodes,
                    std::uint64_t base_seed, const std::string& curve_path,
                    const std::string& model_path);

// Full level x agent cross product. Agent names: random, smart, jellygym
// (optionally "jellygym:/path/to/model.json").
EvaluationReport compare(const std::vector<levels::LevelSpec>& levels,
                         const std::vector<std::string>& agent_names, int matches,
                         std::uint64_t base_seed, const std::string& report_path);

std::unique_ptr<Player> make_player(const std::string& spec, std::uint64_t seed);

void write_report(const EvaluationReport& report, std::ostream& out);
void write_curve(const TrainingCurve& curve, std::ostream& out);

// Loads a level from a path, or a shipped tier name like "tier1".
levels::LevelSpec resolve_level(const std::string& arg);

// Fast invariant suite behind the `selfcheck` subcommand; returns the number
// of failed checks.
int selfcheck(std::ostream& out);

// The full command-line interface; returns the process exit status
// (0 success, 1 runtime error, 2 usage error).
int run_cli(const std::vector<std::string>& args);

}  // namespace jg::harness
