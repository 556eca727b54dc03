#include "jellygym/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace jg::harness {

const agents::RewardConfig& Player::reward_config() const {
    static const agents::RewardConfig kDefault{};
    return kDefault;
}

JellyGymPlayer::JellyGymPlayer(agents::AgentConfig cfg, std::uint64_t seed)
    : agent_(cfg, seed) {}

engine::Move JellyGymPlayer::select_eval(const levels::MatchState& state, Rng&) const {
    return agent_.select_greedy(state);
}

engine::Move JellyGymPlayer::select_train(const levels::MatchState& state, Rng& rng) {
    return agent_.select_move(state, nn::Mode::Train, rng);
}

void JellyGymPlayer::observe(const levels::MatchState& before, const engine::Move& move,
                             const levels::MatchState& after,
                             const engine::CascadeOutcome&, bool, double reward) {
    int action = agents::move_to_action(move);
    agents::StateVector state = agents::encode_state(before);

    agent_.supervised_feedback_step(state, action, reward);

    agents::Transition t;
    t.state = std::move(state);
    t.action = action;
    t.reward = reward;
    t.next_state = agents::encode_state(after);
    t.terminal = after.status != levels::Status::InPlay;
    if (!t.terminal) t.next_valid = agents::valid_action_indices(after.board);
    int moves_used = before.level.move_budget - before.moves_left;
    t.gamma = agents::discount_at(moves_used, before.level.move_budget, reward_config());
    agent_.remember(std::move(t));

    if (agent_.memory().size() >= agent_.memory().sample_size())
        agent_.ddqn_replay_step(agent_.sample_replay());
}

void JellyGymPlayer::end_episode() {
    agent_.sync_oracle();
    agent_.set_episodes_trained(agent_.episodes_trained() + 1);
}

bool JellyGymPlayer::save_model(const std::string& path, const nn::CheckpointMeta& meta) const {
    nn::save_checkpoint(agent_.main(), nullptr, path, meta);
    return true;
}

namespace {

// Distinct per-match randomness: one stream feeds the board (refills,
// reshuffles), one the player's sampling.
constexpr std::uint64_t kBoardStream = 1;
constexpr std::uint64_t kAgentStream = 2;

template <typename SelectFn>
MatchResult run_match(const levels::LevelSpec& level, std::uint64_t seed,
                      const std::string& agent_name, const agents::RewardConfig& reward_cfg,
                      SelectFn&& select, Player* training) {
    Rng board_rng = Rng::derive(seed, kBoardStream);
    Rng agent_rng = Rng::derive(seed, kAgentStream);

    levels::MatchState state = levels::init_match(level, board_rng);
    MatchResult result;
    result.level_name = level.name;
    result.agent_name = agent_name;
    result.seed = seed;

    const int cap = kAttemptCapPerBudgetMove * level.move_budget;
    for (int attempts = 0; attempts < cap && state.status == levels::Status::InPlay; ++attempts) {
        engine::Move move = select(state, agent_rng);
        levels::StepResult stepped = levels::step(state, move, board_rng);
        double reward =
            agents::compute_reward(state, stepped.state, stepped.outcome, stepped.valid, reward_cfg);
        result.total_reward += reward;
        if (!stepped.valid) ++result.invalid_attempts;
        if (training)
            training->observe(state, move, stepped.state, stepped.outcome, stepped.valid, reward);
        state = std::move(stepped.state);
    }
    if (training) training->end_episode();

    result.won = state.status == levels::Status::Won;
    result.valid_moves_used = level.move_budget - state.moves_left;
    return result;
}

}  // namespace

MatchResult play_match_eval(const Player& player, const levels::LevelSpec& level,
                            std::uint64_t seed) {
    return run_match(
        level, seed, player.name(), player.reward_config(),
        [&](const levels::MatchState& s, Rng& rng) { return player.select_eval(s, rng); },
        nullptr);
}

MatchResult play_match(Player& player, const levels::LevelSpec& level, std::uint64_t seed,
                       PlayMode mode) {
    if (mode == PlayMode::Eval) return play_match_eval(player, level, seed);
    return run_match(
        level, seed, player.name(), player.reward_config(),
        [&](const levels::MatchState& s, Rng& rng) { return player.select_train(s, rng); },
        &player);
}

EvalRow evaluate(const Player& player, const levels::LevelSpec& level, int matches,
                 std::uint64_t base_seed) {
    if (matches < 1) throw ParameterError("evaluate requires matches >= 1");
    std::vector<MatchResult> results(matches);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < matches; ++i) {
        try {
            results[i] = play_match_eval(player, level, base_seed + static_cast<std::uint64_t>(i));
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    EvalRow row;
    row.level = level.name;
    row.agent = player.name();
    row.matches = matches;
    row.base_seed = base_seed;
    long moves = 0;
    for (const MatchResult& r : results) {
        row.wins += r.won ? 1 : 0;
        moves += r.valid_moves_used;
    }
    row.success_rate = static_cast<double>(row.wins) / matches;
    row.mean_moves = static_cast<double>(moves) / matches;
    return row;
}

TrainingCurve train(Player& player, const levels::LevelSpec& level, int episodes,
                    std::uint64_t base_seed, const std::string& curve_path,
                    const std::string& model_path) {
    if (episodes < 1) throw ParameterError("train requires episodes >= 1");

    std::ofstream curve_file;
    if (!curve_path.empty()) {
        curve_file.open(curve_path);
        if (!curve_file) throw FileError("cannot write curve file: " + curve_path);
        curve_file << "episode,won,cumulative_success_rate,episode_reward\n";
    }

    TrainingCurve curve;
    curve.reserve(episodes);
    int wins = 0;
    for (int e = 0; e < episodes; ++e) {
        MatchResult r = play_match(player, level, base_seed + static_cast<std::uint64_t>(e),
                                   PlayMode::Train);
        wins += r.won ? 1 : 0;
        CurvePoint p;
        p.episode = e + 1;
        p.won = r.won;
        p.cumulative_success_rate = static_cast<double>(wins) / (e + 1);
        p.episode_reward = r.total_reward;
        curve.push_back(p);
        if (curve_file) {
            char line[128];
            std::snprintf(line, sizeof(line), "%d,%d,%.6f,%.6f\n", p.episode, p.won ? 1 : 0,
                          p.cumulative_success_rate, p.episode_reward);
            curve_file << line << std::flush;
        }
    }

    if (!model_path.empty()) {
        nn::CheckpointMeta meta;
        meta.seed = base_seed;
        meta.created = "train(level=" + level.name + ",episodes=" + std::to_string(episodes) +
                       ",seed=" + std::to_string(base_seed) + ")";
        if (const auto* jelly = dynamic_cast<const JellyGymPlayer*>(&player))
            meta.episodes_trained = jelly->agent().episodes_trained();
        player.save_model(model_path, meta);
    }
    return curve;
}

std::unique_ptr<Player> make_player(const std::string& spec, std::uint64_t seed) {
    std::string name = spec;
    std::string model;
    if (auto colon = spec.find(':'); colon != std::string::npos) {
        name = spec.substr(0, colon);
        model = spec.substr(colon + 1);
    }
    if (name == "random") return std::make_unique<RandomPlayer>();
    if (name == "smart") return std::make_unique<SmartPlayer>();
    if (name == "jellygym") {
        auto player = std::make_unique<JellyGymPlayer>(agents::AgentConfig{}, seed);
        if (!model.empty()) {
            nn::Checkpoint ckpt = nn::load_checkpoint(model, nn::kAgentArchitecture);
            player->agent().load(ckpt.net, ckpt.adam ? &*ckpt.adam : nullptr);
            player->agent().set_episodes_trained(ckpt.meta.episodes_trained);
        }
        return player;
    }
    throw UsageError("unknown agent '" + name + "' (expected random, smart or jellygym)");
}

EvaluationReport compare(const std::vector<levels::LevelSpec>& levels,
                         const std::vector<std::string>& agent_names, int matches,
                         std::uint64_t base_seed, const std::string& report_path) {
    if (levels.empty() || agent_names.empty())
        throw ParameterError("compare requires at least one level and one agent");

    EvaluationReport report;
    for (const levels::LevelSpec& level : levels) {
        for (const std::string& name : agent_names) {
            std::unique_ptr<Player> player = make_player(name, base_seed);
            report.push_back(evaluate(*player, level, matches, base_seed));
        }
    }

    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw FileError("cannot write report: " + report_path);
        write_report(report, out);
    }
    return report;
}

void write_report(const EvaluationReport& report, std::ostream& out) {
    out << "level,agent,matches,wins,success_rate,mean_moves,seed\n";
    for (const EvalRow& row : report) {
        char line[256];
        std::snprintf(line, sizeof(line), "%s,%s,%d,%d,%.6f,%.4f,%llu\n", row.level.c_str(),
                      row.agent.c_str(), row.matches, row.wins, row.success_rate, row.mean_moves,
                      static_cast<unsigned long long>(row.base_seed));
        out << line;
    }
}

void write_curve(const TrainingCurve& curve, std::ostream& out) {
    out << "episode,won,cumulative_success_rate,episode_reward\n";
    for (const CurvePoint& p : curve) {
        char line[128];
        std::snprintf(line, sizeof(line), "%d,%d,%.6f,%.6f\n", p.episode, p.won ? 1 : 0,
                      p.cumulative_success_rate, p.episode_reward);
        out << line;
    }
}

levels::LevelSpec resolve_level(const std::string& arg) {
    namespace fs = std::filesystem;
    if (fs::exists(arg)) return levels::load_level_file(arg);
    // Shipped tier shorthand: "tier1" .. "tier5" (or "tier-1").
    std::string compact = arg;
    compact.erase(std::remove(compact.begin(), compact.end(), '-'), compact.end());
    if (compact.size() == 5 && compact.rfind("tier", 0) == 0 && compact[4] >= '1' &&
        compact[4] <= '5') {
        std::string path = std::string("levels/") + compact + ".json";
        if (fs::exists(path)) return levels::load_level_file(path);
        throw FileError("level '" + arg + "' not found (looked for " + path + ")");
    }
    throw FileError("level file not found: " + arg);
}

}  // namespace jg::harness
