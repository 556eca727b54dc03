#pragma once

#include <deque>
#include <vector>

#include "jellygym/engine.hpp"
#include "jellygym/levels.hpp"
#include "jellygym/nn.hpp"

namespace jg::agents {

inline constexpr int kGridDim = 9;
inline constexpr int kBoardInputs = kGridDim * kGridDim;  // 81
inline constexpr int kStateSize = kBoardInputs + 1;       // + objective neuron
inline constexpr int kActionCount = kBoardInputs * 4;     // 324

using StateVector = std::vector<double>;  // length kStateSize

// Network input code for one tile: 0 for empty/padding, c/6 for colors,
// -1/6 for blockers, 7/6..10/6 for the four joker kinds.
double tile_code(engine::Tile tile);

// Board entries row-major over the zero-padded 9x9 grid, then the remaining
// objective fraction.
StateVector encode_state(const levels::MatchState& state);
StateVector encode_board(const engine::Board& board, double objective);

// Action index <-> move bijection: index = (row*9 + col)*4 + direction with
// directions ordered Up, Right, Down, Left.
engine::Move action_to_move(int index);
int move_to_action(const engine::Move& move);

// Indices of engine-validated moves, ascending.
std::vector<int> valid_action_indices(const engine::Board& board);

// Zero off-mask, renormalized over the valid set; uniform over the valid set
// if the surviving mass underflows to zero.
std::vector<double> masked_distribution(std::span<const double> probabilities,
                                        const std::vector<int>& valid);

engine::Move random_player_select(const levels::MatchState& state, Rng& rng);

// Prefers the move whose immediate matches spawn the best joker
// (ColorBomb > Wrapped > Striped > none); uniform among the best.
engine::Move smart_player_select(const levels::MatchState& state, Rng& rng);

// Joker rank a move would create: 0 none, 1 striped, 2 wrapped, 3 color bomb.
int move_joker_rank(const engine::Board& board, const engine::Move& move);

struct RewardConfig {
    double invalid_penalty = -1.0;
    bool progress_required = true;
    double gamma_min = 0.50;
    double gamma_max = 0.99;
};

// Hamming distance between the boards for a valid move that advanced the
// objective; the penalty otherwise.
double compute_reward(const levels::MatchState& before, const levels::MatchState& after,
                      const engine::CascadeOutcome& outcome, bool valid,
                      const RewardConfig& cfg);

// Discount grows linearly from gamma_min (fresh counter) to gamma_max
// (budget exhausted).
double discount_at(int moves_used, int budget, const RewardConfig& cfg);

// (1 - alpha) * q_old + alpha * (reward + gamma * max_next_q).
double bellman_update(double q_old, double reward, double max_next_q, double alpha, double gamma);

struct Transition {
    StateVector state;
    int action = 0;
    double reward = 0.0;
    StateVector next_state;
    std::vector<int> next_valid;  // valid action indices in the next state
    double gamma = 0.0;           // discount in effect at this step
    bool terminal = false;
};

// Bounded FIFO of transitions with uniform sampling without replacement.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity = 10000, std::size_t sample_size = 32);

    void push(Transition t);
    std::size_t size() const { return buffer_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::size_t sample_size() const { return sample_size_; }
    const Transition& at(std::size_t i) const { return buffer_[i]; }

    // sample_size transitions when available, otherwise everything stored.
    std::vector<Transition> sample(Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t sample_size_;
    std::deque<Transition> buffer_;
};

struct AgentConfig {
    int k1 = 20;            // optimizer steps per supervised feedback
    int k2 = 5;             // optimizer steps per replayed transition
    double alpha_rl = 0.1;  // Bellman mixing rate (distinct from Adam's alpha)
    double adam_alpha = 1e-3;
    RewardConfig reward;
    std::size_t replay_capacity = 10000;
    std::size_t batch_size = 32;
    int pretrain_passes = 10;
};

// Main + oracle network pair trained per move with the three-step procedure:
// supervised feedback on progressing moves, replayed Bellman targets against
// the oracle, and an invalid-move penalty before each prediction.
class DdqnAgent {
public:
    DdqnAgent(AgentConfig cfg, std::uint64_t seed);

    const AgentConfig& config() const { return cfg_; }
    nn::Network& main() { return main_; }
    const nn::Network& main() const { return main_; }
    nn::Network& oracle() { return oracle_; }
    const nn::Network& oracle() const { return oracle_; }
    nn::AdamState& optimizer() { return opt_; }
    ReplayMemory& memory() { return replay_; }
    const ReplayMemory& memory() const { return replay_; }
    long episodes_trained() const { return episodes_trained_; }
    void set_episodes_trained(long n) { episodes_trained_ = n; }

    // Replaces the networks with checkpointed weights.
    void load(const nn::Network& net, const nn::AdamState* opt);

    // K1 MSE steps toward a vector of -1 with `utility` at the action.
    // Non-positive utilities are a no-op by contract.
    void supervised_feedback_step(const StateVector& state, int action, double utility);

    // One Bellman target per transition (oracle maxes over the next state's
    // valid actions), then k2 MSE steps each. Returns the per-step losses.
    std::vector<double> ddqn_replay_step(const std::vector<Transition>& batch);

    // One MSE step toward current predictions with -1 on invalid indices;
    // returns the valid set.
    std::vector<int> invalid_penalty_step(const levels::MatchState& state);

    // Train mode penalizes invalid moves first and samples from the masked
    // distribution; eval mode is read-only and takes the argmax.
    engine::Move select_move(const levels::MatchState& state, nn::Mode mode, Rng& rng);
    engine::Move select_greedy(const levels::MatchState& state) const;

    void remember(Transition t) { replay_.push(t); }
    std::vector<Transition> sample_replay() { return replay_.sample(rng_); }

    void sync_oracle();

private:
    void mse_step_toward(const StateVector& state, const std::vector<double>& target,
                         int steps, std::vector<double>* losses);

    AgentConfig cfg_;
    nn::Network main_;
    nn::Network oracle_;
    nn::AdamState opt_;
    ReplayMemory replay_;
    Rng rng_;  // replay sampling only; selection uses the caller's stream
    long episodes_trained_ = 0;
};

struct PretrainStats {
    int boards = 0;
    int pairs = 0;
    std::vector<double> pass_losses;  // mean cross-entropy per pass
};

// Generates playable 9x9 boards, collects every (state, valid move) pair and
// trains with cross-entropy for `passes` passes. Returns the warmed network,
// the starting point for reinforcement learning.
nn::Network pretrain_supervised(const nn::Network& net, int boards, Rng& rng,
                                int passes = 10, std::size_t batch_size = 32,
                                PretrainStats* stats = nullptr);

// Mean probability mass the network puts on valid moves across boards.
double mean_valid_move_mass(const nn::Network& net, const std::vector<engine::Board>& boards);

}  // namespace jg::agents
