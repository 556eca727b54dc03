#include "jellygym/agents.hpp"

#include <algorithm>
#include <cmath>

namespace jg::agents {

double tile_code(engine::Tile tile) {
    if (tile.is_empty()) return 0.0;
    if (tile.is_color()) return tile.color() / 6.0;
    if (tile.is_blocker()) return -1.0 / 6.0;
    return (7.0 + static_cast<int>(tile.joker_kind())) / 6.0;
}

StateVector encode_board(const engine::Board& board, double objective) {
    engine::Board padded = engine::zero_pad(board);
    StateVector sv(kStateSize);
    for (int r = 0; r < kGridDim; ++r)
        for (int c = 0; c < kGridDim; ++c)
            sv[static_cast<std::size_t>(r) * kGridDim + c] = tile_code(padded.at(r, c));
    sv[kBoardInputs] = objective;
    return sv;
}

StateVector encode_state(const levels::MatchState& state) {
    return encode_board(state.board, levels::objective_scalar(state));
}

engine::Move action_to_move(int index) {
    if (index < 0 || index >= kActionCount)
        throw IndexError("action index " + std::to_string(index) + " out of 0..323");
    int cell = index / 4;
    return {{cell / kGridDim, cell % kGridDim}, static_cast<engine::Direction>(index % 4)};
}

int move_to_action(const engine::Move& move) {
    if (move.cell.row < 0 || move.cell.row >= kGridDim || move.cell.col < 0 ||
        move.cell.col >= kGridDim)
        throw IndexError("move cell outside the 9x9 action grid");
    return (move.cell.row * kGridDim + move.cell.col) * 4 + static_cast<int>(move.dir);
}

std::vector<int> valid_action_indices(const engine::Board& board) {
    std::vector<int> out;
    for (int idx = 0; idx < kActionCount; ++idx) {
        engine::Move m = action_to_move(idx);
        if (engine::is_positionally_legal(board, m) && engine::is_valid_move(board, m))
            out.push_back(idx);
    }
    return out;
}

std::vector<double> masked_distribution(std::span<const double> probabilities,
                                        const std::vector<int>& valid) {
    if (valid.empty()) throw NoMoveError("masked_distribution over an empty valid set");
    std::vector<double> out(probabilities.size(), 0.0);
    double mass = 0.0;
    for (int idx : valid) {
        if (idx < 0 || idx >= static_cast<int>(probabilities.size()))
            throw IndexError("valid index out of range");
        mass += probabilities[idx];
    }
    if (mass > 0.0) {
        for (int idx : valid) out[idx] = probabilities[idx] / mass;
    } else {
        double u = 1.0 / valid.size();
        for (int idx : valid) out[idx] = u;
    }
    return out;
}

engine::Move random_player_select(const levels::MatchState& state, Rng& rng) {
    std::vector<int> valid = valid_action_indices(state.board);
    if (valid.empty()) throw NoMoveError("no valid move for the random player");
    return action_to_move(valid[rng.index(valid.size())]);
}

int move_joker_rank(const engine::Board& board, const engine::Move& move) {
    engine::Board sim = board;
    engine::Cell src = move.cell, dst = move.target();
    engine::Tile a = sim.at(src);
    sim.set(src, sim.at(dst));
    sim.set(dst, a);
    int best = 0;
    for (const engine::MatchGroup& g : engine::find_matches(sim)) {
        engine::JokerKind kind;
        if (!engine::joker_spawned_by(g, kind)) continue;
        int rank = kind == engine::JokerKind::ColorBomb ? 3
                   : kind == engine::JokerKind::Wrapped ? 2
                                                        : 1;
        best = std::max(best, rank);
    }
    return best;
}

engine::Move smart_player_select(const levels::MatchState& state, Rng& rng) {
    std::vector<int> valid = valid_action_indices(state.board);
    if (valid.empty()) throw NoMoveError("no valid move for the smart player");
    int best = -1;
    std::vector<int> winners;
    for (int idx : valid) {
        int rank = move_joker_rank(state.board, action_to_move(idx));
        if (rank > best) {
            best = rank;
            winners.clear();
        }
        if (rank == best) winners.push_back(idx);
    }
    return action_to_move(winners[rng.index(winners.size())]);
}

double compute_reward(const levels::MatchState& before, const levels::MatchState& after,
                      const engine::CascadeOutcome&, bool valid, const RewardConfig& cfg) {
    if (!valid) return cfg.invalid_penalty;
    if (cfg.progress_required && after.progress <= before.progress) return cfg.invalid_penalty;
    return static_cast<double>(engine::hamming_distance(before.board, after.board));
}

double discount_at(int moves_used, int budget, const RewardConfig& cfg) {
    double frac = budget > 0 ? static_cast<double>(moves_used) / budget : 1.0;
    return cfg.gamma_min + (cfg.gamma_max - cfg.gamma_min) * frac;
}

double bellman_update(double q_old, double reward, double max_next_q, double alpha, double gamma) {
    if (alpha <= 0.0 || alpha > 1.0) throw ParameterError("bellman alpha must be in (0,1]");
    if (gamma < 0.0 || gamma >= 1.0) throw ParameterError("bellman gamma must be in [0,1)");
    return (1.0 - alpha) * q_old + alpha * (reward + gamma * max_next_q);
}

ReplayMemory::ReplayMemory(std::size_t capacity, std::size_t sample_size)
    : capacity_(capacity), sample_size_(sample_size) {
    if (capacity_ == 0 || sample_size_ == 0)
        throw ParameterError("replay capacity and sample size must be positive");
}

void ReplayMemory::push(Transition t) {
    if (buffer_.size() == capacity_) buffer_.pop_front();
    buffer_.push_back(std::move(t));
}

std::vector<Transition> ReplayMemory::sample(Rng& rng) const {
    std::size_t n = std::min(sample_size_, buffer_.size());
    std::vector<std::size_t> order(buffer_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // Partial Fisher-Yates: the first n entries are a uniform sample
    // without replacement.
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = i + rng.index(order.size() - i);
        std::swap(order[i], order[j]);
    }
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(buffer_[order[i]]);
    return out;
}

DdqnAgent::DdqnAgent(AgentConfig cfg, std::uint64_t seed)
    : cfg_(cfg),
      main_(nn::kAgentArchitecture),
      oracle_(nn::kAgentArchitecture),
      opt_(),
      replay_(cfg.replay_capacity, cfg.batch_size),
      rng_(Rng::derive(seed, 0xA6E17)) {
    Rng init = Rng::derive(seed, 0x1417);
    main_.init_weights(init);
    opt_ = nn::make_adam_state(main_, cfg_.adam_alpha);
    nn::clone_weights(main_, oracle_);
}

void DdqnAgent::load(const nn::Network& net, const nn::AdamState* opt) {
    nn::clone_weights(net, main_);
    nn::clone_weights(net, oracle_);
    opt_ = opt ? *opt : nn::make_adam_state(main_, cfg_.adam_alpha);
}

void DdqnAgent::mse_step_toward(const StateVector& state, const std::vector<double>& target,
                                int steps, std::vector<double>* losses) {
    for (int k = 0; k < steps; ++k) {
        nn::Forward fwd = main_.forward(state, nn::Mode::Train);
        nn::LossValue loss = nn::mse_loss(fwd.probs, target);
        std::vector<double> grad_logits = nn::softmax_pullback(fwd.probs, loss.gradient);
        nn::Gradients grads = main_.backward(fwd.cache, grad_logits);
        nn::adam_step(main_, grads, opt_);
        if (losses) losses->push_back(loss.loss);
    }
}

void DdqnAgent::supervised_feedback_step(const StateVector& state, int action, double utility) {
    if (utility <= 0.0) return;
    if (action < 0 || action >= kActionCount) throw IndexError("feedback action out of range");
    std::vector<double> target(kActionCount, -1.0);
    target[action] = utility;
    mse_step_toward(state, target, cfg_.k1, nullptr);
}

std::vector<double> DdqnAgent::ddqn_replay_step(const std::vector<Transition>& batch) {
    if (batch.empty()) throw BatchError("replay step requires a non-empty batch");
    std::vector<double> losses;
    losses.reserve(batch.size() * cfg_.k2);
    for (const Transition& t : batch) {
        nn::Forward current = main_.forward(t.state, nn::Mode::Infer);
        double max_next = 0.0;
        if (!t.terminal && !t.next_valid.empty()) {
            nn::Forward next = oracle_.forward(t.next_state, nn::Mode::Infer);
            max_next = next.probs[t.next_valid.front()];
            for (int idx : t.next_valid) max_next = std::max(max_next, next.probs[idx]);
        }
        std::vector<double> target = current.probs;
        target[t.action] =
            bellman_update(current.probs[t.action], t.reward, max_next, cfg_.alpha_rl, t.gamma);
        mse_step_toward(t.state, target, cfg_.k2, &losses);
    }
    return losses;
}

std::vector<int> DdqnAgent::invalid_penalty_step(const levels::MatchState& state) {
    std::vector<int> valid = valid_action_indices(state.board);
    if (valid.empty()) throw NoMoveError("no valid move to predict from");
    StateVector sv = encode_state(state);
    nn::Forward fwd = main_.forward(sv, nn::Mode::Infer);
    std::vector<double> target = fwd.probs;
    std::vector<char> is_valid(kActionCount, 0);
    for (int idx : valid) is_valid[idx] = 1;
    for (int idx = 0; idx < kActionCount; ++idx)
        if (!is_valid[idx]) target[idx] = -1.0;
    mse_step_toward(sv, target, 1, nullptr);
    return valid;
}

namespace {

int argmax_index(const std::vector<double>& dist) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(dist.size()); ++i)
        if (dist[i] > dist[best]) best = i;  // ties keep the lowest index
    return best;
}

int sample_index(const std::vector<double>& dist, Rng& rng) {
    double r = rng.real01();
    double acc = 0.0;
    int last_positive = -1;
    for (int i = 0; i < static_cast<int>(dist.size()); ++i) {
        if (dist[i] <= 0.0) continue;
        last_positive = i;
        acc += dist[i];
        if (r < acc) return i;
    }
    return last_positive;  // floating-point dust at the tail
}

}  // namespace

engine::Move DdqnAgent::select_move(const levels::MatchState& state, nn::Mode mode, Rng& rng) {
    if (mode == nn::Mode::Infer) return select_greedy(state);
    std::vector<int> valid = invalid_penalty_step(state);
    nn::Forward fwd = main_.forward(encode_state(state), nn::Mode::Train);
    std::vector<double> dist = masked_distribution(fwd.probs, valid);
    return action_to_move(sample_index(dist, rng));
}

engine::Move DdqnAgent::select_greedy(const levels::MatchState& state) const {
    std::vector<int> valid = valid_action_indices(state.board);
    if (valid.empty()) throw NoMoveError("no valid move to predict from");
    nn::Forward fwd = main_.forward(encode_state(state), nn::Mode::Infer);
    std::vector<double> dist = masked_distribution(fwd.probs, valid);
    return action_to_move(argmax_index(dist));
}

void DdqnAgent::sync_oracle() { nn::clone_weights(main_, oracle_); }

nn::Network pretrain_supervised(const nn::Network& net, int boards, Rng& rng, int passes,
                                std::size_t batch_size, PretrainStats* stats) {
    if (boards < 1) throw ParameterError("pretraining needs at least one board");
    nn::Network warmed = net;
    nn::AdamState opt = nn::make_adam_state(warmed);

    std::vector<StateVector> states;
    std::vector<int> actions;
    for (int b = 0; b < boards; ++b) {
        engine::Board board =
            engine::generate_filled(engine::Board(kGridDim, kGridDim, 6), rng);
        StateVector sv = encode_board(board, 1.0);
        for (int idx : valid_action_indices(board)) {
            states.push_back(sv);
            actions.push_back(idx);
        }
    }
    if (stats) {
        stats->boards = boards;
        stats->pairs = static_cast<int>(states.size());
    }

    const int out_dim = warmed.output_size();
    std::vector<std::size_t> order(states.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int pass = 0; pass < passes; ++pass) {
        rng.shuffle(order);
        double pass_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            std::size_t b = std::min(batch_size, order.size() - start);
            std::vector<double> X;
            X.reserve(b * kStateSize);
            for (std::size_t i = 0; i < b; ++i) {
                const StateVector& sv = states[order[start + i]];
                X.insert(X.end(), sv.begin(), sv.end());
            }
            nn::Forward fwd = warmed.forward_batch(X, static_cast<int>(b), nn::Mode::Train);
            std::vector<double> grad_logits(fwd.probs.size());
            for (std::size_t i = 0; i < b; ++i) {
                const double* p = fwd.probs.data() + i * out_dim;
                double* g = grad_logits.data() + i * out_dim;
                int target = actions[order[start + i]];
                for (int j = 0; j < out_dim; ++j) g[j] = p[j] / static_cast<double>(b);
                g[target] -= 1.0 / static_cast<double>(b);
                pass_loss += -std::log(std::max(p[target], 1e-300));
            }
            seen += b;
            nn::Gradients grads = warmed.backward(fwd.cache, grad_logits);
            nn::adam_step(warmed, grads, opt);
        }
        if (stats) stats->pass_losses.push_back(pass_loss / static_cast<double>(seen));
    }
    return warmed;
}

double mean_valid_move_mass(const nn::Network& net, const std::vector<engine::Board>& boards) {
    if (boards.empty()) return 0.0;
    double total = 0.0;
    for (const engine::Board& board : boards) {
        nn::Forward fwd = net.forward(encode_board(board, 1.0), nn::Mode::Infer);
        double mass = 0.0;
        for (int idx : valid_action_indices(board)) mass += fwd.probs[idx];
        total += mass;
    }
    return total / boards.size();
}

}  // namespace jg::agents
