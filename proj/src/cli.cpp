#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "jellygym/harness.hpp"

namespace jg::harness {

namespace {

bool approx(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

struct Check {
    std::string name;
    std::function<bool()> fn;
};

std::vector<Check> selfcheck_suite() {
    std::vector<Check> checks;

    checks.push_back({"move count matches enumeration for all 3..9 boards", [] {
        for (int m = 3; m <= 9; ++m)
            for (int n = 3; n <= 9; ++n) {
                engine::Board board(m, n);
                int enumerated = static_cast<int>(engine::enumerate_positional_swaps(board).size());
                if (enumerated != engine::theoretical_move_count(m, n)) return false;
                if (enumerated % 2 != 0) return false;
            }
        return true;
    }});

    checks.push_back({"action space: 324 indices, 288 legal on a full 9x9", [] {
        for (int idx = 0; idx < agents::kActionCount; ++idx)
            if (agents::move_to_action(agents::action_to_move(idx)) != idx) return false;
        engine::Board board(9, 9);
        int legal = 0;
        for (int idx = 0; idx < agents::kActionCount; ++idx)
            if (engine::is_positionally_legal(board, agents::action_to_move(idx))) ++legal;
        return legal == 288 && agents::kActionCount - legal == 36;
    }});

    checks.push_back({"bellman update arithmetic and affinity", [] {
        if (!approx(agents::bellman_update(2.0, 4.0, 9.0, 1.0, 0.5), 8.5, 1e-12)) return false;
        if (!approx(agents::bellman_update(2.0, 4.0, 0.0, 0.5, 0.0), 3.0, 1e-12)) return false;
        if (!approx(agents::bellman_update(0.0, 5.0, 10.0, 0.001, 0.9), 0.014, 1e-12)) return false;
        double y0 = agents::bellman_update(0.0, 1.0, 2.0, 0.25, 0.5);
        double y1 = agents::bellman_update(1.0, 1.0, 2.0, 0.25, 0.5);
        double y2 = agents::bellman_update(2.0, 1.0, 2.0, 0.25, 0.5);
        return approx(y2 - y1, y1 - y0, 1e-12);
    }});

    checks.push_back({"softmax output sums to one and is shift invariant", [] {
        Rng rng(11);
        nn::Network net;
        net.init_weights(rng);
        std::vector<double> x(net.input_size());
        for (double& v : x) v = rng.real(-1.0, 1.0);
        nn::Forward fwd = net.forward(x, nn::Mode::Infer);
        double sum = 0.0;
        for (double p : fwd.probs) {
            if (p < 0.0) return false;
            sum += p;
        }
        return approx(sum, 1.0, 1e-9);
    }});

    checks.push_back({"hamming distance is a metric on sampled boards", [] {
        Rng rng(5);
        for (int i = 0; i < 300; ++i) {
            auto make = [&] {
                return engine::generate_filled(engine::Board(5, 5, 4), rng);
            };
            engine::Board a = make(), b = make(), c = make();
            int ab = engine::hamming_distance(a, b);
            int ba = engine::hamming_distance(b, a);
            int ac = engine::hamming_distance(a, c);
            int cb = engine::hamming_distance(c, b);
            if (engine::hamming_distance(a, a) != 0) return false;
            if (ab != ba) return false;
            if (ab > ac + cb) return false;
        }
        return true;
    }});

    checks.push_back({"selected moves always pass engine validation", [] {
        Rng rng(23);
        agents::AgentConfig cfg;
        JellyGymPlayer jelly(cfg, 23);
        levels::LevelSpec level;
        level.name = "selfcheck";
        level.move_budget = 5;
        level.objective = {levels::ObjectiveKind::CollectMatches, 1000, 0};
        for (int i = 0; i < 25; ++i) {
            levels::MatchState state = levels::init_match(level, rng);
            engine::Move move = jelly.select_eval(state, rng);
            if (!engine::is_valid_move(state.board, move)) return false;
            engine::Move sampled = jelly.select_train(state, rng);
            if (!engine::is_valid_move(state.board, sampled)) return false;
        }
        return true;
    }});

    checks.push_back({"invalid moves leave the board untouched; valid moves leave no match", [] {
        Rng rng(31);
        for (int i = 0; i < 60; ++i) {
            engine::Board board = engine::generate_filled(engine::Board(7, 7, 6), rng);
            for (const engine::Move& m : engine::enumerate_positional_swaps(board)) {
                engine::ApplyResult res = engine::apply_move(board, m, rng);
                if (!res.valid && !(res.board == board)) return false;
                if (res.valid) {
                    if (!engine::find_matches(res.board).empty()) return false;
                    break;  // one valid cascade per board keeps this fast
                }
            }
        }
        return true;
    }});

    return checks;
}

}  // namespace

int selfcheck(std::ostream& out) {
    int failures = 0;
    for (const Check& check : selfcheck_suite()) {
        bool ok = false;
        try {
            ok = check.fn();
        } catch (const std::exception& e) {
            out << "[FAIL] " << check.name << " (exception: " << e.what() << ")\n";
            ++failures;
            continue;
        }
        out << (ok ? "[ OK ] " : "[FAIL] ") << check.name << "\n";
        if (!ok) ++failures;
    }
    return failures;
}

namespace {

std::vector<levels::LevelSpec> load_level_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw FileError("not a level directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw FileError("no .json levels under " + dir);
    std::vector<levels::LevelSpec> out;
    for (const std::string& p : paths) out.push_back(levels::load_level_file(p));
    return out;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"match-3 playtesting harness: random, smart and jellygym players"};
    app.require_subcommand(1);

    // enumerate
    auto* cmd_enum = app.add_subcommand("enumerate", "count directed neighbor swaps on a full board");
    int rows = 9, cols = 9;
    cmd_enum->add_option("--rows", rows, "board rows (3..9)")->required();
    cmd_enum->add_option("--cols", cols, "board cols (3..9)")->required();

    // pretrain
    auto* cmd_pre = app.add_subcommand("pretrain", "supervised warm-up on random boards");
    int pre_boards = 100;
    std::string pre_out;
    std::uint64_t pre_seed = 0;
    cmd_pre->add_option("--boards", pre_boards, "number of random boards")->required();
    cmd_pre->add_option("--out", pre_out, "checkpoint output path")->required();
    cmd_pre->add_option("--seed", pre_seed, "rng seed")->required();

    // train
    auto* cmd_train = app.add_subcommand("train", "train the jellygym agent on a level");
    std::string train_level, train_out, train_curve;
    int episodes = 150;
    std::uint64_t train_seed = 0;
    agents::AgentConfig train_cfg;
    cmd_train->add_option("--level", train_level, "level file or tier name")->required();
    cmd_train->add_option("--episodes", episodes, "training episodes")->required();
    cmd_train->add_option("--seed", train_seed, "rng seed")->required();
    cmd_train->add_option("--out", train_out, "checkpoint output path")->required();
    cmd_train->add_option("--curve", train_curve, "learning curve output path")->required();
    cmd_train->add_option("--k1", train_cfg.k1, "optimizer steps per supervised feedback");
    cmd_train->add_option("--k2", train_cfg.k2, "optimizer steps per replayed transition");
    cmd_train->add_option("--replay", train_cfg.replay_capacity, "replay memory capacity");
    cmd_train->add_option("--batch", train_cfg.batch_size, "replay sample size");
    cmd_train->add_option("--gamma-min", train_cfg.reward.gamma_min, "discount at a fresh counter");
    cmd_train->add_option("--gamma-max", train_cfg.reward.gamma_max, "discount at an exhausted counter");
    cmd_train->add_option("--alpha-rl", train_cfg.alpha_rl, "Bellman mixing rate");

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "frozen evaluation campaign");
    std::string eval_level, eval_agent, eval_model, eval_report;
    int eval_matches = 150;
    std::uint64_t eval_seed = 0;
    cmd_eval->add_option("--level", eval_level, "level file or tier name")->required();
    cmd_eval->add_option("--agent", eval_agent, "random|smart|jellygym")->required();
    cmd_eval->add_option("--model", eval_model, "checkpoint for the jellygym agent");
    cmd_eval->add_option("--matches", eval_matches, "matches to play")->required();
    cmd_eval->add_option("--seed", eval_seed, "base seed")->required();
    cmd_eval->add_option("--report", eval_report, "report output path");

    // compare
    auto* cmd_cmp = app.add_subcommand("compare", "level x agent success-rate table");
    std::string cmp_levels, cmp_agents, cmp_report;
    int cmp_matches = 150;
    std::uint64_t cmp_seed = 0;
    cmd_cmp->add_option("--levels", cmp_levels, "directory of level .json files")->required();
    cmd_cmp->add_option("--agents", cmp_agents, "comma-separated agent list")->required();
    cmd_cmp->add_option("--matches", cmp_matches, "matches per pair")->required();
    cmd_cmp->add_option("--seed", cmp_seed, "base seed")->required();
    cmd_cmp->add_option("--report", cmp_report, "report output path")->required();

    // selfcheck
    app.add_subcommand("selfcheck", "run the built-in invariant suite");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            std::cout << app.help();
            return 0;
        }
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (cmd_enum->parsed()) {
            engine::Board board(rows, cols);
            std::cout << engine::enumerate_positional_swaps(board).size() << "\n";
            return 0;
        }
        if (cmd_pre->parsed()) {
            nn::Network net;
            Rng init = Rng::derive(pre_seed, 0x1417);
            net.init_weights(init);
            Rng rng = Rng::derive(pre_seed, 3);
            agents::PretrainStats stats;
            nn::Network warmed = agents::pretrain_supervised(net, pre_boards, rng, 10, 32, &stats);
            nn::CheckpointMeta meta;
            meta.seed = pre_seed;
            meta.created = "pretrain(boards=" + std::to_string(pre_boards) +
                           ",seed=" + std::to_string(pre_seed) + ")";
            nn::save_checkpoint(warmed, nullptr, pre_out, meta);
            std::cout << "pretrained on " << stats.boards << " boards (" << stats.pairs
                      << " valid-move pairs), checkpoint: " << pre_out << "\n";
            return 0;
        }
        if (cmd_train->parsed()) {
            levels::LevelSpec level = resolve_level(train_level);
            JellyGymPlayer player(train_cfg, train_seed);
            TrainingCurve curve = train(player, level, episodes, train_seed, train_curve, train_out);
            std::cout << "trained " << episodes << " episodes on " << level.name
                      << "; final success rate " << curve.back().cumulative_success_rate << "\n";
            return 0;
        }
        if (cmd_eval->parsed()) {
            levels::LevelSpec level = resolve_level(eval_level);
            std::string spec = eval_agent;
            if (!eval_model.empty()) spec += ":" + eval_model;
            std::unique_ptr<Player> player = make_player(spec, eval_seed);
            EvaluationReport report{evaluate(*player, level, eval_matches, eval_seed)};
            write_report(report, std::cout);
            if (!eval_report.empty()) {
                std::ofstream out(eval_report);
                if (!out) throw FileError("cannot write report: " + eval_report);
                write_report(report, out);
            }
            return 0;
        }
        if (cmd_cmp->parsed()) {
            std::vector<levels::LevelSpec> all = load_level_dir(cmp_levels);
            EvaluationReport report =
                compare(all, split_csv(cmp_agents), cmp_matches, cmp_seed, cmp_report);
            write_report(report, std::cout);
            return 0;
        }
        // selfcheck
        int failures = selfcheck(std::cout);
        if (failures) std::cout << failures << " check(s) failed\n";
        return failures ? 1 : 0;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace jg::harness
