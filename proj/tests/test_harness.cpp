#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "jellygym/harness.hpp"

using namespace jg;
using namespace jg::harness;

namespace {

levels::LevelSpec instant_level() {
    // Any valid move resolves at least one match, so target 1 always wins.
    levels::LevelSpec level;
    level.name = "instant";
    level.rows = 7;
    level.cols = 7;
    level.palette = 6;
    level.move_budget = 3;
    level.objective = {levels::ObjectiveKind::CollectMatches, 1, 0};
    return level;
}

levels::LevelSpec medium_level() {
    levels::LevelSpec level;
    level.name = "medium";
    level.rows = 9;
    level.cols = 9;
    level.palette = 6;
    level.move_budget = 10;
    level.objective = {levels::ObjectiveKind::CollectMatches, 14, 0};
    return level;
}

// Always proposes a positionally legal but invalid swap.
class StallingPlayer final : public Player {
public:
    std::string name() const override { return "staller"; }
    engine::Move select_eval(const levels::MatchState& state, Rng&) const override {
        for (const engine::Move& m : engine::enumerate_positional_swaps(state.board))
            if (!engine::is_valid_move(state.board, m)) return m;
        throw Error("board has no invalid move to stall with");
    }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CaptureStdout {
    std::stringstream ss;
    std::streambuf* old;
    CaptureStdout() : old(std::cout.rdbuf(ss.rdbuf())) {}
    ~CaptureStdout() { std::cout.rdbuf(old); }
};

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "jellygym_harness_test";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("a guaranteed-win level is always won") {
    RandomPlayer random;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        MatchResult r = play_match_eval(random, instant_level(), seed);
        CHECK(r.won);
        CHECK(r.valid_moves_used == 1);
        CHECK(r.invalid_attempts == 0);
    }
}

TEST_CASE("eval playouts are deterministic in (player, level, seed)") {
    SmartPlayer smart;
    MatchResult a = play_match_eval(smart, medium_level(), 77);
    MatchResult b = play_match_eval(smart, medium_level(), 77);
    CHECK(a.won == b.won);
    CHECK(a.valid_moves_used == b.valid_moves_used);
    CHECK(a.total_reward == b.total_reward);

    JellyGymPlayer jelly(agents::AgentConfig{}, 5);
    MatchResult c = play_match_eval(jelly, medium_level(), 77);
    MatchResult d = play_match_eval(jelly, medium_level(), 77);
    CHECK(c.won == d.won);
    CHECK(c.total_reward == d.total_reward);
}

TEST_CASE("invalid attempts hit the cap without consuming the counter") {
    StallingPlayer staller;
    levels::LevelSpec level = instant_level();
    MatchResult r = play_match_eval(staller, level, 3);
    CHECK_FALSE(r.won);
    CHECK(r.valid_moves_used == 0);
    CHECK(r.invalid_attempts == kAttemptCapPerBudgetMove * level.move_budget);
    CHECK(r.total_reward == doctest::Approx(-1.0 * r.invalid_attempts));
}

TEST_CASE("evaluate aggregates wins and respects seeds") {
    RandomPlayer random;
    EvalRow all_won = evaluate(random, instant_level(), 40, 100);
    CHECK(all_won.matches == 40);
    CHECK(all_won.wins == 40);
    CHECK(all_won.success_rate == doctest::Approx(1.0));
    CHECK(all_won.mean_moves == doctest::Approx(1.0));

    // Different base seeds shift individual games but not the statistics:
    // both rates live inside a generous binomial interval of each other.
    EvalRow a = evaluate(random, medium_level(), 150, 1000);
    EvalRow b = evaluate(random, medium_level(), 150, 9000);
    CHECK(std::fabs(a.success_rate - b.success_rate) < 0.15);

    // Same seeds, same everything.
    EvalRow c = evaluate(random, medium_level(), 150, 1000);
    CHECK(a.wins == c.wins);
    CHECK(a.success_rate == c.success_rate);
}

TEST_CASE("train emits one curve row per episode with a sound running mean") {
    agents::AgentConfig cfg;
    cfg.k1 = 1;
    cfg.k2 = 1;
    cfg.batch_size = 4;
    JellyGymPlayer jelly(cfg, 9);
    auto dir = temp_dir();
    std::string curve_path = (dir / "curve.csv").string();
    std::string model_path = (dir / "model.json").string();

    TrainingCurve curve = train(jelly, instant_level(), 5, 50, curve_path, model_path);
    REQUIRE(curve.size() == 5);
    int wins = 0;
    for (int i = 0; i < 5; ++i) {
        wins += curve[i].won ? 1 : 0;
        CHECK(curve[i].episode == i + 1);
        CHECK(curve[i].cumulative_success_rate ==
              doctest::Approx(static_cast<double>(wins) / (i + 1)));
    }
    CHECK(std::filesystem::exists(curve_path));
    CHECK(std::filesystem::exists(model_path));

    std::string text = slurp(curve_path);
    CHECK(text.rfind("episode,won,cumulative_success_rate,episode_reward\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);  // header + 5 rows

    // The saved model records its training.
    nn::Checkpoint ckpt = nn::load_checkpoint(model_path, nn::kAgentArchitecture);
    CHECK(ckpt.meta.episodes_trained == 5);
}

TEST_CASE("training is deterministic across identical runs") {
    auto run = [] {
        agents::AgentConfig cfg;
        cfg.k1 = 2;
        cfg.k2 = 1;
        cfg.batch_size = 4;
        JellyGymPlayer jelly(cfg, 33);
        return train(jelly, instant_level(), 3, 70, "", "");
    };
    TrainingCurve a = run(), b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].won == b[i].won);
        CHECK(a[i].episode_reward == b[i].episode_reward);
    }
}

TEST_CASE("compare produces one row per (level, agent) pair") {
    std::vector<levels::LevelSpec> lvls{instant_level(), medium_level()};
    auto dir = temp_dir();
    std::string path = (dir / "compare.csv").string();
    EvaluationReport report = compare(lvls, {"random", "smart"}, 5, 11, path);
    REQUIRE(report.size() == 4);
    CHECK(report[0].level == "instant");
    CHECK(report[0].agent == "random");
    CHECK(report[1].agent == "smart");
    CHECK(report[2].level == "medium");
    std::string text = slurp(path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("report and curve formatting is stable") {
    EvaluationReport report{{"tier-1", "random", 150, 93, 93.0 / 150, 14.3267, 7}};
    std::ostringstream out;
    write_report(report, out);
    CHECK(out.str() ==
          "level,agent,matches,wins,success_rate,mean_moves,seed\n"
          "tier-1,random,150,93,0.620000,14.3267,7\n");

    TrainingCurve curve{{1, true, 1.0, 37.0}};
    std::ostringstream cout2;
    write_curve(curve, cout2);
    CHECK(cout2.str() ==
          "episode,won,cumulative_success_rate,episode_reward\n"
          "1,1,1.000000,37.000000\n");
}

TEST_CASE("make_player understands the three agents and rejects others") {
    CHECK(make_player("random", 1)->name() == "random");
    CHECK(make_player("smart", 1)->name() == "smart");
    CHECK(make_player("jellygym", 1)->name() == "jellygym");
    CHECK_THROWS_AS(make_player("perfect", 1), UsageError);
}

TEST_CASE("shipped tiers load through resolve_level") {
    levels::LevelSpec tier1 = resolve_level("tier1");
    CHECK(tier1.name == "tier-1");
    CHECK(tier1.rows == 9);
    CHECK(tier1.cols == 9);
    CHECK(tier1.palette == 6);
    CHECK(tier1.move_budget == 20);
    levels::LevelSpec tier5 = resolve_level("tier-5");
    CHECK(tier5.name == "tier-5");
    CHECK_THROWS_AS(resolve_level("tier9"), FileError);
    CHECK_THROWS_AS(resolve_level("/no/such/file.json"), FileError);
}

TEST_CASE("cli: enumerate prints the move count") {
    CaptureStdout cap;
    int rc = run_cli({"enumerate", "--rows", "9", "--cols", "9"});
    CHECK(rc == 0);
    CHECK(cap.ss.str() == "288\n");
}

TEST_CASE("cli: usage errors exit 2, runtime errors exit 1") {
    CHECK(run_cli({"no-such-command"}) == 2);
    CHECK(run_cli({"enumerate", "--bogus", "1"}) == 2);
    CHECK(run_cli({"eval", "--level", "tier1"}) == 2);  // missing required flags
    {
        CaptureStdout cap;
        CHECK(run_cli({"enumerate", "--rows", "2", "--cols", "9"}) == 1);
    }
    {
        CaptureStdout cap;
        CHECK(run_cli({"eval", "--level", "/no/such.json", "--agent", "random", "--matches",
                       "1", "--seed", "1"}) == 1);
    }
}

TEST_CASE("cli: eval reports are byte-identical across runs") {
    auto dir = temp_dir();
    std::string r1 = (dir / "eval1.csv").string();
    std::string r2 = (dir / "eval2.csv").string();
    for (const std::string& path : {r1, r2}) {
        CaptureStdout cap;
        int rc = run_cli({"eval", "--level", "levels/tier1.json", "--agent", "random",
                          "--matches", "6", "--seed", "7", "--report", path});
        REQUIRE(rc == 0);
    }
    CHECK(slurp(r1) == slurp(r2));
    CHECK(slurp(r1).rfind("level,agent,matches,wins,success_rate,mean_moves,seed\n", 0) == 0);
}

TEST_CASE("cli: train writes a curve and a loadable checkpoint") {
    auto dir = temp_dir();
    std::string curve = (dir / "cli_curve.csv").string();
    std::string model = (dir / "cli_model.json").string();
    CaptureStdout cap;
    int rc = run_cli({"train", "--level", "levels/tier1.json", "--episodes", "2", "--seed",
                      "3", "--out", model, "--curve", curve, "--k1", "1", "--k2", "1",
                      "--batch", "4"});
    REQUIRE(rc == 0);
    CHECK(std::filesystem::exists(curve));
    nn::Checkpoint ckpt = nn::load_checkpoint(model, nn::kAgentArchitecture);
    CHECK(ckpt.meta.episodes_trained == 2);

    // The checkpoint drives a jellygym evaluation.
    CaptureStdout cap2;
    int rc2 = run_cli({"eval", "--level", "levels/tier1.json", "--agent", "jellygym",
                       "--model", model, "--matches", "2", "--seed", "5"});
    CHECK(rc2 == 0);
}
