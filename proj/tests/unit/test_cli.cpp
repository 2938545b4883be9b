#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "air/cli.hpp"
#include "air/tabular.hpp"
#include "json.hpp"

using namespace air;
namespace fs = std::filesystem;

namespace {

int count(const std::string& hay, const std::string& needle) {
    int n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Cli {
    std::ostringstream out, err;
    int operator()(std::vector<std::string> args) {
        out.str("");
        err.str("");
        args.insert(args.begin(), "air");
        return cli::run(args, out, err);
    }
};

struct Scratch {
    fs::path path = fs::temp_directory_path() / "air_cli_test";
    Scratch() {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~Scratch() { fs::remove_all(path); }
};

std::string config_key_error(const std::string& text) {
    try {
        cli::parse_config(text);
    } catch (const train::ConfigError& e) {
        return e.key();
    }
    return "";
}

const std::string kCsv =
    "iter,env_steps,ret_mean,ret_std,td_loss,alpha,h_bar,clf_nll,clf_acc,epsilon\n"
    "1,1,5,0,nan,0,0.69,nan,nan,1\n"
    "2,2,-30,0,12.5,0.001,0.69,0.7,0.5,0.99\n"
    "3,3,11,0,10.1,-0.002,0.68,0.69,0.5,0.98\n";

}  // namespace

TEST_CASE("config text round-trips through dump and parse") {
    train::TrainConfig c;
    c.env = "penalty";
    c.mixer = vd::MixerKind::vdn;
    c.total_steps = 1234;
    c.seed = 9;
    c.lr = 0.0003;
    c.alpha0 = -0.125;
    c.per_agent_alpha = true;
    c.hidden_dim = 16;
    CHECK(cli::parse_config(cli::dump_config(c)) == c);
    CHECK(cli::parse_config(cli::dump_config(train::TrainConfig{})) == train::TrainConfig{});
}

TEST_CASE("config sections prefix keys and comments are ignored") {
    const auto c = cli::parse_config("env = climb  # game\n[air]\nenabled = off\n\n[optim]\nlr=0.001\n");
    CHECK(c.env == "climb");
    CHECK_FALSE(c.air_enabled);
    CHECK(c.lr == 0.001);
}

TEST_CASE("config errors name the key") {
    CHECK(config_key_error("[air]\nbogus = 1\n") == "air.bogus");
    CHECK(config_key_error("total_steps = -5\n") == "total_steps");
    CHECK(config_key_error("[optim]\nlr = fast\n") == "optim.lr");
    CHECK(config_key_error("mixer = qtran\n") == "mixer");
    CHECK(config_key_error("[air]\nenabled = maybe\n") == "air.enabled");
    CHECK(config_key_error("just words\n") == "line 1");
}

TEST_CASE("svg has one polyline per column and a matching legend") {
    const auto one = cli::render_svg(kCsv, {"alpha"});
    CHECK(count(one, "<polyline") == 1);
    CHECK(one.rfind("<svg", 0) == 0);

    const auto two = cli::render_svg(kCsv, {"ret_mean", "alpha"});
    CHECK(count(two, "<polyline") == 2);
    CHECK(count(two, "class=\"legend\"") == 2);
    CHECK(two.find(">ret_mean</text>") != std::string::npos);
    CHECK(two.find(">alpha</text>") != std::string::npos);
    CHECK(two.find(">env_steps</text>") != std::string::npos);

    // nan cells are dropped from the line: td_loss has two finite points
    const auto td = cli::render_svg(kCsv, {"td_loss"});
    const auto pts = td.substr(td.find("points=\""));
    CHECK(count(pts.substr(0, pts.find("\"/>")), ",") == 2);
}

TEST_CASE("svg of an empty body has axes only") {
    const auto svg = cli::render_svg("iter,env_steps,alpha\n", {"alpha"});
    CHECK(count(svg, "<polyline") == 0);
    CHECK(count(svg, "<line") >= 2);
}

TEST_CASE("unknown plot column lists the available ones") {
    try {
        cli::render_svg(kCsv, {"winrate"});
        FAIL("no throw");
    } catch (const train::ConfigError& e) {
        CHECK(e.key() == "columns");
        CHECK(std::string(e.what()).find("ret_mean, ret_std") != std::string::npos);
    }
}

TEST_CASE("train then eval through the command line") {
    Scratch s;
    Cli air;
    CHECK(air({"train", "--steps", "50"}) == 2);
    CHECK(air.err.str().find("env") != std::string::npos);
    CHECK(air({"train", "--env", "climb", "--set", "air.nope=1"}) == 2);
    CHECK(air.err.str().find("air.nope") != std::string::npos);
    CHECK(air({"train", "--env", "climb", "--mixer", "both"}) == 2);
    CHECK(air({"frobnicate"}) == 2);

    ::setenv("AIR_RUN_DIR", (s.path / "runs").c_str(), 1);
    REQUIRE(air({"train", "--env", "climb", "--steps", "60", "--seed", "3", "--air", "off"}) == 0);
    ::unsetenv("AIR_RUN_DIR");
    auto it = fs::directory_iterator(s.path / "runs");
    const fs::path run = it->path();
    for (const char* f : {"config.txt", "manifest.json", "metrics.csv", "checkpoints/iter_0.ckpt", "checkpoints/final.ckpt"}) {
        CHECK(fs::exists(run / f));
    }
    const auto m = nlohmann::json::parse(slurp(run / "manifest.json"));
    CHECK(m["status"] == "complete");
    CHECK(m["seed"] == 3);
    CHECK(m["config"]["air.enabled"] == "off");
    CHECK_FALSE(m["version"].get<std::string>().empty());
    CHECK(cli::parse_config(slurp(run / "config.txt")).total_steps == 60);

    // the snapshot alone reproduces the run
    CHECK(air({"train", (run / "config.txt").string(), "--out", (s.path / "again").string()}) == 0);
    CHECK(slurp(s.path / "again" / "metrics.csv") == slurp(run / "metrics.csv"));

    const auto ck = (run / "checkpoints" / "final.ckpt").string();
    const auto kv = (s.path / "eval.txt").string();
    CHECK(air({"eval", "--checkpoint", ck, "--env", "climb", "--episodes", "5", "--out", kv}) == 0);
    const auto report = slurp(kv);
    CHECK(report.find("episodes = 5\n") != std::string::npos);
    CHECK(report.find("solve_rate = ") != std::string::npos);
    CHECK(air({"eval", "--checkpoint", ck, "--env", "climb", "--episodes", "0"}) == 2);
    CHECK(air({"eval", "--checkpoint", ck, "--env", "spread"}) == 2);
    CHECK(air({"eval", "--checkpoint", (s.path / "missing.ckpt").string(), "--env", "climb"}) == 2);
}

TEST_CASE("verify exit codes") {
    Scratch s;
    Cli air;
    const auto report = (s.path / "v.txt").string();
    CHECK(air({"verify", "--tables", "5", "--report", report}) == 0);
    CHECK(slurp(report).find("all_passed = true") != std::string::npos);

    Rng rng = Rng::stream(1, 1);
    const auto spec = env::random_tabular_spec(2, 2, 2, 2, 2, false, rng);
    {
        std::ofstream f(s.path / "own_obs.json");
        f << env::dump_tabular_spec(spec);
    }
    CHECK(air({"verify", (s.path / "own_obs.json").string(), "--tables", "5", "--report", report}) == 0);
    CHECK(air.out.str().find("SKIP lemma3") != std::string::npos);
    CHECK(slurp(report).find("skipped = 0") == std::string::npos);

    {
        std::ofstream f(s.path / "corrupt.json");
        f << "{\"format\": ";
    }
    CHECK(air({"verify", (s.path / "corrupt.json").string(), "--report", report}) == 2);
    CHECK(air({"verify", (s.path / "absent.json").string(), "--report", report}) == 2);
    CHECK(air({"verify", "--budget", "10", "--report", report}) == 3);
}
