#include "air/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <new>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "air/error.hpp"
#include "air/nn.hpp"
#include "air/oracle.hpp"
#include "json.hpp"

#ifndef AIR_VERSION
#define AIR_VERSION "unknown"
#endif

namespace air::cli {

namespace fs = std::filesystem;
using train::ConfigError;
using train::TrainConfig;

namespace {

// Shortest text that parses back to the same double.
std::string num(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || !std::isfinite(d)) throw ConfigError(key, "expected a number, got '" + v + "'");
    return d;
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
    }
    try {
        return std::stoull(v);
    } catch (const std::out_of_range&) {
        throw ConfigError(key, "value out of range");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "off" || v == "0" || v == "no") return false;
    throw ConfigError(key, "expected on/off, got '" + v + "'");
}

struct Field {
    std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

template <class T>
Field count_field(T TrainConfig::*m) {
    return {[m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = static_cast<T>(to_count(k, v)); },
            [m](const TrainConfig& c) { return std::to_string(c.*m); }};
}
Field real_field(double TrainConfig::*m) {
    return {[m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = to_double(k, v); },
            [m](const TrainConfig& c) { return num(c.*m); }};
}
Field bool_field(bool TrainConfig::*m) {
    return {[m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = to_bool(k, v); },
            [m](const TrainConfig& c) { return std::string(c.*m ? "on" : "off"); }};
}

// Key order here is the order dump_config writes.
const std::vector<std::pair<std::string, Field>>& schema() {
    static const std::vector<std::pair<std::string, Field>> fields = {
        {"env", {[](TrainConfig& c, const std::string&, const std::string& v) { c.env = v; },
                 [](const TrainConfig& c) { return c.env; }}},
        {"mixer",
         {[](TrainConfig& c, const std::string& k, const std::string& v) {
              try {
                  c.mixer = vd::parse_mixer(v);
              } catch (const std::exception&) {
                  throw ConfigError(k, "expected vdn or qmix, got '" + v + "'");
              }
          },
          [](const TrainConfig& c) { return std::string(vd::mixer_name(c.mixer)); }}},
        {"total_steps", count_field(&TrainConfig::total_steps)},
        {"seed", count_field(&TrainConfig::seed)},
        {"episodes_per_iter", count_field(&TrainConfig::episodes_per_iter)},
        {"workers", count_field(&TrainConfig::workers)},
        {"checkpoint_interval", count_field(&TrainConfig::checkpoint_interval)},
        {"optim.lr", real_field(&TrainConfig::lr)},
        {"optim.gamma", real_field(&TrainConfig::gamma)},
        {"optim.target_interval", count_field(&TrainConfig::target_interval)},
        {"optim.batch_size", count_field(&TrainConfig::batch_size)},
        {"optim.buffer_capacity", count_field(&TrainConfig::buffer_capacity)},
        {"explore.eps_start", real_field(&TrainConfig::eps_start)},
        {"explore.eps_finish", real_field(&TrainConfig::eps_finish)},
        {"explore.eps_anneal", real_field(&TrainConfig::eps_anneal)},
        {"air.enabled", bool_field(&TrainConfig::air_enabled)},
        {"air.alpha0", real_field(&TrainConfig::alpha0)},
        {"air.frozen", bool_field(&TrainConfig::alpha_frozen)},
        {"air.per_agent", bool_field(&TrainConfig::per_agent_alpha)},
        {"air.lr_alpha", real_field(&TrainConfig::lr_alpha)},
        {"air.lr_classifier", real_field(&TrainConfig::lr_classifier)},
        {"air.ema_decay", real_field(&TrainConfig::ema_decay)},
        {"net.hidden", count_field(&TrainConfig::hidden_dim)},
        {"net.classifier_hidden", count_field(&TrainConfig::classifier_hidden)},
        {"net.embed", count_field(&TrainConfig::embed_dim)},
        {"net.hyper", count_field(&TrainConfig::hyper_dim)},
    };
    return fields;
}

std::string timestamp(const char* format) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[64];
    std::strftime(buf, sizeof buf, format, &tm);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string join(const std::vector<std::string>& v, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

// Tick label without trailing noise.
std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

void write_kv(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& kv) {
    std::string text;
    for (const auto& [k, v] : kv) text += k + " = " + v + "\n";
    nn::write_file_atomic(path, text);
}

fs::path fresh_run_dir() {
    const char* root_env = std::getenv("AIR_RUN_DIR");
    const fs::path root = root_env && *root_env ? fs::path(root_env) : fs::path("runs");
    const std::string stamp = timestamp("%Y%m%d-%H%M%S");
    fs::path dir = root / stamp;
    for (int i = 1; fs::exists(dir); ++i) dir = root / (stamp + "-" + std::to_string(i));
    return dir;
}

nlohmann::json manifest(const TrainConfig& c, const fs::path& dir, const std::string& started) {
    nlohmann::json m;
    m["version"] = AIR_VERSION;
    m["seed"] = c.seed;
    m["started"] = started;
    m["finished"] = nullptr;
    m["status"] = "running";
    nlohmann::json cfg;
    for (const auto& [key, f] : schema()) cfg[key] = f.get(c);
    m["config"] = cfg;
    m["paths"] = {{"run_dir", dir.string()},
                  {"config", (dir / "config.txt").string()},
                  {"metrics", (dir / "metrics.csv").string()},
                  {"checkpoints", (dir / "checkpoints").string()}};
    return m;
}

// ---- subcommands ----

struct TrainArgs {
    std::string config_file, env, mixer, air, out;
    std::optional<std::uint64_t> steps, seed, workers, checkpoint_interval;
    std::optional<double> alpha0;
    std::vector<std::string> sets;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    TrainConfig c;
    if (!a.config_file.empty()) {
        std::ifstream in(a.config_file);
        if (!in) throw ConfigError("config", "cannot open " + a.config_file);
        std::stringstream ss;
        ss << in.rdbuf();
        c = parse_config(ss.str());
    }
    if (!a.env.empty()) apply_setting(c, "env", a.env);
    if (!a.mixer.empty()) apply_setting(c, "mixer", a.mixer);
    if (a.steps) c.total_steps = *a.steps;
    if (a.seed) c.seed = *a.seed;
    if (a.workers) c.workers = *a.workers;
    if (a.checkpoint_interval) c.checkpoint_interval = *a.checkpoint_interval;
    if (!a.air.empty()) apply_setting(c, "air.enabled", a.air);
    if (a.alpha0) c.alpha0 = *a.alpha0;
    for (const auto& s : a.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(trim(s), "expected key=value");
        apply_setting(c, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    c.validate();
    train::Trainer probe(c);  // env and network construction errors surface before any output

    const fs::path dir = a.out.empty() ? fresh_run_dir() : fs::path(a.out);
    fs::create_directories(dir);
    nn::write_file_atomic(dir / "config.txt", dump_config(c));
    auto m = manifest(c, dir, timestamp("%Y-%m-%dT%H:%M:%SZ"));
    nn::write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
    out << "run_dir = " << dir.string() << "\n" << std::flush;

    std::uint64_t next_report = 0;
    const std::uint64_t report_every = std::max<std::uint64_t>(c.total_steps / 20, 1);
    train::RunResult r;
    try {
        r = train::run(c, dir, [&](const train::Metrics& row) {
            if (row.env_steps >= next_report) {
                out << "steps " << row.env_steps << "  return " << tick(row.ret_mean) << "  alpha "
                    << tick(row.alpha) << "  epsilon " << tick(row.epsilon) << "\n"
                    << std::flush;
                next_report = row.env_steps + report_every;
            }
        });
    } catch (const std::exception& e) {
        m["status"] = std::string("failed: ") + e.what();
        m["finished"] = timestamp("%Y-%m-%dT%H:%M:%SZ");
        nn::write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
        throw;
    }
    m["status"] = "complete";
    m["finished"] = timestamp("%Y-%m-%dT%H:%M:%SZ");
    m["paths"]["final_checkpoint"] = r.final_checkpoint.string();
    nn::write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
    out << "final_checkpoint = " << r.final_checkpoint.string() << "\n";
    return kOk;
}

struct EvalArgs {
    std::string checkpoint, env, out;
    std::uint64_t episodes = 100, seed = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.episodes == 0) throw ConfigError("episodes", "must be at least 1");
    if (!fs::exists(a.checkpoint)) throw ConfigError("checkpoint", "no such file " + a.checkpoint);
    const train::Trainer t = train::trainer_from_checkpoint(a.env, a.checkpoint);
    const auto r = t.evaluate(a.episodes, a.seed);
    const std::vector<std::pair<std::string, std::string>> kv = {
        {"env", a.env},
        {"checkpoint", a.checkpoint},
        {"mixer", vd::mixer_name(t.config().mixer)},
        {"episodes", std::to_string(r.episodes)},
        {"seed", std::to_string(a.seed)},
        {"ret_mean", num(r.ret_mean)},
        {"ret_std", num(r.ret_std)},
        {"solve_rate", num(r.solve_rate)},
        {"clf_acc", num(r.clf_acc)},
    };
    for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
    const fs::path path = a.out.empty() ? fs::path(a.checkpoint + ".eval.txt") : fs::path(a.out);
    write_kv(path, kv);
    out << "report = " << path.string() << "\n";
    return kOk;
}

struct VerifyArgs {
    std::string spec, report = "verify_report.txt";
    std::uint64_t budget = env::kDefaultEnumerationBudget;
    std::uint64_t tables = 100;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
    std::vector<oracle::Fixture> fixtures;
    if (a.spec.empty()) {
        fixtures = oracle::default_fixtures();
    } else {
        env::TabularDecPomdpSpec spec;
        try {
            spec = env::load_tabular_spec(a.spec);
        } catch (const FormatError& e) {
            throw ConfigError("spec", e.what());
        }
        fixtures = oracle::fixtures_for(spec, fs::path(a.spec).filename().string());
    }
    const auto report = oracle::run_suite(fixtures, a.tables, a.budget);

    std::vector<std::pair<std::string, std::string>> kv;
    std::size_t passed = 0, failed = 0, skipped = 0;
    for (std::size_t i = 0; i < report.checks.size(); ++i) {
        const auto& c = report.checks[i];
        const char* status = c.skipped ? "SKIP" : c.passed ? "PASS" : "FAIL";
        (c.skipped ? skipped : c.passed ? passed : failed) += 1;
        char line[256];
        std::snprintf(line, sizeof line, "%-4s %-16s %-28s lhs %+.12e rhs %+.12e err %.3e tol %.0e", status,
                      c.check.c_str(), c.fixture.c_str(), c.lhs, c.rhs, c.error, c.tolerance);
        out << line;
        if (!c.note.empty()) out << "  (" << c.note << ")";
        out << "\n";
        const std::string p = "check." + std::to_string(i) + ".";
        kv.emplace_back(p + "name", c.check);
        kv.emplace_back(p + "fixture", c.fixture);
        kv.emplace_back(p + "lhs", num(c.lhs));
        kv.emplace_back(p + "rhs", num(c.rhs));
        kv.emplace_back(p + "error", num(c.error));
        kv.emplace_back(p + "tolerance", num(c.tolerance));
        kv.emplace_back(p + "status", status);
        if (!c.note.empty()) kv.emplace_back(p + "note", c.note);
    }
    const bool ok = report.all_passed();
    std::vector<std::pair<std::string, std::string>> summary = {
        {"checks", std::to_string(report.checks.size())},
        {"passed", std::to_string(passed)},
        {"failed", std::to_string(failed)},
        {"skipped", std::to_string(skipped)},
        {"max_identity_error", num(report.max_identity_error())},
        {"min_bound_margin", num(report.min_bound_margin())},
        {"all_passed", ok ? "true" : "false"},
    };
    for (const auto& [k, v] : summary) out << k << " = " << v << "\n";
    summary.insert(summary.end(), kv.begin(), kv.end());
    write_kv(a.report, summary);
    out << "report = " << a.report << "\n";
    return ok ? kOk : kRuntime;
}

struct PlotArgs {
    std::string csv, out;
    std::vector<std::string> columns;
};

int cmd_plot(const PlotArgs& a, std::ostream& out) {
    std::ifstream in(a.csv, std::ios::binary);
    if (!in) throw ConfigError("csv", "cannot open " + a.csv);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string svg = render_svg(ss.str(), a.columns);
    const fs::path path = a.out.empty() ? fs::path(a.csv).replace_extension(".svg") : fs::path(a.out);
    nn::write_file_atomic(path, svg);
    out << "svg = " << path.string() << "\n";
    return kOk;
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, f] : schema()) keys.push_back(k);
    return keys;
}

void apply_setting(TrainConfig& config, const std::string& key, const std::string& value) {
    for (const auto& [k, f] : schema()) {
        if (k == key) {
            f.set(config, key, value);
            return;
        }
    }
    throw ConfigError(key, "unknown key (known: " + join(config_keys(), ", ") + ")");
}

TrainConfig parse_config(const std::string& text) {
    TrainConfig c;
    std::stringstream ss(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        line = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno), "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        apply_setting(c, section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
    }
    return c;
}

std::string dump_config(const TrainConfig& config) {
    std::string out, section;
    for (const auto& [key, f] : schema()) {
        const auto dot = key.find('.');
        const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
        if (sec != section) {
            out += "\n[" + sec + "]\n";
            section = sec;
        }
        out += (dot == std::string::npos ? key : key.substr(dot + 1)) + " = " + f.get(config) + "\n";
    }
    return out;
}

std::string render_svg(const std::string& csv, const std::vector<std::string>& columns) {
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);
    const auto header = split_csv_line(trim(line));
    if (columns.empty()) throw ConfigError("columns", "none requested (available: " + join(header, ", ") + ")");
    std::vector<std::size_t> idx;
    for (const auto& col : columns) {
        const auto it = std::find(header.begin(), header.end(), col);
        if (it == header.end()) {
            throw ConfigError("columns", "unknown column '" + col + "' (available: " + join(header, ", ") + ")");
        }
        idx.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    const auto xit = std::find(header.begin(), header.end(), "env_steps");

    std::vector<double> xs;
    std::vector<std::vector<double>> ys(columns.size());
    while (std::getline(ss, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        auto cell = [&](std::size_t i) {
            return i < cells.size() ? std::strtod(cells[i].c_str(), nullptr) : std::nan("");
        };
        xs.push_back(xit != header.end() ? cell(static_cast<std::size_t>(xit - header.begin()))
                                         : static_cast<double>(xs.size()));
        for (std::size_t c = 0; c < idx.size(); ++c) ys[c].push_back(cell(idx[c]));
    }

    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool any_x = false, any_y = false;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i])) continue;
        x0 = any_x ? std::min(x0, xs[i]) : xs[i];
        x1 = any_x ? std::max(x1, xs[i]) : xs[i];
        any_x = true;
        for (const auto& col : ys) {
            if (!std::isfinite(col[i])) continue;
            y0 = any_y ? std::min(y0, col[i]) : col[i];
            y1 = any_y ? std::max(y1, col[i]) : col[i];
            any_y = true;
        }
    }
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) {
        y0 -= 1;
        y1 += 1;
    }

    constexpr double W = 800, H = 480, L = 80, R = 160, T = 20, B = 50;
    const double pw = W - L - R, ph = H - T - B;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return T + ph - (y - y0) / (y1 - y0) * ph; };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw << "\" y2=\"" << T + ph
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = x0 + (x1 - x0) * i / 4, fy = y0 + (y1 - y0) * i / 4;
        o << "<text x=\"" << px(fx) << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\">" << tick(fx)
          << "</text>\n";
        o << "<text x=\"" << L - 6 << "\" y=\"" << py(fy) + 4 << "\" text-anchor=\"end\">" << tick(fy) << "</text>\n";
    }
    o << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
      << (xit != header.end() ? "env_steps" : "row") << "</text>\n";
    o << "<text x=\"16\" y=\"" << T + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << T + ph / 2 << ")\">value</text>\n";
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const char* color = colors[c % std::size(colors)];
        if (!xs.empty()) {
            o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            bool first = true;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (!std::isfinite(xs[i]) || !std::isfinite(ys[c][i])) continue;
                o << (first ? "" : " ") << px(xs[i]) << "," << py(ys[c][i]);
                first = false;
            }
            o << "\"/>\n";
        }
        const double ly = T + 14 + 18 * static_cast<double>(c);
        o << "<line x1=\"" << L + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << L + pw + 36 << "\" y2=\"" << ly - 4
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text class=\"legend\" x=\"" << L + pw + 42 << "\" y=\"" << ly << "\">" << xml_escape(columns[c])
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adversarial identity recognition for cooperative multi-agent RL"};
    app.require_subcommand(1);
    app.set_version_flag("--version", AIR_VERSION);

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train a value-decomposition learner");
    train->add_option("config", ta.config_file, "config file (key = value, [section] headers)");
    train->add_option("--env", ta.env, "climb, penalty, spread or a tabular spec file");
    train->add_option("--mixer", ta.mixer, "vdn or qmix");
    train->add_option("--steps", ta.steps, "total environment steps");
    train->add_option("--seed", ta.seed);
    train->add_option("--workers", ta.workers, "rollout threads");
    train->add_option("--checkpoint-interval", ta.checkpoint_interval, "iterations between checkpoints");
    train->add_option("--air", ta.air, "on or off");
    train->add_option("--alpha0", ta.alpha0, "initial temperature");
    train->add_option("--out", ta.out, "run directory (default $AIR_RUN_DIR or ./runs, plus a timestamp)");
    train->add_option("--set", ta.sets, "key=value override, repeatable");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
    eval->add_option("--checkpoint", ea.checkpoint)->required();
    eval->add_option("--env", ea.env)->required();
    eval->add_option("--episodes", ea.episodes)->capture_default_str();
    eval->add_option("--seed", ea.seed)->capture_default_str();
    eval->add_option("--out", ea.out, "key/value report (default <checkpoint>.eval.txt)");

    VerifyArgs va;
    auto* verify = app.add_subcommand("verify", "exact information-theoretic checks on tabular problems");
    verify->add_option("spec", va.spec, "tabular spec file (default: built-in fixtures)");
    verify->add_option("--budget", va.budget, "enumeration record budget")->capture_default_str();
    verify->add_option("--tables", va.tables, "random classifier tables per fixture")->capture_default_str();
    verify->add_option("--report", va.report, "key/value report path")->capture_default_str();

    PlotArgs pa;
    auto* plot = app.add_subcommand("plot", "SVG chart of metrics columns");
    plot->add_option("csv", pa.csv)->required();
    plot->add_option("--columns", pa.columns)->required()->delimiter(',');
    plot->add_option("--out", pa.out, "SVG path (default next to the CSV)");

    std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rev.begin(), rev.end());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*train) return cmd_train(ta, out);
        if (*eval) return cmd_eval(ea, out);
        if (*verify) return cmd_verify(va, out);
        if (*plot) return cmd_plot(pa, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const BudgetExceeded& e) {
        err << "error: " << e.what() << "\n";
        return kResource;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kResource;
    } catch (const std::bad_alloc&) {
        err << "error: out of memory\n";
        return kResource;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kValidation;
}

}  // namespace air::cli
