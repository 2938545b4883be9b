#include "air/spread_grid.hpp"

#include <algorithm>
#include <cstdlib>

#include "air/error.hpp"
#include "air/rng.hpp"

namespace air::env {

void SpreadGridSpec::validate() const {
    if (width < 2 || height < 2) throw ContractViolation("spread grid: width and height must be >= 2");
    if (n_agents == 0 || n_agents != n_landmarks) {
        throw ContractViolation("spread grid: need n_agents == n_landmarks > 0");
    }
    if (width * height < n_agents + n_landmarks) throw ContractViolation("spread grid: grid too small");
    if (horizon == 0) throw ContractViolation("spread grid: horizon must be >= 1");
}

SpreadGrid::SpreadGrid(SpreadGridSpec spec) : spec_(spec) { spec_.validate(); }

std::size_t SpreadGrid::obs_dim() const {
    return 2 + 2 * spec_.n_landmarks + 2 * (spec_.n_agents - 1) + 1 + spec_.n_agents;
}

std::size_t SpreadGrid::state_dim() const { return 2 * spec_.n_agents + 2 * spec_.n_landmarks + 1; }

std::size_t SpreadGrid::covered_landmarks() const {
    std::size_t covered = 0;
    for (const Cell& l : landmarks_) {
        if (std::count(agents_.begin(), agents_.end(), l) == 1) ++covered;
    }
    return covered;
}

double SpreadGrid::shaping() const {
    double total = 0.0;
    for (const Cell& l : landmarks_) {
        int best = INT32_MAX;
        for (const Cell& a : agents_) best = std::min(best, std::abs(a[0] - l[0]) + std::abs(a[1] - l[1]));
        total += best;
    }
    const double norm = static_cast<double>(spec_.n_landmarks * (spec_.width - 1 + spec_.height - 1));
    return -total / norm;
}

StepResult SpreadGrid::observe() const {
    const double sx = 1.0 / static_cast<double>(spec_.width - 1);
    const double sy = 1.0 / static_cast<double>(spec_.height - 1);
    const double time = static_cast<double>(t_) / static_cast<double>(spec_.horizon);
    StepResult r;
    for (std::size_t k = 0; k < spec_.n_agents; ++k) {
        const Cell& me = agents_[k];
        std::vector<double> f{me[0] * sx, me[1] * sy};
        for (const Cell& l : landmarks_) {
            f.push_back((l[0] - me[0]) * sx);
            f.push_back((l[1] - me[1]) * sy);
        }
        for (std::size_t j = 0; j < spec_.n_agents; ++j) {
            if (j == k) continue;
            f.push_back((agents_[j][0] - me[0]) * sx);
            f.push_back((agents_[j][1] - me[1]) * sy);
        }
        f.push_back(time);
        r.observations.push_back(append_agent_id(std::move(f), k, spec_.n_agents));
    }
    for (const Cell& a : agents_) {
        r.state.push_back(a[0] * sx);
        r.state.push_back(a[1] * sy);
    }
    for (const Cell& l : landmarks_) {
        r.state.push_back(l[0] * sx);
        r.state.push_back(l[1] * sy);
    }
    r.state.push_back(time);
    r.avail = all_available(spec_.n_agents, 5);
    return r;
}

StepResult SpreadGrid::do_reset(std::uint64_t seed) {
    // landmarks take the first cells of a seeded shuffle, agents the next ones
    Rng rng(seed);
    std::vector<int> cells(spec_.width * spec_.height);
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
    rng.shuffle(cells);
    const int w = static_cast<int>(spec_.width);
    landmarks_.clear();
    agents_.clear();
    for (std::size_t i = 0; i < spec_.n_landmarks; ++i) landmarks_.push_back({cells[i] % w, cells[i] / w});
    for (std::size_t i = 0; i < spec_.n_agents; ++i) {
        const int c = cells[spec_.n_landmarks + i];
        agents_.push_back({c % w, c / w});
    }
    solved_ = false;
    return observe();
}

StepResult SpreadGrid::do_step(std::span<const int> joint_action) {
    const int w = static_cast<int>(spec_.width), h = static_cast<int>(spec_.height);
    for (std::size_t k = 0; k < agents_.size(); ++k) {
        Cell& a = agents_[k];
        switch (joint_action[k]) {
            case kUp: a[1] = std::max(0, a[1] - 1); break;
            case kDown: a[1] = std::min(h - 1, a[1] + 1); break;
            case kLeft: a[0] = std::max(0, a[0] - 1); break;
            case kRight: a[0] = std::min(w - 1, a[0] + 1); break;
            default: break;
        }
    }
    const bool last = t_ + 1 >= spec_.horizon;
    // observe() reads t_, which the base class advances after do_step
    ++t_;
    StepResult r = observe();
    --t_;
    r.reward = shaping();
    if (last) {
        const std::size_t covered = covered_landmarks();
        r.reward += static_cast<double>(covered);
        r.terminated = true;
        solved_ = covered == spec_.n_landmarks;
    }
    return r;
}

}  // namespace air::env
