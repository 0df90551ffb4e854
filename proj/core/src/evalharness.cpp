#include "dynaplan/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dynaplan/hashing.hpp"
#include "dynaplan/parallel.hpp"

namespace dynaplan {

EvalReport evaluate_policy(const CogParams& params, const std::vector<TaskSpec>& tasks, int runs,
                           uint64_t seed, const AgentConfig& agent, int workers,
                           std::vector<Trajectory>* out_trajectories) {
    if (runs <= 0) { throw std::invalid_argument("evaluate_policy: runs must be positive"); }
    EvalReport report;
    report.tasks = static_cast<int>(tasks.size());
    report.runs = runs;
    if (tasks.empty()) { return report; }

    std::vector<Trajectory> slots(tasks.size() * static_cast<size_t>(runs));
    parallel_for(slots.size(), workers, [&](size_t idx) {
        const TaskSpec& task = tasks[idx / static_cast<size_t>(runs)];
        const uint64_t run = idx % static_cast<size_t>(runs);
        slots[idx] = rollout(params, task, derive_seed(seed, task.id, run), agent);
    });

    std::vector<double> run_fraction(static_cast<size_t>(runs), 0.0);
    std::map<std::string, std::pair<int, std::pair<double, int>>> split_acc;  // tasks, (rate sum, bon)
    for (size_t ti = 0; ti < tasks.size(); ++ti) {
        TaskEval te;
        te.task_id = tasks[ti].id;
        te.runs = runs;
        std::vector<Trajectory> mine;
        for (int r = 0; r < runs; ++r) {
            const Trajectory& t = slots[ti * static_cast<size_t>(runs) + static_cast<size_t>(r)];
            te.successes += t.reward;
            run_fraction[static_cast<size_t>(r)] += t.reward;
            mine.push_back(t);
        }
        const WmAccuracy wa = wm_accuracy(mine);
        te.wm_accuracy = wa.accuracy();
        te.wm_checked = wa.steps;
        const double rate = static_cast<double>(te.successes) / runs;
        report.avg += rate;
        report.bon += te.successes > 0 ? 1.0 : 0.0;
        auto& acc = split_acc[std::string(kSplitNames[static_cast<size_t>(tasks[ti].split)])];
        acc.first += 1;
        acc.second.first += rate;
        acc.second.second += te.successes > 0 ? 1 : 0;
        report.per_task.push_back(std::move(te));
    }
    report.avg /= static_cast<double>(tasks.size());
    report.bon /= static_cast<double>(tasks.size());
    double var = 0.0;
    for (double& f : run_fraction) {
        f /= static_cast<double>(tasks.size());
        var += (f - report.avg) * (f - report.avg);
    }
    report.avg_std = std::sqrt(var / static_cast<double>(runs));
    for (const auto& [name, acc] : split_acc) {
        SplitStats s;
        s.tasks = acc.first;
        s.avg = acc.second.first / acc.first;
        s.bon = static_cast<double>(acc.second.second) / acc.first;
        report.by_split[name] = s;
    }
    if (out_trajectories) { *out_trajectories = std::move(slots); }
    return report;
}

WmAccuracy wm_accuracy(const std::vector<Trajectory>& trajectories) {
    WmAccuracy out;
    for (const Trajectory& t : trajectories) {
        for (const Step& step : t.steps) {
            ++out.steps;
            const TraceSegment* sim = final_action_sim(step.record);
            if (sim == nullptr) {
                ++out.no_simulation;
                continue;
            }
            if (sim->sim == step.effects) { ++out.correct; }
        }
    }
    return out;
}

std::optional<double> pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) { throw std::invalid_argument("pearson_r: length mismatch"); }
    const size_t n = x.size();
    if (n < 2) { return std::nullopt; }
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) { return std::nullopt; }
    return sxy / std::sqrt(sxx * syy);
}

LengthStats length_stats(std::vector<double> values) {
    LengthStats out;
    out.n = static_cast<int>(values.size());
    if (values.empty()) { return out; }
    std::sort(values.begin(), values.end());
    for (double v : values) { out.mean += v; }
    out.mean /= static_cast<double>(values.size());
    auto nearest_rank = [&](double q) {
        size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(values.size())));
        if (rank == 0) { rank = 1; }
        return values[rank - 1];
    };
    out.p10 = nearest_rank(0.10);
    out.p90 = nearest_rank(0.90);
    return out;
}

std::vector<double> step_costs(const std::vector<Trajectory>& trajectories) {
    std::vector<double> out;
    for (const Trajectory& t : trajectories) {
        for (const Step& step : t.steps) { out.push_back(static_cast<double>(record_cost(step.record))); }
    }
    return out;
}

double heldout_effect_accuracy(const CogParams& params, const std::vector<TaskSpec>& tasks,
                               uint64_t seed, int workers) {
    if (tasks.empty()) { return 0.0; }
    AgentConfig expert;
    expert.mode = ThinkMode::verbose_expert;
    std::vector<std::pair<int, int>> counts(tasks.size(), {0, 0});  // correct, total
    parallel_for(tasks.size(), workers, [&](size_t idx) {
        const TaskSpec& task = tasks[idx];
        const Trajectory t = rollout(params, task, derive_seed(seed, task.id), expert);
        for (const Step& step : t.steps) {
            const EffectSet predicted = predict_effects(params, task, step.obs, step.record.action);
            counts[idx].second += 1;
            if (predicted == step.effects) { counts[idx].first += 1; }
        }
    });
    int correct = 0, total = 0;
    for (const auto& [c, n] : counts) {
        correct += c;
        total += n;
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

}  // namespace dynaplan
