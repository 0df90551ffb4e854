#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynaplan/cogmodel.hpp"
#include "dynaplan/deliberation.hpp"
#include "dynaplan/traces.hpp"
#include "dynaplan/worldsim.hpp"

namespace dynaplan {

// ---------------------------------------------------------------------------
// Evaluation: multi-run success rates, world-model accuracy against recorded
// ground truth, correlation between the two, and trace-length statistics.
// ---------------------------------------------------------------------------

struct SplitStats {
    int tasks = 0;
    double avg = 0.0;  // mean per-task success rate
    double bon = 0.0;  // fraction of tasks solved in at least one run
};

struct TaskEval {
    std::string task_id;
    int successes = 0;
    int runs = 0;
    double wm_accuracy = 0.0;  // final-action simulation accuracy over this task's steps
    int wm_checked = 0;
};

struct EvalReport {
    int tasks = 0;
    int runs = 0;
    double avg = 0.0;      // mean over runs of the per-run success fraction
    double avg_std = 0.0;  // population std of the per-run success fraction
    double bon = 0.0;
    std::map<std::string, SplitStats> by_split;
    std::vector<TaskEval> per_task;
};

// `runs` independent seeded episodes per task; deterministic and invariant to
// the worker count. Pass `out_trajectories` to keep every episode
// (task-major, run-minor order).
EvalReport evaluate_policy(const CogParams& params, const std::vector<TaskSpec>& tasks, int runs,
                           uint64_t seed, const AgentConfig& agent, int workers,
                           std::vector<Trajectory>* out_trajectories = nullptr);

struct WmAccuracy {
    int steps = 0;
    int correct = 0;        // final-action simulation exactly matched the recorded effects
    int no_simulation = 0;  // steps whose final action was never simulated (counted wrong)
    double accuracy() const { return steps == 0 ? 0.0 : static_cast<double>(correct) / steps; }
};

// Exact effect-set agreement between each step's final-action simulation and
// what the environment recorded.
WmAccuracy wm_accuracy(const std::vector<Trajectory>& trajectories);

// nullopt when either side has zero variance or fewer than two points.
std::optional<double> pearson_r(const std::vector<double>& x, const std::vector<double>& y);

struct LengthStats {
    int n = 0;
    double mean = 0.0;
    double p10 = 0.0;  // nearest-rank percentiles
    double p90 = 0.0;
};

LengthStats length_stats(std::vector<double> values);
// One value per step: that step's total trace cost.
std::vector<double> step_costs(const std::vector<Trajectory>& trajectories);

// Probes the transition heads on scripted-expert episodes over `tasks`:
// fraction of steps whose predicted effect set equals the true one.
double heldout_effect_accuracy(const CogParams& params, const std::vector<TaskSpec>& tasks,
                               uint64_t seed, int workers);

}  // namespace dynaplan
