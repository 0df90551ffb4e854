#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dynaplan/cogmodel.hpp"
#include "dynaplan/deliberation.hpp"
#include "dynaplan/traces.hpp"
#include "dynaplan/worldsim.hpp"

namespace dynaplan {

// ---------------------------------------------------------------------------
// Training orchestration: rejection sampling, imitation init, the two-stage
// world-model-then-policy loop, two baselines, iterative self-training with
// goal-hint rationalization, and synthetic world-model data scaling.
// ---------------------------------------------------------------------------

struct TrainConfig {
    int bon_k = 3;             // rejection-sampling width
    int iterations = 1;        // outer loop count
    int epochs_wm = 2;
    int epochs_policy = 3;
    double lr_wm = 0.05;
    double lr_policy = 0.02;
    int batch_size = 8;
    WmVariant variant = WmVariant::critique;
    bool critique_wait_only = false;  // restrict critique injection to wait verdicts
    int reconstruct_min_cost = kReconstructMinCost;
    AgentConfig agent;         // rollout agent (sampling) used during training
    int workers = 1;
    uint64_t seed = 1;
};

struct LogEntry {
    std::string stage;
    std::map<std::string, double> values;
    std::map<std::string, std::string> text;
};
using RunLog = std::vector<LogEntry>;

using TaskTable = std::map<std::string, std::shared_ptr<const TaskSpec>>;
TaskTable make_task_table(const std::vector<TaskSpec>& tasks);

// Order- and content-stable trajectory fingerprint (actions, effects, reward).
uint64_t trajectory_hash(const Trajectory& t);

struct RolloutSet {
    std::vector<Trajectory> successes;  // at most one reward-1 rollout per task, first seed wins
    std::vector<Trajectory> all;        // every terminated rollout (world-model data)
};

// k rollouts per task with per-(task, run) derived seeds. Deterministic and
// invariant to the worker count.
RolloutSet rejection_sample(const CogParams& params, const std::vector<TaskSpec>& tasks, int k,
                            uint64_t seed, const AgentConfig& agent, int workers);

struct Provenance {
    std::string task_id;
    uint64_t seed = 0;
    uint64_t hash = 0;
};

struct DatasetBundle {
    std::vector<PolicyExample> policy_set;  // success steps only, R=1
    std::vector<WMSample> wm_set;           // all terminated rollouts
    std::vector<Provenance> provenance;
    WmSampleStats wm_stats;
    // Fingerprint of the rollout data the bundle was built from; equal hashes
    // mean two training runs consumed identical trajectories.
    uint64_t parity_hash() const;
};

DatasetBundle build_bundle(const TaskTable& tasks, const RolloutSet& rollouts, WmVariant variant,
                           const WmSampleOptions& options = {});

struct EpochStats {
    double first_loss = 0.0;
    double last_loss = 0.0;
    int sgd_steps = 0;
};

EpochStats train_wm(CogParams& params, const std::vector<WMSample>& samples, int epochs, double lr,
                    int batch_size);
EpochStats train_wm(SeparateWM& wm, const std::vector<WMSample>& samples, int epochs, double lr,
                    int batch_size);
EpochStats train_policy(CogParams& params, const std::vector<PolicyExample>& examples, int epochs,
                        double lr, int batch_size);

// Imitation init: reconstructs every expert record, behavior-clones the
// policy head and fits the transition heads on the surviving simulation
// segments' (input, effects) pairs.
CogParams train_dit(const std::vector<Trajectory>& expert_trajectories, const TaskTable& tasks,
                    uint32_t dim, uint64_t hash_seed, const TrainConfig& config,
                    RunLog* log = nullptr);

// Two-stage loop: rollout → world-model epochs → policy epochs, repeated
// config.iterations times. Stage order is provable from version counters in
// the log.
CogParams train_ddt(CogParams params, const std::vector<TaskSpec>& tasks, WmVariant variant,
                    const TrainConfig& config, RunLog* log = nullptr);

// Policy-only baseline on the same rollouts; transition/critic heads frozen.
CogParams train_rft(CogParams params, const std::vector<TaskSpec>& tasks, const TrainConfig& config,
                    RunLog* log = nullptr);

struct VanillaDynaResult {
    CogParams params;
    SeparateWM wm;
    int simulated_successes = 0;
    int divergent = 0;  // simulated rollouts aborted by inapplicable effects
};

// Classic-Dyna baseline: a separate world model acts as the environment for
// extra imagined rollouts, judged by the task evaluator on the shadow state.
VanillaDynaResult train_vanilla_dyna(CogParams params, const std::vector<TaskSpec>& tasks,
                                     const TrainConfig& config, RunLog* log = nullptr);

// One imagined episode against `wm`; diverges (and is marked non-terminated)
// when a predicted effect set cannot be applied to the shadow state.
Trajectory simulate_with_wm(const CogParams& params, const SeparateWM& wm, const TaskSpec& task,
                            uint64_t seed, const AgentConfig& agent);

struct IterMetrics {
    int iteration = 0;
    int train_successes = 0;     // distinct train tasks solved without hints
    int hinted_successes = 0;    // extra tasks recovered via hints this iteration
    double test_success = 0.0;   // greedy success fraction on the test set
};

// Self-training loop. With hints enabled, failed tasks are retried with the
// evaluator rendered into the instruction; hint content is stripped before
// training so the model learns against the original task text.
std::pair<CogParams, std::vector<IterMetrics>> iterate_star(
    CogParams params, const std::vector<TaskSpec>& train_tasks,
    const std::vector<TaskSpec>& test_tasks, bool with_hint, int iterations,
    const TrainConfig& config, RunLog* log = nullptr);

TaskSpec make_hinted(const TaskSpec& task);

struct ScaleWmResult {
    CogParams params;  // model trained with the doubled synthetic set
    double acc_base = 0.0, acc_one = 0.0, acc_two = 0.0;  // held-out effect accuracy
    double bon_base = 0.0, bon_one = 0.0, bon_two = 0.0;  // test BoN
    int synth_trajectories = 0;
};

// Trains three models from the same start: no synthetic world-model data, one
// synthetic batch, and a doubled batch — policy data held fixed throughout.
ScaleWmResult scale_wm(const CogParams& params, const std::vector<TaskSpec>& train_tasks,
                       const std::vector<TaskSpec>& test_tasks, int extra_per_domain,
                       const TrainConfig& config, RunLog* log = nullptr);

}  // namespace dynaplan
