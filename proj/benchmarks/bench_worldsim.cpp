// Microbenchmarks for the hot loop of planning: state transitions, candidate
// featurization, effect prediction, and a whole deliberative episode.
#include <benchmark/benchmark.h>

#include "dynaplan/cogmodel.hpp"
#include "dynaplan/deliberation.hpp"
#include "dynaplan/hashing.hpp"
#include "dynaplan/worldsim.hpp"

using namespace dynaplan;

namespace {

const TaskSpec& fixture_task() {
    static const std::vector<TaskSpec> tasks =
        generate_tasks(Domain::files, 4, derive_seed(11, "bench"), Split::train);
    return tasks[0];
}

}  // namespace

static void transition_step(benchmark::State& state) {
    const TaskSpec& task = fixture_task();
    const WorldState start = init_state(task);
    const std::vector<Action> actions = legal_actions(task, observe(start));
    size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(transition(start, actions[i % actions.size()]));
        ++i;
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()));
}
BENCHMARK(transition_step);

static void featurize_candidate(benchmark::State& state) {
    const TaskSpec& task = fixture_task();
    const Observation obs = observe(init_state(task));
    const std::vector<Action> actions = legal_actions(task, obs);
    const Featurizer featurizer(kDefaultDim, kDefaultHashSeed);
    size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(featurizer.features(task, obs, actions[i % actions.size()]));
        ++i;
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()));
}
BENCHMARK(featurize_candidate);

static void score_all_candidates(benchmark::State& state) {
    const TaskSpec& task = fixture_task();
    const Observation obs = observe(init_state(task));
    const std::vector<Action> actions = legal_actions(task, obs);
    const CogParams params = make_params();
    for (auto _ : state) {
        benchmark::DoNotOptimize(policy_logits(params, task, obs, actions));
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * actions.size()));
}
BENCHMARK(score_all_candidates);

static void predict_one_effect_set(benchmark::State& state) {
    const TaskSpec& task = fixture_task();
    const Observation obs = observe(init_state(task));
    const std::vector<Action> actions = legal_actions(task, obs);
    const CogParams params = make_params();
    size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict_effects(params, task, obs, actions[i % actions.size()]));
        ++i;
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()));
}
BENCHMARK(predict_one_effect_set);

static void deliberative_episode(benchmark::State& state) {
    const TaskSpec& task = fixture_task();
    const CogParams params = make_params();
    AgentConfig agent;
    agent.top_k = 3;
    agent.greedy = true;
    uint64_t run = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(rollout(params, task, derive_seed(11, task.id, run++), agent));
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()));
}
BENCHMARK(deliberative_episode);

static void oracle_episode(benchmark::State& state) {
    const TaskSpec& task = fixture_task();
    const CogParams params = make_params(1u << 12);
    AgentConfig agent;
    agent.top_k = 512;
    agent.greedy = true;
    agent.oracle_wm = true;
    uint64_t run = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(rollout(params, task, derive_seed(11, task.id, run++), agent));
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()));
}
BENCHMARK(oracle_episode);

BENCHMARK_MAIN();
