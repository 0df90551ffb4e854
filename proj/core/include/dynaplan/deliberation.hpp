#pragma once

#include <cstdint>
#include <vector>

#include "dynaplan/cogmodel.hpp"
#include "dynaplan/hashing.hpp"
#include "dynaplan/traces.hpp"
#include "dynaplan/worldsim.hpp"

namespace dynaplan {

// ---------------------------------------------------------------------------
// Agents. The planning agent verifies its previous simulation against the new
// observation, simulates its top-k policy candidates with the learned
// transition heads, scores each candidate by policy logit plus goal overlap
// of the simulated successor, and decides. A reactive baseline skips all of
// that, and a scripted expert narrates optimal plays of the true dynamics.
// ---------------------------------------------------------------------------

enum class ThinkMode : uint8_t { dyna_think = 0, no_think, verbose_expert };
constexpr std::array<std::string_view, 3> kThinkModeNames = {"dyna_think", "no_think", "verbose_expert"};

struct AgentConfig {
    int top_k = 3;          // candidates simulated per step
    double beta = 1.0;      // goal-overlap weight in selection
    ThinkMode mode = ThinkMode::dyna_think;
    int budget = kStepBudget;
    bool greedy = false;    // argmax instead of softmax sampling
    bool oracle_wm = false; // substitute the true simulator for predict_effects
};

// Which instruction-rendered goal atoms the agent currently believes hold.
// Derived purely from observations and observed effects, so it is replayable;
// used by selection and by the terminal-action rule.
struct BeliefState {
    std::vector<GoalAtom> rendered;  // parsed from the instruction
    std::vector<bool> satisfied;     // parallel to rendered
    int satisfied_count() const;
    bool complete() const;  // every rendered atom believed satisfied
};

BeliefState initial_belief(const TaskSpec& task, const Observation& obs);
void belief_observe(BeliefState& belief, const Observation& obs);
void belief_apply(BeliefState& belief, const Action& action, EffectSet effects);

// Produces the next ActionRecord. `history` is the trajectory so far (used
// for verification and for replaying the true state in expert/oracle modes).
ActionRecord act(const CogParams& params, const TaskSpec& task, const std::vector<Step>& history,
                 const Observation& obs, const AgentConfig& config, Rng& rng);

// Runs a full episode against the simulator. Deterministic in
// (params, task, seed, config).
Trajectory rollout(const CogParams& params, const TaskSpec& task, uint64_t seed,
                   const AgentConfig& config);

}  // namespace dynaplan
