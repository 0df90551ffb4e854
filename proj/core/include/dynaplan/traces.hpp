#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dynaplan/effects.hpp"
#include "dynaplan/worldsim.hpp"

namespace dynaplan {

// ---------------------------------------------------------------------------
// Structured thought traces. A trace is a sequence of tagged segments ending
// in a decision; segments carry either token payloads, a predicted effect set
// (simulation), or a critique of a simulation. Costs are a fixed token-count
// proxy used for length statistics.
// ---------------------------------------------------------------------------

enum class SegmentTag : uint8_t { verification = 0, exploration, knowledge, simulation, critique, decision };
constexpr std::array<std::string_view, 6> kSegmentTagNames = {
    "verification", "exploration", "knowledge", "simulation", "critique", "decision",
};

constexpr int segment_cost(SegmentTag tag) {
    switch (tag) {
        case SegmentTag::verification: return 3;
        case SegmentTag::exploration: return 5;
        case SegmentTag::knowledge: return 4;
        case SegmentTag::simulation: return 4;
        case SegmentTag::critique: return 3;
        case SegmentTag::decision: return 1;
    }
    return 1;
}

struct Critique {
    bool wait = false;       // verdict: false = "yes" (simulation confirmed)
    EffectSet missing;       // actual \ predicted
    EffectSet spurious;      // predicted \ actual
    int target_segment = 0;  // id of the simulation segment it judges
    int confidence = 5;      // deterministic critic: always 5
    bool operator==(const Critique&) const = default;
};

struct TraceSegment {
    int id = 0;
    SegmentTag tag = SegmentTag::decision;
    std::optional<int> action_ref;    // index into legal_actions; simulation & decision
    std::vector<std::string> tokens;  // verification/exploration/knowledge/decision payload
    EffectSet sim;                    // simulation payload
    std::optional<Critique> critique; // critique payload (target_segment = preceding id)
    int cost = 1;
    bool operator==(const TraceSegment&) const = default;
};

TraceSegment make_segment(SegmentTag tag, std::vector<std::string> tokens = {});
TraceSegment make_simulation(int action_ref, EffectSet predicted);
TraceSegment make_decision(int action_ref, const Action& action);

struct ActionRecord {
    std::vector<TraceSegment> trace;
    Action action;
    std::optional<std::vector<bool>> mask;  // per-segment training mask
    bool operator==(const ActionRecord&) const = default;
};

int record_cost(const ActionRecord& record);
// Renumbers segment ids to 1..n in place.
void renumber(ActionRecord& record);
// The last simulation segment whose action_ref matches the decision's, or
// nullptr when the final action was never simulated.
const TraceSegment* final_action_sim(const ActionRecord& record);

struct Step {
    Observation obs;
    ActionRecord record;
    EffectSet effects;  // ground-truth effects of record.action
    bool operator==(const Step&) const = default;
};

struct Trajectory {
    std::string task_id;
    uint64_t seed = 0;
    std::vector<Step> steps;
    Observation final_obs;
    int reward = 0;
    bool terminated_within_budget = false;  // done emitted or budget exhausted (not aborted)
    bool operator==(const Trajectory&) const = default;
};

// --- trace algorithms --------------------------------------------------------

// Compresses a verbose trace down to: all verification segments, simulations
// of the final action, critiques of those simulations, and the decision.
// Records cheaper than `min_cost` are returned untouched. Idempotent; never
// changes the action.
constexpr int kReconstructMinCost = 12;
ActionRecord reconstruct_dit(const ActionRecord& record, int min_cost = kReconstructMinCost);

// Judges the final-action simulation against what actually happened. nullopt
// when the trace contains no simulation of the final action ("no simulation",
// counted by callers). Throws if the record has no decision segment.
std::optional<Critique> rule_critic(const ActionRecord& record, EffectSet actual_effects);

// Inserts a critique segment right after its target simulation, renumbers,
// and attaches a mask that is true only on the inserted segment. Throws when
// the target id is absent or not a simulation.
ActionRecord inject_critique(const ActionRecord& record, const Critique& critique);

// Removes critique segments and the mask; inverse of inject_critique up to
// renumbering.
ActionRecord strip_critiques(const ActionRecord& record);

// Removes hint knowledge segments (tokens starting with the hint marker).
constexpr const char* kHintMarker = "hint:";
ActionRecord strip_hints(const ActionRecord& record);
Trajectory strip_hints(const Trajectory& trajectory);

// --- world-model samples -------------------------------------------------------

enum class WmVariant : uint8_t { next_state = 0, state_delta, critique };
constexpr std::array<std::string_view, 3> kWmVariantNames = {"next_state", "state_delta", "critique"};

struct WMSample {
    WmVariant variant = WmVariant::state_delta;
    std::string task_id;
    uint64_t seed = 0;
    int step = 0;
    Observation obs;
    Action action;
    EffectSet target_effects;          // ground truth for every variant
    OutputClass next_output = OutputClass::empty;  // next_state extra field
    bool cwd_changed = false;                      // next_state extra field
    std::optional<Critique> critique;  // critique variant
    std::optional<ActionRecord> injected;  // critique variant: masked record
    EffectSet predicted_sim;           // critique variant: what the trace simulated
    std::shared_ptr<const TaskSpec> task;  // resolved by dataset assembly, not serialized
    bool operator==(const WMSample& o) const;
};

struct WmSampleOptions {
    bool critique_wait_only = false;  // restrict injection to wait verdicts
};

struct WmSampleStats {
    int steps = 0;
    int no_simulation = 0;  // critique variant: steps skipped for lack of a simulation
};

// One sample per step. Non-terminated (aborted) trajectories yield nothing.
std::vector<WMSample> wm_samples(const Trajectory& trajectory, WmVariant variant,
                                 const WmSampleOptions& options = {}, WmSampleStats* stats = nullptr);

}  // namespace dynaplan
