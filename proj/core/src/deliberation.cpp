#include "dynaplan/deliberation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dynaplan {

int BeliefState::satisfied_count() const {
    int n = 0;
    for (bool b : satisfied) { n += b ? 1 : 0; }
    return n;
}

bool BeliefState::complete() const {
    return std::all_of(satisfied.begin(), satisfied.end(), [](bool b) { return b; });
}

void belief_observe(BeliefState& belief, const Observation& obs) {
    for (size_t i = 0; i < belief.rendered.size(); ++i) {
        const int st = atom_obs_status(belief.rendered[i], obs);
        if (st > 0) { belief.satisfied[i] = true; }
        if (st < 0) { belief.satisfied[i] = false; }
    }
}

void belief_apply(BeliefState& belief, const Action& action, EffectSet effects) {
    const bool created1 = effects.has(EffectAtom::created_arg1);
    const bool created2 = effects.has(EffectAtom::created_arg2);
    const bool removed1 = effects.has(EffectAtom::removed_arg1);
    const bool removed2 = effects.has(EffectAtom::removed_arg2);
    const bool cwdset = effects.has(EffectAtom::cwd_set_arg1);
    const bool contentset = effects.has(EffectAtom::content_set_arg1);

    auto removed_covers = [&](const std::string& p) {
        return (removed1 && (action.arg1 == p || is_ancestor(action.arg1, p))) ||
               (removed2 && (action.arg2 == p || is_ancestor(action.arg2, p)));
    };
    auto created_at = [&](const std::string& p) {
        return (created1 && action.arg1 == p) || (created2 && action.arg2 == p);
    };

    for (size_t i = 0; i < belief.rendered.size(); ++i) {
        const GoalAtom& atom = belief.rendered[i];
        bool sat = belief.satisfied[i];
        switch (atom.kind) {
            case GoalKind::exists:
                if (created_at(atom.path)) { sat = true; }
                if (removed_covers(atom.path)) { sat = false; }
                break;
            case GoalKind::is_dir:
                if (created1 && action.verb == Verb::mkdir_v && action.arg1 == atom.path) { sat = true; }
                if (removed_covers(atom.path)) { sat = false; }
                break;
            case GoalKind::content:
                if (contentset && action.arg1 == atom.path) { sat = action.arg2 == atom.token; }
                if (created1 && action.verb == Verb::touch_v && action.arg1 == atom.path) {
                    sat = atom.token == content_alphabet()[0];
                }
                if (removed_covers(atom.path)) { sat = false; }
                break;
            case GoalKind::not_exists:
                if (removed_covers(atom.path)) { sat = true; }
                if (created_at(atom.path)) { sat = false; }
                break;
            case GoalKind::cwd_is:
                if (cwdset) { sat = action.arg1 == atom.path; }
                break;
        }
        belief.satisfied[i] = sat;
    }
}

BeliefState initial_belief(const TaskSpec& task, const Observation& obs) {
    BeliefState b;
    b.rendered = parse_rendered_atoms(task.instruction);
    b.satisfied.assign(b.rendered.size(), false);
    belief_observe(b, obs);
    return b;
}

namespace {

BeliefState replay_belief(const TaskSpec& task, const std::vector<Step>& history,
                          const Observation& obs) {
    if (history.empty()) { return initial_belief(task, obs); }
    BeliefState b = initial_belief(task, history[0].obs);
    for (size_t i = 0; i < history.size(); ++i) {
        belief_apply(b, history[i].record.action, history[i].effects);
        belief_observe(b, i + 1 < history.size() ? history[i + 1].obs : obs);
    }
    return b;
}

WorldState replay_state(const TaskSpec& task, const std::vector<Step>& history) {
    WorldState s = init_state(task);
    for (const Step& step : history) { s = transition(s, step.record.action).state; }
    return s;
}

TraceSegment verification_segment(const std::vector<Step>& history) {
    if (history.empty()) { return make_segment(SegmentTag::verification, {"start"}); }
    const Step& prev = history.back();
    const TraceSegment* sim = final_action_sim(prev.record);
    if (!sim) { return make_segment(SegmentTag::verification, {"unknown"}); }
    return make_segment(SegmentTag::verification,
                        {sim->sim == prev.effects ? "consistent" : "inconsistent"});
}

std::optional<TraceSegment> hint_segment(const TaskSpec& task) {
    const auto& ins = task.instruction;
    for (size_t i = 0; i < ins.size(); ++i) {
        if (ins[i] == kHintMarker) {
            std::vector<std::string> tokens(ins.begin() + static_cast<long>(i), ins.end());
            return make_segment(SegmentTag::knowledge, std::move(tokens));
        }
    }
    return std::nullopt;
}

// Goal overlap of a candidate's simulated successor. The terminal action
// banks the current belief: +1 when every rendered atom is believed
// satisfied, −1 otherwise (stopping early forfeits unmet goals).
int simulated_overlap(const BeliefState& belief, const Action& action, EffectSet effects) {
    if (action.verb == Verb::done_v) {
        return belief.satisfied_count() + (belief.complete() ? 1 : -1);
    }
    BeliefState next = belief;
    belief_apply(next, action, effects);
    int score = next.satisfied_count();
    // Removing a proper ancestor of a still-unsatisfied creation goal tears
    // down scaffolding that goal needs; the one-step overlap cannot see the
    // rebuild cost, so price the damage explicitly. Removing the goal path
    // itself stays free: demolition can be a legitimate first move.
    const bool removed1 = effects.has(EffectAtom::removed_arg1);
    const bool removed2 = effects.has(EffectAtom::removed_arg2);
    if (removed1 || removed2) {
        for (size_t i = 0; i < next.rendered.size(); ++i) {
            if (next.satisfied[i] || next.rendered[i].kind == GoalKind::not_exists) { continue; }
            const std::string& goal_path = next.rendered[i].path;
            if ((removed1 && is_ancestor(action.arg1, goal_path)) ||
                (removed2 && is_ancestor(action.arg2, goal_path))) {
                --score;
            }
        }
    }
    return score;
}

size_t pick_index(const std::vector<double>& scores, bool greedy, Rng& rng) {
    if (greedy) {
        size_t best = 0;
        for (size_t i = 1; i < scores.size(); ++i) {
            if (scores[i] > scores[best]) { best = i; }
        }
        return best;
    }
    const double m = *std::max_element(scores.begin(), scores.end());
    std::vector<double> w(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) { w[i] = std::exp(scores[i] - m); }
    return rng.weighted(w);
}

ActionRecord act_dyna(const CogParams& params, const TaskSpec& task, const std::vector<Step>& history,
                      const Observation& obs, const AgentConfig& config, Rng& rng) {
    const std::vector<Action> legal = legal_actions(task, obs);
    const std::vector<double> logits = policy_logits(params, task, obs, legal);
    const BeliefState belief = replay_belief(task, history, obs);

    std::vector<size_t> order(legal.size());
    for (size_t i = 0; i < order.size(); ++i) { order[i] = i; }
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return logits[a] > logits[b]; });
    const size_t k = std::min<size_t>(static_cast<size_t>(std::max(config.top_k, 1)), legal.size());
    order.resize(k);

    std::optional<WorldState> true_state;
    if (config.oracle_wm) { true_state = replay_state(task, history); }

    std::vector<EffectSet> predicted(k);
    std::vector<double> scores(k);
    for (size_t c = 0; c < k; ++c) {
        const Action& a = legal[order[c]];
        predicted[c] = config.oracle_wm ? true_effects(*true_state, a)
                                        : predict_effects(params, task, obs, a);
        scores[c] = logits[order[c]] + config.beta * simulated_overlap(belief, a, predicted[c]);
    }

    size_t chosen = pick_index(scores, config.greedy, rng);
    if (config.greedy) {
        // Break score ties toward the lowest action index.
        for (size_t c = 0; c < k; ++c) {
            if (scores[c] == scores[chosen] && order[c] < order[chosen]) { chosen = c; }
        }
    }

    ActionRecord rec;
    rec.trace.push_back(verification_segment(history));
    if (auto hint = hint_segment(task)) { rec.trace.push_back(std::move(*hint)); }
    for (size_t c = 0; c < k; ++c) {
        rec.trace.push_back(make_simulation(static_cast<int>(order[c]), predicted[c]));
    }
    rec.action = legal[order[chosen]];
    rec.trace.push_back(make_decision(static_cast<int>(order[chosen]), rec.action));
    renumber(rec);
    return rec;
}

ActionRecord act_no_think(const CogParams& params, const TaskSpec& task, const Observation& obs,
                          const AgentConfig& config, Rng& rng) {
    const std::vector<Action> legal = legal_actions(task, obs);
    const std::vector<double> logits = policy_logits(params, task, obs, legal);
    size_t chosen;
    if (config.greedy) {
        chosen = 0;
        for (size_t i = 1; i < legal.size(); ++i) {
            if (logits[i] > logits[chosen]) { chosen = i; }
        }
    } else {
        chosen = pick_index(logits, false, rng);
    }
    ActionRecord rec;
    rec.action = legal[chosen];
    rec.trace.push_back(make_decision(static_cast<int>(chosen), rec.action));
    renumber(rec);
    return rec;
}

ActionRecord act_expert(const TaskSpec& task, const std::vector<Step>& history,
                        const Observation& obs) {
    const auto plan = plan_solution(task);
    if (!plan) { throw std::runtime_error("expert cannot solve task " + task.id); }
    const size_t idx = history.size();
    const Action action = idx < plan->size() ? (*plan)[idx] : Action{Verb::done_v, "", ""};

    const std::vector<Action> legal = legal_actions(task, obs);
    const auto it = std::find(legal.begin(), legal.end(), action);
    if (it == legal.end()) { throw std::logic_error("expert action outside legal set"); }
    const int chosen = static_cast<int>(it - legal.begin());

    const WorldState state = replay_state(task, history);
    int other = chosen == 0 ? 1 : 0;

    ActionRecord rec;
    rec.trace.push_back(verification_segment(history));
    rec.trace.push_back(make_segment(SegmentTag::knowledge, {"note", "cwd", obs.cwd}));
    rec.trace.push_back(
        make_segment(SegmentTag::knowledge, {"note", "step", std::to_string(obs.step)}));
    std::vector<std::string> scan = {"scan"};
    for (size_t i = 0; i < obs.listing.size() && i < 4; ++i) { scan.push_back(obs.listing[i].name); }
    rec.trace.push_back(make_segment(SegmentTag::exploration, std::move(scan)));
    rec.trace.push_back(make_simulation(other, true_effects(state, legal[static_cast<size_t>(other)])));
    rec.trace.push_back(make_simulation(chosen, true_effects(state, action)));
    rec.action = action;
    rec.trace.push_back(make_decision(chosen, action));
    renumber(rec);
    return rec;
}

}  // namespace

ActionRecord act(const CogParams& params, const TaskSpec& task, const std::vector<Step>& history,
                 const Observation& obs, const AgentConfig& config, Rng& rng) {
    switch (config.mode) {
        case ThinkMode::dyna_think: return act_dyna(params, task, history, obs, config, rng);
        case ThinkMode::no_think: return act_no_think(params, task, obs, config, rng);
        case ThinkMode::verbose_expert: return act_expert(task, history, obs);
    }
    throw std::logic_error("unknown think mode");
}

Trajectory rollout(const CogParams& params, const TaskSpec& task, uint64_t seed,
                   const AgentConfig& config) {
    Trajectory t;
    t.task_id = task.id;
    t.seed = seed;
    Rng rng(seed);
    WorldState state = init_state(task);
    Observation obs = observe(state);
    for (int i = 0; i < config.budget; ++i) {
        ActionRecord rec = act(params, task, t.steps, obs, config, rng);
        TransitionResult r = transition(state, rec.action);
        t.steps.push_back(Step{obs, std::move(rec), r.effects});
        state = std::move(r.state);
        obs = r.obs;
        if (r.terminal) { break; }
    }
    t.final_obs = obs;
    t.reward = evaluate(state, task.evaluator);
    t.terminated_within_budget = true;
    return t;
}

}  // namespace dynaplan
