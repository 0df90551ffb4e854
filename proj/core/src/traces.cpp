#include "dynaplan/traces.hpp"

#include <algorithm>
#include <stdexcept>

namespace dynaplan {

TraceSegment make_segment(SegmentTag tag, std::vector<std::string> tokens) {
    TraceSegment s;
    s.tag = tag;
    s.tokens = std::move(tokens);
    s.cost = segment_cost(tag);
    return s;
}

TraceSegment make_simulation(int action_ref, EffectSet predicted) {
    TraceSegment s = make_segment(SegmentTag::simulation);
    s.action_ref = action_ref;
    s.sim = predicted;
    return s;
}

TraceSegment make_decision(int action_ref, const Action& action) {
    TraceSegment s = make_segment(SegmentTag::decision, {action_to_string(action)});
    s.action_ref = action_ref;
    return s;
}

int record_cost(const ActionRecord& record) {
    int total = 0;
    for (const TraceSegment& s : record.trace) { total += s.cost; }
    return total;
}

void renumber(ActionRecord& record) {
    int id = 1;
    for (TraceSegment& s : record.trace) { s.id = id++; }
}

namespace {

const TraceSegment* find_decision(const ActionRecord& record) {
    for (auto it = record.trace.rbegin(); it != record.trace.rend(); ++it) {
        if (it->tag == SegmentTag::decision) { return &*it; }
    }
    return nullptr;
}

}  // namespace

const TraceSegment* final_action_sim(const ActionRecord& record) {
    const TraceSegment* decision = find_decision(record);
    if (decision == nullptr) { return nullptr; }
    const TraceSegment* sim = nullptr;
    for (const TraceSegment& s : record.trace) {
        if (s.tag == SegmentTag::simulation && s.action_ref == decision->action_ref) { sim = &s; }
    }
    return sim;
}

ActionRecord reconstruct_dit(const ActionRecord& record, int min_cost) {
    const TraceSegment* decision = find_decision(record);
    if (decision == nullptr) { throw std::invalid_argument("record has no decision segment"); }
    if (record_cost(record) < min_cost) { return record; }

    const std::optional<int> final_ref = decision->action_ref;
    ActionRecord out;
    out.action = record.action;
    std::vector<bool> kept_flags(record.trace.size(), false);
    bool prev_kept_sim = false;
    for (size_t i = 0; i < record.trace.size(); ++i) {
        const TraceSegment& s = record.trace[i];
        bool keep = false;
        switch (s.tag) {
            case SegmentTag::verification: keep = true; break;
            case SegmentTag::simulation: keep = s.action_ref == final_ref; break;
            case SegmentTag::decision: keep = true; break;
            case SegmentTag::critique: keep = prev_kept_sim; break;
            default: break;
        }
        kept_flags[i] = keep;
        if (keep) { out.trace.push_back(s); }
        prev_kept_sim = keep && s.tag == SegmentTag::simulation;
    }
    if (record.mask) {
        std::vector<bool> m;
        for (size_t i = 0; i < record.trace.size(); ++i) {
            if (kept_flags[i]) { m.push_back((*record.mask)[i]); }
        }
        out.mask = std::move(m);
    }
    renumber(out);
    return out;
}

std::optional<Critique> rule_critic(const ActionRecord& record, EffectSet actual_effects) {
    if (find_decision(record) == nullptr) { throw std::invalid_argument("record has no decision segment"); }
    const TraceSegment* target = final_action_sim(record);
    if (target == nullptr) { return std::nullopt; }

    Critique c;
    c.target_segment = target->id;
    c.missing = actual_effects - target->sim;
    c.spurious = target->sim - actual_effects;
    c.wait = !(c.missing.empty() && c.spurious.empty());
    c.confidence = 5;
    return c;
}

ActionRecord inject_critique(const ActionRecord& record, const Critique& critique) {
    size_t pos = record.trace.size();
    for (size_t i = 0; i < record.trace.size(); ++i) {
        if (record.trace[i].id == critique.target_segment) {
            if (record.trace[i].tag != SegmentTag::simulation) {
                throw std::invalid_argument("critique target is not a simulation segment");
            }
            pos = i;
            break;
        }
    }
    if (pos == record.trace.size()) { throw std::invalid_argument("critique target id absent"); }

    ActionRecord out = record;
    TraceSegment seg = make_segment(SegmentTag::critique, {critique.wait ? "wait" : "yes"});
    seg.critique = critique;
    out.trace.insert(out.trace.begin() + static_cast<long>(pos) + 1, std::move(seg));
    renumber(out);
    std::vector<bool> mask(out.trace.size(), false);
    mask[pos + 1] = true;
    out.mask = std::move(mask);
    return out;
}

ActionRecord strip_critiques(const ActionRecord& record) {
    ActionRecord out;
    out.action = record.action;
    for (const TraceSegment& s : record.trace) {
        if (s.tag != SegmentTag::critique) { out.trace.push_back(s); }
    }
    renumber(out);
    return out;
}

namespace {

bool is_hint_segment(const TraceSegment& s) {
    return s.tag == SegmentTag::knowledge && !s.tokens.empty() && s.tokens[0] == kHintMarker;
}

}  // namespace

ActionRecord strip_hints(const ActionRecord& record) {
    ActionRecord out;
    out.action = record.action;
    std::vector<bool> mask;
    for (size_t i = 0; i < record.trace.size(); ++i) {
        if (is_hint_segment(record.trace[i])) { continue; }
        out.trace.push_back(record.trace[i]);
        if (record.mask) { mask.push_back((*record.mask)[i]); }
    }
    if (record.mask) { out.mask = std::move(mask); }
    renumber(out);
    return out;
}

Trajectory strip_hints(const Trajectory& trajectory) {
    Trajectory out = trajectory;
    for (Step& step : out.steps) { step.record = strip_hints(step.record); }
    return out;
}

bool WMSample::operator==(const WMSample& o) const {
    return variant == o.variant && task_id == o.task_id && seed == o.seed && step == o.step &&
           obs == o.obs && action == o.action && target_effects == o.target_effects &&
           next_output == o.next_output && cwd_changed == o.cwd_changed && critique == o.critique &&
           injected == o.injected && predicted_sim == o.predicted_sim;
}

std::vector<WMSample> wm_samples(const Trajectory& trajectory, WmVariant variant,
                                 const WmSampleOptions& options, WmSampleStats* stats) {
    std::vector<WMSample> out;
    if (!trajectory.terminated_within_budget) { return out; }
    for (size_t i = 0; i < trajectory.steps.size(); ++i) {
        const Step& step = trajectory.steps[i];
        if (stats) { ++stats->steps; }
        WMSample s;
        s.variant = variant;
        s.task_id = trajectory.task_id;
        s.seed = trajectory.seed;
        s.step = static_cast<int>(i);
        s.obs = step.obs;
        s.action = step.record.action;
        s.target_effects = step.effects;
        switch (variant) {
            case WmVariant::next_state:
                if (step.effects.has(EffectAtom::output_listing)) { s.next_output = OutputClass::listing; }
                else if (step.effects.has(EffectAtom::output_error)) { s.next_output = OutputClass::error; }
                else { s.next_output = OutputClass::empty; }
                s.cwd_changed = step.effects.has(EffectAtom::cwd_set_arg1);
                break;
            case WmVariant::state_delta:
                break;
            case WmVariant::critique: {
                auto c = rule_critic(step.record, step.effects);
                if (!c) {
                    if (stats) { ++stats->no_simulation; }
                    continue;
                }
                if (options.critique_wait_only && !c->wait) { continue; }
                s.critique = c;
                s.injected = inject_critique(step.record, *c);
                for (const TraceSegment& seg : step.record.trace) {
                    if (seg.tag == SegmentTag::simulation && seg.id == c->target_segment) {
                        s.predicted_sim = seg.sim;
                    }
                }
                break;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace dynaplan
