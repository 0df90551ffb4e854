#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "dynaplan/cogmodel.hpp"

using namespace dynaplan;

namespace {

constexpr uint32_t kDim = 1u << 12;

CogParams jittered_params(uint64_t seed) {
    CogParams p = make_params(kDim);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    auto fill = [&](WeightBlock& b) {
        for (double& x : b.w) { x = u(rng); }
    };
    fill(p.policy_w);
    for (auto& b : p.trans_w) { fill(b); }
    fill(p.critic_w[0]);
    fill(p.critic_w[1]);
    return p;
}

struct StepSample {
    std::shared_ptr<const TaskSpec> task;
    Observation obs;
    Action action;
    int action_ref = 0;
    EffectSet effects;
    int step = 0;
};

// Expert-plan steps with ground-truth effects; raw material for every batch.
std::vector<StepSample> fixture_steps() {
    std::vector<StepSample> out;
    for (const TaskSpec& spec : generate_tasks(Domain::files, 3, 3, Split::train)) {
        auto task = std::make_shared<const TaskSpec>(spec);
        WorldState s = init_state(spec);
        const auto plan = plan_solution(spec);
        REQUIRE(plan.has_value());
        int step = 0;
        for (const Action& a : *plan) {
            StepSample ss;
            ss.task = task;
            ss.obs = observe(s);
            ss.action = a;
            const auto legal = legal_actions(spec, ss.obs);
            const auto it = std::find(legal.begin(), legal.end(), a);
            REQUIRE(it != legal.end());
            ss.action_ref = static_cast<int>(it - legal.begin());
            const TransitionResult r = transition(s, a);
            ss.effects = r.effects;
            ss.step = step++;
            s = r.state;
            out.push_back(std::move(ss));
        }
    }
    return out;
}

WMSample wm_from(const StepSample& ss, WmVariant variant) {
    WMSample s;
    s.variant = variant;
    s.task_id = ss.task->id;
    s.step = ss.step;
    s.obs = ss.obs;
    s.action = ss.action;
    s.target_effects = ss.effects;
    s.task = ss.task;
    if (variant == WmVariant::next_state) {
        if (ss.effects.has(EffectAtom::output_listing)) { s.next_output = OutputClass::listing; }
        else if (ss.effects.has(EffectAtom::output_error)) { s.next_output = OutputClass::error; }
        else { s.next_output = OutputClass::empty; }
        s.cwd_changed = ss.effects.has(EffectAtom::cwd_set_arg1);
    }
    return s;
}

// Simulate the decided action, sometimes wrongly, and let the critic judge.
WMSample critique_from(const StepSample& ss, bool corrupt) {
    EffectSet predicted = ss.effects;
    if (corrupt) {
        predicted.remove(EffectAtom::output_empty);
        predicted.add(EffectAtom::output_error);
    }
    ActionRecord r;
    r.action = ss.action;
    r.trace.push_back(make_segment(SegmentTag::verification, {"check"}));
    r.trace.push_back(make_simulation(ss.action_ref, predicted));
    r.trace.push_back(make_decision(ss.action_ref, ss.action));
    renumber(r);
    const auto c = rule_critic(r, ss.effects);
    REQUIRE(c.has_value());
    CHECK(c->wait == corrupt);
    WMSample s = wm_from(ss, WmVariant::critique);
    s.critique = c;
    s.injected = inject_critique(r, *c);
    s.predicted_sim = predicted;
    return s;
}

using BlockRef = std::function<std::vector<double>&(CogParams&)>;

// Central-difference probe of every head the analytic gradient touches.
void fd_check(const CogParams& base, const CogGrad& grad,
              const std::function<double(const CogParams&)>& loss_at, int max_per_head = 5) {
    const double h = 1e-6;
    int probed = 0;
    auto probe = [&](const BlockRef& block, const SparseGrad& sg, const char* label) {
        int n = 0;
        for (const auto& [idx, g] : sg.g) {
            if (n++ >= max_per_head) { break; }
            CogParams plus = base;
            block(plus)[idx] += h;
            CogParams minus = base;
            block(minus)[idx] -= h;
            const double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
            const double rel = std::abs(fd - g) / std::max({1.0, std::abs(fd), std::abs(g)});
            CAPTURE(label);
            CAPTURE(idx);
            CAPTURE(fd);
            CAPTURE(g);
            REQUIRE(rel <= 1e-4);
            ++probed;
        }
    };
    probe([](CogParams& p) -> std::vector<double>& { return p.policy_w.w; }, grad.policy, "policy");
    for (int k = 0; k < kNumEffectAtoms; ++k) {
        probe([k](CogParams& p) -> std::vector<double>& { return p.trans_w[static_cast<size_t>(k)].w; },
              grad.trans[static_cast<size_t>(k)], "trans");
    }
    probe([](CogParams& p) -> std::vector<double>& { return p.critic_w[0].w; }, grad.critic[0], "yes");
    probe([](CogParams& p) -> std::vector<double>& { return p.critic_w[1].w; }, grad.critic[1], "wait");
    CHECK(probed > 0);
}

double manual_logsumexp(const std::vector<double>& xs) {
    const double m = *std::max_element(xs.begin(), xs.end());
    double acc = 0.0;
    for (double x : xs) { acc += std::exp(x - m); }
    return m + std::log(acc);
}

}  // namespace

TEST_CASE("analytic world-model gradients match central differences") {
    const auto steps = fixture_steps();
    REQUIRE(steps.size() >= 8);
    const CogParams params = jittered_params(11);

    SUBCASE("effect-atom variant") {
        std::vector<WMSample> batch;
        for (size_t i = 0; i < 6; ++i) { batch.push_back(wm_from(steps[i], WmVariant::state_delta)); }
        const LossGrad lg = lm_loss_and_grad(params, batch);
        CHECK(lg.loss > 0.0);
        fd_check(params, lg.grad, [&](const CogParams& p) { return lm_loss_and_grad(p, batch).loss; });
    }
    SUBCASE("next-observation variant") {
        std::vector<WMSample> batch;
        for (size_t i = 0; i < 6; ++i) { batch.push_back(wm_from(steps[i], WmVariant::next_state)); }
        const LossGrad lg = lm_loss_and_grad(params, batch);
        fd_check(params, lg.grad, [&](const CogParams& p) { return lm_loss_and_grad(p, batch).loss; });
    }
    SUBCASE("critique variant trains verdict and effect heads") {
        std::vector<WMSample> batch;
        for (size_t i = 0; i < 6; ++i) { batch.push_back(critique_from(steps[i], i % 2 == 0)); }
        const LossGrad lg = lm_loss_and_grad(params, batch);
        CHECK_FALSE(lg.grad.critic[0].empty());
        CHECK_FALSE(lg.grad.critic[1].empty());
        fd_check(params, lg.grad, [&](const CogParams& p) { return lm_loss_and_grad(p, batch).loss; });
    }
}

TEST_CASE("analytic policy gradient matches central differences") {
    const auto steps = fixture_steps();
    const CogParams params = jittered_params(12);
    std::vector<PolicyExample> batch;
    for (size_t i = 0; i < 6; ++i) {
        batch.push_back({steps[i].task, steps[i].obs, steps[i].action, 1.0, 0, steps[i].step});
    }
    const LossGrad lg = policy_loss_and_grad(params, batch);
    CHECK(lg.loss > 0.0);
    CHECK(lg.grad.trans[0].empty());
    fd_check(params, lg.grad,
             [&](const CogParams& p) { return policy_loss_and_grad(p, batch).loss; });
}

TEST_CASE("terminal-reward objective reduces to behavior cloning") {
    const auto steps = fixture_steps();
    const CogParams params = jittered_params(13);

    std::vector<PolicyExample> winners;
    for (size_t i = 0; i < 8; ++i) {
        winners.push_back({steps[i].task, steps[i].obs, steps[i].action, 1.0, 0, steps[i].step});
    }
    // Independent negative-log-likelihood computation.
    double expected = 0.0;
    for (const PolicyExample& ex : winners) {
        const auto legal = legal_actions(*ex.task, ex.obs);
        const auto logits = policy_logits(params, *ex.task, ex.obs, legal);
        const auto it = std::find(legal.begin(), legal.end(), ex.action);
        REQUIRE(it != legal.end());
        expected += manual_logsumexp(logits) - logits[static_cast<size_t>(it - legal.begin())];
    }
    const LossGrad lg = policy_loss_and_grad(params, winners);
    CHECK(std::abs(lg.loss - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));

    // Zero-reward episodes contribute nothing at all.
    std::vector<PolicyExample> mixed = winners;
    for (size_t i = 0; i < 4; ++i) {
        mixed.push_back({steps[i].task, steps[i].obs, steps[i].action, 0.0, 0, steps[i].step});
    }
    const LossGrad mg = policy_loss_and_grad(params, mixed);
    CHECK(mg.loss == lg.loss);
    REQUIRE(mg.grad.policy.g.size() == lg.grad.policy.g.size());
    for (const auto& [idx, v] : lg.grad.policy.g) {
        REQUIRE(mg.grad.policy.g.count(idx) == 1);
        CHECK(mg.grad.policy.g.at(idx) == v);
    }

    std::vector<PolicyExample> only_losers(mixed.begin() + static_cast<long>(winners.size()),
                                           mixed.end());
    const LossGrad zg = policy_loss_and_grad(params, only_losers);
    CHECK(zg.loss == 0.0);
    CHECK(zg.grad.policy.empty());
}

TEST_CASE("policy loss validates its inputs") {
    const auto steps = fixture_steps();
    const CogParams params = make_params(kDim);
    PolicyExample ex{steps[0].task, steps[0].obs, steps[0].action, 1.0, 0, 0};

    PolicyExample bad_reward = ex;
    bad_reward.reward = 0.5;
    CHECK_THROWS_AS(policy_loss_and_grad(params, {bad_reward}), std::invalid_argument);

    PolicyExample foreign = ex;
    foreign.action = {Verb::mkdir_v, "/definitely/not/in/vocab", ""};
    CHECK_THROWS_AS(policy_loss_and_grad(params, {foreign}), std::invalid_argument);

    PolicyExample unresolved = ex;
    unresolved.task = nullptr;
    CHECK_THROWS_AS(policy_loss_and_grad(params, {unresolved}), std::invalid_argument);
}

TEST_CASE("world-model loss validates its inputs") {
    const auto steps = fixture_steps();
    const CogParams params = make_params(kDim);
    CHECK_THROWS_AS(lm_loss_and_grad(params, {}), std::invalid_argument);

    std::vector<WMSample> mixed = {wm_from(steps[0], WmVariant::state_delta),
                                   wm_from(steps[1], WmVariant::next_state)};
    CHECK_THROWS_AS(lm_loss_and_grad(params, mixed), std::invalid_argument);

    WMSample unresolved = wm_from(steps[0], WmVariant::state_delta);
    unresolved.task = nullptr;
    CHECK_THROWS_AS(lm_loss_and_grad(params, {unresolved}), std::invalid_argument);

    const SeparateWM wm = make_separate_wm(kDim);
    CHECK_THROWS_AS(lm_loss_and_grad(wm, {critique_from(steps[0], true)}), std::invalid_argument);

    // A critique sample whose mask trains nothing is skipped entirely.
    WMSample inert = critique_from(steps[0], false);
    inert.injected->mask = std::vector<bool>(inert.injected->trace.size(), false);
    const LossGrad lg = lm_loss_and_grad(params, {inert});
    CHECK(lg.loss == 0.0);
    CHECK(lg.grad.critic[0].empty());
}

TEST_CASE("effect prediction applies the consistency repair") {
    const auto steps = fixture_steps();
    const StepSample& ss = steps[0];
    const Featurizer f(kDim, kDefaultHashSeed);
    const FeatureVector fv = f.features(*ss.task, ss.obs, ss.action);
    double feature_sum = 0.0;
    for (const auto& [idx, v] : fv.items) { feature_sum += v; }
    REQUIRE(feature_sum > 0.0);

    auto with_head_weights = [&](double created, double nochange) {
        CogParams p = make_params(kDim);
        auto& cw = p.trans_w[static_cast<size_t>(EffectAtom::created_arg1)].w;
        std::fill(cw.begin(), cw.end(), created);
        auto& nw = p.trans_w[static_cast<size_t>(EffectAtom::no_change)].w;
        std::fill(nw.begin(), nw.end(), nochange);
        return p;
    };

    // Both sides above threshold: the higher score survives.
    CHECK(predict_effects(with_head_weights(1.0, 2.0), *ss.task, ss.obs, ss.action) ==
          make_effects({EffectAtom::no_change}));
    CHECK(predict_effects(with_head_weights(2.0, 1.0), *ss.task, ss.obs, ss.action) ==
          make_effects({EffectAtom::created_arg1}));
    // Ties go to the stay-put reading.
    CHECK(predict_effects(with_head_weights(1.0, 1.0), *ss.task, ss.obs, ss.action) ==
          make_effects({EffectAtom::no_change}));
    // No conflict, no repair.
    CHECK(predict_effects(with_head_weights(1.0, -1.0), *ss.task, ss.obs, ss.action) ==
          make_effects({EffectAtom::created_arg1}));
    // Fresh parameters score zero everywhere: nothing clears the threshold.
    CHECK(predict_effects(make_params(kDim), *ss.task, ss.obs, ss.action).empty());

    // The repair holds for arbitrary parameters.
    for (uint64_t seed = 20; seed < 26; ++seed) {
        const CogParams p = jittered_params(seed);
        for (size_t i = 0; i < steps.size(); i += 3) {
            const EffectSet e = predict_effects(p, *steps[i].task, steps[i].obs, steps[i].action);
            const bool contradiction = e.has(EffectAtom::no_change) && !(e & kMutationAtoms).empty();
            CHECK_FALSE(contradiction);
        }
    }
}

TEST_CASE("separate world model predicts like the embedded heads") {
    const auto steps = fixture_steps();
    const CogParams p = jittered_params(31);
    SeparateWM wm = make_separate_wm(kDim);
    wm.trans_w = p.trans_w;
    for (const StepSample& ss : steps) {
        CHECK(predict_effects(wm, *ss.task, ss.obs, ss.action) ==
              predict_effects(p, *ss.task, ss.obs, ss.action));
    }
}

TEST_CASE("sgd step applies updates, bumps the version, rejects garbage") {
    const auto steps = fixture_steps();
    CogParams p = jittered_params(41);
    const uint64_t h0 = weights_hash(p);
    const uint64_t th0 = trans_weights_hash(p);
    const uint64_t v0 = p.version;

    std::vector<PolicyExample> batch = {
        {steps[0].task, steps[0].obs, steps[0].action, 1.0, 0, 0}};
    const LossGrad lg = policy_loss_and_grad(p, batch);
    REQUIRE_FALSE(lg.grad.policy.empty());
    const auto [idx0, g0] = *lg.grad.policy.g.begin();
    const double before = p.policy_w.w[idx0];

    sgd_step(p, lg.grad, 0.1);
    CHECK(p.version == v0 + 1);
    CHECK(p.policy_w.w[idx0] == doctest::Approx(before - 0.1 * g0).epsilon(1e-12));
    CHECK(weights_hash(p) != h0);
    // Policy-only step leaves the transition heads alone.
    CHECK(trans_weights_hash(p) == th0);

    const uint64_t h1 = weights_hash(p);
    CogGrad nan_grad;
    nan_grad.policy.g[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(sgd_step(p, nan_grad, 0.1), std::invalid_argument);
    CHECK(weights_hash(p) == h1);
    CHECK(p.version == v0 + 1);

    CHECK_THROWS_AS(sgd_step(p, lg.grad, 0.0), std::invalid_argument);
    CogGrad oob;
    oob.policy.g[kDim + 5] = 1.0;
    CHECK_THROWS_AS(sgd_step(p, oob, 0.1), std::out_of_range);

    SeparateWM wm = make_separate_wm(kDim);
    const uint64_t wh0 = weights_hash(wm);
    std::vector<WMSample> wb = {wm_from(steps[0], WmVariant::state_delta)};
    const LossGrad wlg = lm_loss_and_grad(wm, wb);
    sgd_step(wm, wlg.grad, 0.1);
    CHECK(wm.version == 1);
    CHECK(weights_hash(wm) != wh0);
}

TEST_CASE("featurization is deterministic and dimension-bounded") {
    const auto steps = fixture_steps();
    const Featurizer f(kDim, kDefaultHashSeed);
    for (const StepSample& ss : steps) {
        const FeatureVector a = f.features(*ss.task, ss.obs, ss.action);
        const FeatureVector b = f.features(*ss.task, ss.obs, ss.action);
        REQUIRE(a.items == b.items);
        REQUIRE_FALSE(a.items.empty());
        for (size_t i = 0; i < a.items.size(); ++i) {
            CHECK(a.items[i].first < kDim);
            if (i > 0) { CHECK(a.items[i - 1].first < a.items[i].first); }
        }
    }
    // Different hash seeds scatter differently.
    const Featurizer g(kDim, kDefaultHashSeed + 1);
    CHECK(f.features(*steps[0].task, steps[0].obs, steps[0].action).items !=
          g.features(*steps[0].task, steps[0].obs, steps[0].action).items);
    // Critique features extend the base features.
    const FeatureVector base = f.features(*steps[0].task, steps[0].obs, steps[0].action);
    const FeatureVector crit = f.critic_features(*steps[0].task, steps[0].obs, steps[0].action,
                                                 make_effects({EffectAtom::created_arg1}));
    CHECK(crit.items.size() >= base.items.size());
    CHECK(crit.items != base.items);
}
