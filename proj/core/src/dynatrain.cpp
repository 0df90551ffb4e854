#include "dynaplan/dynatrain.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "dynaplan/evalharness.hpp"
#include "dynaplan/hashing.hpp"
#include "dynaplan/parallel.hpp"

namespace dynaplan {

TaskTable make_task_table(const std::vector<TaskSpec>& tasks) {
    TaskTable table;
    for (const TaskSpec& t : tasks) {
        if (!table.emplace(t.id, std::make_shared<const TaskSpec>(t)).second) {
            throw std::invalid_argument("duplicate task id: " + t.id);
        }
    }
    return table;
}

uint64_t trajectory_hash(const Trajectory& t) {
    std::string blob = t.task_id;
    blob += '\x1f';
    blob += to_hex(t.seed);
    for (const Step& s : t.steps) {
        blob += '\x1f';
        blob += action_to_string(s.record.action);
        blob += '\x1f';
        blob += std::to_string(s.effects.bits());
    }
    blob += '\x1f';
    blob += std::to_string(t.reward);
    blob += t.terminated_within_budget ? 'T' : 'A';
    return fnv1a64(blob);
}

RolloutSet rejection_sample(const CogParams& params, const std::vector<TaskSpec>& tasks, int k,
                            uint64_t seed, const AgentConfig& agent, int workers) {
    if (k <= 0) { throw std::invalid_argument("rejection_sample: k must be positive"); }
    std::vector<Trajectory> slots(tasks.size() * static_cast<size_t>(k));
    parallel_for(slots.size(), workers, [&](size_t idx) {
        const TaskSpec& task = tasks[idx / static_cast<size_t>(k)];
        const uint64_t run = idx % static_cast<size_t>(k);
        slots[idx] = rollout(params, task, derive_seed(seed, task.id, run), agent);
    });
    RolloutSet out;
    for (size_t i = 0; i < tasks.size(); ++i) {
        for (int r = 0; r < k; ++r) {
            const Trajectory& t = slots[i * static_cast<size_t>(k) + static_cast<size_t>(r)];
            if (t.reward == 1) {
                out.successes.push_back(t);
                break;  // keep only the first winning seed per task
            }
        }
    }
    out.all = std::move(slots);
    return out;
}

uint64_t DatasetBundle::parity_hash() const {
    uint64_t h = kFnvOffset;
    for (const Provenance& p : provenance) { h = mix64(h ^ p.hash); }
    return h;
}

DatasetBundle build_bundle(const TaskTable& tasks, const RolloutSet& rollouts, WmVariant variant,
                           const WmSampleOptions& options) {
    DatasetBundle bundle;
    auto resolve = [&](const std::string& id) {
        auto it = tasks.find(id);
        if (it == tasks.end()) { throw std::invalid_argument("rollout references unknown task: " + id); }
        return it->second;
    };
    for (const Trajectory& t : rollouts.successes) {
        auto task = resolve(t.task_id);
        for (size_t s = 0; s < t.steps.size(); ++s) {
            bundle.policy_set.push_back(PolicyExample{task, t.steps[s].obs, t.steps[s].record.action,
                                                      1.0, t.seed, static_cast<int>(s)});
        }
    }
    for (const Trajectory& t : rollouts.all) {
        auto task = resolve(t.task_id);
        WmSampleStats stats;
        std::vector<WMSample> samples = wm_samples(t, variant, options, &stats);
        for (WMSample& s : samples) {
            s.task = task;
            bundle.wm_set.push_back(std::move(s));
        }
        bundle.wm_stats.steps += stats.steps;
        bundle.wm_stats.no_simulation += stats.no_simulation;
        bundle.provenance.push_back(Provenance{t.task_id, t.seed, trajectory_hash(t)});
    }
    return bundle;
}

namespace {

// Fixed-order mini-batch SGD shared by every head/model combination.
template <typename Model, typename Sample, typename LossFn>
EpochStats run_epochs(Model& model, const std::vector<Sample>& data, int epochs, double lr,
                      int batch_size, const LossFn& loss_fn) {
    EpochStats stats;
    if (data.empty() || epochs <= 0) { return stats; }
    const size_t bs = batch_size > 0 ? static_cast<size_t>(batch_size) : data.size();
    for (int e = 0; e < epochs; ++e) {
        double epoch_loss = 0.0;
        for (size_t begin = 0; begin < data.size(); begin += bs) {
            const size_t end = std::min(begin + bs, data.size());
            std::vector<Sample> batch(data.begin() + static_cast<ptrdiff_t>(begin),
                                      data.begin() + static_cast<ptrdiff_t>(end));
            LossGrad lg = loss_fn(model, batch);
            epoch_loss += lg.loss;
            sgd_step(model, lg.grad, lr);
            ++stats.sgd_steps;
        }
        epoch_loss /= static_cast<double>(data.size());
        if (e == 0) { stats.first_loss = epoch_loss; }
        stats.last_loss = epoch_loss;
    }
    return stats;
}

}  // namespace

EpochStats train_wm(CogParams& params, const std::vector<WMSample>& samples, int epochs, double lr,
                    int batch_size) {
    return run_epochs(params, samples, epochs, lr, batch_size,
                      [](const CogParams& p, const std::vector<WMSample>& b) { return lm_loss_and_grad(p, b); });
}

EpochStats train_wm(SeparateWM& wm, const std::vector<WMSample>& samples, int epochs, double lr,
                    int batch_size) {
    return run_epochs(wm, samples, epochs, lr, batch_size,
                      [](const SeparateWM& m, const std::vector<WMSample>& b) { return lm_loss_and_grad(m, b); });
}

EpochStats train_policy(CogParams& params, const std::vector<PolicyExample>& examples, int epochs,
                        double lr, int batch_size) {
    return run_epochs(params, examples, epochs, lr, batch_size,
                      [](const CogParams& p, const std::vector<PolicyExample>& b) {
                          return policy_loss_and_grad(p, b);
                      });
}

CogParams train_dit(const std::vector<Trajectory>& expert_trajectories, const TaskTable& tasks,
                    uint32_t dim, uint64_t hash_seed, const TrainConfig& config, RunLog* log) {
    CogParams params = make_params(dim, hash_seed);
    std::vector<PolicyExample> policy_set;
    std::vector<WMSample> wm_set;
    for (const Trajectory& t : expert_trajectories) {
        auto it = tasks.find(t.task_id);
        if (it == tasks.end()) {
            throw std::invalid_argument("expert trajectory references unknown task: " + t.task_id);
        }
        const auto& task = it->second;
        for (size_t s = 0; s < t.steps.size(); ++s) {
            const Step& step = t.steps[s];
            ActionRecord rec = reconstruct_dit(step.record, config.reconstruct_min_cost);
            policy_set.push_back(
                PolicyExample{task, step.obs, rec.action, 1.0, t.seed, static_cast<int>(s)});
            // Transition heads learn from the simulations the reconstruction
            // kept, labeled with what actually happened.
            if (final_action_sim(rec) != nullptr) {
                WMSample ws;
                ws.variant = WmVariant::state_delta;
                ws.task_id = t.task_id;
                ws.seed = t.seed;
                ws.step = static_cast<int>(s);
                ws.obs = step.obs;
                ws.action = rec.action;
                ws.target_effects = step.effects;
                ws.task = task;
                wm_set.push_back(std::move(ws));
            }
        }
    }
    const EpochStats wm = train_wm(params, wm_set, config.epochs_wm, config.lr_wm, config.batch_size);
    const EpochStats pol =
        train_policy(params, policy_set, config.epochs_policy, config.lr_policy, config.batch_size);
    if (log) {
        LogEntry e;
        e.stage = "dit";
        e.values = {{"trajectories", static_cast<double>(expert_trajectories.size())},
                    {"policy_examples", static_cast<double>(policy_set.size())},
                    {"wm_samples", static_cast<double>(wm_set.size())},
                    {"wm_first_loss", wm.first_loss},
                    {"wm_last_loss", wm.last_loss},
                    {"policy_first_loss", pol.first_loss},
                    {"policy_last_loss", pol.last_loss},
                    {"version", static_cast<double>(params.version)}};
        log->push_back(std::move(e));
    }
    return params;
}

namespace {

void log_stage(RunLog* log, const std::string& stage, int iteration, const RolloutSet& rolls,
               const DatasetBundle& bundle, uint64_t v0, uint64_t v1, uint64_t v2,
               const EpochStats& wm, const EpochStats& pol) {
    if (!log) { return; }
    LogEntry e;
    e.stage = stage;
    e.values = {{"iteration", static_cast<double>(iteration)},
                {"rollouts", static_cast<double>(rolls.all.size())},
                {"successes", static_cast<double>(rolls.successes.size())},
                {"policy_examples", static_cast<double>(bundle.policy_set.size())},
                {"wm_samples", static_cast<double>(bundle.wm_set.size())},
                {"no_simulation", static_cast<double>(bundle.wm_stats.no_simulation)},
                {"version_start", static_cast<double>(v0)},
                {"version_after_wm", static_cast<double>(v1)},
                {"version_after_policy", static_cast<double>(v2)},
                {"wm_first_loss", wm.first_loss},
                {"wm_last_loss", wm.last_loss},
                {"policy_first_loss", pol.first_loss},
                {"policy_last_loss", pol.last_loss}};
    e.text["parity"] = to_hex(bundle.parity_hash());
    log->push_back(std::move(e));
}

}  // namespace

CogParams train_ddt(CogParams params, const std::vector<TaskSpec>& tasks, WmVariant variant,
                    const TrainConfig& config, RunLog* log) {
    const TaskTable table = make_task_table(tasks);
    const WmSampleOptions options{config.critique_wait_only};
    for (int i = 0; i < config.iterations; ++i) {
        const uint64_t stage_seed = derive_seed(config.seed, "iter", static_cast<uint64_t>(i));
        const RolloutSet rolls =
            rejection_sample(params, tasks, config.bon_k, stage_seed, config.agent, config.workers);
        const DatasetBundle bundle = build_bundle(table, rolls, variant, options);
        const uint64_t v0 = params.version;
        const EpochStats wm =
            train_wm(params, bundle.wm_set, config.epochs_wm, config.lr_wm, config.batch_size);
        const uint64_t v1 = params.version;
        const EpochStats pol = train_policy(params, bundle.policy_set, config.epochs_policy,
                                            config.lr_policy, config.batch_size);
        log_stage(log, "ddt", i, rolls, bundle, v0, v1, params.version, wm, pol);
    }
    return params;
}

CogParams train_rft(CogParams params, const std::vector<TaskSpec>& tasks, const TrainConfig& config,
                    RunLog* log) {
    const TaskTable table = make_task_table(tasks);
    for (int i = 0; i < config.iterations; ++i) {
        // Same stage-seed derivation as the joint trainer so that, from equal
        // starting weights, both consume byte-identical rollouts.
        const uint64_t stage_seed = derive_seed(config.seed, "iter", static_cast<uint64_t>(i));
        const RolloutSet rolls =
            rejection_sample(params, tasks, config.bon_k, stage_seed, config.agent, config.workers);
        const DatasetBundle bundle = build_bundle(table, rolls, config.variant, {});
        const uint64_t v0 = params.version;
        const EpochStats pol = train_policy(params, bundle.policy_set, config.epochs_policy,
                                            config.lr_policy, config.batch_size);
        log_stage(log, "rft", i, rolls, bundle, v0, v0, params.version, EpochStats{}, pol);
    }
    return params;
}

Trajectory simulate_with_wm(const CogParams& params, const SeparateWM& wm, const TaskSpec& task,
                            uint64_t seed, const AgentConfig& agent) {
    Trajectory t;
    t.task_id = task.id;
    t.seed = seed;
    Rng rng(seed);
    WorldState shadow = init_state(task);
    Observation obs = observe(shadow);
    bool diverged = false;
    for (int i = 0; i < agent.budget; ++i) {
        ActionRecord rec = act(params, task, t.steps, obs, agent, rng);
        const Verb verb = rec.action.verb;
        const EffectSet predicted = predict_effects(wm, task, obs, rec.action);
        if (!apply_effects(shadow, rec.action, predicted)) {
            diverged = true;
            break;
        }
        t.steps.push_back(Step{obs, std::move(rec), predicted});
        obs = observe(shadow);
        if (verb == Verb::done_v) { break; }
    }
    t.final_obs = obs;
    t.terminated_within_budget = !diverged;
    t.reward = diverged ? 0 : evaluate(shadow, task.evaluator);
    return t;
}

VanillaDynaResult train_vanilla_dyna(CogParams params, const std::vector<TaskSpec>& tasks,
                                     const TrainConfig& config, RunLog* log) {
    VanillaDynaResult out;
    const TaskTable table = make_task_table(tasks);
    SeparateWM wm = make_separate_wm(params.dim, params.hash_seed);
    for (int i = 0; i < config.iterations; ++i) {
        const uint64_t stage_seed = derive_seed(config.seed, "iter", static_cast<uint64_t>(i));
        const RolloutSet rolls =
            rejection_sample(params, tasks, config.bon_k, stage_seed, config.agent, config.workers);
        const DatasetBundle bundle = build_bundle(table, rolls, WmVariant::state_delta, {});
        const EpochStats wm_stats =
            train_wm(wm, bundle.wm_set, config.epochs_wm, config.lr_wm, config.batch_size);

        // Imagined best-of-k against the learned model, judged by the real
        // evaluator on the shadow state it produced.
        std::vector<Trajectory> imagined(tasks.size() * static_cast<size_t>(config.bon_k));
        parallel_for(imagined.size(), config.workers, [&](size_t idx) {
            const TaskSpec& task = tasks[idx / static_cast<size_t>(config.bon_k)];
            const uint64_t run = idx % static_cast<size_t>(config.bon_k);
            imagined[idx] = simulate_with_wm(params, wm, task,
                                             derive_seed(stage_seed, "sim/" + task.id, run), config.agent);
        });
        std::vector<PolicyExample> policy_set = bundle.policy_set;
        int sim_wins = 0;
        int divergent = 0;
        for (size_t ti = 0; ti < tasks.size(); ++ti) {
            bool taken = false;
            for (int r = 0; r < config.bon_k; ++r) {
                const Trajectory& t =
                    imagined[ti * static_cast<size_t>(config.bon_k) + static_cast<size_t>(r)];
                if (!t.terminated_within_budget) { ++divergent; }
                if (taken || t.reward != 1) { continue; }
                taken = true;
                ++sim_wins;
                auto task = table.at(t.task_id);
                for (size_t s = 0; s < t.steps.size(); ++s) {
                    policy_set.push_back(PolicyExample{task, t.steps[s].obs, t.steps[s].record.action,
                                                       1.0, t.seed, static_cast<int>(s)});
                }
            }
        }
        out.simulated_successes += sim_wins;
        out.divergent += divergent;

        const uint64_t v0 = params.version;
        const EpochStats pol = train_policy(params, policy_set, config.epochs_policy,
                                            config.lr_policy, config.batch_size);
        if (log) {
            log_stage(log, "vanilla_dyna", i, rolls, bundle, v0, v0, params.version, wm_stats, pol);
            log->back().values["simulated_successes"] = sim_wins;
            log->back().values["divergent"] = divergent;
        }
    }
    out.params = std::move(params);
    out.wm = std::move(wm);
    return out;
}

TaskSpec make_hinted(const TaskSpec& task) {
    TaskSpec hinted = task;
    hinted.instruction.push_back(kHintMarker);
    for (const GoalAtom& atom : task.evaluator) {
        for (const std::string& tok : render_goal_atom(atom)) { hinted.instruction.push_back(tok); }
    }
    return hinted;
}

std::pair<CogParams, std::vector<IterMetrics>> iterate_star(
    CogParams params, const std::vector<TaskSpec>& train_tasks,
    const std::vector<TaskSpec>& test_tasks, bool with_hint, int iterations,
    const TrainConfig& config, RunLog* log) {
    const TaskTable table = make_task_table(train_tasks);
    const WmSampleOptions options{config.critique_wait_only};
    std::vector<IterMetrics> metrics;
    for (int iter = 0; iter < iterations; ++iter) {
        const uint64_t stage_seed = derive_seed(config.seed, "star", static_cast<uint64_t>(iter));
        const RolloutSet rolls = rejection_sample(params, train_tasks, config.bon_k, stage_seed,
                                                  config.agent, config.workers);
        std::set<std::string> solved;
        for (const Trajectory& t : rolls.successes) { solved.insert(t.task_id); }

        RolloutSet combined = rolls;
        int hinted_wins = 0;
        if (with_hint) {
            std::vector<TaskSpec> failed;
            for (const TaskSpec& t : train_tasks) {
                if (!solved.count(t.id)) { failed.push_back(make_hinted(t)); }
            }
            if (!failed.empty()) {
                const RolloutSet hinted = rejection_sample(
                    params, failed, config.bon_k, derive_seed(stage_seed, "hint"), config.agent,
                    config.workers);
                hinted_wins = static_cast<int>(hinted.successes.size());
                // Hint content must not leak into training data: the stripped
                // records resolve against the original task table.
                for (const Trajectory& t : hinted.successes) {
                    combined.successes.push_back(strip_hints(t));
                }
                for (const Trajectory& t : hinted.all) { combined.all.push_back(strip_hints(t)); }
            }
        }
        const DatasetBundle bundle = build_bundle(table, combined, config.variant, options);
        const uint64_t v0 = params.version;
        const EpochStats wm =
            train_wm(params, bundle.wm_set, config.epochs_wm, config.lr_wm, config.batch_size);
        const uint64_t v1 = params.version;
        const EpochStats pol = train_policy(params, bundle.policy_set, config.epochs_policy,
                                            config.lr_policy, config.batch_size);

        IterMetrics m;
        m.iteration = iter;
        m.train_successes = static_cast<int>(solved.size());
        m.hinted_successes = hinted_wins;
        if (!test_tasks.empty()) {
            AgentConfig greedy = config.agent;
            greedy.greedy = true;
            std::vector<int> wins(test_tasks.size(), 0);
            parallel_for(test_tasks.size(), config.workers, [&](size_t idx) {
                const Trajectory t = rollout(params, test_tasks[idx],
                                             derive_seed(stage_seed, "test/" + test_tasks[idx].id), greedy);
                wins[idx] = t.reward;
            });
            int total = 0;
            for (int w : wins) { total += w; }
            m.test_success = static_cast<double>(total) / static_cast<double>(test_tasks.size());
        }
        metrics.push_back(m);
        log_stage(log, with_hint ? "star_hint" : "star", iter, combined, bundle, v0, v1,
                  params.version, wm, pol);
        if (log) {
            log->back().values["train_successes"] = m.train_successes;
            log->back().values["hinted_successes"] = m.hinted_successes;
            log->back().values["test_success"] = m.test_success;
        }
    }
    return {std::move(params), std::move(metrics)};
}

ScaleWmResult scale_wm(const CogParams& params, const std::vector<TaskSpec>& train_tasks,
                       const std::vector<TaskSpec>& test_tasks, int extra_per_domain,
                       const TrainConfig& config, RunLog* log) {
    if (extra_per_domain <= 0) { throw std::invalid_argument("scale_wm: extra_per_domain must be positive"); }
    TaskTable table = make_task_table(train_tasks);
    const uint64_t stage_seed = derive_seed(config.seed, "scale");

    // Base rollout data from the real training tasks.
    const RolloutSet base_rolls =
        rejection_sample(params, train_tasks, config.bon_k, stage_seed, config.agent, config.workers);
    const DatasetBundle base_bundle = build_bundle(table, base_rolls, config.variant,
                                                   WmSampleOptions{config.critique_wait_only});

    // Synthetic batches: fresh generator draws whose ids are prefixed so they
    // can never collide with real training tasks.
    auto synth_batch = [&](int batch_index) {
        std::vector<TaskSpec> synth;
        const std::string prefix = "synth" + std::to_string(batch_index) + "/";
        for (Domain d : {Domain::files, Domain::dirs, Domain::nav}) {
            const uint64_t gen_seed = derive_seed(
                stage_seed, prefix + std::string(kDomainNames[static_cast<size_t>(d)]));
            for (TaskSpec& t : generate_tasks(d, extra_per_domain, gen_seed, Split::train)) {
                t.id = prefix + t.id;
                synth.push_back(std::move(t));
            }
        }
        return synth;
    };

    // World-model-only data: one scripted-expert episode per synthetic task,
    // goal-directed like the held-out probe; the policy set stays fixed so
    // the branches differ only in transition training data.
    AgentConfig synth_agent = config.agent;
    synth_agent.mode = ThinkMode::verbose_expert;
    auto synth_wm_samples = [&](const std::vector<TaskSpec>& synth, int* count) {
        TaskTable synth_table = make_task_table(synth);
        const RolloutSet rolls =
            rejection_sample(params, synth, 1, derive_seed(stage_seed, "synthroll"), synth_agent,
                             config.workers);
        const DatasetBundle b = build_bundle(synth_table, rolls, config.variant,
                                             WmSampleOptions{config.critique_wait_only});
        if (count) { *count += static_cast<int>(rolls.all.size()); }
        return b.wm_set;
    };

    ScaleWmResult out;
    std::vector<TaskSpec> batch_one = synth_batch(0);
    std::vector<TaskSpec> batch_two = synth_batch(1);
    std::vector<WMSample> wm_one = synth_wm_samples(batch_one, &out.synth_trajectories);
    std::vector<WMSample> wm_two = synth_wm_samples(batch_two, &out.synth_trajectories);

    auto branch = [&](int extra_batches) {
        CogParams p = params;
        std::vector<WMSample> wm_set = base_bundle.wm_set;
        if (extra_batches >= 1) { wm_set.insert(wm_set.end(), wm_one.begin(), wm_one.end()); }
        if (extra_batches >= 2) { wm_set.insert(wm_set.end(), wm_two.begin(), wm_two.end()); }
        train_wm(p, wm_set, config.epochs_wm, config.lr_wm, config.batch_size);
        train_policy(p, base_bundle.policy_set, config.epochs_policy, config.lr_policy,
                     config.batch_size);
        return p;
    };

    CogParams p_base = branch(0);
    CogParams p_one = branch(1);
    CogParams p_two = branch(2);

    const uint64_t eval_seed = derive_seed(stage_seed, "eval");
    out.acc_base = heldout_effect_accuracy(p_base, test_tasks, eval_seed, config.workers);
    out.acc_one = heldout_effect_accuracy(p_one, test_tasks, eval_seed, config.workers);
    out.acc_two = heldout_effect_accuracy(p_two, test_tasks, eval_seed, config.workers);
    const EvalReport r_base = evaluate_policy(p_base, test_tasks, config.bon_k, eval_seed,
                                              config.agent, config.workers);
    const EvalReport r_one =
        evaluate_policy(p_one, test_tasks, config.bon_k, eval_seed, config.agent, config.workers);
    const EvalReport r_two =
        evaluate_policy(p_two, test_tasks, config.bon_k, eval_seed, config.agent, config.workers);
    out.bon_base = r_base.bon;
    out.bon_one = r_one.bon;
    out.bon_two = r_two.bon;
    out.params = std::move(p_two);
    if (log) {
        LogEntry e;
        e.stage = "scale_wm";
        e.values = {{"synth_trajectories", static_cast<double>(out.synth_trajectories)},
                    {"acc_base", out.acc_base}, {"acc_one", out.acc_one}, {"acc_two", out.acc_two},
                    {"bon_base", out.bon_base}, {"bon_one", out.bon_one}, {"bon_two", out.bon_two}};
        log->push_back(std::move(e));
    }
    return out;
}

}  // namespace dynaplan
