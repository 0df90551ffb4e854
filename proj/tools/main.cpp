// dynaplan command-line runner: every pipeline stage as a subcommand, driven
// by one INI config, writing versioned artifacts plus an append-only manifest.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynaplan/dynatrain.hpp"
#include "dynaplan/evalharness.hpp"
#include "dynaplan/hashing.hpp"
#include "dynaplan/runconfig.hpp"
#include "dynaplan/serialize.hpp"

using namespace dynaplan;

namespace {

std::string g_command = "?";

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<int64_t> seed;
    std::optional<int> workers;
    bool greedy = false;
};

void add_common(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--config", o.config_path, "INI config file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out_dir, "output directory (default: $DYNAPLAN_OUT or ./out)");
    sub->add_option("--seed", o.seed, "overrides [run] seed from the config");
    sub->add_option("--workers", o.workers, "overrides [run] workers from the config");
    sub->add_flag("--greedy", o.greedy, "force greedy action selection");
}

// Everything a subcommand needs: resolved config, seed, and manifest
// bookkeeping. Artifacts register themselves; finish() writes one manifest
// record covering the whole run.
struct RunContext {
    RunConfig cfg;
    std::string out_dir;
    uint64_t seed = 1;
    int workers = 1;
    bool greedy = false;
    Json inputs = Json::object();
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    std::string out_path(const std::string& name) const {
        return (std::filesystem::path(out_dir) / name).string();
    }

    void track_input(const std::string& path) { inputs[path] = to_hex(file_content_hash(path)); }

    void track_output(const std::string& path) { outputs.push_back(path); }

    void finish() {
        Json m;
        m["command"] = g_command;
        m["config_hash"] = to_hex(cfg.digest());
        m["seed"] = seed;
        m["workers"] = workers;
        m["inputs"] = inputs;
        m["outputs"] = outputs;
        m["wall_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
        append_manifest(out_dir, std::move(m));
    }
};

RunContext make_context(const CommonOpts& o) {
    RunContext ctx;
    if (!o.config_path.empty()) {
        ctx.cfg = RunConfig::from_file(o.config_path);
        ctx.track_input(o.config_path);
    }
    if (!o.out_dir.empty()) {
        ctx.out_dir = o.out_dir;
    } else if (const char* env = std::getenv("DYNAPLAN_OUT"); env != nullptr && *env != '\0') {
        ctx.out_dir = env;
    } else {
        ctx.out_dir = "out";
    }
    ctx.seed = o.seed ? static_cast<uint64_t>(*o.seed)
                      : static_cast<uint64_t>(ctx.cfg.get_int("run.seed", 1));
    ctx.workers = o.workers ? *o.workers : static_cast<int>(ctx.cfg.get_int("run.workers", 1));
    if (ctx.workers < 1) { throw std::runtime_error("workers must be >= 1"); }
    ctx.greedy = o.greedy || ctx.cfg.get_bool("run.greedy", false);
    return ctx;
}

template <typename E, size_t N>
E parse_enum(const std::array<std::string_view, N>& names, const std::string& text,
             const char* what) {
    for (size_t i = 0; i < N; ++i) {
        if (names[i] == text) { return static_cast<E>(i); }
    }
    throw std::runtime_error(std::string("unknown ") + what + ": " + text);
}

AgentConfig agent_from(const RunContext& ctx) {
    AgentConfig a;
    a.top_k = static_cast<int>(ctx.cfg.get_int("agent.top_k", 3));
    a.beta = ctx.cfg.get_double("agent.beta", 1.0);
    a.mode = parse_enum<ThinkMode>(kThinkModeNames, ctx.cfg.get("agent.mode", "dyna_think"),
                                   "agent mode");
    a.budget = static_cast<int>(ctx.cfg.get_int("agent.budget", kStepBudget));
    a.greedy = ctx.greedy || ctx.cfg.get_bool("agent.greedy", false);
    a.oracle_wm = ctx.cfg.get_bool("agent.oracle_wm", false);
    return a;
}

TrainConfig train_from(const RunContext& ctx) {
    TrainConfig t;
    t.bon_k = static_cast<int>(ctx.cfg.get_int("train.bon_k", 3));
    t.iterations = static_cast<int>(ctx.cfg.get_int("train.iterations", 1));
    t.epochs_wm = static_cast<int>(ctx.cfg.get_int("train.epochs_wm", 2));
    t.epochs_policy = static_cast<int>(ctx.cfg.get_int("train.epochs_policy", 3));
    t.lr_wm = ctx.cfg.get_double("train.lr_wm", 0.05);
    t.lr_policy = ctx.cfg.get_double("train.lr_policy", 0.02);
    t.batch_size = static_cast<int>(ctx.cfg.get_int("train.batch_size", 8));
    t.variant = parse_enum<WmVariant>(kWmVariantNames, ctx.cfg.get("train.variant", "critique"),
                                      "world-model variant");
    t.critique_wait_only = ctx.cfg.get_bool("train.critique_wait_only", false);
    t.reconstruct_min_cost =
        static_cast<int>(ctx.cfg.get_int("train.reconstruct_min_cost", kReconstructMinCost));
    t.agent = agent_from(ctx);
    t.workers = ctx.workers;
    t.seed = ctx.seed;
    return t;
}

uint32_t model_dim(const RunContext& ctx) {
    return static_cast<uint32_t>(ctx.cfg.get_int("model.dim", kDefaultDim));
}

uint64_t model_hash_seed(const RunContext& ctx) {
    return static_cast<uint64_t>(ctx.cfg.get_int("model.hash_seed", kDefaultHashSeed));
}

std::vector<TaskSpec> load_tasks_tracked(RunContext& ctx, const std::string& path) {
    ctx.track_input(path);
    return load_tasks(path);
}

std::vector<Trajectory> load_trajs_tracked(RunContext& ctx, const std::string& path) {
    ctx.track_input(path);
    return load_trajectories(path);
}

// Loads a starting checkpoint when given, otherwise fresh weights.
CogParams initial_params(RunContext& ctx, const std::string& ckpt_path) {
    if (!ckpt_path.empty()) {
        ctx.track_input(ckpt_path);
        return load_checkpoint(ckpt_path);
    }
    return make_params(model_dim(ctx), model_hash_seed(ctx));
}

// --- subcommands -------------------------------------------------------------

void cmd_gen_tasks(RunContext ctx) {
    const std::string split_text = ctx.cfg.get("gen.split", "train");
    const Split split = parse_enum<Split>(kSplitNames, split_text, "split");
    const int count = static_cast<int>(ctx.cfg.get_int("gen.count", 12));
    GenOptions options;
    options.opaque_fraction = ctx.cfg.get_double("gen.opaque_fraction", 0.25);

    std::string domains_text = ctx.cfg.get("gen.domains", "files,dirs,nav");
    std::vector<Domain> domains;
    std::stringstream ss(domains_text);
    for (std::string part; std::getline(ss, part, ',');) {
        if (!part.empty()) { domains.push_back(parse_enum<Domain>(kDomainNames, part, "domain")); }
    }
    if (domains.empty()) { throw std::runtime_error("gen.domains is empty"); }

    std::vector<TaskSpec> tasks;
    for (Domain d : domains) {
        const uint64_t gen_seed =
            derive_seed(ctx.seed, "gen/" + std::string(kDomainNames[static_cast<size_t>(d)]) + "/" +
                                      split_text);
        for (TaskSpec& t : generate_tasks(d, count, gen_seed, split, options)) {
            tasks.push_back(std::move(t));
        }
    }
    const std::string out = ctx.out_path("tasks.jsonl");
    save_tasks(out, tasks);
    ctx.track_output(out);
    ctx.finish();
    std::cout << "wrote " << tasks.size() << " tasks to " << out << "\n";
}

void cmd_expert_rollout(RunContext ctx, const std::string& tasks_path) {
    const std::vector<TaskSpec> tasks =
        load_tasks_tracked(ctx, tasks_path.empty() ? ctx.out_path("tasks.jsonl") : tasks_path);
    AgentConfig expert = agent_from(ctx);
    expert.mode = ThinkMode::verbose_expert;
    const CogParams params = make_params(model_dim(ctx), model_hash_seed(ctx));
    const RolloutSet rolls = rejection_sample(params, tasks, 1, ctx.seed, expert, ctx.workers);
    int failures = 0;
    for (const Trajectory& t : rolls.all) {
        if (t.reward != 1) { ++failures; }
    }
    const std::string out = ctx.out_path("expert.jsonl");
    save_trajectories(out, rolls.all);
    ctx.track_output(out);
    ctx.inputs["expert_failures"] = failures;
    ctx.finish();
    std::cout << "wrote " << rolls.all.size() << " expert episodes to " << out << " (" << failures
              << " failures)\n";
}

void cmd_reconstruct(RunContext ctx, const std::string& trajs_path) {
    std::vector<Trajectory> trajs =
        load_trajs_tracked(ctx, trajs_path.empty() ? ctx.out_path("expert.jsonl") : trajs_path);
    const int min_cost =
        static_cast<int>(ctx.cfg.get_int("train.reconstruct_min_cost", kReconstructMinCost));
    for (Trajectory& t : trajs) {
        for (Step& s : t.steps) { s.record = reconstruct_dit(s.record, min_cost); }
    }
    const std::string out = ctx.out_path("reconstructed.jsonl");
    save_trajectories(out, trajs);
    ctx.track_output(out);
    ctx.finish();
    std::cout << "wrote " << trajs.size() << " reconstructed episodes to " << out << "\n";
}

void write_training_outputs(RunContext& ctx, const CogParams& params, const RunLog& log) {
    const std::string ckpt = ctx.out_path("checkpoint.json");
    const std::string log_path = ctx.out_path("log.jsonl");
    save_checkpoint(ckpt, params);
    save_log(log_path, log);
    ctx.track_output(ckpt);
    ctx.track_output(log_path);
}

void cmd_train_dit(RunContext ctx, const std::string& trajs_path, const std::string& tasks_path) {
    const std::vector<Trajectory> trajs =
        load_trajs_tracked(ctx, trajs_path.empty() ? ctx.out_path("expert.jsonl") : trajs_path);
    const std::vector<TaskSpec> tasks =
        load_tasks_tracked(ctx, tasks_path.empty() ? ctx.out_path("tasks.jsonl") : tasks_path);
    RunLog log;
    const CogParams params = train_dit(trajs, make_task_table(tasks), model_dim(ctx),
                                       model_hash_seed(ctx), train_from(ctx), &log);
    write_training_outputs(ctx, params, log);
    ctx.finish();
    std::cout << "trained on " << trajs.size() << " expert episodes; checkpoint at "
              << ctx.out_path("checkpoint.json") << "\n";
}

enum class OnPolicyKind { rft, ddt, vanilla_dyna };

void cmd_train_onpolicy(RunContext ctx, OnPolicyKind kind, const std::string& ckpt_path,
                        const std::string& tasks_path) {
    const std::vector<TaskSpec> tasks =
        load_tasks_tracked(ctx, tasks_path.empty() ? ctx.out_path("tasks.jsonl") : tasks_path);
    CogParams params = initial_params(ctx, ckpt_path);
    const TrainConfig config = train_from(ctx);
    RunLog log;
    std::string note;
    switch (kind) {
        case OnPolicyKind::rft:
            params = train_rft(std::move(params), tasks, config, &log);
            break;
        case OnPolicyKind::ddt:
            params = train_ddt(std::move(params), tasks, config.variant, config, &log);
            break;
        case OnPolicyKind::vanilla_dyna: {
            VanillaDynaResult r = train_vanilla_dyna(std::move(params), tasks, config, &log);
            params = std::move(r.params);
            note = " (simulated successes: " + std::to_string(r.simulated_successes) +
                   ", divergent: " + std::to_string(r.divergent) + ")";
            break;
        }
    }
    write_training_outputs(ctx, params, log);
    ctx.finish();
    std::cout << "checkpoint at " << ctx.out_path("checkpoint.json") << note << "\n";
}

void cmd_iterate(RunContext ctx, const std::string& ckpt_path, const std::string& train_path,
                 const std::string& test_path, bool hint_flag) {
    const std::vector<TaskSpec> train_tasks =
        load_tasks_tracked(ctx, train_path.empty() ? ctx.out_path("tasks.jsonl") : train_path);
    std::vector<TaskSpec> test_tasks;
    if (!test_path.empty()) { test_tasks = load_tasks_tracked(ctx, test_path); }
    CogParams params = initial_params(ctx, ckpt_path);
    const TrainConfig config = train_from(ctx);
    const bool with_hint = hint_flag || ctx.cfg.get_bool("star.hint", false);
    const int iterations = static_cast<int>(ctx.cfg.get_int("star.iterations", 5));
    RunLog log;
    auto [trained, metrics] =
        iterate_star(std::move(params), train_tasks, test_tasks, with_hint, iterations, config, &log);
    write_training_outputs(ctx, trained, log);
    std::vector<Json> rows;
    for (const IterMetrics& m : metrics) { rows.push_back(to_json(m)); }
    const std::string metrics_path = ctx.out_path("metrics.jsonl");
    write_jsonl(metrics_path, rows);
    ctx.track_output(metrics_path);
    ctx.finish();
    for (const IterMetrics& m : metrics) {
        std::cout << "iteration " << m.iteration << ": train_successes=" << m.train_successes
                  << " hinted=" << m.hinted_successes << " test=" << m.test_success << "\n";
    }
}

void cmd_scale_wm(RunContext ctx, const std::string& ckpt_path, const std::string& train_path,
                  const std::string& test_path) {
    const std::vector<TaskSpec> train_tasks =
        load_tasks_tracked(ctx, train_path.empty() ? ctx.out_path("tasks.jsonl") : train_path);
    const std::vector<TaskSpec> test_tasks = load_tasks_tracked(ctx, test_path);
    const CogParams params = initial_params(ctx, ckpt_path);
    const int extra = static_cast<int>(ctx.cfg.get_int("scale.extra_per_domain", 12));
    RunLog log;
    const ScaleWmResult result = scale_wm(params, train_tasks, test_tasks, extra, train_from(ctx), &log);
    write_training_outputs(ctx, result.params, log);
    const std::string report_path = ctx.out_path("scale_report.json");
    save_report(report_path, to_json(result));
    ctx.track_output(report_path);
    ctx.finish();
    std::cout << "effect accuracy base/1x/2x: " << result.acc_base << "/" << result.acc_one << "/"
              << result.acc_two << "; test bon: " << result.bon_base << "/" << result.bon_one << "/"
              << result.bon_two << "\n";
}

void cmd_rollout(RunContext ctx, const std::string& ckpt_path, const std::string& tasks_path) {
    const std::vector<TaskSpec> tasks =
        load_tasks_tracked(ctx, tasks_path.empty() ? ctx.out_path("tasks.jsonl") : tasks_path);
    const CogParams params = initial_params(ctx, ckpt_path);
    const int runs = static_cast<int>(ctx.cfg.get_int("eval.runs", 1));
    std::vector<Trajectory> trajs;
    evaluate_policy(params, tasks, runs, ctx.seed, agent_from(ctx), ctx.workers, &trajs);
    const std::string out = ctx.out_path("trajectories.jsonl");
    save_trajectories(out, trajs);
    ctx.track_output(out);
    ctx.finish();
    std::cout << "wrote " << trajs.size() << " episodes to " << out << "\n";
}

void cmd_eval(RunContext ctx, const std::string& ckpt_path, const std::string& tasks_path) {
    const std::vector<TaskSpec> tasks =
        load_tasks_tracked(ctx, tasks_path.empty() ? ctx.out_path("tasks.jsonl") : tasks_path);
    const CogParams params = initial_params(ctx, ckpt_path);
    const int runs = static_cast<int>(ctx.cfg.get_int("eval.runs", 3));
    std::vector<Trajectory> trajs;
    const EvalReport report =
        evaluate_policy(params, tasks, runs, ctx.seed, agent_from(ctx), ctx.workers, &trajs);
    const std::string report_path = ctx.out_path("report.json");
    save_report(report_path, to_json(report));
    ctx.track_output(report_path);
    if (ctx.cfg.get_bool("eval.save_trajectories", false)) {
        const std::string trajs_path = ctx.out_path("trajectories.jsonl");
        save_trajectories(trajs_path, trajs);
        ctx.track_output(trajs_path);
    }
    ctx.finish();
    std::cout << "avg=" << report.avg << " bon=" << report.bon << " over " << report.tasks
              << " tasks x " << report.runs << " runs\n";
}

void cmd_wm_acc(RunContext ctx, const std::string& trajs_path) {
    const std::vector<Trajectory> trajs = load_trajs_tracked(
        ctx, trajs_path.empty() ? ctx.out_path("trajectories.jsonl") : trajs_path);
    const WmAccuracy overall = wm_accuracy(trajs);

    // Per-task world-model accuracy vs. success rate, and their correlation.
    std::map<std::string, std::vector<Trajectory>> by_task;
    for (const Trajectory& t : trajs) { by_task[t.task_id].push_back(t); }
    Json per_task = Json::array();
    std::vector<double> xs, ys;
    for (const auto& [id, group] : by_task) {
        const WmAccuracy wa = wm_accuracy(group);
        int successes = 0;
        for (const Trajectory& t : group) { successes += t.reward; }
        const double rate = static_cast<double>(successes) / static_cast<double>(group.size());
        per_task.push_back(Json{{"task_id", id},
                                {"wm_accuracy", wa.accuracy()},
                                {"wm_checked", wa.steps},
                                {"successes", successes},
                                {"runs", group.size()}});
        xs.push_back(wa.accuracy());
        ys.push_back(rate);
    }
    Json report = to_json(overall);
    const std::optional<double> r = pearson_r(xs, ys);
    report["pearson"] = r ? Json(*r) : Json(nullptr);
    report["per_task"] = std::move(per_task);
    const std::string out = ctx.out_path("wm_report.json");
    save_report(out, report);
    ctx.track_output(out);
    ctx.finish();
    std::cout << "wm accuracy " << overall.accuracy() << " over " << overall.steps << " steps ("
              << overall.no_simulation << " without simulation); pearson "
              << (r ? std::to_string(*r) : std::string("undefined")) << "\n";
}

// Renders any artifact produced above as a CSV table.
void cmd_report(RunContext ctx, const std::string& in_path) {
    ctx.track_input(in_path);
    std::string csv;
    auto cell = [](const Json& v) -> std::string {
        if (v.is_string()) { return v.get<std::string>(); }
        return v.dump();
    };
    if (in_path.size() > 6 && in_path.substr(in_path.size() - 6) == ".jsonl") {
        const std::vector<Json> rows = read_jsonl(in_path);
        if (rows.empty()) { throw std::runtime_error("no rows in " + in_path); }
        if (rows.front().contains("stage")) {  // training log
            std::vector<std::string> keys;
            for (const Json& row : rows) {
                for (const auto& [k, v] : row.at("values").items()) {
                    if (std::find(keys.begin(), keys.end(), k) == keys.end()) { keys.push_back(k); }
                }
            }
            std::sort(keys.begin(), keys.end());
            csv = "stage";
            for (const std::string& k : keys) { csv += "," + k; }
            csv += "\n";
            for (const Json& row : rows) {
                csv += cell(row.at("stage"));
                for (const std::string& k : keys) {
                    csv += ",";
                    if (row.at("values").contains(k)) { csv += cell(row.at("values").at(k)); }
                }
                csv += "\n";
            }
        } else {  // iteration metrics
            csv = "iteration,train_successes,hinted_successes,test_success\n";
            for (const Json& row : rows) {
                csv += cell(row.at("iteration")) + "," + cell(row.at("train_successes")) + "," +
                       cell(row.at("hinted_successes")) + "," + cell(row.at("test_success")) + "\n";
            }
        }
    } else {
        const Json j = load_json(in_path);
        if (j.contains("per_task")) {  // eval or world-model report
            csv = "task_id,successes,runs,wm_accuracy,wm_checked\n";
            for (const Json& row : j.at("per_task")) {
                csv += cell(row.at("task_id")) + "," + cell(row.at("successes")) + "," +
                       cell(row.at("runs")) + "," + cell(row.at("wm_accuracy")) + "," +
                       cell(row.at("wm_checked")) + "\n";
            }
        } else {  // flat report: two-column key/value
            csv = "key,value\n";
            for (const auto& [k, v] : j.items()) { csv += k + "," + cell(v) + "\n"; }
        }
    }
    const std::string out = ctx.out_path("report.csv");
    atomic_write(out, csv);
    ctx.track_output(out);
    ctx.finish();
    std::cout << csv;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynaplan: a planning agent that simulates with a learned world model"};
    app.require_subcommand(1);

    struct SubSpec {
        CommonOpts common;
        std::string tasks, trajs, ckpt, train_tasks, test_tasks, in;
        bool hint = false;
    };
    std::map<std::string, SubSpec> specs;

    auto make_sub = [&](const std::string& name, const std::string& desc) {
        CLI::App* sub = app.add_subcommand(name, desc);
        add_common(sub, specs[name].common);
        return sub;
    };

    {
        make_sub("gen-tasks", "generate a deterministic task file");
        CLI::App* s = make_sub("expert-rollout", "run the scripted expert over a task file");
        s->add_option("--tasks", specs["expert-rollout"].tasks, "task file");
        s = make_sub("reconstruct", "compress verbose traces to verification+simulation+decision");
        s->add_option("--trajs", specs["reconstruct"].trajs, "trajectory file");
        s = make_sub("train-dit", "imitation-initialize from expert episodes");
        s->add_option("--trajs", specs["train-dit"].trajs, "expert trajectory file");
        s->add_option("--tasks", specs["train-dit"].tasks, "task file");
        s = make_sub("train-rft", "rejection-sampling fine-tuning (policy only)");
        s->add_option("--ckpt", specs["train-rft"].ckpt, "starting checkpoint");
        s->add_option("--tasks", specs["train-rft"].tasks, "task file");
        s = make_sub("train-ddt", "joint world-model + policy training");
        s->add_option("--ckpt", specs["train-ddt"].ckpt, "starting checkpoint");
        s->add_option("--tasks", specs["train-ddt"].tasks, "task file");
        s = make_sub("train-dyna", "classic-Dyna baseline with a separate world model");
        s->add_option("--ckpt", specs["train-dyna"].ckpt, "starting checkpoint");
        s->add_option("--tasks", specs["train-dyna"].tasks, "task file");
        s = make_sub("iterate", "self-training loop, optionally with evaluator hints");
        s->add_option("--ckpt", specs["iterate"].ckpt, "starting checkpoint");
        s->add_option("--train-tasks", specs["iterate"].train_tasks, "training task file");
        s->add_option("--test-tasks", specs["iterate"].test_tasks, "held-out task file");
        s->add_flag("--hint", specs["iterate"].hint, "retry failures with the evaluator rendered in");
        s = make_sub("scale-wm", "compare 0x/1x/2x synthetic world-model data");
        s->add_option("--ckpt", specs["scale-wm"].ckpt, "starting checkpoint");
        s->add_option("--train-tasks", specs["scale-wm"].train_tasks, "training task file");
        s->add_option("--test-tasks", specs["scale-wm"].test_tasks, "held-out task file")->required();
        s = make_sub("rollout", "run a checkpoint over a task file, saving episodes");
        s->add_option("--ckpt", specs["rollout"].ckpt, "checkpoint");
        s->add_option("--tasks", specs["rollout"].tasks, "task file");
        s = make_sub("eval", "success metrics for a checkpoint");
        s->add_option("--ckpt", specs["eval"].ckpt, "checkpoint");
        s->add_option("--tasks", specs["eval"].tasks, "task file");
        s = make_sub("wm-acc", "world-model accuracy over saved episodes");
        s->add_option("--trajs", specs["wm-acc"].trajs, "trajectory file");
        s = make_sub("report", "render an artifact as CSV");
        s->add_option("--in", specs["report"].in, "artifact to render")
            ->required()
            ->check(CLI::ExistingFile);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) {
            std::cerr << Json{{"error", e.what()}, {"command", "parse"}}.dump() << "\n";
        }
        return app.exit(e);
    }

    const std::string name = app.get_subcommands().front()->get_name();
    g_command = name;
    const SubSpec& spec = specs[name];
    try {
        RunContext ctx = make_context(spec.common);
        if (name == "gen-tasks") {
            cmd_gen_tasks(std::move(ctx));
        } else if (name == "expert-rollout") {
            cmd_expert_rollout(std::move(ctx), spec.tasks);
        } else if (name == "reconstruct") {
            cmd_reconstruct(std::move(ctx), spec.trajs);
        } else if (name == "train-dit") {
            cmd_train_dit(std::move(ctx), spec.trajs, spec.tasks);
        } else if (name == "train-rft") {
            cmd_train_onpolicy(std::move(ctx), OnPolicyKind::rft, spec.ckpt, spec.tasks);
        } else if (name == "train-ddt") {
            cmd_train_onpolicy(std::move(ctx), OnPolicyKind::ddt, spec.ckpt, spec.tasks);
        } else if (name == "train-dyna") {
            cmd_train_onpolicy(std::move(ctx), OnPolicyKind::vanilla_dyna, spec.ckpt, spec.tasks);
        } else if (name == "iterate") {
            cmd_iterate(std::move(ctx), spec.ckpt, spec.train_tasks, spec.test_tasks, spec.hint);
        } else if (name == "scale-wm") {
            cmd_scale_wm(std::move(ctx), spec.ckpt, spec.train_tasks, spec.test_tasks);
        } else if (name == "rollout") {
            cmd_rollout(std::move(ctx), spec.ckpt, spec.tasks);
        } else if (name == "eval") {
            cmd_eval(std::move(ctx), spec.ckpt, spec.tasks);
        } else if (name == "wm-acc") {
            cmd_wm_acc(std::move(ctx), spec.trajs);
        } else if (name == "report") {
            cmd_report(std::move(ctx), spec.in);
        }
    } catch (const std::exception& e) {
        std::cerr << Json{{"error", e.what()}, {"command", name}}.dump() << "\n";
        return 1;
    }
    return 0;
}
