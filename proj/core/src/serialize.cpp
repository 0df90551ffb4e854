#include "dynaplan/serialize.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dynaplan/hashing.hpp"

namespace dynaplan {

namespace {

template <typename E, size_t N>
std::string enum_name(const std::array<std::string_view, N>& names, E value) {
    return std::string(names[static_cast<size_t>(value)]);
}

template <typename E, size_t N>
E enum_value(const std::array<std::string_view, N>& names, const std::string& text,
             const char* what) {
    for (size_t i = 0; i < N; ++i) {
        if (names[i] == text) { return static_cast<E>(i); }
    }
    throw std::invalid_argument(std::string("unknown ") + what + ": " + text);
}

constexpr std::array<std::string_view, 5> kGoalKindNames = {"exists", "absent", "isdir", "content",
                                                            "cwdis"};
constexpr std::array<std::string_view, 2> kNodeKindNames = {"file", "dir"};
constexpr std::array<std::string_view, 3> kOutputClassNames = {"listing", "error", "empty"};

}  // namespace

Json to_json(const Action& a) { return Json(action_to_string(a)); }
Action action_from_json(const Json& j) { return action_from_string(j.get<std::string>()); }

Json to_json(const GoalAtom& g) {
    Json j;
    j["kind"] = enum_name(kGoalKindNames, g.kind);
    j["path"] = g.path;
    if (!g.token.empty()) { j["token"] = g.token; }
    return j;
}

GoalAtom goal_atom_from_json(const Json& j) {
    GoalAtom g;
    g.kind = enum_value<GoalKind>(kGoalKindNames, j.at("kind").get<std::string>(), "goal kind");
    g.path = j.at("path").get<std::string>();
    g.token = j.value("token", "");
    return g;
}

Json to_json(const InitEntry& e) {
    Json j;
    j["path"] = e.path;
    j["kind"] = enum_name(kNodeKindNames, e.kind);
    if (!e.content.empty()) { j["content"] = e.content; }
    return j;
}

InitEntry init_entry_from_json(const Json& j) {
    InitEntry e;
    e.path = j.at("path").get<std::string>();
    e.kind = enum_value<NodeKind>(kNodeKindNames, j.at("kind").get<std::string>(), "node kind");
    e.content = j.value("content", "");
    return e;
}

Json to_json(const TaskSpec& t) {
    Json j;
    j["id"] = t.id;
    j["domain"] = enum_name(kDomainNames, t.domain);
    j["split"] = enum_name(kSplitNames, t.split);
    j["instruction"] = t.instruction;
    j["init"] = Json::array();
    for (const InitEntry& e : t.init) { j["init"].push_back(to_json(e)); }
    j["evaluator"] = Json::array();
    for (const GoalAtom& g : t.evaluator) { j["evaluator"].push_back(to_json(g)); }
    j["opaque"] = t.opaque;
    return j;
}

TaskSpec task_from_json(const Json& j) {
    TaskSpec t;
    t.id = j.at("id").get<std::string>();
    t.domain = enum_value<Domain>(kDomainNames, j.at("domain").get<std::string>(), "domain");
    t.split = enum_value<Split>(kSplitNames, j.at("split").get<std::string>(), "split");
    t.instruction = j.at("instruction").get<std::vector<std::string>>();
    for (const Json& e : j.at("init")) { t.init.push_back(init_entry_from_json(e)); }
    for (const Json& g : j.at("evaluator")) { t.evaluator.push_back(goal_atom_from_json(g)); }
    t.opaque = j.at("opaque").get<bool>();
    return t;
}

Json to_json(const Output& o) {
    Json j;
    j["cls"] = enum_name(kOutputClassNames, o.cls);
    j["payload"] = o.payload;
    return j;
}

Output output_from_json(const Json& j) {
    Output o;
    o.cls = enum_value<OutputClass>(kOutputClassNames, j.at("cls").get<std::string>(), "output class");
    o.payload = j.at("payload").get<std::vector<std::string>>();
    return o;
}

Json to_json(const Observation& o) {
    Json j;
    j["cwd"] = o.cwd;
    j["listing"] = Json::array();
    for (const ObsEntry& e : o.listing) {
        j["listing"].push_back(Json{{"name", e.name}, {"kind", enum_name(kNodeKindNames, e.kind)}});
    }
    j["last_output"] = to_json(o.last_output);
    j["step"] = o.step;
    return j;
}

Observation observation_from_json(const Json& j) {
    Observation o;
    o.cwd = j.at("cwd").get<std::string>();
    for (const Json& e : j.at("listing")) {
        o.listing.push_back(ObsEntry{
            e.at("name").get<std::string>(),
            enum_value<NodeKind>(kNodeKindNames, e.at("kind").get<std::string>(), "node kind")});
    }
    o.last_output = output_from_json(j.at("last_output"));
    o.step = j.at("step").get<int>();
    return o;
}

Json to_json(const Critique& c) {
    Json j;
    j["wait"] = c.wait;
    j["missing"] = effect_set_to_string(c.missing);
    j["spurious"] = effect_set_to_string(c.spurious);
    j["target_segment"] = c.target_segment;
    j["confidence"] = c.confidence;
    return j;
}

Critique critique_from_json(const Json& j) {
    Critique c;
    c.wait = j.at("wait").get<bool>();
    c.missing = effect_set_from_string(j.at("missing").get<std::string>());
    c.spurious = effect_set_from_string(j.at("spurious").get<std::string>());
    c.target_segment = j.at("target_segment").get<int>();
    c.confidence = j.at("confidence").get<int>();
    return c;
}

Json to_json(const TraceSegment& s) {
    Json j;
    j["id"] = s.id;
    j["tag"] = enum_name(kSegmentTagNames, s.tag);
    if (s.action_ref) { j["action_ref"] = *s.action_ref; }
    if (!s.tokens.empty()) { j["tokens"] = s.tokens; }
    if (s.tag == SegmentTag::simulation) { j["sim"] = effect_set_to_string(s.sim); }
    if (s.critique) { j["critique"] = to_json(*s.critique); }
    j["cost"] = s.cost;
    return j;
}

TraceSegment segment_from_json(const Json& j) {
    TraceSegment s;
    s.id = j.at("id").get<int>();
    s.tag = enum_value<SegmentTag>(kSegmentTagNames, j.at("tag").get<std::string>(), "segment tag");
    if (j.contains("action_ref")) { s.action_ref = j.at("action_ref").get<int>(); }
    if (j.contains("tokens")) { s.tokens = j.at("tokens").get<std::vector<std::string>>(); }
    if (j.contains("sim")) { s.sim = effect_set_from_string(j.at("sim").get<std::string>()); }
    if (j.contains("critique")) { s.critique = critique_from_json(j.at("critique")); }
    s.cost = j.at("cost").get<int>();
    return s;
}

Json to_json(const ActionRecord& r) {
    Json j;
    j["trace"] = Json::array();
    for (const TraceSegment& s : r.trace) { j["trace"].push_back(to_json(s)); }
    j["action"] = to_json(r.action);
    if (r.mask) { j["mask"] = *r.mask; }
    return j;
}

ActionRecord record_from_json(const Json& j) {
    ActionRecord r;
    for (const Json& s : j.at("trace")) { r.trace.push_back(segment_from_json(s)); }
    r.action = action_from_json(j.at("action"));
    if (j.contains("mask")) { r.mask = j.at("mask").get<std::vector<bool>>(); }
    return r;
}

Json to_json(const Trajectory& t) {
    Json j;
    j["task_id"] = t.task_id;
    j["seed"] = t.seed;
    j["steps"] = Json::array();
    for (const Step& s : t.steps) {
        Json js;
        js["obs"] = to_json(s.obs);
        js["record"] = to_json(s.record);
        js["effects"] = effect_set_to_string(s.effects);
        j["steps"].push_back(std::move(js));
    }
    j["final_obs"] = to_json(t.final_obs);
    j["reward"] = t.reward;
    j["terminated"] = t.terminated_within_budget;
    return j;
}

Trajectory trajectory_from_json(const Json& j) {
    Trajectory t;
    t.task_id = j.at("task_id").get<std::string>();
    t.seed = j.at("seed").get<uint64_t>();
    for (const Json& js : j.at("steps")) {
        Step s;
        s.obs = observation_from_json(js.at("obs"));
        s.record = record_from_json(js.at("record"));
        s.effects = effect_set_from_string(js.at("effects").get<std::string>());
        t.steps.push_back(std::move(s));
    }
    t.final_obs = observation_from_json(j.at("final_obs"));
    t.reward = j.at("reward").get<int>();
    t.terminated_within_budget = j.at("terminated").get<bool>();
    return t;
}

Json to_json(const EvalReport& r) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["tasks"] = r.tasks;
    j["runs"] = r.runs;
    j["avg"] = r.avg;
    j["avg_std"] = r.avg_std;
    j["bon"] = r.bon;
    j["by_split"] = Json::object();
    for (const auto& [name, s] : r.by_split) {
        j["by_split"][name] = Json{{"tasks", s.tasks}, {"avg", s.avg}, {"bon", s.bon}};
    }
    j["per_task"] = Json::array();
    for (const TaskEval& te : r.per_task) {
        j["per_task"].push_back(Json{{"task_id", te.task_id},
                                     {"successes", te.successes},
                                     {"runs", te.runs},
                                     {"wm_accuracy", te.wm_accuracy},
                                     {"wm_checked", te.wm_checked}});
    }
    return j;
}

Json to_json(const WmAccuracy& a) {
    return Json{{"schema_version", kSchemaVersion},
                {"steps", a.steps},
                {"correct", a.correct},
                {"no_simulation", a.no_simulation},
                {"accuracy", a.accuracy()}};
}

Json to_json(const LengthStats& s) {
    return Json{{"n", s.n}, {"mean", s.mean}, {"p10", s.p10}, {"p90", s.p90}};
}

Json to_json(const LogEntry& e) {
    Json j;
    j["stage"] = e.stage;
    j["values"] = Json::object();
    for (const auto& [k, v] : e.values) { j["values"][k] = v; }
    j["text"] = Json::object();
    for (const auto& [k, v] : e.text) { j["text"][k] = v; }
    return j;
}

Json to_json(const IterMetrics& m) {
    return Json{{"iteration", m.iteration},
                {"train_successes", m.train_successes},
                {"hinted_successes", m.hinted_successes},
                {"test_success", m.test_success}};
}

Json to_json(const ScaleWmResult& r) {
    return Json{{"schema_version", kSchemaVersion},
                {"synth_trajectories", r.synth_trajectories},
                {"acc_base", r.acc_base},
                {"acc_one", r.acc_one},
                {"acc_two", r.acc_two},
                {"bon_base", r.bon_base},
                {"bon_one", r.bon_one},
                {"bon_two", r.bon_two}};
}

// --- files -------------------------------------------------------------------

void atomic_write(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) { std::filesystem::create_directories(target.parent_path()); }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) { throw std::runtime_error("cannot open for writing: " + tmp); }
        out << content;
        if (!out.flush()) { throw std::runtime_error("write failed: " + tmp); }
    }
    std::filesystem::rename(tmp, target);
}

void write_jsonl(const std::string& path, const std::vector<Json>& rows) {
    std::string blob;
    for (const Json& row : rows) {
        blob += row.dump();
        blob += '\n';
    }
    atomic_write(path, blob);
}

std::vector<Json> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw std::runtime_error("cannot open: " + path); }
    std::vector<Json> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) { continue; }
        rows.push_back(Json::parse(line));
    }
    return rows;
}

void save_tasks(const std::string& path, const std::vector<TaskSpec>& tasks) {
    std::vector<Json> rows;
    rows.reserve(tasks.size());
    for (const TaskSpec& t : tasks) { rows.push_back(to_json(t)); }
    write_jsonl(path, rows);
}

std::vector<TaskSpec> load_tasks(const std::string& path) {
    std::vector<TaskSpec> out;
    for (const Json& row : read_jsonl(path)) { out.push_back(task_from_json(row)); }
    return out;
}

void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories) {
    std::vector<Json> rows;
    rows.reserve(trajectories.size());
    for (const Trajectory& t : trajectories) { rows.push_back(to_json(t)); }
    write_jsonl(path, rows);
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
    std::vector<Trajectory> out;
    for (const Json& row : read_jsonl(path)) { out.push_back(trajectory_from_json(row)); }
    return out;
}

void save_log(const std::string& path, const RunLog& log) {
    std::vector<Json> rows;
    rows.reserve(log.size());
    for (const LogEntry& e : log) { rows.push_back(to_json(e)); }
    write_jsonl(path, rows);
}

namespace {

// Sparse pays off below half density (two numbers per surviving entry).
Json block_to_json(const WeightBlock& b) {
    size_t nonzero = 0;
    for (double v : b.w) {
        if (v != 0.0) { ++nonzero; }
    }
    Json j;
    if (nonzero * 2 < b.w.size()) {
        Json idx = Json::array();
        Json val = Json::array();
        for (size_t i = 0; i < b.w.size(); ++i) {
            if (b.w[i] != 0.0) {
                idx.push_back(i);
                val.push_back(b.w[i]);
            }
        }
        j["sparse"] = true;
        j["idx"] = std::move(idx);
        j["val"] = std::move(val);
    } else {
        j["sparse"] = false;
        j["val"] = b.w;
    }
    return j;
}

WeightBlock block_from_json(const Json& j, uint32_t dim) {
    WeightBlock b;
    b.w.assign(dim, 0.0);
    if (j.at("sparse").get<bool>()) {
        const auto idx = j.at("idx").get<std::vector<uint32_t>>();
        const auto val = j.at("val").get<std::vector<double>>();
        if (idx.size() != val.size()) { throw std::runtime_error("checkpoint index/value mismatch"); }
        for (size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] >= dim) { throw std::runtime_error("checkpoint index out of range"); }
            b.w[idx[i]] = val[i];
        }
    } else {
        const auto val = j.at("val").get<std::vector<double>>();
        if (val.size() != dim) { throw std::runtime_error("checkpoint block has wrong width"); }
        b.w = val;
    }
    return b;
}

}  // namespace

void save_checkpoint(const std::string& path, const CogParams& params) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "checkpoint";
    j["dim"] = params.dim;
    j["hash_seed"] = params.hash_seed;
    j["version"] = params.version;
    j["weights_hash"] = to_hex(weights_hash(params));
    j["policy"] = block_to_json(params.policy_w);
    j["trans"] = Json::array();
    for (const WeightBlock& b : params.trans_w) { j["trans"].push_back(block_to_json(b)); }
    j["critic"] = Json::array();
    for (const WeightBlock& b : params.critic_w) { j["critic"].push_back(block_to_json(b)); }
    atomic_write(path, j.dump() + "\n");
}

CogParams load_checkpoint(const std::string& path) {
    const Json j = load_json(path);
    if (j.value("kind", "") != "checkpoint") { throw std::runtime_error("not a checkpoint: " + path); }
    if (j.value("schema_version", -1) != kSchemaVersion) {
        throw std::runtime_error("unsupported checkpoint schema in " + path);
    }
    CogParams p = make_params(j.at("dim").get<uint32_t>(), j.at("hash_seed").get<uint64_t>());
    p.version = j.at("version").get<uint64_t>();
    p.policy_w = block_from_json(j.at("policy"), p.dim);
    const Json& trans = j.at("trans");
    if (trans.size() != static_cast<size_t>(kNumEffectAtoms)) {
        throw std::runtime_error("checkpoint has wrong transition head count");
    }
    for (size_t i = 0; i < trans.size(); ++i) { p.trans_w[i] = block_from_json(trans[i], p.dim); }
    const Json& critic = j.at("critic");
    if (critic.size() != 2) { throw std::runtime_error("checkpoint has wrong critic head count"); }
    for (size_t i = 0; i < critic.size(); ++i) { p.critic_w[i] = block_from_json(critic[i], p.dim); }
    if (to_hex(weights_hash(p)) != j.at("weights_hash").get<std::string>()) {
        throw std::runtime_error("checkpoint weights hash mismatch: " + path);
    }
    return p;
}

void save_report(const std::string& path, const Json& report) { atomic_write(path, report.dump(2) + "\n"); }

Json load_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw std::runtime_error("cannot open: " + path); }
    return Json::parse(in);
}

uint64_t file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw std::runtime_error("cannot open: " + path); }
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string blob = ss.str();
    return fnv1a64(blob);
}

void append_manifest(const std::string& dir, Json entry) {
    std::filesystem::create_directories(dir);
    entry["unix_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
    std::ofstream out(std::filesystem::path(dir) / "manifest.jsonl", std::ios::app);
    if (!out) { throw std::runtime_error("cannot append manifest in " + dir); }
    out << entry.dump() << '\n';
}

}  // namespace dynaplan
