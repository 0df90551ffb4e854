#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "dynaplan/serialize.hpp"

using namespace dynaplan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("dynaplan_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

Trajectory sample_trajectory() {
    GenOptions options;
    options.opaque_fraction = 1.0;  // exercise the opaque flag and hints
    const auto tasks = generate_tasks(Domain::files, 2, 83, Split::train, options);
    AgentConfig expert;
    expert.mode = ThinkMode::verbose_expert;
    Trajectory t = rollout(make_params(1u << 12), make_hinted(tasks[0]), 19, expert);
    // Decorate with the bits an agent trace can carry.
    auto critique = rule_critic(t.steps[0].record, t.steps[0].effects);
    REQUIRE(critique.has_value());
    t.steps[0].record = inject_critique(t.steps[0].record, *critique);
    return t;
}

}  // namespace

TEST_CASE("actions, atoms and observations survive the round trip") {
    for (const Action& a : {Action{Verb::mkdir_v, "/a", ""}, Action{Verb::cp_v, "/a", "/b"},
                            Action{Verb::write_v, "/f", "t09"}, Action{Verb::done_v, "", ""}}) {
        CHECK(action_from_json(to_json(a)) == a);
    }
    for (const GoalAtom& g :
         {GoalAtom{GoalKind::exists, "/a", ""}, GoalAtom{GoalKind::content, "/f", "t03"},
          GoalAtom{GoalKind::cwd_is, "/d", ""}}) {
        CHECK(goal_atom_from_json(to_json(g)) == g);
    }

    Observation o;
    o.cwd = "/a";
    o.listing = {{"x", NodeKind::dir}, {"y.txt", NodeKind::file}};
    o.last_output = {OutputClass::error, {"err_missing"}};
    o.step = 7;
    CHECK(observation_from_json(to_json(o)) == o);

    Output listing{OutputClass::listing, {"a", "b"}};
    CHECK(output_from_json(to_json(listing)) == listing);
}

TEST_CASE("tasks round-trip with goals, init entries and the opaque flag") {
    GenOptions options;
    options.opaque_fraction = 0.5;
    const auto tasks = generate_tasks(Domain::dirs, 8, 89, Split::test_id, options);
    for (const TaskSpec& t : tasks) { CHECK(task_from_json(to_json(t)) == t); }
}

TEST_CASE("trajectories round-trip with traces, critiques and masks") {
    const Trajectory t = sample_trajectory();
    const Trajectory back = trajectory_from_json(to_json(t));
    CHECK(back == t);
}

TEST_CASE("jsonl files hold exactly one record per line") {
    TempDir tmp;
    GenOptions options;
    const auto tasks = generate_tasks(Domain::files, 12, 97, Split::train, options);
    const std::string path = tmp.file("tasks.jsonl");
    save_tasks(path, tasks);

    // Line count == record count, no header.
    const std::string raw = slurp(path);
    size_t lines = 0;
    for (char c : raw) { lines += c == '\n' ? 1 : 0; }
    CHECK(lines == 12);
    CHECK(raw.rfind("{", 0) == 0);

    const auto back = load_tasks(path);
    REQUIRE(back.size() == tasks.size());
    for (size_t i = 0; i < tasks.size(); ++i) { CHECK(back[i] == tasks[i]); }

    // Byte-identical rewrite.
    const std::string again = tmp.file("tasks2.jsonl");
    save_tasks(again, tasks);
    CHECK(slurp(again) == raw);
}

TEST_CASE("trajectory files round-trip") {
    TempDir tmp;
    std::vector<Trajectory> trajs = {sample_trajectory()};
    trajs.push_back(trajs[0]);
    trajs[1].seed ^= 5;
    trajs[1].reward = 0;
    trajs[1].terminated_within_budget = false;
    const std::string path = tmp.file("trajs.jsonl");
    save_trajectories(path, trajs);
    const auto back = load_trajectories(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == trajs[0]);
    CHECK(back[1] == trajs[1]);
}

TEST_CASE("malformed lines and wrong shapes are loud") {
    TempDir tmp;
    const std::string path = tmp.file("bad.jsonl");
    atomic_write(path, "{\"id\": \"x\"}\nnot json at all\n");
    CHECK_THROWS(read_jsonl(path));
    CHECK_THROWS(load_tasks(tmp.file("missing.jsonl")));

    // A syntactically valid record with the wrong shape fails at decode.
    atomic_write(path, "{\"id\": 42}\n");
    CHECK_THROWS(load_tasks(path));
}

TEST_CASE("checkpoints round-trip dense and sparse and catch tampering") {
    TempDir tmp;
    const std::string path = tmp.file("ckpt.json");

    SUBCASE("fresh params stay sparse on disk") {
        CogParams p = make_params(1u << 14);
        p.policy_w.w[7] = 1.5;  // a lonely nonzero
        p.version = 3;
        save_checkpoint(path, p);
        // Sparse encoding keeps the file far smaller than 14 dense blocks.
        CHECK(fs::file_size(path) < 64 * 1024);
        const CogParams back = load_checkpoint(path);
        CHECK(back.dim == p.dim);
        CHECK(back.hash_seed == p.hash_seed);
        CHECK(back.version == 3);
        CHECK(back.policy_w.w == p.policy_w.w);
        CHECK(weights_hash(back) == weights_hash(p));
    }
    SUBCASE("trained params round-trip densely") {
        CogParams p = make_params(1u << 10);
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (double& x : p.policy_w.w) { x = u(rng); }
        for (auto& b : p.trans_w) {
            for (double& x : b.w) { x = u(rng); }
        }
        for (double& x : p.critic_w[0].w) { x = u(rng); }
        p.version = 11;
        save_checkpoint(path, p);
        const CogParams back = load_checkpoint(path);
        CHECK(back.policy_w.w == p.policy_w.w);
        for (int k = 0; k < kNumEffectAtoms; ++k) {
            CHECK(back.trans_w[static_cast<size_t>(k)].w == p.trans_w[static_cast<size_t>(k)].w);
        }
        CHECK(back.critic_w[0].w == p.critic_w[0].w);
        CHECK(back.critic_w[1].w == p.critic_w[1].w);
        CHECK(weights_hash(back) == weights_hash(p));
    }
    SUBCASE("a flipped weight breaks the embedded hash") {
        CogParams p = make_params(1u << 10);
        p.policy_w.w[3] = 0.25;
        save_checkpoint(path, p);
        Json j = load_json(path);
        j["policy"]["val"][0] = 0.75;
        atomic_write(path, j.dump());
        CHECK_THROWS(load_checkpoint(path));
    }
    SUBCASE("dimension and index validation") {
        CogParams p = make_params(1u << 10);
        p.policy_w.w[3] = 0.25;
        save_checkpoint(path, p);
        Json j = load_json(path);
        j["policy"]["idx"][0] = 4096;  // out of range for dim 1024
        atomic_write(path, j.dump());
        CHECK_THROWS(load_checkpoint(path));
    }
}

TEST_CASE("atomic writes land complete or not at all") {
    TempDir tmp;
    const std::string path = tmp.file("sub/dir/file.txt");
    atomic_write(path, "payload");
    CHECK(slurp(path) == "payload");
    // Overwrite in place.
    atomic_write(path, "second");
    CHECK(slurp(path) == "second");
    // No stray temp files remain.
    size_t entries = 0;
    for (const auto& e : fs::directory_iterator(tmp.path / "sub" / "dir")) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 1);
}

TEST_CASE("content hashing sees every byte") {
    TempDir tmp;
    const std::string a = tmp.file("a.bin");
    const std::string b = tmp.file("b.bin");
    atomic_write(a, "abc");
    atomic_write(b, "abd");
    CHECK(file_content_hash(a) != file_content_hash(b));
    atomic_write(b, "abc");
    CHECK(file_content_hash(a) == file_content_hash(b));
}

TEST_CASE("manifests accumulate run records with timestamps") {
    TempDir tmp;
    Json entry;
    entry["command"] = "gen-tasks";
    entry["seed"] = 1;
    append_manifest(tmp.path.string(), entry);
    Json entry2;
    entry2["command"] = "eval";
    append_manifest(tmp.path.string(), entry2);

    const auto rows = read_jsonl((tmp.path / "manifest.jsonl").string());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].at("command") == "gen-tasks");
    CHECK(rows[1].at("command") == "eval");
    CHECK(rows[0].contains("unix_ms"));
}

TEST_CASE("report json writes stable field order") {
    TempDir tmp;
    EvalReport r;
    r.tasks = 2;
    r.runs = 3;
    r.avg = 0.5;
    r.bon = 1.0;
    r.by_split["train"] = {2, 0.5, 1.0};
    r.per_task = {{"a", 1, 3, 0.9, 10}, {"b", 2, 3, 1.0, 8}};
    const std::string path = tmp.file("report.json");
    save_report(path, to_json(r));
    const std::string one = slurp(path);
    save_report(path, to_json(r));
    CHECK(slurp(path) == one);

    const Json back = load_json(path);
    CHECK(back.at("tasks") == 2);
    CHECK(back.at("per_task").size() == 2);
    CHECK(back.at("by_split").at("train").at("bon") == 1.0);
}
