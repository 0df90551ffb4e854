#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dynaplan/effects.hpp"

namespace dynaplan {

// ---------------------------------------------------------------------------
// A deterministic file-tree environment observed through a terminal-style
// window: the agent sees its working directory, that directory's children and
// the last command output — never the whole tree.
// ---------------------------------------------------------------------------

enum class Verb : uint8_t { mkdir_v = 0, touch_v, rm_v, cp_v, mv_v, cd_v, ls_v, write_v, done_v };
constexpr int kNumVerbs = 9;
constexpr std::array<std::string_view, kNumVerbs> kVerbNames = {
    "mkdir", "touch", "rm", "cp", "mv", "cd", "ls", "write", "done",
};

struct Action {
    Verb verb{Verb::done_v};
    std::string arg1;  // absolute path
    std::string arg2;  // second path (cp/mv) or content token (write)

    auto operator<=>(const Action&) const = default;
};

std::string action_to_string(const Action& a);
Action action_from_string(std::string_view text);  // throws std::invalid_argument

enum class NodeKind : uint8_t { file = 0, dir };

struct Node {
    NodeKind kind{NodeKind::file};
    std::string content;  // single token; empty for directories
    bool operator==(const Node&) const = default;
};

// Classes line up with the three output effect atoms.
enum class OutputClass : uint8_t { listing = 0, error, empty };

struct Output {
    OutputClass cls{OutputClass::empty};
    std::vector<std::string> payload;  // sorted child names for listings, error code for errors
    bool operator==(const Output&) const = default;
};

struct WorldState {
    std::map<std::string, Node> tree;  // absolute path -> node; always contains "/"
    std::string cwd = "/";
    Output last_output;
    int step = 0;
    bool operator==(const WorldState&) const = default;
};

struct ObsEntry {
    std::string name;  // child basename
    NodeKind kind{NodeKind::file};
    bool operator==(const ObsEntry&) const = default;
};

// What the agent actually sees. Deliberately partial: no content, no paths
// outside cwd.
struct Observation {
    std::string cwd = "/";
    std::vector<ObsEntry> listing;  // children of cwd, sorted by name
    Output last_output;
    int step = 0;
    bool operator==(const Observation&) const = default;
};

enum class GoalKind : uint8_t { exists = 0, not_exists, is_dir, content, cwd_is };

struct GoalAtom {
    GoalKind kind{GoalKind::exists};
    std::string path;
    std::string token;  // content atoms only
    auto operator<=>(const GoalAtom&) const = default;
};

enum class Domain : uint8_t { files = 0, dirs, nav, archive };
constexpr std::array<std::string_view, 4> kDomainNames = {"files", "dirs", "nav", "archive"};

enum class Split : uint8_t { train = 0, test_id, test_ood };
constexpr std::array<std::string_view, 3> kSplitNames = {"train", "test_id", "test_ood"};

struct InitEntry {
    std::string path;
    NodeKind kind{NodeKind::dir};
    std::string content;
    bool operator==(const InitEntry&) const = default;
};

struct TaskSpec {
    std::string id;
    Domain domain{Domain::files};
    Split split{Split::train};
    std::vector<std::string> instruction;  // tokenized; goals rendered as keyword phrases
    std::vector<InitEntry> init;           // applied on top of the root directory
    std::vector<GoalAtom> evaluator;       // conjunction; hidden from the agent when opaque
    bool opaque = false;
    bool operator==(const TaskSpec&) const = default;
};

// --- path helpers ----------------------------------------------------------

bool is_valid_path(std::string_view p);
std::string parent_of(std::string_view p);    // parent of "/" is "/"
std::string basename_of(std::string_view p);  // basename of "/" is ""
std::string join_path(std::string_view dir, std::string_view name);
// True when `anc` is a proper ancestor directory of `p`.
bool is_ancestor(std::string_view anc, std::string_view p);

// --- environment dynamics ---------------------------------------------------

// The sixteen-token content alphabet.
const std::vector<std::string>& content_alphabet();
bool is_content_token(std::string_view s);

WorldState init_state(const TaskSpec& task);
Observation observe(const WorldState& state);

struct TransitionResult {
    WorldState state;
    Observation obs;
    EffectSet effects;
    bool terminal = false;
};

// Applies one action. Ill-typed actions (bad verb arity, malformed path)
// throw std::invalid_argument; in-world failures (missing source, existing
// destination, removing the cwd...) are legal no-ops that produce an error
// output.
TransitionResult transition(const WorldState& state, const Action& action);

// Terminal reward: 1 iff every goal atom holds in `state`.
int evaluate(const WorldState& state, const std::vector<GoalAtom>& goals);
bool atom_holds(const WorldState& state, const GoalAtom& atom);

// --- the action space -------------------------------------------------------

// Paths mentioned by the task, deduplicated in first-seen order and capped.
constexpr int kMaxPathVocab = 8;
std::vector<std::string> path_vocabulary(const TaskSpec& task);
// Content tokens mentioned by the task (falls back to the first alphabet
// token so `write` is always instantiable).
std::vector<std::string> content_vocabulary(const TaskSpec& task);

// Every well-formed action over the task vocabulary, in a fixed order:
// verbs in declaration order, arguments lexicographic. Identical for every
// observation of the same task, which lets action indices double as labels.
std::vector<Action> legal_actions(const TaskSpec& task, const Observation& obs);

// --- goal rendering ---------------------------------------------------------

// e.g. {exists, "/a/b"} -> ["exists", "/a/b"]. Inverse of parse.
std::vector<std::string> render_goal_atom(const GoalAtom& atom);
// Scans a token stream for goal keywords. Ignores everything else, so it can
// run over a full instruction.
std::vector<GoalAtom> parse_rendered_atoms(const std::vector<std::string>& tokens);

// --- task generation --------------------------------------------------------

struct GenOptions {
    double opaque_fraction = 0.25;
    int max_attempts = 1000;
};

// Deterministic in (domain, count, seed, split). Every task is solvable within
// the step budget and carries a distinct structure signature. The archive
// domain only exists out-of-distribution; asking for it in train throws.
std::vector<TaskSpec> generate_tasks(Domain domain, int count, uint64_t seed, Split split,
                                     const GenOptions& options = {});

// Shortest-style scripted solution using full state access. nullopt when the
// goals are unsatisfiable within the budget.
constexpr int kStepBudget = 30;
std::optional<std::vector<Action>> plan_solution(const TaskSpec& task);

// --- effect-level views -----------------------------------------------------

// Computes the ground-truth effect set of `action` in `state` without
// constructing the successor (convenience over transition()).
EffectSet true_effects(const WorldState& state, const Action& action);

// Applies a *predicted* effect set to a shadow state. Returns false when the
// prediction is not applicable (e.g. Created(ARG2) for a verb with no second
// path); the shadow state is left unchanged in that case.
bool apply_effects(WorldState& shadow, const Action& action, EffectSet effects);

// What a path looks like from inside an observation. Closed code vocabulary
// used as feature values:
//   root / cwd / anc   — the path is "/", the cwd, or an ancestor of it
//   cdir / cfile       — visible child of cwd (directory / file)
//   cmiss              — would-be child of cwd, absent from the listing
//   udir / ufile       — deeper under cwd; the first component below cwd is a
//                        visible directory / file
//   umiss              — deeper under cwd with a missing first component
//   out                — not on the cwd lineage at all (existence unknown)
std::string path_status(std::string_view path, const Observation& obs);

// Three-valued check of a goal atom against a partial observation:
// +1 definitely holds, -1 definitely violated, 0 not determinable.
int atom_obs_status(const GoalAtom& atom, const Observation& obs);

}  // namespace dynaplan
