#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dynaplan/cogmodel.hpp"
#include "dynaplan/dynatrain.hpp"
#include "dynaplan/evalharness.hpp"
#include "dynaplan/traces.hpp"
#include "dynaplan/worldsim.hpp"

namespace dynaplan {

// ---------------------------------------------------------------------------
// File formats. Every artifact is versioned JSON with stable field order so
// identical inputs yield byte-identical files. Writes go through a temp file
// and a rename; a crash never leaves a half-written artifact behind.
// ---------------------------------------------------------------------------

using Json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

Json to_json(const Action& a);
Action action_from_json(const Json& j);
Json to_json(const GoalAtom& g);
GoalAtom goal_atom_from_json(const Json& j);
Json to_json(const InitEntry& e);
InitEntry init_entry_from_json(const Json& j);
Json to_json(const TaskSpec& t);
TaskSpec task_from_json(const Json& j);
Json to_json(const Output& o);
Output output_from_json(const Json& j);
Json to_json(const Observation& o);
Observation observation_from_json(const Json& j);
Json to_json(const Critique& c);
Critique critique_from_json(const Json& j);
Json to_json(const TraceSegment& s);
TraceSegment segment_from_json(const Json& j);
Json to_json(const ActionRecord& r);
ActionRecord record_from_json(const Json& j);
Json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const Json& j);

// Output-only report shapes.
Json to_json(const EvalReport& r);
Json to_json(const WmAccuracy& a);
Json to_json(const LengthStats& s);
Json to_json(const LogEntry& e);
Json to_json(const IterMetrics& m);
Json to_json(const ScaleWmResult& r);

// --- files -------------------------------------------------------------------

// Line-oriented container: exactly one record per line, no header. Integrity
// is the manifest's job; shape errors surface when records are decoded.
void write_jsonl(const std::string& path, const std::vector<Json>& rows);
std::vector<Json> read_jsonl(const std::string& path);

void save_tasks(const std::string& path, const std::vector<TaskSpec>& tasks);
std::vector<TaskSpec> load_tasks(const std::string& path);
void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> load_trajectories(const std::string& path);
void save_log(const std::string& path, const RunLog& log);

// Dense weight blocks switch to a sparse index/value encoding once mostly
// zero, which keeps fresh-model checkpoints small. Loading validates dim,
// indices and the embedded weights hash.
void save_checkpoint(const std::string& path, const CogParams& params);
CogParams load_checkpoint(const std::string& path);

void save_report(const std::string& path, const Json& report);
Json load_json(const std::string& path);

// --- plumbing ------------------------------------------------------------------

void atomic_write(const std::string& path, const std::string& content);
uint64_t file_content_hash(const std::string& path);  // 64-bit FNV over raw bytes

// Appends one run record (command, hashes, artifacts, seeds...) to
// <dir>/manifest.jsonl, stamping wall-clock time. The manifest is an audit
// trail, deliberately not byte-reproducible.
void append_manifest(const std::string& dir, Json entry);

}  // namespace dynaplan
