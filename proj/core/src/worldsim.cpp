#include "dynaplan/worldsim.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dynaplan/hashing.hpp"

namespace dynaplan {

namespace {

bool valid_path_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
}

int verb_arity(Verb v) {
    switch (v) {
        case Verb::ls_v:
        case Verb::done_v: return 0;
        case Verb::cp_v:
        case Verb::mv_v:
        case Verb::write_v: return 2;
        default: return 1;
    }
}

}  // namespace

std::string to_hex(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// --- effects rendering -------------------------------------------------------

std::string effect_set_to_string(EffectSet s) {
    if (s.empty()) { return "none"; }
    std::string out;
    for (int i = 0; i < kNumEffectAtoms; ++i) {
        if (s.has(static_cast<EffectAtom>(i))) {
            if (!out.empty()) { out += '+'; }
            out += kEffectAtomNames[static_cast<size_t>(i)];
        }
    }
    return out;
}

EffectSet effect_set_from_string(std::string_view text) {
    EffectSet s;
    if (text == "none" || text.empty()) { return s; }
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t next = text.find('+', pos);
        std::string_view part = text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        bool found = false;
        for (int i = 0; i < kNumEffectAtoms; ++i) {
            if (part == kEffectAtomNames[static_cast<size_t>(i)]) {
                s.add(static_cast<EffectAtom>(i));
                found = true;
                break;
            }
        }
        if (!found) { throw std::invalid_argument("unknown effect atom: " + std::string(part)); }
        if (next == std::string_view::npos) { break; }
        pos = next + 1;
    }
    return s;
}

// --- actions -----------------------------------------------------------------

std::string action_to_string(const Action& a) {
    std::string out(kVerbNames[static_cast<size_t>(a.verb)]);
    if (!a.arg1.empty()) { out += ' '; out += a.arg1; }
    if (!a.arg2.empty()) { out += ' '; out += a.arg2; }
    return out;
}

Action action_from_string(std::string_view text) {
    std::istringstream ss{std::string(text)};
    std::string verb, a1, a2, extra;
    ss >> verb >> a1 >> a2;
    if (ss >> extra) { throw std::invalid_argument("too many action fields: " + std::string(text)); }
    for (int i = 0; i < kNumVerbs; ++i) {
        if (verb == kVerbNames[static_cast<size_t>(i)]) {
            Action a{static_cast<Verb>(i), a1, a2};
            int ar = verb_arity(a.verb);
            int got = (a1.empty() ? 0 : 1) + (a2.empty() ? 0 : 1);
            if (ar != got) { throw std::invalid_argument("bad arity for action: " + std::string(text)); }
            return a;
        }
    }
    throw std::invalid_argument("unknown verb: " + verb);
}

// --- paths -------------------------------------------------------------------

bool is_valid_path(std::string_view p) {
    if (p.empty() || p[0] != '/') { return false; }
    if (p == "/") { return true; }
    if (p.back() == '/') { return false; }
    size_t i = 1;
    while (i < p.size()) {
        size_t j = p.find('/', i);
        if (j == std::string_view::npos) { j = p.size(); }
        if (j == i) { return false; }  // empty component
        for (size_t k = i; k < j; ++k) {
            if (!valid_path_char(p[k])) { return false; }
        }
        i = j + 1;
    }
    return true;
}

std::string parent_of(std::string_view p) {
    if (p == "/") { return "/"; }
    size_t pos = p.rfind('/');
    if (pos == 0) { return "/"; }
    return std::string(p.substr(0, pos));
}

std::string basename_of(std::string_view p) {
    if (p == "/") { return ""; }
    size_t pos = p.rfind('/');
    return std::string(p.substr(pos + 1));
}

std::string join_path(std::string_view dir, std::string_view name) {
    if (dir == "/") { return "/" + std::string(name); }
    return std::string(dir) + "/" + std::string(name);
}

bool is_ancestor(std::string_view anc, std::string_view p) {
    if (anc == p) { return false; }
    if (anc == "/") { return p.size() > 1 && p[0] == '/'; }
    return p.size() > anc.size() && p.substr(0, anc.size()) == anc && p[anc.size()] == '/';
}

// --- content alphabet --------------------------------------------------------

const std::vector<std::string>& content_alphabet() {
    static const std::vector<std::string> alphabet = [] {
        std::vector<std::string> v;
        for (int i = 0; i < 16; ++i) {
            std::string t = "t";
            t += static_cast<char>('0' + i / 10);
            t += static_cast<char>('0' + i % 10);
            v.push_back(t);
        }
        return v;
    }();
    return alphabet;
}

bool is_content_token(std::string_view s) {
    if (s.size() != 3 || s[0] != 't' || s[1] < '0' || s[1] > '9' || s[2] < '0' || s[2] > '9') {
        return false;
    }
    int n = (s[1] - '0') * 10 + (s[2] - '0');
    return n < 16;
}

// --- state construction ------------------------------------------------------

WorldState init_state(const TaskSpec& task) {
    WorldState s;
    s.tree["/"] = Node{NodeKind::dir, ""};
    for (const InitEntry& e : task.init) {
        if (!is_valid_path(e.path) || e.path == "/") {
            throw std::invalid_argument("bad init path: " + e.path);
        }
        // Materialize missing parents as directories so init lists don't have
        // to be exhaustive.
        std::vector<std::string> chain;
        for (std::string p = parent_of(e.path); p != "/"; p = parent_of(p)) {
            if (!s.tree.count(p)) { chain.push_back(p); }
        }
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            s.tree[*it] = Node{NodeKind::dir, ""};
        }
        if (e.kind == NodeKind::dir) {
            s.tree[e.path] = Node{NodeKind::dir, ""};
        } else {
            s.tree[e.path] = Node{NodeKind::file, e.content.empty() ? content_alphabet()[0] : e.content};
        }
    }
    s.cwd = "/";
    s.last_output = Output{};
    s.step = 0;
    return s;
}

Observation observe(const WorldState& state) {
    Observation o;
    o.cwd = state.cwd;
    // Trees are tiny; a full scan keeps the listing logic obvious. Map order
    // sorts same-directory children by basename.
    for (const auto& [p, n] : state.tree) {
        if (p != "/" && parent_of(p) == state.cwd) {
            o.listing.push_back(ObsEntry{basename_of(p), n.kind});
        }
    }
    o.last_output = state.last_output;
    o.step = state.step;
    return o;
}

// --- transition --------------------------------------------------------------

namespace {

struct StepOutcome {
    EffectSet effects;
    Output output;
    bool terminal = false;
};

void remove_subtree(std::map<std::string, Node>& tree, const std::string& p) {
    auto it = tree.find(p);
    if (it != tree.end()) { it = tree.erase(it); }
    while (it != tree.end() && is_ancestor(p, it->first)) { it = tree.erase(it); }
}

// Copies node p and all descendants to dst inside the same tree.
void copy_subtree(std::map<std::string, Node>& tree, const std::string& src, const std::string& dst) {
    std::vector<std::pair<std::string, Node>> grabbed;
    auto it = tree.find(src);
    grabbed.emplace_back(dst, it->second);
    for (++it; it != tree.end() && is_ancestor(src, it->first); ++it) {
        grabbed.emplace_back(dst + it->first.substr(src.size()), it->second);
    }
    for (auto& [p, n] : grabbed) { tree[p] = n; }
}

Output error_output(const char* code) { return Output{OutputClass::error, {code}}; }

StepOutcome apply_verb(WorldState& s, const Action& a) {
    StepOutcome out;
    auto fail = [&](const char* code) {
        out.output = error_output(code);
        out.effects = make_effects({EffectAtom::output_error, EffectAtom::no_change});
        return out;
    };
    auto node = [&](const std::string& p) { return s.tree.find(p); };
    const auto end = s.tree.end();

    switch (a.verb) {
        case Verb::mkdir_v:
        case Verb::touch_v: {
            if (node(a.arg1) != end) { return fail("err_exists"); }
            auto parent = node(parent_of(a.arg1));
            if (parent == end || parent->second.kind != NodeKind::dir) { return fail("err_parent"); }
            if (a.verb == Verb::mkdir_v) {
                s.tree[a.arg1] = Node{NodeKind::dir, ""};
            } else {
                s.tree[a.arg1] = Node{NodeKind::file, content_alphabet()[0]};
            }
            out.effects = make_effects({EffectAtom::created_arg1, EffectAtom::output_empty});
            return out;
        }
        case Verb::rm_v: {
            if (node(a.arg1) == end) { return fail("err_missing"); }
            if (a.arg1 == "/" || a.arg1 == s.cwd || is_ancestor(a.arg1, s.cwd)) { return fail("err_busy"); }
            remove_subtree(s.tree, a.arg1);
            out.effects = make_effects({EffectAtom::removed_arg1, EffectAtom::output_empty});
            return out;
        }
        case Verb::cp_v:
        case Verb::mv_v: {
            if (node(a.arg1) == end) { return fail("err_missing"); }
            if (node(a.arg2) != end) { return fail("err_exists"); }
            auto parent = node(parent_of(a.arg2));
            if (parent == end || parent->second.kind != NodeKind::dir) { return fail("err_parent"); }
            if (a.arg1 == a.arg2 || is_ancestor(a.arg1, a.arg2)) { return fail("err_nested"); }
            if (a.verb == Verb::mv_v && (a.arg1 == s.cwd || is_ancestor(a.arg1, s.cwd))) {
                return fail("err_busy");
            }
            copy_subtree(s.tree, a.arg1, a.arg2);
            if (a.verb == Verb::mv_v) {
                remove_subtree(s.tree, a.arg1);
                out.effects = make_effects(
                    {EffectAtom::removed_arg1, EffectAtom::created_arg2, EffectAtom::output_empty});
            } else {
                out.effects = make_effects({EffectAtom::created_arg2, EffectAtom::output_empty});
            }
            return out;
        }
        case Verb::cd_v: {
            auto it = node(a.arg1);
            if (it == end) { return fail("err_missing"); }
            if (it->second.kind != NodeKind::dir) { return fail("err_not_dir"); }
            s.cwd = a.arg1;
            out.effects = make_effects({EffectAtom::cwd_set_arg1, EffectAtom::output_empty});
            return out;
        }
        case Verb::ls_v: {
            out.output.cls = OutputClass::listing;
            for (const ObsEntry& e : observe(s).listing) { out.output.payload.push_back(e.name); }
            out.effects = make_effects({EffectAtom::output_listing});
            return out;
        }
        case Verb::write_v: {
            auto it = node(a.arg1);
            if (it == end) { return fail("err_missing"); }
            if (it->second.kind != NodeKind::file) { return fail("err_not_file"); }
            it->second.content = a.arg2;
            out.effects = make_effects({EffectAtom::content_set_arg1, EffectAtom::output_empty});
            return out;
        }
        case Verb::done_v: {
            out.terminal = true;
            out.effects = make_effects({EffectAtom::output_empty, EffectAtom::no_change});
            return out;
        }
    }
    throw std::logic_error("unreachable verb");
}

}  // namespace

TransitionResult transition(const WorldState& state, const Action& action) {
    const int arity = verb_arity(action.verb);
    const int got = (action.arg1.empty() ? 0 : 1) + (action.arg2.empty() ? 0 : 1);
    if (arity != got) {
        throw std::invalid_argument("arity violation: " + action_to_string(action));
    }
    if (arity >= 1 && !is_valid_path(action.arg1)) {
        throw std::invalid_argument("malformed path: " + action.arg1);
    }
    if (action.verb == Verb::cp_v || action.verb == Verb::mv_v) {
        if (!is_valid_path(action.arg2)) { throw std::invalid_argument("malformed path: " + action.arg2); }
    }
    if (action.verb == Verb::write_v && !is_content_token(action.arg2)) {
        throw std::invalid_argument("write payload is not a content token: " + action.arg2);
    }

    TransitionResult r;
    r.state = state;
    StepOutcome out = apply_verb(r.state, action);
    r.state.last_output = out.output;
    r.state.step = state.step + 1;
    r.effects = out.effects;
    r.terminal = out.terminal;
    r.obs = observe(r.state);
    return r;
}

EffectSet true_effects(const WorldState& state, const Action& action) {
    return transition(state, action).effects;
}

// --- evaluation --------------------------------------------------------------

bool atom_holds(const WorldState& state, const GoalAtom& atom) {
    auto it = state.tree.find(atom.path);
    switch (atom.kind) {
        case GoalKind::exists: return it != state.tree.end();
        case GoalKind::not_exists: return it == state.tree.end();
        case GoalKind::is_dir: return it != state.tree.end() && it->second.kind == NodeKind::dir;
        case GoalKind::content:
            return it != state.tree.end() && it->second.kind == NodeKind::file &&
                   it->second.content == atom.token;
        case GoalKind::cwd_is: return state.cwd == atom.path;
    }
    return false;
}

int evaluate(const WorldState& state, const std::vector<GoalAtom>& goals) {
    for (const GoalAtom& g : goals) {
        if (!atom_holds(state, g)) { return 0; }
    }
    return 1;
}

// --- vocabulary and enumeration ----------------------------------------------

std::vector<std::string> path_vocabulary(const TaskSpec& task) {
    std::vector<std::string> vocab;
    auto push = [&](const std::string& p) {
        if (!is_valid_path(p)) { return; }
        if (std::find(vocab.begin(), vocab.end(), p) == vocab.end()) { vocab.push_back(p); }
    };
    for (const std::string& t : task.instruction) { push(t); }
    for (const InitEntry& e : task.init) { push(e.path); }
    for (const GoalAtom& g : task.evaluator) { push(g.path); }
    if (vocab.size() > static_cast<size_t>(kMaxPathVocab)) { vocab.resize(kMaxPathVocab); }
    std::sort(vocab.begin(), vocab.end());
    return vocab;
}

std::vector<std::string> content_vocabulary(const TaskSpec& task) {
    std::vector<std::string> vocab;
    auto push = [&](const std::string& t) {
        if (!is_content_token(t)) { return; }
        if (std::find(vocab.begin(), vocab.end(), t) == vocab.end()) { vocab.push_back(t); }
    };
    for (const std::string& t : task.instruction) { push(t); }
    for (const InitEntry& e : task.init) { push(e.content); }
    for (const GoalAtom& g : task.evaluator) { push(g.token); }
    if (vocab.size() > 3) { vocab.resize(3); }
    if (vocab.empty()) { vocab.push_back(content_alphabet()[0]); }
    std::sort(vocab.begin(), vocab.end());
    return vocab;
}

std::vector<Action> legal_actions(const TaskSpec& task, const Observation& obs) {
    (void)obs;  // the action space is a function of the task alone
    const std::vector<std::string> paths = path_vocabulary(task);
    const std::vector<std::string> tokens = content_vocabulary(task);
    std::vector<Action> out;
    for (const auto& p : paths) { out.push_back({Verb::mkdir_v, p, ""}); }
    for (const auto& p : paths) { out.push_back({Verb::touch_v, p, ""}); }
    for (const auto& p : paths) { out.push_back({Verb::rm_v, p, ""}); }
    for (const auto& p : paths) {
        for (const auto& q : paths) {
            if (p != q) { out.push_back({Verb::cp_v, p, q}); }
        }
    }
    for (const auto& p : paths) {
        for (const auto& q : paths) {
            if (p != q) { out.push_back({Verb::mv_v, p, q}); }
        }
    }
    for (const auto& p : paths) { out.push_back({Verb::cd_v, p, ""}); }
    out.push_back({Verb::ls_v, "", ""});
    for (const auto& p : paths) {
        for (const auto& t : tokens) { out.push_back({Verb::write_v, p, t}); }
    }
    out.push_back({Verb::done_v, "", ""});
    return out;
}

// --- goal rendering -----------------------------------------------------------

std::vector<std::string> render_goal_atom(const GoalAtom& atom) {
    switch (atom.kind) {
        case GoalKind::exists: return {"exists", atom.path};
        case GoalKind::not_exists: return {"absent", atom.path};
        case GoalKind::is_dir: return {"isdir", atom.path};
        case GoalKind::content: return {"content", atom.path, atom.token};
        case GoalKind::cwd_is: return {"cwdis", atom.path};
    }
    return {};
}

std::vector<GoalAtom> parse_rendered_atoms(const std::vector<std::string>& tokens) {
    std::vector<GoalAtom> out;
    auto push = [&](GoalAtom a) {
        if (std::find(out.begin(), out.end(), a) == out.end()) { out.push_back(a); }
    };
    for (size_t i = 0; i < tokens.size(); ++i) {
        const std::string& t = tokens[i];
        if (t == "content") {
            if (i + 2 < tokens.size() && is_valid_path(tokens[i + 1]) && is_content_token(tokens[i + 2])) {
                push({GoalKind::content, tokens[i + 1], tokens[i + 2]});
                i += 2;
            }
            continue;
        }
        GoalKind kind;
        if (t == "exists") { kind = GoalKind::exists; }
        else if (t == "absent") { kind = GoalKind::not_exists; }
        else if (t == "isdir") { kind = GoalKind::is_dir; }
        else if (t == "cwdis") { kind = GoalKind::cwd_is; }
        else { continue; }
        if (i + 1 < tokens.size() && is_valid_path(tokens[i + 1])) {
            push({kind, tokens[i + 1], ""});
            i += 1;
        }
    }
    return out;
}

// --- observation-level views ---------------------------------------------------

std::string path_status(std::string_view path, const Observation& obs) {
    if (path == "/") { return "root"; }
    if (path == obs.cwd) { return "cwd"; }
    if (is_ancestor(path, obs.cwd)) { return "anc"; }
    if (is_ancestor(obs.cwd, path)) {
        // First component below cwd.
        std::string_view rest = path.substr(obs.cwd.size() == 1 ? 1 : obs.cwd.size() + 1);
        size_t slash = rest.find('/');
        std::string head(rest.substr(0, slash));
        bool direct = slash == std::string_view::npos;
        for (const ObsEntry& e : obs.listing) {
            if (e.name == head) {
                if (direct) { return e.kind == NodeKind::dir ? "cdir" : "cfile"; }
                return e.kind == NodeKind::dir ? "udir" : "ufile";
            }
        }
        return direct ? "cmiss" : "umiss";
    }
    return "out";
}

int atom_obs_status(const GoalAtom& atom, const Observation& obs) {
    const std::string st = path_status(atom.path, obs);
    const bool known_dir = st == "root" || st == "cwd" || st == "anc" || st == "cdir";
    const bool known_file = st == "cfile";
    const bool known_absent = st == "cmiss" || st == "umiss" || st == "ufile";
    switch (atom.kind) {
        case GoalKind::exists:
            if (known_dir || known_file || st == "udir") { return known_dir || known_file ? 1 : 0; }
            return known_absent ? -1 : 0;
        case GoalKind::not_exists:
            if (st == "cmiss" || st == "umiss") { return 1; }
            if (known_dir || known_file) { return -1; }
            return 0;
        case GoalKind::is_dir:
            if (known_dir) { return 1; }
            if (known_file || known_absent) { return -1; }
            return 0;
        case GoalKind::content:
            // Content is never directly visible.
            if (known_absent || known_dir) { return -1; }
            return 0;
        case GoalKind::cwd_is:
            return obs.cwd == atom.path ? 1 : -1;
    }
    return 0;
}

// --- predicted-effect application ----------------------------------------------

bool apply_effects(WorldState& shadow, const Action& action, EffectSet effects) {
    const bool two_paths = action.verb == Verb::cp_v || action.verb == Verb::mv_v;
    if (effects.has(EffectAtom::no_change) && !(effects & kMutationAtoms).empty()) { return false; }

    WorldState next = shadow;
    next.step = shadow.step + 1;

    // Source snapshot for Created(ARG2) (copy/move semantics) before removals.
    std::map<std::string, Node> copied;
    if (effects.has(EffectAtom::created_arg2)) {
        if (!two_paths) { return false; }
        auto it = next.tree.find(action.arg1);
        if (it == next.tree.end()) { return false; }
        copied[action.arg2] = it->second;
        for (++it; it != next.tree.end() && is_ancestor(action.arg1, it->first); ++it) {
            copied[action.arg2 + it->first.substr(action.arg1.size())] = it->second;
        }
    }

    auto do_remove = [&](const std::string& p) {
        if (!next.tree.count(p)) { return false; }
        if (p == "/" || p == next.cwd || is_ancestor(p, next.cwd)) { return false; }
        remove_subtree(next.tree, p);
        return true;
    };
    if (effects.has(EffectAtom::removed_arg1)) {
        if (action.arg1.empty() || !do_remove(action.arg1)) { return false; }
    }
    if (effects.has(EffectAtom::removed_arg2)) {
        if (!two_paths || !do_remove(action.arg2)) { return false; }
    }

    if (effects.has(EffectAtom::created_arg1)) {
        NodeKind kind;
        if (action.verb == Verb::mkdir_v) { kind = NodeKind::dir; }
        else if (action.verb == Verb::touch_v) { kind = NodeKind::file; }
        else { return false; }
        if (next.tree.count(action.arg1)) { return false; }
        auto parent = next.tree.find(parent_of(action.arg1));
        if (parent == next.tree.end() || parent->second.kind != NodeKind::dir) { return false; }
        next.tree[action.arg1] =
            kind == NodeKind::dir ? Node{NodeKind::dir, ""} : Node{NodeKind::file, content_alphabet()[0]};
    }
    if (effects.has(EffectAtom::created_arg2)) {
        if (next.tree.count(action.arg2)) { return false; }
        auto parent = next.tree.find(parent_of(action.arg2));
        if (parent == next.tree.end() || parent->second.kind != NodeKind::dir) { return false; }
        for (auto& [p, n] : copied) { next.tree[p] = n; }
    }
    if (effects.has(EffectAtom::content_set_arg1)) {
        if (action.verb != Verb::write_v) { return false; }
        auto it = next.tree.find(action.arg1);
        if (it == next.tree.end() || it->second.kind != NodeKind::file) { return false; }
        it->second.content = action.arg2;
    }
    if (effects.has(EffectAtom::cwd_set_arg1)) {
        auto it = next.tree.find(action.arg1);
        if (it == next.tree.end() || it->second.kind != NodeKind::dir) { return false; }
        next.cwd = action.arg1;
    }

    const int outputs = (effects.has(EffectAtom::output_listing) ? 1 : 0) +
                        (effects.has(EffectAtom::output_error) ? 1 : 0) +
                        (effects.has(EffectAtom::output_empty) ? 1 : 0);
    if (outputs != 1) { return false; }
    if (effects.has(EffectAtom::output_listing)) {
        next.last_output = Output{OutputClass::listing, {}};
        for (const ObsEntry& e : observe(next).listing) { next.last_output.payload.push_back(e.name); }
    } else if (effects.has(EffectAtom::output_error)) {
        next.last_output = Output{OutputClass::error, {"err"}};
    } else {
        next.last_output = Output{};
    }

    shadow = std::move(next);
    return true;
}

// --- scripted planner -----------------------------------------------------------

namespace {

// Phase order keeps goals non-interfering: removals first (from "/", so the
// cwd can't be inside a target), then creations parent-first, then content
// writes, then the final cd, then done. Mutations happen from the parent
// directory — the cd-local style the agent is meant to imitate.
std::optional<std::vector<Action>> plan_actions(const TaskSpec& task) {
    std::vector<GoalAtom> removals, creations, contents, cwds;
    for (const GoalAtom& g : task.evaluator) {
        switch (g.kind) {
            case GoalKind::not_exists: removals.push_back(g); break;
            case GoalKind::exists:
            case GoalKind::is_dir: creations.push_back(g); break;
            case GoalKind::content: contents.push_back(g); break;
            case GoalKind::cwd_is: cwds.push_back(g); break;
        }
    }
    auto by_path = [](const GoalAtom& a, const GoalAtom& b) { return a.path < b.path; };
    std::sort(removals.begin(), removals.end(), by_path);
    std::sort(creations.begin(), creations.end(), by_path);  // lexicographic ⇒ parents first
    std::sort(contents.begin(), contents.end(), by_path);
    std::sort(cwds.begin(), cwds.end(), by_path);
    if (cwds.size() > 1) { return std::nullopt; }  // contradictory goals

    WorldState s = init_state(task);
    std::vector<Action> plan;
    auto run = [&](Action a) {
        auto r = transition(s, a);
        s = std::move(r.state);
        plan.push_back(std::move(a));
    };
    auto go_local = [&](const std::string& target) {
        const std::string parent = parent_of(target);
        if (s.cwd != parent && s.tree.count(parent)) { run({Verb::cd_v, parent, ""}); }
    };

    for (const GoalAtom& g : removals) {
        if (s.tree.count(g.path)) { run({Verb::rm_v, g.path, ""}); }
    }
    for (const GoalAtom& g : creations) {
        if (atom_holds(s, g)) { continue; }
        go_local(g.path);
        run({g.kind == GoalKind::is_dir ? Verb::mkdir_v : Verb::touch_v, g.path, ""});
    }
    for (const GoalAtom& g : contents) {
        if (atom_holds(s, g)) { continue; }
        go_local(g.path);
        if (!s.tree.count(g.path)) { run({Verb::touch_v, g.path, ""}); }
        run({Verb::write_v, g.path, g.token});
    }
    for (const GoalAtom& g : cwds) {
        if (s.cwd != g.path) { run({Verb::cd_v, g.path, ""}); }
    }
    run({Verb::done_v, "", ""});

    if (plan.size() > static_cast<size_t>(kStepBudget)) { return std::nullopt; }
    if (!evaluate(s, task.evaluator)) { return std::nullopt; }
    return plan;
}

}  // namespace

std::optional<std::vector<Action>> plan_solution(const TaskSpec& task) {
    return plan_actions(task);
}

// --- task generation --------------------------------------------------------------

namespace {

const std::vector<std::string>& dir_pool() {
    static const std::vector<std::string> v = {"proj", "docs", "data", "src", "tmp", "box"};
    return v;
}
const std::vector<std::string>& file_pool() {
    static const std::vector<std::string> v = {"a.txt", "b.md", "log.txt", "note.md", "cfg.ini", "x.dat"};
    return v;
}
const std::vector<std::string>& filler_pool() {
    static const std::vector<std::string> v = {"please", "setup", "the", "workspace", "then", "finally", "tidy"};
    return v;
}

std::string pick(Rng& rng, const std::vector<std::string>& pool) {
    return pool[static_cast<size_t>(rng.below(pool.size()))];
}

std::string pick_distinct(Rng& rng, const std::vector<std::string>& pool,
                          const std::vector<std::string>& taken) {
    for (int i = 0; i < 64; ++i) {
        std::string c = pick(rng, pool);
        if (std::find(taken.begin(), taken.end(), c) == taken.end()) { return c; }
    }
    return pool[0];
}

std::string pick_token(Rng& rng) {
    return content_alphabet()[static_cast<size_t>(rng.below(content_alphabet().size()))];
}

std::string pick_token_not(Rng& rng, const std::string& avoid) {
    std::string t = pick_token(rng);
    while (t == avoid) { t = pick_token(rng); }
    return t;
}

struct Draft {
    std::vector<InitEntry> init;
    std::vector<GoalAtom> goals;
};

Draft draft_files(Rng& rng) {
    Draft d;
    std::vector<std::string> names;
    const std::string d1 = "/" + pick(rng, dir_pool());
    names.push_back(basename_of(d1));
    const std::string d2 = "/" + pick_distinct(rng, dir_pool(), names);
    const std::string tok_a = pick_token(rng);
    const std::string f_goal = join_path(d1, pick(rng, file_pool()));
    const std::string f_old = join_path(d2, pick(rng, file_pool()));
    d.init = {{d1, NodeKind::dir, ""}, {d2, NodeKind::dir, ""}, {f_old, NodeKind::file, tok_a}};
    switch (rng.below(3)) {
        case 0:
            d.goals = {{GoalKind::exists, f_goal, ""},
                       {GoalKind::content, f_old, pick_token_not(rng, tok_a)}};
            break;
        case 1: {
            const std::string f_goal2 = join_path(d2, pick_distinct(rng, file_pool(), {basename_of(f_old)}));
            d.goals = {{GoalKind::exists, f_goal, ""},
                       {GoalKind::exists, f_goal2, ""},
                       {GoalKind::not_exists, f_old, ""}};
            break;
        }
        default: {
            const std::string f_rm = join_path(d1, pick_distinct(rng, file_pool(), {basename_of(f_goal)}));
            d.init.push_back({f_rm, NodeKind::file, pick_token(rng)});
            d.goals = {{GoalKind::content, f_old, pick_token_not(rng, tok_a)},
                       {GoalKind::not_exists, f_rm, ""}};
            break;
        }
    }
    return d;
}

Draft draft_dirs(Rng& rng) {
    Draft d;
    std::vector<std::string> names;
    const std::string base = "/" + pick(rng, dir_pool());
    names.push_back(basename_of(base));
    const std::string old_dir = "/" + pick_distinct(rng, dir_pool(), names);
    names.push_back(basename_of(old_dir));
    d.init = {{base, NodeKind::dir, ""}, {old_dir, NodeKind::dir, ""}};
    const std::string fresh = "/" + pick_distinct(rng, dir_pool(), names);
    const std::string sub = join_path(base, pick(rng, dir_pool()));
    switch (rng.below(3)) {
        case 0:
            d.goals = {{GoalKind::is_dir, fresh, ""},
                       {GoalKind::is_dir, sub, ""},
                       {GoalKind::not_exists, old_dir, ""}};
            break;
        case 1: {
            const std::string sub2 = join_path(base, pick_distinct(rng, dir_pool(), {basename_of(sub)}));
            d.goals = {{GoalKind::is_dir, sub, ""}, {GoalKind::is_dir, sub2, ""}};
            break;
        }
        default:
            d.goals = {{GoalKind::is_dir, fresh, ""}, {GoalKind::not_exists, old_dir, ""}};
            break;
    }
    return d;
}

Draft draft_nav(Rng& rng) {
    Draft d;
    std::vector<std::string> names;
    const std::string a = "/" + pick(rng, dir_pool());
    names.push_back(basename_of(a));
    const std::string b = "/" + pick_distinct(rng, dir_pool(), names);
    const std::string c = join_path(a, pick(rng, dir_pool()));
    const std::string f = join_path(b, pick(rng, file_pool()));
    const std::string tok = pick_token(rng);
    d.init = {{a, NodeKind::dir, ""}, {b, NodeKind::dir, ""}, {c, NodeKind::dir, ""}, {f, NodeKind::file, tok}};
    switch (rng.below(3)) {
        case 0:
            d.goals = {{GoalKind::cwd_is, c, ""}, {GoalKind::exists, join_path(b, pick_distinct(rng, file_pool(), {basename_of(f)})), ""}};
            break;
        case 1:
            d.goals = {{GoalKind::cwd_is, b, ""}, {GoalKind::content, f, pick_token_not(rng, tok)}};
            break;
        default:
            d.goals = {{GoalKind::cwd_is, a, ""}, {GoalKind::exists, join_path(a, pick(rng, file_pool())), ""}};
            break;
    }
    return d;
}

// OOD: deeper trees and cp/mv compositions that never appear in-distribution.
Draft draft_archive(Rng& rng) {
    Draft d;
    const std::string a = "/" + pick(rng, dir_pool());
    const std::string ab = join_path(a, pick(rng, dir_pool()));
    const std::string abc = join_path(ab, pick(rng, dir_pool()));
    const std::string src = join_path(ab, pick(rng, file_pool()));
    const std::string tok = pick_token(rng);
    d.init = {{a, NodeKind::dir, ""}, {ab, NodeKind::dir, ""}, {abc, NodeKind::dir, ""},
              {src, NodeKind::file, tok}};
    const std::string dst = join_path(abc, pick_distinct(rng, file_pool(), {basename_of(src)}));
    switch (rng.below(3)) {
        case 0:
            d.goals = {{GoalKind::exists, dst, ""}, {GoalKind::not_exists, src, ""}};
            break;
        case 1: {
            const std::string n1 = join_path(a, pick_distinct(rng, dir_pool(), {basename_of(ab)}));
            d.goals = {{GoalKind::is_dir, n1, ""},
                       {GoalKind::exists, join_path(n1, pick(rng, file_pool())), ""}};
            break;
        }
        default:
            d.goals = {{GoalKind::cwd_is, abc, ""},
                       {GoalKind::exists, dst, ""},
                       {GoalKind::not_exists, src, ""}};
            break;
    }
    return d;
}

bool draft_valid(const Draft& d) {
    // Pairwise-distinct goal paths and the non-interference rules the agent's
    // completeness argument relies on.
    TaskSpec probe;
    probe.init = d.init;
    WorldState s0 = init_state(probe);
    std::set<std::string> goal_paths;
    for (const GoalAtom& g : d.goals) {
        if (!is_valid_path(g.path) || g.path == "/") { return false; }
        if (!goal_paths.insert(g.path).second) { return false; }
    }
    for (const GoalAtom& g : d.goals) {
        if (atom_holds(s0, g)) { return false; }  // every goal starts unsatisfied
        for (const GoalAtom& r : d.goals) {
            if (r.kind != GoalKind::not_exists) { continue; }
            if (g.kind == GoalKind::not_exists) { continue; }
            // A removal target must not shadow another goal's path or its parent chain.
            if (r.path == g.path || is_ancestor(r.path, g.path)) { return false; }
        }
        switch (g.kind) {
            case GoalKind::exists:
            case GoalKind::is_dir: {
                if (s0.tree.count(g.path)) { return false; }
                const std::string parent = parent_of(g.path);
                const bool parent_in_init = s0.tree.count(parent) > 0;
                const bool parent_is_goal = std::any_of(
                    d.goals.begin(), d.goals.end(), [&](const GoalAtom& o) {
                        return o.kind == GoalKind::is_dir && o.path == parent;
                    });
                if (!parent_in_init && !parent_is_goal) { return false; }
                break;
            }
            case GoalKind::content: {
                auto it = s0.tree.find(g.path);
                if (it == s0.tree.end() || it->second.kind != NodeKind::file) { return false; }
                if (it->second.content == g.token) { return false; }
                break;
            }
            case GoalKind::cwd_is: {
                auto it = s0.tree.find(g.path);
                if (it == s0.tree.end() || it->second.kind != NodeKind::dir) { return false; }
                break;
            }
            case GoalKind::not_exists:
                if (!s0.tree.count(g.path)) { return false; }
                break;
        }
    }
    return true;
}

std::vector<std::string> build_instruction(Rng& rng, const Draft& d, bool opaque) {
    std::vector<std::string> ins;
    ins.push_back(pick(rng, filler_pool()));
    ins.push_back(pick(rng, filler_pool()));
    for (size_t i = 0; i < d.goals.size(); ++i) {
        const bool hide = opaque && i + 1 == d.goals.size();
        if (hide) {
            // Keep the bare path as a distractor; drop the predicate keyword
            // (and token) so the atom is not recoverable from the text.
            ins.push_back(d.goals[i].path);
        } else {
            for (const std::string& t : render_goal_atom(d.goals[i])) { ins.push_back(t); }
        }
        if (i + 1 < d.goals.size()) { ins.push_back(pick(rng, filler_pool())); }
    }
    return ins;
}

std::string signature(const Draft& d) {
    std::string sig;
    for (const GoalAtom& g : d.goals) {
        sig += std::to_string(static_cast<int>(g.kind)) + g.path + g.token + ";";
    }
    sig += "|";
    for (const InitEntry& e : d.init) {
        sig += e.path + (e.kind == NodeKind::dir ? "D" : "F") + e.content + ";";
    }
    return sig;
}

}  // namespace

std::vector<TaskSpec> generate_tasks(Domain domain, int count, uint64_t seed, Split split,
                                     const GenOptions& options) {
    if (domain == Domain::archive && split != Split::test_ood) {
        throw std::invalid_argument("archive tasks are out-of-distribution only");
    }
    if (count < 0) { throw std::invalid_argument("negative task count"); }

    std::vector<TaskSpec> out;
    std::set<std::string> seen;
    int opaque_emitted = 0;
    const std::string tag = std::string(kDomainNames[static_cast<size_t>(domain)]) + "/" +
                            std::string(kSplitNames[static_cast<size_t>(split)]);
    for (int i = 0; i < count; ++i) {
        // Deterministic fractional-accumulator quota for opaque tasks.
        const bool opaque = static_cast<int>(static_cast<double>(i + 1) * options.opaque_fraction) -
                                static_cast<int>(static_cast<double>(i) * options.opaque_fraction) >
                            0;
        bool placed = false;
        for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
            Rng rng(derive_seed(seed, tag + "#" + std::to_string(i), static_cast<uint64_t>(attempt)));
            Draft d;
            switch (domain) {
                case Domain::files: d = draft_files(rng); break;
                case Domain::dirs: d = draft_dirs(rng); break;
                case Domain::nav: d = draft_nav(rng); break;
                case Domain::archive: d = draft_archive(rng); break;
            }
            if (!draft_valid(d)) { continue; }
            std::string sig = signature(d);
            if (seen.count(sig)) { continue; }

            TaskSpec task;
            task.id = tag + "#" + std::to_string(i);
            task.domain = domain;
            task.split = split;
            task.init = d.init;
            task.evaluator = d.goals;
            task.opaque = opaque;
            task.instruction = build_instruction(rng, d, opaque);

            // Nothing may fall off the vocabulary cap, and the scripted
            // solution must exist, fit the budget, and use only legal actions.
            std::set<std::string> all_paths;
            for (const auto& t : task.instruction) {
                if (is_valid_path(t)) { all_paths.insert(t); }
            }
            for (const auto& e : task.init) { all_paths.insert(e.path); }
            for (const auto& g : task.evaluator) { all_paths.insert(g.path); }
            if (all_paths.size() > static_cast<size_t>(kMaxPathVocab)) { continue; }

            auto plan = plan_solution(task);
            if (!plan) { continue; }
            const auto legal = legal_actions(task, Observation{});
            bool all_legal = true;
            for (const Action& a : *plan) {
                if (std::find(legal.begin(), legal.end(), a) == legal.end()) { all_legal = false; break; }
            }
            if (!all_legal) { continue; }

            seen.insert(sig);
            out.push_back(std::move(task));
            if (opaque) { ++opaque_emitted; }
            placed = true;
            break;
        }
        if (!placed) {
            throw std::runtime_error("task generation exhausted attempts for " + tag);
        }
    }
    (void)opaque_emitted;
    return out;
}

}  // namespace dynaplan
