#include "dynaplan/cogmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "dynaplan/hashing.hpp"

namespace dynaplan {

CogParams make_params(uint32_t dim, uint64_t hash_seed) {
    if (dim == 0) { throw std::invalid_argument("zero feature dimension"); }
    CogParams p;
    p.dim = dim;
    p.hash_seed = hash_seed;
    p.policy_w.w.assign(dim, 0.0);
    for (auto& b : p.trans_w) { b.w.assign(dim, 0.0); }
    for (auto& b : p.critic_w) { b.w.assign(dim, 0.0); }
    return p;
}

SeparateWM make_separate_wm(uint32_t dim, uint64_t hash_seed) {
    SeparateWM wm;
    wm.dim = dim;
    wm.hash_seed = hash_seed;
    for (auto& b : wm.trans_w) { b.w.assign(dim, 0.0); }
    return wm;
}

// --- featurization -----------------------------------------------------------

namespace {

struct KeyCollector {
    uint32_t dim;
    uint64_t seed;
    std::vector<std::pair<uint32_t, double>> items;

    void key(const std::string& k) {
        items.emplace_back(static_cast<uint32_t>(fnv1a64(k, seed) % dim), 1.0);
    }
};

}  // namespace

FeatureVector Featurizer::features(const TaskSpec& task, const Observation& obs,
                                   const Action& action) const {
    KeyCollector c{dim_, hash_seed_, {}};
    c.items.reserve(64);

    const std::string verb(kVerbNames[static_cast<size_t>(action.verb)]);
    const std::string dom(kDomainNames[static_cast<size_t>(task.domain)]);
    const char* out_cls = obs.last_output.cls == OutputClass::listing ? "listing"
                          : obs.last_output.cls == OutputClass::error ? "error"
                                                                      : "empty";
    c.key("B");
    c.key("V|" + verb);
    c.key("DOM|" + dom);
    c.key("O|" + std::string(out_cls));
    c.key("V.O|" + verb + "|" + out_cls);

    const bool two_paths = action.verb == Verb::cp_v || action.verb == Verb::mv_v;
    const bool has_arg1 = !action.arg1.empty();
    std::string s1, p1, s2, p2;
    if (has_arg1) {
        s1 = path_status(action.arg1, obs);
        p1 = path_status(parent_of(action.arg1), obs);
        c.key("S1|" + s1);
        c.key("V.S1|" + verb + "|" + s1);
        c.key("P1|" + p1);
        c.key("V.P1|" + verb + "|" + p1);
        c.key("V.S1.P1|" + verb + "|" + s1 + "|" + p1);
    }
    if (two_paths) {
        s2 = path_status(action.arg2, obs);
        p2 = path_status(parent_of(action.arg2), obs);
        c.key("S2|" + s2);
        c.key("V.S2|" + verb + "|" + s2);
        c.key("P2|" + p2);
        c.key("V.P2|" + verb + "|" + p2);
        c.key("V.S1.S2|" + verb + "|" + s1 + "|" + s2);
        c.key("V.S2.P2|" + verb + "|" + s2 + "|" + p2);
    }
    if (action.verb == Verb::write_v) {
        c.key("TK|" + action.arg2);
        c.key("V.TK|" + verb + "|" + action.arg2);
    }

    // Instruction conditioning: raw tokens, plus (preceding-token, arg-slot)
    // pairs that tie rendered goal phrases to the action's arguments.
    const auto& ins = task.instruction;
    for (const std::string& t : ins) { c.key("I|" + t); }
    bool a1_in = false, a2_in = false;
    for (size_t j = 0; j < ins.size(); ++j) {
        if (has_arg1 && ins[j] == action.arg1) {
            a1_in = true;
            if (j > 0) {
                c.key("G|" + ins[j - 1] + "|A1");
                c.key("V.G|" + verb + "|" + ins[j - 1] + "|A1");
            }
        }
        if (two_paths && ins[j] == action.arg2) {
            a2_in = true;
            if (j > 0) {
                c.key("G|" + ins[j - 1] + "|A2");
                c.key("V.G|" + verb + "|" + ins[j - 1] + "|A2");
            }
        }
        if (action.verb == Verb::write_v && j + 2 < ins.size() && ins[j] == "content" &&
            ins[j + 1] == action.arg1 && ins[j + 2] == action.arg2) {
            c.key("GC|content-match");
            c.key("V.GC|" + verb + "|content-match");
        }
    }
    if (a1_in) { c.key("A1IN"); }
    if (a2_in) { c.key("A2IN"); }

    std::sort(c.items.begin(), c.items.end());
    FeatureVector fv;
    fv.items.reserve(c.items.size());
    for (const auto& [idx, v] : c.items) {
        if (!fv.items.empty() && fv.items.back().first == idx) {
            fv.items.back().second += v;
        } else {
            fv.items.emplace_back(idx, v);
        }
    }
    return fv;
}

FeatureVector Featurizer::critic_features(const TaskSpec& task, const Observation& obs,
                                          const Action& action, EffectSet predicted) const {
    FeatureVector base = features(task, obs, action);
    KeyCollector c{dim_, hash_seed_, {}};
    const std::string verb(kVerbNames[static_cast<size_t>(action.verb)]);
    for (EffectAtom a : predicted.atoms()) {
        const std::string name(kEffectAtomNames[static_cast<size_t>(a)]);
        c.key("C|" + name);
        c.key("C.V|" + verb + "|" + name);
    }
    c.key("CN|" + std::to_string(predicted.count()));
    for (const auto& item : c.items) { base.items.push_back(item); }
    std::sort(base.items.begin(), base.items.end());
    FeatureVector fv;
    for (const auto& [idx, v] : base.items) {
        if (!fv.items.empty() && fv.items.back().first == idx) {
            fv.items.back().second += v;
        } else {
            fv.items.emplace_back(idx, v);
        }
    }
    return fv;
}

// --- heads ---------------------------------------------------------------------

double dot(const WeightBlock& w, const FeatureVector& fv) {
    double s = 0.0;
    for (const auto& [idx, v] : fv.items) { s += w.w[idx] * v; }
    return s;
}

std::vector<double> policy_logits(const CogParams& params, const TaskSpec& task, const Observation& obs,
                                  const std::vector<Action>& actions) {
    if (actions.empty()) { throw std::invalid_argument("empty action list"); }
    Featurizer f(params.dim, params.hash_seed);
    std::vector<double> out;
    out.reserve(actions.size());
    for (const Action& a : actions) { out.push_back(dot(params.policy_w, f.features(task, obs, a))); }
    return out;
}

namespace {

EffectSet thresholded_effects(const std::array<WeightBlock, kNumEffectAtoms>& heads,
                              const FeatureVector& fv) {
    std::array<double, kNumEffectAtoms> score{};
    EffectSet set;
    for (int k = 0; k < kNumEffectAtoms; ++k) {
        score[static_cast<size_t>(k)] = dot(heads[static_cast<size_t>(k)], fv);
        if (score[static_cast<size_t>(k)] > 0.0) { set.add(static_cast<EffectAtom>(k)); }
    }
    // Consistency repair: NoChange and mutation atoms are contradictory; keep
    // whichever side scored higher.
    if (set.has(EffectAtom::no_change) && !(set & kMutationAtoms).empty()) {
        double best_mut = -1e300;
        for (EffectAtom a : (set & kMutationAtoms).atoms()) {
            best_mut = std::max(best_mut, score[static_cast<size_t>(a)]);
        }
        if (score[static_cast<size_t>(EffectAtom::no_change)] >= best_mut) {
            for (EffectAtom a : (set & kMutationAtoms).atoms()) { set.remove(a); }
        } else {
            set.remove(EffectAtom::no_change);
        }
    }
    return set;
}

}  // namespace

EffectSet predict_effects(const CogParams& params, const TaskSpec& task, const Observation& obs,
                          const Action& action) {
    Featurizer f(params.dim, params.hash_seed);
    return thresholded_effects(params.trans_w, f.features(task, obs, action));
}

EffectSet predict_effects(const SeparateWM& wm, const TaskSpec& task, const Observation& obs,
                          const Action& action) {
    Featurizer f(wm.dim, wm.hash_seed);
    return thresholded_effects(wm.trans_w, f.features(task, obs, action));
}

// --- losses --------------------------------------------------------------------

void SparseGrad::add(const FeatureVector& fv, double coeff) {
    if (coeff == 0.0) { return; }
    for (const auto& [idx, v] : fv.items) { g[idx] += coeff * v; }
}

bool SparseGrad::finite() const {
    for (const auto& [idx, v] : g) {
        (void)idx;
        if (!std::isfinite(v)) { return false; }
    }
    return true;
}

bool CogGrad::finite() const {
    if (!policy.finite()) { return false; }
    for (const auto& t : trans) {
        if (!t.finite()) { return false; }
    }
    return critic[0].finite() && critic[1].finite();
}

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double logsumexp(const std::vector<double>& xs) {
    double m = *std::max_element(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) { s += std::exp(x - m); }
    return m + std::log(s);
}

// Per-atom binary cross-entropy against `target`, accumulated into `heads`.
void atoms_bce(const std::array<WeightBlock, kNumEffectAtoms>& w,
               std::array<SparseGrad, kNumEffectAtoms>& heads, const FeatureVector& fv,
               EffectSet target, double& loss) {
    for (int k = 0; k < kNumEffectAtoms; ++k) {
        const double s = dot(w[static_cast<size_t>(k)], fv);
        const double y = target.has(static_cast<EffectAtom>(k)) ? 1.0 : 0.0;
        loss += softplus(s) - y * s;
        heads[static_cast<size_t>(k)].add(fv, sigmoid(s) - y);
    }
}

bool sample_trainable(const WMSample& s) {
    if (s.variant != WmVariant::critique) { return true; }
    // The injected record's mask marks the trainable content; all-false masks
    // contribute nothing.
    if (!s.critique || !s.injected || !s.injected->mask) { return false; }
    for (bool b : *s.injected->mask) {
        if (b) { return true; }
    }
    return false;
}

template <typename Store>
LossGrad wm_loss_impl(const Store& store, const std::array<WeightBlock, kNumEffectAtoms>& trans,
                      const WeightBlock* critic_yes, const WeightBlock* critic_wait,
                      const std::vector<WMSample>& batch) {
    if (batch.empty()) { throw std::invalid_argument("empty world-model batch"); }
    const WmVariant variant = batch[0].variant;
    for (const WMSample& s : batch) {
        if (s.variant != variant) { throw std::invalid_argument("mixed-variant world-model batch"); }
        if (!s.task) { throw std::invalid_argument("world-model sample without resolved task"); }
    }
    Featurizer f(store.dim, store.hash_seed);
    LossGrad out;
    for (const WMSample& s : batch) {
        if (!sample_trainable(s)) { continue; }
        const FeatureVector fv = f.features(*s.task, s.obs, s.action);
        atoms_bce(trans, out.grad.trans, fv, s.target_effects, out.loss);
        if (variant == WmVariant::next_state) {
            // Rendered next-observation fields: output class as a 3-way
            // softmax over the output-atom heads, cwd as an extra sigmoid.
            static constexpr std::array<EffectAtom, 3> kOut = {
                EffectAtom::output_listing, EffectAtom::output_error, EffectAtom::output_empty};
            std::vector<double> scores(3);
            for (int k = 0; k < 3; ++k) {
                scores[static_cast<size_t>(k)] =
                    dot(trans[static_cast<size_t>(kOut[static_cast<size_t>(k)])], fv);
            }
            const int truth = static_cast<int>(s.next_output);
            const double lse = logsumexp(scores);
            out.loss += lse - scores[static_cast<size_t>(truth)];
            for (int k = 0; k < 3; ++k) {
                const double p = std::exp(scores[static_cast<size_t>(k)] - lse);
                out.grad.trans[static_cast<size_t>(kOut[static_cast<size_t>(k)])].add(
                    fv, p - (k == truth ? 1.0 : 0.0));
            }
            const size_t cwd_head = static_cast<size_t>(EffectAtom::cwd_set_arg1);
            const double sc = dot(trans[cwd_head], fv);
            const double y = s.cwd_changed ? 1.0 : 0.0;
            out.loss += softplus(sc) - y * sc;
            out.grad.trans[cwd_head].add(fv, sigmoid(sc) - y);
        } else if (variant == WmVariant::critique) {
            const FeatureVector fc = f.critic_features(*s.task, s.obs, s.action, s.predicted_sim);
            std::vector<double> scores = {dot(*critic_yes, fc), dot(*critic_wait, fc)};
            const int truth = s.critique->wait ? 1 : 0;
            const double lse = logsumexp(scores);
            out.loss += lse - scores[static_cast<size_t>(truth)];
            out.grad.critic[0].add(fc, std::exp(scores[0] - lse) - (truth == 0 ? 1.0 : 0.0));
            out.grad.critic[1].add(fc, std::exp(scores[1] - lse) - (truth == 1 ? 1.0 : 0.0));
        }
    }
    return out;
}

}  // namespace

LossGrad lm_loss_and_grad(const CogParams& params, const std::vector<WMSample>& batch) {
    return wm_loss_impl(params, params.trans_w, &params.critic_w[0], &params.critic_w[1], batch);
}

LossGrad lm_loss_and_grad(const SeparateWM& wm, const std::vector<WMSample>& batch) {
    if (!batch.empty() && batch[0].variant == WmVariant::critique) {
        throw std::invalid_argument("separate world model has no critique head");
    }
    return wm_loss_impl(wm, wm.trans_w, nullptr, nullptr, batch);
}

LossGrad policy_loss_and_grad(const CogParams& params, const std::vector<PolicyExample>& batch) {
    Featurizer f(params.dim, params.hash_seed);
    LossGrad out;
    for (const PolicyExample& ex : batch) {
        if (ex.reward != 0.0 && ex.reward != 1.0) {
            throw std::invalid_argument("policy reward must be 0 or 1");
        }
        if (ex.reward == 0.0) { continue; }
        if (!ex.task) { throw std::invalid_argument("policy example without resolved task"); }
        const std::vector<Action> legal = legal_actions(*ex.task, ex.obs);
        size_t chosen = legal.size();
        for (size_t i = 0; i < legal.size(); ++i) {
            if (legal[i] == ex.action) { chosen = i; break; }
        }
        if (chosen == legal.size()) {
            throw std::invalid_argument("policy example action outside the legal set: " +
                                        action_to_string(ex.action));
        }
        std::vector<FeatureVector> fvs;
        fvs.reserve(legal.size());
        std::vector<double> logits;
        logits.reserve(legal.size());
        for (const Action& a : legal) {
            fvs.push_back(f.features(*ex.task, ex.obs, a));
            logits.push_back(dot(params.policy_w, fvs.back()));
        }
        const double lse = logsumexp(logits);
        out.loss += ex.reward * (lse - logits[chosen]);
        for (size_t i = 0; i < legal.size(); ++i) {
            const double p = std::exp(logits[i] - lse);
            out.grad.policy.add(fvs[i], ex.reward * (p - (i == chosen ? 1.0 : 0.0)));
        }
    }
    return out;
}

namespace {

void apply_sparse(WeightBlock& w, const SparseGrad& g, double lr, uint32_t dim) {
    for (const auto& [idx, v] : g.g) {
        if (idx >= dim) { throw std::out_of_range("gradient index out of range"); }
        w.w[idx] -= lr * v;
    }
}

}  // namespace

void sgd_step(CogParams& params, const CogGrad& grad, double lr) {
    if (lr <= 0.0) { throw std::invalid_argument("learning rate must be positive"); }
    if (!grad.finite()) { throw std::invalid_argument("non-finite gradient"); }
    apply_sparse(params.policy_w, grad.policy, lr, params.dim);
    for (int k = 0; k < kNumEffectAtoms; ++k) {
        apply_sparse(params.trans_w[static_cast<size_t>(k)], grad.trans[static_cast<size_t>(k)], lr,
                     params.dim);
    }
    apply_sparse(params.critic_w[0], grad.critic[0], lr, params.dim);
    apply_sparse(params.critic_w[1], grad.critic[1], lr, params.dim);
    ++params.version;
}

void sgd_step(SeparateWM& wm, const CogGrad& grad, double lr) {
    if (lr <= 0.0) { throw std::invalid_argument("learning rate must be positive"); }
    if (!grad.finite()) { throw std::invalid_argument("non-finite gradient"); }
    for (int k = 0; k < kNumEffectAtoms; ++k) {
        apply_sparse(wm.trans_w[static_cast<size_t>(k)], grad.trans[static_cast<size_t>(k)], lr, wm.dim);
    }
    ++wm.version;
}

// --- hashing ---------------------------------------------------------------------

namespace {

uint64_t hash_block(uint64_t h, const WeightBlock& b) {
    for (double d : b.w) {
        uint64_t bits;
        std::memcpy(&bits, &d, sizeof(bits));
        h ^= bits;
        h *= kFnvPrime;
    }
    return h;
}

}  // namespace

uint64_t weights_hash(const CogParams& params) {
    uint64_t h = fnv1a64("cogparams", params.hash_seed) ^ params.dim;
    h = hash_block(h, params.policy_w);
    for (const auto& b : params.trans_w) { h = hash_block(h, b); }
    for (const auto& b : params.critic_w) { h = hash_block(h, b); }
    return h;
}

uint64_t trans_weights_hash(const CogParams& params) {
    uint64_t h = fnv1a64("trans", params.hash_seed) ^ params.dim;
    for (const auto& b : params.trans_w) { h = hash_block(h, b); }
    return h;
}

uint64_t weights_hash(const SeparateWM& wm) {
    uint64_t h = fnv1a64("separatewm", wm.hash_seed) ^ wm.dim;
    for (const auto& b : wm.trans_w) { h = hash_block(h, b); }
    return h;
}

}  // namespace dynaplan
