#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dynaplan/traces.hpp"
#include "dynaplan/worldsim.hpp"

namespace dynaplan {

// ---------------------------------------------------------------------------
// One parameter store, four linear heads over shared hashed features:
// a policy head, ten transition heads (one per effect atom), and a two-way
// critique-verdict head. Everything is deterministic given the hash seed.
// ---------------------------------------------------------------------------

struct FeatureVector {
    // Sorted by index, duplicates merged by summing values.
    std::vector<std::pair<uint32_t, double>> items;
};

struct WeightBlock {
    std::vector<double> w;  // dense, dim entries
};

constexpr uint32_t kDefaultDim = 1u << 16;
constexpr uint64_t kDefaultHashSeed = 42;

struct CogParams {
    uint32_t dim = kDefaultDim;
    uint64_t hash_seed = kDefaultHashSeed;
    uint64_t version = 0;
    WeightBlock policy_w;
    std::array<WeightBlock, kNumEffectAtoms> trans_w;
    std::array<WeightBlock, 2> critic_w;  // scores for {yes, wait}
};

CogParams make_params(uint32_t dim = kDefaultDim, uint64_t hash_seed = kDefaultHashSeed);

// Independent world-model store for the classic-Dyna baseline; never aliases
// a CogParams.
struct SeparateWM {
    uint32_t dim = kDefaultDim;
    uint64_t hash_seed = kDefaultHashSeed;
    uint64_t version = 0;
    std::array<WeightBlock, kNumEffectAtoms> trans_w;
};

SeparateWM make_separate_wm(uint32_t dim = kDefaultDim, uint64_t hash_seed = kDefaultHashSeed);

// --- featurization -----------------------------------------------------------

class Featurizer {
public:
    Featurizer(uint32_t dim, uint64_t hash_seed) : dim_(dim), hash_seed_(hash_seed) {}

    FeatureVector features(const TaskSpec& task, const Observation& obs, const Action& action) const;
    // Adds the predicted-simulation atoms on top of the base features; input
    // to the critique-verdict head.
    FeatureVector critic_features(const TaskSpec& task, const Observation& obs, const Action& action,
                                  EffectSet predicted) const;

private:
    uint32_t dim_;
    uint64_t hash_seed_;
};

// --- heads ---------------------------------------------------------------------

double dot(const WeightBlock& w, const FeatureVector& fv);

std::vector<double> policy_logits(const CogParams& params, const TaskSpec& task, const Observation& obs,
                                  const std::vector<Action>& actions);

// Thresholded independent sigmoids with the NoChange consistency repair: when
// NoChange and a mutation atom are both predicted, the lower-scored side is
// dropped.
EffectSet predict_effects(const CogParams& params, const TaskSpec& task, const Observation& obs,
                          const Action& action);
EffectSet predict_effects(const SeparateWM& wm, const TaskSpec& task, const Observation& obs,
                          const Action& action);

// --- losses --------------------------------------------------------------------

struct SparseGrad {
    std::unordered_map<uint32_t, double> g;
    void add(const FeatureVector& fv, double coeff);
    bool finite() const;
    bool empty() const { return g.empty(); }
};

struct CogGrad {
    SparseGrad policy;
    std::array<SparseGrad, kNumEffectAtoms> trans;
    std::array<SparseGrad, 2> critic;
    bool finite() const;
};

struct LossGrad {
    double loss = 0.0;
    CogGrad grad;
};

// Summed cross-entropy world-model loss; the exact terms depend on the sample
// variant (effect-atom sigmoids, plus output-class/cwd fields for next_state,
// plus the verdict head for critique). Every sample in a batch must share one
// variant and carry a resolved task pointer.
LossGrad lm_loss_and_grad(const CogParams& params, const std::vector<WMSample>& batch);

struct PolicyExample {
    std::shared_ptr<const TaskSpec> task;
    Observation obs;
    Action action;
    double reward = 1.0;  // R ∈ {0, 1}
    uint64_t seed = 0;
    int step = 0;
};

// REINFORCE with terminal reward: sum_t R * (-log pi(a_t | o_t)). For binary
// R this is exactly behavior cloning on the R=1 steps.
LossGrad policy_loss_and_grad(const CogParams& params, const std::vector<PolicyExample>& batch);

// params ← params − lr·grad, version+1. Non-finite gradients throw and leave
// params untouched.
void sgd_step(CogParams& params, const CogGrad& grad, double lr);
void sgd_step(SeparateWM& wm, const CogGrad& grad, double lr);  // transition heads only

// World-model loss against a SeparateWM (same objective, μ's heads).
LossGrad lm_loss_and_grad(const SeparateWM& wm, const std::vector<WMSample>& batch);

// Content hash of all weights; detects any parameter mutation.
uint64_t weights_hash(const CogParams& params);
uint64_t trans_weights_hash(const CogParams& params);
uint64_t weights_hash(const SeparateWM& wm);

}  // namespace dynaplan
