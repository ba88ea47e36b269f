#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plra/adapter.hpp"
#include "plra/rng.hpp"

namespace plra::ops {

// The complete operator catalog: six mutations, nine crossovers, two
// identity/average controls. Every operator maps rank-r parents to a
// rank-r child on the same slot layout, with no retraining.
enum class OperatorId {
    m1_svd,
    m2_layer_gauss,
    m3_component_mask,
    m4_full_gauss,
    m5_neftune,
    m6_rank_perturb,
    copy_parent,
    x1_dare,
    x2_layerwise,
    x3_svd_subspace,
    x4_extrapolative,
    x5_linear,
    x6_ties,
    x7_della,
    x8_slerp,
    x9_fisher,
    linear_0_5,
};

const char* to_string(OperatorId id);
OperatorId operator_from_string(const std::string& name);  // throws on unknown name
int operator_arity(OperatorId id);                         // 1 or 2
bool operator_uses_rng(OperatorId id);
std::vector<OperatorId> all_operators();
// The subset active inside the training loop.
std::vector<OperatorId> live_operators();

struct OperatorParams {
    float m1_eps = 0.1f;       // spectrum log-normal scale and Cayley rotation strength
    float m2_eps = 0.1f;       // layer-selective noise scale
    float m2_frac = 0.33f;     // fraction of slots perturbed
    float m3_rho = 0.3f;       // fraction of singular components zeroed
    float m4_eps = 0.15f;      // full-adapter noise scale
    float m5_alpha = 10.0f;    // uniform bound numerator, per-element alpha/sqrt(L*d)
    int m6_k = 2;              // bottom singular values zeroed
    float m6_sigma = 0.05f;    // multiplicative jitter on survivors
    float dare_p = 0.7f;       // drop probability
    float ties_tau = 0.2f;     // trim fraction
    float della_eps = 0.1f;    // drop probability of the largest element
    float slerp_t = 0.5f;      // interpolation parameter
    float eta_min = 1.0f;      // extrapolation range
    float eta_max = 1.5f;
    float lin_alpha = 0.5f;    // convex combination weight on parent 1
    int x3_k = -1;             // subspace split override; -1 draws Uniform{1..r-1}
};

AdapterState m1_svd(const AdapterState& parent, const OperatorParams& p, RngStream& rng);
AdapterState m2_layer_gauss(const AdapterState& parent, const OperatorParams& p, RngStream& rng);
AdapterState m3_component_mask(const AdapterState& parent, const OperatorParams& p, RngStream& rng);
AdapterState m4_full_gauss(const AdapterState& parent, const OperatorParams& p, RngStream& rng);
AdapterState m5_neftune(const AdapterState& parent, const OperatorParams& p, RngStream& rng);
AdapterState m6_rank_perturb(const AdapterState& parent, const OperatorParams& p, RngStream& rng);
AdapterState copy_parent(const AdapterState& parent);
AdapterState x1_dare(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p, RngStream& rng);
AdapterState x2_layerwise(const AdapterState& p1, const AdapterState& p2, RngStream& rng);
AdapterState x3_svd_subspace(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p, RngStream& rng);
AdapterState x4_extrapolative(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p, RngStream& rng);
AdapterState x5_linear(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p);
AdapterState x6_ties(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p);
AdapterState x7_della(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p, RngStream& rng);
AdapterState x8_slerp(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p);
AdapterState x9_fisher(const AdapterState& p1, const AdapterState& p2);
AdapterState linear_0_5(const AdapterState& p1, const AdapterState& p2);

struct Provenance {
    std::string op;
    uint64_t seed = 0;
    std::vector<std::string> parents;
};

// Registry dispatch. One child consumes exactly one seed; the seed and the
// parent ids are recorded in the returned provenance.
struct OpChild {
    AdapterState state;
    Provenance provenance;
};
OpChild apply_operator(OperatorId id,
                       const std::vector<const AdapterState*>& parents,
                       const std::vector<std::string>& parent_ids,
                       const OperatorParams& params,
                       uint64_t seed);

}  // namespace plra::ops
