#include "plra/evo_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace plra::ops {

namespace {

struct OperatorInfo {
    OperatorId id;
    const char* name;
    int arity;
    bool uses_rng;
};

constexpr OperatorInfo kCatalog[] = {
    {OperatorId::m1_svd, "m1_svd", 1, true},
    {OperatorId::m2_layer_gauss, "m2_layer_gauss", 1, true},
    {OperatorId::m3_component_mask, "m3_component_mask", 1, true},
    {OperatorId::m4_full_gauss, "m4_full_gauss", 1, true},
    {OperatorId::m5_neftune, "m5_neftune", 1, true},
    {OperatorId::m6_rank_perturb, "m6_rank_perturb", 1, true},
    {OperatorId::copy_parent, "copy_parent", 1, false},
    {OperatorId::x1_dare, "x1_dare", 2, true},
    {OperatorId::x2_layerwise, "x2_layerwise", 2, true},
    {OperatorId::x3_svd_subspace, "x3_svd_subspace", 2, true},
    {OperatorId::x4_extrapolative, "x4_extrapolative", 2, true},
    {OperatorId::x5_linear, "x5_linear", 2, false},
    {OperatorId::x6_ties, "x6_ties", 2, false},
    {OperatorId::x7_della, "x7_della", 2, true},
    {OperatorId::x8_slerp, "x8_slerp", 2, false},
    {OperatorId::x9_fisher, "x9_fisher", 2, false},
    {OperatorId::linear_0_5, "linear_0_5", 2, false},
};

const OperatorInfo& info(OperatorId id) {
    for (const auto& e : kCatalog) {
        if (e.id == id) {
            return e;
        }
    }
    throw std::invalid_argument("unknown operator id");
}

// ceil(frac * n) with a guard against float params like 0.3f landing a hair
// above their decimal value (f32 rounding error reaches ~1e-7 * n).
int ceil_count(double frac, int n) {
    return static_cast<int>(std::ceil(frac * n - 1e-5));
}

void check_parents(const AdapterState& p1, const AdapterState& p2) {
    if (!same_layout(p1, p2)) {
        throw std::invalid_argument("operator parents have mismatched slot layout");
    }
}

// Elementwise combine of two adapters into a fresh child.
template <typename F>
AdapterState combine_elementwise(const AdapterState& p1, const AdapterState& p2, F f) {
    check_parents(p1, p2);
    AdapterState child = p1;
    for (size_t si = 0; si < child.slots.size(); ++si) {
        FactorPair& cp = child.slots[si].second;
        const FactorPair& q = p2.slots[si].second;
        for (size_t i = 0; i < cp.a.data.size(); ++i) {
            cp.a.data[i] = f(cp.a.data[i], q.a.data[i]);
        }
        for (size_t i = 0; i < cp.b.data.size(); ++i) {
            cp.b.data[i] = f(cp.b.data[i], q.b.data[i]);
        }
    }
    return child;
}

// DARE drop-and-rescale on a single tensor, in place.
void dare_process(Tensor2D& t, double p, RngStream& rng) {
    if (p <= 0.0) {
        return;  // keep everything, unit rescale
    }
    if (p >= 1.0) {
        std::fill(t.data.begin(), t.data.end(), 0.0f);
        return;
    }
    const float rescale = static_cast<float>(1.0 / (1.0 - p));
    for (float& v : t.data) {
        if (rng.bernoulli(p)) {
            v = 0.0f;
        } else {
            v *= rescale;
        }
    }
}

// Magnitude-descending ranks with stable index tie-break: rank 0 is the
// largest element.
std::vector<int> magnitude_ranks(const Tensor2D& t) {
    const int n = static_cast<int>(t.data.size());
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return std::fabs(t.data[static_cast<size_t>(x)]) > std::fabs(t.data[static_cast<size_t>(y)]);
    });
    std::vector<int> rank(static_cast<size_t>(n));
    for (int r = 0; r < n; ++r) {
        rank[static_cast<size_t>(order[static_cast<size_t>(r)])] = r;
    }
    return rank;
}

void della_process(Tensor2D& t, double eps, RngStream& rng) {
    const int n = static_cast<int>(t.data.size());
    const std::vector<int> rank = magnitude_ranks(t);
    for (int i = 0; i < n; ++i) {
        // Single-element tensors have no rank spread; drop probability is eps.
        const double frac = n > 1 ? static_cast<double>(rank[static_cast<size_t>(i)]) / static_cast<double>(n - 1) : 0.0;
        const double p = eps + (1.0 - eps) * frac;
        const bool keep = !rng.bernoulli(p);
        if (!keep || p >= 1.0) {
            t.data[static_cast<size_t>(i)] = 0.0f;
        } else {
            t.data[static_cast<size_t>(i)] = static_cast<float>(t.data[static_cast<size_t>(i)] / (1.0 - p));
        }
    }
}

void ties_merge_tensor(Tensor2D& out, const Tensor2D& t1, const Tensor2D& t2, double tau) {
    const int n = static_cast<int>(t1.data.size());
    const int trim = static_cast<int>(std::floor(tau * static_cast<double>(n)));

    auto trimmed = [&](const Tensor2D& t) {
        Tensor2D c = t;
        const std::vector<int> rank = magnitude_ranks(t);
        for (int i = 0; i < n; ++i) {
            if (rank[static_cast<size_t>(i)] >= n - trim) {
                c.data[static_cast<size_t>(i)] = 0.0f;
            }
        }
        return c;
    };
    const Tensor2D c1 = trimmed(t1);
    const Tensor2D c2 = trimmed(t2);

    for (int i = 0; i < n; ++i) {
        const float v1 = c1.data[static_cast<size_t>(i)];
        const float v2 = c2.data[static_cast<size_t>(i)];
        const float sum = v1 + v2;
        // sign(0) elects 0: exactly cancelling positions output zero.
        const int elected = sum > 0.0f ? 1 : (sum < 0.0f ? -1 : 0);
        if (elected == 0) {
            out.data[static_cast<size_t>(i)] = 0.0f;
            continue;
        }
        double acc = 0.0;
        int agree = 0;
        for (float v : {v1, v2}) {
            const int sgn = v > 0.0f ? 1 : (v < 0.0f ? -1 : 0);
            if (sgn == elected) {
                acc += v;
                ++agree;
            }
        }
        out.data[static_cast<size_t>(i)] = agree > 0 ? static_cast<float>(acc / agree) : 0.0f;
    }
}

void slerp_tensor(Tensor2D& out, const Tensor2D& t1, const Tensor2D& t2, double t) {
    const size_t n = t1.data.size();
    double na2 = 0.0, nb2 = 0.0, dot = 0.0;
    for (size_t i = 0; i < n; ++i) {
        na2 += static_cast<double>(t1.data[i]) * t1.data[i];
        nb2 += static_cast<double>(t2.data[i]) * t2.data[i];
        dot += static_cast<double>(t1.data[i]) * t2.data[i];
    }
    const double na = std::sqrt(na2);
    const double nb = std::sqrt(nb2);

    auto lerp = [&]() {
        for (size_t i = 0; i < n; ++i) {
            out.data[i] = static_cast<float>((1.0 - t) * t1.data[i] + t * t2.data[i]);
        }
    };
    if (na < 1e-8 || nb < 1e-8) {
        lerp();
        return;
    }
    const double cos_theta = std::clamp(dot / (na * nb), -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    const double sin_theta = std::sin(theta);
    if (std::fabs(sin_theta) < 1e-6) {
        lerp();
        return;
    }
    const double w1 = std::sin((1.0 - t) * theta) / sin_theta;
    const double w2 = std::sin(t * theta) / sin_theta;
    for (size_t i = 0; i < n; ++i) {
        out.data[i] = static_cast<float>(w1 * t1.data[i] + w2 * t2.data[i]);
    }
}

// Re-sort a triple descending by singular value, permuting u/v columns.
void sort_triple(SvdTriple& t) {
    const int r = static_cast<int>(t.s.size());
    std::vector<int> order(static_cast<size_t>(r));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return t.s[static_cast<size_t>(x)] > t.s[static_cast<size_t>(y)];
    });
    SvdTriple sorted;
    sorted.s.resize(static_cast<size_t>(r));
    sorted.u = Tensor2D(t.u.rows, r);
    sorted.v = Tensor2D(t.v.rows, r);
    for (int jj = 0; jj < r; ++jj) {
        const int j = order[static_cast<size_t>(jj)];
        sorted.s[static_cast<size_t>(jj)] = t.s[static_cast<size_t>(j)];
        for (int i = 0; i < t.u.rows; ++i) {
            sorted.u.at(i, jj) = t.u.at(i, j);
        }
        for (int i = 0; i < t.v.rows; ++i) {
            sorted.v.at(i, jj) = t.v.at(i, j);
        }
    }
    t = std::move(sorted);
}

// u <- u * (I + eps * K) with K = (M - M^T)/2, M ~ N(0, I_{r x r}).
void cayley_rotate(Tensor2D& u, float eps, RngStream& rng) {
    const int r = u.cols;
    Tensor2D m(r, r);
    for (float& v : m.data) {
        v = static_cast<float>(rng.normal());
    }
    Tensor2D rot(r, r);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
            const float k = 0.5f * (m.at(i, j) - m.at(j, i));
            rot.at(i, j) = (i == j ? 1.0f : 0.0f) + eps * k;
        }
    }
    u = matmul(u, rot);
}

}  // namespace

const char* to_string(OperatorId id) {
    return info(id).name;
}

OperatorId operator_from_string(const std::string& name) {
    for (const auto& e : kCatalog) {
        if (name == e.name) {
            return e.id;
        }
    }
    throw std::invalid_argument("unknown operator: " + name);
}

int operator_arity(OperatorId id) {
    return info(id).arity;
}

bool operator_uses_rng(OperatorId id) {
    return info(id).uses_rng;
}

std::vector<OperatorId> all_operators() {
    std::vector<OperatorId> out;
    for (const auto& e : kCatalog) {
        out.push_back(e.id);
    }
    return out;
}

std::vector<OperatorId> live_operators() {
    return {OperatorId::m1_svd, OperatorId::m2_layer_gauss, OperatorId::m3_component_mask,
            OperatorId::m4_full_gauss, OperatorId::x1_dare, OperatorId::x2_layerwise,
            OperatorId::x3_svd_subspace, OperatorId::x4_extrapolative};
}

AdapterState m1_svd(const AdapterState& parent, const OperatorParams& p, RngStream& rng) {
    AdapterState child = parent;
    for (auto& [name, pair] : child.slots) {
        SvdTriple t = svd_of_delta(pair);
        // Spectrum noise first, then near-identity rotations.
        for (float& sv : t.s) {
            sv = static_cast<float>(sv * std::exp(static_cast<double>(p.m1_eps) * rng.normal()));
        }
        cayley_rotate(t.u, p.m1_eps, rng);
        cayley_rotate(t.v, p.m1_eps, rng);
        sort_triple(t);
        pair = refactor_balanced(t);
    }
    return child;
}

AdapterState m2_layer_gauss(const AdapterState& parent, const OperatorParams& p, RngStream& rng) {
    AdapterState child = parent;
    const int n_slots = static_cast<int>(child.slots.size());
    const int n_pick = ceil_count(p.m2_frac, n_slots);
    const std::vector<int> perm = rng.permutation(n_slots);
    std::vector<bool> picked(static_cast<size_t>(n_slots), false);
    for (int i = 0; i < n_pick && i < n_slots; ++i) {
        picked[static_cast<size_t>(perm[static_cast<size_t>(i)])] = true;
    }
    for (int si = 0; si < n_slots; ++si) {
        if (!picked[static_cast<size_t>(si)]) {
            continue;
        }
        FactorPair& pair = child.slots[static_cast<size_t>(si)].second;
        for (Tensor2D* t : {&pair.a, &pair.b}) {
            const float scale = p.m2_eps * tensor_std(*t);
            if (scale == 0.0f) {
                continue;
            }
            for (float& v : t->data) {
                v += static_cast<float>(scale * rng.normal());
            }
        }
    }
    return child;
}

AdapterState m3_component_mask(const AdapterState& parent, const OperatorParams& p, RngStream& rng) {
    AdapterState child = parent;
    for (auto& [name, pair] : child.slots) {
        SvdTriple t = svd_of_delta(pair);
        const int r = static_cast<int>(t.s.size());
        const int n_zero = std::min(r, ceil_count(p.m3_rho, r));
        const std::vector<int> perm = rng.permutation(r);
        for (int i = 0; i < n_zero; ++i) {
            t.s[static_cast<size_t>(perm[static_cast<size_t>(i)])] = 0.0f;
        }
        sort_triple(t);
        pair = refactor_balanced(t);
    }
    return child;
}

AdapterState m4_full_gauss(const AdapterState& parent, const OperatorParams& p, RngStream& rng) {
    AdapterState child = parent;
    for (auto& [name, pair] : child.slots) {
        for (Tensor2D* t : {&pair.a, &pair.b}) {
            const float scale = p.m4_eps * tensor_std(*t);
            if (scale == 0.0f) {
                continue;
            }
            for (float& v : t->data) {
                v += static_cast<float>(scale * rng.normal());
            }
        }
    }
    return child;
}

AdapterState m5_neftune(const AdapterState& parent, const OperatorParams& p, RngStream& rng) {
    AdapterState child = parent;
    for (auto& [name, pair] : child.slots) {
        const double ld = static_cast<double>(pair.a.rows) * static_cast<double>(pair.a.cols);
        const double bound = ld > 0.0 ? static_cast<double>(p.m5_alpha) / std::sqrt(ld) : 0.0;
        if (bound == 0.0) {
            continue;
        }
        for (float& v : pair.a.data) {
            v += static_cast<float>(rng.uniform(-bound, bound));
        }
        // b is left untouched.
    }
    return child;
}

AdapterState m6_rank_perturb(const AdapterState& parent, const OperatorParams& p, RngStream& rng) {
    AdapterState child = parent;
    for (auto& [name, pair] : child.slots) {
        SvdTriple t = svd_of_delta(pair);
        const int r = static_cast<int>(t.s.size());
        const int k = std::clamp(p.m6_k, 0, r);
        for (int j = r - k; j < r; ++j) {
            t.s[static_cast<size_t>(j)] = 0.0f;
        }
        if (p.m6_sigma != 0.0f) {
            for (int j = 0; j < r - k; ++j) {
                const double factor = 1.0 + static_cast<double>(p.m6_sigma) * rng.normal();
                t.s[static_cast<size_t>(j)] = std::max(0.0f, static_cast<float>(t.s[static_cast<size_t>(j)] * factor));
            }
        }
        sort_triple(t);
        pair = refactor_balanced(t);
    }
    return child;
}

AdapterState copy_parent(const AdapterState& parent) {
    return parent;
}

AdapterState x1_dare(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p, RngStream& rng) {
    check_parents(p1, p2);
    AdapterState child = p1;
    for (size_t si = 0; si < child.slots.size(); ++si) {
        FactorPair& cp = child.slots[si].second;
        const FactorPair& q = p2.slots[si].second;
        for (auto [dst, src] : {std::pair<Tensor2D*, const Tensor2D*>{&cp.a, &q.a},
                                std::pair<Tensor2D*, const Tensor2D*>{&cp.b, &q.b}}) {
            Tensor2D t1 = *dst;
            Tensor2D t2 = *src;
            dare_process(t1, p.dare_p, rng);
            dare_process(t2, p.dare_p, rng);
            for (size_t i = 0; i < dst->data.size(); ++i) {
                dst->data[i] = 0.5f * (t1.data[i] + t2.data[i]);
            }
        }
    }
    return child;
}

AdapterState x2_layerwise(const AdapterState& p1, const AdapterState& p2, RngStream& rng) {
    check_parents(p1, p2);
    AdapterState child = p1;
    for (size_t si = 0; si < child.slots.size(); ++si) {
        if (rng.bernoulli(0.5)) {
            child.slots[si].second = p2.slots[si].second;
        }
    }
    return child;
}

AdapterState x3_svd_subspace(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p, RngStream& rng) {
    check_parents(p1, p2);
    AdapterState child = p1;
    for (size_t si = 0; si < child.slots.size(); ++si) {
        const SvdTriple t1 = svd_of_delta(p1.slots[si].second);
        const SvdTriple t2 = svd_of_delta(p2.slots[si].second);
        const int r = static_cast<int>(t1.s.size());
        int k;
        if (p.x3_k >= 0) {
            k = std::min(p.x3_k, r);
        } else {
            k = r > 1 ? 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(r - 1))) : 1;
        }
        SvdTriple composed;
        composed.s.resize(static_cast<size_t>(r));
        composed.u = Tensor2D(t1.u.rows, r);
        composed.v = Tensor2D(t1.v.rows, r);
        for (int j = 0; j < r; ++j) {
            const SvdTriple& src = j < k ? t1 : t2;
            composed.s[static_cast<size_t>(j)] = src.s[static_cast<size_t>(j)];
            for (int i = 0; i < composed.u.rows; ++i) {
                composed.u.at(i, j) = src.u.at(i, j);
            }
            for (int i = 0; i < composed.v.rows; ++i) {
                composed.v.at(i, j) = src.v.at(i, j);
            }
        }
        // The composed basis mixes two orthonormal frames and is generally
        // not itself orthonormal; the balanced split is still well defined.
        child.slots[si].second = refactor_balanced(composed);
    }
    return child;
}

AdapterState x4_extrapolative(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p, RngStream& rng) {
    check_parents(p1, p2);
    const double eta = rng.uniform(p.eta_min, p.eta_max);
    if (eta == 0.0) {
        return p1;
    }
    if (eta == 1.0) {
        return p2;
    }
    return combine_elementwise(p1, p2, [eta](float a, float b) {
        return static_cast<float>(a + eta * (static_cast<double>(b) - a));
    });
}

AdapterState x5_linear(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p) {
    check_parents(p1, p2);
    const double alpha = p.lin_alpha;
    if (alpha == 1.0) {
        return p1;
    }
    if (alpha == 0.0) {
        return p2;
    }
    return combine_elementwise(p1, p2, [alpha](float a, float b) {
        return static_cast<float>(alpha * a + (1.0 - alpha) * b);
    });
}

AdapterState x6_ties(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p) {
    check_parents(p1, p2);
    AdapterState child = p1;
    for (size_t si = 0; si < child.slots.size(); ++si) {
        FactorPair& cp = child.slots[si].second;
        const FactorPair& q1 = p1.slots[si].second;
        const FactorPair& q2 = p2.slots[si].second;
        ties_merge_tensor(cp.a, q1.a, q2.a, p.ties_tau);
        ties_merge_tensor(cp.b, q1.b, q2.b, p.ties_tau);
    }
    return child;
}

AdapterState x7_della(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p, RngStream& rng) {
    check_parents(p1, p2);
    AdapterState child = p1;
    for (size_t si = 0; si < child.slots.size(); ++si) {
        FactorPair& cp = child.slots[si].second;
        const FactorPair& q = p2.slots[si].second;
        for (auto [dst, src] : {std::pair<Tensor2D*, const Tensor2D*>{&cp.a, &q.a},
                                std::pair<Tensor2D*, const Tensor2D*>{&cp.b, &q.b}}) {
            Tensor2D t1 = *dst;
            Tensor2D t2 = *src;
            della_process(t1, p.della_eps, rng);
            della_process(t2, p.della_eps, rng);
            for (size_t i = 0; i < dst->data.size(); ++i) {
                dst->data[i] = 0.5f * (t1.data[i] + t2.data[i]);
            }
        }
    }
    return child;
}

AdapterState x8_slerp(const AdapterState& p1, const AdapterState& p2, const OperatorParams& p) {
    check_parents(p1, p2);
    if (p.slerp_t == 0.0f) {
        return p1;
    }
    if (p.slerp_t == 1.0f) {
        return p2;
    }
    AdapterState child = p1;
    for (size_t si = 0; si < child.slots.size(); ++si) {
        FactorPair& cp = child.slots[si].second;
        const FactorPair& q1 = p1.slots[si].second;
        const FactorPair& q2 = p2.slots[si].second;
        slerp_tensor(cp.a, q1.a, q2.a, p.slerp_t);
        slerp_tensor(cp.b, q1.b, q2.b, p.slerp_t);
    }
    return child;
}

AdapterState x9_fisher(const AdapterState& p1, const AdapterState& p2) {
    check_parents(p1, p2);
    constexpr double kEps = 1e-8;
    return combine_elementwise(p1, p2, [](float a, float b) {
        const double fa = static_cast<double>(a) * a;
        const double fb = static_cast<double>(b) * b;
        return static_cast<float>((fa * a + fb * b) / (fa + fb + kEps));
    });
}

AdapterState linear_0_5(const AdapterState& p1, const AdapterState& p2) {
    OperatorParams p;
    p.lin_alpha = 0.5f;
    return x5_linear(p1, p2, p);
}

OpChild apply_operator(OperatorId id,
                       const std::vector<const AdapterState*>& parents,
                       const std::vector<std::string>& parent_ids,
                       const OperatorParams& params,
                       uint64_t seed) {
    const OperatorInfo& meta = info(id);
    if (static_cast<int>(parents.size()) != meta.arity) {
        throw std::invalid_argument(std::string("operator ") + meta.name + " expects " +
                                    std::to_string(meta.arity) + " parents, got " +
                                    std::to_string(parents.size()));
    }
    RngStream rng(seed);
    OpChild out;
    out.provenance.op = meta.name;
    out.provenance.seed = seed;
    out.provenance.parents = parent_ids;

    const AdapterState& p1 = *parents[0];
    switch (id) {
        case OperatorId::m1_svd: out.state = m1_svd(p1, params, rng); break;
        case OperatorId::m2_layer_gauss: out.state = m2_layer_gauss(p1, params, rng); break;
        case OperatorId::m3_component_mask: out.state = m3_component_mask(p1, params, rng); break;
        case OperatorId::m4_full_gauss: out.state = m4_full_gauss(p1, params, rng); break;
        case OperatorId::m5_neftune: out.state = m5_neftune(p1, params, rng); break;
        case OperatorId::m6_rank_perturb: out.state = m6_rank_perturb(p1, params, rng); break;
        case OperatorId::copy_parent: out.state = copy_parent(p1); break;
        case OperatorId::x1_dare: out.state = x1_dare(p1, *parents[1], params, rng); break;
        case OperatorId::x2_layerwise: out.state = x2_layerwise(p1, *parents[1], rng); break;
        case OperatorId::x3_svd_subspace: out.state = x3_svd_subspace(p1, *parents[1], params, rng); break;
        case OperatorId::x4_extrapolative: out.state = x4_extrapolative(p1, *parents[1], params, rng); break;
        case OperatorId::x5_linear: out.state = x5_linear(p1, *parents[1], params); break;
        case OperatorId::x6_ties: out.state = x6_ties(p1, *parents[1], params); break;
        case OperatorId::x7_della: out.state = x7_della(p1, *parents[1], params, rng); break;
        case OperatorId::x8_slerp: out.state = x8_slerp(p1, *parents[1], params); break;
        case OperatorId::x9_fisher: out.state = x9_fisher(p1, *parents[1]); break;
        case OperatorId::linear_0_5: out.state = linear_0_5(p1, *parents[1]); break;
    }
    return out;
}

}  // namespace plra::ops
