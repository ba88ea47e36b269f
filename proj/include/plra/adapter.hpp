#pragma once

#include <string>
#include <utility>
#include <vector>

#include "plra/tensor.hpp"

namespace plra {

// One low-rank slot: delta = b * a, with a (r x d_in) and b (d_out x r).
struct FactorPair {
    Tensor2D a;
    Tensor2D b;

    int rank() const { return a.rows; }
    int d_in() const { return a.cols; }
    int d_out() const { return b.rows; }
};

// A named, ordered set of low-rank slots plus rank and scaling metadata.
// Scaling is carried through training, evolution and serialization unchanged;
// it never enters the slot algebra.
struct AdapterState {
    std::vector<std::pair<std::string, FactorPair>> slots;
    int rank = 0;
    float scaling = 64.0f;

    const FactorPair* find(const std::string& name) const;
    FactorPair* find(const std::string& name);
};

bool bitwise_equal(const AdapterState& a, const AdapterState& b);
bool same_layout(const AdapterState& a, const AdapterState& b);

// Thin SVD of a slot delta: delta = u * diag(s) * v^T,
// u (d_out x r), s (r, non-increasing, >= 0), v (d_in x r).
struct SvdTriple {
    Tensor2D u;
    std::vector<float> s;
    Tensor2D v;
};

// b * a, shape d_out x d_in. Never used inside the SVD path; it exists for
// external consumers and as the reference side of reconstruction checks.
Tensor2D effective_delta(const FactorPair& p);

// SVD of b * a without materializing the d_out x d_in problem: Householder
// QR of b and a^T, then a one-sided Jacobi SVD of the r x r core.
SvdTriple svd_of_delta(const FactorPair& p);

// Balanced split b' = u * sqrt(s), a' = sqrt(s) * v^T. Zero singular values
// map to zero factor columns. Throws on negative singular values; does not
// require s to be sorted or u/v to be orthonormal (composed triples are fed
// through here too).
FactorPair refactor_balanced(const SvdTriple& t);

// Householder QR with q (m x n, orthonormal columns) and r (n x n, upper
// triangular). Requires m >= n.
void householder_qr(const Tensor2D& m, Tensor2D& q, Tensor2D& r);

}  // namespace plra
