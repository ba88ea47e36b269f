#include "plra/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace plra {

const FactorPair* AdapterState::find(const std::string& name) const {
    for (const auto& [n, p] : slots) {
        if (n == name) {
            return &p;
        }
    }
    return nullptr;
}

FactorPair* AdapterState::find(const std::string& name) {
    for (auto& [n, p] : slots) {
        if (n == name) {
            return &p;
        }
    }
    return nullptr;
}

bool bitwise_equal(const AdapterState& a, const AdapterState& b) {
    if (a.rank != b.rank || a.slots.size() != b.slots.size()) {
        return false;
    }
    if (std::memcmp(&a.scaling, &b.scaling, sizeof(float)) != 0) {
        return false;
    }
    for (size_t i = 0; i < a.slots.size(); ++i) {
        if (a.slots[i].first != b.slots[i].first) {
            return false;
        }
        if (!bitwise_equal(a.slots[i].second.a, b.slots[i].second.a) ||
            !bitwise_equal(a.slots[i].second.b, b.slots[i].second.b)) {
            return false;
        }
    }
    return true;
}

bool same_layout(const AdapterState& a, const AdapterState& b) {
    if (a.rank != b.rank || a.slots.size() != b.slots.size()) {
        return false;
    }
    for (size_t i = 0; i < a.slots.size(); ++i) {
        if (a.slots[i].first != b.slots[i].first) {
            return false;
        }
        const FactorPair& pa = a.slots[i].second;
        const FactorPair& pb = b.slots[i].second;
        if (!pa.a.same_shape(pb.a) || !pa.b.same_shape(pb.b)) {
            return false;
        }
    }
    return true;
}

namespace {

void check_pair_shapes(const FactorPair& p) {
    if (p.a.rows != p.b.cols) {
        throw std::invalid_argument("FactorPair: a.rows must equal b.cols");
    }
    if (p.rank() < 1 || p.rank() > std::min(p.d_in(), p.d_out())) {
        throw std::invalid_argument("FactorPair: rank out of range");
    }
}

// Double-precision working matrix, column-major access helpers kept local
// to the SVD path.
struct DMat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    DMat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}
    double& at(int r, int c) { return v[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)]; }
};

DMat to_dmat(const Tensor2D& t) {
    DMat m(t.rows, t.cols);
    for (size_t i = 0; i < t.data.size(); ++i) {
        m.v[i] = static_cast<double>(t.data[i]);
    }
    return m;
}

Tensor2D to_tensor(const DMat& m) {
    Tensor2D t(m.rows, m.cols);
    for (size_t i = 0; i < m.v.size(); ++i) {
        t.data[i] = static_cast<float>(m.v[i]);
    }
    return t;
}

// Thin Householder QR: m (rows x cols, rows >= cols) -> q (rows x cols),
// r (cols x cols). Zero columns are skipped, leaving identity reflectors so
// q stays orthonormal for rank-deficient input.
void qr_inplace(DMat m, DMat& q, DMat& r) {
    const int rows = m.rows;
    const int cols = m.cols;
    std::vector<std::vector<double>> reflectors;
    reflectors.reserve(static_cast<size_t>(cols));

    for (int k = 0; k < cols; ++k) {
        double norm2 = 0.0;
        for (int i = k; i < rows; ++i) {
            norm2 += m.at(i, k) * m.at(i, k);
        }
        const double norm = std::sqrt(norm2);
        std::vector<double> w(static_cast<size_t>(rows), 0.0);
        if (norm > 0.0) {
            const double alpha = m.at(k, k) >= 0.0 ? -norm : norm;
            double wnorm2 = 0.0;
            w[static_cast<size_t>(k)] = m.at(k, k) - alpha;
            for (int i = k + 1; i < rows; ++i) {
                w[static_cast<size_t>(i)] = m.at(i, k);
            }
            for (int i = k; i < rows; ++i) {
                wnorm2 += w[static_cast<size_t>(i)] * w[static_cast<size_t>(i)];
            }
            if (wnorm2 > 0.0) {
                // Apply H = I - 2 w w^T / (w^T w) to the remaining columns.
                for (int j = k; j < cols; ++j) {
                    double dot = 0.0;
                    for (int i = k; i < rows; ++i) {
                        dot += w[static_cast<size_t>(i)] * m.at(i, j);
                    }
                    const double scale = 2.0 * dot / wnorm2;
                    for (int i = k; i < rows; ++i) {
                        m.at(i, j) -= scale * w[static_cast<size_t>(i)];
                    }
                }
            } else {
                w.assign(static_cast<size_t>(rows), 0.0);
            }
        }
        reflectors.push_back(std::move(w));
    }

    r = DMat(cols, cols);
    for (int i = 0; i < cols; ++i) {
        for (int j = i; j < cols; ++j) {
            r.at(i, j) = m.at(i, j);
        }
    }

    // q = H_0 ... H_{cols-1} * I(:, 0:cols)
    q = DMat(rows, cols);
    for (int j = 0; j < cols; ++j) {
        q.at(j, j) = 1.0;
    }
    for (int k = cols - 1; k >= 0; --k) {
        const std::vector<double>& w = reflectors[static_cast<size_t>(k)];
        double wnorm2 = 0.0;
        for (int i = k; i < rows; ++i) {
            wnorm2 += w[static_cast<size_t>(i)] * w[static_cast<size_t>(i)];
        }
        if (wnorm2 <= 0.0) {
            continue;
        }
        for (int j = 0; j < cols; ++j) {
            double dot = 0.0;
            for (int i = k; i < rows; ++i) {
                dot += w[static_cast<size_t>(i)] * q.at(i, j);
            }
            const double scale = 2.0 * dot / wnorm2;
            for (int i = k; i < rows; ++i) {
                q.at(i, j) -= scale * w[static_cast<size_t>(i)];
            }
        }
    }
}

// One-sided Jacobi SVD of a square core: m = u * diag(s) * v^T with u, v
// orthogonal. Columns that converge to zero get their u columns completed
// to an orthonormal basis deterministically.
void jacobi_svd(DMat m, DMat& u, std::vector<double>& s, DMat& v) {
    const int n = m.rows;
    v = DMat(n, n);
    for (int i = 0; i < n; ++i) {
        v.at(i, i) = 1.0;
    }

    const int max_sweeps = 60;
    const double tol = 1e-14;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (int i = 0; i < n; ++i) {
                    app += m.at(i, p) * m.at(i, p);
                    aqq += m.at(i, q) * m.at(i, q);
                    apq += m.at(i, p) * m.at(i, q);
                }
                if (std::fabs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) {
                    continue;
                }
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = c * t;
                for (int i = 0; i < n; ++i) {
                    const double mp = m.at(i, p);
                    const double mq = m.at(i, q);
                    m.at(i, p) = c * mp - sn * mq;
                    m.at(i, q) = sn * mp + c * mq;
                }
                for (int i = 0; i < n; ++i) {
                    const double vp = v.at(i, p);
                    const double vq = v.at(i, q);
                    v.at(i, p) = c * vp - sn * vq;
                    v.at(i, q) = sn * vp + c * vq;
                }
            }
        }
        if (!rotated) {
            break;
        }
    }

    s.assign(static_cast<size_t>(n), 0.0);
    u = DMat(n, n);
    double smax = 0.0;
    for (int j = 0; j < n; ++j) {
        double norm2 = 0.0;
        for (int i = 0; i < n; ++i) {
            norm2 += m.at(i, j) * m.at(i, j);
        }
        s[static_cast<size_t>(j)] = std::sqrt(norm2);
        smax = std::max(smax, s[static_cast<size_t>(j)]);
    }
    const double tiny = smax > 0.0 ? smax * 1e-12 : 0.0;
    std::vector<int> degenerate;
    for (int j = 0; j < n; ++j) {
        if (s[static_cast<size_t>(j)] > tiny && s[static_cast<size_t>(j)] > 0.0) {
            for (int i = 0; i < n; ++i) {
                u.at(i, j) = m.at(i, j) / s[static_cast<size_t>(j)];
            }
        } else {
            s[static_cast<size_t>(j)] = 0.0;
            degenerate.push_back(j);
        }
    }
    // Complete zero columns against the existing ones (Gram-Schmidt over
    // canonical basis candidates).
    for (int j : degenerate) {
        for (int cand = 0; cand < n; ++cand) {
            std::vector<double> e(static_cast<size_t>(n), 0.0);
            e[static_cast<size_t>(cand)] = 1.0;
            for (int k = 0; k < n; ++k) {
                if (k == j) {
                    continue;
                }
                bool known = s[static_cast<size_t>(k)] > 0.0;
                if (!known) {
                    // Earlier completed degenerate columns count as known.
                    known = std::find(degenerate.begin(), degenerate.end(), k) != degenerate.end() && k < j;
                }
                if (!known) {
                    continue;
                }
                double dot = 0.0;
                for (int i = 0; i < n; ++i) {
                    dot += e[static_cast<size_t>(i)] * u.at(i, k);
                }
                for (int i = 0; i < n; ++i) {
                    e[static_cast<size_t>(i)] -= dot * u.at(i, k);
                }
            }
            double norm2 = 0.0;
            for (double x : e) {
                norm2 += x * x;
            }
            if (norm2 > 0.25) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (int i = 0; i < n; ++i) {
                    u.at(i, j) = e[static_cast<size_t>(i)] * inv;
                }
                break;
            }
        }
    }
}

}  // namespace

Tensor2D effective_delta(const FactorPair& p) {
    check_pair_shapes(p);
    return matmul(p.b, p.a);
}

SvdTriple svd_of_delta(const FactorPair& p) {
    check_pair_shapes(p);
    if (!p.a.all_finite() || !p.b.all_finite()) {
        throw std::invalid_argument("svd_of_delta: non-finite factor entries");
    }
    const int r = p.rank();

    DMat qb(0, 0), rb(0, 0), qa(0, 0), ra(0, 0);
    qr_inplace(to_dmat(p.b), qb, rb);
    qr_inplace(to_dmat(transpose(p.a)), qa, ra);

    // core = rb * ra^T, r x r.
    DMat core(r, r);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
            double acc = 0.0;
            for (int k = 0; k < r; ++k) {
                acc += rb.at(i, k) * ra.at(j, k);
            }
            core.at(i, j) = acc;
        }
    }

    DMat uc(0, 0), vc(0, 0);
    std::vector<double> s;
    jacobi_svd(std::move(core), uc, s, vc);

    // Sort descending, permuting the core factors.
    std::vector<int> order(static_cast<size_t>(r));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return s[static_cast<size_t>(x)] > s[static_cast<size_t>(y)];
    });

    SvdTriple out;
    out.s.resize(static_cast<size_t>(r));
    out.u = Tensor2D(p.d_out(), r);
    out.v = Tensor2D(p.d_in(), r);
    for (int jj = 0; jj < r; ++jj) {
        const int j = order[static_cast<size_t>(jj)];
        out.s[static_cast<size_t>(jj)] = static_cast<float>(s[static_cast<size_t>(j)]);
        for (int i = 0; i < p.d_out(); ++i) {
            double acc = 0.0;
            for (int k = 0; k < r; ++k) {
                acc += qb.at(i, k) * uc.at(k, j);
            }
            out.u.at(i, jj) = static_cast<float>(acc);
        }
        for (int i = 0; i < p.d_in(); ++i) {
            double acc = 0.0;
            for (int k = 0; k < r; ++k) {
                acc += qa.at(i, k) * vc.at(k, j);
            }
            out.v.at(i, jj) = static_cast<float>(acc);
        }
    }
    return out;
}

FactorPair refactor_balanced(const SvdTriple& t) {
    const int r = static_cast<int>(t.s.size());
    if (t.u.cols != r || t.v.cols != r) {
        throw std::invalid_argument("refactor_balanced: inconsistent triple");
    }
    std::vector<float> root(static_cast<size_t>(r));
    for (int j = 0; j < r; ++j) {
        const float sv = t.s[static_cast<size_t>(j)];
        if (sv < 0.0f || !std::isfinite(sv)) {
            throw std::invalid_argument("refactor_balanced: negative or non-finite singular value");
        }
        root[static_cast<size_t>(j)] = std::sqrt(sv);
    }
    FactorPair out;
    out.b = Tensor2D(t.u.rows, r);
    for (int i = 0; i < t.u.rows; ++i) {
        for (int j = 0; j < r; ++j) {
            out.b.at(i, j) = t.u.at(i, j) * root[static_cast<size_t>(j)];
        }
    }
    out.a = Tensor2D(r, t.v.rows);
    for (int j = 0; j < r; ++j) {
        for (int i = 0; i < t.v.rows; ++i) {
            out.a.at(j, i) = root[static_cast<size_t>(j)] * t.v.at(i, j);
        }
    }
    return out;
}

void householder_qr(const Tensor2D& m, Tensor2D& q, Tensor2D& r) {
    if (m.rows < m.cols) {
        throw std::invalid_argument("householder_qr: requires rows >= cols");
    }
    DMat qd(0, 0), rd(0, 0);
    qr_inplace(to_dmat(m), qd, rd);
    q = to_tensor(qd);
    r = to_tensor(rd);
}

}  // namespace plra
