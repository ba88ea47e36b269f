#include "plra/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace plra {

Tensor2D::Tensor2D(int r, int c, float fill) : rows(r), cols(c) {
    if (r < 0 || c < 0) {
        throw std::invalid_argument("Tensor2D: negative shape");
    }
    data.assign(static_cast<size_t>(r) * static_cast<size_t>(c), fill);
}

Tensor2D Tensor2D::from_rows(std::initializer_list<std::initializer_list<float>> rows_init) {
    Tensor2D t;
    t.rows = static_cast<int>(rows_init.size());
    t.cols = t.rows > 0 ? static_cast<int>(rows_init.begin()->size()) : 0;
    t.data.reserve(static_cast<size_t>(t.rows) * static_cast<size_t>(t.cols));
    for (const auto& row : rows_init) {
        if (static_cast<int>(row.size()) != t.cols) {
            throw std::invalid_argument("Tensor2D::from_rows: ragged rows");
        }
        t.data.insert(t.data.end(), row.begin(), row.end());
    }
    return t;
}

bool Tensor2D::all_finite() const {
    for (float v : data) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

bool bitwise_equal(const Tensor2D& a, const Tensor2D& b) {
    if (!a.same_shape(b)) {
        return false;
    }
    if (a.data.empty()) {
        return true;
    }
    return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

Tensor2D matmul(const Tensor2D& lhs, const Tensor2D& rhs) {
    if (lhs.cols != rhs.rows) {
        throw std::invalid_argument("matmul: inner dimensions disagree");
    }
    Tensor2D out(lhs.rows, rhs.cols);
    for (int i = 0; i < lhs.rows; ++i) {
        for (int j = 0; j < rhs.cols; ++j) {
            double acc = 0.0;
            for (int k = 0; k < lhs.cols; ++k) {
                acc += static_cast<double>(lhs.at(i, k)) * static_cast<double>(rhs.at(k, j));
            }
            out.at(i, j) = static_cast<float>(acc);
        }
    }
    return out;
}

Tensor2D transpose(const Tensor2D& t) {
    Tensor2D out(t.cols, t.rows);
    for (int i = 0; i < t.rows; ++i) {
        for (int j = 0; j < t.cols; ++j) {
            out.at(j, i) = t.at(i, j);
        }
    }
    return out;
}

float tensor_std(const Tensor2D& t) {
    if (t.data.empty()) {
        throw std::invalid_argument("tensor_std: empty tensor");
    }
    double mean = 0.0;
    for (float v : t.data) {
        mean += static_cast<double>(v);
    }
    mean /= static_cast<double>(t.data.size());
    double var = 0.0;
    for (float v : t.data) {
        const double d = static_cast<double>(v) - mean;
        var += d * d;
    }
    var /= static_cast<double>(t.data.size());
    return static_cast<float>(std::sqrt(var));
}

float max_abs_diff(const Tensor2D& a, const Tensor2D& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("max_abs_diff: shape mismatch");
    }
    float m = 0.0f;
    for (size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    }
    return m;
}

float max_abs(const Tensor2D& t) {
    float m = 0.0f;
    for (float v : t.data) {
        m = std::max(m, std::fabs(v));
    }
    return m;
}

double frobenius_norm(const Tensor2D& t) {
    double acc = 0.0;
    for (float v : t.data) {
        acc += static_cast<double>(v) * static_cast<double>(v);
    }
    return std::sqrt(acc);
}

}  // namespace plra
