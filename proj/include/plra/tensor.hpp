#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace plra {

// Dense 2-D float32 matrix, row-major. Storage is always float; reductions
// accumulate in double with a fixed row-major order so results are
// reproducible run to run.
struct Tensor2D {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;  // length rows * cols

    Tensor2D() = default;
    Tensor2D(int r, int c, float fill = 0.0f);
    static Tensor2D from_rows(std::initializer_list<std::initializer_list<float>> rows);

    float at(int r, int c) const { return data[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)]; }
    float& at(int r, int c) { return data[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)]; }

    size_t size() const { return data.size(); }
    bool same_shape(const Tensor2D& other) const { return rows == other.rows && cols == other.cols; }
    bool all_finite() const;
};

bool bitwise_equal(const Tensor2D& a, const Tensor2D& b);

// lhs (m x k) * rhs (k x n) -> (m x n).
Tensor2D matmul(const Tensor2D& lhs, const Tensor2D& rhs);

Tensor2D transpose(const Tensor2D& t);

// Population standard deviation over all entries.
float tensor_std(const Tensor2D& t);

float max_abs_diff(const Tensor2D& a, const Tensor2D& b);
float max_abs(const Tensor2D& t);
double frobenius_norm(const Tensor2D& t);

}  // namespace plra
