#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace srfm {

// Dense row-major double tensor. Rank 1 or 2 is all the model needs;
// scalars are rank-1 tensors of size 1.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;

    static Tensor zeros(std::vector<int> s) {
        Tensor t;
        std::int64_t n = 1;
        for (int e : s) {
            if (e <= 0) throw std::invalid_argument("Tensor: nonpositive extent");
            n *= e;
        }
        t.shape = std::move(s);
        t.data.assign(static_cast<std::size_t>(n), 0.0);
        return t;
    }

    static Tensor scalar(double v) {
        Tensor t = zeros({1});
        t.data[0] = v;
        return t;
    }

    static Tensor vec(std::vector<double> v) {
        Tensor t;
        t.shape = {static_cast<int>(v.size())};
        t.data = std::move(v);
        return t;
    }

    static Tensor matrix(int r, int c, std::vector<double> v) {
        Tensor t;
        t.shape = {r, c};
        if (v.size() != static_cast<std::size_t>(r) * c)
            throw std::invalid_argument("Tensor: matrix data size mismatch");
        t.data = std::move(v);
        return t;
    }

    int rank() const { return static_cast<int>(shape.size()); }
    int size() const { return static_cast<int>(data.size()); }
    int rows() const { return rank() == 2 ? shape[0] : 1; }
    int cols() const { return rank() == 2 ? shape[1] : (shape.empty() ? 0 : shape[0]); }
    bool is_scalar() const { return size() == 1; }

    double& at(int i) { return data[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill_gaussian(std::mt19937_64& rng, double stddev) {
        std::normal_distribution<double> d(0.0, stddev);
        for (double& v : data) v = d(rng);
    }
};

inline std::string shape_str(const Tensor& t) {
    std::string s = "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i)
        s += (i ? "x" : "") + std::to_string(t.shape[i]);
    return s + "]";
}

}  // namespace srfm
