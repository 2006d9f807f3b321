#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace notesurv {

// Dense row-major tensor of doubles. Rank 0 (empty shape) is a scalar;
// model code mostly uses rank 2.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> s) {
        Tensor t;
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        t.shape = std::move(s);
        t.v.assign(n, 0.0);
        return t;
    }

    static Tensor scalar(double x) {
        Tensor t;
        t.v.assign(1, x);
        return t;
    }

    static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> data) {
        if (data.size() != r * c) throw std::invalid_argument("Tensor::matrix: size mismatch");
        Tensor t;
        t.shape = {r, c};
        t.v = std::move(data);
        return t;
    }

    static Tensor column(std::vector<double> data) {
        Tensor t;
        t.shape = {data.size(), 1};
        t.v = std::move(data);
        return t;
    }

    std::size_t numel() const { return v.size(); }
    bool is_scalar() const { return v.size() == 1 && shape.empty(); }
    std::size_t rank() const { return shape.size(); }

    std::size_t rows() const {
        if (shape.size() != 2) throw std::logic_error("Tensor::rows: rank != 2");
        return shape[0];
    }
    std::size_t cols() const {
        if (shape.size() != 2) throw std::logic_error("Tensor::cols: rank != 2");
        return shape[1];
    }

    double& at(std::size_t r, std::size_t c) { return v[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * shape[1] + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + ")";
    }
};

}  // namespace notesurv
