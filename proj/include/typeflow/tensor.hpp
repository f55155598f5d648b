#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "typeflow/errors.hpp"

namespace typeflow {

// Dense row-major tensor of rank 1 or 2. Rank-1 tensors behave as row
// vectors ([d] ~ [1, d]) wherever a 2-D view is needed; the stored rank is
// kept so checkpoints round-trip shapes exactly.
template <typename T>
struct Tensor {
    std::vector<int> dims;
    std::vector<T> data;

    Tensor() = default;

    static Tensor zeros(std::vector<int> d) {
        Tensor t;
        std::size_t n = 1;
        for (int x : d) {
            if (x < 0) throw ShapeError("negative tensor dimension");
            n *= static_cast<std::size_t>(x);
        }
        if (d.empty() || d.size() > 2) throw ShapeError("tensors are rank 1 or 2");
        t.dims = std::move(d);
        t.data.assign(n, T(0));
        return t;
    }

    int rows() const { return dims.size() == 2 ? dims[0] : 1; }
    int cols() const {
        if (dims.empty()) return 0;
        return dims.size() == 2 ? dims[1] : dims[0];
    }
    std::size_t numel() const { return data.size(); }

    T& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    const T& at(int r, int c) const {
        return data[static_cast<std::size_t>(r) * cols() + c];
    }

    bool same_shape(const Tensor& o) const {
        return rows() == o.rows() && cols() == o.cols();
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims[i]);
        }
        return s + "]";
    }
};

// Named parameter tensors in creation order. Creation order is load-bearing:
// it fixes the initialization RNG sequence and the checkpoint layout.
template <typename T>
class ParamStore {
  public:
    Tensor<T>& add(const std::string& name, Tensor<T> t) {
        auto [it, inserted] = tensors_.emplace(name, std::move(t));
        if (!inserted) throw InternalError("duplicate parameter tensor '" + name + "'");
        order_.push_back(name);
        return it->second;
    }

    bool has(const std::string& name) const { return tensors_.count(name) != 0; }

    Tensor<T>& at(const std::string& name) {
        auto it = tensors_.find(name);
        if (it == tensors_.end()) throw InternalError("missing parameter tensor '" + name + "'");
        return it->second;
    }
    const Tensor<T>& at(const std::string& name) const {
        auto it = tensors_.find(name);
        if (it == tensors_.end()) throw InternalError("missing parameter tensor '" + name + "'");
        return it->second;
    }

    const std::vector<std::string>& order() const { return order_; }
    std::size_t size() const { return order_.size(); }

  private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor<T>> tensors_;
};

}  // namespace typeflow
