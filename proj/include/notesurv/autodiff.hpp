#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "notesurv/rng.hpp"
#include "notesurv/tensor.hpp"

// Reverse-mode differentiation over dense tensors. A Tape records one forward
// pass; backward() walks the nodes in reverse creation order (creation order
// is topological by construction) and accumulates gradients of parameter
// leaves into the bound ParamStore.
namespace notesurv::ad {

enum class Activation { relu, selu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

constexpr double kSeluLambda = 1.0507009873554805;
constexpr double kSeluAlpha = 1.6732632423543772;

// Named parameter tensors with matching gradient accumulators.
class ParamStore {
public:
    void add(const std::string& name, Tensor init);
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    Tensor& grad(const std::string& name);
    const Tensor& grad(const std::string& name) const;
    void zero_grad();
    const std::vector<std::string>& names() const { return order_; }
    std::size_t total_size() const;

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;
};

// Xavier-uniform init for a (fan_in x fan_out) weight matrix.
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

using NodeId = std::size_t;

class Tape {
public:
    explicit Tape(ParamStore* params = nullptr) : params_(params) {}

    // leaves
    NodeId input(Tensor value);                 // constant, no gradient
    NodeId param(const std::string& name);      // bound to the ParamStore

    // primitives
    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId add(NodeId a, NodeId b);             // same shape, or b a 1-row broadcast
    NodeId scale(NodeId a, double c);
    NodeId concat_cols(const std::vector<NodeId>& parts);
    NodeId concat_rows(const std::vector<NodeId>& parts);
    NodeId softmax_rows(NodeId a, const std::vector<std::uint8_t>* key_mask = nullptr);
    NodeId relu(NodeId a);
    NodeId selu(NodeId a);
    NodeId activation(NodeId a, Activation act);
    NodeId sigmoid(NodeId a);
    NodeId dropout(NodeId a, double p, bool training, Rng& rng);
    NodeId mean(NodeId a);                      // scalar
    NodeId gather_rows(NodeId a, const std::vector<std::size_t>& row_ids);

    // losses (scalar outputs)
    NodeId bce_loss(NodeId probs, const std::vector<double>& labels);
    NodeId pll_loss(NodeId risks, const std::vector<double>& times,
                    const std::vector<double>& events);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }

    // exact reverse-mode gradients of a scalar loss; parameter gradients are
    // accumulated into the bound ParamStore
    void backward(NodeId loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        std::string param;  // nonempty for parameter leaves
        std::function<void(Tape&, const Tensor&)> back;  // g -> accumulate into inputs
    };

    NodeId push(Tensor value, bool needs_grad,
                std::function<void(Tape&, const Tensor&)> back);
    Tensor& grad_ref(NodeId id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
    ParamStore* params_;
};

// Adam with bias correction; beta/epsilon fixed at the standard values.
struct AdamState {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::unordered_map<std::string, Tensor> m;
    std::unordered_map<std::string, Tensor> v;
};

// One Adam update over all parameters; gradients are zeroed afterwards.
// Throws on non-finite gradients.
void adam_step(AdamState& state, ParamStore& params);

// Central finite differences of f against the tape gradient at the current
// point. Returns the max relative error (|a-n|) / max(1, |a|, |n|).
double grad_check(const std::function<NodeId(Tape&)>& f, ParamStore& params, double eps);

// Parameter checkpoint: named shapes + value arrays + format version, JSON.
std::string params_to_json_string(const ParamStore& params);
ParamStore params_from_json_string(const std::string& text);
void save_params(const ParamStore& params, const std::string& path);
ParamStore load_params(const std::string& path);

}  // namespace notesurv::ad
