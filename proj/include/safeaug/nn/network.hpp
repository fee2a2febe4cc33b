#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "safeaug/nn/layers.hpp"

namespace safeaug::nn {

/// Static DAG of layers. Node 0 is the network input; nodes are added in
/// topological order (each node's inputs must already exist), so forward
/// runs in insertion order and backward in reverse.
class Network {
public:
    Network() { activations_.resize(1); }

    static constexpr int kInputNode = 0;

    int add(const std::string& name, std::unique_ptr<Layer> layer, std::vector<int> inputs);

    void set_outputs(std::vector<int> output_nodes) { outputs_ = std::move(output_nodes); }
    const std::vector<int>& outputs() const { return outputs_; }

    /// Runs the whole graph; returns activations of the output nodes.
    std::vector<Tensor> forward(const Tensor& input, bool training);

    /// Back-propagates from per-output gradients (aligned with outputs()).
    /// Parameter gradients accumulate; call zero_grad() between steps.
    void backward(const std::vector<Tensor>& output_grads);

    std::vector<Param*> params();
    void zero_grad();

    int node_count() const { return static_cast<int>(nodes_.size()) + 1; }
    const Tensor& activation(int node) const { return activations_.at(node); }
    const std::string& node_name(int node) const { return nodes_.at(node - 1).name; }
    Layer* layer(int node) { return nodes_.at(node - 1).layer.get(); }

    /// Non-parameter state that must travel with checkpoints
    /// (batch-norm running statistics), in a stable node order.
    std::vector<Tensor*> persistent_state();

private:
    struct Node {
        std::string name;
        std::unique_ptr<Layer> layer;
        std::vector<int> inputs;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> activations_;  // index 0 = input
    std::vector<int> outputs_;
};

}  // namespace safeaug::nn
