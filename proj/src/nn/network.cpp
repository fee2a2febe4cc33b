#include "safeaug/nn/network.hpp"

#include <stdexcept>

namespace safeaug::nn {

int Network::add(const std::string& name, std::unique_ptr<Layer> layer, std::vector<int> inputs) {
    const int id = static_cast<int>(nodes_.size()) + 1;
    for (int in : inputs) {
        if (in < 0 || in >= id) {
            throw std::invalid_argument("Network::add('" + name + "'): input node " + std::to_string(in) +
                                        " does not exist yet");
        }
    }
    nodes_.push_back(Node{name, std::move(layer), std::move(inputs)});
    return id;
}

std::vector<Tensor> Network::forward(const Tensor& input, bool training) {
    activations_.assign(node_count(), Tensor());
    activations_[kInputNode] = input;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        std::vector<const Tensor*> ins;
        ins.reserve(nodes_[i].inputs.size());
        for (int in : nodes_[i].inputs) ins.push_back(&activations_[in]);
        activations_[i + 1] = nodes_[i].layer->forward(ins, training);
    }
    std::vector<Tensor> out;
    out.reserve(outputs_.size());
    for (int o : outputs_) out.push_back(activations_.at(o));
    return out;
}

void Network::backward(const std::vector<Tensor>& output_grads) {
    if (output_grads.size() != outputs_.size()) {
        throw std::invalid_argument("Network::backward: expected " + std::to_string(outputs_.size()) +
                                    " output gradients");
    }
    std::vector<Tensor> grads(node_count());
    for (std::size_t k = 0; k < outputs_.size(); ++k) {
        Tensor& g = grads[outputs_[k]];
        if (g.empty()) {
            g = output_grads[k];
        } else {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += output_grads[k][i];
        }
    }
    for (int id = static_cast<int>(nodes_.size()); id >= 1; --id) {
        Tensor& g = grads[id];
        if (g.empty()) continue;  // node not on any path to a used output
        Node& node = nodes_[id - 1];
        std::vector<const Tensor*> ins;
        ins.reserve(node.inputs.size());
        for (int in : node.inputs) ins.push_back(&activations_[in]);
        std::vector<Tensor> gin = node.layer->backward(ins, activations_[id], g);
        if (gin.size() != node.inputs.size()) {
            throw std::logic_error("Network::backward: layer '" + node.name + "' returned wrong grad count");
        }
        for (std::size_t k = 0; k < gin.size(); ++k) {
            Tensor& dst = grads[node.inputs[k]];
            if (dst.empty()) {
                dst = std::move(gin[k]);
            } else {
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gin[k][i];
            }
        }
        g = Tensor();  // free as we go
    }
}

std::vector<Param*> Network::params() {
    std::vector<Param*> out;
    for (auto& node : nodes_) {
        for (Param* p : node.layer->params()) out.push_back(p);
    }
    return out;
}

void Network::zero_grad() {
    for (Param* p : params()) p->grad.zero();
}

std::vector<Tensor*> Network::persistent_state() {
    std::vector<Tensor*> out;
    for (auto& node : nodes_) {
        if (auto* bn = dynamic_cast<BatchNorm2d*>(node.layer.get())) {
            out.push_back(&bn->running_mean());
            out.push_back(&bn->running_var());
        }
    }
    return out;
}

}  // namespace safeaug::nn
