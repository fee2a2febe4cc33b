#include "safeaug/nn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace safeaug::nn {

void Optimizer::ensure_buffers(const std::vector<Param*>& params) {
    if (!buf_m_.empty()) {
        if (buf_m_.size() != params.size()) {
            throw std::logic_error("Optimizer: parameter list changed under running optimizer");
        }
        return;
    }
    buf_m_.resize(params.size());
    buf_v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        buf_m_[i].assign(params[i]->value.size(), 0.0);
        if (spec_.kind == "adam") buf_v_[i].assign(params[i]->value.size(), 0.0);
    }
}

void Optimizer::step(const std::vector<Param*>& params) {
    ensure_buffers(params);
    ++step_count_;
    if (spec_.kind == "sgd") {
        // v = mu*v + g + wd*w; w -= lr*v
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& w = params[i]->value.vec();
            const auto& g = params[i]->grad.vec();
            auto& v = buf_m_[i];
            for (std::size_t j = 0; j < w.size(); ++j) {
                const double d = g[j] + spec_.weight_decay * w[j];
                v[j] = spec_.momentum * v[j] + d;
                w[j] -= spec_.lr * v[j];
            }
        }
    } else if (spec_.kind == "adam") {
        const double bc1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(step_count_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& w = params[i]->value.vec();
            const auto& g = params[i]->grad.vec();
            auto& m = buf_m_[i];
            auto& v = buf_v_[i];
            for (std::size_t j = 0; j < w.size(); ++j) {
                const double d = g[j] + spec_.weight_decay * w[j];
                m[j] = spec_.beta1 * m[j] + (1.0 - spec_.beta1) * d;
                v[j] = spec_.beta2 * v[j] + (1.0 - spec_.beta2) * d * d;
                w[j] -= spec_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + spec_.eps);
            }
        }
    } else {
        throw std::invalid_argument("Optimizer: unknown kind '" + spec_.kind + "'");
    }
}

std::vector<double> Optimizer::state_blob() const {
    std::vector<double> blob;
    blob.push_back(static_cast<double>(step_count_));
    blob.push_back(spec_.lr);
    for (const auto& buf : buf_m_) blob.insert(blob.end(), buf.begin(), buf.end());
    for (const auto& buf : buf_v_) blob.insert(blob.end(), buf.begin(), buf.end());
    return blob;
}

void Optimizer::restore_state(const std::vector<double>& blob) {
    std::size_t expect = 2;
    for (const auto& buf : buf_m_) expect += buf.size();
    for (const auto& buf : buf_v_) expect += buf.size();
    if (buf_m_.empty()) {
        throw std::logic_error("Optimizer::restore_state: allocate() first");
    }
    if (blob.size() != expect) {
        throw std::invalid_argument("Optimizer::restore_state: blob size mismatch");
    }
    std::size_t off = 0;
    step_count_ = static_cast<long long>(blob[off++]);
    spec_.lr = blob[off++];
    for (auto& buf : buf_m_) {
        std::copy_n(blob.begin() + off, buf.size(), buf.begin());
        off += buf.size();
    }
    for (auto& buf : buf_v_) {
        std::copy_n(blob.begin() + off, buf.size(), buf.begin());
        off += buf.size();
    }
}

}  // namespace safeaug::nn
