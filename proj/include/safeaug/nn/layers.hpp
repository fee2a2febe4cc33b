#pragma once

#include <memory>
#include <string>
#include <vector>

#include "safeaug/core/rng.hpp"
#include "safeaug/nn/tensor.hpp"

namespace safeaug::nn {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

/// Caffe-style layer: explicit forward and backward. A layer instance caches
/// whatever it needs from the last forward (pool argmax, batch statistics),
/// so a model is driven by exactly one thread at a time.
class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string type() const = 0;
    virtual Tensor forward(const std::vector<const Tensor*>& inputs, bool training) = 0;
    /// Returns gradients w.r.t. each input; parameter gradients accumulate
    /// into Param::grad.
    virtual std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                         const Tensor& grad_output) = 0;
    virtual std::vector<Param*> params() { return {}; }
};

class Conv2d : public Layer {
public:
    Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng& init);
    std::string type() const override { return "conv2d"; }
    Tensor forward(const std::vector<const Tensor*>& inputs, bool training) override;
    std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                 const Tensor& grad_output) override;
    std::vector<Param*> params() override { return {&weight_, &bias_}; }

private:
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    Param weight_;  // (out_ch, in_ch * k * k)
    Param bias_;    // (out_ch)
    AlignedVector col_;  // im2col scratch
    void im2col(const double* sample, int h, int w, int oh, int ow);
};

class Linear : public Layer {
public:
    Linear(int in_features, int out_features, Rng& init);
    std::string type() const override { return "linear"; }
    Tensor forward(const std::vector<const Tensor*>& inputs, bool training) override;
    std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                 const Tensor& grad_output) override;
    std::vector<Param*> params() override { return {&weight_, &bias_}; }

private:
    int in_f_, out_f_;
    Param weight_;  // (out, in)
    Param bias_;    // (out)
};

class ReLU : public Layer {
public:
    std::string type() const override { return "relu"; }
    Tensor forward(const std::vector<const Tensor*>& inputs, bool training) override;
    std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                 const Tensor& grad_output) override;
};

class MaxPool2d : public Layer {
public:
    MaxPool2d(int kernel, int stride, int pad = 0) : kernel_(kernel), stride_(stride), pad_(pad) {}
    std::string type() const override { return "maxpool"; }
    Tensor forward(const std::vector<const Tensor*>& inputs, bool training) override;
    std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                 const Tensor& grad_output) override;

private:
    int kernel_, stride_, pad_;
    std::vector<int> argmax_;  // flat input index per output element
};

class AvgPool2d : public Layer {
public:
    AvgPool2d(int kernel, int stride) : kernel_(kernel), stride_(stride) {}
    std::string type() const override { return "avgpool"; }
    Tensor forward(const std::vector<const Tensor*>& inputs, bool training) override;
    std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                 const Tensor& grad_output) override;

private:
    int kernel_, stride_;
};

class GlobalAvgPool : public Layer {
public:
    std::string type() const override { return "gap"; }
    Tensor forward(const std::vector<const Tensor*>& inputs, bool training) override;
    std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                 const Tensor& grad_output) override;
};

class BatchNorm2d : public Layer {
public:
    explicit BatchNorm2d(int channels, double eps = 1e-5, double momentum = 0.1);
    std::string type() const override { return "batchnorm"; }
    Tensor forward(const std::vector<const Tensor*>& inputs, bool training) override;
    std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                 const Tensor& grad_output) override;
    std::vector<Param*> params() override { return {&gamma_, &beta_}; }

    /// Running statistics travel with checkpoints but are not optimised.
    Tensor& running_mean() { return running_mean_; }
    Tensor& running_var() { return running_var_; }

private:
    int channels_;
    double eps_, momentum_;
    Param gamma_, beta_;
    Tensor running_mean_, running_var_;
    std::vector<double> saved_mean_, saved_inv_std_;
    bool last_training_ = false;
};

/// Channel-axis concatenation of any number of (N, C_i, H, W) inputs.
class Concat : public Layer {
public:
    std::string type() const override { return "concat"; }
    Tensor forward(const std::vector<const Tensor*>& inputs, bool training) override;
    std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                 const Tensor& grad_output) override;
};

class UpsampleNearest2x : public Layer {
public:
    std::string type() const override { return "upsample2x"; }
    Tensor forward(const std::vector<const Tensor*>& inputs, bool training) override;
    std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                 const Tensor& grad_output) override;
};

class Add : public Layer {
public:
    std::string type() const override { return "add"; }
    Tensor forward(const std::vector<const Tensor*>& inputs, bool training) override;
    std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                 const Tensor& grad_output) override;
};

}  // namespace safeaug::nn
