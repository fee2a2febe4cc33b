#include "safeaug/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace safeaug::nn {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatCM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;
using MapCM = Eigen::Map<MatCM>;
using CMapCM = Eigen::Map<const MatCM>;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

int conv_out(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng& init)
    : in_ch_(in_channels), out_ch_(out_channels), kernel_(kernel), stride_(stride), pad_(pad),
      weight_("conv.weight", {out_channels, in_channels * kernel * kernel}),
      bias_("conv.bias", {out_channels}) {
    const double std = std::sqrt(2.0 / (in_channels * kernel * kernel));
    for (auto& w : weight_.value.vec()) w = init.normal(0.0, std);
}

void Conv2d::im2col(const double* sample, int h, int w, int oh, int ow) {
    const int K = in_ch_ * kernel_ * kernel_;
    const int S = oh * ow;
    col_.resize(static_cast<std::size_t>(K) * S);
    // Column-major (K x S): one output position per column.
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const int m = oy * ow + ox;
            double* colp = col_.data() + static_cast<std::size_t>(m) * K;
            for (int ci = 0; ci < in_ch_; ++ci) {
                const double* chan = sample + static_cast<std::size_t>(ci) * h * w;
                for (int ky = 0; ky < kernel_; ++ky) {
                    const int iy = oy * stride_ - pad_ + ky;
                    for (int kx = 0; kx < kernel_; ++kx) {
                        const int ix = ox * stride_ - pad_ + kx;
                        const int r = (ci * kernel_ + ky) * kernel_ + kx;
                        colp[r] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                      ? chan[static_cast<std::size_t>(iy) * w + ix]
                                      : 0.0;
                    }
                }
            }
        }
    }
}

Tensor Conv2d::forward(const std::vector<const Tensor*>& inputs, bool) {
    const Tensor& x = *inputs.at(0);
    require(x.ndim() == 4 && x.dim(1) == in_ch_, "conv2d: input shape " + x.shape_str());
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = conv_out(h, kernel_, stride_, pad_);
    const int ow = conv_out(w, kernel_, stride_, pad_);
    require(oh > 0 && ow > 0, "conv2d: input too small for kernel");
    const int K = in_ch_ * kernel_ * kernel_;
    const int S = oh * ow;

    Tensor y({n, out_ch_, oh, ow});
    CMapRM W(weight_.value.data(), out_ch_, K);
    const std::size_t sample_in = static_cast<std::size_t>(in_ch_) * h * w;
    const std::size_t sample_out = static_cast<std::size_t>(out_ch_) * S;
    for (int i = 0; i < n; ++i) {
        im2col(x.data() + i * sample_in, h, w, oh, ow);
        CMapCM col(col_.data(), K, S);
        MapRM out(y.data() + i * sample_out, out_ch_, S);
        out.noalias() = W * col;
        for (int co = 0; co < out_ch_; ++co) {
            double* row = y.data() + i * sample_out + static_cast<std::size_t>(co) * S;
            const double b = bias_.value[co];
            for (int m = 0; m < S; ++m) row[m] += b;
        }
    }
    return y;
}

std::vector<Tensor> Conv2d::backward(const std::vector<const Tensor*>& inputs, const Tensor&,
                                     const Tensor& grad_out) {
    const Tensor& x = *inputs.at(0);
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = grad_out.dim(2), ow = grad_out.dim(3);
    const int K = in_ch_ * kernel_ * kernel_;
    const int S = oh * ow;

    Tensor gx({n, in_ch_, h, w});
    CMapRM W(weight_.value.data(), out_ch_, K);
    MapRM gW(weight_.grad.data(), out_ch_, K);
    const std::size_t sample_in = static_cast<std::size_t>(in_ch_) * h * w;
    const std::size_t sample_out = static_cast<std::size_t>(out_ch_) * S;
    MatCM gcol(K, S);

    for (int i = 0; i < n; ++i) {
        im2col(x.data() + i * sample_in, h, w, oh, ow);
        CMapCM col(col_.data(), K, S);
        CMapRM gout(grad_out.data() + i * sample_out, out_ch_, S);

        gW.noalias() += gout * col.transpose();
        for (int co = 0; co < out_ch_; ++co) {
            const double* row = grad_out.data() + i * sample_out + static_cast<std::size_t>(co) * S;
            double acc = 0.0;
            for (int m = 0; m < S; ++m) acc += row[m];
            bias_.grad[co] += acc;
        }

        gcol.noalias() = W.transpose() * gout;
        // col2im: accumulate column gradients back into the input layout.
        double* gxp = gx.data() + i * sample_in;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const int m = oy * ow + ox;
                const double* gc = gcol.data() + static_cast<std::size_t>(m) * K;
                for (int ci = 0; ci < in_ch_; ++ci) {
                    for (int ky = 0; ky < kernel_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kernel_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix < 0 || ix >= w) continue;
                            gxp[(static_cast<std::size_t>(ci) * h + iy) * w + ix] +=
                                gc[(ci * kernel_ + ky) * kernel_ + kx];
                        }
                    }
                }
            }
        }
    }
    return {std::move(gx)};
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(int in_features, int out_features, Rng& init)
    : in_f_(in_features), out_f_(out_features),
      weight_("linear.weight", {out_features, in_features}), bias_("linear.bias", {out_features}) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
    for (auto& w : weight_.value.vec()) w = init.uniform(-bound, bound);
    for (auto& b : bias_.value.vec()) b = init.uniform(-bound, bound);
}

Tensor Linear::forward(const std::vector<const Tensor*>& inputs, bool) {
    const Tensor& x = *inputs.at(0);
    require(x.ndim() == 2 && x.dim(1) == in_f_, "linear: input shape " + x.shape_str());
    const int n = x.dim(0);
    Tensor y({n, out_f_});
    CMapRM X(x.data(), n, in_f_);
    CMapRM W(weight_.value.data(), out_f_, in_f_);
    MapRM Y(y.data(), n, out_f_);
    Y.noalias() = X * W.transpose();
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < out_f_; ++o) Y(i, o) += bias_.value[o];
    return y;
}

std::vector<Tensor> Linear::backward(const std::vector<const Tensor*>& inputs, const Tensor&,
                                     const Tensor& grad_out) {
    const Tensor& x = *inputs.at(0);
    const int n = x.dim(0);
    Tensor gx({n, in_f_});
    CMapRM X(x.data(), n, in_f_);
    CMapRM W(weight_.value.data(), out_f_, in_f_);
    CMapRM gY(grad_out.data(), n, out_f_);
    MapRM gX(gx.data(), n, in_f_);
    MapRM gW(weight_.grad.data(), out_f_, in_f_);
    gX.noalias() = gY * W;
    gW.noalias() += gY.transpose() * X;
    for (int o = 0; o < out_f_; ++o) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += grad_out.at2(i, o);
        bias_.grad[o] += acc;
    }
    return {std::move(gx)};
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const std::vector<const Tensor*>& inputs, bool) {
    const Tensor& x = *inputs.at(0);
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

std::vector<Tensor> ReLU::backward(const std::vector<const Tensor*>& inputs, const Tensor&,
                                   const Tensor& grad_out) {
    const Tensor& x = *inputs.at(0);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
    return {std::move(gx)};
}

// ---------------------------------------------------------------------------
// MaxPool2d
// ---------------------------------------------------------------------------

Tensor MaxPool2d::forward(const std::vector<const Tensor*>& inputs, bool) {
    const Tensor& x = *inputs.at(0);
    require(x.ndim() == 4, "maxpool: expects NCHW");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = conv_out(h, kernel_, stride_, pad_);
    const int ow = conv_out(w, kernel_, stride_, pad_);
    require(oh > 0 && ow > 0, "maxpool: input too small");
    Tensor y({n, c, oh, ow});
    argmax_.assign(y.size(), -1);
    std::size_t oi = 0;
    for (int i = 0; i < n; ++i) {
        for (int ci = 0; ci < c; ++ci) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox, ++oi) {
                    double best = -std::numeric_limits<double>::infinity();
                    int best_idx = -1;
                    for (int ky = 0; ky < kernel_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kernel_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix < 0 || ix >= w) continue;
                            const double v = x.at4(i, ci, iy, ix);
                            if (v > best) {
                                best = v;
                                best_idx = ((i * c + ci) * h + iy) * w + ix;
                            }
                        }
                    }
                    y[oi] = best;
                    argmax_[oi] = best_idx;
                }
            }
        }
    }
    return y;
}

std::vector<Tensor> MaxPool2d::backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                        const Tensor& grad_out) {
    const Tensor& x = *inputs.at(0);
    require(argmax_.size() == output.size(), "maxpool: backward before forward");
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
        if (argmax_[i] >= 0) gx[argmax_[i]] += grad_out[i];
    }
    return {std::move(gx)};
}

// ---------------------------------------------------------------------------
// AvgPool2d
// ---------------------------------------------------------------------------

Tensor AvgPool2d::forward(const std::vector<const Tensor*>& inputs, bool) {
    const Tensor& x = *inputs.at(0);
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = conv_out(h, kernel_, stride_, 0);
    const int ow = conv_out(w, kernel_, stride_, 0);
    require(oh > 0 && ow > 0, "avgpool: input too small");
    Tensor y({n, c, oh, ow});
    const double norm = 1.0 / (kernel_ * kernel_);
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (int ky = 0; ky < kernel_; ++ky)
                        for (int kx = 0; kx < kernel_; ++kx)
                            acc += x.at4(i, ci, oy * stride_ + ky, ox * stride_ + kx);
                    y.at4(i, ci, oy, ox) = acc * norm;
                }
    return y;
}

std::vector<Tensor> AvgPool2d::backward(const std::vector<const Tensor*>& inputs, const Tensor&,
                                        const Tensor& grad_out) {
    const Tensor& x = *inputs.at(0);
    Tensor gx(x.shape());
    const int oh = grad_out.dim(2), ow = grad_out.dim(3);
    const double norm = 1.0 / (kernel_ * kernel_);
    for (int i = 0; i < x.dim(0); ++i)
        for (int ci = 0; ci < x.dim(1); ++ci)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const double g = grad_out.at4(i, ci, oy, ox) * norm;
                    for (int ky = 0; ky < kernel_; ++ky)
                        for (int kx = 0; kx < kernel_; ++kx)
                            gx.at4(i, ci, oy * stride_ + ky, ox * stride_ + kx) += g;
                }
    return {std::move(gx)};
}

// ---------------------------------------------------------------------------
// GlobalAvgPool
// ---------------------------------------------------------------------------

Tensor GlobalAvgPool::forward(const std::vector<const Tensor*>& inputs, bool) {
    const Tensor& x = *inputs.at(0);
    require(x.ndim() == 4, "gap: expects NCHW");
    const int n = x.dim(0), c = x.dim(1);
    const int hw = x.dim(2) * x.dim(3);
    Tensor y({n, c});
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci) {
            double acc = 0.0;
            const double* p = x.data() + (static_cast<std::size_t>(i) * c + ci) * hw;
            for (int k = 0; k < hw; ++k) acc += p[k];
            y.at2(i, ci) = acc / hw;
        }
    return y;
}

std::vector<Tensor> GlobalAvgPool::backward(const std::vector<const Tensor*>& inputs, const Tensor&,
                                            const Tensor& grad_out) {
    const Tensor& x = *inputs.at(0);
    const int n = x.dim(0), c = x.dim(1);
    const int hw = x.dim(2) * x.dim(3);
    Tensor gx(x.shape());
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci) {
            const double g = grad_out.at2(i, ci) / hw;
            double* p = gx.data() + (static_cast<std::size_t>(i) * c + ci) * hw;
            for (int k = 0; k < hw; ++k) p[k] = g;
        }
    return {std::move(gx)};
}

// ---------------------------------------------------------------------------
// BatchNorm2d
// ---------------------------------------------------------------------------

BatchNorm2d::BatchNorm2d(int channels, double eps, double momentum)
    : channels_(channels), eps_(eps), momentum_(momentum),
      gamma_("bn.gamma", {channels}), beta_("bn.beta", {channels}),
      running_mean_({channels}), running_var_({channels}) {
    for (auto& g : gamma_.value.vec()) g = 1.0;
    for (auto& v : running_var_.vec()) v = 1.0;
}

Tensor BatchNorm2d::forward(const std::vector<const Tensor*>& inputs, bool training) {
    const Tensor& x = *inputs.at(0);
    require(x.ndim() == 4 && x.dim(1) == channels_, "batchnorm: input shape " + x.shape_str());
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t m = static_cast<std::size_t>(n) * h * w;
    last_training_ = training;
    saved_mean_.assign(channels_, 0.0);
    saved_inv_std_.assign(channels_, 0.0);

    Tensor y(x.shape());
    for (int c = 0; c < channels_; ++c) {
        double mean, var;
        if (training) {
            double s = 0.0, s2 = 0.0;
            for (int i = 0; i < n; ++i)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx) {
                        const double v = x.at4(i, c, yy, xx);
                        s += v;
                        s2 += v * v;
                    }
            mean = s / m;
            var = std::max(0.0, s2 / m - mean * mean);
            running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
            // Unbiased variance in the running estimate, as is conventional.
            const double unbiased = m > 1 ? var * m / (m - 1.0) : var;
            running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * unbiased;
        } else {
            mean = running_mean_[c];
            var = running_var_[c];
        }
        const double inv_std = 1.0 / std::sqrt(var + eps_);
        saved_mean_[c] = mean;
        saved_inv_std_[c] = inv_std;
        const double g = gamma_.value[c], b = beta_.value[c];
        for (int i = 0; i < n; ++i)
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx)
                    y.at4(i, c, yy, xx) = g * ((x.at4(i, c, yy, xx) - mean) * inv_std) + b;
    }
    return y;
}

std::vector<Tensor> BatchNorm2d::backward(const std::vector<const Tensor*>& inputs, const Tensor&,
                                          const Tensor& grad_out) {
    const Tensor& x = *inputs.at(0);
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const double m = static_cast<double>(n) * h * w;
    Tensor gx(x.shape());
    for (int c = 0; c < channels_; ++c) {
        const double mean = saved_mean_[c];
        const double inv_std = saved_inv_std_[c];
        const double g = gamma_.value[c];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < n; ++i)
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) {
                    const double dy = grad_out.at4(i, c, yy, xx);
                    const double xhat = (x.at4(i, c, yy, xx) - mean) * inv_std;
                    sum_dy += dy;
                    sum_dy_xhat += dy * xhat;
                }
        gamma_.grad[c] += sum_dy_xhat;
        beta_.grad[c] += sum_dy;
        if (last_training_) {
            for (int i = 0; i < n; ++i)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx) {
                        const double dy = grad_out.at4(i, c, yy, xx);
                        const double xhat = (x.at4(i, c, yy, xx) - mean) * inv_std;
                        gx.at4(i, c, yy, xx) = g * inv_std / m * (m * dy - sum_dy - xhat * sum_dy_xhat);
                    }
        } else {
            for (int i = 0; i < n; ++i)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx)
                        gx.at4(i, c, yy, xx) = grad_out.at4(i, c, yy, xx) * g * inv_std;
        }
    }
    return {std::move(gx)};
}

// ---------------------------------------------------------------------------
// Concat / Upsample / Add
// ---------------------------------------------------------------------------

Tensor Concat::forward(const std::vector<const Tensor*>& inputs, bool) {
    require(!inputs.empty(), "concat: no inputs");
    const Tensor& first = *inputs[0];
    int total_c = 0;
    for (const Tensor* t : inputs) {
        require(t->ndim() == 4 && t->dim(0) == first.dim(0) && t->dim(2) == first.dim(2) &&
                    t->dim(3) == first.dim(3),
                "concat: mismatched shapes");
        total_c += t->dim(1);
    }
    const int n = first.dim(0), h = first.dim(2), w = first.dim(3);
    Tensor y({n, total_c, h, w});
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        int c_off = 0;
        for (const Tensor* t : inputs) {
            const int tc = t->dim(1);
            std::copy_n(t->data() + static_cast<std::size_t>(i) * tc * hw, static_cast<std::size_t>(tc) * hw,
                        y.data() + (static_cast<std::size_t>(i) * total_c + c_off) * hw);
            c_off += tc;
        }
    }
    return y;
}

std::vector<Tensor> Concat::backward(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                     const Tensor& grad_out) {
    const int n = output.dim(0), total_c = output.dim(1), h = output.dim(2), w = output.dim(3);
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    std::vector<Tensor> grads;
    grads.reserve(inputs.size());
    for (const Tensor* t : inputs) grads.emplace_back(t->shape());
    for (int i = 0; i < n; ++i) {
        int c_off = 0;
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            const int tc = inputs[k]->dim(1);
            std::copy_n(grad_out.data() + (static_cast<std::size_t>(i) * total_c + c_off) * hw,
                        static_cast<std::size_t>(tc) * hw,
                        grads[k].data() + static_cast<std::size_t>(i) * tc * hw);
            c_off += tc;
        }
    }
    return grads;
}

Tensor UpsampleNearest2x::forward(const std::vector<const Tensor*>& inputs, bool) {
    const Tensor& x = *inputs.at(0);
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y({n, c, 2 * h, 2 * w});
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci)
            for (int yy = 0; yy < 2 * h; ++yy)
                for (int xx = 0; xx < 2 * w; ++xx) y.at4(i, ci, yy, xx) = x.at4(i, ci, yy / 2, xx / 2);
    return y;
}

std::vector<Tensor> UpsampleNearest2x::backward(const std::vector<const Tensor*>& inputs, const Tensor&,
                                                const Tensor& grad_out) {
    const Tensor& x = *inputs.at(0);
    Tensor gx(x.shape());
    const int n = x.dim(0), c = x.dim(1);
    const int oh = grad_out.dim(2), ow = grad_out.dim(3);
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci)
            for (int yy = 0; yy < oh; ++yy)
                for (int xx = 0; xx < ow; ++xx) gx.at4(i, ci, yy / 2, xx / 2) += grad_out.at4(i, ci, yy, xx);
    return {std::move(gx)};
}

Tensor Add::forward(const std::vector<const Tensor*>& inputs, bool) {
    require(inputs.size() >= 2, "add: needs at least two inputs");
    Tensor y(inputs[0]->shape());
    for (const Tensor* t : inputs) {
        require(t->same_shape(y), "add: mismatched shapes");
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += (*t)[i];
    }
    return y;
}

std::vector<Tensor> Add::backward(const std::vector<const Tensor*>& inputs, const Tensor&,
                                  const Tensor& grad_out) {
    std::vector<Tensor> grads;
    for (std::size_t k = 0; k < inputs.size(); ++k) grads.push_back(grad_out);
    return grads;
}

}  // namespace safeaug::nn
