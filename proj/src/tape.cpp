#include "randrl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "randrl/error.hpp"
#include "randrl/kernels.hpp"
#include "randrl/nn.hpp"

namespace randrl {

int Tape::check(Var v, const char* op) const {
    if (!v.valid()) throw GraphError(std::string(op) + ": invalid Var");
    if (v.tape != this)
        throw GraphError(std::string(op) + ": Var belongs to a different tape");
    if (static_cast<size_t>(v.id) >= nodes_.size())
        throw GraphError(std::string(op) + ": Var id out of range");
    return v.id;
}

Var Tape::make(Tensor value, bool requires_grad, std::function<void(Tape&)> bp,
               const char* op) {
    if (check_finite_ && !value.all_finite())
        throw ValueError(std::string(op) + ": non-finite forward output");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backprop = std::move(bp);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Tensor v, bool requires_grad) {
    return make(std::move(v), requires_grad, nullptr, "input");
}

Var Tape::param(nn::Param& p) {
    auto it = param_ids_.find(&p);
    if (it != param_ids_.end()) return Var{this, it->second};
    if (!p.grad.same_shape(p.value))
        throw ValueError("param: grad/value shape mismatch for " + p.name);
    const int id = static_cast<int>(nodes_.size());
    Node n;
    n.ext = &p.value;
    n.requires_grad = true;
    nn::Param* pp = &p;
    n.backprop = [id, pp](Tape& t) {
        const Tensor& g = t.g_(id);
        float* dst = pp->grad.data();
        const float* src = g.data();
        for (int64_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
    };
    nodes_.push_back(std::move(n));
    param_ids_.emplace(&p, id);
    return Var{this, id};
}

const Tensor& Tape::val(Var v) const { return nodes_[static_cast<size_t>(check(v, "val"))].v(); }

const Tensor& Tape::grad(Var v) const {
    const Node& n = nodes_[static_cast<size_t>(check(v, "grad"))];
    if (!backward_done_) throw ContractError("grad: backward has not run");
    if (!n.requires_grad)
        throw GraphError("grad: node does not require gradients");
    return n.grad;
}

void Tape::backward(Var loss) {
    if (backward_done_) throw ContractError("backward called twice on one tape");
    const int lid = check(loss, "backward");
    if (nodes_[static_cast<size_t>(lid)].v().numel() != 1)
        throw ValueError("backward: loss must be a scalar, got shape " +
                         nodes_[static_cast<size_t>(lid)].v().shape_str());
    if (!nodes_[static_cast<size_t>(lid)].requires_grad)
        throw GraphError("backward: loss does not depend on any differentiable leaf");
    backward_done_ = true;
    for (auto& n : nodes_)
        if (n.requires_grad) n.grad = Tensor(n.v().shape());
    nodes_[static_cast<size_t>(lid)].grad[0] = 1.0f;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (n.backprop) n.backprop(*this);
    }
}

// --------------------------------------------------------------------------

Var Tape::conv2d(Var x, Var w, Var bias, int stride, int pad) {
    const int xi = check(x, "conv2d"), wi = check(w, "conv2d");
    const int bi = bias.valid() ? check(bias, "conv2d") : -1;
    const Tensor& xv = v_(xi);
    const Tensor& wv = v_(wi);
    if (xv.rank() != 4)
        throw ValueError("conv2d: x must be (N,C,H,W), got " + xv.shape_str());
    if (wv.rank() != 4 || wv.dim(2) != wv.dim(3))
        throw ValueError("conv2d: w must be (Co,Ci,K,K), got " + wv.shape_str());
    if (wv.dim(1) != xv.dim(1))
        throw ValueError("conv2d: channel mismatch between x " + xv.shape_str() +
                         " and w " + wv.shape_str());
    kernels::ConvDims d{static_cast<int>(xv.dim(0)), static_cast<int>(xv.dim(1)),
                        static_cast<int>(xv.dim(2)), static_cast<int>(xv.dim(3)),
                        static_cast<int>(wv.dim(0)), static_cast<int>(wv.dim(2)),
                        stride, pad};
    if (bi >= 0 && (v_(bi).rank() != 1 || v_(bi).dim(0) != d.co))
        throw ValueError("conv2d: bias must have shape (Co)");
    Tensor y({d.n, d.co, d.h_out(), d.w_out()});
    kernels::conv2d_forward(xv.data(), wv.data(), bi >= 0 ? v_(bi).data() : nullptr,
                            y.data(), d);
    const bool rx = rg_(xi), rw = rg_(wi), rb = bi >= 0 && rg_(bi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, wi, bi, rx, rw, rb, d](Tape& t) {
        const Tensor& gy = t.g_(yid);
        if (rx)
            kernels::conv2d_backward_input(gy.data(), t.v_(wi).data(),
                                           t.g_(xi).data(), d);
        if (rw)
            kernels::conv2d_backward_weight(t.v_(xi).data(), gy.data(),
                                            t.g_(wi).data(), nullptr, d);
        if (rb) kernels::conv2d_backward_bias(gy.data(), t.g_(bi).data(), d);
    };
    return make(std::move(y), rx || rw || rb, std::move(bp), "conv2d");
}

Var Tape::dense(Var x, Var w, Var bias) {
    const int xi = check(x, "dense"), wi = check(w, "dense");
    const int bi = bias.valid() ? check(bias, "dense") : -1;
    const Tensor& xv = v_(xi);
    const Tensor& wv = v_(wi);
    if (xv.rank() != 2) throw ValueError("dense: x must be (N,I), got " + xv.shape_str());
    if (wv.rank() != 2 || wv.dim(1) != xv.dim(1))
        throw ValueError("dense: w must be (O,I) with I matching x, got " +
                         wv.shape_str() + " vs x " + xv.shape_str());
    const int n = static_cast<int>(xv.dim(0));
    const int in = static_cast<int>(xv.dim(1));
    const int out = static_cast<int>(wv.dim(0));
    if (bi >= 0 && (v_(bi).rank() != 1 || v_(bi).dim(0) != out))
        throw ValueError("dense: bias must have shape (O)");
    Tensor y({n, out});
    kernels::dense_forward(xv.data(), wv.data(), bi >= 0 ? v_(bi).data() : nullptr,
                           y.data(), n, in, out);
    const bool rx = rg_(xi), rw = rg_(wi), rb = bi >= 0 && rg_(bi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, wi, bi, rx, rw, rb, n, in, out](Tape& t) {
        const Tensor& gy = t.g_(yid);
        if (rx)
            kernels::dense_backward_input(gy.data(), t.v_(wi).data(),
                                          t.g_(xi).data(), n, in, out);
        if (rw)
            kernels::dense_backward_weight(t.v_(xi).data(), gy.data(),
                                           t.g_(wi).data(),
                                           rb ? t.g_(bi).data() : nullptr, n, in, out);
        else if (rb) {
            float* gb = t.g_(bi).data();
            for (int o = 0; o < out; ++o) {
                double s = 0.0;
                for (int r = 0; r < n; ++r) s += gy[static_cast<int64_t>(r) * out + o];
                gb[o] += static_cast<float>(s);
            }
        }
    };
    return make(std::move(y), rx || rw || rb, std::move(bp), "dense");
}

Var Tape::relu(Var x) {
    const int xi = check(x, "relu");
    Tensor y = v_(xi);
    float* d = y.data();
    for (int64_t i = 0; i < y.numel(); ++i)
        if (d[i] < 0.0f) d[i] = 0.0f;
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx](Tape& t) {
        if (!rx) return;
        const Tensor& gy = t.g_(yid);
        const Tensor& xv = t.v_(xi);
        Tensor& gx = t.g_(xi);
        for (int64_t i = 0; i < gy.numel(); ++i)
            if (xv[i] > 0.0f) gx[i] += gy[i];
    };
    return make(std::move(y), rx, std::move(bp), "relu");
}

Var Tape::tanh_(Var x) {
    const int xi = check(x, "tanh");
    Tensor y = v_(xi);
    float* d = y.data();
    for (int64_t i = 0; i < y.numel(); ++i) d[i] = std::tanh(d[i]);
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx](Tape& t) {
        if (!rx) return;
        const Tensor& gy = t.g_(yid);
        const Tensor& yv = t.v_(yid);
        Tensor& gx = t.g_(xi);
        for (int64_t i = 0; i < gy.numel(); ++i)
            gx[i] += gy[i] * (1.0f - yv[i] * yv[i]);
    };
    return make(std::move(y), rx, std::move(bp), "tanh");
}

Var Tape::maxpool2x2(Var x) {
    const int xi = check(x, "maxpool2x2");
    const Tensor& xv = v_(xi);
    if (xv.rank() != 4)
        throw ValueError("maxpool2x2: x must be (N,C,H,W), got " + xv.shape_str());
    const int n = static_cast<int>(xv.dim(0)), c = static_cast<int>(xv.dim(1));
    const int h = static_cast<int>(xv.dim(2)), w = static_cast<int>(xv.dim(3));
    Tensor y({n, c, h / 2, w / 2});
    auto amax = std::make_shared<std::vector<uint8_t>>(
        static_cast<size_t>(y.numel()));
    kernels::maxpool2x2_forward(xv.data(), y.data(), amax->data(), n, c, h, w);
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx, amax, n, c, h, w](Tape& t) {
        if (!rx) return;
        kernels::maxpool2x2_backward(t.g_(yid).data(), amax->data(),
                                     t.g_(xi).data(), n, c, h, w);
    };
    return make(std::move(y), rx, std::move(bp), "maxpool2x2");
}

Var Tape::softmax_rows(Var x) {
    const int xi = check(x, "softmax_rows");
    Tensor y = v_(xi);
    nn::softmax_rows_inplace(y);
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx](Tape& t) {
        if (!rx) return;
        const Tensor& gy = t.g_(yid);
        const Tensor& yv = t.v_(yid);
        Tensor& gx = t.g_(xi);
        const int64_t rows = yv.dim(0), cols = yv.dim(1);
        for (int64_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (int64_t c = 0; c < cols; ++c)
                dot += gy[r * cols + c] * yv[r * cols + c];
            for (int64_t c = 0; c < cols; ++c)
                gx[r * cols + c] +=
                    yv[r * cols + c] * (gy[r * cols + c] - static_cast<float>(dot));
        }
    };
    return make(std::move(y), rx, std::move(bp), "softmax_rows");
}

Var Tape::log_softmax_rows(Var x) {
    const int xi = check(x, "log_softmax_rows");
    const Tensor& xv = v_(xi);
    if (xv.rank() != 2)
        throw ValueError("log_softmax_rows: expected rank-2, got " + xv.shape_str());
    Tensor y = xv;
    const int64_t rows = y.dim(0), cols = y.dim(1);
    for (int64_t r = 0; r < rows; ++r) {
        float* row = y.data() + r * cols;
        float mx = row[0];
        for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (int64_t c = 0; c < cols; ++c) sum += std::exp(static_cast<double>(row[c] - mx));
        const float lse = mx + static_cast<float>(std::log(sum));
        for (int64_t c = 0; c < cols; ++c) row[c] -= lse;
    }
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx](Tape& t) {
        if (!rx) return;
        const Tensor& gy = t.g_(yid);
        const Tensor& yv = t.v_(yid);
        Tensor& gx = t.g_(xi);
        const int64_t rows = yv.dim(0), cols = yv.dim(1);
        for (int64_t r = 0; r < rows; ++r) {
            double gsum = 0.0;
            for (int64_t c = 0; c < cols; ++c) gsum += gy[r * cols + c];
            for (int64_t c = 0; c < cols; ++c)
                gx[r * cols + c] += gy[r * cols + c] -
                                    std::exp(yv[r * cols + c]) * static_cast<float>(gsum);
        }
    };
    return make(std::move(y), rx, std::move(bp), "log_softmax_rows");
}

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ValueError(std::string(op) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
}

Var Tape::add(Var a, Var b) {
    const int ai = check(a, "add"), bi = check(b, "add");
    check_same_shape(v_(ai), v_(bi), "add");
    Tensor y = v_(ai);
    const Tensor& bv = v_(bi);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] += bv[i];
    const bool ra = rg_(ai), rb = rg_(bi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, ai, bi, ra, rb](Tape& t) {
        const Tensor& gy = t.g_(yid);
        if (ra) {
            Tensor& ga = t.g_(ai);
            for (int64_t i = 0; i < gy.numel(); ++i) ga[i] += gy[i];
        }
        if (rb) {
            Tensor& gb = t.g_(bi);
            for (int64_t i = 0; i < gy.numel(); ++i) gb[i] += gy[i];
        }
    };
    return make(std::move(y), ra || rb, std::move(bp), "add");
}

Var Tape::sub(Var a, Var b) {
    const int ai = check(a, "sub"), bi = check(b, "sub");
    check_same_shape(v_(ai), v_(bi), "sub");
    Tensor y = v_(ai);
    const Tensor& bv = v_(bi);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] -= bv[i];
    const bool ra = rg_(ai), rb = rg_(bi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, ai, bi, ra, rb](Tape& t) {
        const Tensor& gy = t.g_(yid);
        if (ra) {
            Tensor& ga = t.g_(ai);
            for (int64_t i = 0; i < gy.numel(); ++i) ga[i] += gy[i];
        }
        if (rb) {
            Tensor& gb = t.g_(bi);
            for (int64_t i = 0; i < gy.numel(); ++i) gb[i] -= gy[i];
        }
    };
    return make(std::move(y), ra || rb, std::move(bp), "sub");
}

Var Tape::mul(Var a, Var b) {
    const int ai = check(a, "mul"), bi = check(b, "mul");
    check_same_shape(v_(ai), v_(bi), "mul");
    Tensor y = v_(ai);
    const Tensor& bv = v_(bi);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] *= bv[i];
    const bool ra = rg_(ai), rb = rg_(bi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, ai, bi, ra, rb](Tape& t) {
        const Tensor& gy = t.g_(yid);
        if (ra) {
            Tensor& ga = t.g_(ai);
            const Tensor& bv2 = t.v_(bi);
            for (int64_t i = 0; i < gy.numel(); ++i) ga[i] += gy[i] * bv2[i];
        }
        if (rb) {
            Tensor& gb = t.g_(bi);
            const Tensor& av2 = t.v_(ai);
            for (int64_t i = 0; i < gy.numel(); ++i) gb[i] += gy[i] * av2[i];
        }
    };
    return make(std::move(y), ra || rb, std::move(bp), "mul");
}

Var Tape::min_elem(Var a, Var b) {
    const int ai = check(a, "min_elem"), bi = check(b, "min_elem");
    check_same_shape(v_(ai), v_(bi), "min_elem");
    Tensor y = v_(ai);
    const Tensor& bv = v_(bi);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::min(y[i], bv[i]);
    const bool ra = rg_(ai), rb = rg_(bi);
    const int yid = static_cast<int>(nodes_.size());
    // ties route the gradient to the first argument
    auto bp = [yid, ai, bi, ra, rb](Tape& t) {
        const Tensor& gy = t.g_(yid);
        const Tensor& av = t.v_(ai);
        const Tensor& bv2 = t.v_(bi);
        for (int64_t i = 0; i < gy.numel(); ++i) {
            if (av[i] <= bv2[i]) {
                if (ra) t.g_(ai)[i] += gy[i];
            } else if (rb) {
                t.g_(bi)[i] += gy[i];
            }
        }
    };
    return make(std::move(y), ra || rb, std::move(bp), "min_elem");
}

Var Tape::scale(Var x, float c) {
    const int xi = check(x, "scale");
    Tensor y = v_(xi);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] *= c;
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx, c](Tape& t) {
        if (!rx) return;
        const Tensor& gy = t.g_(yid);
        Tensor& gx = t.g_(xi);
        for (int64_t i = 0; i < gy.numel(); ++i) gx[i] += c * gy[i];
    };
    return make(std::move(y), rx, std::move(bp), "scale");
}

Var Tape::add_const(Var x, float c) {
    const int xi = check(x, "add_const");
    Tensor y = v_(xi);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] += c;
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx](Tape& t) {
        if (!rx) return;
        const Tensor& gy = t.g_(yid);
        Tensor& gx = t.g_(xi);
        for (int64_t i = 0; i < gy.numel(); ++i) gx[i] += gy[i];
    };
    return make(std::move(y), rx, std::move(bp), "add_const");
}

Var Tape::exp_(Var x) {
    const int xi = check(x, "exp");
    Tensor y = v_(xi);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::exp(y[i]);
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx](Tape& t) {
        if (!rx) return;
        const Tensor& gy = t.g_(yid);
        const Tensor& yv = t.v_(yid);
        Tensor& gx = t.g_(xi);
        for (int64_t i = 0; i < gy.numel(); ++i) gx[i] += gy[i] * yv[i];
    };
    return make(std::move(y), rx, std::move(bp), "exp");
}

Var Tape::square(Var x) {
    const int xi = check(x, "square");
    Tensor y = v_(xi);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] *= y[i];
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx](Tape& t) {
        if (!rx) return;
        const Tensor& gy = t.g_(yid);
        const Tensor& xv = t.v_(xi);
        Tensor& gx = t.g_(xi);
        for (int64_t i = 0; i < gy.numel(); ++i) gx[i] += 2.0f * xv[i] * gy[i];
    };
    return make(std::move(y), rx, std::move(bp), "square");
}

Var Tape::clamp(Var x, float lo, float hi) {
    if (lo > hi) throw ValueError("clamp: lo > hi");
    const int xi = check(x, "clamp");
    Tensor y = v_(xi);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::min(std::max(y[i], lo), hi);
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx, lo, hi](Tape& t) {
        if (!rx) return;
        const Tensor& gy = t.g_(yid);
        const Tensor& xv = t.v_(xi);
        Tensor& gx = t.g_(xi);
        for (int64_t i = 0; i < gy.numel(); ++i)
            if (xv[i] >= lo && xv[i] <= hi) gx[i] += gy[i];
    };
    return make(std::move(y), rx, std::move(bp), "clamp");
}

Var Tape::sum_all(Var x) {
    const int xi = check(x, "sum_all");
    const Tensor& xv = v_(xi);
    double s = 0.0;
    for (int64_t i = 0; i < xv.numel(); ++i) s += xv[i];
    Tensor y({1});
    y[0] = static_cast<float>(s);
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx](Tape& t) {
        if (!rx) return;
        const float g = t.g_(yid)[0];
        Tensor& gx = t.g_(xi);
        for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
    };
    return make(std::move(y), rx, std::move(bp), "sum_all");
}

Var Tape::mean_all(Var x) {
    const int xi = check(x, "mean_all");
    const Tensor& xv = v_(xi);
    if (xv.numel() == 0) throw ValueError("mean_all: empty tensor");
    double s = 0.0;
    for (int64_t i = 0; i < xv.numel(); ++i) s += xv[i];
    Tensor y({1});
    y[0] = static_cast<float>(s / static_cast<double>(xv.numel()));
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    const float inv = 1.0f / static_cast<float>(xv.numel());
    auto bp = [yid, xi, rx, inv](Tape& t) {
        if (!rx) return;
        const float g = t.g_(yid)[0] * inv;
        Tensor& gx = t.g_(xi);
        for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
    };
    return make(std::move(y), rx, std::move(bp), "mean_all");
}

Var Tape::row_gather(Var x, std::vector<int> idx) {
    const int xi = check(x, "row_gather");
    const Tensor& xv = v_(xi);
    if (xv.rank() != 2)
        throw ValueError("row_gather: expected rank-2, got " + xv.shape_str());
    const int64_t rows = xv.dim(0), cols = xv.dim(1);
    if (static_cast<int64_t>(idx.size()) != rows)
        throw ValueError("row_gather: index count does not match row count");
    for (int c : idx)
        if (c < 0 || c >= cols) throw ValueError("row_gather: index out of range");
    Tensor y({rows});
    for (int64_t r = 0; r < rows; ++r) y[r] = xv[r * cols + idx[static_cast<size_t>(r)]];
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx, idx = std::move(idx), cols](Tape& t) {
        if (!rx) return;
        const Tensor& gy = t.g_(yid);
        Tensor& gx = t.g_(xi);
        for (int64_t r = 0; r < gy.numel(); ++r)
            gx[r * cols + idx[static_cast<size_t>(r)]] += gy[r];
    };
    return make(std::move(y), rx, std::move(bp), "row_gather");
}

Var Tape::reshape(Var x, std::vector<int64_t> shape) {
    const int xi = check(x, "reshape");
    Tensor y = v_(xi).reshaped(std::move(shape));
    const bool rx = rg_(xi);
    const int yid = static_cast<int>(nodes_.size());
    auto bp = [yid, xi, rx](Tape& t) {
        if (!rx) return;
        const Tensor& gy = t.g_(yid);
        Tensor& gx = t.g_(xi);
        for (int64_t i = 0; i < gy.numel(); ++i) gx[i] += gy[i];
    };
    return make(std::move(y), rx, std::move(bp), "reshape");
}

Var Tape::stop_gradient(Var x) {
    const int xi = check(x, "stop_gradient");
    return make(v_(xi), false, nullptr, "stop_gradient");
}

}  // namespace randrl
