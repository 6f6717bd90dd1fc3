#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "randrl/tensor.hpp"

namespace randrl {

namespace nn {
struct Param;
}

class Tape;

// Handle to a node on a tape.  Cheap to copy; valid only while the tape
// lives.  Default-constructed Var means "absent" (used for optional bias).
struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode autodiff over a Wengert list.  Forward values are computed
// eagerly as ops are recorded; backward() walks the list in reverse exactly
// once.  Gradient buffers are allocated lazily at backward() time so
// forward-only evaluation (rollouts, greedy play) pays nothing for them.
//
// Parameters are bound by reference: the tape reads Param::value in place
// and accumulates into Param::grad during backward().  The caller owns
// gradient lifetime and must zero grads between optimization steps.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf holding a copy of v.  Set requires_grad to make grad(v) available
    // after backward (used for input-gradient probes).
    Var input(Tensor v, bool requires_grad = false);

    // Leaf bound to an external parameter.  Binding the same Param twice on
    // one tape returns the same node, so its gradient accumulates once.
    Var param(nn::Param& p);

    const Tensor& val(Var v) const;
    // Gradient of the loss w.r.t. this node; only nodes created with
    // requires_grad (or depending on one) have gradients after backward().
    const Tensor& grad(Var v) const;

    // --- ops ------------------------------------------------------------
    // bias may be an invalid Var for layers without one.
    Var conv2d(Var x, Var w, Var bias, int stride, int pad);
    Var dense(Var x, Var w, Var bias);
    Var relu(Var x);
    Var tanh_(Var x);
    Var maxpool2x2(Var x);
    Var softmax_rows(Var x);
    Var log_softmax_rows(Var x);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var min_elem(Var a, Var b);
    Var scale(Var x, float c);
    Var add_const(Var x, float c);
    Var exp_(Var x);
    Var square(Var x);
    // Pass-through gradient on the closed interval [lo, hi], zero outside.
    Var clamp(Var x, float lo, float hi);
    Var sum_all(Var x);
    Var mean_all(Var x);
    // Picks one column per row of a (N, C) tensor; result has shape (N).
    Var row_gather(Var x, std::vector<int> idx);
    Var reshape(Var x, std::vector<int64_t> shape);
    // Same value, no gradient flows into x.
    Var stop_gradient(Var x);

    // Seeds d(loss)/d(loss) = 1 and runs the reverse sweep.  loss must be a
    // scalar on this tape.  A second call throws ContractError.
    void backward(Var loss);
    bool backward_done() const { return backward_done_; }

    size_t size() const { return nodes_.size(); }

    // When set, every op verifies its output is finite and throws otherwise.
    void set_check_finite(bool v) { check_finite_ = v; }

private:
    struct Node {
        Tensor value;
        const Tensor* ext = nullptr;  // set for bound params
        Tensor grad;                  // allocated during backward()
        bool requires_grad = false;
        std::function<void(Tape&)> backprop;

        const Tensor& v() const { return ext ? *ext : value; }
    };

    // deque: references returned by val()/grad() stay valid as later ops are
    // recorded
    std::deque<Node> nodes_;
    std::unordered_map<const void*, int> param_ids_;
    bool backward_done_ = false;
    bool check_finite_ = false;

    int check(Var v, const char* op) const;
    Var make(Tensor value, bool requires_grad, std::function<void(Tape&)> bp,
             const char* op);
    const Tensor& v_(int id) const { return nodes_[static_cast<size_t>(id)].v(); }
    Tensor& g_(int id) { return nodes_[static_cast<size_t>(id)].grad; }
    bool rg_(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
};

}  // namespace randrl
