#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace stegograph {

// Reverse-mode tape. Every forward op allocates a Node holding its value and
// a closure that routes the node's gradient to its parents. The graph is
// rebuilt each forward pass; parameter leaves persist across passes and
// accumulate gradients until the optimizer zeroes them.
template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad; // allocated on first accumulation
    bool requires_grad = false;
    bool grad_ready = false;
    bool backward_done = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backprop;

    explicit Node(Tensor<T> v, bool req = false) : value(std::move(v)), requires_grad(req) {}

    void accumulate(const Tensor<T>& g) {
        if (!requires_grad) return;
        if (!grad_ready) {
            grad = Tensor<T>(value.shape());
            grad_ready = true;
        }
        T* dst = grad.data();
        const T* src = g.data();
        const std::int64_t n = grad.numel();
        for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
    }

    // Gradient seen by this node; zeros if nothing flowed here.
    const Tensor<T>& grad_or_zeros() {
        if (!grad_ready) {
            grad = Tensor<T>(value.shape());
            grad_ready = true;
        }
        return grad;
    }

    void zero_grad() {
        if (grad_ready) grad.fill(T(0));
    }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

namespace detail {
inline thread_local int no_grad_depth = 0;
}

// Disables graph recording in scope; evaluation passes use this so
// intermediates are freed as they go out of scope.
struct NoGradGuard {
    NoGradGuard() { ++detail::no_grad_depth; }
    ~NoGradGuard() { --detail::no_grad_depth; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

template <typename T>
Var<T> make_leaf(Tensor<T> value, bool requires_grad = false) {
    return std::make_shared<Node<T>>(std::move(value), requires_grad);
}

template <typename T>
Var<T> make_const(Tensor<T> value) {
    return std::make_shared<Node<T>>(std::move(value), false);
}

// Forward values must stay finite; NaN/Inf is an error state, caught at the
// op that produced it.
template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
    if (!t.all_finite()) throw NumericError(std::string(op) + " produced a non-finite value");
}

template <typename T>
bool any_requires_grad(const std::vector<Var<T>>& parents) {
    for (const auto& p : parents)
        if (p && p->requires_grad) return true;
    return false;
}

// Wires a freshly computed value into the tape. `backprop` receives the
// output node and must accumulate into the parents.
template <typename T>
Var<T> make_op(Tensor<T> value, const char* op_name, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backprop) {
    check_finite(value, op_name);
    const bool req = grad_enabled() && any_requires_grad(parents);
    auto node = std::make_shared<Node<T>>(std::move(value), req);
    if (req) {
        node->parents = std::move(parents);
        node->backprop = std::move(backprop);
    }
    return node;
}

// Reverse-mode sweep from a scalar loss. Gradients accumulate (+=) into every
// reachable node that requires grad, parameters included.
template <typename T>
void backward(const Var<T>& loss) {
    if (!loss) throw InvalidArgument("backward: null loss");
    if (loss->value.numel() != 1) throw InvalidArgument("backward requires a scalar loss");
    if (!loss->requires_grad) throw InvalidArgument("backward: loss does not depend on any parameter");
    if (loss->backward_done) throw InvalidArgument("backward called twice without a new forward pass");
    loss->backward_done = true;

    // Iterative post-order topological sort.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* parent = node->parents[next++].get();
            if (parent && parent->requires_grad && visited.insert(parent).second)
                stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    Tensor<T> seed(loss->value.shape());
    seed[0] = T(1);
    loss->accumulate(seed);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backprop) node->backprop(*node);
    }
}

// Named trainable leaf. grad lives in the node and matches the value shape.
template <typename T>
struct Parameter {
    std::string name;
    Var<T> node;

    Tensor<T>& value() { return node->value; }
    const Tensor<T>& value() const { return node->value; }
    const Tensor<T>& grad() { return node->grad_or_zeros(); }
};

// Ordered collection of trainable parameters plus non-trainable buffers
// (running statistics, the fixed HPF kernel). Order is insertion order and
// determines checkpoint layout.
template <typename T>
class ParamStore {
  public:
    Var<T> add_parameter(const std::string& name, Tensor<T> init) {
        ensure_fresh(name);
        params_.push_back(Parameter<T>{name, make_leaf(std::move(init), true)});
        index_[name] = {true, params_.size() - 1};
        return params_.back().node;
    }

    Var<T> add_buffer(const std::string& name, Tensor<T> init) {
        ensure_fresh(name);
        buffers_.push_back(Parameter<T>{name, make_leaf(std::move(init), false)});
        index_[name] = {false, buffers_.size() - 1};
        return buffers_.back().node;
    }

    Parameter<T>& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw InvalidArgument("unknown parameter: " + name);
        return it->second.first ? params_[it->second.second] : buffers_[it->second.second];
    }

    const Parameter<T>& get(const std::string& name) const {
        return const_cast<ParamStore*>(this)->get(name);
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::vector<Parameter<T>>& parameters() { return params_; }
    const std::vector<Parameter<T>>& parameters() const { return params_; }
    std::vector<Parameter<T>>& buffers() { return buffers_; }
    const std::vector<Parameter<T>>& buffers() const { return buffers_; }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& p : params_) n += p.node->value.numel();
        return n;
    }

    void zero_grads() {
        for (auto& p : params_) p.node->zero_grad();
    }

    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& p : params_) out.add_parameter(p.name, p.node->value.template cast<U>());
        for (const auto& b : buffers_) out.add_buffer(b.name, b.node->value.template cast<U>());
        return out;
    }

  private:
    void ensure_fresh(const std::string& name) {
        if (index_.count(name)) throw InvalidArgument("duplicate parameter name: " + name);
    }

    std::vector<Parameter<T>> params_;
    std::vector<Parameter<T>> buffers_;
    std::map<std::string, std::pair<bool, std::size_t>> index_;
};

} // namespace stegograph
