#include "amsdb/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

namespace amsdb {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

void check_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (i64 d : shape)
        if (d <= 0)
            throw ShapeError("tensor dimensions must be positive, got " +
                             shape_str(shape));
}

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<float> data,
                                bool requires_grad) {
    check_shape(shape);
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    n->is_leaf = true;
    n->id = g_next_id.fetch_add(1);
    if (requires_grad) n->grad.assign(n->value.size(), 0.0f);
    return n;
}

}  // namespace

void Node::ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0f);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const i64 n = ::amsdb::numel(shape);
    return Tensor(make_leaf(std::move(shape),
                            std::vector<float>(static_cast<std::size_t>(n), 0.0f),
                            requires_grad));
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    const i64 n = ::amsdb::numel(shape);
    return Tensor(make_leaf(std::move(shape),
                            std::vector<float>(static_cast<std::size_t>(n), value),
                            requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data,
                         bool requires_grad) {
    if (::amsdb::numel(shape) != static_cast<i64>(data.size()))
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

std::vector<float>& Tensor::grad() {
    if (node_->grad.empty())
        throw ValueError("tensor has no gradient buffer (requires_grad=false or "
                         "backward not run)");
    return node_->grad;
}

const std::vector<float>& Tensor::grad() const {
    return const_cast<Tensor*>(this)->grad();
}

void Tensor::zero_grad() {
    if (!node_->grad.empty())
        std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

float Tensor::item() const {
    if (numel() != 1)
        throw ShapeError("item() requires a single-element tensor, got shape " +
                         shape_str(shape()));
    return node_->value[0];
}

Tensor make_op(Shape shape, std::vector<float> value,
               std::vector<std::shared_ptr<Node>> parents,
               std::function<void(Node&)> backward_fn) {
    check_shape(shape);
    if (numel(shape) != static_cast<i64>(value.size()))
        throw ShapeError("op output length does not match shape " +
                         shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->id = g_next_id.fetch_add(1);
    for (const auto& p : parents) {
        if (p && p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(n);
}

void backward(const Tensor& loss, bool retain_graph) {
    if (!loss.defined()) throw ValueError("backward on an undefined tensor");
    const auto& root = loss.node();
    if (root->numel() != 1)
        throw ValueError("backward requires a scalar loss, got shape " +
                         shape_str(root->shape));
    if (!root->requires_grad)
        throw ValueError("backward on a tensor that does not require grad");

    // Reachable requires_grad subgraph, then reverse creation order. The
    // order holds shared ownership: clearing parent edges during cleanup
    // must not free a node the loop has yet to visit.
    std::vector<std::shared_ptr<Node>> order;
    std::unordered_set<Node*> seen;
    std::vector<std::shared_ptr<Node>> stack{root};
    seen.insert(root.get());
    while (!stack.empty()) {
        std::shared_ptr<Node> n = std::move(stack.back());
        stack.pop_back();
        for (const auto& p : n->parents)
            if (p->requires_grad && seen.insert(p.get()).second)
                stack.push_back(p);
        order.push_back(std::move(n));
    }
    std::sort(order.begin(), order.end(),
              [](const std::shared_ptr<Node>& a, const std::shared_ptr<Node>& b) {
                  return a->id > b->id;
              });

    // Interior grads start fresh every sweep (a prior retain_graph pass may
    // have left them populated); only leaf grads accumulate across sweeps.
    for (const auto& n : order) {
        n->ensure_grad();
        if (!n->is_leaf) std::fill(n->grad.begin(), n->grad.end(), 0.0f);
    }
    root->grad[0] += 1.0f;
    for (const auto& n : order)
        if (n->backward_fn) n->backward_fn(*n);

    if (!retain_graph) {
        for (const auto& n : order) {
            if (!n->is_leaf) {
                n->grad.clear();
                n->grad.shrink_to_fit();
            }
            n->backward_fn = nullptr;
            n->parents.clear();
        }
    }
}

}  // namespace amsdb
