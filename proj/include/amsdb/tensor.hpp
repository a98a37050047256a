#pragma once

// Dense float tensors with dynamic reverse-mode differentiation.
//
// Every forward op records a Node whose backward_fn accumulates into the
// parents' grad buffers (+=, never =). Node ids increase monotonically with
// creation, so running backward over the reachable set sorted by descending
// id visits each op exactly once with its output gradient already complete.
// The graph is freed after backward unless retain_graph is set; leaf grads
// survive and keep accumulating until zero_grad.

#include <functional>
#include <memory>
#include <vector>

#include "amsdb/common.hpp"

namespace amsdb {

struct Node {
    Shape shape;
    std::vector<float> value;
    std::vector<float> grad;  // allocated at creation for leaves, on demand otherwise
    bool requires_grad = false;
    bool is_leaf = false;
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    i64 numel() const { return amsdb::numel(shape); }
    void ensure_grad();  // allocate zero-filled grad if missing
};

class Tensor {
  public:
    Tensor() = default;  // undefined tensor
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<float> data,
                            bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    i64 numel() const { return node_->numel(); }
    bool requires_grad() const { return node_->requires_grad; }

    float* data() { return node_->value.data(); }
    const float* data() const { return node_->value.data(); }
    std::vector<float>& value() { return node_->value; }
    const std::vector<float>& value() const { return node_->value; }

    // Leaf gradient access; grad() on a node without an allocated grad throws.
    std::vector<float>& grad();
    const std::vector<float>& grad() const;
    bool has_grad() const { return !node_->grad.empty(); }
    void zero_grad();

    float item() const;  // single-element tensors only

    const std::shared_ptr<Node>& node() const { return node_; }

  private:
    std::shared_ptr<Node> node_;
};

// Builds an op output node. requires_grad is inherited from the parents; if
// none requires grad the parents and backward_fn are dropped so constant
// subgraphs cost nothing in backward.
Tensor make_op(Shape shape, std::vector<float> value,
               std::vector<std::shared_ptr<Node>> parents,
               std::function<void(Node&)> backward_fn);

// Reverse-mode sweep from a scalar loss. Accumulates into leaf grads.
void backward(const Tensor& loss, bool retain_graph = false);

}  // namespace amsdb
