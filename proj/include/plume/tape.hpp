#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "plume/tensor.hpp"

namespace plume {

template <typename Real>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename Real>
struct Var {
  Tape<Real>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const BasicTensor<Real>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
};

/// One recorded operation.
///
/// Forward and backward rules are pure functions of the input values (and,
/// for backward, the output value and cotangent). Nothing else is cached, so
/// replaying the tape after a leaf changes keeps every node consistent.
template <typename Real>
struct TapeNode {
  using TensorT = BasicTensor<Real>;
  using Inputs = std::vector<const TensorT*>;
  using ForwardFn = std::function<TensorT(const Inputs&)>;
  /// Returns one gradient per input, each shaped like that input.
  using BackwardFn =
      std::function<std::vector<TensorT>(const Inputs&, const TensorT& output, const TensorT& cotangent)>;

  std::string op;
  std::string name;
  std::vector<int> inputs;
  TensorT value;
  ForwardFn forward;
  BackwardFn backward;

  bool is_leaf() const { return !forward; }
};

/// Gradients of one backward pass, indexed by node id.
template <typename Real>
class Gradients {
 public:
  explicit Gradients(std::vector<std::optional<BasicTensor<Real>>> grads, const Tape<Real>* tape)
      : grads_(std::move(grads)), tape_(tape) {}

  bool reached(Var<Real> v) const { return grads_.at(v.id).has_value(); }

  /// Gradient for `v`; zeros if the output does not depend on it.
  BasicTensor<Real> grad(Var<Real> v) const {
    const auto& g = grads_.at(v.id);
    return g ? *g : BasicTensor<Real>(tape_->value(v).shape());
  }

 private:
  std::vector<std::optional<BasicTensor<Real>>> grads_;
  const Tape<Real>* tape_;
};

/// Single-writer record of a forward computation. Vars hold a pointer to
/// their tape, so a Tape is neither copyable nor movable.
template <typename Real>
class Tape {
 public:
  using TensorT = BasicTensor<Real>;
  using Node = TapeNode<Real>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Input or parameter.
  Var<Real> leaf(TensorT value, std::string name = {}) {
    Node n;
    n.op = "leaf";
    n.name = std::move(name);
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var<Real>{this, static_cast<int>(nodes_.size()) - 1};
  }

  Var<Real> record(std::string op, const std::vector<Var<Real>>& inputs,
                   typename Node::ForwardFn forward, typename Node::BackwardFn backward) {
    Node n;
    n.op = std::move(op);
    for (const auto& v : inputs) {
      if (v.tape != this) throw std::invalid_argument(n.op + ": input recorded on another tape");
      n.inputs.push_back(v.id);
    }
    n.forward = std::move(forward);
    n.backward = std::move(backward);
    n.value = n.forward(gather(n));
    nodes_.push_back(std::move(n));
    return Var<Real>{this, static_cast<int>(nodes_.size()) - 1};
  }

  const TensorT& value(Var<Real> v) const { return nodes_.at(v.id).value; }
  const Node& node(Var<Real> v) const { return nodes_.at(v.id); }
  std::size_t size() const { return nodes_.size(); }

  /// Vector-Jacobian product of a single node: gradients of
  /// <cotangent, output> with respect to each of its inputs.
  std::vector<TensorT> vjp(Var<Real> v, const TensorT& cotangent) const {
    const Node& n = nodes_.at(v.id);
    require_same_shape(cotangent.shape(), n.value.shape(), ("vjp cotangent for " + n.op).c_str());
    if (n.is_leaf()) return {};
    auto grads = n.backward(gather(n), n.value, cotangent);
    if (grads.size() != n.inputs.size())
      throw std::logic_error(n.op + ": backward returned wrong gradient count");
    for (std::size_t i = 0; i < grads.size(); ++i)
      require_same_shape(grads[i].shape(), nodes_[n.inputs[i]].value.shape(),
                         (n.op + " gradient").c_str());
    return grads;
  }

  /// Reverse sweep from `output` seeded with `cotangent`.
  Gradients<Real> backward(Var<Real> output, const TensorT& cotangent) const {
    std::vector<std::optional<TensorT>> grads(nodes_.size());
    require_same_shape(cotangent.shape(), value(output).shape(), "backward cotangent");
    grads[output.id] = cotangent;
    for (int id = output.id; id >= 0; --id) {
      if (!grads[id] || nodes_[id].is_leaf()) continue;
      const Node& n = nodes_[id];
      auto in_grads = vjp(Var<Real>{const_cast<Tape*>(this), id}, *grads[id]);
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        auto& slot = grads[n.inputs[i]];
        if (!slot) {
          slot = std::move(in_grads[i]);
        } else {
          auto dst = slot->data();
          auto src = in_grads[i].data();
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
      }
    }
    return Gradients<Real>(std::move(grads), this);
  }

  /// Overwrite a leaf value. Call replay() to propagate.
  void set_leaf(Var<Real> v, TensorT value) {
    Node& n = nodes_.at(v.id);
    if (!n.is_leaf()) throw std::invalid_argument("set_leaf: node " + n.op + " is not a leaf");
    require_same_shape(value.shape(), n.value.shape(), "set_leaf");
    n.value = std::move(value);
  }

  /// Recompute every recorded node from the current leaf values, in order.
  void replay() {
    for (auto& n : nodes_)
      if (!n.is_leaf()) n.value = n.forward(gather(n));
  }

 private:
  typename Node::Inputs gather(const Node& n) const {
    typename Node::Inputs in;
    in.reserve(n.inputs.size());
    for (int id : n.inputs) in.push_back(&nodes_[id].value);
    return in;
  }

  std::vector<Node> nodes_;
};

}  // namespace plume
