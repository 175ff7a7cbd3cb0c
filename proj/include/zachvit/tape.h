#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "zachvit/tensor.h"

namespace zachvit {

// Append-only record of differentiable operations. Nodes are appended in
// execution order, so parents always precede children and a reverse sweep
// is a valid topological traversal.
//
// A tape becomes the thread's active tape through TapeScope; operations
// record onto the active tape whenever one of their inputs is tracked.
class Tape {
 public:
  // Receives the gradient of the node's output and pushes contributions to
  // its parents through Tape::accumulate.
  using BackwardFn = std::function<void(std::span<const double> grad_out, Tape& tape)>;

  struct Node {
    std::string op;
    std::vector<std::size_t> parents;
    Shape shape;
    std::vector<double> grad;  // empty until something flows into the node
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  static Tape* active();

  // Appends a node for `value` and returns a tracked copy of it.
  Tensor record(std::string op, const Tensor& value, std::vector<const Tensor*> parents,
                BackwardFn backward);

  // Leaf node (no parents) whose backward is `sink`.
  Tensor record_leaf(std::string op, const Tensor& value, BackwardFn sink);

  // Adds `grad` into the gradient buffer of `t` if it is tracked by this tape.
  void accumulate(const Tensor& t, std::span<const double> grad);
  // Mutable gradient buffer for `t` (allocated as zeros on first access), or
  // an empty span when `t` is not tracked by this tape.
  std::span<double> grad_buffer(const Tensor& t);
  bool tracks(const Tensor& t) const { return t.tape() == this; }

  // Reverse-mode sweep from a scalar loss. Node gradients are reset at the
  // start of every call; leaf sinks (parameter accumulators) are not, so two
  // calls without zeroing parameter gradients accumulate twice.
  void backward(const Tensor& loss);

  // Gradient of a tracked tensor after backward(); zeros if nothing reached it.
  std::vector<double> gradient(const Tensor& t) const;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

// Makes a tape active for the current thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
  ~TapeScope();

 private:
  Tape* previous_;
};

}  // namespace zachvit
