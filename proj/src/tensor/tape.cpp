#include "zachvit/tape.h"

#include <algorithm>

#include "zachvit/errors.h"

namespace zachvit {

namespace {
thread_local Tape* g_active = nullptr;
}  // namespace

Tape::~Tape() {
  if (g_active == this) g_active = nullptr;
}

Tape* Tape::active() { return g_active; }

Tensor Tape::record(std::string op, const Tensor& value, std::vector<const Tensor*> parents,
                    BackwardFn backward) {
  Node node;
  node.op = std::move(op);
  node.shape = value.shape();
  node.backward = std::move(backward);
  for (const Tensor* p : parents) {
    if (p && tracks(*p)) node.parents.push_back(p->node());
  }
  nodes_.push_back(std::move(node));
  Tensor out = value.detached();
  out.tape_ = this;
  out.node_ = nodes_.size() - 1;
  return out;
}

Tensor Tape::record_leaf(std::string op, const Tensor& value, BackwardFn sink) {
  return record(std::move(op), value, {}, std::move(sink));
}

std::span<double> Tape::grad_buffer(const Tensor& t) {
  if (!tracks(t)) return {};
  Node& n = nodes_[t.node()];
  if (n.grad.empty()) n.grad.assign(element_count(n.shape), 0.0);
  return n.grad;
}

void Tape::accumulate(const Tensor& t, std::span<const double> grad) {
  auto buf = grad_buffer(t);
  if (buf.empty()) return;
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += grad[i];
}

void Tape::backward(const Tensor& loss) {
  if (!tracks(loss)) throw ContractError("backward: loss is not recorded on this tape");
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
  }
  for (auto& n : nodes_) n.grad.clear();
  nodes_[loss.node()].grad.assign(1, 1.0);
  for (std::size_t i = loss.node() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    // The callback may grow other nodes' buffers but never this one's.
    n.backward(std::span<const double>(n.grad), *this);
  }
}

std::vector<double> Tape::gradient(const Tensor& t) const {
  if (!tracks(t)) throw ContractError("gradient: tensor is not recorded on this tape");
  const Node& n = nodes_[t.node()];
  if (n.grad.empty()) return std::vector<double>(element_count(n.shape), 0.0);
  return n.grad;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active) { g_active = &tape; }

TapeScope::~TapeScope() { g_active = previous_; }

}  // namespace zachvit
