#include "zachvit/parameter.h"

#include <cmath>

#include "zachvit/errors.h"
#include "zachvit/rng.h"
#include "zachvit/tape.h"

namespace zachvit {

Parameter::Parameter(std::string name, Tensor value)
    : name_(std::move(name)), value_(value.detached()), grad_(value_.size(), 0.0) {}

Tensor Parameter::use() {
  Tape* tape = Tape::active();
  if (!tape) return value_;
  return tape->record_leaf("param:" + name_, value_,
                           [this](std::span<const double> g, Tape&) {
                             for (std::size_t i = 0; i < grad_.size(); ++i) grad_[i] += g[i];
                           });
}

void Parameter::assign(Tensor value) {
  if (value.shape() != value_.shape()) {
    throw ShapeError("parameter " + name_ + ": assign shape " + shape_string(value.shape()) +
                     " to " + shape_string(value_.shape()));
  }
  value_ = value.detached();
}

void Parameter::assign(std::vector<double> values) { assign(Tensor(value_.shape(), std::move(values))); }

void Parameter::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

std::vector<double> initial_values(const Shape& shape, Init init, Xoshiro256pp& rng) {
  const std::size_t n = element_count(shape);
  std::vector<double> v(n, 0.0);
  switch (init) {
    case Init::zeros:
      break;
    case Init::ones:
      std::fill(v.begin(), v.end(), 1.0);
      break;
    case Init::glorot_uniform: {
      // Fan-in is the leading extent, fan-out the product of the rest.
      const double fan_in = static_cast<double>(shape.front());
      const double fan_out = shape.size() > 1 ? static_cast<double>(n / shape.front()) : fan_in;
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& x : v) x = rng.uniform(-limit, limit);
      break;
    }
    case Init::identity: {
      if (shape.size() != 2) throw ConfigError("identity init needs a matrix");
      for (std::size_t i = 0; i < std::min(shape[0], shape[1]); ++i) v[i * shape[1] + i] = 1.0;
      break;
    }
    case Init::normal_002:
      for (auto& x : v) x = 0.02 * rng.normal();
      break;
  }
  return v;
}

Parameter& ParameterStore::create(const std::string& name, Shape shape, Init init) {
  if (index_.count(name)) throw ConfigError("parameter store: duplicate name " + name);
  Xoshiro256pp rng(derive_seed(seed_, name));
  auto values = initial_values(shape, init, rng);
  items_.push_back(std::make_unique<Parameter>(name, Tensor(std::move(shape), std::move(values))));
  index_.emplace(name, items_.size() - 1);
  return *items_.back();
}

Parameter& ParameterStore::get_or_create(const std::string& name, Shape shape, Init init) {
  if (auto* p = find(name)) {
    if (p->shape() != shape) {
      throw ShapeError("parameter " + name + " exists with shape " + shape_string(p->shape()) +
                       ", requested " + shape_string(shape));
    }
    return *p;
  }
  return create(name, std::move(shape), init);
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : items_[it->second].get();
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : items_[it->second].get();
}

Parameter& ParameterStore::at(const std::string& name) {
  auto* p = find(name);
  if (!p) throw ConfigError("parameter store: no parameter named " + name);
  return *p;
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p->size();
  return n;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p->name());
  return out;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : items_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : items_) out.push_back(p.get());
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : items_) p->zero_grad();
}

}  // namespace zachvit
