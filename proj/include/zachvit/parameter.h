#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "zachvit/tensor.h"

namespace zachvit {

class Xoshiro256pp;

// Trainable tensor plus its gradient accumulator.
class Parameter {
 public:
  Parameter(std::string name, Tensor value);

  const std::string& name() const { return name_; }
  const Shape& shape() const { return value_.shape(); }
  std::size_t size() const { return value_.size(); }

  // Untracked current value.
  const Tensor& value() const { return value_; }
  // Current value, registered as a leaf on the active tape (if any) so that
  // backward() accumulates into grad().
  Tensor use();

  void assign(Tensor value);
  void assign(std::vector<double> values);

  std::vector<double>& grad() { return grad_; }
  const std::vector<double>& grad() const { return grad_; }
  void zero_grad();

 private:
  std::string name_;
  Tensor value_;
  std::vector<double> grad_;
};

enum class Init { zeros, ones, glorot_uniform, identity, normal_002 };

// Named parameter collection with stable addresses. Each parameter is
// initialized from its own stream keyed by (seed, name), so values do not
// depend on creation order.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}

  Parameter& create(const std::string& name, Shape shape, Init init);
  Parameter& get_or_create(const std::string& name, Shape shape, Init init);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::size_t size() const { return items_.size(); }
  std::size_t element_count() const;
  std::vector<std::string> names() const;

  // Creation order.
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

  void zero_grad();

 private:
  std::uint64_t seed_;
  std::vector<std::unique_ptr<Parameter>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::vector<double> initial_values(const Shape& shape, Init init, Xoshiro256pp& rng);

}  // namespace zachvit
