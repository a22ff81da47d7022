#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hetgnn/error.hpp"
#include "hetgnn/matrix.hpp"
#include "hetgnn/rng.hpp"

namespace hetgnn::ad {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

/// Named trainable matrices. Addresses are stable for the set's lifetime.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Matrix init) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
    index_[name] = params_.size();
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->grad = Matrix(init.rows(), init.cols());
    p->value = std::move(init);
    params_.push_back(std::move(p));
    return *params_.back();
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  Parameter& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return *params_[it->second];
  }
  const Parameter& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return *params_[it->second];
  }

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) noexcept { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const noexcept { return *params_[i]; }

  std::size_t total_entries() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) {
      if (!p->grad.same_shape(p->value)) p->grad = Matrix(p->value.rows(), p->value.cols());
      p->grad.fill(0.0);
    }
  }

  std::vector<Matrix> snapshot() const {
    std::vector<Matrix> s;
    s.reserve(params_.size());
    for (const auto& p : params_) s.push_back(p->value);
    return s;
  }

  void restore(const std::vector<Matrix>& s) {
    if (s.size() != params_.size()) throw ShapeError("snapshot size mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) params_[i]->value = s[i];
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const noexcept { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records a forward computation and replays it in reverse. One tape per
/// forward pass; single-threaded.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(bool training = false, std::uint64_t seed = 0, std::uint64_t stream = 0)
      : training_(training), rng_(seed, stream) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool training() const noexcept { return training_; }
  Rng& rng() noexcept { return rng_; }

  /// True once any stochastic primitive (train-mode dropout) ran on this tape.
  bool stochastic() const noexcept { return stochastic_; }
  void mark_stochastic() noexcept { stochastic_ = true; }

  Var constant(Matrix value) { return push(std::move(value), {}, nullptr, "constant", false); }

  Var leaf(Matrix value, bool requires_grad = true) {
    return push(std::move(value), {}, nullptr, "leaf", requires_grad);
  }

  /// Leaf bound to a parameter; repeated calls return the same node.
  Var parameter(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var(this, it->second);
    Var v = push(p.value, {}, nullptr, "parameter", true);
    nodes_[v.id()].param = &p;
    param_nodes_[&p] = v.id();
    return v;
  }

  Var push(Matrix value, std::vector<std::size_t> parents, BackwardFn backward, const char* op,
           std::optional<bool> requires_grad = std::nullopt) {
    if (!value.all_finite()) throw NumericalError(std::string(op) + " produced non-finite values");
    bool rg = false;
    if (requires_grad) {
      rg = *requires_grad;
    } else {
      for (auto p : parents) rg = rg || nodes_[p].requires_grad;
    }
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.backward = rg ? std::move(backward) : nullptr;
    n.requires_grad = rg;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  const Matrix& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_.at(id).parents; }

  /// Upstream gradient of node `id` (empty until something flows into it).
  const Matrix& grad(std::size_t id) const { return nodes_.at(id).grad; }

  /// Accumulator for node `id`, allocated on first use.
  Matrix& grad_accumulator(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Reverse sweep from a scalar loss. Gradients are added into the bound
  /// parameters' `grad` fields.
  void backward(Var loss) {
    if (loss.rows() != 1 || loss.cols() != 1)
      throw ShapeError("backward needs a scalar loss, got " + loss.value().shape_str());
    grad_accumulator(loss.id()).fill(1.0);
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
      n.backward(*this, id);
    }
    for (auto& [param, id] : param_nodes_) {
      const Node& n = nodes_[id];
      if (!param->grad.same_shape(param->value)) param->grad = Matrix(param->value.rows(), param->value.cols());
      if (!n.grad.empty()) param->grad += n.grad;
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, std::size_t> param_nodes_;
  bool training_;
  bool stochastic_ = false;
  Rng rng_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

}  // namespace hetgnn::ad
