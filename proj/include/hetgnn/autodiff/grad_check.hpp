#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hetgnn/autodiff/tape.hpp"
#include "hetgnn/error.hpp"
#include "hetgnn/rng.hpp"

namespace hetgnn::ad {

struct GradCheckOptions {
  double step = 1e-5;
  // Parameter sets larger than this are checked on a random subsample.
  std::size_t max_entries = 10000;
  // Denominator floor for the relative error, so exact zeros compare absolutely.
  double denominator_floor = 1e-6;
  std::uint64_t seed = 0;
  // Evaluate on training-mode tapes. Refused when the forward draws dropout masks.
  bool training = false;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;

  bool passed(double tolerance) const noexcept { return max_relative_error < tolerance; }
};

using LossClosure = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients of `loss` against central finite
/// differences on the entries of `params`. Refuses closures whose forward is
/// stochastic.
inline GradCheckReport grad_check(const LossClosure& loss, ParameterSet& params, const GradCheckOptions& opt = {}) {
  auto evaluate = [&]() {
    Tape t(opt.training, opt.seed);
    Var l = loss(t);
    if (t.stochastic()) throw Error("grad_check: forward pass is stochastic (disable dropout)");
    if (l.rows() != 1 || l.cols() != 1) throw ShapeError("grad_check: loss must be scalar");
    return l.value()(0, 0);
  };

  params.zero_grad();
  {
    Tape t(opt.training, opt.seed);
    Var l = loss(t);
    if (t.stochastic()) throw Error("grad_check: forward pass is stochastic (disable dropout)");
    t.backward(l);
  }
  if (evaluate() != evaluate()) throw Error("grad_check: forward pass is not deterministic");

  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t k = 0; k < params[p].value.size(); ++k) entries.emplace_back(p, k);
  if (entries.size() > opt.max_entries) {
    Rng rng(opt.seed, 0x6c);
    rng.shuffle(std::span(entries));
    entries.resize(opt.max_entries);
  }

  GradCheckReport rep;
  for (const auto& [p, k] : entries) {
    double& w = params[p].value.data()[k];
    const double orig = w;
    w = orig + opt.step;
    const double up = evaluate();
    w = orig - opt.step;
    const double down = evaluate();
    w = orig;
    const double numeric = (up - down) / (2.0 * opt.step);
    const double analytic = params[p].grad.data()[k];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), opt.denominator_floor});
    const double rel = std::abs(numeric - analytic) / denom;
    ++rep.entries_checked;
    if (rel > rep.max_relative_error) {
      rep.max_relative_error = rel;
      rep.worst_parameter = params[p].name;
      rep.worst_entry = k;
      rep.worst_analytic = analytic;
      rep.worst_numeric = numeric;
    }
  }
  return rep;
}

}  // namespace hetgnn::ad
