#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pfgnet/errors.hpp"
#include "pfgnet/params.hpp"
#include "pfgnet/rng.hpp"
#include "pfgnet/tensor.hpp"

namespace pfgnet {

/// Handle to a node on a Tape.
struct Var {
  std::uint32_t id = 0;
};

/// Define-by-run record of a forward pass. Nodes are appended in execution
/// order, so the node vector is already a topological order and backward
/// simply walks it in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  Var leaf(Tensor value, std::string_view op, bool requires_grad);
  Var push(std::string_view op, Tensor value, std::vector<std::uint32_t> inputs,
           BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
  std::string_view op(Var v) const { return nodes_[v.id].op; }
  const std::vector<std::uint32_t>& inputs(Var v) const { return nodes_[v.id].inputs; }
  std::size_t size() const { return nodes_.size(); }

  bool has_grad(std::uint32_t id) const { return !nodes_[id].grad.empty(); }
  const Tensor& grad(std::uint32_t id) const { return nodes_[id].grad; }

  /// Adds g into the node's gradient; no-op for nodes that do not need one.
  void accumulate(std::uint32_t id, Tensor g);
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

  /// Seeds `output` with `seed` and propagates to every reachable node.
  /// Gradients add up where a value fans out.
  void backward(Var output, const Tensor& seed);

  void clear_grads();

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    Tensor grad;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    bool requires_grad = true;
  };
  std::vector<Node> nodes_;
};

/// Traced execution policy. Same member set as EagerOps, but every call also
/// records a backward rule on the tape. Parameters become tape leaves the
/// first time they are requested, so a parameter used twice accumulates.
class TracedOps {
 public:
  using Value = Var;

  TracedOps(Tape& tape, const ParamStore& params) : tape_(tape), params_(params) {}

  Var param(std::string_view name);
  /// Fixed tensor that never receives a gradient (descriptor filters).
  Var constant(Tensor value) { return tape_.leaf(std::move(value), "constant", false); }
  Var input(Tensor value) { return tape_.leaf(std::move(value), "input", true); }
  const Tensor& value(Var v) const { return tape_.value(v); }
  Tape& tape() { return tape_; }
  const ParamStore& params() const { return params_; }
  const std::map<std::string, Var, std::less<>>& param_vars() const { return param_vars_; }

  Var dwconv_1d_h(Var x, Var h);
  Var dwconv_1d_v(Var x, Var v);
  Var sep_conv(Var x, Var h, Var v);
  Var dwconv_2d(Var x, Var kernel);
  Var conv2d(Var x, Var weight, Var bias, std::size_t stride);
  Var pwconv(Var x, Var weight, Var bias);
  Var avg_pool3(Var x);
  Var softmax_over_channels(Var x);
  Var tanh(Var x);
  Var sigmoid(Var x);
  Var leaky_relu(Var x, double slope);
  Var scale(Var x, double s);
  Var square(Var x);
  Var abs(Var x);
  Var sqrt_eps(Var x, double eps);
  Var clamp_min(Var x, double lo);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var channel_mean(Var x);
  Var grn(Var x, Var gamma, Var beta, double eps);
  Var group_norm(Var x, std::size_t groups, Var gamma, Var beta, double eps);
  Var concat_channels(std::span<const Var> parts);
  std::vector<Var> split_channels(Var x, std::span<const std::size_t> sizes);
  Var upsample_nearest2x(Var x);
  Var mse_normalized(Var pred, Var target);
  Var sum_all(Var x);

  /// Dispatch by operation name for dynamically built graphs. Only
  /// parameter-free ops are reachable this way; anything else throws
  /// UnsupportedOperation.
  Var apply(std::string_view op, std::span<const Var> args);

 private:
  Tape& tape_;
  const ParamStore& params_;
  std::map<std::string, Var, std::less<>> param_vars_;
};

/// Gradients of a traced computation.
struct Gradients {
  /// One entry per parameter in the store; zeros for parameters the graph
  /// never touched.
  ParamStore::Map params;
  /// One entry per traced input, in input order.
  std::vector<Tensor> inputs;
};

/// A finished forward pass that can be differentiated.
struct Trace {
  std::unique_ptr<Tape> tape;
  std::unique_ptr<TracedOps> ops;
  std::vector<Var> inputs;
  std::vector<Var> outputs;

  const Tensor& output(std::size_t i = 0) const { return tape->value(outputs.at(i)); }
};

/// Runs graph_fn(TracedOps&, std::span<const Var>) on fresh input leaves.
/// graph_fn may return a single Var or a std::vector<Var>.
template <class GraphFn>
Trace forward_traced(GraphFn&& graph_fn, std::span<const Tensor> inputs,
                     const ParamStore& params) {
  Trace trace;
  trace.tape = std::make_unique<Tape>();
  trace.ops = std::make_unique<TracedOps>(*trace.tape, params);
  for (const auto& t : inputs) trace.inputs.push_back(trace.ops->input(t));
  auto result = graph_fn(*trace.ops, std::span<const Var>(trace.inputs));
  if constexpr (std::is_same_v<std::decay_t<decltype(result)>, Var>) {
    trace.outputs.push_back(result);
  } else {
    trace.outputs.assign(result.begin(), result.end());
  }
  return trace;
}

/// Reverse pass from output `output_index` seeded with `seed` (same shape as
/// that output). Throws ConfigError on a seed shape mismatch.
Gradients backward(Trace& trace, const Tensor& seed, std::size_t output_index = 0);

/// Adds the parameter gradients of `grads` into the store's gradient slots.
void accumulate_into(ParamStore& store, const Gradients& grads);

/// Central-difference check of a traced scalar projection of graph_fn.
///
/// The output is contracted with fixed pseudo-random weights w, f = <w, out>,
/// and every coordinate of every input (and of every parameter when
/// `include_params`) is compared against (f(x+eps e) - f(x-eps e)) / (2 eps).
/// Returns max |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
template <class GraphFn>
double grad_check(GraphFn&& graph_fn, std::span<const Tensor> point,
                  const ParamStore& params, double eps, bool include_params = true,
                  std::uint64_t seed = 0x5eedULL) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw ConfigError("grad_check: eps out of range");
  auto single = [&](TracedOps& ops, std::span<const Var> in) -> Var {
    return graph_fn(ops, in);
  };
  Trace base = forward_traced(single, point, params);
  const Tensor& out = base.output();
  CounterRng rng(seed);
  Tensor weights(out.dims(), DType::float64);
  for (auto& w : weights.data()) w = rng.uniform(-1.0, 1.0);

  auto project = [&](const Tensor& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) acc += weights[i] * y[i];
    if (!std::isfinite(acc)) throw NumericError("grad_check: non-finite function value");
    return acc;
  };
  auto evaluate = [&](std::span<const Tensor> pt, const ParamStore& ps) {
    return project(forward_traced(single, pt, ps).output());
  };
  Gradients g = backward(base, weights);

  double worst = 0.0;
  auto compare = [&](double analytic, double numeric) {
    if (!std::isfinite(analytic) || !std::isfinite(numeric)) {
      throw NumericError("grad_check: non-finite gradient");
    }
    const double err = std::fabs(analytic - numeric) /
                       (std::fabs(analytic) + std::fabs(numeric) + 1e-12);
    worst = std::max(worst, err);
  };

  std::vector<Tensor> pt(point.begin(), point.end());
  for (std::size_t t = 0; t < pt.size(); ++t) {
    for (std::size_t i = 0; i < pt[t].numel(); ++i) {
      const double orig = pt[t][i];
      pt[t][i] = orig + eps;
      const double fp = evaluate(pt, params);
      pt[t][i] = orig - eps;
      const double fm = evaluate(pt, params);
      pt[t][i] = orig;
      compare(g.inputs[t][i], (fp - fm) / (2 * eps));
    }
  }
  if (include_params) {
    ParamStore ps = params;
    for (auto& [name, value] : ps.values_mut()) {
      const Tensor& analytic = g.params.at(name);
      for (std::size_t i = 0; i < value.numel(); ++i) {
        const double orig = value[i];
        value[i] = orig + eps;
        const double fp = evaluate(pt, ps);
        value[i] = orig - eps;
        const double fm = evaluate(pt, ps);
        value[i] = orig;
        compare(analytic[i], (fp - fm) / (2 * eps));
      }
    }
  }
  return worst;
}

}  // namespace pfgnet
