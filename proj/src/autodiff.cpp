#include "pfgnet/autodiff.hpp"

#include <cmath>

#include "pfgnet/ops.hpp"

namespace pfgnet {

// ---------------------------------------------------------------------------
// Tape

Var Tape::leaf(Tensor value, std::string_view op, bool requires_grad) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::push(std::string_view op, Tensor value, std::vector<std::uint32_t> inputs,
               BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.requires_grad = false;
  for (auto i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::accumulate(std::uint32_t id, Tensor g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (g.dims() != n.value.dims()) {
    throw ConfigError("gradient shape " + shape_string(g.dims()) + " does not match value " +
                      shape_string(n.value.dims()) + " at node '" + std::string(n.op) + "'");
  }
  if (n.grad.empty()) {
    n.grad = std::move(g);
    return;
  }
  auto dst = n.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var output, const Tensor& seed) {
  if (seed.dims() != value(output).dims()) {
    throw ConfigError("seed gradient " + shape_string(seed.dims()) +
                      " does not match output " + shape_string(value(output).dims()));
  }
  accumulate(output.id, seed.cast(DType::float64));
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, static_cast<std::uint32_t>(i));
  }
}

void Tape::clear_grads() {
  for (auto& n : nodes_) n.grad = Tensor();
}

// ---------------------------------------------------------------------------
// Adjoint kernels

namespace {

Tensor zeros_like(const Tensor& t) { return Tensor::zeros(t.dims(), DType::float64); }

using Idx = std::ptrdiff_t;

// Adjoint of the 1-D depthwise pass: returns (dx, dkernel).
std::pair<Tensor, Tensor> conv_1d_adjoint(const Tensor& x, const Tensor& kernel,
                                          const Tensor& g, bool horizontal) {
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2), k = kernel.dim(1);
  const auto pad = static_cast<Idx>(k / 2);
  Tensor dx = zeros_like(x), dk = zeros_like(kernel);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        const double go = g[(c * H + i) * W + j];
        if (go == 0.0) continue;
        for (std::size_t t = 0; t < k; ++t) {
          const Idx ii = horizontal ? static_cast<Idx>(i) : static_cast<Idx>(i + t) - pad;
          const Idx jj = horizontal ? static_cast<Idx>(j + t) - pad : static_cast<Idx>(j);
          if (ii < 0 || jj < 0 || ii >= static_cast<Idx>(H) || jj >= static_cast<Idx>(W)) continue;
          const std::size_t xi = (c * H + static_cast<std::size_t>(ii)) * W + static_cast<std::size_t>(jj);
          dx[xi] += kernel[c * k + t] * go;
          dk[c * k + t] += go * x[xi];
        }
      }
    }
  }
  return {std::move(dx), std::move(dk)};
}

std::pair<Tensor, Tensor> dwconv_2d_adjoint(const Tensor& x, const Tensor& kernel,
                                            const Tensor& g) {
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2), k = kernel.dim(1);
  const auto pad = static_cast<Idx>(k / 2);
  const auto sH = static_cast<Idx>(H), sW = static_cast<Idx>(W), sk = static_cast<Idx>(k);
  Tensor dx = zeros_like(x), dk = zeros_like(kernel);
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t kb = c * k * k, xb = c * H * W;
    for (Idx i = 0; i < sH; ++i) {
      for (Idx j = 0; j < sW; ++j) {
        const double go = g[xb + static_cast<std::size_t>(i * sW + j)];
        if (go == 0.0) continue;
        for (Idx u = 0; u < sk; ++u) {
          const Idx ii = i + u - pad;
          if (ii < 0 || ii >= sH) continue;
          for (Idx v = 0; v < sk; ++v) {
            const Idx jj = j + v - pad;
            if (jj < 0 || jj >= sW) continue;
            const std::size_t xi = xb + static_cast<std::size_t>(ii * sW + jj);
            const std::size_t ki = kb + static_cast<std::size_t>(u * sk + v);
            dx[xi] += kernel[ki] * go;
            dk[ki] += go * x[xi];
          }
        }
      }
    }
  }
  return {std::move(dx), std::move(dk)};
}

struct ConvGrads {
  Tensor dx, dw, db;
};

ConvGrads conv2d_adjoint(const Tensor& x, const Tensor& w, const Tensor& g,
                         std::size_t stride) {
  const std::size_t Co = w.dim(0), Ci = x.dim(0), H = x.dim(1), W = x.dim(2), k = w.dim(2);
  const std::size_t Ho = g.dim(1), Wo = g.dim(2);
  const auto pad = static_cast<Idx>(k / 2);
  const auto sH = static_cast<Idx>(H), sW = static_cast<Idx>(W), sk = static_cast<Idx>(k);
  ConvGrads r{zeros_like(x), zeros_like(w), Tensor::zeros({Co}, DType::float64)};
  double* dx = r.dx.data().data();
  double* dw = r.dw.data().data();
  const double* xs = x.data().data();
  const double* ws = w.data().data();
  for (std::size_t o = 0; o < Co; ++o) {
    for (std::size_t i = 0; i < Ho; ++i) {
      for (std::size_t j = 0; j < Wo; ++j) {
        const double go = g[(o * Ho + i) * Wo + j];
        r.db[o] += go;
        if (go == 0.0) continue;
        const auto ci0 = static_cast<Idx>(i * stride) - pad;
        const auto cj0 = static_cast<Idx>(j * stride) - pad;
        for (std::size_t c = 0; c < Ci; ++c) {
          const std::size_t wb = (o * Ci + c) * k * k, xb = c * H * W;
          for (Idx u = 0; u < sk; ++u) {
            const Idx ii = ci0 + u;
            if (ii < 0 || ii >= sH) continue;
            for (Idx v = 0; v < sk; ++v) {
              const Idx jj = cj0 + v;
              if (jj < 0 || jj >= sW) continue;
              const std::size_t xi = xb + static_cast<std::size_t>(ii * sW + jj);
              const std::size_t wi = wb + static_cast<std::size_t>(u * sk + v);
              dx[xi] += ws[wi] * go;
              dw[wi] += go * xs[xi];
            }
          }
        }
      }
    }
  }
  return r;
}

// Reduces a [C,H,W] gradient to the shape of a broadcast operand.
Tensor reduce_broadcast(const Tensor& g, ops::Broadcast kind, const Tensor& operand) {
  if (kind == ops::Broadcast::none) return g;
  Tensor out = zeros_like(operand);
  const std::size_t C = g.dim(0), P = g.dim(1) * g.dim(2);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t p = 0; p < P; ++p) {
      if (kind == ops::Broadcast::per_channel) {
        out[c] += g[c * P + p];
      } else {
        out[p] += g[c * P + p];
      }
    }
  }
  return out;
}

// Elementwise product of a full gradient with the broadcast operand.
Tensor mul_broadcast(const Tensor& g, ops::Broadcast kind, const Tensor& operand) {
  Tensor out = zeros_like(g);
  const std::size_t P = g.rank() == 3 ? g.dim(1) * g.dim(2) : g.numel();
  for (std::size_t i = 0; i < g.numel(); ++i) {
    double b = 0.0;
    switch (kind) {
      case ops::Broadcast::none: b = operand[i]; break;
      case ops::Broadcast::per_channel: b = operand[i / P]; break;
      case ops::Broadcast::per_pixel: b = operand[i % P]; break;
    }
    out[i] = g[i] * b;
  }
  return out;
}

template <class F>
Tensor map_grad(const Tensor& g, const Tensor& x, const Tensor& y, F f) {
  Tensor out = zeros_like(g);
  for (std::size_t i = 0; i < g.numel(); ++i) out[i] = g[i] * f(x[i], y[i]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// TracedOps

Var TracedOps::param(std::string_view name) {
  auto it = param_vars_.find(name);
  if (it != param_vars_.end()) return it->second;
  Var v = tape_.leaf(params_.get(name), "param", true);
  param_vars_.emplace(std::string(name), v);
  return v;
}

Var TracedOps::dwconv_1d_h(Var x, Var h) {
  return tape_.push("dwconv_1d_h", ops::dwconv_1d_h(value(x), value(h)), {x.id, h.id},
                    [x, h](Tape& t, std::uint32_t self) {
                      auto [dx, dh] = conv_1d_adjoint(t.value(x), t.value(h), t.grad(self), true);
                      t.accumulate(x.id, std::move(dx));
                      t.accumulate(h.id, std::move(dh));
                    });
}

Var TracedOps::dwconv_1d_v(Var x, Var v) {
  return tape_.push("dwconv_1d_v", ops::dwconv_1d_v(value(x), value(v)), {x.id, v.id},
                    [x, v](Tape& t, std::uint32_t self) {
                      auto [dx, dv] = conv_1d_adjoint(t.value(x), t.value(v), t.grad(self), false);
                      t.accumulate(x.id, std::move(dx));
                      t.accumulate(v.id, std::move(dv));
                    });
}

Var TracedOps::sep_conv(Var x, Var h, Var v) {
  SepKernel{value(h), value(v)}.validate();
  return dwconv_1d_v(dwconv_1d_h(x, h), v);
}

Var TracedOps::dwconv_2d(Var x, Var kernel) {
  return tape_.push("dwconv_2d", ops::dwconv_2d(value(x), value(kernel)), {x.id, kernel.id},
                    [x, kernel](Tape& t, std::uint32_t self) {
                      auto [dx, dk] = dwconv_2d_adjoint(t.value(x), t.value(kernel), t.grad(self));
                      t.accumulate(x.id, std::move(dx));
                      t.accumulate(kernel.id, std::move(dk));
                    });
}

Var TracedOps::conv2d(Var x, Var weight, Var bias, std::size_t stride) {
  return tape_.push("conv2d", ops::conv2d(value(x), value(weight), value(bias), stride),
                    {x.id, weight.id, bias.id},
                    [x, weight, bias, stride](Tape& t, std::uint32_t self) {
                      auto r = conv2d_adjoint(t.value(x), t.value(weight), t.grad(self), stride);
                      t.accumulate(x.id, std::move(r.dx));
                      t.accumulate(weight.id, std::move(r.dw));
                      t.accumulate(bias.id, std::move(r.db));
                    });
}

Var TracedOps::pwconv(Var x, Var weight, Var bias) {
  return tape_.push(
      "pwconv", ops::pwconv(value(x), value(weight), value(bias)), {x.id, weight.id, bias.id},
      [x, weight, bias](Tape& t, std::uint32_t self) {
        const Tensor& xs = t.value(x);
        const Tensor& w = t.value(weight);
        const Tensor& g = t.grad(self);
        const std::size_t Co = w.dim(0), Ci = w.dim(1), P = xs.dim(1) * xs.dim(2);
        Tensor dx = zeros_like(xs), dw = zeros_like(w), db = zeros_like(t.value(bias));
        for (std::size_t o = 0; o < Co; ++o) {
          const double* go = g.data().data() + o * P;
          for (std::size_t p = 0; p < P; ++p) db[o] += go[p];
          for (std::size_t c = 0; c < Ci; ++c) {
            const double* xc = xs.data().data() + c * P;
            double* dxc = dx.data().data() + c * P;
            const double wv = w[o * Ci + c];
            double acc = 0.0;
            for (std::size_t p = 0; p < P; ++p) {
              acc += go[p] * xc[p];
              dxc[p] += wv * go[p];
            }
            dw[o * Ci + c] = acc;
          }
        }
        t.accumulate(x.id, std::move(dx));
        t.accumulate(weight.id, std::move(dw));
        t.accumulate(bias.id, std::move(db));
      });
}

Var TracedOps::avg_pool3(Var x) {
  // Zero-padded box filtering is self-adjoint.
  return tape_.push("avg_pool3", ops::avg_pool3(value(x)), {x.id},
                    [x](Tape& t, std::uint32_t self) {
                      t.accumulate(x.id, ops::avg_pool3(t.grad(self)));
                    });
}

Var TracedOps::softmax_over_channels(Var x) {
  return tape_.push("softmax_over_channels", ops::softmax_over_channels(value(x)), {x.id},
                    [x](Tape& t, std::uint32_t self) {
                      const Tensor& y = t.value(self);
                      const Tensor& g = t.grad(self);
                      const std::size_t K = y.dim(0), P = y.dim(1) * y.dim(2);
                      Tensor dx = zeros_like(y);
                      for (std::size_t p = 0; p < P; ++p) {
                        double dot = 0.0;
                        for (std::size_t k = 0; k < K; ++k) dot += g[k * P + p] * y[k * P + p];
                        for (std::size_t k = 0; k < K; ++k) {
                          dx[k * P + p] = y[k * P + p] * (g[k * P + p] - dot);
                        }
                      }
                      t.accumulate(x.id, std::move(dx));
                    });
}

Var TracedOps::tanh(Var x) {
  return tape_.push("tanh", ops::tanh(value(x)), {x.id}, [x](Tape& t, std::uint32_t self) {
    t.accumulate(x.id, map_grad(t.grad(self), t.value(x), t.value(self),
                                [](double, double y) { return 1.0 - y * y; }));
  });
}

Var TracedOps::sigmoid(Var x) {
  return tape_.push("sigmoid", ops::sigmoid(value(x)), {x.id}, [x](Tape& t, std::uint32_t self) {
    t.accumulate(x.id, map_grad(t.grad(self), t.value(x), t.value(self),
                                [](double, double y) { return y * (1.0 - y); }));
  });
}

Var TracedOps::leaky_relu(Var x, double slope) {
  return tape_.push("leaky_relu", ops::leaky_relu(value(x), slope), {x.id},
                    [x, slope](Tape& t, std::uint32_t self) {
                      t.accumulate(x.id, map_grad(t.grad(self), t.value(x), t.value(self),
                                                  [slope](double v, double) {
                                                    return v > 0 ? 1.0 : slope;
                                                  }));
                    });
}

Var TracedOps::scale(Var x, double s) {
  return tape_.push("scale", ops::scale(value(x), s), {x.id}, [x, s](Tape& t, std::uint32_t self) {
    t.accumulate(x.id, ops::scale(t.grad(self), s));
  });
}

Var TracedOps::square(Var x) {
  return tape_.push("square", ops::square(value(x)), {x.id}, [x](Tape& t, std::uint32_t self) {
    t.accumulate(x.id, map_grad(t.grad(self), t.value(x), t.value(self),
                                [](double v, double) { return 2.0 * v; }));
  });
}

Var TracedOps::abs(Var x) {
  return tape_.push("abs", ops::abs(value(x)), {x.id}, [x](Tape& t, std::uint32_t self) {
    t.accumulate(x.id, map_grad(t.grad(self), t.value(x), t.value(self), [](double v, double) {
                   return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
                 }));
  });
}

Var TracedOps::sqrt_eps(Var x, double eps) {
  return tape_.push("sqrt_eps", ops::sqrt_eps(value(x), eps), {x.id},
                    [x](Tape& t, std::uint32_t self) {
                      t.accumulate(x.id, map_grad(t.grad(self), t.value(x), t.value(self),
                                                  [](double, double y) { return 0.5 / y; }));
                    });
}

Var TracedOps::clamp_min(Var x, double lo) {
  return tape_.push("clamp_min", ops::clamp_min(value(x), lo), {x.id},
                    [x, lo](Tape& t, std::uint32_t self) {
                      t.accumulate(x.id, map_grad(t.grad(self), t.value(x), t.value(self),
                                                  [lo](double v, double) { return v > lo ? 1.0 : 0.0; }));
                    });
}

Var TracedOps::add(Var a, Var b) {
  const auto kind = ops::broadcast_kind(value(a), value(b));
  return tape_.push("add", ops::add(value(a), value(b)), {a.id, b.id},
                    [a, b, kind](Tape& t, std::uint32_t self) {
                      const Tensor& g = t.grad(self);
                      t.accumulate(b.id, reduce_broadcast(g, kind, t.value(b)));
                      t.accumulate(a.id, g);
                    });
}

Var TracedOps::sub(Var a, Var b) {
  const auto kind = ops::broadcast_kind(value(a), value(b));
  return tape_.push("sub", ops::sub(value(a), value(b)), {a.id, b.id},
                    [a, b, kind](Tape& t, std::uint32_t self) {
                      const Tensor& g = t.grad(self);
                      t.accumulate(b.id, ops::scale(reduce_broadcast(g, kind, t.value(b)), -1.0));
                      t.accumulate(a.id, g);
                    });
}

Var TracedOps::mul(Var a, Var b) {
  const auto kind = ops::broadcast_kind(value(a), value(b));
  return tape_.push("mul", ops::mul(value(a), value(b)), {a.id, b.id},
                    [a, b, kind](Tape& t, std::uint32_t self) {
                      const Tensor& g = t.grad(self);
                      const Tensor& av = t.value(a);
                      const Tensor& bv = t.value(b);
                      if (t.requires_grad(b.id)) {
                        Tensor gb = zeros_like(g);
                        for (std::size_t i = 0; i < g.numel(); ++i) gb[i] = g[i] * av[i];
                        t.accumulate(b.id, reduce_broadcast(gb, kind, bv));
                      }
                      if (t.requires_grad(a.id)) t.accumulate(a.id, mul_broadcast(g, kind, bv));
                    });
}

Var TracedOps::channel_mean(Var x) {
  return tape_.push("channel_mean", ops::channel_mean(value(x)), {x.id},
                    [x](Tape& t, std::uint32_t self) {
                      const Tensor& xs = t.value(x);
                      const Tensor& g = t.grad(self);
                      const std::size_t C = xs.dim(0), P = xs.dim(1) * xs.dim(2);
                      Tensor dx = zeros_like(xs);
                      for (std::size_t c = 0; c < C; ++c) {
                        for (std::size_t p = 0; p < P; ++p) dx[c * P + p] = g[p] / static_cast<double>(C);
                      }
                      t.accumulate(x.id, std::move(dx));
                    });
}

Var TracedOps::grn(Var x, Var gamma, Var beta, double eps) {
  return tape_.push(
      "grn", ops::grn(value(x), value(gamma), value(beta), eps), {x.id, gamma.id, beta.id},
      [x, gamma, beta, eps](Tape& t, std::uint32_t self) {
        const Tensor& xs = t.value(x);
        const Tensor& gm = t.value(gamma);
        const Tensor& g = t.grad(self);
        const std::size_t C = xs.dim(0), P = xs.dim(1) * xs.dim(2);
        std::vector<double> norms(C);
        double mean = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
          double ss = 0.0;
          for (std::size_t p = 0; p < P; ++p) ss += xs[c * P + p] * xs[c * P + p];
          norms[c] = std::sqrt(ss);
          mean += norms[c];
        }
        mean /= static_cast<double>(C);
        const double denom = mean + eps;
        Tensor dx = zeros_like(xs), dgamma = zeros_like(gm), dbeta = zeros_like(t.value(beta));
        std::vector<double> dn(C, 0.0);
        for (std::size_t c = 0; c < C; ++c) {
          const double n = norms[c] / denom;
          double gx = 0.0, gsum = 0.0;
          for (std::size_t p = 0; p < P; ++p) {
            const double go = g[c * P + p];
            gx += go * xs[c * P + p];
            gsum += go;
            dx[c * P + p] = go * (1.0 + gm[c] * n);
          }
          dgamma[c] = gx * n;
          dbeta[c] = gsum;
          dn[c] = gm[c] * gx;
        }
        // n_c = g_c / (mean(g) + eps)
        double weighted = 0.0;
        for (std::size_t c = 0; c < C; ++c) weighted += dn[c] * norms[c];
        for (std::size_t c = 0; c < C; ++c) {
          if (norms[c] == 0.0) continue;
          const double dnorm =
              dn[c] / denom - weighted / (static_cast<double>(C) * denom * denom);
          for (std::size_t p = 0; p < P; ++p) dx[c * P + p] += dnorm * xs[c * P + p] / norms[c];
        }
        t.accumulate(x.id, std::move(dx));
        t.accumulate(gamma.id, std::move(dgamma));
        t.accumulate(beta.id, std::move(dbeta));
      });
}

Var TracedOps::group_norm(Var x, std::size_t groups, Var gamma, Var beta, double eps) {
  return tape_.push(
      "group_norm", ops::group_norm(value(x), groups, value(gamma), value(beta), eps),
      {x.id, gamma.id, beta.id},
      [x, gamma, beta, groups, eps](Tape& t, std::uint32_t self) {
        const Tensor& xs = t.value(x);
        const Tensor& gm = t.value(gamma);
        const Tensor& g = t.grad(self);
        const std::size_t C = xs.dim(0), P = xs.dim(1) * xs.dim(2);
        const std::size_t per = C / groups, n = per * P;
        Tensor dx = zeros_like(xs), dgamma = zeros_like(gm), dbeta = zeros_like(t.value(beta));
        std::vector<double> xhat(n), dxhat(n);
        for (std::size_t grp = 0; grp < groups; ++grp) {
          const std::size_t base = grp * n;
          double mean = 0.0;
          for (std::size_t i = 0; i < n; ++i) mean += xs[base + i];
          mean /= static_cast<double>(n);
          double var = 0.0;
          for (std::size_t i = 0; i < n; ++i) var += (xs[base + i] - mean) * (xs[base + i] - mean);
          var /= static_cast<double>(n);
          const double inv = 1.0 / std::sqrt(var + eps);
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = grp * per + i / P;
            xhat[i] = (xs[base + i] - mean) * inv;
            dxhat[i] = g[base + i] * gm[c];
            dgamma[c] += g[base + i] * xhat[i];
            dbeta[c] += g[base + i];
            mean_d += dxhat[i];
            mean_dx += dxhat[i] * xhat[i];
          }
          mean_d /= static_cast<double>(n);
          mean_dx /= static_cast<double>(n);
          for (std::size_t i = 0; i < n; ++i) {
            dx[base + i] = inv * (dxhat[i] - mean_d - xhat[i] * mean_dx);
          }
        }
        t.accumulate(x.id, std::move(dx));
        t.accumulate(gamma.id, std::move(dgamma));
        t.accumulate(beta.id, std::move(dbeta));
      });
}

Var TracedOps::concat_channels(std::span<const Var> parts) {
  std::vector<Tensor> values;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> sizes;
  for (Var p : parts) {
    values.push_back(value(p));
    ids.push_back(p.id);
    sizes.push_back(value(p).dims().empty() ? 0 : value(p).dim(0));
  }
  return tape_.push("concat_channels", ops::concat_channels(values), ids,
                    [ids, sizes](Tape& t, std::uint32_t self) {
                      auto pieces = ops::split_channels(t.grad(self), sizes);
                      for (std::size_t i = 0; i < ids.size(); ++i) t.accumulate(ids[i], std::move(pieces[i]));
                    });
}

std::vector<Var> TracedOps::split_channels(Var x, std::span<const std::size_t> sizes) {
  auto pieces = ops::split_channels(value(x), sizes);
  std::vector<Var> out;
  std::size_t c0 = 0;
  for (auto& piece : pieces) {
    const std::size_t width = piece.dim(0);
    out.push_back(tape_.push("split_channels", std::move(piece), {x.id},
                             [x, c0](Tape& t, std::uint32_t self) {
                               const Tensor& g = t.grad(self);
                               Tensor dx = zeros_like(t.value(x));
                               const std::size_t P = g.dim(1) * g.dim(2);
                               std::copy(g.data().begin(), g.data().end(),
                                         dx.data().begin() + static_cast<std::ptrdiff_t>(c0 * P));
                               t.accumulate(x.id, std::move(dx));
                             }));
    c0 += width;
  }
  return out;
}

Var TracedOps::upsample_nearest2x(Var x) {
  return tape_.push("upsample_nearest2x", ops::upsample_nearest2x(value(x)), {x.id},
                    [x](Tape& t, std::uint32_t self) {
                      const Tensor& g = t.grad(self);
                      Tensor dx = zeros_like(t.value(x));
                      const std::size_t C = g.dim(0), H = g.dim(1), W = g.dim(2);
                      for (std::size_t c = 0; c < C; ++c) {
                        for (std::size_t i = 0; i < H; ++i) {
                          for (std::size_t j = 0; j < W; ++j) dx.at(c, i / 2, j / 2) += g.at(c, i, j);
                        }
                      }
                      t.accumulate(x.id, std::move(dx));
                    });
}

Var TracedOps::mse_normalized(Var pred, Var target) {
  return tape_.push("mse_normalized", ops::mse_normalized(value(pred), value(target)),
                    {pred.id, target.id}, [pred, target](Tape& t, std::uint32_t self) {
                      const Tensor& p = t.value(pred);
                      const Tensor& q = t.value(target);
                      const double g = t.grad(self)[0];
                      const double s = 2.0 * g / static_cast<double>(p.numel());
                      Tensor dp = zeros_like(p);
                      for (std::size_t i = 0; i < p.numel(); ++i) dp[i] = s * (p[i] - q[i]);
                      if (t.requires_grad(target.id)) t.accumulate(target.id, ops::scale(dp, -1.0));
                      t.accumulate(pred.id, std::move(dp));
                    });
}

Var TracedOps::sum_all(Var x) {
  return tape_.push("sum_all", ops::sum_all(value(x)), {x.id}, [x](Tape& t, std::uint32_t self) {
    t.accumulate(x.id, Tensor::full(t.value(x).dims(), t.grad(self)[0], DType::float64));
  });
}

Var TracedOps::apply(std::string_view op, std::span<const Var> args) {
  auto need = [&](std::size_t n) {
    if (args.size() != n) {
      throw ConfigError(std::string(op) + " expects " + std::to_string(n) + " operand(s)");
    }
  };
  if (op == "tanh") { need(1); return tanh(args[0]); }
  if (op == "sigmoid") { need(1); return sigmoid(args[0]); }
  if (op == "square") { need(1); return square(args[0]); }
  if (op == "abs") { need(1); return abs(args[0]); }
  if (op == "avg_pool3") { need(1); return avg_pool3(args[0]); }
  if (op == "softmax_over_channels") { need(1); return softmax_over_channels(args[0]); }
  if (op == "channel_mean") { need(1); return channel_mean(args[0]); }
  if (op == "upsample_nearest2x") { need(1); return upsample_nearest2x(args[0]); }
  if (op == "sum_all") { need(1); return sum_all(args[0]); }
  if (op == "add") { need(2); return add(args[0], args[1]); }
  if (op == "sub") { need(2); return sub(args[0], args[1]); }
  if (op == "mul") { need(2); return mul(args[0], args[1]); }
  if (op == "dwconv_1d_h") { need(2); return dwconv_1d_h(args[0], args[1]); }
  if (op == "dwconv_1d_v") { need(2); return dwconv_1d_v(args[0], args[1]); }
  if (op == "dwconv_2d") { need(2); return dwconv_2d(args[0], args[1]); }
  if (op == "pwconv") { need(3); return pwconv(args[0], args[1], args[2]); }
  if (op == "concat_channels") return concat_channels(args);
  throw UnsupportedOperation("operation '" + std::string(op) + "' has no backward rule");
}

// ---------------------------------------------------------------------------

Gradients backward(Trace& trace, const Tensor& seed, std::size_t output_index) {
  Tape& tape = *trace.tape;
  tape.clear_grads();
  tape.backward(trace.outputs.at(output_index), seed);
  Gradients g;
  const auto& used = trace.ops->param_vars();
  for (const auto& [name, value] : trace.ops->params().values()) {
    auto it = used.find(name);
    if (it != used.end() && tape.has_grad(it->second.id)) {
      g.params.emplace(name, tape.grad(it->second.id));
    } else {
      g.params.emplace(name, Tensor::zeros(value.dims()));
    }
  }
  for (Var in : trace.inputs) {
    g.inputs.push_back(tape.has_grad(in.id) ? tape.grad(in.id)
                                            : Tensor::zeros(tape.value(in).dims()));
  }
  return g;
}

void accumulate_into(ParamStore& store, const Gradients& grads) {
  for (const auto& [name, g] : grads.params) {
    auto dst = store.grad_mut(name).data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

}  // namespace pfgnet
