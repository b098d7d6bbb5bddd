#include "pfgnet/msinit.hpp"

#include <string>

#include "pfgnet/autodiff.hpp"
#include "pfgnet/eager.hpp"
#include "pfgnet/errors.hpp"

namespace pfgnet::msinit {

std::string branch_prefix(std::size_t m) { return "msinit/branch/" + std::to_string(m); }

void add_params(ParamStore& store, std::size_t width, std::span<const std::size_t> kernels,
                const Initializer& init) {
  const std::size_t M = kernels.size();
  if (M == 0 || width % M != 0) {
    throw ConfigError("msinit: width " + std::to_string(width) + " is not divisible by " +
                      std::to_string(M) + " branches");
  }
  for (std::size_t m = 0; m < M; ++m) {
    const auto p = branch_prefix(m);
    store.set(p + "/h", init.identity_taps(p + "/h", {width, kernels[m]}, 0.02));
    store.set(p + "/v", init.identity_taps(p + "/v", {width, kernels[m]}, 0.02));
    store.set(p + "/d", init.normal(p + "/d", {width, 3, 3}, 0.02));
    store.set(p + "/proj/w", init.uniform_fan_in(p + "/proj/w", {width / M, width}, width));
    store.set(p + "/proj/b", init.zeros({width / M}));
  }
}

std::size_t param_count(std::size_t width, std::span<const std::size_t> kernels) {
  const std::size_t M = kernels.size();
  std::size_t n = 0;
  for (auto k : kernels) n += 2 * k * width + 9 * width + (width / M) * width + width / M;
  return n;
}

template <class Ops>
typename Ops::Value branch(Ops& ops, const typename Ops::Value& z, std::size_t m) {
  const auto p = branch_prefix(m);
  auto sep = ops.sep_conv(z, ops.param(p + "/h"), ops.param(p + "/v"));
  auto local = ops.dwconv_2d(z, ops.param(p + "/d"));
  return ops.add(ops.add(sep, local), z);
}

template <class Ops>
typename Ops::Value forward(Ops& ops, const typename Ops::Value& z, std::size_t branches) {
  if (branches == 0 || ops.value(z).dim(0) % branches != 0) {
    throw ConfigError("msinit: channel count is not divisible by the branch count");
  }
  std::vector<typename Ops::Value> parts;
  parts.reserve(branches);
  for (std::size_t m = 0; m < branches; ++m) {
    const auto p = branch_prefix(m);
    parts.push_back(ops.pwconv(branch(ops, z, m), ops.param(p + "/proj/w"), ops.param(p + "/proj/b")));
  }
  return ops.concat_channels(parts);
}

template EagerOps::Value branch<EagerOps>(EagerOps&, const EagerOps::Value&, std::size_t);
template TracedOps::Value branch<TracedOps>(TracedOps&, const TracedOps::Value&, std::size_t);
template EagerOps::Value forward<EagerOps>(EagerOps&, const EagerOps::Value&, std::size_t);
template TracedOps::Value forward<TracedOps>(TracedOps&, const TracedOps::Value&, std::size_t);

}  // namespace pfgnet::msinit
