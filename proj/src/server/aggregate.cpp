#include "fedmm/server/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedmm/error.hpp"
#include "fedmm/model/checkpoint.hpp"
#include "fedmm/rng.hpp"

namespace fedmm::server {

const char* to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::plain_avg: return "plain_avg";
    case AggregatorKind::avgm: return "avgm";
    case AggregatorKind::adam: return "adam";
    case AggregatorKind::yogi: return "yogi";
    case AggregatorKind::adagrad: return "adagrad";
  }
  return "?";
}

AggregatorKind parse_aggregator(const std::string& s) {
  if (s == "plain_avg" || s == "fedavg") return AggregatorKind::plain_avg;
  if (s == "avgm" || s == "fedavgm") return AggregatorKind::avgm;
  if (s == "adam" || s == "fedadam") return AggregatorKind::adam;
  if (s == "yogi" || s == "fedyogi") return AggregatorKind::yogi;
  if (s == "adagrad" || s == "fedadagrad") return AggregatorKind::adagrad;
  throw ParseError("unknown aggregator '" + s + "'");
}

ServerHyper default_hyper(AggregatorKind kind) {
  ServerHyper h;
  if (kind == AggregatorKind::avgm || kind == AggregatorKind::plain_avg) h.eta = 1.0;
  return h;
}

ServerState make_server_state(AggregatorKind kind, const ServerHyper& hyper, AdapterDelta initial) {
  ServerState s;
  s.kind = kind;
  s.hyper = hyper;
  const std::size_t n = initial.parameter_count();
  s.global = std::move(initial);
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.momentum.assign(n, 0.0);
  return s;
}

std::vector<std::size_t> sample_clients(std::span<const std::size_t> client_sizes, std::size_t per_round,
                                        std::uint64_t round, std::uint64_t seed) {
  std::vector<std::size_t> eligible;
  for (std::size_t k = 0; k < client_sizes.size(); ++k) {
    if (client_sizes[k] > 0) eligible.push_back(k);
  }
  if (per_round > eligible.size()) {
    throw ValidationError("sample_clients: asked for " + std::to_string(per_round) + " clients but only " +
                          std::to_string(eligible.size()) + " are nonempty");
  }
  Rng rng(derive_seed(seed, "server.sample", round));
  // Partial Fisher-Yates from the front.
  for (std::size_t i = 0; i < per_round; ++i) {
    const std::size_t j = i + rng.index(eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(per_round);
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

std::vector<double> aggregation_weights(std::span<const std::size_t> client_sizes) {
  const double total = std::accumulate(client_sizes.begin(), client_sizes.end(), 0.0,
                                       [](double acc, std::size_t n) { return acc + static_cast<double>(n); });
  if (total <= 0.0) throw ValidationError("pseudo_gradient: total client size is zero");
  std::vector<double> w;
  w.reserve(client_sizes.size());
  for (auto n : client_sizes) w.push_back(static_cast<double>(n) / total);
  return w;
}

std::vector<double> pseudo_gradient(std::span<const AdapterDelta> client_deltas,
                                    std::span<const std::size_t> client_sizes,
                                    const AdapterDelta& global) {
  if (client_deltas.empty()) throw ValidationError("pseudo_gradient: no client deltas");
  if (client_deltas.size() != client_sizes.size()) {
    throw ValidationError("pseudo_gradient: deltas and sizes differ in length");
  }
  const auto weights = aggregation_weights(client_sizes);
  const auto g = global.flatten();
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t k = 0; k < client_deltas.size(); ++k) {
    if (!client_deltas[k].same_shape(global)) throw ValidationError("pseudo_gradient: shape mismatch");
    const auto w = client_deltas[k].flatten();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[k] * (w[i] - g[i]);
  }
  return out;
}

ServerState server_step(const ServerState& state, std::span<const double> delta) {
  ServerState next = state;
  auto w = next.global.flatten();
  if (delta.size() != w.size()) throw ValidationError("server_step: pseudo-gradient shape mismatch");
  const auto& h = next.hyper;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = delta[i];
    switch (next.kind) {
      case AggregatorKind::plain_avg:
        w[i] += d;
        break;
      case AggregatorKind::avgm:
        next.momentum[i] = h.momentum * next.momentum[i] + d;
        w[i] += h.eta * next.momentum[i];
        break;
      case AggregatorKind::adagrad:
        next.v[i] += d * d;
        w[i] += h.eta * d / (std::sqrt(next.v[i]) + h.tau);
        break;
      case AggregatorKind::adam:
        next.m[i] = h.beta1 * next.m[i] + (1.0 - h.beta1) * d;
        next.v[i] = h.beta2 * next.v[i] + (1.0 - h.beta2) * d * d;
        w[i] += h.eta * next.m[i] / (std::sqrt(next.v[i]) + h.tau);
        break;
      case AggregatorKind::yogi: {
        next.m[i] = h.beta1 * next.m[i] + (1.0 - h.beta1) * d;
        const double d2 = d * d;
        const double diff = next.v[i] - d2;
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        next.v[i] = next.v[i] - (1.0 - h.beta2) * d2 * sign;
        w[i] += h.eta * next.m[i] / (std::sqrt(next.v[i]) + h.tau);
        break;
      }
    }
  }
  next.global.assign(w);
  ++next.round;
  return next;
}

namespace {

model::NamedTensor vector_tensor(std::string name, const std::vector<double>& values) {
  model::NamedTensor t;
  t.name = std::move(name);
  t.rows = 1;
  t.cols = values.size();
  t.values = values;
  return t;
}

}  // namespace

void save_server_state(const std::filesystem::path& path, const ServerState& state) {
  auto file = model::adapter_to_tensors(state.global);
  file.kind = "server";
  file.attrs.emplace_back("aggregator", static_cast<double>(static_cast<int>(state.kind)));
  file.attrs.emplace_back("round", static_cast<double>(state.round));
  file.attrs.emplace_back("eta", state.hyper.eta);
  file.attrs.emplace_back("beta1", state.hyper.beta1);
  file.attrs.emplace_back("beta2", state.hyper.beta2);
  file.attrs.emplace_back("tau", state.hyper.tau);
  file.attrs.emplace_back("momentum", state.hyper.momentum);
  file.tensors.push_back(vector_tensor("server.m", state.m));
  file.tensors.push_back(vector_tensor("server.v", state.v));
  file.tensors.push_back(vector_tensor("server.momentum", state.momentum));
  model::save_tensor_file(path, file);
}

ServerState load_server_state(const std::filesystem::path& path) {
  auto file = model::load_tensor_file(path);
  if (file.kind != "server") throw ParseError("checkpoint: expected a server file, got " + file.kind);
  if (file.tensors.size() < 3) throw ParseError("checkpoint: server file lacks moment tensors");
  ServerState s;
  const auto kind = static_cast<int>(file.attr("aggregator"));
  if (kind < 0 || kind > static_cast<int>(AggregatorKind::adagrad)) throw ParseError("checkpoint: bad aggregator");
  s.kind = static_cast<AggregatorKind>(kind);
  s.round = static_cast<std::uint64_t>(file.attr("round"));
  s.hyper = {file.attr("eta"), file.attr("beta1"), file.attr("beta2"), file.attr("tau"), file.attr("momentum")};
  s.momentum = file.tensors.back().values;
  file.tensors.pop_back();
  s.v = file.tensors.back().values;
  file.tensors.pop_back();
  s.m = file.tensors.back().values;
  file.tensors.pop_back();
  file.kind = "adapter";
  s.global = model::adapter_from_tensors(file);
  const auto n = s.global.parameter_count();
  if (s.m.size() != n || s.v.size() != n || s.momentum.size() != n) {
    throw ParseError("checkpoint: server moment size mismatch");
  }
  return s;
}

}  // namespace fedmm::server
