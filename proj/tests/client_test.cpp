#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fedmm/client/local_train.hpp"
#include "fedmm/client/regularizer.hpp"
#include "fedmm/client/schedule.hpp"
#include "fedmm/data/synth.hpp"
#include "fedmm/error.hpp"
#include "fedmm/model/model.hpp"
#include "fedmm/partition/partition.hpp"
#include "fedmm/rng.hpp"

using namespace fedmm;
using namespace fedmm::client;
using model::AdapterDelta;
using model::LayerAdapter;
using model::Matrix;

namespace {

AdapterDelta scalar_delta(double b, double a) {
  AdapterDelta d;
  d.scale = 1.0;
  LayerAdapter l;
  l.name = "only";
  l.B = Matrix::Constant(1, 1, b);
  l.A = Matrix::Constant(1, 1, a);
  d.layers.push_back(l);
  return d;
}

AdapterDelta random_delta(std::size_t layers, std::uint64_t seed) {
  Rng rng(seed);
  AdapterDelta d;
  d.scale = 0.75;
  for (std::size_t i = 0; i < layers; ++i) {
    LayerAdapter l;
    l.name = "l" + std::to_string(i);
    l.depth = i;
    l.B = Matrix(3 + i, 2);
    l.A = Matrix(2, 4);
    for (Eigen::Index j = 0; j < l.B.size(); ++j) l.B.data()[j] = rng.normal();
    for (Eigen::Index j = 0; j < l.A.size(); ++j) l.A.data()[j] = rng.normal();
    d.layers.push_back(l);
  }
  return d;
}

struct Fixture {
  model::BaseWeights base;
  AdapterDelta global;
  data::DatasetManifest train;
  partition::ClientPartition partition;
};

Fixture make_fixture(std::uint64_t seed) {
  data::SynthConfig sc;
  sc.class_count = 3;
  sc.modality_dims = {4, 4};
  sc.samples_per_class = 30;
  sc.centroid_scale = {2.0};
  sc.noise_scale = 0.5;
  sc.seed = seed;
  Fixture f;
  f.train = data::synth_generate(sc);
  f.partition = partition::dirichlet_partition(f.train, 2, 5.0, seed);
  model::ModelConfig mc;
  mc.modality_dims = {4, 4};
  mc.hidden = 8;
  mc.encoder_depth = 1;
  mc.trunk_depth = 1;
  mc.class_count = 3;
  mc.rank = 2;
  mc.alpha_lora = 2.0;
  mc.seed = seed;
  auto [b, d] = model::init_model(mc);
  f.base = std::move(b);
  f.global = std::move(d);
  return f;
}

}  // namespace

TEST_CASE("mask vector margins") {
  auto m = mask_vector(8, 2);
  CHECK(m.bits == std::vector<bool>{false, false, true, true, true, true, false, false});
  CHECK_FALSE(m.warning);
  CHECK(mask_vector(5, 0).bits == std::vector<bool>(5, true));
  m = mask_vector(4, 4);
  CHECK(m.bits == std::vector<bool>(4, false));
  CHECK(m.warning);
  CHECK(mask_vector(4, 2).warning);
  CHECK_FALSE(mask_vector(5, 2).warning);
  CHECK(mask_vector(5, 2).bits == std::vector<bool>{false, false, true, false, false});
}

TEST_CASE("gamma follows the three-case rule") {
  using partition::ClientKind;
  CHECK(gamma_for_client(0.1, ClientKind::single_modality, 0.5) == doctest::Approx(0.1));
  CHECK(gamma_for_client(0.1, ClientKind::aligned, 0.0) == 0.0);
  CHECK(gamma_for_client(0.1, ClientKind::partial_missing, 0.5) == doctest::Approx(0.05));
  CHECK(gamma_for_client(0.1, ClientKind::partial_missing, 0.0) == 0.0);
  CHECK(gamma_for_client(0.1, ClientKind::partial_missing, 1.0) == doctest::Approx(0.1));
  // Linear in beta.
  for (int i = 0; i <= 10; ++i) {
    const double beta = i / 10.0;
    CHECK(gamma_for_client(0.3, ClientKind::partial_missing, beta) == doctest::Approx(0.3 * beta));
  }
}

TEST_CASE("scalar regularizer value and gradient") {
  // Delta composes to 3 (B = 3, A = 1); target composes to 1.
  const auto delta = scalar_delta(3.0, 1.0);
  const auto ctx = make_reg_context(scalar_delta(1.0, 1.0), {true}, 0.1);
  const auto r = reg_value_and_grad(delta, ctx);
  CHECK(r.value == doctest::Approx(0.4).epsilon(1e-14));
  // d/dB 0.1 (BA - 1)^2 = 0.2 (BA - 1) A = 0.4; d/dA = 0.2 (BA - 1) B = 1.2
  CHECK(r.grad.layers[0].B(0, 0) == doctest::Approx(0.4));
  CHECK(r.grad.layers[0].A(0, 0) == doctest::Approx(1.2));
}

TEST_CASE("regularizer gradient passes finite differences") {
  const auto target = random_delta(4, 1);
  const auto delta = random_delta(4, 2);
  const auto ctx = make_reg_context(target, {true, false, true, true}, 0.37);
  const auto analytic = reg_value_and_grad(delta, ctx).grad.flatten();
  auto params = delta.flatten();
  const double h = 1e-5;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params;
    auto probe = delta;
    p[i] += h;
    probe.assign(p);
    const double up = reg_value_and_grad(probe, ctx).value;
    p[i] -= 2 * h;
    probe.assign(p);
    const double down = reg_value_and_grad(probe, ctx).value;
    const double fd = (up - down) / (2 * h);
    const double rel = std::abs(fd - analytic[i]) / std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("regularizer minimum, masking and shape errors") {
  const auto delta = random_delta(3, 4);
  auto r = reg_value_and_grad(delta, make_reg_context(delta, {true, true, true}, 0.5));
  CHECK(r.value == 0.0);
  for (double g : r.grad.flatten()) CHECK(g == 0.0);
  r = reg_value_and_grad(delta, make_reg_context(random_delta(3, 5), {false, false, false}, 0.5));
  CHECK(r.value == 0.0);
  for (double g : r.grad.flatten()) CHECK(g == 0.0);
  CHECK(reg_value_and_grad(delta, make_reg_context(random_delta(3, 5), {true, true, true}, 0.5)).value > 0.0);
  CHECK_THROWS_AS(reg_value_and_grad(delta, make_reg_context(random_delta(2, 5), {true, true}, 0.5)),
                  ValidationError);
}

TEST_CASE("cosine schedule landmarks") {
  const double lr0 = 0.01;
  const std::size_t total = 1000;
  const auto w = warmup_steps(total, 0.01);
  CHECK(w == 10);
  CHECK(cosine_lr(w, total, 0.01, lr0) == lr0);
  CHECK(cosine_lr(total - 1, total, 0.01, lr0) < lr0 * 1e-3);
  // Decay covers steps w..total; the midpoint of that span has cosine 0.
  CHECK(cosine_lr(w + (total - w) / 2, total, 0.01, lr0) == doctest::Approx(lr0 / 2).epsilon(1e-12));
  CHECK(cosine_lr(5, total, 0.01, lr0) == doctest::Approx(lr0 * 0.5));
  CHECK_THROWS_AS(cosine_lr(0, 0, 0.01, lr0), ValidationError);
  CHECK_THROWS_AS(cosine_lr(10, 10, 0.01, lr0), ValidationError);
}

TEST_CASE("schedule is nonnegative and peaks exactly once") {
  for (std::size_t total : {1UL, 2UL, 3UL, 7UL, 50UL, 101UL, 1000UL}) {
    for (double ratio : {0.0, 0.01, 0.1, 0.5, 1.0}) {
      std::size_t peaks = 0;
      for (std::size_t s = 0; s < total; ++s) {
        const double lr = cosine_lr(s, total, ratio, 0.02);
        CHECK(lr >= 0.0);
        CHECK(lr <= 0.02);
        peaks += lr == 0.02 ? 1 : 0;
      }
      CHECK(peaks == 1);
    }
  }
}

TEST_CASE("zero epochs returns the global delta untouched") {
  auto f = make_fixture(1);
  const auto data = make_client_data(f.train, f.partition, 0);
  LocalTrainConfig cfg;
  cfg.epochs = 0;
  const auto r = local_train(f.base, f.global, data, cfg, RegularizerConfig{}, 0);
  CHECK(r.delta == f.global);
  CHECK(r.epoch_loss.empty());
}

TEST_CASE("local training is deterministic and leaves inputs alone") {
  auto f = make_fixture(2);
  const auto data = make_client_data(f.train, f.partition, 1);
  const auto global_copy = f.global;
  const auto weight_copy = f.base.weight;
  LocalTrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 9;
  const auto a = local_train(f.base, f.global, data, cfg, RegularizerConfig{}, 3);
  const auto b = local_train(f.base, f.global, data, cfg, RegularizerConfig{}, 3);
  CHECK(a.delta == b.delta);
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(f.global == global_copy);
  for (std::size_t i = 0; i < weight_copy.size(); ++i) CHECK(f.base.weight[i] == weight_copy[i]);
  CHECK_FALSE(a.delta == f.global);
  // A different round reshuffles minibatches.
  CHECK_FALSE(local_train(f.base, f.global, data, cfg, RegularizerConfig{}, 4).delta == a.delta);
}

TEST_CASE("five epochs on separable data reduce the loss") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto f = make_fixture(10 + seed);
    const auto data = make_client_data(f.train, f.partition, 0);
    LocalTrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = seed;
    const auto r = local_train(f.base, f.global, data, cfg, RegularizerConfig{}, 0);
    REQUIRE(r.epoch_loss.size() == 5);
    CHECK(r.epoch_loss.back() < r.epoch_loss.front());
  }
}

TEST_CASE("gamma is taken from the client's own data") {
  auto f = make_fixture(3);
  const auto cross = partition::apply_cross(f.partition, 1, 3);
  RegularizerConfig reg;
  reg.enabled = true;
  reg.gamma_max = 0.1;
  LocalTrainConfig cfg;
  cfg.epochs = 1;
  for (std::size_t k = 0; k < 2; ++k) {
    const auto data = make_client_data(f.train, cross, k);
    if (data.slot.empty()) continue;
    const auto r = local_train(f.base, f.global, data, cfg, reg, 0);
    CHECK(r.kind == partition::ClientKind::single_modality);
    CHECK(r.beta == doctest::Approx(0.5));
    CHECK(r.gamma == doctest::Approx(0.1));
  }
  const auto data = make_client_data(f.train, f.partition, 0);
  const auto r = local_train(f.base, f.global, data, cfg, reg, 0);
  CHECK(r.kind == partition::ClientKind::aligned);
  CHECK(r.gamma == 0.0);
  // Disabled regularizer yields zero gamma even for single-modality clients.
  const auto off = local_train(f.base, f.global, make_client_data(f.train, cross, 0), cfg, RegularizerConfig{}, 0);
  CHECK(off.gamma == 0.0);
}

TEST_CASE("empty clients are rejected") {
  auto f = make_fixture(4);
  partition::ClientPartition p = f.partition;
  p.clients.push_back({});
  CHECK_THROWS_AS(local_train(f.base, f.global, make_client_data(f.train, p, 2), LocalTrainConfig{},
                              RegularizerConfig{}, 0),
                  ValidationError);
}
