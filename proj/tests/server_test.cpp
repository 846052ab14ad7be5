#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedmm/data/synth.hpp"
#include "fedmm/error.hpp"
#include "fedmm/model/model.hpp"
#include "fedmm/partition/partition.hpp"
#include "fedmm/server/aggregate.hpp"
#include "fedmm/server/run.hpp"

using namespace fedmm;
using namespace fedmm::server;
using model::AdapterDelta;
using model::LayerAdapter;
using model::Matrix;

namespace {

AdapterDelta scalar_delta(double b, double a = 0.0) {
  AdapterDelta d;
  d.scale = 1.0;
  LayerAdapter l;
  l.B = Matrix::Constant(1, 1, b);
  l.A = Matrix::Constant(1, 1, a);
  d.layers.push_back(l);
  return d;
}

const AggregatorKind kAll[] = {AggregatorKind::plain_avg, AggregatorKind::avgm, AggregatorKind::adam,
                               AggregatorKind::yogi, AggregatorKind::adagrad};

struct World {
  data::DatasetManifest train, test;
  partition::ClientPartition partition;
  model::BaseWeights base;
  AdapterDelta initial;
};

World make_world(std::uint64_t seed, std::size_t clients = 10, double alpha = 0.5) {
  data::SynthConfig sc;
  sc.class_count = 4;
  sc.modality_dims = {8, 8};
  sc.samples_per_class = 50;
  sc.centroid_scale = {1.0};
  sc.noise_scale = 1.0;
  sc.seed = seed;
  World w;
  w.train = data::synth_generate(sc, data::Split::train);
  w.test = data::synth_generate(sc, data::Split::test);
  w.partition = partition::dirichlet_partition(w.train, clients, alpha, seed);
  model::ModelConfig mc;
  mc.modality_dims = {8, 8};
  mc.hidden = 16;
  mc.encoder_depth = 1;
  mc.trunk_depth = 2;
  mc.class_count = 4;
  mc.rank = 4;
  mc.alpha_lora = 4.0;
  mc.seed = seed;
  auto [b, d] = model::init_model(mc);
  w.base = std::move(b);
  w.initial = std::move(d);
  return w;
}

FLRunConfig small_run(AggregatorKind kind, std::size_t rounds, std::uint64_t seed) {
  FLRunConfig cfg;
  cfg.rounds = rounds;
  cfg.per_round = 2;
  cfg.aggregator = kind;
  cfg.hyper = default_hyper(kind);
  cfg.metric = metrics::MetricKind::macro_f1;
  cfg.seed = seed;
  cfg.local.seed = seed;
  cfg.local.epochs = 1;
  return cfg;
}

std::string log_text(const RunLog& log) {
  std::ostringstream s;
  write_run_log(s, log);
  return s.str();
}

}  // namespace

TEST_CASE("sampling everyone, determinism and empty clients") {
  const std::vector<std::size_t> sizes{3, 0, 5, 2, 0, 1};
  CHECK(sample_clients(sizes, 4, 1, 0) == std::vector<std::size_t>{0, 2, 3, 5});
  for (std::uint64_t r = 0; r < 50; ++r) {
    const auto a = sample_clients(sizes, 2, r, 7);
    CHECK(a == sample_clients(sizes, 2, r, 7));
    CHECK(a.size() == 2);
    CHECK(a[0] < a[1]);
    for (auto k : a) CHECK(sizes[k] > 0);
  }
  CHECK_THROWS_AS(sample_clients(sizes, 5, 1, 0), ValidationError);
}

TEST_CASE("selection frequency is uniform over 10,000 rounds") {
  const std::vector<std::size_t> sizes(10, 4);
  std::vector<double> hits(10, 0.0);
  for (std::uint64_t r = 0; r < 10000; ++r)
    for (auto k : sample_clients(sizes, 2, r, 3)) hits[k] += 1.0;
  for (double h : hits) CHECK(std::abs(h / 10000.0 - 0.2) < 0.02);
}

TEST_CASE("pseudo-gradient weighted means") {
  const auto g = scalar_delta(0.0);
  std::vector<AdapterDelta> one{scalar_delta(2.5, -1.0)};
  std::vector<std::size_t> n1{7};
  auto d = pseudo_gradient(one, n1, g);
  CHECK(d == std::vector<double>{2.5, -1.0});
  std::vector<AdapterDelta> sym{scalar_delta(0.3, 0.3), scalar_delta(-0.3, -0.3)};
  std::vector<std::size_t> eq{4, 4};
  d = pseudo_gradient(sym, eq, g);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 0.0);
  std::vector<AdapterDelta> pair{scalar_delta(4.0, 4.0), scalar_delta(0.0, 0.0)};
  std::vector<std::size_t> sizes{1, 3};
  d = pseudo_gradient(pair, sizes, g);
  CHECK(d[0] == 1.0);
  CHECK(d[1] == 1.0);
  const std::vector<std::size_t> w{2, 5, 9, 1};
  const auto weights = aggregation_weights(w);
  double sum = 0.0;
  for (double x : weights) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(pseudo_gradient(std::vector<AdapterDelta>{}, std::vector<std::size_t>{}, g), ValidationError);
}

TEST_CASE("zero pseudo-gradient on a fresh state changes nothing") {
  for (auto kind : kAll) {
    const auto s = make_server_state(kind, default_hyper(kind), scalar_delta(0.7, -0.2));
    const std::vector<double> zero{0.0, 0.0};
    const auto next = server_step(s, zero);
    CHECK(next.global == s.global);
    CHECK(next.round == 1);
  }
}

TEST_CASE("scalar adagrad recurrence") {
  ServerHyper h;
  h.eta = 1.0;
  h.tau = 0.001;
  auto s = make_server_state(AggregatorKind::adagrad, h, scalar_delta(0.0));
  s = server_step(s, std::vector<double>{0.3, 0.0});
  CHECK(s.v[0] == doctest::Approx(0.09).epsilon(1e-14));
  const double w1 = 0.3 / (0.3 + 0.001);
  CHECK(std::abs(s.global.layers[0].B(0, 0) - w1) < 1e-12);
  s = server_step(s, std::vector<double>{0.4, 0.0});
  CHECK(s.v[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(std::abs(s.global.layers[0].B(0, 0) - (w1 + 0.4 / (0.5 + 0.001))) < 1e-12);
}

TEST_CASE("yogi and adam share first moments; yogi's second moment follows its own recurrence") {
  ServerHyper h;
  h.eta = 0.05;
  auto adam = make_server_state(AggregatorKind::adam, h, scalar_delta(0.0));
  auto yogi = make_server_state(AggregatorKind::yogi, h, scalar_delta(0.0));
  adam.v[0] = yogi.v[0] = 10.0;
  double v = 10.0;
  for (int t = 0; t < 100; ++t) {
    const double d = 0.5 * std::sin(0.3 * t);
    adam = server_step(adam, std::vector<double>{d, 0.0});
    yogi = server_step(yogi, std::vector<double>{d, 0.0});
    REQUIRE(v - d * d > 0.0);
    v = v - (1.0 - h.beta2) * d * d;
    CHECK(adam.m[0] == yogi.m[0]);
    CHECK(std::abs(yogi.v[0] - v) < 1e-12);
  }
}

TEST_CASE("adagrad second moment never decreases") {
  auto s = make_server_state(AggregatorKind::adagrad, default_hyper(AggregatorKind::adagrad), scalar_delta(0.0));
  double prev = 0.0;
  for (int t = 0; t < 50; ++t) {
    s = server_step(s, std::vector<double>{std::cos(t * 1.7), -0.1 * t});
    CHECK(s.v[0] >= prev);
    prev = s.v[0];
  }
}

TEST_CASE("server_step is pure") {
  for (auto kind : kAll) {
    auto s = make_server_state(kind, default_hyper(kind), scalar_delta(0.1, 0.2));
    s = server_step(s, std::vector<double>{0.5, -0.5});
    const auto before = s;
    const std::vector<double> d{0.25, 0.125};
    const auto a = server_step(s, d);
    const auto b = server_step(s, d);
    CHECK(a.global == b.global);
    CHECK(a.m == b.m);
    CHECK(a.v == b.v);
    CHECK(a.momentum == b.momentum);
    CHECK(s.global == before.global);
    CHECK(s.v == before.v);
  }
  auto s = make_server_state(AggregatorKind::adam, ServerHyper{}, scalar_delta(0.0));
  CHECK_THROWS_AS(server_step(s, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("plain averaging of one gradient step equals centralized descent") {
  // Two clients with quadratic losses F_k(w) = mean_i (w - x_i)^2 / 2 in each coordinate.
  const std::vector<double> c1{1.0, 2.0};
  const std::vector<double> c2{4.0, 5.0, 9.0};
  const double lr = 0.1;
  auto step = [&](double w, const std::vector<double>& xs) {
    double g = 0.0;
    for (double x : xs) g += w - x;
    return w - lr * g / static_cast<double>(xs.size());
  };
  auto s = make_server_state(AggregatorKind::plain_avg, default_hyper(AggregatorKind::plain_avg), scalar_delta(0.0, 1.0));
  const std::vector<AdapterDelta> locals{scalar_delta(step(0.0, c1), step(1.0, c1)),
                                         scalar_delta(step(0.0, c2), step(1.0, c2))};
  const std::vector<std::size_t> sizes{2, 3};
  s = server_step(s, pseudo_gradient(locals, sizes, s.global));
  // Hand-run centralized step on the union {1, 2, 4, 5, 9}, mean 4.2.
  CHECK(std::abs(s.global.layers[0].B(0, 0) - 0.42) < 1e-12);
  CHECK(std::abs(s.global.layers[0].A(0, 0) - (1.0 - 0.1 * (1.0 - 4.2))) < 1e-12);
}

TEST_CASE("one round with one client installs that client's update") {
  auto w = make_world(1, 1);
  auto cfg = small_run(AggregatorKind::plain_avg, 1, 4);
  cfg.per_round = 1;
  const auto run = run_rounds(cfg, w.base, w.initial, w.partition, w.train, w.test);
  const auto data = client::make_client_data(w.train, w.partition, 0);
  const auto local = client::local_train(w.base, w.initial, data, cfg.local, cfg.reg, 1);
  const auto a = run.state.global.flatten();
  const auto b = local.delta.flatten();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
  REQUIRE(run.log.rounds.size() == 1);
  CHECK(run.log.rounds[0].eval);
}

TEST_CASE("identical seeds give identical logs") {
  auto w = make_world(2);
  const auto cfg = small_run(AggregatorKind::yogi, 4, 6);
  const auto a = run_rounds(cfg, w.base, w.initial, w.partition, w.train, w.test);
  const auto b = run_rounds(cfg, w.base, w.initial, w.partition, w.train, w.test);
  CHECK(log_text(a.log) == log_text(b.log));
  CHECK(a.state.global == b.state.global);
  CHECK(log_text(a.log).find("wall_ms") == std::string::npos);
}

TEST_CASE("evaluation cadence always includes the last round") {
  auto w = make_world(3);
  auto cfg = small_run(AggregatorKind::adam, 5, 1);
  cfg.eval_every = 2;
  const auto run = run_rounds(cfg, w.base, w.initial, w.partition, w.train, w.test);
  CHECK_FALSE(run.log.rounds[0].eval);
  CHECK(run.log.rounds[1].eval);
  CHECK(run.log.rounds[4].eval);
}

TEST_CASE("federated adam makes progress on aligned data") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto w = make_world(20 + seed);
    const auto cfg = small_run(AggregatorKind::adam, 30, seed);
    const auto run = run_rounds(cfg, w.base, w.initial, w.partition, w.train, w.test);
    CHECK(run.log.rounds.back().eval->accuracy > run.log.rounds.front().eval->accuracy);
  }
}

TEST_CASE("local baseline with one client is single-model training") {
  auto w = make_world(4, 1);
  client::LocalTrainConfig local;
  local.seed = 3;
  const auto b = local_baseline(w.base, w.initial, w.partition, w.train, w.test, local, metrics::MetricKind::macro_f1);
  REQUIRE(b.per_client.size() == 1);
  local.epochs = 5;
  const auto trained = client::local_train(w.base, w.initial, client::make_client_data(w.train, w.partition, 0), local,
                                           client::RegularizerConfig{}, 0);
  const auto direct = metrics::evaluate(w.base, trained.delta, w.test, metrics::MetricKind::macro_f1);
  CHECK(b.mean_value == direct.value);
  CHECK(b.mean_accuracy == direct.accuracy);
  const auto again = local_baseline(w.base, w.initial, w.partition, w.train, w.test, local, metrics::MetricKind::macro_f1);
  CHECK(again.mean_value == b.mean_value);
}

TEST_CASE("server state checkpoints round trip bit-exactly") {
  auto s = make_server_state(AggregatorKind::yogi, default_hyper(AggregatorKind::yogi), scalar_delta(0.3, -0.7));
  s = server_step(s, std::vector<double>{0.1, 0.2});
  s = server_step(s, std::vector<double>{-0.4, 0.05});
  const auto path = std::filesystem::temp_directory_path() / "fedmm_server_state.ckpt";
  save_server_state(path, s);
  const auto back = load_server_state(path);
  CHECK(back.kind == s.kind);
  CHECK(back.hyper == s.hyper);
  CHECK(back.global == s.global);
  CHECK(back.m == s.m);
  CHECK(back.v == s.v);
  CHECK(back.momentum == s.momentum);
  CHECK(back.round == 2);
  // Resuming from the checkpoint continues identically.
  const std::vector<double> d{0.3, 0.3};
  CHECK(server_step(back, d).global == server_step(s, d).global);
}

TEST_CASE("aggregator names and aliases") {
  CHECK(parse_aggregator("fedadam") == AggregatorKind::adam);
  CHECK(parse_aggregator("adagrad") == AggregatorKind::adagrad);
  CHECK(parse_aggregator("fedavg") == AggregatorKind::plain_avg);
  CHECK_THROWS_AS(parse_aggregator("sgd"), ParseError);
  CHECK(default_hyper(AggregatorKind::avgm).eta == 1.0);
  CHECK(default_hyper(AggregatorKind::adam).eta == 0.01);
}
