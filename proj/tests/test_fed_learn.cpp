#include <doctest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "fedsandbox/error.hpp"
#include "fedsandbox/fed_learn.hpp"
#include "fedsandbox/harness.hpp"
#include "fedsandbox/rng.hpp"
#include "fedsandbox/synth.hpp"

using namespace fedsandbox;

namespace {

EncodedMatrix random_matrix(std::size_t rows, std::size_t dim, Rng& rng,
                            double zero_x = 0.0) {
  EncodedMatrix m;
  m.rows = rows;
  m.dim = dim;
  m.x.resize(rows * dim);
  m.y.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < dim; ++j)
      m.x[r * dim + j] = zero_x > 0 ? 0.0 : rng.uniform01();
    m.y[r] = rng.uniform01() < 0.5 ? 0 : 1;
  }
  for (std::size_t j = 0; j < dim; ++j)
    m.feature_names.push_back("f" + std::to_string(j));
  return m;
}

double logloss(const Model& m, std::span<const double> x, int y) {
  double z = m.bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += m.weights[j] * x[j];
  const double s = 1.0 / (1.0 + std::exp(-z));
  return -(y * std::log(s) + (1 - y) * std::log(1.0 - s));
}

DatasetBundle heart_bundle() {
  SweepConfig cfg;
  cfg.dataset = "heart";
  cfg.data_dir = "test_data_cache";
  cfg.schema_dir = std::string(FEDSANDBOX_SOURCE_DIR) + "/schemas";
  return load_bundle(cfg);
}

}  // namespace

TEST_CASE("gradient closed form at the zero model") {
  Model m;
  m.weights.assign(3, 0.0);
  const std::vector<double> x{0.2, 0.8, 1.0};
  const auto g1 = grad_logloss(m, x, 1);
  REQUIRE(g1.size() == 4);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(g1[j] == doctest::Approx(-0.5 * x[j]));
  CHECK(g1[3] == doctest::Approx(-0.5));

  // g(y=0) - g(y=1) = x-tilde exactly; g(y=0) + g(y=1) = (2 sigma - 1) x = 0
  // at the zero model
  const auto g0 = grad_logloss(m, x, 0);
  for (std::size_t j = 0; j < 4; ++j) {
    const double xt = j < 3 ? x[j] : 1.0;
    CHECK(g0[j] - g1[j] == doctest::Approx(xt).epsilon(1e-12));
    CHECK(g0[j] + g1[j] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(90);
  const double h = 1e-6;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t dim = 1 + rng.below(8);
    Model m;
    for (std::size_t j = 0; j < dim; ++j)
      m.weights.push_back(rng.normal() * 0.8);
    m.bias = rng.normal() * 0.5;
    std::vector<double> x(dim);
    for (auto& v : x) v = rng.normal();
    const int y = rng.uniform01() < 0.5 ? 0 : 1;
    const auto g = grad_logloss(m, x, y);
    for (std::size_t j = 0; j <= dim; ++j) {
      Model up = m, dn = m;
      if (j < dim) {
        up.weights[j] += h;
        dn.weights[j] -= h;
      } else {
        up.bias += h;
        dn.bias -= h;
      }
      const double fd = (logloss(up, x, y) - logloss(dn, x, y)) / (2 * h);
      CHECK(g[j] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("gradient rejects non-finite inputs") {
  Model m;
  m.weights.assign(2, 0.0);
  const std::vector<double> bad{1.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(grad_logloss(m, bad, 1), Error);
}

TEST_CASE("dp path with zero noise and huge clip equals plain SGD") {
  Rng rng(91);
  const auto data = random_matrix(60, 5, rng);
  TrainConfig dp_cfg;
  dp_cfg.dp = true;
  dp_cfg.sigma_override = -1.0;  // zero noise
  dp_cfg.clip_norm = 1e9;
  dp_cfg.max_batch = 100;  // q = 1 so both paths normalize identically
  dp_cfg.epochs = 5;
  TrainConfig plain_cfg = dp_cfg;
  plain_cfg.dp = false;
  const auto a = train(data, dp_cfg, 7);
  const auto b = train(data, plain_cfg, 7);
  for (std::size_t j = 0; j < a.model.weights.size(); ++j)
    CHECK(a.model.weights[j] == doctest::Approx(b.model.weights[j]).epsilon(1e-12));
  CHECK(a.model.bias == doctest::Approx(b.model.bias).epsilon(1e-12));
}

TEST_CASE("training is bit-reproducible under a fixed seed") {
  Rng rng(92);
  const auto data = random_matrix(80, 4, rng);
  TrainConfig cfg;
  cfg.sigma_override = 1.5;
  cfg.epochs = 3;
  cfg.max_batch = 20;
  const auto a = train(data, cfg, 1234);
  const auto b = train(data, cfg, 1234);
  CHECK(a.model.weights == b.model.weights);
  CHECK(a.model.bias == b.model.bias);
  const auto c = train(data, cfg, 1235);
  CHECK(a.model.weights != c.model.weights);
}

TEST_CASE("clipping caps every per-example gradient norm") {
  Rng rng(93);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t dim = 1 + rng.below(6);
    Model m;
    for (std::size_t j = 0; j < dim; ++j) m.weights.push_back(rng.normal());
    m.bias = rng.normal();
    std::vector<double> x(dim);
    for (auto& v : x) v = rng.normal() * 3.0;
    const auto g = grad_logloss(m, x, int(rng.below(2)));
    double norm = 0;
    for (const double v : g) norm += v * v;
    norm = std::sqrt(norm);
    const double clip = 1.0;
    const double scale = norm > clip ? clip / norm : 1.0;
    double clipped = 0;
    for (const double v : g) clipped += (v * scale) * (v * scale);
    CHECK(std::sqrt(clipped) <= clip + 1e-12);
  }
}

TEST_CASE("secure aggregation carries exactly the central noise budget") {
  // all-zero features: weight gradients vanish, so after one full-batch step
  // each weight coordinate is -lr * noise_sum / n with noise_sum ~
  // N(0, sigma^2 C^2) regardless of K
  Rng rng(94);
  const std::size_t n = 100, dim = 8;
  const auto data = random_matrix(n, dim, rng, /*zero_x=*/1.0);
  const double sigma = 2.0;
  for (const int k : {2, 8, 64}) {
    TrainConfig cfg;
    cfg.scenario = Scenario::secure;
    cfg.sigma_override = sigma;
    cfg.epochs = 1;
    cfg.max_batch = int(n);  // q = 1, a single step
    cfg.lr = 1.0;
    TrainConfig quiet = cfg;
    quiet.sigma_override = -1.0;  // same trajectory without the noise
    const auto parts = partition_rows(n, k, 5);
    double sum = 0, sumsq = 0;
    long long count = 0;
    const int trials = 2500;  // 20000 noise samples per K
    for (int trial = 0; trial < trials; ++trial) {
      const auto seed = derive_seed(64, std::uint64_t(k), std::uint64_t(trial));
      const auto noisy = train_federated(data, parts, cfg, seed);
      const auto base = train_federated(data, parts, quiet, seed);
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = noisy.model.weights[j] - base.model.weights[j];
        sum += d;
        sumsq += d * d;
        ++count;
      }
    }
    const double mean = sum / double(count);
    const double var = sumsq / double(count) - mean * mean;
    const double expected_var =
        std::pow(sigma * cfg.clip_norm * cfg.lr / double(n), 2);
    CHECK(var == doctest::Approx(expected_var).epsilon(0.03));
  }
}

TEST_CASE("secure scenario reports the central accountant epsilon") {
  Rng rng(95);
  const auto data = random_matrix(120, 4, rng);
  TrainConfig cfg;
  cfg.scenario = Scenario::secure;
  cfg.target_eps = 2.0;
  cfg.delta = 1e-5;
  cfg.epochs = 2;
  cfg.max_batch = 30;
  const auto central = train(data, TrainConfig{.lr = cfg.lr,
                                               .max_batch = cfg.max_batch,
                                               .epochs = cfg.epochs,
                                               .clip_norm = cfg.clip_norm,
                                               .target_eps = cfg.target_eps,
                                               .delta = cfg.delta},
                             1);
  const auto parts = partition_rows(data.rows, 8, 3);
  const auto secure = train_federated(data, parts, cfg, 1);
  CHECK(secure.achieved_eps ==
        doctest::Approx(central.achieved_eps).epsilon(1e-3));
  CHECK(secure.sigma == doctest::Approx(central.sigma).epsilon(1e-6));
  CHECK(secure.clip_events == 0);
}

TEST_CASE("achieved epsilon grows with epochs at fixed sigma") {
  Rng rng(96);
  const auto data = random_matrix(100, 3, rng);
  TrainConfig cfg;
  cfg.sigma_override = 2.0;
  cfg.max_batch = 25;
  cfg.epochs = 2;
  const auto short_run = train(data, cfg, 1);
  cfg.epochs = 8;
  const auto long_run = train(data, cfg, 1);
  CHECK(long_run.achieved_eps > short_run.achieved_eps);
}

TEST_CASE("evaluate: constant model scores the class share, separator scores 1") {
  EncodedMatrix test;
  test.rows = 10;
  test.dim = 1;
  test.x.assign(10, 0.0);
  test.y = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  for (std::size_t r = 0; r < 10; ++r) test.x[r] = r < 5 ? 0.1 : 0.9;
  Model constant;
  constant.weights.assign(1, 0.0);
  CHECK(evaluate(constant, test) == doctest::Approx(0.5));

  Model separator;
  separator.weights = {10.0};
  separator.bias = -5.0;
  CHECK(evaluate(separator, test) == doctest::Approx(1.0));
}

TEST_CASE("local scenario degrades accuracy as the federation grows") {
  const auto bundle = heart_bundle();
  TrainConfig cfg;
  cfg.scenario = Scenario::local;
  cfg.target_eps = 3.0;
  cfg.delta = 1e-5;
  const int trials = 25;
  double acc4 = 0, acc16 = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const auto p4 = partition_rows(bundle.train_enc.rows, 4, 11);
    const auto p16 = partition_rows(bundle.train_enc.rows, 16, 11);
    acc4 += evaluate(
        train_federated(bundle.train_enc, p4, cfg, derive_seed(1, trial)).model,
        bundle.test_enc);
    acc16 += evaluate(
        train_federated(bundle.train_enc, p16, cfg, derive_seed(1, trial)).model,
        bundle.test_enc);
  }
  CHECK(acc16 / trials <= acc4 / trials + 0.02);
}

TEST_CASE("non-private baseline accuracy on heart (pinned regression)") {
  const auto bundle = heart_bundle();
  TrainConfig cfg;
  cfg.dp = false;
  const auto r = train(bundle.train_enc, cfg, derive_seed(1, kDefaultDataSeed));
  const double acc = evaluate(r.model, bundle.test_enc);
  // pinned after the first verified run; the baseline must clearly beat
  // chance on the balanced test set
  CHECK(acc > 0.70);
  CHECK(acc == doctest::Approx(0.857143).epsilon(0.001));
}

TEST_CASE("model export writes one named coefficient per line") {
  Model m;
  m.weights = {0.5, -1.25};
  m.bias = 0.75;
  export_model(m, {"alpha", "beta"}, "test_model_export.txt");
  std::ifstream in("test_model_export.txt");
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  CHECK(l1 == "alpha 0.5");
  CHECK(l2 == "beta -1.25");
  CHECK(l3 == "(bias) 0.75");
}
