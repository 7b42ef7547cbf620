#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "cpls/graph.hpp"
#include "cpls/nn.hpp"
#include "cpls/params.hpp"
#include "cpls/training.hpp"

using namespace cpls;

TEST_CASE("matmul against identity leaves the operand unchanged") {
  Graph g;
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor out = g.matmul(eye, m);
  CHECK(out.values() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("softmax of a constant row is uniform") {
  Graph g;
  Tensor out = g.softmax(Tensor::from({1, 3}, {0, 0, 0}));
  for (double v : out.values()) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("tanh fixes the origin") {
  Graph g;
  Tensor out = g.tanh(Tensor::zeros({2, 3}));
  for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("shape mismatches name the operation and both shapes") {
  Graph g;
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 2});
  CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("matmul"), ShapeError);
  CHECK_THROWS_WITH_AS(g.add(a, b), doctest::Contains("[2x3]"), ShapeError);
  CHECK_THROWS_AS(g.apply("no_such_op", {a}), ContractError);
}

TEST_CASE("backward of sum is all ones; dot distributes to the other operand") {
  {
    Graph g;
    Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    g.backward(g.sum(x));
    CHECK(x.grad() == std::vector<double>(6, 1.0));
  }
  {
    Graph g;
    Tensor x = Tensor::from({1, 3}, {1, 2, 3}, true);
    Tensor y = Tensor::from({1, 3}, {4, 5, 6}, true);
    g.backward(g.sum(g.mul(x, y)));
    CHECK(x.grad() == y.values());
    CHECK(y.grad() == x.values());
  }
}

TEST_CASE("backward requires a scalar loss and a recorded forward pass") {
  Graph g;
  Tensor x = Tensor::from({1, 2}, {1, 2}, true);
  Tensor y = g.add(x, x);
  CHECK_THROWS_AS(g.backward(y), ContractError);  // non-scalar
  Graph empty;
  CHECK_THROWS_AS(empty.backward(Tensor::scalar(1.0)), ContractError);
}

TEST_CASE("gradient accumulation is linear: sum of losses == sum of backwards") {
  auto grads_of = [](bool joint) {
    Tensor x = Tensor::from({2, 2}, {0.3, -0.7, 1.1, 0.4}, true);
    Tensor w = Tensor::from({2, 2}, {0.5, 0.2, -0.4, 0.9}, true);
    if (joint) {
      Graph g;
      Tensor l = g.add(g.sum(g.matmul(x, w)), g.sq_dist(x, w));
      g.backward(l);
    } else {
      Graph g1;
      g1.backward(g1.sum(g1.matmul(x, w)));
      Graph g2;  // grads persist and accumulate across passes
      g2.backward(g2.sq_dist(x, w));
    }
    return std::make_pair(x.grad(), w.grad());
  };
  auto [jx, jw] = grads_of(true);
  auto [sx, sw] = grads_of(false);
  for (size_t i = 0; i < jx.size(); ++i) {
    CHECK(jx[i] == doctest::Approx(sx[i]).epsilon(1e-12));
    CHECK(jw[i] == doctest::Approx(sw[i]).epsilon(1e-12));
  }
}

TEST_CASE("one lstm cell step matches central finite differences") {
  auto cases = nn::model_grad_checks();
  REQUIRE(cases[0].name == "lstm_cell");
  for (uint64_t seed = 1; seed <= 10; ++seed) CHECK(cases[0].run(seed) < 1e-4);
}

TEST_CASE("per-operation gradient checks on randomized small inputs") {
  for (auto& c : builtin_grad_checks()) {
    double worst = 0.0;
    for (uint64_t seed = 1; seed <= 10; ++seed) worst = std::max(worst, c.run(seed));
    INFO(c.name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("grad_check rejects non-scalar closures and bad eps") {
  std::vector<Tensor> in{Tensor::from({1, 2}, {1, 2})};
  auto identity = [](Graph&, std::vector<Tensor>& t) { return t[0]; };
  CHECK_THROWS_AS(grad_check(identity, in, 1e-5), ContractError);
  auto summed = [](Graph& g, std::vector<Tensor>& t) { return g.sum(t[0]); };
  CHECK_THROWS_AS(grad_check(summed, in, 0.0), ContractError);
}

TEST_CASE("dropout: eval identity; train keeps expectation and scales by 1/(1-p)") {
  Rng rng(99);
  Tensor x = Tensor::from({1, 10000}, std::vector<double>(10000, 1.0));
  Graph g(false);
  Tensor eval_out = g.dropout(x, 0.4, rng, false);
  CHECK(eval_out.values() == x.values());

  const double p = 0.4;
  Tensor train_out = g.dropout(x, p, rng, true);
  size_t kept = 0;
  double sum = 0.0;
  for (double v : train_out.values()) {
    if (v != 0.0) {
      ++kept;
      CHECK(v == doctest::Approx(1.0 / (1.0 - p)));
    }
    sum += v;
  }
  const double kept_frac = static_cast<double>(kept) / 10000.0;
  CHECK(kept_frac == doctest::Approx(1.0 - p).epsilon(0.05));
  CHECK(sum / 10000.0 == doctest::Approx(1.0).epsilon(0.05));  // expectation kept
}

TEST_CASE("sgd arithmetic, zero-gradient fixpoint and learning-rate defaults") {
  ParamStore store;
  Tensor v = store.add("w", {1});
  v.values()[0] = 1.0;
  v.data()->ensure_grad();
  v.grad()[0] = 0.5;
  store.sgd_step(0.1, 0.0);
  CHECK(v.values()[0] == doctest::Approx(0.95));
  CHECK(v.grad()[0] == 0.0);  // gradients zeroed after the step

  store.sgd_step(0.1, 0.0);  // zero gradient leaves the value unchanged
  CHECK(v.values()[0] == doctest::Approx(0.95));

  training::TrainingConfig defaults;
  CHECK(defaults.lr_dae == 1.0);
  CHECK(defaults.lr_s2s == doctest::Approx(0.1));
}

TEST_CASE("global gradient-norm clipping rescales the step") {
  ParamStore store;
  Tensor v = store.add("w", {2});
  v.values() = {0.0, 0.0};
  v.data()->ensure_grad();
  v.grad() = {3.0, 4.0};  // norm 5
  store.sgd_step(1.0, 1.0);  // clipped to unit norm: step = grad/5
  CHECK(v.values()[0] == doctest::Approx(-0.6));
  CHECK(v.values()[1] == doctest::Approx(-0.8));
}

TEST_CASE("NaN gradients abort with the parameter name") {
  ParamStore store;
  Tensor v = store.add("layer.w", {1});
  v.data()->ensure_grad();
  v.grad()[0] = std::nan("");
  CHECK_THROWS_WITH_AS(store.sgd_step(1.0, 5.0), doctest::Contains("layer.w"),
                       NumericError);
}

TEST_CASE("unreachable parameters report zero gradients") {
  ParamStore store;
  Tensor used = store.add("used", {1, 2});
  store.add("unused", {3});
  used.values() = {1.0, 2.0};
  Graph g;
  g.backward(g.sum(used));
  auto grads = store.gradients();
  CHECK(grads.at("used").values() == std::vector<double>{1.0, 1.0});
  CHECK(grads.at("unused").values() == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("checkpoint round trip is bit-exact") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "cpls_ckpt_test.bin").string();

  ParamStore store;
  Rng rng(31);
  store.add_uniform("enc.w", {7, 5}, rng, -1, 1);
  store.add_uniform("enc.b", {5}, rng, -1, 1);
  Tensor odd = store.add("odd", {3});
  odd.values() = {1.0 / 3.0, -0.0, 1e-300};  // exercises tricky bit patterns
  store.save(path);

  ParamStore loaded = ParamStore::read_file(path);
  REQUIRE(loaded.count() == store.count());
  for (const auto& p : store.all()) {
    Tensor other = loaded.get(p.name);
    CHECK(other.shape() == p.value.shape());
    CHECK(std::memcmp(other.values().data(), p.value.values().data(),
                      p.value.size() * sizeof(double)) == 0);
  }

  ParamStore target;
  Rng rng2(99);
  target.add_uniform("enc.w", {7, 5}, rng2, -1, 1);
  target.add_uniform("enc.b", {5}, rng2, -1, 1);
  target.add("odd", {3});
  target.load(path);
  CHECK(std::memcmp(target.get("enc.w").values().data(),
                    store.get("enc.w").values().data(), 35 * sizeof(double)) == 0);
  fs::remove(path);
}

TEST_CASE("duplicate parameter names are rejected") {
  ParamStore store;
  store.add("w", {1});
  CHECK_THROWS_AS(store.add("w", {2}), ContractError);
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
  Rng rng(4);
  Graph g;
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 1 + static_cast<int>(rng.uniform_int(6));
    const int cols = 1 + static_cast<int>(rng.uniform_int(9));
    Tensor x = Tensor::zeros({rows, cols});
    for (auto& v : x.values()) v = rng.uniform(-8, 8);
    Tensor y = g.softmax(x);
    for (int i = 0; i < rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < cols; ++j) {
        CHECK(y.at(i, j) >= 0.0);
        sum += y.at(i, j);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
}
