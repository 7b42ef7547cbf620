#include <algorithm>
#include <cmath>

#include "cpls/graph.hpp"

namespace cpls {

namespace {

constexpr double kEps = 1e-5;

Tensor rand_mat(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros({r, c});
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

Tensor rand_vec(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros({n});
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// values bounded away from zero, for kinked ops (relu)
Tensor rand_mat_offzero(Rng& rng, int r, int c) {
  Tensor t = Tensor::zeros({r, c});
  for (auto& v : t.values()) {
    const double mag = rng.uniform(0.05, 1.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

// columns with all pairwise gaps > 1e-3, so +-eps cannot flip an argmax
Tensor rand_mat_separated(Rng& rng, int r, int c) {
  Tensor t = Tensor::zeros({r, c});
  for (int j = 0; j < c; ++j) {
    for (;;) {
      for (int i = 0; i < r; ++i) t.at(i, j) = rng.uniform(-1.0, 1.0);
      bool ok = true;
      for (int i = 0; i < r && ok; ++i)
        for (int i2 = i + 1; i2 < r; ++i2)
          if (std::abs(t.at(i, j) - t.at(i2, j)) < 1e-3) {
            ok = false;
            break;
          }
      if (ok) break;
    }
  }
  return t;
}

int dim(Rng& rng) { return 1 + static_cast<int>(rng.uniform_int(8)); }  // dims <= 8

// scalarize op output against a fixed random weighting so the gradient of
// every output coordinate is exercised
Tensor weighted_sum(Graph& g, const Tensor& x, const Tensor& w) {
  return g.sum(g.mul(x, w));
}

}  // namespace

std::vector<GradCheckCase> builtin_grad_checks() {
  std::vector<GradCheckCase> cases;
  auto add_case = [&](std::string name, std::function<double(uint64_t)> run) {
    cases.push_back({std::move(name), std::move(run)});
  };

  add_case("matmul", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), k = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat(rng, m, k), rand_mat(rng, k, n)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.matmul(t[0], t[1]), w);
        },
        in, kEps);
  });

  add_case("add", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat(rng, m, n), rand_mat(rng, m, n)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.add(t[0], t[1]), w);
        },
        in, kEps);
  });

  add_case("sub", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat(rng, m, n), rand_mat(rng, m, n)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.sub(t[0], t[1]), w);
        },
        in, kEps);
  });

  add_case("mul", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat(rng, m, n), rand_mat(rng, m, n)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.mul(t[0], t[1]), w);
        },
        in, kEps);
  });

  add_case("add_rowvec", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat(rng, m, n), rand_vec(rng, n)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.add_rowvec(t[0], t[1]), w);
        },
        in, kEps);
  });

  add_case("mul_colvec", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat(rng, m, n), rand_mat(rng, m, 1)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.mul_colvec(t[0], t[1]), w);
        },
        in, kEps);
  });

  add_case("scale", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    const double alpha = rng.uniform(-2.0, 2.0);
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat(rng, m, n)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.scale(t[0], alpha), w);
        },
        in, kEps);
  });

  add_case("concat", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), na = dim(rng), nb = dim(rng);
    Tensor w = rand_mat(rng, m, na + nb);
    std::vector<Tensor> in{rand_mat(rng, m, na), rand_mat(rng, m, nb)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.concat_cols(t[0], t[1]), w);
        },
        in, kEps);
  });

  add_case("slice", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = 2 + static_cast<int>(rng.uniform_int(7));
    const int lo = static_cast<int>(rng.uniform_int(n - 1));
    const int hi = lo + 1 + static_cast<int>(rng.uniform_int(n - lo - 1) );
    Tensor w = rand_mat(rng, m, hi - lo);
    std::vector<Tensor> in{rand_mat(rng, m, n)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.slice_cols(t[0], lo, hi), w);
        },
        in, kEps);
  });

  add_case("sigmoid", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat(rng, m, n, -3.0, 3.0)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.sigmoid(t[0]), w);
        },
        in, kEps);
  });

  add_case("tanh", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat(rng, m, n, -3.0, 3.0)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.tanh(t[0]), w);
        },
        in, kEps);
  });

  add_case("relu", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat_offzero(rng, m, n)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.relu(t[0]), w);
        },
        in, kEps);
  });

  add_case("softmax", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat(rng, m, n, -2.0, 2.0)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.softmax(t[0]), w);
        },
        in, kEps);
  });

  add_case("log_softmax", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat(rng, m, n, -2.0, 2.0)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.log_softmax(t[0]), w);
        },
        in, kEps);
  });

  add_case("embedding", [](uint64_t seed) {
    Rng rng(seed);
    const int vocab = 2 + static_cast<int>(rng.uniform_int(7)), d = dim(rng);
    const int len = dim(rng);
    std::vector<int> ids(len);
    for (auto& id : ids) id = static_cast<int>(rng.uniform_int(vocab));
    Tensor w = rand_mat(rng, len, d);
    std::vector<Tensor> in{rand_mat(rng, vocab, d)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.embedding(t[0], ids), w);
        },
        in, kEps);
  });

  add_case("dropout", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, n);
    const uint64_t mask_seed = rng.next_u64();
    std::vector<Tensor> in{rand_mat(rng, m, n)};
    return grad_check(
        [&, mask_seed](Graph& g, std::vector<Tensor>& t) {
          Rng mask_rng(mask_seed);  // identical mask on every evaluation
          return weighted_sum(g, g.dropout(t[0], 0.4, mask_rng, true), w);
        },
        in, kEps);
  });

  add_case("sum", [](uint64_t seed) {
    Rng rng(seed);
    std::vector<Tensor> in{rand_mat(rng, dim(rng), dim(rng))};
    return grad_check(
        [](Graph& g, std::vector<Tensor>& t) { return g.sum(t[0]); }, in, kEps);
  });

  add_case("mean", [](uint64_t seed) {
    Rng rng(seed);
    std::vector<Tensor> in{rand_mat(rng, dim(rng), dim(rng))};
    return grad_check(
        [](Graph& g, std::vector<Tensor>& t) { return g.mean(t[0]); }, in, kEps);
  });

  add_case("nll", [](uint64_t seed) {
    // softmax + NLL closure: logits -> log_softmax -> masked pick
    Rng rng(seed);
    const int m = dim(rng), n = 2 + static_cast<int>(rng.uniform_int(7));
    std::vector<int> ids(m);
    std::vector<double> mask(m);
    for (int i = 0; i < m; ++i) {
      ids[i] = static_cast<int>(rng.uniform_int(n));
      mask[i] = rng.uniform() < 0.8 ? 1.0 : 0.0;
    }
    mask[0] = 1.0;  // at least one live position
    std::vector<Tensor> in{rand_mat(rng, m, n, -2.0, 2.0)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return g.scale(g.pick_nll(g.log_softmax(t[0]), ids, mask), 1.0 / m);
        },
        in, kEps);
  });

  add_case("sq_dist", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    std::vector<Tensor> in{rand_mat(rng, m, n), rand_mat(rng, m, n)};
    return grad_check(
        [](Graph& g, std::vector<Tensor>& t) { return g.sq_dist(t[0], t[1]); }, in,
        kEps);
  });

  add_case("euclidean", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    // keep rows well apart: sqrt is not smooth near coincident rows
    Tensor a = rand_mat(rng, m, n);
    Tensor b = rand_mat(rng, m, n);
    for (int i = 0; i < m; ++i) b.at(i, 0) += 2.0;
    std::vector<Tensor> in{a, b};
    return grad_check(
        [](Graph& g, std::vector<Tensor>& t) {
          return g.euclidean_rows_mean(t[0], t[1]);
        },
        in, kEps);
  });

  add_case("rowwise_dot", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    Tensor w = rand_mat(rng, m, 1);
    std::vector<Tensor> in{rand_mat(rng, m, n), rand_mat(rng, m, n)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.rowwise_dot(t[0], t[1]), w);
        },
        in, kEps);
  });

  add_case("mask_rows", [](uint64_t seed) {
    Rng rng(seed);
    const int m = dim(rng), n = dim(rng);
    std::vector<double> mask(m);
    for (auto& v : mask) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
    Tensor w = rand_mat(rng, m, n);
    std::vector<Tensor> in{rand_mat(rng, m, n), rand_mat(rng, m, n)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.mask_rows(t[0], t[1], mask), w);
        },
        in, kEps);
  });

  add_case("conv1d", [](uint64_t seed) {
    Rng rng(seed);
    const int d = dim(rng), f = dim(rng);
    const int width = 1 + static_cast<int>(rng.uniform_int(3));
    const int t_len = width + static_cast<int>(rng.uniform_int(5));
    Tensor w = rand_mat(rng, t_len - width + 1, f);
    std::vector<Tensor> in{rand_mat(rng, t_len, d), rand_mat(rng, width * d, f)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.conv1d(t[0], t[1], width), w);
        },
        in, kEps);
  });

  add_case("max_rows", [](uint64_t seed) {
    Rng rng(seed);
    const int t_len = 2 + static_cast<int>(rng.uniform_int(6)), f = dim(rng);
    Tensor w = rand_mat(rng, 1, f);
    std::vector<Tensor> in{rand_mat_separated(rng, t_len, f)};
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          return weighted_sum(g, g.max_rows(t[0]), w);
        },
        in, kEps);
  });

  add_case("matmul_sum", [](uint64_t seed) {
    // matmul + sum closure, the tightest case
    Rng rng(seed);
    const int m = dim(rng), k = dim(rng), n = dim(rng);
    std::vector<Tensor> in{rand_mat(rng, m, k), rand_mat(rng, k, n)};
    return grad_check(
        [](Graph& g, std::vector<Tensor>& t) { return g.sum(g.matmul(t[0], t[1])); },
        in, kEps);
  });

  return cases;
}

}  // namespace cpls
