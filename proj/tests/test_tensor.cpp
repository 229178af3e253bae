#include <catch_amalgamated.hpp>

#include <random>

#include "jnet/gradcheck.hpp"
#include "jnet/tensor.hpp"

using namespace jnet;

static Tensor randn(Shape shape, std::mt19937_64& rng, double avoid_below = 0.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(numel(shape));
  for (double& x : v) {
    do {
      x = g(rng);
    } while (avoid_below > 0.0 && std::abs(x) < avoid_below);
  }
  return Tensor(std::move(shape), std::move(v));
}

TEST_CASE("matmul basics") {
  Tape tp;
  Tensor id({2, 2}, {1, 0, 0, 1});
  Tensor v({2, 1}, {3, 4});
  Tensor r = tp.matmul(id, v);
  CHECK(r.values() == std::vector<double>{3, 4});

  Tensor a({1, 2}, {1, 2});
  Tensor b({2, 1}, {3, 4});
  CHECK(tp.matmul(a, b).item() == 11.0);

  CHECK_THROWS_AS(tp.matmul(a, a), ShapeError);
}

TEST_CASE("matmul gradient of sum equals ones * b^T") {
  std::mt19937_64 rng(1);
  Tensor a = randn({3, 4}, rng);
  Tensor b = randn({4, 2}, rng);
  Tape tp;
  Tensor loss = tp.sum(tp.matmul(a, b));
  tp.backward(loss);
  // d sum(AB) / dA = ones(3x2) * B^T
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t p = 0; p < 4; ++p) {
      double expect = 0.0;
      for (std::size_t j = 0; j < 2; ++j) expect += b.at(p, j);
      CHECK(a.grad()[i * 4 + p] == Catch::Approx(expect).epsilon(1e-12));
    }
  double err = gradcheck_max_rel_err({a, b}, [&](Tape& t) { return t.sum(t.matmul(a, b)); });
  CHECK(err < 1e-6);
}

TEST_CASE("elementwise examples") {
  Tape tp;
  CHECK(tp.sigmoid(Tensor::scalar(0)).item() == 0.5);
  CHECK(tp.tanh(Tensor::scalar(0)).item() == 0.0);
  Tensor r = tp.mul(Tensor({2}, {1, 2}), Tensor({2}, {3, 4}));
  CHECK(r.values() == std::vector<double>{3, 8});
  CHECK_THROWS_AS(tp.add(Tensor({2}, {1, 2}), Tensor({3}, {1, 2, 3})), ShapeError);
}

TEST_CASE("softmax examples and properties") {
  Tape tp;
  Tensor r = tp.softmax(Tensor({2}, {0, 0}));
  CHECK(r[0] == Catch::Approx(0.5).margin(1e-12));
  CHECK(r[1] == Catch::Approx(0.5).margin(1e-12));

  Tensor sharp = tp.softmax(Tensor({2}, {1, 0}), 50.0);
  CHECK(sharp[0] == Catch::Approx(1.0 / (1.0 + std::exp(-50.0))).epsilon(1e-12));
  CHECK(sharp[1] == Catch::Approx(std::exp(-50.0) / (1.0 + std::exp(-50.0))).epsilon(1e-9));

  Tensor p = tp.softmax(Tensor({3}, {1, 2, 3}));
  const double z = std::exp(1) + std::exp(2) + std::exp(3);
  CHECK(p[0] == Catch::Approx(std::exp(1) / z).epsilon(1e-12));
  CHECK(p[2] == Catch::Approx(std::exp(3) / z).epsilon(1e-12));

  CHECK_THROWS_AS(tp.softmax(Tensor({2}, {0, 0}), 0.0), DomainError);

  // sums to one, invariant to constant shifts
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = randn({7}, rng);
    Tensor y = tp.softmax(x);
    double s = 0.0;
    for (std::size_t i = 0; i < 7; ++i) s += y[i];
    CHECK(std::abs(s - 1.0) < 1e-9);
    std::vector<double> shifted = x.values();
    for (double& v : shifted) v += 3.7;
    Tensor y2 = tp.softmax(Tensor({7}, shifted));
    for (std::size_t i = 0; i < 7; ++i) CHECK(std::abs(y[i] - y2[i]) < 1e-12);
  }
}

TEST_CASE("concat and backward basics") {
  Tape tp;
  Tensor c = tp.concat({Tensor({2}, {1, 2}), Tensor({1}, {3})});
  CHECK(c.values() == std::vector<double>{1, 2, 3});

  Tensor x = Tensor({4}, {1, -2, 3, 0.5});
  {
    Tape t;
    Tensor loss = t.sum(x);
    t.backward(loss);
    for (double g : x.grad()) CHECK(g == 1.0);
    x.zero_grad();
  }
  {
    Tensor zero = Tensor::zeros({4});
    Tape t;
    Tensor loss = t.sum(t.sigmoid(zero));
    t.backward(loss);
    for (double g : zero.grad()) CHECK(g == 0.25);
  }
  Tape t2;
  Tensor notscalar = Tensor({2}, {1, 2});
  CHECK_THROWS_AS(t2.backward(notscalar), UsageError);
}

TEST_CASE("gradient accumulation across shared subexpressions") {
  Tensor x = Tensor({1}, {0.3});
  Tape tp;
  Tensor y = tp.add(tp.mul(x, x), tp.mul(x, x));  // 2x^2
  tp.backward(tp.sum(y));
  CHECK(x.grad()[0] == Catch::Approx(4 * 0.3).epsilon(1e-12));
}

TEST_CASE("every primitive op passes finite differences at random points") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a = randn({3, 4}, rng);
    Tensor b = randn({4, 5}, rng);
    Tensor v = randn({4}, rng);
    Tensor u = randn({3, 4}, rng);
    Tensor w = randn({3}, rng);
    Tensor r = randn({3, 4}, rng, 1e-3);  // relu-safe
    Tensor s = Tensor::scalar(0.8);
    auto check = [&](const std::vector<Tensor>& in,
                     const std::function<Tensor(Tape&)>& f) {
      CHECK(gradcheck_max_rel_err(in, f) < 1e-6);
    };
    check({a, b}, [&](Tape& t) { return t.sum(t.matmul(a, b)); });
    check({a, v}, [&](Tape& t) { return t.sum(t.matvec(a, v)); });
    check({a, u}, [&](Tape& t) { return t.sum(t.mul(t.add(a, u), t.sub(a, u))); });
    check({a}, [&](Tape& t) { return t.sum(t.sigmoid(a)); });
    check({a}, [&](Tape& t) { return t.sum(t.tanh(a)); });
    check({r}, [&](Tape& t) { return t.sum(t.relu(r)); });
    check({a}, [&](Tape& t) { return t.sum(t.mul(t.exp(a), t.exp(a))); });
    check({a}, [&](Tape& t) { return t.sum(t.log(t.exp(a))); });
    check({a}, [&](Tape& t) { return t.sum(t.sqrt(t.exp(a))); });
    check({v}, [&](Tape& t) { return t.pick(t.softmax(v, 2.5), 1); });
    check({a}, [&](Tape& t) { return t.pick(t.reshape(t.softmax(a, 1.0, 1), {12}), 7); });
    check({a}, [&](Tape& t) { return t.pick(t.reshape(t.softmax(a, 1.0, 0), {12}), 7); });
    check({a}, [&](Tape& t) { return t.sum(t.transpose(a)); });
    check({a, u}, [&](Tape& t) { return t.sum(t.mul(t.concat({a, u}, 0), t.concat({a, u}, 0))); });
    check({a, u}, [&](Tape& t) { return t.pick(t.reshape(t.concat({a, u}, 1), {24}), 13); });
    check({a}, [&](Tape& t) { return t.sum(t.mul(t.row(a, 1), t.row(a, 2))); });
    check({v, w}, [&](Tape& t) {
      return t.pick(t.reshape(t.stack_rows({v, v}), {8}), 5);
    });
    check({s, v}, [&](Tape& t) { return t.sum(t.mul(t.broadcast(s, 4), v)); });
    check({v}, [&](Tape& t) { return t.pick(t.reshape(t.tile_row(v, 3), {12}), 9); });
    check({a, w}, [&](Tape& t) { return t.sum(t.scale_rows(a, w)); });
    check({r}, [&](Tape& t) { return t.sum(t.mul(t.max_over_rows(r), t.max_over_rows(r))); });
    check({a}, [&](Tape& t) { return t.sum(t.mul(t.mean_over_rows(a), t.mean_over_rows(a))); });
    check({v}, [&](Tape& t) { return t.pick(t.normalize_sum(t.exp(v)), 2); });
    check({v, w}, [&](Tape& t) {
      return t.dot(t.stack_scalars({t.sum(v), t.sum(w), t.dot(w, w)}),
                   t.constant({3}, {0.3, -1.2, 0.7}));
    });
    check({a}, [&](Tape& t) { return t.sum(t.clamp_min(a, 0.1)); });
    check({a, u}, [&](Tape& t) { return t.sum(t.div(a, t.exp(u))); });
  }
}

TEST_CASE("replaying the same graph twice is bit-identical") {
  std::mt19937_64 rng(4);
  Tensor a = randn({4, 4}, rng);
  Tensor b = randn({4, 4}, rng);
  auto run = [&]() {
    Tape tp;
    Tensor y = tp.softmax(tp.matmul(tp.sigmoid(a), tp.tanh(b)), 1.0, 1);
    Tensor loss = tp.sum(tp.mul(y, y));
    tp.backward(loss);
    std::vector<double> out = loss.values();
    out.insert(out.end(), a.grad().begin(), a.grad().end());
    a.zero_grad();
    b.zero_grad();
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("shape errors carry both shapes") {
  Tape tp;
  try {
    tp.matmul(Tensor({2, 3}, std::vector<double>(6, 0.0)),
              Tensor({2, 3}, std::vector<double>(6, 0.0)));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}
