#include <catch_amalgamated.hpp>

#include <random>

#include "jnet/data.hpp"
#include "jnet/gradcheck.hpp"
#include "jnet/layers.hpp"
#include "oracles.hpp"

using namespace jnet;

namespace {

void zero_fill(Tensor& t) { std::fill(t.values().begin(), t.values().end(), 0.0); }

oracle::Mat to_mat(const Tensor& t) {
  oracle::Mat m(t.rows(), oracle::Vec(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

oracle::Vec to_vec(const Tensor& t) { return t.values(); }

Tensor randn(Shape shape, Rng& rng, double sigma = 1.0) {
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = g(rng);
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("gru step with all-zero weights halves the previous state") {
  Rng rng(1);
  GruParams p(3, 4, rng);
  std::vector<ParamRef> refs;
  p.collect("g", refs);
  for (auto& r : refs) zero_fill(r.tensor);
  // r = z = sigmoid(0) = 1/2, candidate = tanh(0) = 0, so h' = h/2
  Tensor x({3}, {1.0, -2.0, 0.5});
  Tensor h({4}, {0.4, -0.8, 1.2, 2.0});
  Tape tp;
  Tensor out = gru_step(tp, p, x, h);
  REQUIRE(out.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(out[i] == Catch::Approx(0.5 * h[i]).epsilon(1e-12));
}

TEST_CASE("gru step passes finite differences") {
  Rng rng(2);
  GruParams p(3, 2, rng);
  Tensor x = randn({3}, rng);
  Tensor h = randn({2}, rng);
  std::vector<ParamRef> refs;
  p.collect("g", refs);
  std::vector<Tensor> watched;
  for (auto& r : refs) watched.push_back(r.tensor);
  watched.push_back(x);
  watched.push_back(h);
  double err = gradcheck_max_rel_err(watched, [&](Tape& tp) {
    return tp.sum(tp.mul(gru_step(tp, p, x, h), tp.constant({2}, {0.9, -1.4})));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("bigru output stacks forward and backward states per time step") {
  Rng rng(3);
  GruParams f(2, 3, rng), b(2, 3, rng);
  Tensor seq = randn({4, 2}, rng);
  Tape tp;
  Tensor enc = bigru_encode(tp, f, b, seq);
  REQUIRE(enc.rows() == 4);
  REQUIRE(enc.cols() == 6);

  // forward half of row 0 equals one manual gru step from the zero state
  Tensor h0 = gru_step(tp, f, tp.row(seq, 0), Tensor::zeros({3}));
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(enc.at(0, j) == Catch::Approx(h0[j]).epsilon(1e-12));
  // backward half of the last row likewise
  Tensor hT = gru_step(tp, b, tp.row(seq, 3), Tensor::zeros({3}));
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(enc.at(3, 3 + j) == Catch::Approx(hT[j]).epsilon(1e-12));

  CHECK_THROWS_AS(bigru_encode(tp, f, b, Tensor({3}, {1, 2, 3})), DomainError);
}

TEST_CASE("bigru on the reversed sequence with swapped directions mirrors the output") {
  Rng rng(4);
  GruParams f(2, 3, rng), b(2, 3, rng);
  const std::size_t T = 5;
  Tensor seq = randn({T, 2}, rng);
  std::vector<double> rev_vals;
  for (std::size_t t = T; t-- > 0;)
    for (std::size_t j = 0; j < 2; ++j) rev_vals.push_back(seq.at(t, j));
  Tensor rev({T, 2}, std::move(rev_vals));
  Tape tp;
  Tensor a = bigru_encode(tp, f, b, seq);
  Tensor c = bigru_encode(tp, b, f, rev);
  // row t of a = [fwd_t ; bwd_t]; row T-1-t of c = [bwd_t ; fwd_t]
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(a.at(t, j) == Catch::Approx(c.at(T - 1 - t, 3 + j)).epsilon(1e-12));
      CHECK(a.at(t, 3 + j) == Catch::Approx(c.at(T - 1 - t, j)).epsilon(1e-12));
    }
}

TEST_CASE("treelstm node matches the scalar oracle on 100 random instances") {
  Rng rng(5);
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t in = dim(rng), hid = dim(rng);
    TreeLstmParams p(in, hid, rng);
    Tensor x = randn({in}, rng);
    Tensor hl = randn({hid}, rng), cl = randn({hid}, rng);
    Tensor hr = randn({hid}, rng), cr = randn({hid}, rng);

    oracle::TreeLstmWeights w;
    w.Wo = to_mat(p.Wo); w.Wf = to_mat(p.Wf); w.Wi = to_mat(p.Wi); w.Wc = to_mat(p.Wc);
    w.Uo_L = to_mat(p.Uo_L); w.Uo_R = to_mat(p.Uo_R);
    w.Uf_LL = to_mat(p.Uf_LL); w.Uf_LR = to_mat(p.Uf_LR);
    w.Uf_RL = to_mat(p.Uf_RL); w.Uf_RR = to_mat(p.Uf_RR);
    w.Ui_L = to_mat(p.Ui_L); w.Ui_R = to_mat(p.Ui_R);
    w.Uc_L = to_mat(p.Uc_L); w.Uc_R = to_mat(p.Uc_R);
    w.bo = to_vec(p.bo); w.bf = to_vec(p.bf); w.bi = to_vec(p.bi); w.bc = to_vec(p.bc);
    oracle::HC expect =
        oracle::treelstm_node(w, to_vec(x), to_vec(hl), to_vec(cl), to_vec(hr), to_vec(cr));

    Tape tp;
    TreeLstmState got = treelstm_node(tp, p, x, hl, cl, hr, cr);
    REQUIRE(got.h.size() == hid);
    for (std::size_t k = 0; k < hid; ++k) {
      CHECK(std::abs(got.h[k] - expect.h[k]) < 1e-12);
      CHECK(std::abs(got.c[k] - expect.c[k]) < 1e-12);
    }
  }
}

TEST_CASE("treelstm left and right children are distinguished") {
  Rng rng(6);
  TreeLstmParams p(2, 3, rng);
  Tensor x = randn({2}, rng);
  Tensor ha = randn({3}, rng), ca = randn({3}, rng);
  Tensor hb = randn({3}, rng), cb = randn({3}, rng);
  Tape tp;
  TreeLstmState ab = treelstm_node(tp, p, x, ha, ca, hb, cb);
  TreeLstmState ba = treelstm_node(tp, p, x, hb, cb, ha, ca);
  double diff = 0.0;
  for (std::size_t k = 0; k < 3; ++k) diff += std::abs(ab.h[k] - ba.h[k]);
  CHECK(diff > 1e-6);
}

TEST_CASE("charcnn matches the scalar convolution oracle") {
  Rng rng(7);
  for (const std::string word : {"cat", "a", "xy", "alignment"}) {
    CharCnnParams p(3, 2, rng);
    const auto ids = word_char_ids(word);
    Tape tp;
    Tensor got = charcnn_embed(tp, p, ids);
    REQUIRE(got.size() == p.output_size());

    std::vector<oracle::Mat> filters;
    std::vector<oracle::Vec> biases;
    for (std::size_t b = 0; b < p.widths.size(); ++b) {
      filters.push_back(to_mat(p.filters[b]));
      biases.push_back(to_vec(p.biases[b]));
    }
    oracle::Vec expect =
        oracle::charcnn(to_mat(p.embedding), ids, p.widths, filters, biases);
    REQUIRE(expect.size() == got.size());
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(std::abs(got[i] - expect[i]) < 1e-12);
  }
}

TEST_CASE("charcnn pads words shorter than the widest filter and rejects empties") {
  Rng rng(8);
  CharCnnParams p(2, 3, rng);
  Tape tp;
  // single character still produces the full concatenated bank output
  Tensor one = charcnn_embed(tp, p, word_char_ids("x"));
  CHECK(one.size() == 9);
  CHECK_THROWS_AS(charcnn_embed(tp, p, {}), DomainError);
}

TEST_CASE("charcnn gradients pass finite differences") {
  Rng rng(9);
  CharCnnParams p(2, 2, rng);
  std::vector<ParamRef> refs;
  p.collect("cnn", refs);
  std::vector<Tensor> watched;
  for (auto& r : refs) watched.push_back(r.tensor);
  const auto ids = word_char_ids("dog");
  double err = gradcheck_max_rel_err(watched, [&](Tape& tp) {
    Rng local(10);
    std::normal_distribution<double> g(0.0, 1.0);
    Tensor out = charcnn_embed(tp, p, ids);
    std::vector<double> w(out.size());
    for (double& v : w) v = g(local);
    return tp.sum(tp.mul(out, tp.constant({out.size()}, std::move(w))));
  });
  CHECK(err < 1e-5);
}

TEST_CASE("dropout identity, validation, and expectation") {
  Rng rng(11);
  Tensor x({100}, std::vector<double>(100, 1.0));
  Tape tp;
  // identity at inference or rate 0
  CHECK(dropout(tp, x, 0.5, false, rng).data() == x.data());
  CHECK(dropout(tp, x, 0.0, true, rng).data() == x.data());
  CHECK_THROWS_AS(dropout(tp, x, 1.0, true, rng), ConfigError);
  CHECK_THROWS_AS(dropout(tp, x, -0.1, true, rng), ConfigError);

  // inverted scaling keeps the expectation: mean over many draws within 5%
  for (double rate : {0.2, 0.5, 0.8}) {
    double total = 0.0;
    std::size_t n = 0;
    for (int draw = 0; draw < 200; ++draw) {
      Tape t;
      Tensor y = dropout(t, x, rate, true, rng);
      for (double v : y.values()) total += v;
      n += y.size();
    }
    CHECK(std::abs(total / static_cast<double>(n) - 1.0) < 0.05);
  }
}

TEST_CASE("feed forward relu clamps negatives") {
  Rng rng(12);
  FeedForwardParams p(2, 2, rng);
  std::vector<ParamRef> refs;
  p.collect("ff", refs);
  zero_fill(refs[0].tensor);  // W = 0
  p.b.values() = {1.5, -2.0};
  Tape tp;
  Tensor out = feed_forward_relu(tp, p, Tensor({2}, {3.0, 4.0}));
  CHECK(out[0] == 1.5);
  CHECK(out[1] == 0.0);
}
