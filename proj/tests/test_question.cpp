#include <catch_amalgamated.hpp>

#include <random>

#include "jnet/question.hpp"

using namespace jnet;

namespace {
std::vector<std::string> words(std::initializer_list<const char*> ws) {
  return {ws.begin(), ws.end()};
}
}  // namespace

TEST_CASE("question type classification examples") {
  CHECK(classify_question_type(words({"What", "is", "love", "?"})) == 0);
  CHECK(classify_question_type(words({"how", "many", "?"})) == 1);
  CHECK(classify_question_type(words({"Who", "wrote", "it"})) == 2);
  CHECK(classify_question_type(words({"WHEN", "did", "it", "end"})) == 3);
  CHECK(classify_question_type(words({"Which", "one"})) == 4);
  CHECK(classify_question_type(words({"where", "is", "it"})) == 5);
  CHECK(classify_question_type(words({"Why", "not"})) == 6);
  CHECK(classify_question_type(words({"Is", "it", "blue", "?"})) == 7);
  CHECK(classify_question_type(words({"Was", "he", "there"})) == 7);
  CHECK(classify_question_type(words({"are", "they", "done"})) == 7);
  CHECK(classify_question_type(words({"Whose", "hat"})) == 8);
  CHECK(classify_question_type(words({"Whom", "did", "he", "call"})) == 9);
  CHECK(classify_question_type(words({"Name", "the", "capital"})) == 10);
  // embedded wh-word within the first three tokens
  CHECK(classify_question_type(words({"In", "what", "year"})) == 0);
  CHECK(classify_question_type(words({"From", "whom", "was", "it"})) == 9);
  CHECK(classify_question_type(words({"By", "the", "way", "what", "now"})) == 10);
  CHECK_THROWS_AS(classify_question_type({}), DomainError);
  CHECK(question_type_names().size() == kNumQuestionTypes);
}

TEST_CASE("et_extend widens by d_et and routes gradient only to the used type row") {
  Rng rng(1);
  Tensor et = glorot_uniform(kNumQuestionTypes, 4, rng);
  Tensor I({3, 5}, std::vector<double>(15, 0.5));
  Tape tp;
  Tensor ext = et_extend(tp, I, 2, et);
  REQUIRE(ext.rows() == 3);
  REQUIRE(ext.cols() == 5 + 4);
  // every document row carries the same type embedding
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(ext.at(r, 5 + j) == Catch::Approx(et.at(2, j)).epsilon(1e-12));

  tp.backward(tp.sum(ext));
  for (std::size_t t = 0; t < kNumQuestionTypes; ++t)
    for (std::size_t j = 0; j < 4; ++j) {
      const double g = et.grad()[t * 4 + j];
      if (t == 2) CHECK(g == Catch::Approx(3.0).epsilon(1e-12));  // tiled to 3 rows
      else CHECK(g == 0.0);
    }
  CHECK_THROWS_AS(et_extend(tp, I, kNumQuestionTypes, et), DomainError);
}

TEST_CASE("s-expression parse, binarization, validation") {
  const auto toks = words({"what", "follows", "w2", "?"});
  ParseTree t = parse_sexpr_tree("(what (follows w2) ?)", toks);
  CHECK(t.leaf_count == 4);
  // root is (what ((follows w2) ?)) after right-associative binarization
  REQUIRE_FALSE(t.root->is_leaf());
  CHECK(t.root->left->is_leaf());
  CHECK(t.root->left->token == 0);
  REQUIRE_FALSE(t.root->right->is_leaf());
  CHECK_FALSE(t.root->right->left->is_leaf());
  CHECK(t.root->right->right->token == 3);
  std::vector<int> leaves;
  collect_leaves(t.root, leaves);
  CHECK(leaves == std::vector<int>{0, 1, 2, 3});

  // a flat n-ary node binarizes right-associatively
  ParseTree flat = parse_sexpr_tree("(what follows w2 ?)", toks);
  CHECK(flat.root->left->token == 0);
  CHECK(flat.root->right->left->token == 1);
  CHECK(flat.root->right->right->left->token == 2);
  CHECK(flat.root->right->right->right->token == 3);

  CHECK_THROWS_AS(parse_sexpr_tree("(what (follows w2) ?", toks), DataError);   // unbalanced
  CHECK_THROWS_AS(parse_sexpr_tree("(what follows w2 ? extra)", toks), DataError);  // too many
  CHECK_THROWS_AS(parse_sexpr_tree("(what follows w2)", toks), DataError);      // too few
  CHECK_THROWS_AS(parse_sexpr_tree("(what (w2 follows) ?)", toks), DataError);  // wrong order
  CHECK_THROWS_AS(parse_sexpr_tree("()", toks), DataError);                     // empty node
  CHECK_THROWS_AS(parse_sexpr_tree("(what follows w2 ?) junk", toks), DataError);
}

TEST_CASE("right-branching fallback tree is valid for any length") {
  for (std::size_t n : {1u, 2u, 7u}) {
    ParseTree t = right_branching_tree(n);
    validate_tree(t, n);
  }
  CHECK_THROWS_AS(right_branching_tree(0), DomainError);
  ParseTree t = right_branching_tree(2);
  CHECK_THROWS_AS(validate_tree(t, 3), DataError);
}

TEST_CASE("treelstm qcode is sensitive to tree structure") {
  Rng rng(2);
  TreeLstmParams p(3, 3, rng);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> qv(4 * 3);
  for (double& v : qv) v = g(rng);
  Tensor q({4, 3}, std::move(qv));

  ParseTree right = right_branching_tree(4);
  ParseTree balanced{make_internal(make_internal(make_leaf(0), make_leaf(1)),
                                   make_internal(make_leaf(2), make_leaf(3))),
                     4};
  Tape tp;
  Tensor a = treelstm_qcode(tp, right, q, p);
  Tensor b = treelstm_qcode(tp, balanced, q, p);
  REQUIRE(a.size() == 3);
  double diff = 0.0;
  for (std::size_t i = 0; i < 3; ++i) diff += std::abs(a[i] - b[i]);
  CHECK(diff > 1e-8);

  // determinism: same tree twice gives identical values
  Tensor a2 = treelstm_qcode(tp, right, q, p);
  CHECK(a.values() == a2.values());

  // leaf count must match the embedding rows
  CHECK_THROWS_AS(treelstm_qcode(tp, right_branching_tree(3), q, p), DataError);
}

TEST_CASE("qcode filter produces a distribution and widens by 2*d_c + 1") {
  Rng rng(3);
  const std::size_t m = 5, dc = 4;
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> dv(m * dc);
  for (double& v : dv) v = g(rng);
  Tensor d_ctx({m, dc}, std::move(dv));
  std::vector<double> qv(dc);
  for (double& v : qv) v = g(rng);
  Tensor qcode({dc}, std::move(qv));
  Tensor I({m, 6 * dc + 2}, std::vector<double>(m * (6 * dc + 2), 0.1));

  Tape tp;
  QcodeFilterResult r = qcode_filter_extend(tp, I, qcode, d_ctx);
  CHECK(r.extended.rows() == m);
  CHECK(r.extended.cols() == 6 * dc + 2 + 2 * dc + 1);
  double sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    CHECK(r.b[j] >= 0.0);
    sum += r.b[j];
    // last column of the extension holds b itself
    CHECK(r.extended.at(j, r.extended.cols() - 1) == Catch::Approx(r.b[j]).epsilon(1e-12));
  }
  CHECK(sum == Catch::Approx(1.0).epsilon(1e-9));

  // adversarial case: every score clamps to zero -> uniform fallback
  Tensor neg_d({2, 2}, {1.0, 0.0, 0.0, 1.0});
  Tensor neg_q({2}, {-1.0, -1.0});
  Tensor smallI({2, 14}, std::vector<double>(28, 0.0));
  QcodeFilterResult uni = qcode_filter_extend(tp, smallI, neg_q, neg_d);
  CHECK(uni.b[0] == 0.5);
  CHECK(uni.b[1] == 0.5);

  // softmax mode also yields a distribution, with no zero weights
  QcodeFilterResult sm = qcode_filter_extend(tp, smallI, neg_q, neg_d, true);
  CHECK(sm.b[0] + sm.b[1] == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(sm.b[0] > 0.0);

  CHECK_THROWS_AS(qcode_filter_extend(tp, I, Tensor({dc + 1}, std::vector<double>(dc + 1, 1.0)),
                                      d_ctx),
                  ShapeError);
}
