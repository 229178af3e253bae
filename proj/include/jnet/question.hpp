#pragma once

// Question understanding: explicit question types, binarized constituency
// parse trees, the TreeLSTM question code, and the Q-code filter extension of
// the alignment output.

#include <algorithm>
#include <array>
#include <cctype>
#include <memory>
#include <string>
#include <vector>

#include "jnet/layers.hpp"
#include "jnet/tensor.hpp"

namespace jnet {

// ---------------------------------------------------------------------------
// Question types

constexpr std::size_t kNumQuestionTypes = 11;

inline const std::array<std::string, kNumQuestionTypes>& question_type_names() {
  static const std::array<std::string, kNumQuestionTypes> names = {
      "what", "how", "who", "when", "which", "where", "why", "be", "whose", "whom", "other"};
  return names;
}

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// First token decides; be-forms map to "be"; otherwise the first three tokens
// are scanned for an embedded wh-word ("In what year ...").
inline std::size_t classify_question_type(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw DomainError("classify_question_type: empty question");
  auto wh_index = [](const std::string& w) -> int {
    const auto& names = question_type_names();
    for (std::size_t i = 0; i < kNumQuestionTypes - 1; ++i) {
      if (i == 7) continue;  // "be" is not a literal keyword
      if (w == names[i]) return static_cast<int>(i);
    }
    return -1;
  };
  const std::string first = lowercase(tokens[0]);
  if (int i = wh_index(first); i >= 0) return static_cast<std::size_t>(i);
  static const std::array<std::string, 8> be_forms = {"be",   "is",   "am",    "are",
                                                      "was",  "were", "been",  "being"};
  if (std::find(be_forms.begin(), be_forms.end(), first) != be_forms.end()) return 7;
  for (std::size_t t = 1; t < tokens.size() && t < 3; ++t)
    if (int i = wh_index(lowercase(tokens[t])); i >= 0) return static_cast<std::size_t>(i);
  return 10;  // other
}

// ---------------------------------------------------------------------------
// Parse trees

struct ParseNode {
  int token = -1;  // leaf iff >= 0
  std::shared_ptr<const ParseNode> left, right;
  bool is_leaf() const { return token >= 0; }
};

using ParseNodePtr = std::shared_ptr<const ParseNode>;

struct ParseTree {
  ParseNodePtr root;
  std::size_t leaf_count = 0;

  bool defined() const { return root != nullptr; }
};

inline ParseNodePtr make_leaf(int token) {
  auto n = std::make_shared<ParseNode>();
  n->token = token;
  return n;
}

inline ParseNodePtr make_internal(ParseNodePtr l, ParseNodePtr r) {
  auto n = std::make_shared<ParseNode>();
  n->left = std::move(l);
  n->right = std::move(r);
  return n;
}

inline void collect_leaves(const ParseNodePtr& n, std::vector<int>& out) {
  if (!n) return;
  if (n->is_leaf()) {
    out.push_back(n->token);
    return;
  }
  collect_leaves(n->left, out);
  collect_leaves(n->right, out);
}

// Leaves must be exactly 0..N-1 in order and every internal node binary.
inline void validate_tree(const ParseTree& tree, std::size_t n_tokens) {
  if (!tree.defined()) throw DataError("parse tree: empty");
  struct Check {
    static void binary(const ParseNodePtr& n) {
      if (n->is_leaf()) return;
      if (!n->left || !n->right) throw DataError("parse tree: internal node is not binary");
      binary(n->left);
      binary(n->right);
    }
  };
  Check::binary(tree.root);
  std::vector<int> leaves;
  collect_leaves(tree.root, leaves);
  if (leaves.size() != n_tokens)
    throw DataError("parse tree: " + std::to_string(leaves.size()) + " leaves for " +
                    std::to_string(n_tokens) + " tokens");
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (leaves[i] != static_cast<int>(i))
      throw DataError("parse tree: leaves out of order");
}

inline ParseTree right_branching_tree(std::size_t n_tokens) {
  if (n_tokens == 0) throw DomainError("right_branching_tree: no tokens");
  ParseNodePtr node = make_leaf(static_cast<int>(n_tokens - 1));
  for (std::size_t i = n_tokens - 1; i-- > 0;)
    node = make_internal(make_leaf(static_cast<int>(i)), node);
  return {node, n_tokens};
}

// S-expression over tokens; n-ary nodes are binarized right-associatively.
// Leaves are matched positionally against the question tokens.
inline ParseTree parse_sexpr_tree(const std::string& text,
                                  const std::vector<std::string>& tokens) {
  struct Parser {
    const std::string& s;
    std::size_t pos = 0;
    std::size_t next_leaf = 0;
    const std::vector<std::string>& tokens;

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    ParseNodePtr node() {
      skip_ws();
      if (pos >= s.size()) throw DataError("parse tree: unexpected end of s-expression");
      if (s[pos] == '(') {
        ++pos;
        std::vector<ParseNodePtr> children;
        while (true) {
          skip_ws();
          if (pos >= s.size()) throw DataError("parse tree: unbalanced parentheses");
          if (s[pos] == ')') {
            ++pos;
            break;
          }
          children.push_back(node());
        }
        if (children.empty()) throw DataError("parse tree: empty node");
        // right-associative binarization of n-ary nodes
        ParseNodePtr acc = children.back();
        for (std::size_t i = children.size() - 1; i-- > 0;)
          acc = make_internal(children[i], acc);
        return acc;
      }
      std::size_t start = pos;
      while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) &&
             s[pos] != '(' && s[pos] != ')')
        ++pos;
      const std::string atom = s.substr(start, pos - start);
      if (next_leaf >= tokens.size())
        throw DataError("parse tree: more leaves than question tokens");
      if (atom != tokens[next_leaf])
        throw DataError("parse tree: leaf '" + atom + "' does not match token '" +
                        tokens[next_leaf] + "'");
      return make_leaf(static_cast<int>(next_leaf++));
    }
  };
  Parser p{text, 0, 0, tokens};
  ParseNodePtr root = p.node();
  p.skip_ws();
  if (p.pos != text.size()) throw DataError("parse tree: trailing characters");
  ParseTree tree{root, p.next_leaf};
  validate_tree(tree, tokens.size());
  return tree;
}

// ---------------------------------------------------------------------------
// Question codes

// Bottom-up TreeLSTM over the parse; leaves take the token's embedding row
// with zero child states, internal nodes take a zero input vector. Returns
// the root hidden state.
inline Tensor treelstm_qcode(Tape& tp, const ParseTree& tree, const Tensor& q_embed,
                             const TreeLstmParams& params) {
  validate_tree(tree, q_embed.rows());
  const Tensor zero_state = Tensor::zeros({params.hidden_size});
  const Tensor zero_input = Tensor::zeros({params.input_size});
  struct Walker {
    Tape& tp;
    const Tensor& q_embed;
    const TreeLstmParams& params;
    const Tensor& zero_state;
    const Tensor& zero_input;
    TreeLstmState eval(const ParseNodePtr& n) {
      if (n->is_leaf())
        return treelstm_node(tp, params, tp.row(q_embed, static_cast<std::size_t>(n->token)),
                             zero_state, zero_state, zero_state, zero_state);
      TreeLstmState l = eval(n->left);
      TreeLstmState r = eval(n->right);
      return treelstm_node(tp, params, zero_input, l.h, l.c, r.h, r.c);
    }
  };
  Walker w{tp, q_embed, params, zero_state, zero_input};
  return w.eval(tree.root).h;
}

// I_new = [I, repmat(ET)]: tile the type's embedding row to every document
// position.
inline Tensor et_extend(Tape& tp, const Tensor& I, std::size_t type_id,
                        const Tensor& et_table) {
  if (type_id >= et_table.rows()) throw DomainError("et_extend: bad type id");
  return tp.concat({I, tp.tile_row(tp.row(et_table, type_id), I.rows())}, 1);
}

struct QcodeFilterResult {
  Tensor extended;  // [I, repmat(qcode), D_filtered, b]
  Tensor b;         // filter weights over document positions
};

// b = norm(relu(qcode . D^c^T)), falling back to uniform when everything
// clamps to zero; optionally softmax over the raw scores instead. The width
// grows by exactly 2*d_c + 1.
inline QcodeFilterResult qcode_filter_extend(Tape& tp, const Tensor& I, const Tensor& qcode,
                                             const Tensor& d_ctx,
                                             bool softmax_weights = false) {
  if (qcode.size() != d_ctx.cols())
    throw ShapeError("qcode_filter_extend: qcode " + shape_str(qcode.shape()) +
                     " vs encodings " + shape_str(d_ctx.shape()));
  const std::size_t m = d_ctx.rows();
  Tensor raw = tp.matvec(d_ctx, qcode);
  Tensor b;
  if (softmax_weights) {
    b = tp.softmax(raw);
  } else {
    Tensor clamped = tp.relu(raw);
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) total += clamped[j];
    if (total < 1e-12) {
      b = tp.constant({m}, std::vector<double>(m, 1.0 / static_cast<double>(m)));
    } else {
      b = tp.normalize_sum(clamped);
    }
  }
  Tensor filtered = tp.scale_rows(d_ctx, b);
  Tensor extended = tp.concat({I, tp.tile_row(qcode, m), filtered, tp.reshape(b, {m, 1})}, 1);
  return {extended, b};
}

}  // namespace jnet
