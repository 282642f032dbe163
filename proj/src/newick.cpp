#include "ksb/newick.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <istream>

namespace ksb {

namespace {

class NewickParser {
 public:
  explicit NewickParser(std::string_view text) : text_(text) {}

  NewickNode parse() {
    skip_space();
    NewickNode root = parse_node();
    skip_space();
    expect(';');
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters after ';'");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                                   text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void expect(char c) {
    if (peek() != c) {
      if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' but input ended");
      fail(std::string("expected '") + c + "' but found '" + text_[pos_] + "'");
    }
    ++pos_;
  }

  NewickNode parse_node() {
    NewickNode node;
    if (peek() == '(') {
      ++pos_;
      while (true) {
        skip_space();
        node.children.push_back(parse_node());
        skip_space();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        if (peek() == ')') {
          ++pos_;
          break;
        }
        if (pos_ >= text_.size()) fail("unbalanced parenthesis: input ended");
        fail(std::string("unbalanced parenthesis: expected ',' or ')' but found '") + text_[pos_] + "'");
      }
    }
    skip_space();
    node.label = parse_label();
    skip_space();
    if (peek() == ':') {
      ++pos_;
      skip_space();
      node.length = parse_number();
    }
    if (node.children.empty() && node.label.empty()) fail("leaf without a label");
    return node;
  }

  std::string parse_label() {
    const auto start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';' || c == ' ' || c == '\t' || c == '\n' ||
          c == '\r' || c == '[' || c == '\'') {
        break;
      }
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  double parse_number() {
    const auto start = pos_;
    double value = 0.0;
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first) fail("expected a branch length");
    pos_ = start + static_cast<std::size_t>(ptr - first);
    if (!(value >= 0.0)) {
      pos_ = start;
      fail("branch lengths must be >= 0");
    }
    return value;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

int parse_leaf_label(const std::string& label) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), value);
  if (ec != std::errc() || ptr != label.data() + label.size() || value < 1) {
    throw ParseError("leaf label '" + label + "' is not a positive integer", 0);
  }
  return value;
}

void count_leaves(const NewickNode& node, int& count) {
  if (node.children.empty()) {
    ++count;
    return;
  }
  for (const auto& c : node.children) count_leaves(c, count);
}

bool all_lengths(const NewickNode& node, bool is_root) {
  if (!is_root && !node.length) return false;
  return std::all_of(node.children.begin(), node.children.end(),
                     [](const NewickNode& c) { return all_lengths(c, false); });
}

// Depth of a complete binary tree, or -1.
int complete_depth(const NewickNode& node) {
  if (node.children.empty()) return 0;
  if (node.children.size() != 2) return -1;
  const int a = complete_depth(node.children[0]);
  const int b = complete_depth(node.children[1]);
  return (a < 0 || a != b) ? -1 : a + 1;
}

void check_binary(const NewickNode& node, bool is_root) {
  const auto c = node.children.size();
  if (!node.children.empty()) {
    if (is_root ? (c < 2 || c > 3) : c != 2) {
      throw ParseError("non-binary internal node with " + std::to_string(c) + " children", 0);
    }
  }
  for (const auto& child : node.children) check_binary(child, false);
}

Phylogeny phylogeny_from_syntax(const NewickNode& root, int levels) {
  const int n = 1 << levels;
  std::vector<double> lengths(2 * n - 1, 0.0);
  std::vector<int> labels(n, 0);
  std::function<void(const NewickNode&, int)> place = [&](const NewickNode& node, int v) {
    if (v > 0) lengths[v] = *node.length;
    if (node.children.empty()) {
      labels[v - (n - 1)] = parse_leaf_label(node.label);
      return;
    }
    place(node.children[0], Phylogeny::left(v));
    place(node.children[1], Phylogeny::right(v));
  };
  place(root, 0);
  return Phylogeny(levels, std::move(lengths), std::move(labels));
}

Topology topology_from_syntax(const NewickNode& root) {
  int n = 0;
  count_leaves(root, n);
  std::vector<std::pair<int, int>> edges;
  int next_internal = n;
  std::vector<bool> seen(n, false);
  std::function<int(const NewickNode&)> visit = [&](const NewickNode& node) -> int {
    if (node.children.empty()) {
      const int label = parse_leaf_label(node.label);
      if (label > n || seen[label - 1]) throw ParseError("leaf labels must be a permutation of 1..n", 0);
      seen[label - 1] = true;
      return label - 1;
    }
    const int id = next_internal++;
    for (const auto& c : node.children) edges.emplace_back(id, visit(c));
    return id;
  };
  visit(root);
  return Topology(n, edges);
}

std::string format_length(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

}  // namespace

NewickNode parse_newick_syntax(std::string_view text) { return NewickParser(text).parse(); }

std::variant<Phylogeny, Topology> parse_newick(std::string_view text) {
  const NewickNode root = parse_newick_syntax(text);
  check_binary(root, true);
  const int levels = complete_depth(root);
  if (root.children.size() == 2 && levels >= 1 && all_lengths(root, true)) {
    return phylogeny_from_syntax(root, levels);
  }
  return topology_from_syntax(root);
}

Phylogeny parse_phylogeny(std::string_view text) {
  auto tree = parse_newick(text);
  if (auto* phy = std::get_if<Phylogeny>(&tree)) return std::move(*phy);
  throw ParseError("tree is not a complete rooted binary tree with branch lengths", 0);
}

Topology parse_topology(std::string_view text) {
  auto tree = parse_newick(text);
  if (auto* phy = std::get_if<Phylogeny>(&tree)) return unroot(*phy);
  return std::get<Topology>(std::move(tree));
}

std::string to_newick(const Phylogeny& phy) {
  const Phylogeny canon = canonicalize(phy);
  const int n = canon.leaf_count();
  std::string out;
  std::function<void(int)> emit = [&](int v) {
    if (canon.is_leaf(v)) {
      out += std::to_string(canon.leaf_label(v - (n - 1)));
    } else {
      out += '(';
      emit(Phylogeny::left(v));
      out += ',';
      emit(Phylogeny::right(v));
      out += ')';
    }
    if (v > 0) {
      out += ':';
      out += format_length(canon.edge_length(v));
    }
  };
  emit(0);
  out += ';';
  return out;
}

std::string to_newick(const Topology& topo) {
  const int n = topo.leaf_count();
  if (n == 2) return "(1,2);";
  // Smallest label below each vertex when hanging the tree from `root`.
  const int root = topo.neighbors(0).front();
  std::function<int(int, int)> min_label = [&](int v, int from) -> int {
    if (v < n) return v + 1;
    int best = n + 1;
    for (int w : topo.neighbors(v)) {
      if (w != from) best = std::min(best, min_label(w, v));
    }
    return best;
  };
  std::string out;
  std::function<void(int, int)> emit = [&](int v, int from) {
    if (v < n) {
      out += std::to_string(v + 1);
      return;
    }
    std::vector<std::pair<int, int>> kids;
    for (int w : topo.neighbors(v)) {
      if (w != from) kids.emplace_back(min_label(w, v), w);
    }
    std::sort(kids.begin(), kids.end());
    out += '(';
    for (std::size_t i = 0; i < kids.size(); ++i) {
      if (i > 0) out += ',';
      emit(kids[i].second, v);
    }
    out += ')';
  };
  emit(root, -1);
  out += ';';
  return out;
}

std::vector<std::string> read_newick_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    lines.push_back(line.substr(first));
  }
  return lines;
}

std::string read_newick_line(std::istream& in) {
  auto lines = read_newick_lines(in);
  if (lines.empty()) throw ParseError("no tree found", 0);
  return lines.front();
}

}  // namespace ksb
