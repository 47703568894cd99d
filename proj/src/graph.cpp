#include "commkit/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace commkit {

namespace {

std::string location(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

// Splits on spaces/tabs and commas; tolerates CR from CRLF files.
std::vector<std::string> tokenize(std::string line) {
  for (char& c : line)
    if (c == ',' || c == '\t' || c == '\r') c = ' ';
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::uint32_t parse_node_id(const std::string& tok, const std::string& path, std::size_t line_no) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(tok, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("malformed node id '" + tok + "' at " + location(path, line_no));
  }
  if (pos != tok.size() || v > 0xffffffffUL)
    throw std::runtime_error("malformed node id '" + tok + "' at " + location(path, line_no));
  return static_cast<std::uint32_t>(v);
}

double parse_real(const std::string& tok, const std::string& path, std::size_t line_no) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("malformed value '" + tok + "' at " + location(path, line_no));
  }
  if (pos != tok.size())
    throw std::runtime_error("malformed value '" + tok + "' at " + location(path, line_no));
  return v;
}

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

bool AttributedGraph::has_edge(std::uint32_t u, std::uint32_t v) const {
  if (u >= n_nodes || v >= n_nodes) return false;
  const auto begin = adj.begin() + static_cast<std::ptrdiff_t>(adj_ptr[u]);
  const auto end = adj.begin() + static_cast<std::ptrdiff_t>(adj_ptr[u + 1]);
  return std::binary_search(begin, end, v);
}

void AttributedGraph::rebuild_adjacency() {
  adj_ptr.assign(n_nodes + 1, 0);
  for (auto [u, v] : edges) {
    ++adj_ptr[u + 1];
    ++adj_ptr[v + 1];
  }
  for (std::size_t i = 0; i < n_nodes; ++i) adj_ptr[i + 1] += adj_ptr[i];
  adj.resize(2 * edges.size());
  std::vector<std::size_t> fill(adj_ptr.begin(), adj_ptr.end() - 1);
  for (auto [u, v] : edges) {
    adj[fill[u]++] = v;
    adj[fill[v]++] = u;
  }
  // edges are sorted by (u, v), so each neighbor list comes out ascending
}

void PlantedSpec::validate() const {
  if (k_true < 2) throw std::invalid_argument("planted spec: k_true must be >= 2");
  if (!(p_in > p_out)) throw std::invalid_argument("planted spec: requires p_in > p_out");
  if (p_out < 0.0 || p_in > 1.0) throw std::invalid_argument("planted spec: probabilities in [0,1]");
  if (attr_separation < 0.0) throw std::invalid_argument("planted spec: attr_separation >= 0");
  if (n_nodes < k_true) throw std::invalid_argument("planted spec: n_nodes < k_true");
  if (attr_separation > 0.0 && attr_dim < k_true)
    throw std::invalid_argument(
        "planted spec: attr_dim < k_true with orthogonal mean placement requested");
}

AttributedGraph make_graph(std::size_t n_nodes,
                           std::vector<std::pair<std::uint32_t, std::uint32_t>> edges,
                           Tensor attributes, std::optional<std::vector<int>> labels) {
  AttributedGraph g;
  g.n_nodes = n_nodes;
  g.n_features = attributes.cols();
  if (attributes.rows() != n_nodes)
    throw std::invalid_argument("make_graph: attribute row count != node count");
  if (labels && labels->size() != n_nodes)
    throw std::invalid_argument("make_graph: label count != node count");

  for (auto& [u, v] : edges) {
    if (u >= n_nodes || v >= n_nodes) throw std::invalid_argument("make_graph: edge id out of range");
    if (u > v) std::swap(u, v);
  }
  std::erase_if(edges, [](const auto& e) { return e.first == e.second; });
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  g.edges = std::move(edges);
  g.attributes = std::move(attributes);
  g.labels = std::move(labels);
  g.rebuild_adjacency();
  return g;
}

AttributedGraph load_graph(const std::string& edge_path, const std::string& attr_path,
                           const std::string& label_path) {
  std::ifstream ef(edge_path);
  if (!ef) throw std::runtime_error("cannot open edge file " + edge_path);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::uint32_t max_id = 0;
  bool any_node = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ef, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') continue;
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks.size() != 2)
      throw std::runtime_error("malformed edge line at " + location(edge_path, line_no) +
                               " (expected two node ids)");
    std::uint32_t u = parse_node_id(toks[0], edge_path, line_no);
    std::uint32_t v = parse_node_id(toks[1], edge_path, line_no);
    edges.emplace_back(u, v);
    max_id = std::max({max_id, u, v});
    any_node = true;
  }

  std::ifstream af(attr_path);
  if (!af) throw std::runtime_error("cannot open attribute file " + attr_path);
  std::vector<std::vector<double>> rows;
  std::size_t dim = 0;
  line_no = 0;
  while (std::getline(af, line)) {
    ++line_no;
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    std::vector<double> row;
    row.reserve(toks.size());
    for (const auto& t : toks) {
      double v = parse_real(t, attr_path, line_no);
      if (!std::isfinite(v))
        throw std::runtime_error("non-finite attribute value at " + location(attr_path, line_no));
      row.push_back(v);
    }
    if (rows.empty())
      dim = row.size();
    else if (row.size() != dim)
      throw std::runtime_error("malformed attribute line at " + location(attr_path, line_no) +
                               " (expected " + std::to_string(dim) + " values)");
    rows.push_back(std::move(row));
  }

  const std::size_t implied = any_node ? static_cast<std::size_t>(max_id) + 1 : 0;
  if (rows.size() < implied)
    throw std::runtime_error("attribute row count (" + std::to_string(rows.size()) +
                             ") is below the node count implied by " + edge_path + " (" +
                             std::to_string(implied) + ")");
  const std::size_t n = rows.size();  // attribute file is authoritative when larger

  Tensor attrs(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) attrs(i, j) = rows[i][j];

  std::optional<std::vector<int>> labels;
  if (!label_path.empty()) {
    std::ifstream lf(label_path);
    if (!lf) throw std::runtime_error("cannot open label file " + label_path);
    std::vector<int> lab;
    line_no = 0;
    while (std::getline(lf, line)) {
      ++line_no;
      auto toks = tokenize(line);
      if (toks.empty()) continue;
      if (toks.size() != 1)
        throw std::runtime_error("malformed label line at " + location(label_path, line_no));
      std::uint32_t v = parse_node_id(toks[0], label_path, line_no);
      lab.push_back(static_cast<int>(v));
    }
    if (lab.size() != n)
      throw std::runtime_error("label row count (" + std::to_string(lab.size()) +
                               ") does not match node count (" + std::to_string(n) + ")");
    labels = std::move(lab);
  }

  return make_graph(n, std::move(edges), std::move(attrs), std::move(labels));
}

void save_graph(const AttributedGraph& g, const std::string& edge_path,
                const std::string& attr_path, const std::string& label_path) {
  std::ofstream ef(edge_path);
  if (!ef) throw std::runtime_error("cannot write edge file " + edge_path);
  for (auto [u, v] : g.edges) ef << u << ' ' << v << '\n';
  if (!ef.flush()) throw std::runtime_error("write failed for " + edge_path);

  std::ofstream af(attr_path);
  if (!af) throw std::runtime_error("cannot write attribute file " + attr_path);
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    for (std::size_t j = 0; j < g.n_features; ++j) {
      if (j) af << ' ';
      af << full_precision(g.attributes(i, j));
    }
    af << '\n';
  }
  if (!af.flush()) throw std::runtime_error("write failed for " + attr_path);

  if (!label_path.empty()) {
    if (!g.labels) throw std::invalid_argument("save_graph: no labels to write");
    std::ofstream lf(label_path);
    if (!lf) throw std::runtime_error("cannot write label file " + label_path);
    for (int v : *g.labels) lf << v << '\n';
    if (!lf.flush()) throw std::runtime_error("write failed for " + label_path);
  }
}

NormalizedAdjacency normalize_adjacency(const AttributedGraph& g) {
  SparseMatrix s;
  s.n_rows = s.n_cols = g.n_nodes;
  s.row_ptr.resize(g.n_nodes + 1);
  s.col.reserve(g.adj.size() + g.n_nodes);
  s.val.reserve(g.adj.size() + g.n_nodes);
  s.row_ptr[0] = 0;
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    const double inv = 1.0 / static_cast<double>(g.degree(i) + 1);
    bool self_done = false;
    for (std::size_t e = g.adj_ptr[i]; e < g.adj_ptr[i + 1]; ++e) {
      const std::uint32_t j = g.adj[e];
      if (!self_done && j > i) {
        s.col.push_back(static_cast<std::uint32_t>(i));
        s.val.push_back(inv);
        self_done = true;
      }
      s.col.push_back(j);
      s.val.push_back(inv);
    }
    if (!self_done) {
      s.col.push_back(static_cast<std::uint32_t>(i));
      s.val.push_back(inv);
    }
    s.row_ptr[i + 1] = s.col.size();
  }
  return NormalizedAdjacency{std::move(s)};
}

AttributedGraph generate_planted_graph(const PlantedSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.n_nodes, k = spec.k_true;

  // even blocks, remainder spread over the earliest ones
  std::vector<int> labels(n);
  std::vector<std::size_t> block_start(k + 1, 0);
  {
    const std::size_t base = n / k, rem = n % k;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < k; ++c) {
      block_start[c] = pos;
      pos += base + (c < rem ? 1 : 0);
    }
    block_start[k] = pos;
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t i = block_start[c]; i < block_start[c + 1]; ++i) labels[i] = static_cast<int>(c);
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const double p = labels[u] == labels[v] ? spec.p_in : spec.p_out;
      if (rng.uniform() < p)
        edges.emplace_back(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
    }
  }

  // cluster means on scaled coordinate axes: mean_c = sep/sqrt(2) * e_c, so any
  // two means sit exactly attr_separation apart; unit-variance isotropic noise
  Tensor attrs(n, spec.attr_dim);
  const double axis = spec.attr_separation / std::sqrt(2.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < spec.attr_dim; ++j) {
      const double mean = (spec.attr_separation > 0.0 && j == static_cast<std::size_t>(labels[i]))
                              ? axis
                              : 0.0;
      attrs(i, j) = mean + rng.normal();
    }

  return make_graph(n, std::move(edges), std::move(attrs), std::move(labels));
}

std::vector<std::uint32_t> sample_mask_set(std::size_t n, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("sample_mask_set: fraction must be in (0,1]");
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::uint32_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<std::uint32_t>(i);
  // partial Fisher-Yates: first `count` entries become the sample
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

void row_normalize_attributes(AttributedGraph& g) {
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.n_features; ++j) s += std::fabs(g.attributes(i, j));
    if (s == 0.0) continue;
    for (std::size_t j = 0; j < g.n_features; ++j) g.attributes(i, j) /= s;
  }
}

}  // namespace commkit
