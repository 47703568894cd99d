#include "commkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

namespace commkit {

EdgeSets edge_sets(const AttributedGraph& g, const std::vector<int>& labels) {
  if (labels.size() != g.n_nodes) throw std::invalid_argument("edge_sets: label length mismatch");
  EdgeSets out;
  for (auto e : g.edges) {
    if (labels[e.first] == labels[e.second])
      out.intra.push_back(e);
    else
      out.inter.push_back(e);
  }
  return out;
}

double edge_metric(const AttributedGraph& g, const std::vector<int>& predicted,
                   const std::vector<int>& truth) {
  if (predicted.size() != g.n_nodes || truth.size() != g.n_nodes)
    throw std::invalid_argument("edge_metric: label length mismatch");
  std::size_t intra_both = 0, intra_any = 0, inter_both = 0, inter_any = 0;
  for (auto [u, v] : g.edges) {
    const bool t_intra = truth[u] == truth[v];
    const bool p_intra = predicted[u] == predicted[v];
    if (t_intra && p_intra) ++intra_both;
    if (t_intra || p_intra) ++intra_any;
    if (!t_intra && !p_intra) ++inter_both;
    if (!t_intra || !p_intra) ++inter_any;
  }
  const double j_intra =
      intra_any == 0 ? 1.0 : static_cast<double>(intra_both) / static_cast<double>(intra_any);
  const double j_inter =
      inter_any == 0 ? 1.0 : static_cast<double>(inter_both) / static_cast<double>(inter_any);
  if (j_intra + j_inter == 0.0) return 0.0;
  return 2.0 * j_intra * j_inter / (j_intra + j_inter);
}

double modularity(const AttributedGraph& g, const std::vector<int>& labels) {
  if (labels.size() != g.n_nodes) throw std::invalid_argument("modularity: label length mismatch");
  if (g.n_edges() == 0) throw std::invalid_argument("modularity: graph has no edges");
  const double m = static_cast<double>(g.n_edges());
  std::map<int, double> intra_edges, degree_sum;
  for (auto [u, v] : g.edges) {
    if (labels[u] == labels[v]) intra_edges[labels[u]] += 1.0;
  }
  for (std::size_t i = 0; i < g.n_nodes; ++i)
    degree_sum[labels[i]] += static_cast<double>(g.degree(i));
  double q = 0.0;
  for (const auto& [c, d] : degree_sum) {
    const double lc = intra_edges.count(c) ? intra_edges.at(c) : 0.0;
    const double frac = d / (2.0 * m);
    q += lc / m - frac * frac;
  }
  return q;
}

double calinski_harabasz(const Tensor& x, const std::vector<int>& labels) {
  if (labels.size() != x.rows())
    throw std::invalid_argument("calinski_harabasz: label length mismatch");
  const std::size_t n = x.rows(), d = x.cols();
  std::map<int, std::size_t> sizes;
  for (int c : labels) ++sizes[c];
  const std::size_t k = sizes.size();
  if (k < 2) throw std::invalid_argument("calinski_harabasz: needs at least two clusters");

  std::vector<double> grand(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) grand[j] += x(i, j);
  for (std::size_t j = 0; j < d; ++j) grand[j] /= static_cast<double>(n);

  std::map<int, std::vector<double>> means;
  for (const auto& [c, sz] : sizes) means[c] = std::vector<double>(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& mu = means[labels[i]];
    for (std::size_t j = 0; j < d; ++j) mu[j] += x(i, j);
  }
  for (auto& [c, mu] : means)
    for (std::size_t j = 0; j < d; ++j) mu[j] /= static_cast<double>(sizes[c]);

  double between = 0.0;
  for (const auto& [c, mu] : means) {
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += (mu[j] - grand[j]) * (mu[j] - grand[j]);
    between += static_cast<double>(sizes[c]) * ss;
  }
  double within = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& mu = means[labels[i]];
    for (std::size_t j = 0; j < d; ++j) within += (x(i, j) - mu[j]) * (x(i, j) - mu[j]);
  }
  if (within == 0.0) return std::numeric_limits<double>::infinity();
  return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
}

namespace {

double entropy_nats(const std::map<int, std::size_t>& counts, std::size_t n) {
  double h = 0.0;
  for (const auto& [c, cnt] : counts) {
    const double p = static_cast<double>(cnt) / static_cast<double>(n);
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("nmi: partition length mismatch");
  const std::size_t n = a.size();
  if (n == 0) throw std::invalid_argument("nmi: empty partitions");
  std::map<int, std::size_t> ca, cb;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < n; ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++joint[{a[i], b[i]}];
  }
  const double ha = entropy_nats(ca, n), hb = entropy_nats(cb, n);
  if (ha == 0.0 && hb == 0.0) return 1.0;  // both constant
  if (ha == 0.0 || hb == 0.0) return 0.0;  // exactly one constant
  double mi = 0.0;
  for (const auto& [key, cnt] : joint) {
    const double pij = static_cast<double>(cnt) / static_cast<double>(n);
    const double pi = static_cast<double>(ca.at(key.first)) / static_cast<double>(n);
    const double pj = static_cast<double>(cb.at(key.second)) / static_cast<double>(n);
    mi += pij * std::log(pij / (pi * pj));
  }
  const double v = mi / (0.5 * (ha + hb));
  return std::min(1.0, std::max(0.0, v));
}

std::string format_report(const PartitionScores& s) {
  char buf[64];
  std::string out;
  auto line = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s=%.17g\n", key, v);
    out += buf;
  };
  out += "K=" + std::to_string(s.k) + "\n";
  line("modularity", s.modularity);
  line("semantic", s.calinski_harabasz);
  if (s.has_supervised) {
    line("nmi", s.nmi);
    line("edge", s.edge);
  }
  return out;
}

}  // namespace commkit
