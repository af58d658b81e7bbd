#include "mot/support_mask.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mot/errors.hpp"

namespace mot {

SupportMask::SupportMask(BoolArray allowed) : allowed_(std::move(allowed)) {
  if (allowed_.rows() == 0 || allowed_.cols() == 0)
    throw ValidationError("support mask must be nonempty");
  for (Index i = 0; i < allowed_.rows(); ++i) {
    bool any = false;
    for (Index j = 0; j < allowed_.cols(); ++j) any = any || allowed_(i, j);
    if (!any)
      throw ValidationError("support mask row " + std::to_string(i) +
                            " has no allowed entry");
  }
  for (Index j = 0; j < allowed_.cols(); ++j) {
    bool any = false;
    for (Index i = 0; i < allowed_.rows(); ++i) any = any || allowed_(i, j);
    if (!any)
      throw ValidationError("support mask column " + std::to_string(j) +
                            " has no allowed entry");
  }
  count_ = 0;
  for (Index i = 0; i < allowed_.rows(); ++i)
    for (Index j = 0; j < allowed_.cols(); ++j)
      if (allowed_(i, j)) ++count_;
}

SupportMask SupportMask::full(Index rows, Index cols) {
  return SupportMask(BoolArray::Constant(rows, cols, true));
}

Matrix SupportMask::indicator() const {
  Matrix out(rows(), cols());
  for (Index i = 0; i < rows(); ++i)
    for (Index j = 0; j < cols(); ++j) out(i, j) = allowed_(i, j) ? 1.0 : 0.0;
  return out;
}

namespace {

// Max-flow (Dinic) on the bipartite network encoding the lcm row/column
// replication: source->row_i with capacity L/m, allowed (i,j) with capacity L,
// col_j->sink with capacity L/n, L = lcm(m, n). A full flow of value L exists
// iff the replicated pattern has a perfect matching; an allowed entry lies on
// some positive diagonal iff it carries flow in some maximum flow.
struct FlowEdge {
  int to;
  std::int64_t cap;
  int rev;
};

class Dinic {
 public:
  explicit Dinic(int n) : adj_(n) {}

  void add_edge(int a, int b, std::int64_t cap) {
    adj_[a].push_back({b, cap, static_cast<int>(adj_[b].size())});
    adj_[b].push_back({a, 0, static_cast<int>(adj_[a].size()) - 1});
  }

  std::int64_t max_flow(int s, int t) {
    std::int64_t total = 0;
    while (bfs(s, t)) {
      iter_.assign(adj_.size(), 0);
      std::int64_t f;
      while ((f = dfs(s, t, INT64_MAX)) > 0) total += f;
    }
    return total;
  }

  const std::vector<std::vector<FlowEdge>>& graph() const { return adj_; }

 private:
  bool bfs(int s, int t) {
    level_.assign(adj_.size(), -1);
    std::vector<int> queue{s};
    level_[s] = 0;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const int v = queue[qi];
      for (const FlowEdge& e : adj_[v])
        if (e.cap > 0 && level_[e.to] < 0) {
          level_[e.to] = level_[v] + 1;
          queue.push_back(e.to);
        }
    }
    return level_[t] >= 0;
  }

  std::int64_t dfs(int v, int t, std::int64_t limit) {
    if (v == t) return limit;
    for (int& i = iter_[v]; i < static_cast<int>(adj_[v].size()); ++i) {
      FlowEdge& e = adj_[v][i];
      if (e.cap <= 0 || level_[e.to] != level_[v] + 1) continue;
      const std::int64_t d = dfs(e.to, t, std::min(limit, e.cap));
      if (d > 0) {
        e.cap -= d;
        adj_[e.to][e.rev].cap += d;
        return d;
      }
    }
    return 0;
  }

  std::vector<std::vector<FlowEdge>> adj_;
  std::vector<int> level_;
  std::vector<int> iter_;
};

// Iterative Tarjan SCC.
std::vector<int> strongly_connected_components(
    const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> comp(n, -1), low(n), num(n, -1), stack_frame_edge(n, 0);
  std::vector<int> stack, call_stack;
  std::vector<bool> on_stack(n, false);
  int counter = 0, comps = 0;
  for (int root = 0; root < n; ++root) {
    if (num[root] >= 0) continue;
    call_stack.push_back(root);
    while (!call_stack.empty()) {
      const int v = call_stack.back();
      if (num[v] < 0) {
        num[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      bool descended = false;
      while (stack_frame_edge[v] < static_cast<int>(adj[v].size())) {
        const int w = adj[v][stack_frame_edge[v]++];
        if (num[w] < 0) {
          call_stack.push_back(w);
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], num[w]);
      }
      if (descended) continue;
      if (low[v] == num[v]) {
        while (true) {
          const int w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = comps;
          if (w == v) break;
        }
        ++comps;
      }
      call_stack.pop_back();
      if (!call_stack.empty()) {
        const int parent = call_stack.back();
        low[parent] = std::min(low[parent], low[v]);
      }
    }
  }
  return comp;
}

TotalSupportReport first_allowed_entry_failure(const SupportMask& mask) {
  TotalSupportReport report;
  report.pass = false;
  for (Index i = 0; i < mask.rows() && report.bad_row < 0; ++i)
    for (Index j = 0; j < mask.cols(); ++j)
      if (mask.allowed(i, j)) {
        report.bad_row = i;
        report.bad_col = j;
        return report;
      }
  return report;
}

TotalSupportReport exact_check(const SupportMask& mask) {
  const Index m = mask.rows();
  const Index n = mask.cols();
  const std::int64_t big = std::lcm(static_cast<std::int64_t>(m),
                                    static_cast<std::int64_t>(n));
  const int source = 0;
  const int sink = static_cast<int>(m + n) + 1;
  auto row_node = [](Index i) { return static_cast<int>(i) + 1; };
  auto col_node = [m](Index j) { return static_cast<int>(m + j) + 1; };

  Dinic dinic(static_cast<int>(m + n) + 2);
  for (Index i = 0; i < m; ++i) dinic.add_edge(source, row_node(i), big / m);
  for (Index j = 0; j < n; ++j) dinic.add_edge(col_node(j), sink, big / n);
  // Remember where each (i,j) edge lives to read its flow back.
  std::vector<std::vector<int>> edge_index(m, std::vector<int>(n, -1));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      if (mask.allowed(i, j)) {
        edge_index[i][j] =
            static_cast<int>(dinic.graph()[row_node(i)].size());
        dinic.add_edge(row_node(i), col_node(j), big);
      }

  if (dinic.max_flow(source, sink) < big) {
    // No feasible uniform plan at all: no positive diagonal exists.
    return first_allowed_entry_failure(mask);
  }

  // Zero-flow entries are reroutable iff the residual graph has a cycle
  // through them; with the forward arc always present, that is: the column
  // can reach the row back, i.e. both endpoints share a residual SCC.
  auto flow_on = [&](Index i, Index j) {
    const FlowEdge& e = dinic.graph()[row_node(i)][edge_index[i][j]];
    return big - e.cap;
  };
  std::vector<std::vector<int>> adj(m + n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      if (mask.allowed(i, j)) {
        if (flow_on(i, j) < big)
          adj[i].push_back(static_cast<int>(m + j));
        if (flow_on(i, j) > 0)
          adj[m + j].push_back(static_cast<int>(i));
      }
  const std::vector<int> comp = strongly_connected_components(adj);

  TotalSupportReport report;
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      if (!mask.allowed(i, j) || flow_on(i, j) > 0) continue;
      if (comp[i] != comp[m + j]) {
        report.pass = false;
        report.bad_row = i;
        report.bad_col = j;
        return report;
      }
    }
  return report;
}

TotalSupportReport probe_check(const SupportMask& mask) {
  const Index m = mask.rows();
  const Index n = mask.cols();
  const Matrix kernel = mask.indicator();
  const Vector mu1 = Vector::Constant(m, 1.0 / static_cast<double>(m));
  const Vector mu2 = Vector::Constant(n, 1.0 / static_cast<double>(n));
  constexpr int kProbeIters = 5000;
  constexpr double kProbeTol = 1e-8;

  Vector v = Vector::Ones(n);
  Vector kv = kernel.rowwise().sum();
  Vector u = mu1.array() / kv.array();
  for (int it = 1; it <= kProbeIters; ++it) {
    v = mu2.array() / (kernel.transpose() * u).array();
    kv.noalias() = kernel * v;
    const double residual =
        ((u.array() * kv.array()) - mu1.array()).abs().maxCoeff();
    if (residual <= kProbeTol) return {};
    u = mu1.array() / kv.array();
  }

  // Non-convergence: the pattern is being squeezed; report the most
  // suppressed allowed entry as the suspect.
  TotalSupportReport report;
  report.pass = false;
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      if (!mask.allowed(i, j)) continue;
      const double scaled = u[i] * v[j];
      if (scaled < best) {
        best = scaled;
        report.bad_row = i;
        report.bad_col = j;
      }
    }
  return report;
}

}  // namespace

TotalSupportReport total_support_check(const SupportMask& mask,
                                       Index exact_limit) {
  if (std::min(mask.rows(), mask.cols()) <= exact_limit)
    return exact_check(mask);
  return probe_check(mask);
}

}  // namespace mot
