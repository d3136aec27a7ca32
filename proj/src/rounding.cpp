#include "adcell/rounding.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

namespace adcell {

Rat approx_ratio_bound(const Instance& inst) {
  Rat worst(0);
  for (int j = 0; j < inst.num_queries(); ++j) {
    for (const auto& [i, u] : inst.queries[j].bids) {
      if (u > inst.advertisers[i].budget)
        throw StructuralError("bid exceeds budget for advertiser " + std::to_string(i) + " on query " +
                              std::to_string(j) + "; truncate bids to budgets first");
      worst = std::max(worst, Rat(u / inst.advertisers[i].budget));
    }
  }
  return (4 - worst) / 4;
}

// --- rand_move ---------------------------------------------------------------

namespace {

int matrix_rank(std::vector<std::vector<Rat>> mat, int ncols) {
  size_t row = 0;
  for (int col = 0; col < ncols && row < mat.size(); ++col) {
    size_t sel = row;
    while (sel < mat.size() && mat[sel][col] == 0) ++sel;
    if (sel == mat.size()) continue;
    std::swap(mat[row], mat[sel]);
    for (size_t r2 = row + 1; r2 < mat.size(); ++r2) {
      if (mat[r2][col] == 0) continue;
      const Rat f = mat[r2][col] / mat[row][col];
      for (int c = col; c < ncols; ++c) mat[r2][c] -= f * mat[row][c];
    }
    ++row;
  }
  return static_cast<int>(row);
}

}  // namespace

std::vector<Rat> rand_move(const Subsystem& sub, const std::vector<Rat>& current, Rng& rng, RandMoveStep* step) {
  const int nv = sub.num_vars;
  if (static_cast<int>(current.size()) != nv) throw StructuralError("rand_move: point size mismatch");
  for (int v = 0; v < nv; ++v)
    if (current[v] < 0 || current[v] > 1) throw StructuralError("rand_move: current point outside [0,1]");
  for (const auto& [a, rhs] : sub.equalities) {
    Rat lhs(0);
    for (int v = 0; v < nv; ++v) lhs += a[v] * current[v];
    if (lhs != rhs) throw StructuralError("rand_move: equality row not satisfied at current point");
  }
  for (const auto& [a, rhs] : sub.guards) {
    Rat lhs(0);
    for (int v = 0; v < nv; ++v) lhs += a[v] * current[v];
    if (lhs > rhs) throw StructuralError("rand_move: guard violated at current point");
  }

  // Null-space direction by Gauss-Jordan elimination over the equality rows.
  std::vector<std::vector<Rat>> mat;
  for (const auto& [a, rhs] : sub.equalities) mat.push_back(a);
  std::vector<int> pivot_cols;
  size_t row = 0;
  for (int col = 0; col < nv && row < mat.size(); ++col) {
    size_t sel = row;
    while (sel < mat.size() && mat[sel][col] == 0) ++sel;
    if (sel == mat.size()) continue;
    std::swap(mat[row], mat[sel]);
    const Rat p = mat[row][col];
    for (auto& v : mat[row]) v /= p;
    for (size_t r2 = 0; r2 < mat.size(); ++r2) {
      if (r2 == row || mat[r2][col] == 0) continue;
      const Rat f = mat[r2][col];
      for (int c = 0; c < nv; ++c)
        if (mat[row][c] != 0) mat[r2][c] -= f * mat[row][c];
    }
    pivot_cols.push_back(col);
    ++row;
  }
  const int rank = static_cast<int>(row);
  if (rank >= nv)
    throw InternalError("rand_move: subsystem is not underdetermined (rank " + std::to_string(rank) + ", vars " +
                        std::to_string(nv) + ")");
  std::vector<bool> is_pivot(nv, false);
  for (int c : pivot_cols) is_pivot[c] = true;
  int free_col = -1;
  for (int c = 0; c < nv; ++c)
    if (!is_pivot[c]) {
      free_col = c;
      break;
    }
  std::vector<Rat> dir(nv, Rat(0));
  dir[free_col] = 1;
  for (int k = 0; k < rank; ++k) dir[pivot_cols[k]] = -mat[k][free_col];

  // Maximal feasible step along +dir and -dir against boxes and guards.
  auto max_step = [&](int sign) -> Rat {
    Rat best(0);
    bool found = false;
    auto consider = [&](const Rat& limit) {
      if (!found || limit < best) {
        best = limit;
        found = true;
      }
    };
    for (int v = 0; v < nv; ++v) {
      const Rat d = sign > 0 ? dir[v] : Rat(-dir[v]);
      if (d > 0) consider((1 - current[v]) / d);
      else if (d < 0) consider(current[v] / -d);
    }
    for (const auto& [a, rhs] : sub.guards) {
      Rat ad(0), ax(0);
      for (int v = 0; v < nv; ++v) {
        ad += a[v] * dir[v];
        ax += a[v] * current[v];
      }
      if (sign < 0) ad = -ad;
      if (ad > 0) consider((rhs - ax) / ad);
    }
    if (!found) throw InternalError("rand_move: step is unbounded");
    return best;
  };
  const Rat alpha = max_step(+1);
  const Rat beta = max_step(-1);
  if (alpha <= 0 || beta <= 0)
    throw InternalError("rand_move: degenerate step, a tight guard blocks movement");

  const Rat prob_plus = beta / (alpha + beta);
  const bool plus = rng.bernoulli(prob_plus);
  std::vector<Rat> out = current;
  for (int v = 0; v < nv; ++v) out[v] += (plus ? alpha : -beta) * dir[v];
  if (step) {
    step->direction = dir;
    step->alpha = alpha;
    step->beta = beta;
    step->prob_plus = prob_plus;
    step->took_plus = plus;
  }
  return out;
}

// --- case engine -------------------------------------------------------------

namespace {

struct EdgeRec {
  int adv;
  int query;
  Rat bid;
};

// Node path through the forest; junction_after[p] marks a pair of queries from
// one tight set treated as a single node (no edge between them).
struct PathSpec {
  std::vector<int> nodes;
  std::vector<bool> junction_after;

  void append_junction(const std::vector<int>& segment) {
    junction_after.resize(nodes.size(), false);
    junction_after.back() = true;
    nodes.insert(nodes.end(), segment.begin(), segment.end());
    junction_after.resize(nodes.size() - 1, false);
  }
};

class Engine {
 public:
  Engine(const Instance& inst, const Scenario* scen, const FractionalAssignment& y, Rng* rng,
         const RoundingOptions& opts)
      : inst_(inst), scen_(scen), rng_(rng), opts_(opts), m_(inst.num_advertisers()), n_(inst.num_queries()) {
    for (const auto& [key, v] : y.values) {
      const auto [i, j] = key;
      if (v == 0) continue;
      if (v < 0 || v > 1) throw StructuralError("fractional value outside [0,1]");
      if (i < 0 || i >= m_ || j < 0 || j >= n_) throw StructuralError("fractional value on unknown pair");
      const Rat bid = inst.bid(i, j);
      if (bid == 0) throw StructuralError("fractional value on a pair with no bid");
      edge_index_[{i, j}] = static_cast<int>(edges_.size());
      edges_.push_back({i, j, bid});
      x_.push_back(v);
    }
    if (scen_) validate_feasible();
    max_steps_ = 200 + 50 * static_cast<int>(edges_.size() + n_ + m_);
  }

  void break_cycles() {
    for (;;) {
      rebuild();
      auto cycle = find_cycle();
      if (!cycle) return;
      apply_cycle(*cycle);
    }
  }

  void run_cases() {
    for (;;) {
      rebuild();
      bool any_fractional = false;
      for (size_t e = 0; e < edges_.size(); ++e)
        if (fractional(static_cast<int>(e))) any_fractional = true;
      if (!any_fractional) return;
      if (steps_ > max_steps_) throw InternalError("rounding exceeded its step bound\n" + trace_.to_jsonl());
      if (try_case_i()) continue;
      if (try_subcase_1()) continue;
      if (try_subcase_2()) continue;
      if (try_subcase_3()) continue;
      if (try_subcase_4()) continue;
      if (try_tree_rand_move()) continue;
      if (try_chain()) continue;
      throw InternalError("no rounding case applies; case engine incomplete\n" + trace_.to_jsonl());
    }
  }

  FractionalAssignment values() const {
    FractionalAssignment y;
    for (size_t e = 0; e < edges_.size(); ++e)
      if (x_[e] != 0) y.values[{edges_[e].adv, edges_[e].query}] = x_[e];
    return y;
  }

  IntegralAssignment assignment() const {
    IntegralAssignment out;
    for (size_t e = 0; e < edges_.size(); ++e) {
      if (x_[e] == 1) {
        auto [it, inserted] = out.advertiser_of.emplace(edges_[e].query, edges_[e].adv);
        if (!inserted) throw InternalError("two advertisers rounded to 1 on one query");
      } else if (x_[e] != 0) {
        throw InternalError("assignment requested while fractional values remain");
      }
    }
    return out;
  }

  RoundingTrace take_trace() { return std::move(trace_); }

 private:
  // --- state helpers
  int query_node(int j) const { return m_ + j; }
  bool is_query_node(int v) const { return v >= m_; }
  int query_of_node(int v) const { return v - m_; }
  int customer_of_node(int v) const { return inst_.queries[v - m_].customer; }
  bool fractional(int e) const { return x_[e] > 0 && x_[e] < 1; }
  Rat indicator(int j) const { return Rat(scen_ && !scen_->has(j) ? 0 : 1); }
  bool query_nontight(int j) const { return total_[j] < indicator(j); }
  bool set_tight(int k) const { return usage_[k] == inst_.customers[k].capacity; }
  int degree(int v) const { return static_cast<int>(adj_[v].size()); }

  int edge_between(int u, int v) const {
    const int a = is_query_node(u) ? v : u;
    const int q = is_query_node(u) ? u : v;
    return edge_index_.at({a, query_of_node(q)});
  }

  void validate_feasible() {
    std::vector<Rat> total(n_, Rat(0)), spend(m_, Rat(0));
    std::vector<Rat> usage(inst_.num_customers(), Rat(0));
    for (size_t e = 0; e < edges_.size(); ++e) {
      total[edges_[e].query] += x_[e];
      spend[edges_[e].adv] += x_[e] * edges_[e].bid;
    }
    for (int j = 0; j < n_; ++j) {
      if (total[j] > indicator(j))
        throw StructuralError("y_star infeasible: assign row of query " + std::to_string(j) + " exceeded");
      usage[inst_.queries[j].customer] += total[j];
    }
    for (int k = 0; k < inst_.num_customers(); ++k)
      if (usage[k] > inst_.customers[k].capacity)
        throw StructuralError("y_star infeasible: capacity row of customer " + std::to_string(k) + " exceeded");
    for (int i = 0; i < m_; ++i)
      if (spend[i] > inst_.advertisers[i].budget)
        throw StructuralError("y_star infeasible: budget row of advertiser " + std::to_string(i) + " exceeded");
  }

  void rebuild() {
    adj_.assign(m_ + n_, {});
    for (size_t e = 0; e < edges_.size(); ++e) {
      if (!fractional(static_cast<int>(e))) continue;
      adj_[edges_[e].adv].push_back(static_cast<int>(e));
      adj_[query_node(edges_[e].query)].push_back(static_cast<int>(e));
    }
    comp_.assign(m_ + n_, -1);
    int c = 0;
    for (int v = 0; v < m_ + n_; ++v) {
      if (comp_[v] != -1 || adj_[v].empty()) continue;
      std::deque<int> queue{v};
      comp_[v] = c;
      while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        for (int e : adj_[u]) {
          const int w = other_end(e, u);
          if (comp_[w] == -1) {
            comp_[w] = c;
            queue.push_back(w);
          }
        }
      }
      ++c;
    }
    num_comps_ = c;
    total_.assign(n_, Rat(0));
    for (size_t e = 0; e < edges_.size(); ++e) total_[edges_[e].query] += x_[e];
    usage_.assign(inst_.num_customers(), Rat(0));
    for (int j = 0; j < n_; ++j) usage_[inst_.queries[j].customer] += total_[j];
    spend_.assign(m_, Rat(0));
    for (size_t e = 0; e < edges_.size(); ++e) spend_[edges_[e].adv] += x_[e] * edges_[e].bid;
  }

  int other_end(int e, int v) const {
    const int a = edges_[e].adv;
    const int q = query_node(edges_[e].query);
    return v == a ? q : a;
  }

  std::vector<int> tree_path(int from, int to) const {
    std::vector<int> parent(m_ + n_, -1), parent_edge(m_ + n_, -1);
    std::deque<int> queue{from};
    parent[from] = from;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      if (u == to) break;
      for (int e : adj_[u]) {
        const int w = other_end(e, u);
        if (parent[w] == -1) {
          parent[w] = u;
          parent_edge[w] = e;
          queue.push_back(w);
        }
      }
    }
    if (parent[to] == -1) throw InternalError("tree_path: nodes not connected");
    std::vector<int> nodes;
    for (int v = to; v != from; v = parent[v]) nodes.push_back(v);
    nodes.push_back(from);
    std::reverse(nodes.begin(), nodes.end());
    return nodes;
  }

  // --- cycle breaking

  std::optional<std::vector<int>> find_cycle() const {
    std::vector<int> parent(m_ + n_, -1), parent_edge(m_ + n_, -1);
    std::vector<char> seen(m_ + n_, 0);
    for (int root = 0; root < m_ + n_; ++root) {
      if (seen[root] || adj_[root].empty()) continue;
      std::vector<int> stack{root};
      seen[root] = 1;
      parent[root] = root;
      while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int e : adj_[u]) {
          if (e == parent_edge[u]) continue;
          const int w = other_end(e, u);
          if (!seen[w]) {
            seen[w] = 1;
            parent[w] = u;
            parent_edge[w] = e;
            stack.push_back(w);
          } else {
            // Back edge (u, w): walk both tails up to their meeting point.
            std::vector<int> pu{u}, pw{w};
            std::set<int> on_pu{u};
            for (int v = u; v != parent[v];) {
              v = parent[v];
              pu.push_back(v);
              on_pu.insert(v);
            }
            while (!on_pu.count(pw.back())) pw.push_back(parent[pw.back()]);
            const int meet = pw.back();
            std::vector<int> cycle;
            for (int v : pu) {
              cycle.push_back(v);
              if (v == meet) break;
            }
            for (size_t t = pw.size() - 1; t-- > 0;) cycle.push_back(pw[t]);
            if (cycle.size() < 4) throw InternalError("malformed cycle");
            if (is_query_node(cycle.front())) std::rotate(cycle.begin(), cycle.begin() + 1, cycle.end());
            return cycle;
          }
        }
      }
    }
    return std::nullopt;
  }

  // Deltas per cycle edge for a unit step, last edge capped so the starting
  // advertiser's payment is exactly preserved. Returns empty when this
  // orientation would need a cap above the propagated value.
  std::vector<Rat> cycle_deltas(const std::vector<int>& cycle, std::vector<int>& edge_ids) const {
    const size_t len = cycle.size();
    edge_ids.clear();
    std::vector<Rat> d(len);
    for (size_t t = 0; t < len; ++t) edge_ids.push_back(edge_between(cycle[t], cycle[(t + 1) % len]));
    d[0] = -1;
    for (size_t t = 1; t < len; ++t) {
      const int node = cycle[t];
      if (is_query_node(node))
        d[t] = -d[t - 1];
      else
        d[t] = -d[t - 1] * edges_[edge_ids[t - 1]].bid / edges_[edge_ids[t]].bid;
    }
    const Rat cap = edges_[edge_ids[0]].bid / edges_[edge_ids[len - 1]].bid;
    if (cap > d[len - 1]) return {};
    d[len - 1] = cap;
    return d;
  }

  void apply_cycle(const std::vector<int>& cycle) {
    std::vector<int> edge_ids;
    std::vector<Rat> d = cycle_deltas(cycle, edge_ids);
    if (d.empty()) {
      // Traverse in the reverse order; the cap condition then holds exactly.
      std::vector<int> rev{cycle.front()};
      rev.insert(rev.end(), cycle.rbegin(), cycle.rend() - 1);
      d = cycle_deltas(rev, edge_ids);
      if (d.empty()) throw InternalError("cycle cap fails in both orientations");
    }
    Rat step(-1);
    for (size_t t = 0; t < edge_ids.size(); ++t) {
      const Rat& xv = x_[edge_ids[t]];
      Rat lim = d[t] > 0 ? Rat((1 - xv) / d[t]) : Rat(xv / -d[t]);
      if (step < 0 || lim < step) step = lim;
    }
    if (step <= 0) throw InternalError("cycle break step is degenerate");
    RoundingTrace::Step rec;
    rec.label = "cycle-break";
    rec.alpha = step;
    rec.beta = 0;
    rec.branch = 0;
    for (size_t t = 0; t < edge_ids.size(); ++t) {
      x_[edge_ids[t]] += step * d[t];
      rec.edges.push_back({edges_[edge_ids[t]].adv, edges_[edge_ids[t]].query});
      if (x_[edge_ids[t]] == 0 || x_[edge_ids[t]] == 1)
        rec.fixed.push_back({{edges_[edge_ids[t]].adv, edges_[edge_ids[t]].query}, x_[edge_ids[t]]});
    }
    finish_step(std::move(rec));
  }

  // --- path systems

  struct PathEdges {
    std::vector<int> edge_ids;
    std::vector<Rat> dir;  // null-space direction, dir[0] = 1
  };

  PathEdges path_edges(const PathSpec& spec) const {
    PathEdges pe;
    bool after_junction = false;
    int prev_edge = -1;
    Rat cur;
    for (size_t p = 0; p + 1 < spec.nodes.size(); ++p) {
      if (spec.junction_after[p]) {
        after_junction = true;
        continue;
      }
      const int e = edge_between(spec.nodes[p], spec.nodes[p + 1]);
      if (pe.edge_ids.empty()) {
        cur = 1;
      } else if (after_junction) {
        cur = -cur;
      } else if (is_query_node(spec.nodes[p])) {
        cur = -cur;
      } else {
        cur = -cur * edges_[prev_edge].bid / edges_[e].bid;
      }
      after_junction = false;
      pe.edge_ids.push_back(e);
      pe.dir.push_back(cur);
      prev_edge = e;
    }
    return pe;
  }

  // Equality rows that every path step preserves: the pair sum at interior
  // queries and junction pairs, the bid-weighted pair sum at interior
  // advertisers. End nodes contribute no row.
  Subsystem path_system(const PathSpec& spec, const PathEdges& pe) const {
    Subsystem sub;
    sub.num_vars = static_cast<int>(pe.edge_ids.size());
    size_t edge_pos = 0;
    bool after_junction = false;
    for (size_t p = 0; p + 1 < spec.nodes.size(); ++p) {
      if (spec.junction_after[p]) {
        after_junction = true;
        continue;
      }
      if (edge_pos > 0) {
        const int prev = pe.edge_ids[edge_pos - 1];
        const int curr = pe.edge_ids[edge_pos];
        std::vector<Rat> row(sub.num_vars, Rat(0));
        Rat rhs;
        if (after_junction || is_query_node(spec.nodes[p])) {
          row[edge_pos - 1] = 1;
          row[edge_pos] = 1;
          rhs = x_[prev] + x_[curr];
        } else {
          row[edge_pos - 1] = edges_[prev].bid;
          row[edge_pos] = edges_[curr].bid;
          rhs = x_[prev] * edges_[prev].bid + x_[curr] * edges_[curr].bid;
        }
        sub.equalities.push_back({std::move(row), rhs});
      }
      after_junction = false;
      ++edge_pos;
    }
    return sub;
  }

  void add_query_end_guards(Subsystem& sub, const PathSpec& spec, const PathEdges& pe) {
    const int nv = sub.num_vars;
    const int first = spec.nodes.front();
    const int last = spec.nodes.back();
    struct End {
      int node;
      int var;
    };
    std::vector<End> ends;
    if (is_query_node(first)) ends.push_back({first, 0});
    if (is_query_node(last)) ends.push_back({last, nv - 1});
    for (const End& end : ends) {
      const int j = query_of_node(end.node);
      const int e = pe.edge_ids[end.var];
      std::vector<Rat> row(nv, Rat(0));
      row[end.var] = 1;
      sub.guards.push_back({std::move(row), Rat(indicator(j) - (total_[j] - x_[e]))});
    }
    if (ends.size() == 2 && customer_of_node(ends[0].node) == customer_of_node(ends[1].node)) {
      const int k = customer_of_node(ends[0].node);
      std::vector<Rat> row(nv, Rat(0));
      row[ends[0].var] = 1;
      row[ends[1].var] = 1;
      const Rat moving = x_[pe.edge_ids[ends[0].var]] + x_[pe.edge_ids[ends[1].var]];
      sub.guards.push_back({std::move(row), Rat(inst_.customers[k].capacity - (usage_[k] - moving))});
    } else {
      for (const End& end : ends) {
        const int k = customer_of_node(end.node);
        std::vector<Rat> row(nv, Rat(0));
        row[end.var] = 1;
        sub.guards.push_back(
            {std::move(row), Rat(inst_.customers[k].capacity - (usage_[k] - x_[pe.edge_ids[end.var]]))});
      }
    }
  }

  void apply_path_rand_move(const PathSpec& spec, const std::string& label) {
    const PathEdges pe = path_edges(spec);
    Subsystem sub = path_system(spec, pe);
    if (is_query_node(spec.nodes.front()) || is_query_node(spec.nodes.back())) add_query_end_guards(sub, spec, pe);
    std::vector<Rat> current;
    current.reserve(pe.edge_ids.size());
    for (int e : pe.edge_ids) current.push_back(x_[e]);
    RandMoveStep info;
    const std::vector<Rat> next = rand_move(sub, current, *rng_, &info);
    RoundingTrace::Step rec;
    rec.label = label;
    rec.alpha = info.alpha;
    rec.beta = info.beta;
    rec.branch = info.took_plus ? 1 : -1;
    for (size_t v = 0; v < pe.edge_ids.size(); ++v) {
      x_[pe.edge_ids[v]] = next[v];
      rec.edges.push_back({edges_[pe.edge_ids[v]].adv, edges_[pe.edge_ids[v]].query});
      if (next[v] == 0 || next[v] == 1)
        rec.fixed.push_back({{edges_[pe.edge_ids[v]].adv, edges_[pe.edge_ids[v]].query}, next[v]});
    }
    finish_step(std::move(rec));
  }

  // Deterministic transfer between two non-tight queries of one tight set
  // (cycle-style rules along the path). The orientation is chosen so the
  // set's usage cannot increase; every advertiser's payment is preserved
  // exactly.
  void apply_path_deterministic(const PathSpec& spec, const std::string& label) {
    const PathEdges pe = path_edges(spec);
    const size_t nE = pe.edge_ids.size();
    std::vector<Rat> d(nE);
    for (size_t v = 0; v < nE; ++v) d[v] = -pe.dir[v];
    if (d.back() <= 0) throw InternalError("deterministic path step: unexpected direction sign");
    if (d.back() > 1) {
      const Rat scale = d.back();
      for (auto& v : d) v = -v / scale;
    }
    // Step limits: boxes on every edge plus the assign row of the increasing end.
    Rat step(-1);
    auto consider = [&](const Rat& lim) {
      if (step < 0 || lim < step) step = lim;
    };
    for (size_t v = 0; v < nE; ++v) {
      if (d[v] > 0) consider((1 - x_[pe.edge_ids[v]]) / d[v]);
      else if (d[v] < 0) consider(x_[pe.edge_ids[v]] / -d[v]);
    }
    const bool first_increases = d.front() > 0;
    const int up_node = first_increases ? spec.nodes.front() : spec.nodes.back();
    const int up_var = first_increases ? 0 : static_cast<int>(nE) - 1;
    const int jq = query_of_node(up_node);
    const Rat slack = indicator(jq) - total_[jq];
    if (slack <= 0) throw InternalError("deterministic path step: increasing end is tight");
    consider(slack / d[up_var]);
    if (step <= 0) throw InternalError("deterministic path step is degenerate");
    RoundingTrace::Step rec;
    rec.label = label;
    rec.alpha = step;
    rec.beta = 0;
    rec.branch = 0;
    for (size_t v = 0; v < nE; ++v) {
      x_[pe.edge_ids[v]] += step * d[v];
      rec.edges.push_back({edges_[pe.edge_ids[v]].adv, edges_[pe.edge_ids[v]].query});
      if (x_[pe.edge_ids[v]] == 0 || x_[pe.edge_ids[v]] == 1)
        rec.fixed.push_back({{edges_[pe.edge_ids[v]].adv, edges_[pe.edge_ids[v]].query}, x_[pe.edge_ids[v]]});
    }
    finish_step(std::move(rec));
  }

  void finish_step(RoundingTrace::Step rec) {
    ++steps_;
    if (opts_.record_trace) trace_.steps.push_back(std::move(rec));
    if (opts_.check_each_step) check_state();
  }

  void check_state() const {
    std::vector<Rat> total(n_, Rat(0));
    for (size_t e = 0; e < edges_.size(); ++e) {
      if (x_[e] < 0 || x_[e] > 1) throw InternalError("step check: value outside [0,1]");
      total[edges_[e].query] += x_[e];
    }
    std::vector<Rat> usage(inst_.num_customers(), Rat(0));
    for (int j = 0; j < n_; ++j) {
      if (scen_ && total[j] > indicator(j)) throw InternalError("step check: assign row violated");
      usage[inst_.queries[j].customer] += total[j];
    }
    for (int k = 0; k < inst_.num_customers(); ++k)
      if (usage[k] > inst_.customers[k].capacity) throw InternalError("step check: capacity row violated");
  }

  // --- case selection

  bool try_case_i() {
    for (int a = 0; a < m_; ++a) {
      if (degree(a) != 1) continue;
      for (int a2 = a + 1; a2 < m_; ++a2) {
        if (degree(a2) == 1 && comp_[a2] == comp_[a]) {
          PathSpec spec;
          spec.nodes = tree_path(a, a2);
          spec.junction_after.assign(spec.nodes.size() - 1, false);
          apply_path_rand_move(spec, "case-i");
          return true;
        }
      }
    }
    return false;
  }

  std::vector<int> leaf_queries() const {
    std::vector<int> out;
    for (int j = 0; j < n_; ++j)
      if (degree(query_node(j)) == 1) out.push_back(j);
    return out;
  }

  bool try_subcase_1() {
    const auto leaves = leaf_queries();
    for (size_t a = 0; a < leaves.size(); ++a) {
      for (size_t b = a + 1; b < leaves.size(); ++b) {
        const int j1 = leaves[a], j2 = leaves[b];
        if (comp_[query_node(j1)] != comp_[query_node(j2)]) continue;
        if (inst_.queries[j1].customer != inst_.queries[j2].customer) continue;
        if (set_tight(inst_.queries[j1].customer)) continue;
        PathSpec spec;
        spec.nodes = tree_path(query_node(j1), query_node(j2));
        spec.junction_after.assign(spec.nodes.size() - 1, false);
        apply_path_rand_move(spec, "subcase-1");
        return true;
      }
    }
    return false;
  }

  bool try_subcase_2() {
    const auto leaves = leaf_queries();
    for (size_t a = 0; a < leaves.size(); ++a) {
      for (size_t b = a + 1; b < leaves.size(); ++b) {
        const int j1 = leaves[a], j2 = leaves[b];
        if (comp_[query_node(j1)] != comp_[query_node(j2)]) continue;
        const int k1 = inst_.queries[j1].customer, k2 = inst_.queries[j2].customer;
        if (k1 == k2 || set_tight(k1) || set_tight(k2)) continue;
        PathSpec spec;
        spec.nodes = tree_path(query_node(j1), query_node(j2));
        spec.junction_after.assign(spec.nodes.size() - 1, false);
        apply_path_rand_move(spec, "subcase-2");
        return true;
      }
    }
    return false;
  }

  bool try_subcase_3() {
    for (int j1 = 0; j1 < n_; ++j1) {
      if (degree(query_node(j1)) == 0 || !query_nontight(j1)) continue;
      for (int j2 = j1 + 1; j2 < n_; ++j2) {
        if (degree(query_node(j2)) == 0 || !query_nontight(j2)) continue;
        if (comp_[query_node(j1)] != comp_[query_node(j2)]) continue;
        if (inst_.queries[j1].customer != inst_.queries[j2].customer) continue;
        if (!set_tight(inst_.queries[j1].customer)) continue;
        PathSpec spec;
        spec.nodes = tree_path(query_node(j1), query_node(j2));
        spec.junction_after.assign(spec.nodes.size() - 1, false);
        apply_path_deterministic(spec, "subcase-3");
        return true;
      }
    }
    return false;
  }

  bool try_subcase_4() {
    const auto leaves = leaf_queries();
    for (int a = 0; a < m_; ++a) {
      if (degree(a) != 1) continue;
      for (int q : leaves) {
        if (comp_[query_node(q)] != comp_[a]) continue;
        if (set_tight(inst_.queries[q].customer)) continue;
        PathSpec spec;
        spec.nodes = tree_path(query_node(q), a);
        spec.junction_after.assign(spec.nodes.size() - 1, false);
        apply_path_rand_move(spec, "subcase-4");
        return true;
      }
    }
    return false;
  }

  // Whole-tree move: when the linearly independent tight rows of one tree
  // leave a degree of freedom, move along it.
  bool try_tree_rand_move() {
    for (int c = 0; c < num_comps_; ++c) {
      std::vector<int> vars;
      for (size_t e = 0; e < edges_.size(); ++e)
        if (fractional(static_cast<int>(e)) && comp_[edges_[e].adv] == c) vars.push_back(static_cast<int>(e));
      if (vars.empty()) continue;
      std::map<int, int> var_pos;
      for (size_t v = 0; v < vars.size(); ++v) var_pos[vars[v]] = static_cast<int>(v);
      const int nv = static_cast<int>(vars.size());

      Subsystem sub;
      sub.num_vars = nv;
      auto row_for = [&](auto&& select) {
        std::vector<Rat> row(nv, Rat(0));
        Rat rhs(0);
        for (int v = 0; v < nv; ++v) {
          const Rat coeff = select(vars[v]);
          row[v] = coeff;
          rhs += coeff * x_[vars[v]];
        }
        return std::make_pair(std::move(row), std::move(rhs));
      };
      std::set<int> comp_queries, comp_customers, comp_advertisers;
      for (int e : vars) {
        comp_queries.insert(edges_[e].query);
        comp_customers.insert(inst_.queries[edges_[e].query].customer);
        comp_advertisers.insert(edges_[e].adv);
      }
      for (int j : comp_queries) {
        auto row = row_for([&](int e) { return Rat(edges_[e].query == j ? 1 : 0); });
        if (!query_nontight(j)) sub.equalities.push_back(std::move(row));
        else sub.guards.push_back({std::move(row.first), Rat(row.second + (indicator(j) - total_[j]))});
      }
      for (int k : comp_customers) {
        auto row = row_for([&](int e) { return Rat(inst_.queries[edges_[e].query].customer == k ? 1 : 0); });
        if (set_tight(k)) sub.equalities.push_back(std::move(row));
        else sub.guards.push_back({std::move(row.first), Rat(row.second + (inst_.customers[k].capacity - usage_[k]))});
      }
      for (int i : comp_advertisers) {
        if (spend_[i] != inst_.advertisers[i].budget) continue;  // non-tight budgets may move freely
        sub.equalities.push_back(row_for([&](int e) { return Rat(edges_[e].adv == i ? edges_[e].bid : 0); }));
      }
      std::vector<std::vector<Rat>> mat;
      for (const auto& [a, rhs] : sub.equalities) mat.push_back(a);
      if (matrix_rank(std::move(mat), nv) >= nv) continue;
      std::vector<Rat> current;
      for (int e : vars) current.push_back(x_[e]);
      RandMoveStep info;
      const std::vector<Rat> next = rand_move(sub, current, *rng_, &info);
      RoundingTrace::Step rec;
      rec.label = "tree-randmove";
      rec.alpha = info.alpha;
      rec.beta = info.beta;
      rec.branch = info.took_plus ? 1 : -1;
      for (int v = 0; v < nv; ++v) {
        x_[vars[v]] = next[v];
        rec.edges.push_back({edges_[vars[v]].adv, edges_[vars[v]].query});
        if (next[v] == 0 || next[v] == 1)
          rec.fixed.push_back({{edges_[vars[v]].adv, edges_[vars[v]].query}, next[v]});
      }
      finish_step(std::move(rec));
      return true;
    }
    return false;
  }

  // --- chaining across trees (the remaining cases)

  struct Chain {
    std::vector<std::vector<int>> segments;  // node paths; consecutive segments joined at query pairs
    std::vector<int> seg_comp;

    int front_node() const { return segments.front().front(); }
    int back_node() const { return segments.back().back(); }
    void reverse() {
      std::reverse(segments.begin(), segments.end());
      for (auto& s : segments) std::reverse(s.begin(), s.end());
      std::reverse(seg_comp.begin(), seg_comp.end());
    }
    PathSpec to_path() const {
      PathSpec spec;
      spec.nodes = segments.front();
      spec.junction_after.assign(spec.nodes.size() - 1, false);
      for (size_t h = 1; h < segments.size(); ++h) spec.append_junction(segments[h]);
      return spec;
    }
  };

  bool end_open(int node) const { return is_query_node(node) && set_tight(customer_of_node(node)); }

  // Safe far endpoint preference inside one tree: a leaf advertiser, then a
  // leaf query in a non-tight set, then any leaf query.
  int choose_far_leaf(int comp, int exclude_node) const {
    for (int a = 0; a < m_; ++a)
      if (degree(a) == 1 && comp_[a] == comp && a != exclude_node) return a;
    int tight_fallback = -1;
    for (int j = 0; j < n_; ++j) {
      const int node = query_node(j);
      if (degree(node) != 1 || comp_[node] != comp || node == exclude_node) continue;
      if (!set_tight(inst_.queries[j].customer)) return node;
      if (tight_fallback == -1) tight_fallback = node;
    }
    return tight_fallback;
  }

  bool try_chain() {
    Chain chain;
    std::set<int> visited;
    int start_adv = -1;
    for (int a = 0; a < m_ && start_adv == -1; ++a)
      if (degree(a) == 1) start_adv = a;
    if (start_adv != -1) {
      const int far = choose_far_leaf(comp_[start_adv], start_adv);
      if (far == -1) throw InternalError("chain: tree with a leaf advertiser has no query leaf");
      chain.segments.push_back(tree_path(start_adv, far));
      chain.seg_comp.push_back(comp_[start_adv]);
    } else {
      // Case (iii): every leaf is a query. Prefer a start in a non-tight set.
      int q0 = -1;
      for (int j = 0; j < n_ && q0 == -1; ++j)
        if (degree(query_node(j)) == 1 && !set_tight(inst_.queries[j].customer)) q0 = query_node(j);
      for (int j = 0; j < n_ && q0 == -1; ++j)
        if (degree(query_node(j)) == 1) q0 = query_node(j);
      if (q0 == -1) return false;
      const int far = choose_far_leaf(comp_[q0], q0);
      if (far == -1) throw InternalError("chain: tree has a single leaf");
      chain.segments.push_back(tree_path(q0, far));
      chain.seg_comp.push_back(comp_[q0]);
    }
    visited.insert(chain.seg_comp.front());

    for (int iter = 0; iter <= num_comps_ + 1; ++iter) {
      const bool back_open = end_open(chain.back_node());
      const bool front_open = end_open(chain.front_node());
      if (!back_open && front_open) {
        chain.reverse();
        continue;
      }
      if (!back_open && !front_open) {
        apply_chain_terminal(chain, start_adv != -1);
        return true;
      }
      // Resolve the open back end: find another non-tight query of its tight set.
      const int q_end = query_of_node(chain.back_node());
      const int k = inst_.queries[q_end].customer;
      int closure_partner = -1, extend_partner = -1;
      for (int j = 0; j < n_; ++j) {
        if (j == q_end || inst_.queries[j].customer != k) continue;
        if (degree(query_node(j)) == 0 || !query_nontight(j)) continue;
        const int jc = comp_[query_node(j)];
        if (visited.count(jc)) {
          // Skip forward-junction queries; their pair partner covers the closure.
          bool is_forward_junction = false;
          for (size_t h = 0; h + 1 < chain.segments.size(); ++h)
            if (chain.segments[h].back() == query_node(j)) is_forward_junction = true;
          if (!is_forward_junction && closure_partner == -1) closure_partner = j;
        } else if (extend_partner == -1) {
          extend_partner = j;
        }
      }
      if (closure_partner != -1) {
        apply_chain_closure(chain, closure_partner, start_adv != -1);
        return true;
      }
      if (extend_partner == -1)
        throw InternalError("chain: tight set has no other non-tight query\n" + trace_.to_jsonl());
      const int jnode = query_node(extend_partner);
      const int far = choose_far_leaf(comp_[jnode], jnode);
      if (far == -1) throw InternalError("chain: extension tree has no usable leaf");
      chain.segments.push_back(tree_path(jnode, far));
      chain.seg_comp.push_back(comp_[jnode]);
      visited.insert(comp_[jnode]);
    }
    throw InternalError("chain construction did not terminate");
  }

  void apply_chain_terminal(const Chain& chain, bool from_advertiser) {
    const PathSpec spec = chain.to_path();
    const bool f_adv = !is_query_node(spec.nodes.front());
    const bool b_adv = !is_query_node(spec.nodes.back());
    std::string kind;
    if (f_adv && b_adv) kind = "case-i";
    else if (f_adv || b_adv) kind = "subcase-4";
    else if (customer_of_node(spec.nodes.front()) == customer_of_node(spec.nodes.back())) kind = "subcase-1";
    else kind = "subcase-2";
    apply_path_rand_move(spec, (from_advertiser ? "subcase-5:" : "case-iii:") + kind);
  }

  void apply_chain_closure(Chain& chain, int partner, bool from_advertiser) {
    const int pnode = query_node(partner);
    const int pcomp = comp_[pnode];
    // Locate the partner's segment; the closure runs from the partner through
    // that tree to its forward junction, then along the remaining chain.
    size_t idx = chain.segments.size();
    for (size_t h = 0; h < chain.segments.size(); ++h)
      if (chain.seg_comp[h] == pcomp) idx = h;
    if (idx == chain.segments.size()) throw InternalError("chain closure: partner tree not on chain");
    PathSpec spec;
    if (idx + 1 == chain.segments.size()) {
      // Partner shares the open end's tree; a plain same-tree transfer.
      spec.nodes = tree_path(pnode, chain.back_node());
      spec.junction_after.assign(spec.nodes.size() - 1, false);
    } else {
      spec.nodes = tree_path(pnode, chain.segments[idx].back());
      spec.junction_after.assign(spec.nodes.size() - 1, false);
      for (size_t h = idx + 1; h < chain.segments.size(); ++h) spec.append_junction(chain.segments[h]);
    }
    apply_path_deterministic(spec, (from_advertiser ? "subcase-5:" : "case-iii:") + std::string("subcase-3"));
  }

  const Instance& inst_;
  const Scenario* scen_;
  Rng* rng_;
  RoundingOptions opts_;
  int m_, n_;
  std::vector<EdgeRec> edges_;
  std::vector<Rat> x_;
  std::map<std::pair<int, int>, int> edge_index_;
  RoundingTrace trace_;
  int steps_ = 0;
  int max_steps_ = 0;

  std::vector<std::vector<int>> adj_;
  std::vector<int> comp_;
  int num_comps_ = 0;
  std::vector<Rat> total_;
  std::vector<Rat> usage_;
  std::vector<Rat> spend_;
};

}  // namespace

FractionalAssignment forestify(const Instance& inst, const FractionalAssignment& y) {
  RoundingOptions opts;
  opts.record_trace = false;
  Engine eng(inst, nullptr, y, nullptr, opts);
  eng.break_cycles();
  return eng.values();
}

RoundingResult round_offline(const Instance& inst, const Scenario& scenario, const FractionalAssignment& y_star,
                             Rng& rng, const RoundingOptions& opts) {
  if (static_cast<int>(scenario.arrived.size()) != inst.num_queries())
    throw StructuralError("scenario length does not match instance");
  Engine eng(inst, &scenario, y_star, &rng, opts);
  eng.break_cycles();
  eng.run_cases();
  RoundingResult result;
  result.assignment = eng.assignment();
  check_assignment(inst, result.assignment, &scenario);
  result.trace = eng.take_trace();
  return result;
}

std::string RoundingTrace::to_jsonl() const {
  std::ostringstream out;
  for (const auto& step : steps) {
    nlohmann::json rec;
    rec["label"] = step.label;
    rec["edges"] = nlohmann::json::array();
    for (const auto& [i, j] : step.edges) rec["edges"].push_back({i, j});
    rec["alpha"] = rational_to_string(step.alpha);
    rec["beta"] = rational_to_string(step.beta);
    rec["branch"] = step.branch;
    rec["fixed"] = nlohmann::json::array();
    for (const auto& [edge, value] : step.fixed)
      rec["fixed"].push_back({{"advertiser", edge.first}, {"query", edge.second}, {"value", rational_to_string(value)}});
    out << rec.dump() << "\n";
  }
  return out.str();
}

}  // namespace adcell
