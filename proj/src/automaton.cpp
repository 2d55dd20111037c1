#include "flowsm/automaton.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "flowsm/errors.hpp"

namespace flowsm {

std::int64_t CountState::outgoing_total() const {
  std::int64_t total = 0;
  for (const auto& [sym, edge] : transitions) total += edge.second;
  return total;
}

std::int64_t CountState::transition_count(int symbol) const {
  auto it = transitions.find(symbol);
  return it == transitions.end() ? 0 : it->second.second;
}

int CountGraph::symbol_id(const std::string& symbol) const {
  auto it = std::lower_bound(alphabet.begin(), alphabet.end(), symbol);
  if (it == alphabet.end() || *it != symbol) return -1;
  return static_cast<int>(it - alphabet.begin());
}

bool CountGraph::conservation_holds() const {
  for (const CountState& s : states) {
    if (s.outgoing_total() + s.final_count != s.incoming) return false;
  }
  return true;
}

CountGraph build_fpta(const std::vector<Trace>& traces) {
  if (traces.empty()) throw std::invalid_argument("build_fpta: empty trace set");

  CountGraph g;
  std::set<Symbol> alphabet;
  for (const Trace& t : traces) alphabet.insert(t.symbols.begin(), t.symbols.end());
  g.alphabet.assign(alphabet.begin(), alphabet.end());
  g.states.emplace_back();
  g.trace_count = static_cast<std::int64_t>(traces.size());

  for (const Trace& t : traces) {
    int state = g.root;
    ++g.states[static_cast<std::size_t>(state)].incoming;
    for (const Symbol& sym : t.symbols) {
      int id = g.symbol_id(sym);
      auto it = g.states[static_cast<std::size_t>(state)].transitions.find(id);
      int child;
      if (it == g.states[static_cast<std::size_t>(state)].transitions.end()) {
        child = static_cast<int>(g.states.size());
        g.states.emplace_back();  // invalidates references into g.states
        g.states[static_cast<std::size_t>(state)].transitions.emplace(
            id, std::make_pair(child, std::int64_t{0}));
      } else {
        child = it->second.first;
      }
      ++g.states[static_cast<std::size_t>(state)].transitions.at(id).second;
      state = child;
      ++g.states[static_cast<std::size_t>(state)].incoming;
    }
    ++g.states[static_cast<std::size_t>(state)].final_count;
  }
  return g;
}

bool hoeffding_compatible(std::int64_t n1, std::int64_t f1, std::int64_t n2, std::int64_t f2,
                          double alpha) {
  if (n1 <= 0 || n2 <= 0) throw std::invalid_argument("hoeffding_compatible: counts must be positive");
  if (f1 < 0 || f1 > n1 || f2 < 0 || f2 > n2) {
    throw std::invalid_argument("hoeffding_compatible: frequency out of range");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("hoeffding_compatible: alpha must be in (0,1)");
  }
  double diff = std::abs(static_cast<double>(f1) / static_cast<double>(n1) -
                         static_cast<double>(f2) / static_cast<double>(n2));
  double bound = std::sqrt(0.5 * std::log(2.0 / alpha)) *
                 (1.0 / std::sqrt(static_cast<double>(n1)) + 1.0 / std::sqrt(static_cast<double>(n2)));
  return diff < bound;
}

namespace {

// Mutable working copy for the red-blue merge loop. The blue frontier (live
// non-red children of red states) is kept in an ordered set keyed by
// (count desc, access path lex asc); folds report every state whose counts
// or attachment changed so the affected entries can be refreshed.
struct MergeState {
  std::vector<CountState> states;
  std::vector<bool> alive;
  std::vector<bool> red;
  std::vector<std::vector<int>> red_path;  // access path of each red state
  std::vector<int> red_order;              // promotion order; root first
  std::vector<int> parent;                 // tree parent of each non-red state
  std::vector<int> in_symbol;              // symbol on the parent edge
  double alpha;

  struct FrontierKey {
    std::int64_t count;
    std::vector<int> path;
    int state;
    bool operator<(const FrontierKey& o) const {
      if (count != o.count) return count > o.count;  // higher count first
      if (path != o.path) return path < o.path;
      return state < o.state;
    }
  };
  std::set<FrontierKey> frontier;
  std::vector<std::int64_t> entry_count;  // count recorded in the live entry; -1 = absent

  std::vector<int> path_of(int s) const {
    std::vector<int> path = red_path[static_cast<std::size_t>(parent[static_cast<std::size_t>(s)])];
    path.push_back(in_symbol[static_cast<std::size_t>(s)]);
    return path;
  }

  // Re-derives s's frontier entry after any change to its counts, its
  // liveness or its parent's colour.
  void refresh(int s) {
    auto idx = static_cast<std::size_t>(s);
    if (entry_count[idx] >= 0) {
      frontier.erase(FrontierKey{entry_count[idx], path_of(s), s});
      entry_count[idx] = -1;
    }
    if (!alive[idx] || red[idx]) return;
    int p = parent[idx];
    if (p < 0 || !red[static_cast<std::size_t>(p)]) return;
    frontier.insert(FrontierKey{states[idx].incoming, path_of(s), s});
    entry_count[idx] = states[idx].incoming;
  }

  // Recursive ALERGIA compatibility on (red-side, blue-side) pairs. The blue
  // side strictly descends its subtree, which is always tree-shaped.
  bool compatible(int x, int y) const {
    if (x == y) return true;
    const CountState& sx = states[static_cast<std::size_t>(x)];
    const CountState& sy = states[static_cast<std::size_t>(y)];
    if (!hoeffding_compatible(sx.incoming, sx.final_count, sy.incoming, sy.final_count, alpha)) {
      return false;
    }
    auto ix = sx.transitions.begin();
    auto iy = sy.transitions.begin();
    while (ix != sx.transitions.end() || iy != sy.transitions.end()) {
      std::int64_t cx = 0, cy = 0;
      if (iy == sy.transitions.end() || (ix != sx.transitions.end() && ix->first < iy->first)) {
        cx = ix->second.second;
        ++ix;
      } else if (ix == sx.transitions.end() || iy->first < ix->first) {
        cy = iy->second.second;
        ++iy;
      } else {
        cx = ix->second.second;
        cy = iy->second.second;
        ++ix;
        ++iy;
      }
      if (!hoeffding_compatible(sx.incoming, cx, sy.incoming, cy, alpha)) return false;
    }
    for (const auto& [sym, edge] : sy.transitions) {
      auto it = sx.transitions.find(sym);
      if (it == sx.transitions.end()) continue;
      if (!compatible(it->second.first, edge.first)) return false;
    }
    return true;
  }

  // Folds y into x additively, determinizing by recursive folding; every
  // state whose counts change or that gets re-attached lands in `touched`.
  void fold(int x, int y, std::set<int>& touched) {
    auto yi = static_cast<std::size_t>(y);
    if (entry_count[yi] >= 0) {
      frontier.erase(FrontierKey{entry_count[yi], path_of(y), y});
      entry_count[yi] = -1;
    }
    CountState& sy = states[yi];
    states[static_cast<std::size_t>(x)].incoming += sy.incoming;
    states[static_cast<std::size_t>(x)].final_count += sy.final_count;
    touched.insert(x);
    auto moved = std::move(sy.transitions);
    sy.transitions.clear();
    alive[yi] = false;
    for (const auto& [sym, edge] : moved) {
      auto& sx_trans = states[static_cast<std::size_t>(x)].transitions;
      auto it = sx_trans.find(sym);
      if (it == sx_trans.end()) {
        sx_trans.emplace(sym, edge);
        parent[static_cast<std::size_t>(edge.first)] = x;
        in_symbol[static_cast<std::size_t>(edge.first)] = sym;
        touched.insert(edge.first);
      } else {
        it->second.second += edge.second;
        if (it->second.first != edge.first) fold(it->second.first, edge.first, touched);
      }
    }
  }
};

}  // namespace

CountGraph merge_states(const CountGraph& fpta, double alpha, std::int64_t min_count,
                        const std::function<void(const CountGraph&)>& observer) {
  MergeState ctx;
  ctx.states = fpta.states;
  ctx.alive.assign(ctx.states.size(), true);
  ctx.red.assign(ctx.states.size(), false);
  ctx.red_path.resize(ctx.states.size());
  ctx.parent.assign(ctx.states.size(), -1);
  ctx.in_symbol.assign(ctx.states.size(), -1);
  ctx.entry_count.assign(ctx.states.size(), -1);
  ctx.alpha = alpha;
  for (std::size_t s = 0; s < ctx.states.size(); ++s) {
    for (const auto& [sym, edge] : ctx.states[s].transitions) {
      ctx.parent[static_cast<std::size_t>(edge.first)] = static_cast<int>(s);
      ctx.in_symbol[static_cast<std::size_t>(edge.first)] = sym;
    }
  }
  ctx.red[static_cast<std::size_t>(fpta.root)] = true;
  ctx.red_order.push_back(fpta.root);
  for (const auto& [sym, edge] : ctx.states[static_cast<std::size_t>(fpta.root)].transitions) {
    ctx.refresh(edge.first);
  }

  auto snapshot = [&]() {
    CountGraph g;
    g.alphabet = fpta.alphabet;
    g.trace_count = fpta.trace_count;
    g.states = ctx.states;
    g.root = fpta.root;
    // dead states keep zeroed counts; conservation is checked on live ones
    for (std::size_t i = 0; i < g.states.size(); ++i) {
      if (!ctx.alive[i]) g.states[i] = CountState{};
    }
    return g;
  };

  while (!ctx.frontier.empty()) {
    auto best = *ctx.frontier.begin();
    int blue = best.state;
    auto bi = static_cast<std::size_t>(blue);
    // a frontier entry is refreshed whenever a fold changes its state
    assert(ctx.states[bi].incoming == best.count);

    bool merged = false;
    if (best.count >= min_count) {
      for (int r : ctx.red_order) {
        if (!ctx.compatible(r, blue)) continue;
        int parent_red = ctx.parent[bi];
        ctx.states[static_cast<std::size_t>(parent_red)]
            .transitions[ctx.in_symbol[bi]]
            .first = r;
        std::set<int> touched;
        ctx.fold(r, blue, touched);
        for (int s : touched) ctx.refresh(s);
        merged = true;
        if (observer) observer(snapshot());
        break;
      }
    }
    if (!merged) {
      // low evidence or no compatible red state: promote
      ctx.frontier.erase(best);
      ctx.entry_count[bi] = -1;
      ctx.red[bi] = true;
      ctx.red_order.push_back(blue);
      ctx.red_path[bi] = std::move(best.path);
      for (const auto& [sym, edge] : ctx.states[bi].transitions) ctx.refresh(edge.first);
    }
  }

  // Compact to root-reachable live states, breadth-first by ascending symbol.
  CountGraph out;
  out.alphabet = fpta.alphabet;
  out.trace_count = fpta.trace_count;
  std::vector<int> remap(ctx.states.size(), -1);
  std::deque<int> queue{fpta.root};
  remap[static_cast<std::size_t>(fpta.root)] = 0;
  out.states.emplace_back();
  while (!queue.empty()) {
    int old = queue.front();
    queue.pop_front();
    for (const auto& [sym, edge] : ctx.states[static_cast<std::size_t>(old)].transitions) {
      if (remap[static_cast<std::size_t>(edge.first)] >= 0) continue;
      remap[static_cast<std::size_t>(edge.first)] = static_cast<int>(out.states.size());
      out.states.emplace_back();
      queue.push_back(edge.first);
    }
  }
  for (std::size_t i = 0; i < ctx.states.size(); ++i) {
    if (remap[i] < 0) continue;
    CountState& dst = out.states[static_cast<std::size_t>(remap[i])];
    dst.incoming = ctx.states[i].incoming;
    dst.final_count = ctx.states[i].final_count;
    for (const auto& [sym, edge] : ctx.states[i].transitions) {
      dst.transitions[sym] = {remap[static_cast<std::size_t>(edge.first)], edge.second};
    }
  }
  return out;
}

int Automaton::symbol_id(const std::string& symbol) const {
  auto it = std::lower_bound(alphabet.begin(), alphabet.end(), symbol);
  if (it == alphabet.end() || *it != symbol) return -1;
  return static_cast<int>(it - alphabet.begin());
}

double Automaton::emission(int state, int symbol) const {
  const State& s = states[static_cast<std::size_t>(state)];
  auto it = s.transitions.find(symbol);
  std::int64_t c = it == s.transitions.end() ? 0 : it->second.second;
  double denom = static_cast<double>(s.total) +
                 epsilon * static_cast<double>(alphabet.size() + 1);
  return (static_cast<double>(c) + epsilon) / denom;
}

double Automaton::termination(int state) const {
  const State& s = states[static_cast<std::size_t>(state)];
  double denom = static_cast<double>(s.total) +
                 epsilon * static_cast<double>(alphabet.size() + 1);
  return (static_cast<double>(s.final_count) + epsilon) / denom;
}

double Automaton::floor_probability(int state) const {
  const State& s = states[static_cast<std::size_t>(state)];
  double denom = static_cast<double>(s.total) +
                 epsilon * static_cast<double>(alphabet.size() + 1);
  return epsilon / denom;
}

Automaton finalize(const CountGraph& merged, double epsilon) {
  if (epsilon < 0.0) throw std::invalid_argument("finalize: epsilon must be >= 0");
  Automaton a;
  a.alphabet = merged.alphabet;
  a.root = merged.root;
  a.epsilon = epsilon;
  a.states.reserve(merged.states.size());
  for (const CountState& s : merged.states) {
    Automaton::State st;
    st.total = s.outgoing_total() + s.final_count;
    st.final_count = s.final_count;
    st.transitions = s.transitions;
    a.states.push_back(std::move(st));
  }
  return a;
}

TraceScore score_trace(const Automaton& automaton, const Trace& trace) {
  // keeps every score finite even with epsilon = 0
  constexpr double kMinProbability = 1e-300;

  TraceScore score;
  score.connection = trace.connection;
  score.start_index = trace.start_index;
  score.malicious = trace.malicious;

  int state = automaton.root;
  double nll = 0.0;
  for (const Symbol& sym : trace.symbols) {
    int id = automaton.symbol_id(sym);
    double p = id < 0 ? automaton.floor_probability(state) : automaton.emission(state, id);
    nll -= std::log(std::max(p, kMinProbability));

    const Automaton::State& s = automaton.states[static_cast<std::size_t>(state)];
    auto it = id < 0 ? s.transitions.end() : s.transitions.find(id);
    state = it == s.transitions.end() ? automaton.root : it->second.first;
  }
  score.nll = nll;
  return score;
}

std::vector<TraceScore> score_traces(const Automaton& automaton,
                                     const std::vector<Trace>& traces) {
  std::vector<TraceScore> scores;
  scores.reserve(traces.size());
  for (const Trace& t : traces) scores.push_back(score_trace(automaton, t));
  return scores;
}

nlohmann::ordered_json Automaton::to_json() const {
  nlohmann::ordered_json j;
  j["score_metadata"] = "per-trace score is the negative log-likelihood (natural log); "
                        "higher means less probable";
  j["epsilon"] = epsilon;
  j["root"] = root;
  j["alphabet"] = alphabet;
  nlohmann::ordered_json states_json = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < states.size(); ++i) {
    const State& s = states[i];
    nlohmann::ordered_json sj;
    sj["id"] = i;
    sj["total"] = s.total;
    sj["final"] = s.final_count;
    nlohmann::ordered_json trans = nlohmann::ordered_json::array();
    for (const auto& [sym, edge] : s.transitions) {
      trans.push_back({alphabet[static_cast<std::size_t>(sym)], edge.first, edge.second});
    }
    sj["transitions"] = std::move(trans);
    states_json.push_back(std::move(sj));
  }
  j["states"] = std::move(states_json);
  return j;
}

Automaton Automaton::from_json(const nlohmann::json& j) {
  Automaton a;
  a.epsilon = j.at("epsilon").get<double>();
  a.root = j.at("root").get<int>();
  a.alphabet = j.at("alphabet").get<std::vector<std::string>>();
  for (const auto& sj : j.at("states")) {
    State s;
    s.total = sj.at("total").get<std::int64_t>();
    s.final_count = sj.at("final").get<std::int64_t>();
    for (const auto& t : sj.at("transitions")) {
      int id = a.symbol_id(t.at(0).get<std::string>());
      if (id < 0) throw DataError("automaton transition over unknown symbol");
      s.transitions[id] = {t.at(1).get<int>(), t.at(2).get<std::int64_t>()};
    }
    a.states.push_back(std::move(s));
  }
  return a;
}

std::string Automaton::to_dot() const {
  std::ostringstream out;
  out << "digraph automaton {\n  rankdir=LR;\n";
  for (std::size_t i = 0; i < states.size(); ++i) {
    out << "  s" << i << " [label=\"" << i << "\\nT=" << states[i].total
        << " F=" << states[i].final_count << "\"";
    if (static_cast<int>(i) == root) out << " shape=doublecircle";
    out << "];\n";
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (const auto& [sym, edge] : states[i].transitions) {
      out << "  s" << i << " -> s" << edge.first << " [label=\""
          << alphabet[static_cast<std::size_t>(sym)] << ":" << edge.second << "\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace flowsm
