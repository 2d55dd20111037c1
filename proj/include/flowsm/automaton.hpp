#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowsm/trace.hpp"

namespace flowsm {

struct CountState {
  std::int64_t incoming = 0;     // traces entering this state
  std::int64_t final_count = 0;  // traces ending here
  // symbol id -> (target state, traversal count)
  std::map<int, std::pair<int, std::int64_t>> transitions;

  std::int64_t outgoing_total() const;
  std::int64_t transition_count(int symbol) const;
};

/// Frequency-annotated state graph. build_fpta produces the tree-shaped
/// instance; merge_states produces the general graph. State 0 is the root.
/// Invariant at every state: sum of transition counts + final = incoming.
struct CountGraph {
  std::vector<std::string> alphabet;  // sorted; symbol id = index
  std::vector<CountState> states;
  int root = 0;
  std::int64_t trace_count = 0;

  int symbol_id(const std::string& symbol) const;  // -1 when unknown
  bool conservation_holds() const;
};

/// Frequency prefix tree acceptor over the trace multiset.
/// Throws std::invalid_argument on an empty trace set.
CountGraph build_fpta(const std::vector<Trace>& traces);

/// ALERGIA test: true iff |f1/n1 - f2/n2| < sqrt(0.5*ln(2/alpha)) * (1/sqrt(n1) + 1/sqrt(n2)).
/// Throws std::invalid_argument on precondition violations.
bool hoeffding_compatible(std::int64_t n1, std::int64_t f1, std::int64_t n2, std::int64_t f2,
                          double alpha);

/// Red-blue state merging. Blue states are processed by (count desc, access
/// path lexicographic); a blue state with incoming count < min_count is
/// promoted untested; otherwise it merges into the first compatible red
/// state (promotion order), where compatibility runs hoeffding_compatible on
/// the termination ratio and every alphabet symbol's emission ratio,
/// recursively over reachable state pairs. Merging folds counts additively
/// and determinizes by recursive folding. The result is compacted to
/// root-reachable states in breadth-first order.
/// `observer`, when set, is called after every individual merge fold.
CountGraph merge_states(const CountGraph& fpta, double alpha, std::int64_t min_count,
                        const std::function<void(const CountGraph&)>& observer = nullptr);

/// Probabilistic automaton with additive smoothing. With per-state total T
/// (= incoming) and alphabet size A: emission(s) = (count(s)+eps)/(T+eps*(A+1)),
/// termination = (final+eps)/(T+eps*(A+1)); probabilities sum to 1.
class Automaton {
 public:
  struct State {
    std::int64_t total = 0;
    std::int64_t final_count = 0;
    std::map<int, std::pair<int, std::int64_t>> transitions;
  };

  std::vector<std::string> alphabet;
  std::vector<State> states;
  int root = 0;
  double epsilon = 0.5;

  int symbol_id(const std::string& symbol) const;
  double emission(int state, int symbol) const;
  double termination(int state) const;
  /// Probability assigned to a symbol outside the alphabet.
  double floor_probability(int state) const;
  std::size_t state_count() const { return states.size(); }

  nlohmann::ordered_json to_json() const;
  static Automaton from_json(const nlohmann::json& j);
  std::string to_dot() const;
};

Automaton finalize(const CountGraph& merged, double epsilon);

struct TraceScore {
  ConnectionKey connection;
  std::size_t start_index = 0;
  bool malicious = false;
  double nll = 0.0;  // negative log-likelihood, natural log; always finite
};

/// Walks the trace from the root, accumulating -ln(emission). Symbols outside
/// the alphabet contribute the state's floor probability. When no transition
/// is defined after an emission the walk resets to the root and continues.
/// Termination probability is not added (fixed-length windows). Probabilities
/// are clamped at 1e-300 so the score stays finite even with epsilon = 0.
TraceScore score_trace(const Automaton& automaton, const Trace& trace);

std::vector<TraceScore> score_traces(const Automaton& automaton, const std::vector<Trace>& traces);

}  // namespace flowsm
