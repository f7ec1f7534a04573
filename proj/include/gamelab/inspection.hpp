#pragma once

// Multi-step "stop to abuses" inspection game: a trespasser may violate at
// most k times, the inspector may check at most m times, over n steps. Solved
// by backward recursion over 2x2 stage games.

#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "gamelab/bimatrix.hpp"

namespace gamelab::inspection {

struct InspectionParams {
  double p = 0.5;  // detection probability
  double f = 1.0;  // fine
  double r = 1.0;  // legal income
  double s = 1.0;  // illegal surplus
  double c = 0.1;  // cost of a check
  double l = 1.0;  // inspector's loss from an undetected violation

  /// Throws Error(Domain) unless all parameters are positive, p <= 1 and c < p*l.
  void validate() const;
};

/// Continuation values after the current step, indexed by the stage outcome.
struct Continuations {
  bimatrix::PayoffPair break_check;    // (k-1, m-1)
  bimatrix::PayoffPair break_rest;     // (k-1, m)
  bimatrix::PayoffPair refrain_check;  // (k, m-1)
  bimatrix::PayoffPair refrain_rest;   // (k, m)
};

/// Stage bimatrix; row 1 = Break, row 2 = Refrain, column 1 = Check, column 2 = Rest.
bimatrix::BimatrixGame2x2 stage_matrix(const InspectionParams& params, const Continuations& cont);

struct Thresholds {
  double s1 = 0.0;
  double s2 = 0.0;
};

/// Surplus thresholds separating the equilibrium regimes; absent when p = 1.
std::optional<Thresholds> thresholds(double p, double f, double r);
std::optional<Thresholds> thresholds(const InspectionParams& params);

enum class EntryStatus { Valued, Ambiguous };

struct ValueEntry {
  bimatrix::PayoffPair value;
  EntryStatus status = EntryStatus::Valued;
  // Stage equilibrium (x = P(break), y = P(check)) when the entry came from a
  // stage game rather than a boundary condition.
  std::optional<bimatrix::Equilibrium2x2> stage;
};

using StateKey = std::tuple<int, int, int>;  // (k, m, n)

struct ValueTable {
  std::map<StateKey, ValueEntry> entries;

  /// Entry for (k, m, n) after the truncation k' = min(k, n), m' = min(m, n).
  const ValueEntry& at(int k, int m, int n) const;
};

inline constexpr int kMaxHorizon = 30;

/// Backward recursion for Gamma_{k,m}(n). With memoize = false every state is
/// recomputed from scratch (exponential; only for cross-checks at small n).
ValueTable solve(const InspectionParams& params, int k, int m, int n, bool memoize = true);

struct DiagonalStep {
  int n = 0;
  double U = 0.0;
  double V = 0.0;
  EntryStatus status = EntryStatus::Valued;
  std::optional<bimatrix::Equilibrium2x2> stage;  // equilibrium of M_n
};

/// Matrix M_n of the diagonal game Gamma_{n,n}(n) given (U_{n-1}, V_{n-1}).
bimatrix::BimatrixGame2x2 diagonal_matrix(const InspectionParams& params, double U_prev,
                                          double V_prev);

/// (U_j, V_j) for j = 1..n via (U_j, V_j) = (U_{j-1}, V_{j-1}) + Val M_j.
std::vector<DiagonalStep> solve_diagonal(const InspectionParams& params, int n);

}  // namespace gamelab::inspection
