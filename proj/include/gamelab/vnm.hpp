#pragma once

// Epsilon-solutions (von Neumann-Morgenstern stable sets) of finite NTU
// cooperative games. Points of H and subsets of H are referred to by index.

#include <map>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace gamelab::vnm {

using Coalition = std::vector<int>;  // sorted 0-based player indices
using Subset = std::vector<int>;     // sorted indices into H

struct NTUGame {
  int n_players = 0;
  std::vector<Eigen::VectorXd> H;
  std::map<Coalition, std::vector<int>> v;  // coalition -> indices of attainable points

  void validate() const;

  /// Index of `point` in H (exact match); throws Error(Domain) when absent.
  int index_of(const Eigen::VectorXd& point) const;
};

inline constexpr std::size_t kMaxPoints = 20;

/// L(x, y): best guaranteed margin of x over y among coalitions effective for
/// both; -infinity when there is none. L > 0 iff x dominates y.
double dominance(const NTUGame& game, int x, int y);
double dominance(const NTUGame& game, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

bool is_internally_stable(const NTUGame& game, const Subset& A);

/// min over y outside the eps-neighbourhood of A of max over x in A of L(x, y);
/// +infinity when nothing lies outside. The neighbourhood uses squared
/// distance < eps.
double criterion_value(const NTUGame& game, const Subset& A, double eps);

struct SolutionCandidate {
  Subset A;
  double epsilon = 0.0;
  double criterion_value = 0.0;
  bool internally_stable = false;
};

/// Internally stable subset with the largest positive criterion (ties: fewer
/// points, then lexicographically smallest indices), or nothing.
std::optional<SolutionCandidate> find_epsilon_solution(const NTUGame& game, double eps);

/// Every internally stable subset, in order of increasing bitmask.
std::vector<Subset> internally_stable_subsets(const NTUGame& game);

}  // namespace gamelab::vnm
