#pragma once

// Two-player territorial Cournot competition: m selling sites, K products,
// L production sites. Each (site, product) market has a linear inverse demand
// beta * (1 - Y / alpha), and bringing product k from production site l to
// selling site i costs xi[i](k, l) + p(k, l) per unit.

#include <utility>
#include <vector>

#include <Eigen/Core>

namespace gamelab::cournot {

struct Market {
  int m = 0;
  int K = 0;
  int L = 0;
  Eigen::MatrixXd alpha;          // m x K, demand saturation
  Eigen::MatrixXd beta;           // m x K, maximal price
  Eigen::MatrixXd p;              // K x L, production price
  std::vector<Eigen::MatrixXd> xi;  // m entries of K x L, transport cost

  void validate() const;

  /// Unit cost xi[i](k, l) + p(k, l).
  double unit_cost(int i, int k, int l) const;
};

/// Y[i](k, l): quantity of product k brought to site i from production site l.
struct Allocation {
  std::vector<Eigen::MatrixXd> Y;

  static Allocation zeros(const Market& market);

  /// Total quantity of product k at site i.
  double at_site(int i, int k) const;
};

/// Largest absolute difference between two allocations of the same shape.
double distance(const Allocation& a, const Allocation& b);

/// Income of the owner of `own` when the opponent plays `other`.
double payoff(const Market& market, const Allocation& own, const Allocation& other);

/// Income from the single market (i, k).
double payoff_ik(const Market& market, const Allocation& own, const Allocation& other, int i,
                 int k);

struct Reply {
  Allocation allocation;
  // (i, k) markets whose cheapest production site is not unique; the mass is
  // then placed at the lowest-indexed cheapest site.
  std::vector<std::pair<int, int>> multiple_minimizers;
};

Reply best_reply(const Market& market, const Allocation& other);

Reply symmetric_equilibrium(const Market& market);

struct IterationResult {
  Allocation final;
  std::vector<double> distances;  // distance to the symmetric equilibrium after each reply
};

/// Alternating best replies starting from `start`. Each entry of `distances`
/// is measured after one reply.
IterationResult best_response_iteration(const Market& market, const Allocation& start, int iters);

}  // namespace gamelab::cournot
