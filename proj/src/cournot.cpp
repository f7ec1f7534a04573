#include "gamelab/cournot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gamelab/error.hpp"

namespace gamelab::cournot {

namespace {

constexpr double kTieRel = 1e-12;

void require_shape(const Eigen::MatrixXd& mat, int rows, int cols, const char* name) {
  if (mat.rows() != rows || mat.cols() != cols) {
    std::ostringstream os;
    os << "cournot: " << name << " must be " << rows << "x" << cols << ", got " << mat.rows()
       << "x" << mat.cols();
    throw Error(ErrorKind::Dimension, os.str());
  }
}

void require_allocation(const Market& market, const Allocation& a) {
  if (static_cast<int>(a.Y.size()) != market.m) {
    throw Error(ErrorKind::Dimension, "cournot: allocation must have one block per selling site");
  }
  for (const auto& block : a.Y) {
    require_shape(block, market.K, market.L, "allocation block");
    if ((block.array() < 0.0).any() || !block.allFinite()) {
      throw Error(ErrorKind::Domain, "cournot: allocations must be finite and nonnegative");
    }
  }
}

struct Cheapest {
  int site = 0;
  double cost = 0.0;
  bool tie = false;
};

Cheapest cheapest_site(const Market& market, int i, int k) {
  Cheapest best{0, market.unit_cost(i, k, 0), false};
  for (int l = 1; l < market.L; ++l) {
    const double cost = market.unit_cost(i, k, l);
    if (cost < best.cost) best = {l, cost, false};
  }
  const double slack = kTieRel * std::max(1.0, std::abs(best.cost));
  for (int l = 0; l < market.L; ++l) {
    if (l != best.site && market.unit_cost(i, k, l) <= best.cost + slack) best.tie = true;
  }
  return best;
}

}  // namespace

void Market::validate() const {
  if (m < 1 || K < 1 || L < 1) throw Error(ErrorKind::Dimension, "cournot: m, K, L must be >= 1");
  require_shape(alpha, m, K, "alpha");
  require_shape(beta, m, K, "beta");
  require_shape(p, K, L, "p");
  if (static_cast<int>(xi.size()) != m) {
    throw Error(ErrorKind::Dimension, "cournot: xi must have one K x L block per selling site");
  }
  for (const auto& block : xi) {
    require_shape(block, K, L, "xi block");
    if ((block.array() < 0.0).any() || !block.allFinite()) {
      throw Error(ErrorKind::Domain, "cournot: xi must be finite and nonnegative");
    }
  }
  if (!((alpha.array() > 0.0).all() && (beta.array() > 0.0).all() && alpha.allFinite() &&
        beta.allFinite())) {
    throw Error(ErrorKind::Domain, "cournot: alpha and beta must be positive");
  }
  if ((p.array() < 0.0).any() || !p.allFinite()) {
    throw Error(ErrorKind::Domain, "cournot: p must be finite and nonnegative");
  }
}

double Market::unit_cost(int i, int k, int l) const { return xi[i](k, l) + p(k, l); }

Allocation Allocation::zeros(const Market& market) {
  return {std::vector<Eigen::MatrixXd>(market.m, Eigen::MatrixXd::Zero(market.K, market.L))};
}

double Allocation::at_site(int i, int k) const { return Y[i].row(k).sum(); }

double distance(const Allocation& a, const Allocation& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.Y.size(); ++i) {
    d = std::max(d, (a.Y[i] - b.Y[i]).cwiseAbs().maxCoeff());
  }
  return d;
}

double payoff_ik(const Market& market, const Allocation& own, const Allocation& other, int i,
                 int k) {
  const double mine = own.at_site(i, k);
  const double total = mine + other.at_site(i, k);
  const double alpha = market.alpha(i, k);
  if (total > alpha * (1.0 + kTieRel)) {
    std::ostringstream os;
    os << "cournot: oversupply at site " << i << ", product " << k << " (" << total << " > "
       << alpha << ")";
    throw Error(ErrorKind::Domain, os.str());
  }
  double h = mine * (1.0 - total / alpha) * market.beta(i, k);
  for (int l = 0; l < market.L; ++l) h -= own.Y[i](k, l) * market.unit_cost(i, k, l);
  return h;
}

double payoff(const Market& market, const Allocation& own, const Allocation& other) {
  market.validate();
  require_allocation(market, own);
  require_allocation(market, other);
  double h = 0.0;
  for (int i = 0; i < market.m; ++i) {
    for (int k = 0; k < market.K; ++k) h += payoff_ik(market, own, other, i, k);
  }
  return h;
}

Reply best_reply(const Market& market, const Allocation& other) {
  market.validate();
  require_allocation(market, other);
  Reply reply{Allocation::zeros(market), {}};
  for (int i = 0; i < market.m; ++i) {
    for (int k = 0; k < market.K; ++k) {
      const Cheapest q = cheapest_site(market, i, k);
      if (q.tie) reply.multiple_minimizers.emplace_back(i, k);
      const double alpha = market.alpha(i, k);
      const double y = 0.5 * alpha * (1.0 - other.at_site(i, k) / alpha - q.cost / market.beta(i, k));
      reply.allocation.Y[i](k, q.site) = std::max(0.0, y);
    }
  }
  return reply;
}

Reply symmetric_equilibrium(const Market& market) {
  market.validate();
  Reply eq{Allocation::zeros(market), {}};
  for (int i = 0; i < market.m; ++i) {
    for (int k = 0; k < market.K; ++k) {
      const Cheapest q = cheapest_site(market, i, k);
      if (q.tie) eq.multiple_minimizers.emplace_back(i, k);
      const double y = market.alpha(i, k) * (1.0 - q.cost / market.beta(i, k)) / 3.0;
      eq.allocation.Y[i](k, q.site) = std::max(0.0, y);
    }
  }
  return eq;
}

IterationResult best_response_iteration(const Market& market, const Allocation& start,
                                        int iters) {
  if (iters < 1) throw Error(ErrorKind::Domain, "cournot: iters must be >= 1");
  const Allocation eq = symmetric_equilibrium(market).allocation;
  IterationResult out{start, {}};
  out.distances.reserve(iters);
  for (int t = 0; t < iters; ++t) {
    out.final = best_reply(market, out.final).allocation;
    out.distances.push_back(distance(out.final, eq));
  }
  return out;
}

}  // namespace gamelab::cournot
