#include "gamelab/bimatrix.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace gamelab::bimatrix {

namespace {

// Advantage coefficients below this fraction of the payoff scale are exact ties.
constexpr double kTieRelative = 1e-12;
constexpr double kValueRelative = 1e-10;

struct Interval {
  double lo = 0.0, hi = 1.0;
  bool lo_open = false, hi_open = false;

  bool empty() const { return lo > hi || (lo == hi && (lo_open || hi_open)); }
};

Interval intersect(const Interval& p, const Interval& q) {
  Interval r;
  if (p.lo > q.lo) {
    r.lo = p.lo;
    r.lo_open = p.lo_open;
  } else if (q.lo > p.lo) {
    r.lo = q.lo;
    r.lo_open = q.lo_open;
  } else {
    r.lo = p.lo;
    r.lo_open = p.lo_open || q.lo_open;
  }
  if (p.hi < q.hi) {
    r.hi = p.hi;
    r.hi_open = p.hi_open;
  } else if (q.hi < p.hi) {
    r.hi = q.hi;
    r.hi_open = q.hi_open;
  } else {
    r.hi = p.hi;
    r.hi_open = p.hi_open || q.hi_open;
  }
  return r;
}

// One cell of a best-response correspondence: while the opponent's mixture
// lies in `domain`, the player's best replies form `reply`.
struct Piece {
  Interval domain;
  Interval reply;
};

Interval point(double t) { return {t, t, false, false}; }

// Pieces for a player whose advantage of action 1 over action 2 is
// offset + slope * t, t being the opponent's probability of action 1.
std::vector<Piece> best_response_pieces(double offset, double slope, double tol) {
  auto reply_for = [](double sign) { return sign > 0 ? point(1.0) : point(0.0); };
  const Interval full{0.0, 1.0, false, false};
  if (std::abs(slope) <= tol) {
    if (std::abs(offset) <= tol) return {{full, full}};
    return {{full, reply_for(offset)}};
  }
  const double root = -offset / slope;
  if (root <= 0.0 || root >= 1.0) {
    const bool near0 = std::abs(root) <= tol, near1 = std::abs(root - 1.0) <= tol;
    if (!near0 && !near1) {
      const double mid = offset + 0.5 * slope;
      return {{full, reply_for(mid)}};
    }
  }
  const double t0 = std::clamp(root, 0.0, 1.0);
  std::vector<Piece> pieces;
  // Sign below and above the root follows the slope.
  const Interval below{0.0, t0, false, true};
  const Interval above{t0, 1.0, true, false};
  if (!below.empty()) pieces.push_back({below, reply_for(-slope)});
  pieces.push_back({point(t0), full});
  if (!above.empty()) pieces.push_back({above, reply_for(slope)});
  return pieces;
}

bool boxes_touch(const StrategyBox& p, const StrategyBox& q) {
  constexpr double eps = 1e-14;
  return p.x_lo <= q.x_hi + eps && q.x_lo <= p.x_hi + eps && p.y_lo <= q.y_hi + eps &&
         q.y_lo <= p.y_hi + eps;
}

bool is_vertex(double t) { return t == 0.0 || t == 1.0; }

}  // namespace

BimatrixGame2x2 BimatrixGame2x2::from_cells(double a11, double b11, double a12, double b12,
                                            double a21, double b21, double a22, double b22) {
  BimatrixGame2x2 g;
  g.a << a11, a12, a21, a22;
  g.b << b11, b12, b21, b22;
  return g;
}

const char* to_string(EquilibriumKind kind) {
  switch (kind) {
    case EquilibriumKind::Pure: return "pure";
    case EquilibriumKind::Mixed: return "mixed";
    case EquilibriumKind::Component: return "component";
  }
  return "unknown";
}

PayoffPair expected_payoffs(const BimatrixGame2x2& g, double x, double y) {
  const Eigen::Vector2d row(x, 1.0 - x), col(y, 1.0 - y);
  return {row.dot(g.a * col), row.dot(g.b * col)};
}

double max_deviation_gain(const BimatrixGame2x2& g, double x, double y) {
  const PayoffPair current = expected_payoffs(g, x, y);
  double gain = 0.0;
  for (double pure : {0.0, 1.0}) {
    gain = std::max(gain, expected_payoffs(g, pure, y).u - current.u);
    gain = std::max(gain, expected_payoffs(g, x, pure).v - current.v);
  }
  return gain;
}

std::vector<Equilibrium2x2> enumerate_equilibria(const BimatrixGame2x2& g) {
  const double scale =
      std::max({1.0, g.a.cwiseAbs().maxCoeff(), g.b.cwiseAbs().maxCoeff()});
  const double tol = kTieRelative * scale;

  // Row advantage of row 1 as a function of y; column advantage of column 1 as a function of x.
  const double row_offset = g.a(0, 1) - g.a(1, 1);
  const double row_slope = (g.a(0, 0) - g.a(1, 0)) - row_offset;
  const double col_offset = g.b(1, 0) - g.b(1, 1);
  const double col_slope = (g.b(0, 0) - g.b(0, 1)) - col_offset;

  const auto row_pieces = best_response_pieces(row_offset, row_slope, tol);  // domain y, reply x
  const auto col_pieces = best_response_pieces(col_offset, col_slope, tol);  // domain x, reply y

  std::vector<StrategyBox> boxes;
  for (const auto& rp : row_pieces) {
    for (const auto& cp : col_pieces) {
      const Interval xs = intersect(rp.reply, cp.domain);
      const Interval ys = intersect(rp.domain, cp.reply);
      if (xs.empty() || ys.empty()) continue;
      boxes.push_back({xs.lo, xs.hi, ys.lo, ys.hi});
    }
  }

  // Union-find over touching boxes gives the connected components.
  std::vector<std::size_t> parent(boxes.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j)
      if (boxes_touch(boxes[i], boxes[j])) parent[find(i)] = find(j);

  std::vector<std::vector<StrategyBox>> groups;
  std::vector<std::size_t> root_of;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const std::size_t r = find(i);
    auto it = std::find(root_of.begin(), root_of.end(), r);
    if (it == root_of.end()) {
      root_of.push_back(r);
      groups.push_back({boxes[i]});
    } else {
      groups[static_cast<std::size_t>(it - root_of.begin())].push_back(boxes[i]);
    }
  }

  std::vector<Equilibrium2x2> out;
  for (auto& group : groups) {
    std::sort(group.begin(), group.end(), [](const StrategyBox& p, const StrategyBox& q) {
      return std::tie(p.x_lo, p.y_lo, p.x_hi, p.y_hi) < std::tie(q.x_lo, q.y_lo, q.x_hi, q.y_hi);
    });
    Equilibrium2x2 eq;
    const StrategyBox& first = group.front();
    const bool single_point = group.size() == 1 && first.x_lo == first.x_hi &&
                              first.y_lo == first.y_hi;
    eq.x = first.x_lo;
    eq.y = first.y_lo;
    eq.payoffs = expected_payoffs(g, eq.x, eq.y);
    if (single_point) {
      eq.kind = is_vertex(eq.x) && is_vertex(eq.y) ? EquilibriumKind::Pure
                                                   : EquilibriumKind::Mixed;
      eq.payoff_min = eq.payoff_max = eq.payoffs;
    } else {
      eq.kind = EquilibriumKind::Component;
      eq.payoff_min = eq.payoff_max = eq.payoffs;
      for (const auto& box : group) {
        for (double x : {box.x_lo, box.x_hi}) {
          for (double y : {box.y_lo, box.y_hi}) {
            const PayoffPair p = expected_payoffs(g, x, y);
            eq.payoff_min.u = std::min(eq.payoff_min.u, p.u);
            eq.payoff_min.v = std::min(eq.payoff_min.v, p.v);
            eq.payoff_max.u = std::max(eq.payoff_max.u, p.u);
            eq.payoff_max.v = std::max(eq.payoff_max.v, p.v);
          }
        }
      }
      eq.boxes = group;
    }
    out.push_back(std::move(eq));
  }
  std::sort(out.begin(), out.end(), [](const Equilibrium2x2& p, const Equilibrium2x2& q) {
    return std::tie(p.x, p.y) > std::tie(q.x, q.y);
  });
  return out;
}

std::optional<PayoffPair> game_value(const BimatrixGame2x2& g) {
  const auto eqs = enumerate_equilibria(g);
  if (eqs.empty()) return std::nullopt;
  const double scale =
      std::max({1.0, g.a.cwiseAbs().maxCoeff(), g.b.cwiseAbs().maxCoeff()});
  const double tol = kValueRelative * scale;
  const PayoffPair ref = eqs.front().payoffs;
  for (const auto& eq : eqs) {
    for (const PayoffPair& p : {eq.payoff_min, eq.payoff_max}) {
      if (std::abs(p.u - ref.u) > tol || std::abs(p.v - ref.v) > tol) return std::nullopt;
    }
  }
  return ref;
}

}  // namespace gamelab::bimatrix
