#include "gamelab/replicator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gamelab/error.hpp"

namespace gamelab::replicator {

namespace {

constexpr double kProbTol = 1e-9;

// Digits of a row-major profile index, first player first.
std::vector<int> decode(std::size_t index, const std::vector<int>& counts) {
  std::vector<int> digits(counts.size());
  for (std::size_t k = counts.size(); k-- > 0;) {
    digits[k] = static_cast<int>(index % counts[k]);
    index /= counts[k];
  }
  return digits;
}

void check_sigma(const GeneralGame& game, const MixedStrategies& sigma) {
  if (sigma.size() != game.counts.size()) {
    throw Error(ErrorKind::Dimension, "replicator: one mixed strategy per player expected");
  }
  for (std::size_t j = 0; j < sigma.size(); ++j) {
    if (sigma[j].size() != game.counts[j]) {
      throw Error(ErrorKind::Dimension, "replicator: mixed strategy has the wrong length");
    }
    if (!sigma[j].allFinite() || (sigma[j].array() < -kProbTol).any() ||
        std::abs(sigma[j].sum() - 1.0) > kProbTol) {
      std::ostringstream os;
      os << "replicator: strategy of player " << j + 1 << " is not a probability vector";
      throw Error(ErrorKind::Domain, os.str());
    }
  }
}

// Profile index of the two-action game where players in `ones` play action 1
// (digit 0) and the others action 2 (digit 1).
std::size_t two_action_index(int n, unsigned ones) {
  std::size_t idx = 0;
  for (int k = 0; k < n; ++k) idx = idx * 2 + ((ones >> k) & 1u ? 0 : 1);
  return idx;
}

// prod_{k in I} x_k prod_{k not in I, k not in skip} (1 - x_k)
double weight(const Eigen::VectorXd& x, unsigned I, unsigned skip) {
  double w = 1.0;
  for (int k = 0; k < x.size(); ++k) {
    if ((skip >> k) & 1u) continue;
    w *= ((I >> k) & 1u) ? x(k) : 1.0 - x(k);
  }
  return w;
}

double coeff_scale(const ReducedCoeffs3& rc) {
  const double vals[] = {rc.a, rc.A2, rc.A3, rc.A, rc.b, rc.B1, rc.B3, rc.B,
                         rc.c, rc.C1, rc.C2, rc.C};
  double s = 0.0;
  for (double v : vals) s = std::max(s, std::abs(v));
  return s;
}

Eigen::Vector3d residual3(const ReducedCoeffs3& rc, const Eigen::Vector3d& p) {
  const double x = p(0), y = p(1), z = p(2);
  return {rc.a + rc.A2 * y + rc.A3 * z + rc.A * y * z,
          rc.b + rc.B1 * x + rc.B3 * z + rc.B * x * z,
          rc.c + rc.C1 * x + rc.C2 * y + rc.C * x * y};
}

bool inside(double t) { return t > 0.0 && t < 1.0; }

}  // namespace

void GeneralGame::validate() const {
  if (counts.empty()) throw Error(ErrorKind::Domain, "replicator: at least one player required");
  for (int c : counts) {
    if (c < 1) throw Error(ErrorKind::Domain, "replicator: every player needs a strategy");
  }
  if (payoffs.size() != counts.size()) {
    throw Error(ErrorKind::Dimension, "replicator: one payoff table per player expected");
  }
  for (const auto& table : payoffs) {
    if (table.size() != profiles()) {
      throw Error(ErrorKind::Dimension, "replicator: payoff table does not cover every profile");
    }
    for (double v : table) {
      if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "replicator: payoffs must be finite");
    }
  }
}

std::size_t GeneralGame::profiles() const {
  std::size_t n = 1;
  for (int c : counts) n *= static_cast<std::size_t>(c);
  return n;
}

Eigen::VectorXd mixed_payoff(const GeneralGame& game, const MixedStrategies& sigma) {
  game.validate();
  check_sigma(game, sigma);
  const std::size_t m = game.counts.size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t p = 0; p < game.profiles(); ++p) {
    const auto d = decode(p, game.counts);
    double w = 1.0;
    for (std::size_t k = 0; k < m; ++k) w *= sigma[k](d[k]);
    if (w == 0.0) continue;
    for (std::size_t j = 0; j < m; ++j) out(j) += w * game.payoffs[j][p];
  }
  return out;
}

MixedStrategies rd_field(const GeneralGame& game, const MixedStrategies& sigma) {
  game.validate();
  check_sigma(game, sigma);
  const std::size_t m = game.counts.size();
  // pure[j](i): payoff to j from pure strategy i against sigma_{-j}.
  MixedStrategies pure(m);
  for (std::size_t j = 0; j < m; ++j) pure[j] = Eigen::VectorXd::Zero(game.counts[j]);
  for (std::size_t p = 0; p < game.profiles(); ++p) {
    const auto d = decode(p, game.counts);
    for (std::size_t j = 0; j < m; ++j) {
      double w = 1.0;
      for (std::size_t k = 0; k < m; ++k) {
        if (k != j) w *= sigma[k](d[k]);
      }
      pure[j](d[j]) += w * game.payoffs[j][p];
    }
  }
  MixedStrategies out(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double avg = sigma[j].dot(pure[j]);
    out[j] = sigma[j].cwiseProduct((pure[j].array() - avg).matrix());
  }
  return out;
}

void TwoActionGame::validate() const {
  if (n < 1 || n > kMaxTwoActionPlayers) {
    throw Error(ErrorKind::Domain, "replicator: two-action games need 1 <= n <= 12 players");
  }
  if (static_cast<int>(A.size()) != n) {
    throw Error(ErrorKind::Dimension, "replicator: one payoff tensor per player expected");
  }
  for (const auto& t : A) {
    if (t.size() != (std::size_t{1} << n)) {
      throw Error(ErrorKind::Dimension, "replicator: payoff tensor must have 2^n entries");
    }
    for (double v : t) {
      if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "replicator: payoffs must be finite");
    }
  }
}

GeneralGame TwoActionGame::to_general() const {
  validate();
  return {std::vector<int>(n, 2), A};
}

Reduced reduced_coeffs(const TwoActionGame& game) {
  game.validate();
  const int n = game.n;
  const unsigned full = (1u << n);
  Reduced red{n, std::vector<std::vector<double>>(n, std::vector<double>(full, 0.0))};
  for (int i = 0; i < n; ++i) {
    const unsigned bit = 1u << i;
    for (unsigned I = 0; I < full; ++I) {
      if (I & bit) continue;
      red.tilde[i][I] =
          game.A[i][two_action_index(n, I | bit)] - game.A[i][two_action_index(n, I)];
    }
  }
  return red;
}

ReducedCoeffs3 Reduced::coeffs3() const {
  if (n != 3) throw Error(ErrorKind::Dimension, "replicator: explicit coefficients need n = 3");
  // Player bits: 1 -> x (player 1), 2 -> y (player 2), 4 -> z (player 3).
  ReducedCoeffs3 rc;
  const auto& t1 = tilde[0];
  rc.a = t1[0];
  rc.A2 = t1[2] - rc.a;
  rc.A3 = t1[4] - rc.a;
  rc.A = t1[6] - rc.a - rc.A2 - rc.A3;
  const auto& t2 = tilde[1];
  rc.b = t2[0];
  rc.B1 = t2[1] - rc.b;
  rc.B3 = t2[4] - rc.b;
  rc.B = t2[5] - rc.b - rc.B1 - rc.B3;
  const auto& t3 = tilde[2];
  rc.c = t3[0];
  rc.C1 = t3[1] - rc.c;
  rc.C2 = t3[2] - rc.c;
  rc.C = t3[3] - rc.c - rc.C1 - rc.C2;
  return rc;
}

TwoActionGame game_from_coeffs(const ReducedCoeffs3& rc) {
  // Action 2 pays 0; action 1 pays the reduced difference.
  TwoActionGame g{3, std::vector<std::vector<double>>(3, std::vector<double>(8, 0.0))};
  auto set = [&](int i, unsigned others, double value) {
    g.A[i][two_action_index(3, others | (1u << i))] = value;
  };
  set(0, 0, rc.a);
  set(0, 2, rc.a + rc.A2);
  set(0, 4, rc.a + rc.A3);
  set(0, 6, rc.a + rc.A2 + rc.A3 + rc.A);
  set(1, 0, rc.b);
  set(1, 1, rc.b + rc.B1);
  set(1, 4, rc.b + rc.B3);
  set(1, 5, rc.b + rc.B1 + rc.B3 + rc.B);
  set(2, 0, rc.c);
  set(2, 1, rc.c + rc.C1);
  set(2, 2, rc.c + rc.C2);
  set(2, 3, rc.c + rc.C1 + rc.C2 + rc.C);
  return g;
}

Eigen::VectorXd two_action_field(const Reduced& red, const Eigen::VectorXd& x) {
  if (x.size() != red.n) throw Error(ErrorKind::Dimension, "replicator: state has the wrong length");
  const unsigned full = 1u << red.n;
  Eigen::VectorXd out(red.n);
  for (int i = 0; i < red.n; ++i) {
    const unsigned bit = 1u << i;
    double s = 0.0;
    for (unsigned I = 0; I < full; ++I) {
      if (!(I & bit)) s += red.tilde[i][I] * weight(x, I, bit);
    }
    out(i) = x(i) * (1.0 - x(i)) * s;
  }
  return out;
}

Eigen::Vector3d field3(const ReducedCoeffs3& rc, const Eigen::Vector3d& p) {
  const Eigen::Vector3d r = residual3(rc, p);
  return {p(0) * (1 - p(0)) * r(0), p(1) * (1 - p(1)) * r(1), p(2) * (1 - p(2)) * r(2)};
}

Eigen::MatrixXd jacobian(const Reduced& red, const Eigen::VectorXd& x) {
  if (x.size() != red.n) throw Error(ErrorKind::Dimension, "replicator: state has the wrong length");
  const unsigned full = 1u << red.n;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(red.n, red.n);
  for (int i = 0; i < red.n; ++i) {
    for (int j = 0; j < red.n; ++j) {
      if (i == j) continue;
      const unsigned skip = (1u << i) | (1u << j);
      double s = 0.0;
      for (unsigned I = 0; I < full; ++I) {
        if (I & skip) continue;
        s += (red.tilde[i][I | (1u << j)] - red.tilde[i][I]) * weight(x, I, skip);
      }
      J(i, j) = x(i) * (1.0 - x(i)) * s;
    }
  }
  return J;
}

Eigen::Matrix3d jacobian3(const ReducedCoeffs3& rc, const Eigen::Vector3d& p) {
  const double x = p(0), y = p(1), z = p(2);
  const double sx = x * (1 - x), sy = y * (1 - y), sz = z * (1 - z);
  Eigen::Matrix3d J;
  J << 0.0, sx * (rc.A2 + rc.A * z), sx * (rc.A3 + rc.A * y),
       sy * (rc.B1 + rc.B * z), 0.0, sy * (rc.B3 + rc.B * x),
       sz * (rc.C1 + rc.C * y), sz * (rc.C2 + rc.C * x), 0.0;
  return J;
}

Eigen::Vector3d quadratic3(const ReducedCoeffs3& r) {
  const double w = r.a * r.C2 * r.B3 + r.c * r.b * r.A - r.b * r.A3 * r.C2 - r.c * r.A2 * r.B3;
  const double v = r.a * r.B * r.C + r.A * r.B1 * r.C1 - r.B * r.A2 * r.C1 - r.C * r.A3 * r.B1;
  const double u = r.a * (r.B * r.C2 + r.C * r.B3) + r.b * (r.A * r.C1 - r.C * r.A3) +
                   r.c * (r.A * r.B1 - r.B * r.A2) - r.A2 * r.B3 * r.C1 - r.A3 * r.B1 * r.C2;
  return {v, u, w};
}

InteriorEquilibria interior_equilibria_3(const ReducedCoeffs3& rc) {
  InteriorEquilibria out;
  const double scale = std::max(coeff_scale(rc), 1e-300);
  const double zero3 = 1e-12 * scale * scale * scale;
  const double zero1 = 1e-12 * scale;
  const Eigen::Vector3d q = quadratic3(rc);
  const double v = q(0), u = q(1), w = q(2);

  // y and z from the second and third equations. When one of them does not
  // involve its variable at this x, that variable comes from the first
  // equation instead. nullopt when the point is not determined, lies outside
  // the open cube or fails the residual check.
  auto complete = [&](double x, bool quiet) -> std::optional<Eigen::Vector3d> {
    auto skip = [&](const char* why) -> std::optional<Eigen::Vector3d> {
      if (!quiet) {
        std::ostringstream os;
        os << why << " at x=" << x << "; root skipped";
        out.notes.push_back(os.str());
      }
      return std::nullopt;
    };
    const double dz = rc.B3 + rc.B * x, dy = rc.C2 + rc.C * x;
    const bool has_z = std::abs(dz) > zero1, has_y = std::abs(dy) > zero1;
    double y = 0.0, z = 0.0;
    if (has_z && has_y) {
      y = -(rc.c + rc.C1 * x) / dy;
      z = -(rc.b + rc.B1 * x) / dz;
    } else if (has_y) {
      y = -(rc.c + rc.C1 * x) / dy;
      const double d = rc.A3 + rc.A * y;
      if (std::abs(d) <= zero1) return skip("equilibria not isolated");
      z = -(rc.a + rc.A2 * y) / d;
    } else if (has_z) {
      z = -(rc.b + rc.B1 * x) / dz;
      const double d = rc.A2 + rc.A * z;
      if (std::abs(d) <= zero1) return skip("equilibria not isolated");
      y = -(rc.a + rc.A3 * z) / d;
    } else {
      return skip("equilibria not isolated");
    }
    const Eigen::Vector3d p(x, y, z);
    if (!inside(p(0)) || !inside(p(1)) || !inside(p(2))) return std::nullopt;
    if (residual3(rc, p).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, scale)) return std::nullopt;
    return p;
  };

  std::vector<double> roots;
  if (std::abs(v) <= zero3 && std::abs(u) <= zero3) {
    if (std::abs(w) > zero3) {
      out.notes.push_back("quadratic degenerates to a nonzero constant: no interior equilibrium");
      return out;
    }
    out.continuum = true;
    out.notes.push_back("v = u = w = 0: interior equilibria form a continuum");
    constexpr int kGrid = 2000;
    int first = -1, last = -1;
    for (int g = 1; g < kGrid; ++g) {
      const bool ok = complete(static_cast<double>(g) / kGrid, true).has_value();
      if (ok && first < 0) first = g;
      if (ok) last = g;
      if (!ok && first >= 0) break;
    }
    if (first >= 0) {
      if (auto p = complete(0.5 * (first + last) / kGrid, true)) out.points.push_back(*p);
    }
    return out;
  }
  if (std::abs(v) <= zero3) {
    roots.push_back(-w / u);
  } else {
    const double disc = u * u - 4.0 * v * w;
    const double tol = 1e-12 * std::max(u * u, std::abs(4.0 * v * w));
    if (disc < -tol) return out;
    const double sq = disc > tol ? std::sqrt(disc) : 0.0;
    // Numerically stable pair of roots.
    const double t = -0.5 * (u + std::copysign(sq, u == 0.0 ? 1.0 : u));
    if (t != 0.0) {
      roots.push_back(t / v);
      roots.push_back(w / t);
    } else {
      roots.push_back(0.0);
    }
  }
  std::sort(roots.begin(), roots.end());
  for (double x : roots) {
    if (!inside(x)) continue;
    if (auto p = complete(x, false)) {
      const bool dup = !out.points.empty() && (out.points.back() - *p).norm() <= 1e-12;
      if (!dup) out.points.push_back(*p);
    }
  }
  return out;
}

const char* to_string(Stability s) {
  return s == Stability::Unstable ? "unstable" : "degenerate-inconclusive";
}

StabilityReport classify_stability(const Eigen::MatrixXd& j) {
  numerics::require_square(j, "classify_stability");
  const double scale = j.size() ? std::max(1.0, j.cwiseAbs().maxCoeff()) : 1.0;
  if (j.size() && j.diagonal().cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorKind::Contract, "classify_stability: Jacobian must have a zero diagonal");
  }
  StabilityReport rep;
  rep.eigenvalues = numerics::eigenvalues(j);
  std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end(),
            [](const std::complex<double>& l, const std::complex<double>& r) {
              return l.real() != r.real() ? l.real() > r.real() : l.imag() > r.imag();
            });
  rep.verdict = Stability::DegenerateInconclusive;
  for (const auto& ev : rep.eigenvalues) {
    if (std::abs(ev.real()) > kRealPartTol) rep.verdict = Stability::Unstable;
  }
  if (j.rows() % 2 == 1) rep.det = numerics::det(j);
  return rep;
}

DegeneracyInvariants degeneracy_invariants(const ReducedCoeffs3& rc, const Eigen::Vector3d& p) {
  const double x = p(0), y = p(1), z = p(2);
  DegeneracyInvariants out;
  out.det_condition = (rc.A2 + rc.A * z) * (rc.B3 + rc.B * x) * (rc.C1 + rc.C * y) +
                      (rc.B1 + rc.B * z) * (rc.C2 + rc.C * x) * (rc.A3 + rc.A * y);
  const Eigen::Vector3d q = quadratic3(rc);
  out.discriminant = q(1) * q(1) - 4.0 * q(0) * q(2);
  return out;
}

const char* to_string(IntegralVerdict v) {
  return v == IntegralVerdict::NeutrallyStable ? "neutrally-stable"
                                               : "conserved-integral-stability-inconclusive";
}

double FirstIntegral::operator()(const Eigen::Vector3d& x) const {
  double v = 0.0;
  for (int k = 0; k < 3; ++k) {
    v += coef(k) * (x_star(k) * std::log(x(k)) + (1.0 - x_star(k)) * std::log(1.0 - x(k)));
  }
  return v;
}

std::optional<FirstIntegral> first_integral_3(const ReducedCoeffs3& rc,
                                              const Eigen::Vector3d& p) {
  const auto inv = degeneracy_invariants(rc, p);
  if (std::abs(inv.det_condition) > kIntegralTol) {
    std::ostringstream os;
    os << "first_integral_3: determinant condition fails (" << inv.det_condition << ")";
    throw Error(ErrorKind::Contract, os.str());
  }
  const double lhs = rc.A * rc.B1 * rc.C1 + rc.a * rc.B * rc.C;
  const double rhs = rc.B * rc.A2 * rc.C1 + rc.C * rc.A3 * rc.B1;
  if (std::abs(lhs - rhs) > kIntegralTol) return std::nullopt;
  const double y = p(1), z = p(2);
  FirstIntegral fi;
  fi.x_star = p;
  fi.coef << (rc.B1 + rc.B * z) * (rc.C1 + rc.C * y), -(rc.A2 + rc.A * z) * (rc.C1 + rc.C * y),
      -(rc.A3 + rc.A * y) * (rc.B1 + rc.B * z);
  // Each entropy block has a strict maximum at x*, so V is locally definite
  // exactly when all three weights are nonzero and share a sign.
  const bool pos = (fi.coef.array() > 1e-12).all();
  const bool neg = (fi.coef.array() < -1e-12).all();
  fi.verdict = (pos || neg) ? IntegralVerdict::NeutrallyStable
                            : IntegralVerdict::ConservedInconclusive;
  return fi;
}

numerics::Trajectory<double> simulate(const Reduced& red, const Eigen::VectorXd& x0,
                                      double t_end, double dt, std::size_t record_every) {
  if (x0.size() != red.n || (x0.array() < 0.0).any() || (x0.array() > 1.0).any()) {
    throw Error(ErrorKind::Domain, "replicator: initial state must lie in [0,1]^n");
  }
  const numerics::VectorField<double> field = [&red](const Eigen::VectorXd& x) {
    return two_action_field(red, x);
  };
  return numerics::integrate_rk4<double>(field, x0, t_end, dt, record_every);
}

}  // namespace gamelab::replicator
