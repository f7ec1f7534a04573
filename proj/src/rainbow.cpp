#include "gamelab/rainbow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "gamelab/error.hpp"
#include "gamelab/numerics.hpp"

namespace gamelab::rainbow {

namespace {

bool has_bit(unsigned mask, int i) { return (mask >> i) & 1u; }

// Calls fn(subset) for every k-subset of {0..m-1}, in lexicographic order.
template <typename Fn>
void for_each_subset(int m, int k, Fn fn) {
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == m - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

MatrixXd with_ones_row(const MatrixXd& xis) {
  MatrixXd m(xis.rows() + 1, xis.cols());
  m.row(0).setOnes();
  m.bottomRows(xis.rows()) = xis;
  return m;
}

double degeneracy_scale(const MatrixXd& xis) {
  const double s = std::max(1.0, xis.cwiseAbs().maxCoeff());
  return std::pow(s, static_cast<double>(xis.rows()));
}

// Cofactor formula; returns an empty vector when |C| is below tolerance.
VectorXd cofactor_law(const MatrixXd& xis) {
  const int d = static_cast<int>(xis.rows());
  const double C = numerics::det(with_ones_row(xis));
  if (std::abs(C) <= kGeneralPositionTol * degeneracy_scale(xis)) return {};
  VectorXd p(d + 1);
  for (int i = 0; i <= d; ++i) {
    MatrixXd minor(d, d);
    for (int c = 0, col = 0; c <= d; ++c) {
      if (c == i) continue;
      minor.col(col++) = xis.col(c);
    }
    p(i) = ((i % 2 == 0) ? 1.0 : -1.0) * numerics::det(minor) / C;
  }
  return p;
}

std::vector<double> vertex_values(const Model& model, const Payoff& f, const VectorXd& z) {
  std::vector<double> F(model.vertex_count());
  for (int I = 0; I < model.vertex_count(); ++I) {
    F[I] = f(VectorXd(model.vertex(I).cwiseProduct(z)));
  }
  return F;
}

struct Best {
  double value = -std::numeric_limits<double>::infinity();  // undiscounted
  std::size_t law = 0;
  bool tie = false;
};

Best best_law(const ExtremeLaws& laws, const std::vector<double>& F) {
  Best b;
  std::vector<double> e(laws.laws.size());
  for (std::size_t l = 0; l < laws.laws.size(); ++l) {
    const auto& law = laws.laws[l];
    double s = 0.0;
    for (std::size_t k = 0; k < law.support.size(); ++k) s += law.probs(k) * F[law.support[k]];
    e[l] = s;
    if (s > b.value) {
      b.value = s;
      b.law = l;
    }
  }
  const double slack = 1e-12 * std::max(1.0, std::abs(b.value));
  int count = 0;
  for (double v : e) count += (v >= b.value - slack);
  b.tie = count > 1;
  return b;
}

// gamma equalizing F_I - (gamma, eta_I) over the support of the chosen law.
VectorXd equalizing_gamma(const Model& model, const RiskNeutralLaw& law,
                          const std::vector<double>& F, const VectorXd& z) {
  const int J = model.J;
  MatrixXd A(J + 1, J + 1);
  VectorXd rhs(J + 1);
  for (int r = 0; r <= J; ++r) {
    const unsigned I = law.support[r];
    A.row(r).head(J) = (model.vertex(I).cwiseProduct(z) - model.rho * z).transpose();
    A(r, J) = 1.0;
    rhs(r) = F[I];
  }
  return numerics::solve_linear(A, rhs).head(J);
}

void require_convex(const Payoff& f) {
  if (!f.convex) {
    throw Error(ErrorKind::NonConvex,
                "rainbow: payoff is not flagged convex; the extreme-law formula does not apply");
  }
}

void require_positive(const Model& model, const VectorXd& z, const char* what) {
  if (z.size() != model.J) throw Error(ErrorKind::Dimension, std::string(what) + ": wrong price dimension");
  if (!z.allFinite() || (z.array() <= 0.0).any()) {
    throw Error(ErrorKind::Domain, std::string(what) + ": prices must be positive");
  }
}

}  // namespace

void Model::validate() const {
  if (J < 1) throw Error(ErrorKind::Domain, "rainbow: J must be >= 1");
  if (J > kMaxAssets) throw Error(ErrorKind::Unsupported, "rainbow: at most 3 assets are supported");
  if (d.size() != J || u.size() != J) throw Error(ErrorKind::Dimension, "rainbow: d and u need J entries");
  if (!std::isfinite(rho) || rho < 1.0) throw Error(ErrorKind::Domain, "rainbow: rho must be >= 1");
  for (int i = 0; i < J; ++i) {
    if (!(d(i) > 0.0) || !(d(i) < rho) || !(rho < u(i)) || !std::isfinite(u(i))) {
      throw Error(ErrorKind::Domain, "rainbow: need 0 < d_i < rho < u_i");
    }
  }
}

VectorXd Model::vertex(unsigned mask) const {
  VectorXd xi(J);
  for (int i = 0; i < J; ++i) xi(i) = has_bit(mask, i) ? d(i) : u(i);
  return xi;
}

const char* to_string(PayoffKind k) {
  switch (k) {
    case PayoffKind::BestOf: return "best-of";
    case PayoffKind::CallOnMax: return "call-on-max";
    case PayoffKind::MultiStrike: return "multi-strike";
    case PayoffKind::Portfolio: return "portfolio";
    case PayoffKind::Spread: return "spread";
    case PayoffKind::Custom: return "custom";
  }
  return "custom";
}

double Payoff::operator()(const VectorXd& s) const {
  if (J > 0 && s.size() != J) throw Error(ErrorKind::Dimension, "payoff: wrong number of assets");
  return eval(s);
}

Payoff make_payoff(const PayoffSpec& desc) {
  Payoff p;
  p.convex = true;
  const double K = desc.K;
  if (K < 0.0 || std::any_of(desc.strikes.begin(), desc.strikes.end(), [](double k) { return k < 0.0; })) {
    throw Error(ErrorKind::Construction, "make_payoff: strikes must be >= 0");
  }
  if (desc.kind == "best-of") {
    p.kind = PayoffKind::BestOf;
    p.eval = [K](const VectorXd& s) { return std::max(s.maxCoeff(), K); };
  } else if (desc.kind == "call-on-max") {
    p.kind = PayoffKind::CallOnMax;
    p.eval = [K](const VectorXd& s) { return std::max(0.0, s.maxCoeff() - K); };
  } else if (desc.kind == "multi-strike") {
    if (desc.strikes.empty()) throw Error(ErrorKind::Construction, "make_payoff: multi-strike needs strikes");
    p.kind = PayoffKind::MultiStrike;
    p.J = static_cast<int>(desc.strikes.size());
    const VectorXd Ks = Eigen::Map<const VectorXd>(desc.strikes.data(), p.J);
    p.eval = [Ks](const VectorXd& s) { return std::max(0.0, (s - Ks).maxCoeff()); };
  } else if (desc.kind == "portfolio") {
    if (desc.weights.empty()) throw Error(ErrorKind::Construction, "make_payoff: portfolio needs weights");
    p.kind = PayoffKind::Portfolio;
    p.J = static_cast<int>(desc.weights.size());
    const VectorXd w = Eigen::Map<const VectorXd>(desc.weights.data(), p.J);
    p.eval = [w, K](const VectorXd& s) { return std::max(0.0, w.dot(s) - K); };
  } else if (desc.kind == "spread") {
    p.kind = PayoffKind::Spread;
    p.J = 2;
    p.eval = [K](const VectorXd& s) { return std::max(0.0, (s(1) - s(0)) - K); };
  } else {
    throw Error(ErrorKind::Construction, "make_payoff: unknown payoff kind '" + desc.kind + "'");
  }
  return p;
}

Payoff custom_payoff(int J, std::function<double(const VectorXd&)> eval, bool convex, double lo,
                     double hi, int draws, std::uint64_t seed) {
  if (J < 1 || !eval) throw Error(ErrorKind::Construction, "custom_payoff: need J >= 1 and an evaluator");
  Payoff p;
  p.kind = PayoffKind::Custom;
  p.J = J;
  p.convex = convex;
  p.eval = std::move(eval);
  if (convex) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pick(lo, hi);
    for (int t = 0; t < draws; ++t) {
      VectorXd a(J), b(J);
      for (int i = 0; i < J; ++i) {
        a(i) = pick(rng);
        b(i) = pick(rng);
      }
      const double fa = p.eval(a), fb = p.eval(b);
      const double fm = p.eval(VectorXd(0.5 * (a + b)));
      const double slack = 1e-9 * std::max({1.0, std::abs(fa), std::abs(fb)});
      if (fm > 0.5 * (fa + fb) + slack) {
        throw Error(ErrorKind::NonConvex, "custom_payoff: midpoint test failed, payoff is not convex");
      }
    }
  }
  return p;
}

double wealth_update(const Model& model, double X_prev, const VectorXd& gamma,
                     const VectorXd& S_prev, const VectorXd& xi) {
  model.validate();
  if (gamma.size() != model.J || S_prev.size() != model.J || xi.size() != model.J) {
    throw Error(ErrorKind::Dimension, "wealth_update: vectors need J entries");
  }
  for (int i = 0; i < model.J; ++i) {
    if (xi(i) < model.d(i) - 1e-12 || xi(i) > model.u(i) + 1e-12) {
      throw Error(ErrorKind::Domain, "wealth_update: multiplier outside [d_i, u_i]");
    }
  }
  const VectorXd held = gamma.cwiseProduct(S_prev);
  return held.dot(xi) + model.rho * (X_prev - held.sum());
}

VectorXd simplex_law(const MatrixXd& xis) {
  if (xis.cols() != xis.rows() + 1 || xis.rows() < 1) {
    throw Error(ErrorKind::Dimension, "simplex_law: need d + 1 vectors in R^d");
  }
  if (!xis.allFinite()) throw Error(ErrorKind::Domain, "simplex_law: non-finite input");
  const VectorXd p = cofactor_law(xis);
  if (p.size() == 0) throw Error(ErrorKind::GeneralPosition, "simplex_law: vectors are not in general position");
  if ((p.array() <= 0.0).any()) {
    throw Error(ErrorKind::NotPositivelyComplete, "simplex_law: vectors are not positively complete");
  }
  return p;
}

ExtremeLaws extreme_laws(const Model& model) {
  model.validate();
  const int J = model.J;
  const int V = model.vertex_count();
  MatrixXd eta(J, V);
  for (int I = 0; I < V; ++I) eta.col(I) = model.vertex(I).array() - model.rho;

  ExtremeLaws out;
  int dependent = 0;
  for_each_subset(V, J, [&](const std::vector<int>& idx) {
    MatrixXd m(J, J);
    for (int k = 0; k < J; ++k) m.col(k) = eta.col(idx[k]);
    if (std::abs(numerics::det(m)) <= kGeneralPositionTol * degeneracy_scale(m)) ++dependent;
  });
  if (dependent > 0) {
    std::ostringstream os;
    os << "general position fails: " << dependent << " sets of " << J
       << " shifted vertices are linearly dependent";
    out.warnings.push_back(os.str());
  }

  for_each_subset(V, J + 1, [&](const std::vector<int>& idx) {
    MatrixXd xis(J, J + 1);
    for (int k = 0; k <= J; ++k) xis.col(k) = eta.col(idx[k]);
    const VectorXd p = cofactor_law(xis);
    if (p.size() == 0) {
      ++out.excluded_degenerate;
      return;
    }
    if ((p.array() <= 1e-12).any()) return;
    RiskNeutralLaw law;
    for (int k : idx) law.support.push_back(static_cast<unsigned>(k));
    law.probs = p;
    out.laws.push_back(std::move(law));
  });
  if (out.excluded_degenerate > 0) {
    std::ostringstream os;
    os << "degenerate: " << out.excluded_degenerate << " vertex subsets excluded (|C| below tolerance)";
    out.warnings.push_back(os.str());
  }
  if (out.laws.empty()) {
    throw Error(ErrorKind::GeneralPosition, "extreme_laws: no eligible vertex subset");
  }
  return out;
}

double reduced_bellman(const Model& model, const ExtremeLaws& laws, const Payoff& f,
                       const VectorXd& z) {
  require_convex(f);
  require_positive(model, z, "reduced_bellman");
  return best_law(laws, vertex_values(model, f, z)).value / model.rho;
}

double reduced_bellman(const Model& model, const Payoff& f, const VectorXd& z) {
  return reduced_bellman(model, extreme_laws(model), f, z);
}

HedgeStrategy hedging_strategy(const Model& model, const Payoff& f, const VectorXd& z) {
  require_convex(f);
  const ExtremeLaws laws = extreme_laws(model);
  require_positive(model, z, "hedging_strategy");
  const std::vector<double> F = vertex_values(model, f, z);
  const Best b = best_law(laws, F);
  HedgeStrategy hs;
  hs.value = b.value / model.rho;
  hs.tie = b.tie;
  hs.gamma = equalizing_gamma(model, laws.laws[b.law], F, z);
  hs.max_excess = -std::numeric_limits<double>::infinity();
  for (int I = 0; I < model.vertex_count(); ++I) {
    const VectorXd eta = model.vertex(I).cwiseProduct(z) - model.rho * z;
    hs.max_excess = std::max(hs.max_excess, F[I] - hs.gamma.dot(eta));
  }
  return hs;
}

HedgeResult hedge(const Model& model, const Payoff& f, const VectorXd& S0, int n, bool record_nodes,
                  std::size_t max_nodes) {
  require_convex(f);
  const ExtremeLaws laws = extreme_laws(model);
  require_positive(model, S0, "hedge");
  if (n < 0) throw Error(ErrorKind::Domain, "hedge: n must be >= 0");
  const int J = model.J;
  double top = 1.0;
  for (int i = 0; i < J; ++i) top *= n + 1;
  if (top > static_cast<double>(max_nodes)) {
    std::ostringstream os;
    os << "hedge: lattice of " << top << " nodes exceeds the budget of " << max_nodes;
    throw Error(ErrorKind::Size, os.str());
  }

  auto decode = [J](std::size_t idx, int m) {
    std::vector<int> k(J);
    for (int i = 0; i < J; ++i) {
      k[i] = static_cast<int>(idx % (m + 1));
      idx /= (m + 1);
    }
    return k;
  };
  auto encode = [J](const std::vector<int>& k, int m) {
    std::size_t idx = 0;
    for (int i = J - 1; i >= 0; --i) idx = idx * (m + 1) + k[i];
    return idx;
  };
  auto price_at = [&](const std::vector<int>& k, int m) {
    VectorXd s(J);
    for (int i = 0; i < J; ++i) {
      s(i) = S0(i) * std::pow(model.d(i), k[i]) * std::pow(model.u(i), m - k[i]);
    }
    return s;
  };
  auto count = [J](int m) {
    std::size_t c = 1;
    for (int i = 0; i < J; ++i) c *= m + 1;
    return c;
  };

  HedgeResult res;
  res.eligible_laws = static_cast<int>(laws.laws.size());
  res.warnings = laws.warnings;
  std::vector<std::vector<LatticeNode>> recorded(record_nodes ? n + 1 : 0);

  std::vector<double> next(count(n));
  for (std::size_t idx = 0; idx < next.size(); ++idx) {
    const auto k = decode(idx, n);
    const VectorXd s = price_at(k, n);
    next[idx] = f(s);
    if (record_nodes) recorded[n].push_back({n, k, s, next[idx], VectorXd(), false});
  }
  for (int m = n - 1; m >= 0; --m) {
    std::vector<double> cur(count(m));
    for (std::size_t idx = 0; idx < cur.size(); ++idx) {
      const auto k = decode(idx, m);
      std::vector<double> F(model.vertex_count());
      for (int I = 0; I < model.vertex_count(); ++I) {
        std::vector<int> child = k;
        for (int i = 0; i < J; ++i) child[i] += has_bit(static_cast<unsigned>(I), i);
        F[I] = next[encode(child, m + 1)];
      }
      const Best b = best_law(laws, F);
      cur[idx] = b.value / model.rho;
      if (record_nodes) {
        const VectorXd s = price_at(k, m);
        recorded[m].push_back({m, k, s, cur[idx], equalizing_gamma(model, laws.laws[b.law], F, s), b.tie});
      }
    }
    next = std::move(cur);
  }
  res.price = next[0];
  for (auto& step : recorded) {
    for (auto& node : step) res.nodes.push_back(std::move(node));
  }
  return res;
}

double hedge_price(const Model& model, const Payoff& f, const VectorXd& S0, int n,
                   std::size_t max_nodes) {
  return hedge(model, f, S0, n, false, max_nodes).price;
}

double PowerApprox::power(const VectorXd& z) const {
  double v = 1.0;
  for (std::size_t i = 0; i < exponents.size(); ++i) v *= std::pow(z(static_cast<Eigen::Index>(i)), exponents[i]);
  return v;
}

double PowerApprox::predict(const Model& model, int n, const VectorXd& z) const {
  return alpha * std::pow(model.rho, -n) + beta * std::pow(lambda, n) * power(z);
}

PowerApprox power_approx(const Payoff& f, const std::vector<VectorXd>& domain, const Model& model,
                         int max_exponent) {
  const ExtremeLaws laws = extreme_laws(model);
  if (domain.empty()) throw Error(ErrorKind::Domain, "power_approx: empty fit domain");
  if (max_exponent < 1) throw Error(ErrorKind::Domain, "power_approx: max_exponent must be >= 1");
  for (const auto& z : domain) require_positive(model, z, "power_approx");
  const int J = model.J;
  const std::size_t N = domain.size();
  VectorXd fv(N);
  for (std::size_t t = 0; t < N; ++t) fv(t) = f(domain[t]);

  PowerApprox best;
  best.eps = std::numeric_limits<double>::infinity();
  std::vector<int> k(J, 0);
  while (true) {
    // Advance to the next exponent vector; the zero vector is skipped.
    int i = 0;
    while (i < J && k[i] == max_exponent) k[i++] = 0;
    if (i == J) break;
    ++k[i];

    PowerApprox cand;
    cand.exponents = k;
    VectorXd pv(N);
    for (std::size_t t = 0; t < N; ++t) pv(t) = cand.power(domain[t]);
    const double pm = pv.mean(), fm = fv.mean();
    const double var = (pv.array() - pm).square().sum();
    if (!(var > 0.0)) continue;
    cand.beta = ((pv.array() - pm) * (fv.array() - fm)).sum() / var;
    if (!(cand.beta > 0.0)) continue;
    cand.alpha = fm - cand.beta * pm;
    cand.eps = (fv.array() - cand.alpha - cand.beta * pv.array()).abs().maxCoeff();
    if (cand.eps < best.eps) best = cand;
  }
  if (!std::isfinite(best.eps)) {
    throw Error(ErrorKind::Construction, "power_approx: no power function with positive weight fits");
  }
  std::vector<double> F(model.vertex_count());
  for (int I = 0; I < model.vertex_count(); ++I) F[I] = best.power(model.vertex(I));
  best.lambda = best_law(laws, F).value / model.rho;
  return best;
}

}  // namespace gamelab::rainbow
