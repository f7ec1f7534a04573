// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gamelab/cournot.hpp"
#include "gamelab/error.hpp"
#include "gamelab/inspection.hpp"
#include "gamelab/nlmarkov.hpp"
#include "gamelab/rainbow.hpp"
#include "gamelab/replicator.hpp"
#include "gamelab/taxgame.hpp"
#include "gamelab/vnm.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace gamelab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class Criterion {
 public:
  Criterion(int id, std::string name) : id_(id), name_(std::move(name)) {}

  void check(bool ok, const std::string& what) {
    ++checks_;
    if (!ok) {
      ++failures_;
      if (failures_ <= 5) detail_ << " [" << what << "]";
    }
  }
  void note(const std::string& s) { notes_ << " " << s; }
  bool report() const {
    std::printf("%s %d %s: %d checks, %d failed;%s%s\n", failures_ == 0 ? "PASS" : "FAIL", id_, name_.c_str(),
                checks_, failures_, notes_.str().c_str(), detail_.str().c_str());
    std::fflush(stdout);
    return failures_ == 0;
  }

 private:
  int id_;
  std::string name_;
  int checks_ = 0;
  int failures_ = 0;
  std::ostringstream detail_;
  std::ostringstream notes_;
};

std::string num(double x) {
  std::ostringstream s;
  s.precision(10);
  s << x;
  return s.str();
}

bool close_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

// Runs `body`, turning an escaped exception into a failed check.
template <typename F>
void guarded(Criterion& c, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    c.check(false, std::string("exception: ") + e.what());
  }
}

// ---- 1. tax ----

bool tax_example() {
  Criterion c(1, "tax example");
  guarded(c, [&] {
    const auto t0 = Clock::now();
    const auto range = taxgame::full_evasion_p_range(1000.0, 100000.0, 0.4);
    const double l1 = taxgame::l1_threshold(1000.0, 0.707, 0.4);
    const double ms = seconds_since(t0) * 1e3;
    c.check(range.has_value(), "range exists");
    if (!range) return;
    c.note("range=[" + num(range->lo) + ", " + num(range->hi) + "] l1(0.707)=" + num(l1) + " t=" + num(ms) + "ms");
    c.check(std::abs(range->lo - 0.00722) <= 5e-6, "lo = 0.00722");
    // 0.70706 is the root truncated to five decimals.
    c.check(std::floor(range->hi * 1e5) / 1e5 == 0.70706, "hi truncates to 0.70706");
    c.check(std::round(range->lo * 1e3) / 1e3 == 0.007, "lo prints as 0.007");
    c.check(std::round(range->hi * 1e3) / 1e3 == 0.707, "hi prints as 0.707");
    c.check(std::abs(l1 - 1010.0) <= 1.0, "l1 = 1010 +- 1");
    c.check(ms < 1.0, "runtime < 1 ms");
  });
  return c.report();
}

// ---- 2. inspection ----

bool inspection_closed_forms() {
  Criterion c(2, "inspection closed forms");
  guarded(c, [&] {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int cases[3] = {0, 0, 0};
    double worst = 0.0;
    const auto t0 = Clock::now();
    for (int t = 0; t < 1000; ++t) {
      inspection::InspectionParams pr;
      pr.p = 0.05 + 0.9 * unit(rng);
      pr.l = 0.2 + 3.0 * unit(rng);
      pr.c = (0.01 + 0.98 * unit(rng)) * pr.p * pr.l;
      pr.f = 0.1 + 3.0 * unit(rng);
      pr.r = 0.1 + 3.0 * unit(rng);
      const double p = pr.p, q = 1 - p, f = pr.f, r = pr.r, c_ = pr.c, l = pr.l;
      // Thresholds of the two-step game, written out.
      const double s1 = p / q * (f + r);
      const double s2 = s1 + p / (q * q) * r;
      pr.s = 1.5 * s2 * unit(rng);
      if (std::abs(pr.s - s1) < 1e-6 || std::abs(pr.s - s2) < 1e-6) pr.s += 1e-3;
      const auto diag = inspection::solve_diagonal(pr, 2);
      auto agree = [&](double got, double want, const std::string& what) {
        worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
        c.check(close_rel(got, want, 1e-12), what + " t=" + std::to_string(t));
      };
      // One step.
      if (pr.s < s1) {
        agree(diag[0].U, r, "U1");
        agree(diag[0].V, -c_ / p, "V1");
      } else {
        agree(diag[0].U, -p * f + q * (r + pr.s), "U1 (B,C)");
        agree(diag[0].V, -(c_ + q * l), "V1 (B,C)");
      }
      if (!diag[1].stage) {
        c.check(false, "stage at n=2");
        continue;
      }
      if (pr.s < s1) {
        ++cases[0];
        agree(diag[1].stage->x, c_ / (p * l + c_), "x case 1");
        agree(diag[1].stage->y, pr.s / (p * (f + 2 * r + pr.s)), "y case 1");
        agree(diag[1].U, 2 * r, "U2 case 1");
        agree(diag[1].V, -c_ * (2 * p * l + c_) / (p * (p * l + c_)), "V2 case 1");
      } else if (pr.s < s2) {
        ++cases[1];
        const double s = pr.s;
        agree(diag[1].stage->x, c_ / (p * (c_ + (1 + q) * l)), "x case 2");
        agree(diag[1].stage->y, s / (p * (q * f + (1 + q) * (r + s))), "y case 2");
        // U1 + r: the trespasser is indifferent in the second stage.
        agree(diag[1].U, r + (-p * f + q * (r + s)), "U2 case 2");
        agree(diag[1].V, -(c_ * l / (p * (c_ + (1 + q) * l)) + c_ + q * l), "V2 case 2");
      } else {
        ++cases[2];
        const double s = pr.s;
        c.check(diag[1].stage->x == 1.0 && diag[1].stage->y == 1.0, "pure (B,C) case 3");
        agree(diag[1].U, (1 + q) * (-p * f + q * (r + s)), "U2 case 3");
        agree(diag[1].V, -(1 + q) * (c_ + q * l), "V2 case 3");
      }
    }
    const double secs = seconds_since(t0);
    c.note("cases=" + std::to_string(cases[0]) + "/" + std::to_string(cases[1]) + "/" + std::to_string(cases[2]) +
           " max rel err=" + num(worst) + " t=" + num(secs) + "s");
    c.check(cases[0] > 50 && cases[1] > 50 && cases[2] > 50, "sweep covers all three cases");
    c.check(secs < 1.0, "runtime < 1 s");
  });
  return c.report();
}

// ---- 3. cournot ----

cournot::Market random_market(std::mt19937_64& rng, int m, int K, int L) {
  std::uniform_real_distribution<double> a(1.0, 20.0), b(2.0, 10.0), cost(0.0, 1.5);
  cournot::Market mk;
  mk.m = m;
  mk.K = K;
  mk.L = L;
  mk.alpha = MatrixXd::NullaryExpr(m, K, [&] { return a(rng); });
  mk.beta = MatrixXd::NullaryExpr(m, K, [&] { return b(rng); });
  mk.p = MatrixXd::NullaryExpr(K, L, [&] { return cost(rng); });
  for (int i = 0; i < m; ++i) mk.xi.push_back(MatrixXd::NullaryExpr(K, L, [&] { return cost(rng); }));
  return mk;
}

double income(const cournot::Market& mk, const cournot::Allocation& own, const cournot::Allocation& other) {
  double h = 0.0;
  for (int i = 0; i < mk.m; ++i) {
    for (int k = 0; k < mk.K; ++k) {
      double mine = 0.0, theirs = 0.0, cost = 0.0;
      for (int l = 0; l < mk.L; ++l) {
        mine += own.Y[i](k, l);
        theirs += other.Y[i](k, l);
        cost += own.Y[i](k, l) * (mk.xi[i](k, l) + mk.p(k, l));
      }
      h += mine * mk.beta(i, k) * (1.0 - (mine + theirs) / mk.alpha(i, k)) - cost;
    }
  }
  return h;
}

bool cournot_markets() {
  Criterion c(3, "cournot equilibrium");
  guarded(c, [&] {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_fp = 0.0, worst_ratio = 0.0, worst_gain = -1.0;
    for (int t = 0; t < 100; ++t) {
      const auto mk = random_market(rng, 1 + t % 3, 1 + t % 2, 1 + t % 4);
      const auto eq = cournot::symmetric_equilibrium(mk).allocation;
      const double fp = cournot::distance(cournot::best_reply(mk, eq).allocation, eq);
      worst_fp = std::max(worst_fp, fp);
      c.check(fp <= 1e-12, "fixed point");

      auto start = cournot::Allocation::zeros(mk);
      for (int i = 0; i < mk.m; ++i)
        for (int k = 0; k < mk.K; ++k) start.Y[i](k, 0) = unit(rng) * mk.alpha(i, k);
      const auto it = cournot::best_response_iteration(mk, start, 40);
      for (std::size_t s = 2; s < it.distances.size(); ++s) {
        if (it.distances[s - 1] < 1e-9) break;
        const double dev = std::abs(it.distances[s] / it.distances[s - 1] - 0.5);
        worst_ratio = std::max(worst_ratio, dev);
        c.check(dev <= 0.01, "ratio 0.5");
      }

      const double h = income(mk, eq, eq);
      for (int i = 0; i < mk.m; ++i) {
        for (int k = 0; k < mk.K; ++k) {
          const double room = mk.alpha(i, k) - eq.at_site(i, k);
          for (int l = 0; l < mk.L; ++l) {
            for (int g = 0; g < 1000; ++g) {
              auto dev = eq;
              dev.Y[i].row(k).setZero();
              dev.Y[i](k, l) = room * g / 999.0;
              worst_gain = std::max(worst_gain, income(mk, dev, eq) - h);
            }
          }
        }
      }
    }
    c.check(worst_gain <= 1e-8, "deviation gain <= 1e-8");
    c.note("max fixed-point gap=" + num(worst_fp) + " max |ratio-0.5|=" + num(worst_ratio) +
           " max deviation gain=" + num(worst_gain));
  });
  return c.report();
}

// ---- 4. vnm ----

bool dominates(const vnm::NTUGame& g, int x, int y) {
  for (const auto& [S, pts] : g.v) {
    const std::set<int> in(pts.begin(), pts.end());
    if (!in.count(x) || !in.count(y)) continue;
    bool all = true;
    for (int i : S) all = all && g.H[x](i) > g.H[y](i);
    if (all) return true;
  }
  return false;
}

bool attainable(const vnm::NTUGame& g, int x) {
  for (const auto& [S, pts] : g.v)
    for (int p : pts)
      if (p == x) return true;
  return false;
}

bool direct_definition(const vnm::NTUGame& g, const vnm::Subset& A, double eps) {
  bool any = false;
  for (int x : A) {
    any = any || attainable(g, x);
    for (int y : A)
      if (dominates(g, x, y)) return false;
  }
  if (!any) return false;
  for (int y = 0; y < static_cast<int>(g.H.size()); ++y) {
    bool near = false, hit = false;
    for (int a : A) near = near || (g.H[y] - g.H[a]).squaredNorm() < eps;
    if (near) continue;
    for (int x : A) hit = hit || dominates(g, x, y);
    if (!hit) return false;
  }
  return true;
}

vnm::NTUGame random_ntu(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> players(2, 3), size(2, 10), coord(0, 6), coin(0, 1);
  vnm::NTUGame g;
  g.n_players = players(rng);
  const int h = size(rng);
  std::set<std::vector<int>> seen;
  while (static_cast<int>(g.H.size()) < h) {
    std::vector<int> pt(g.n_players);
    for (int& x : pt) x = coord(rng);
    if (!seen.insert(pt).second) continue;
    VectorXd v(g.n_players);
    for (int i = 0; i < g.n_players; ++i) v(i) = pt[i];
    g.H.push_back(v);
  }
  for (int mask = 1; mask < (1 << g.n_players); ++mask) {
    if (coin(rng) && mask != (1 << g.n_players) - 1) continue;
    vnm::Coalition S;
    for (int i = 0; i < g.n_players; ++i)
      if (mask & (1 << i)) S.push_back(i);
    std::vector<int> pts;
    for (int x = 0; x < h; ++x)
      if (coin(rng)) pts.push_back(x);
    if (pts.empty()) pts.push_back(0);
    g.v[S] = pts;
  }
  return g;
}

bool vnm_solutions() {
  Criterion c(4, "vnm epsilon-solutions");
  guarded(c, [&] {
    vnm::NTUGame g;
    g.n_players = 2;
    g.H = {VectorXd::Zero(2), VectorXd::Zero(2), VectorXd::Zero(2)};
    g.H[0] << 2, 1;
    g.H[1] << 1, 2;
    g.v[{0, 1}] = {0, 1, 2};
    g.v[{0}] = {2};
    g.v[{1}] = {2};
    const auto sol = vnm::find_epsilon_solution(g, 1.0);
    c.check(sol && sol->A == vnm::Subset{0, 1}, "three-point solution {(2,1),(1,2)}");
    c.check(sol && sol->criterion_value == 1.0, "criterion 1");

    std::mt19937_64 rng(404);
    int found = 0, subsets = 0;
    for (int t = 0; t < 50; ++t) {
      const auto game = random_ntu(rng);
      for (double eps : {0.5, 2.0, 5.0}) {
        const auto s = vnm::find_epsilon_solution(game, eps);
        if (s) {
          ++found;
          c.check(direct_definition(game, s->A, eps), "returned set meets the definition");
        }
        bool any = false;
        for (const auto& A : vnm::internally_stable_subsets(game)) {
          ++subsets;
          const bool direct = direct_definition(game, A, eps);
          c.check((vnm::criterion_value(game, A, eps) > 0.0) == direct, "criterion > 0 iff solution");
          any = any || direct;
        }
        c.check(any == s.has_value(), "search finds a solution iff one exists");
      }
    }
    c.note("solutions=" + std::to_string(found) + " stable subsets checked=" + std::to_string(subsets));
  });
  return c.report();
}

// ---- 5. replicator ----

replicator::ReducedCoeffs3 planted(std::mt19937_64& rng, Eigen::Vector3d& p) {
  std::uniform_real_distribution<double> in(0.1, 0.9), co(-2.0, 2.0);
  p = {in(rng), in(rng), in(rng)};
  replicator::ReducedCoeffs3 rc;
  rc.A2 = co(rng); rc.A3 = co(rng); rc.A = co(rng);
  rc.B1 = co(rng); rc.B3 = co(rng); rc.B = co(rng);
  rc.C1 = co(rng); rc.C2 = co(rng); rc.C = co(rng);
  const double x = p(0), y = p(1), z = p(2);
  rc.a = -(rc.A2 * y + rc.A3 * z + rc.A * y * z);
  rc.b = -(rc.B1 * x + rc.B3 * z + rc.B * x * z);
  rc.c = -(rc.C1 * x + rc.C2 * y + rc.C * x * y);
  return rc;
}

// x' = x(1-x)(a + A2 y + A3 z + A y z) and cyclic, written out.
Eigen::Vector3d field_oracle(const replicator::ReducedCoeffs3& k, const Eigen::Vector3d& v) {
  const double x = v(0), y = v(1), z = v(2);
  return {x * (1 - x) * (k.a + k.A2 * y + k.A3 * z + k.A * y * z),
          y * (1 - y) * (k.b + k.B1 * x + k.B3 * z + k.B * x * z),
          z * (1 - z) * (k.c + k.C1 * x + k.C2 * y + k.C * x * y)};
}

bool replicator_stability() {
  Criterion c(5, "replicator stability");
  guarded(c, [&] {
    std::mt19937_64 rng(505);
    double worst_fd = 0.0;
    for (int t = 0; t < 50; ++t) {
      Eigen::Vector3d p;
      const auto rc = planted(rng, p);
      const Eigen::Matrix3d J = replicator::jacobian3(rc, p);
      Eigen::Matrix3d fd;
      const double h = 1e-5;
      for (int j = 0; j < 3; ++j) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e(j) = h;
        fd.col(j) = (field_oracle(rc, p + e) - field_oracle(rc, p - e)) / (2 * h);
      }
      worst_fd = std::max(worst_fd, (J - fd).cwiseAbs().maxCoeff());
    }
    c.check(worst_fd <= 1e-6, "jacobian vs finite differences");

    replicator::ReducedCoeffs3 center;
    center.a = -1; center.A2 = 1; center.A3 = 1;
    center.b = 0; center.B1 = -1; center.B3 = 1;
    center.c = 1; center.C1 = -1; center.C2 = -1;
    const Eigen::Vector3d half(0.5, 0.5, 0.5);
    const auto rep = replicator::classify_stability(replicator::jacobian3(center, half));
    const double w = std::sqrt(3.0) / 4.0;
    std::vector<std::complex<double>> want{{0, 0}, {0, w}, {0, -w}};
    double ev_err = 0.0;
    for (const auto& z : want) {
      double best = 1e300;
      for (const auto& e : rep.eigenvalues) best = std::min(best, std::abs(e - z));
      ev_err = std::max(ev_err, best);
    }
    c.check(rep.eigenvalues.size() == 3 && ev_err <= 1e-9, "center eigenvalues {0, +-i sqrt3/4}");
    const double det = replicator::degeneracy_invariants(center, half).det_condition;
    c.check(std::abs(det) <= 1e-12, "center det condition 0");
    const auto fi = replicator::first_integral_3(center, half);
    c.check(fi.has_value(), "first integral exists");
    double drift = 0.0;
    if (fi) {
      const auto red = replicator::reduced_coeffs(replicator::game_from_coeffs(center));
      const Eigen::Vector3d x0(0.3, 0.6, 0.45);
      const auto traj = replicator::simulate(red, x0, 50.0, 1e-3, 10);
      const double v0 = (*fi)(x0);
      for (const auto& s : traj.states) drift = std::max(drift, std::abs((*fi)(s) - v0));
      c.check(drift < 1e-6, "V drift over T=50");
    }

    int unstable = 0, logged = 0, outside = 0;
    for (int t = 0; t < 100; ++t) {
      Eigen::Vector3d p;
      const auto rc = planted(rng, p);
      const auto r = replicator::classify_stability(replicator::jacobian3(rc, p));
      if (r.verdict == replicator::Stability::Unstable) {
        ++unstable;
        continue;
      }
      const double d = replicator::degeneracy_invariants(rc, p).det_condition;
      ++logged;
      std::printf("  replicator: game %d not unstable (%s), det condition %.3e\n", t, replicator::to_string(r.verdict), d);
      if (std::abs(d) >= 1e-9) ++outside;
    }
    c.check(outside == 0, "no exceptions outside |det| < 1e-9");
    c.note("max FD err=" + num(worst_fd) + " eig err=" + num(ev_err) + " det=" + num(det) + " drift=" + num(drift) +
           " unstable=" + std::to_string(unstable) + "/100 logged=" + std::to_string(logged));
  });
  return c.report();
}

// ---- 6. nonlinear Markov ----

nlmarkov::TabulatedModel half_model() {
  nlmarkov::TabulatedModel tab;
  tab.n = 2;
  tab.P.resize(2);
  for (int u = 0; u < 2; ++u) {
    MatrixXd P = 0.5 * MatrixXd::Identity(2, 2);
    P.col(u).array() += 0.5;
    tab.P[u] = {{P}};
  }
  tab.gij = MatrixXd::Zero(2, 2);
  tab.gij.row(0).setOnes();
  return tab;
}

MatrixXd random_stochastic(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  MatrixXd P = MatrixXd::NullaryExpr(n, n, [&] { return u(rng); });
  for (int i = 0; i < n; ++i) P.row(i) /= P.row(i).sum();
  return P;
}

bool nlmarkov_gain() {
  Criterion c(6, "nonlinear Markov game");
  guarded(c, [&] {
    const auto model = half_model().model();
    const nlmarkov::SimplexGrid grid(2, 40);
    nlmarkov::GainOptions opts;
    opts.tol = 1e-6;
    const auto res = nlmarkov::average_gain(model, grid, opts);
    const VectorXd BS = nlmarkov::bellman(model, grid, res.bias);
    const double residual = (BS.array() - res.lambda - res.bias.array()).abs().maxCoeff();
    c.check(std::abs(res.lambda - res.lambda_ratio) <= 1e-6, "two estimators agree");
    c.check(residual <= 5e-6, "residual <= 5e-6");
    c.note("lambda=" + num(res.lambda) + " ratio=" + num(res.lambda_ratio) + " residual=" + num(residual) +
           " delta=" + num(res.delta_estimate));

    // Dirac restriction on random tabulated models.
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> gd(-1.0, 2.0), sd(-3.0, 3.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 2 + trial % 3;
      nlmarkov::TabulatedModel tab;
      tab.n = n;
      tab.P.assign(2, std::vector<std::vector<MatrixXd>>(2));
      for (auto& row : tab.P)
        for (auto& mats : row)
          for (int k = 0; k < n; ++k) mats.push_back(random_stochastic(n, rng));
      tab.gij = MatrixXd::NullaryExpr(n, n, [&] { return gd(rng); });
      const VectorXd Sbar = VectorXd::NullaryExpr(n, [&] { return sd(rng); });
      const nlmarkov::SimplexGrid g(n, 4);
      VectorXd S(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) S(i) = Sbar.dot(g.point(i));
      const VectorXd B = nlmarkov::bellman(tab.model(), g, S);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const VectorXd mu = g.point(i);
        int vertex = -1;
        for (int k = 0; k < n; ++k)
          if (mu(k) == 1.0) vertex = k;
        if (vertex < 0) continue;
        double best = 1e300;
        for (int u = 0; u < 2; ++u) {
          double worst_v = -1e300;
          for (int v = 0; v < 2; ++v) {
            const MatrixXd& P = tab.P[u][v][vertex];
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += P(vertex, j) * (tab.gij(vertex, j) + Sbar(j));
            worst_v = std::max(worst_v, s);
          }
          best = std::min(best, worst_v);
        }
        worst = std::max(worst, std::abs(B(i) - best));
        c.check(B(i) == best || std::abs(B(i) - best) <= 1e-12, "Dirac restriction");
      }
    }
    c.note("max Dirac gap=" + num(worst));

    // Monte-Carlo marginals.
    nlmarkov::StochasticRep rep;
    rep.n = 3;
    rep.P = [](const VectorXd& mu) {
      MatrixXd P(3, 3);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) P(i, j) = std::exp(0.8 * mu(j) + 0.3 * (i == j) - 0.5 * mu(i) * j);
        P.row(i) /= P.row(i).sum();
      }
      return P;
    };
    VectorXd mu0(3);
    mu0 << 0.6, 0.3, 0.1;
    const int horizon = 5, paths = 100000;
    const auto laws = nlmarkov::marginals(rep, mu0, horizon);
    std::vector<VectorXd> counts(horizon + 1, VectorXd::Zero(3));
    for (int p = 0; p < paths; ++p) {
      const auto path = nlmarkov::sample_path(rep, mu0, horizon, 5000 + static_cast<std::uint64_t>(p));
      for (int k = 0; k <= horizon; ++k) counts[k](path[k]) += 1.0;
    }
    double worst_z = 0.0;
    for (int k = 0; k <= horizon; ++k) {
      for (int i = 0; i < 3; ++i) {
        const double sigma = std::sqrt(laws[k](i) * (1 - laws[k](i)) / paths);
        const double gap = std::abs(counts[k](i) / paths - laws[k](i));
        if (sigma > 0) worst_z = std::max(worst_z, gap / sigma);
        c.check(gap <= 3 * sigma, "MC marginal within 3 sigma");
      }
    }
    c.note("max MC z=" + num(worst_z));
  });
  return c.report();
}

// ---- 7. rainbow ----

rainbow::Model one_asset(double d, double u, double rho) {
  rainbow::Model m;
  m.J = 1;
  m.rho = rho;
  m.d = VectorXd::Constant(1, d);
  m.u = VectorXd::Constant(1, u);
  return m;
}

rainbow::Model random_model(int J, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> rho(1.0, 1.04), dd(0.8, 0.97), uu(1.06, 1.25);
  rainbow::Model m;
  m.J = J;
  m.rho = rho(rng);
  m.d = VectorXd::NullaryExpr(J, [&] { return dd(rng); });
  m.u = VectorXd::NullaryExpr(J, [&] { return uu(rng); });
  return m;
}

double crr_price(double S0, double d, double u, double rho, int n, const std::function<double(double)>& g) {
  const double q = (rho - d) / (u - d);
  double s = 0.0, binom = 1.0;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) binom = binom * (n - k + 1) / k;
    s += binom * std::pow(q, n - k) * std::pow(1 - q, k) * g(S0 * std::pow(u, n - k) * std::pow(d, k));
  }
  return s / std::pow(rho, n);
}

double gamma_grid(const rainbow::Model& m, const rainbow::Payoff& f, const VectorXd& z) {
  std::vector<Eigen::Vector2d> eta;
  std::vector<double> F;
  for (int I = 0; I < 4; ++I) {
    VectorXd xi(2);
    xi << ((I & 1) ? m.d(0) : m.u(0)), ((I & 2) ? m.d(1) : m.u(1));
    const VectorXd s = xi.cwiseProduct(z);
    eta.emplace_back(s - m.rho * z);
    F.push_back(f(s));
  }
  double c0 = 0, c1 = 0, half = 2.0, best = 1e300;
  const int pts = 401;
  for (int level = 0; level < 2; ++level) {
    const double h = 2 * half / (pts - 1);
    double b0 = c0, b1 = c1;
    for (int i = 0; i < pts; ++i) {
      for (int j = 0; j < pts; ++j) {
        const double g0 = c0 - half + i * h, g1 = c1 - half + j * h;
        double v = -1e300;
        for (int I = 0; I < 4; ++I) v = std::max(v, F[I] - g0 * eta[I](0) - g1 * eta[I](1));
        if (v < best) {
          best = v;
          b0 = g0;
          b1 = g1;
        }
      }
    }
    c0 = b0;
    c1 = b1;
    half = 2 * h;
  }
  return best / m.rho;
}

rainbow::Payoff max_affine(int J, int pieces, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(-1.0, 1.5), b(-80.0, 40.0);
  const MatrixXd A = MatrixXd::NullaryExpr(pieces, J, [&] { return a(rng); });
  const VectorXd c = VectorXd::NullaryExpr(pieces, [&] { return b(rng); });
  return rainbow::custom_payoff(J, [A, c](const VectorXd& s) { return (A * s + c).maxCoeff(); }, true);
}

bool rainbow_hedging() {
  Criterion c(7, "rainbow hedging");
  const auto t0 = Clock::now();
  guarded(c, [&] {
    auto call = [](double K) { return rainbow::make_payoff({"call-on-max", K, {}, {}}); };
    std::mt19937_64 rng(707);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_crr = 0.0;
    for (int t = 0; t < 20; ++t) {
      const double rho = 1.0 + 0.05 * unit(rng);
      const double d = 0.7 + 0.28 * unit(rng), u = rho + 0.02 + 0.4 * unit(rng);
      const double K = 70 + 60 * unit(rng), s0 = 80 + 40 * unit(rng);
      const int n = 1 + t % 10;
      const double got = rainbow::hedge_price(one_asset(d, u, rho), call(K), VectorXd::Constant(1, s0), n);
      const double want = crr_price(s0, d, u, rho, n, [K](double s) { return std::max(s - K, 0.0); });
      worst_crr = std::max(worst_crr, std::abs(got - want));
    }
    c.check(worst_crr <= 1e-10, "J=1 vs CRR");

    std::uniform_real_distribution<double> zd(0.8, 1.2), kd(0.8, 1.1);
    double worst_grid = 0.0;
    for (int t = 0; t < 10; ++t) {
      const auto m = random_model(2, rng);
      VectorXd z(2);
      z << zd(rng), zd(rng);
      rainbow::Payoff f;
      switch (t % 4) {
        case 0: f = call(kd(rng)); break;
        case 1: f = rainbow::make_payoff({"multi-strike", 0, {kd(rng), kd(rng)}, {}}); break;
        case 2: f = rainbow::make_payoff({"spread", 0.02, {}, {}}); break;
        default: f = rainbow::make_payoff({"portfolio", 0.9, {}, {0.6, 0.7}}); break;
      }
      worst_grid = std::max(worst_grid, std::abs(rainbow::reduced_bellman(m, f, z) - gamma_grid(m, f, z)));
    }
    c.check(worst_grid <= 1e-3, "J=2 vs gamma grid");

    double worst_mart = 0.0;
    for (int J = 1; J <= 3; ++J) {
      for (int t = 0; t < 20; ++t) {
        const auto m = random_model(J, rng);
        for (const auto& law : rainbow::extreme_laws(m).laws) {
          VectorXd mean = VectorXd::Zero(J);
          for (std::size_t k = 0; k < law.support.size(); ++k) mean += law.probs(k) * m.vertex(law.support[k]);
          worst_mart = std::max(worst_mart, (mean.array() - m.rho).abs().maxCoeff());
        }
      }
    }
    c.check(worst_mart <= 1e-10, "martingale equation");

    std::uniform_real_distribution<double> off(-30.0, 30.0);
    for (int t = 0; t < 200; ++t) {
      const int J = 1 + t % 3;
      const auto m = random_model(J, rng);
      const VectorXd z = VectorXd::NullaryExpr(J, [&] { return 100.0 + off(rng); });
      const auto f1 = max_affine(J, 3, rng);
      const auto f2 = max_affine(J, 4, rng);
      const auto upper =
          rainbow::custom_payoff(J, [f1, f2](const VectorXd& s) { return std::max(f1(s), f2(s)); }, true);
      double gap = 0.0;
      for (int I = 0; I < m.vertex_count(); ++I) {
        const VectorXd s = m.vertex(I).cwiseProduct(z);
        gap = std::max(gap, std::abs(f1(s) - f2(s)));
      }
      const double b1 = rainbow::reduced_bellman(m, f1, z);
      c.check(std::abs(b1 - rainbow::reduced_bellman(m, f2, z)) <= gap / m.rho + 1e-12, "non-expansive");
      c.check(rainbow::reduced_bellman(m, upper, z) >= b1 - 1e-12, "monotone");
    }

    const double two_step = rainbow::hedge_price(one_asset(0.9, 1.2, 1.0), call(100), VectorXd::Constant(1, 100), 2);
    c.check(std::round(two_step * 1e4) / 1e4 == 8.4444, "2-step value 8.4444");
    c.note("max CRR gap=" + num(worst_crr) + " max grid gap=" + num(worst_grid) + " max martingale err=" +
           num(worst_mart) + " 2-step=" + num(two_step));
  });
  const double secs = seconds_since(t0);
  c.check(secs < 30.0, "runtime < 30 s");
  c.note("t=" + num(secs) + "s");
  return c.report();
}

// ---- 8. determinism ----

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

bool cli_determinism() {
  namespace fs = std::filesystem;
  Criterion c(8, "cli determinism");
  guarded(c, [&] {
    const fs::path corpus = fs::path(GAMELAB_SOURCE_DIR) / "tests" / "cli" / "corpus";
    const fs::path dir = fs::temp_directory_path() / ("gamelab_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(corpus)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    int runs = 0;
    for (const auto& file : files) {
      // File stems name the subcommand; the malformed and bad_* inputs are run
      // against bimatrix/tax so their error documents are compared too.
      std::string sub = file.stem().string();
      if (const auto cut = sub.find('_'); cut != std::string::npos) sub = sub.substr(0, cut);
      if (sub == "malformed" || sub == "bad") sub = file.stem() == "bad_domain" ? "tax" : "bimatrix";
      for (const std::string fmt : {"json", "csv"}) {
        std::string outputs[2];
        int codes[2];
        for (int r = 0; r < 2; ++r) {
          const fs::path out = dir / ("run" + std::to_string(r));
          const std::string cmd = std::string("\"") + GAMELAB_BINARY + "\" " + sub + " --seed 42 --format " + fmt +
                                  " --input \"" + file.string() + "\" >\"" + out.string() + "\" 2>&1";
          const int status = std::system(cmd.c_str());
          codes[r] = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
          outputs[r] = slurp(out);
        }
        ++runs;
        c.check(codes[0] == codes[1] && (codes[0] == 0 || codes[0] == 2), "exit code " + file.filename().string());
        c.check(!outputs[0].empty() && outputs[0] == outputs[1], "bytes " + file.filename().string() + " " + fmt);
      }
    }
    fs::remove_all(dir);
    c.note("corpus runs=" + std::to_string(runs));
  });
  return c.report();
}

}  // namespace

int main() {
  bool ok = true;
  ok &= tax_example();
  ok &= inspection_closed_forms();
  ok &= cournot_markets();
  ok &= vnm_solutions();
  ok &= replicator_stability();
  ok &= nlmarkov_gain();
  ok &= rainbow_hedging();
  ok &= cli_determinism();
  std::printf("%s\n", ok ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return ok ? 0 : 1;
}
