#include "gamelab/nlmarkov.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "gamelab/error.hpp"

namespace gamelab::nlmarkov {

namespace {

void check_stochastic(const MatrixXd& P, int n, const char* what) {
  if (P.rows() != n || P.cols() != n) {
    throw Error(ErrorKind::Representation, std::string(what) + ": matrix must be n x n");
  }
  if (!P.allFinite() || (P.array() < -kStochasticTol).any() ||
      ((P.rowwise().sum().array() - 1.0).abs() > kStochasticTol).any()) {
    throw Error(ErrorKind::Representation, std::string(what) + ": matrix is not stochastic");
  }
}

void check_q_matrix(const MatrixXd& Q, int n) {
  if (Q.rows() != n || Q.cols() != n || !Q.allFinite()) {
    throw Error(ErrorKind::Representation, "generator_flow: Q must be a finite n x n matrix");
  }
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && Q(i, j) < -kStochasticTol * scale) {
        throw Error(ErrorKind::Representation, "generator_flow: negative off-diagonal rate");
      }
    }
    if (std::abs(Q.row(i).sum()) > kStochasticTol * scale) {
      throw Error(ErrorKind::Representation, "generator_flow: rows of Q must sum to zero");
    }
  }
}

VectorXd random_simplex_point(int n, std::mt19937_64& rng) {
  VectorXd mu(n);
  for (int i = 0; i < n; ++i) mu(i) = -std::log(1.0 - uniform01(rng));
  return mu / mu.sum();
}

// Clamps tiny negative entries of a law that passed the tolerance check.
VectorXd clean(const VectorXd& mu) {
  VectorXd out = mu.cwiseMax(0.0);
  return out / out.sum();
}

template <typename Body>
void parallel_for(std::size_t count, int threads, Body body) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(threads < 1 ? 1 : threads, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void check_simplex(const VectorXd& mu, int n) {
  if (mu.size() != n) throw Error(ErrorKind::Dimension, "nlmarkov: law has the wrong length");
  if (!mu.allFinite() || (mu.array() < 0.0).any() || std::abs(mu.sum() - 1.0) > kSimplexTol) {
    throw Error(ErrorKind::Domain, "nlmarkov: law must be nonnegative and sum to 1");
  }
}

VectorXd step_distribution(const StochasticRep& rep, const VectorXd& mu) {
  check_simplex(mu, rep.n);
  const MatrixXd P = rep.P(mu);
  check_stochastic(P, rep.n, "step_distribution");
  return clean(P.transpose() * mu);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int draw(const VectorXd& p, std::mt19937_64& rng) {
  const double u = uniform01(rng) * p.sum();
  double acc = 0.0;
  int last = 0;
  for (int i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    acc += p(i);
    last = i;
    if (u < acc) return i;
  }
  return last;
}

std::vector<VectorXd> marginals(const StochasticRep& rep, const VectorXd& mu0, int horizon) {
  std::vector<VectorXd> out{mu0};
  for (int k = 0; k < horizon; ++k) out.push_back(step_distribution(rep, out.back()));
  return out;
}

std::vector<int> sample_path(const StochasticRep& rep, const VectorXd& mu0, int horizon,
                             std::uint64_t seed) {
  if (horizon < 1) throw Error(ErrorKind::Domain, "sample_path: horizon must be >= 1");
  check_simplex(mu0, rep.n);
  // Raw consecutive seeds give correlated first draws; seed_seq scrambles them.
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<int> path{draw(mu0, rng)};
  VectorXd mu = mu0;
  for (int k = 0; k < horizon; ++k) {
    const MatrixXd P = rep.P(mu);
    check_stochastic(P, rep.n, "sample_path");
    path.push_back(draw(P.row(path.back()).transpose(), rng));
    mu = clean(P.transpose() * mu);
  }
  return path;
}

FlowResult generator_flow(const GeneratorRep& gen, const VectorXd& mu0, double t_end, double dt,
                          std::size_t record_every) {
  check_simplex(mu0, gen.n);
  // Conditional positivity at the vertices: mass may only flow into empty states.
  for (int k = 0; k < gen.n; ++k) {
    const VectorXd e = VectorXd::Unit(gen.n, k);
    const MatrixXd Q = gen.Q(e);
    check_q_matrix(Q, gen.n);
    const VectorXd a = Q.transpose() * e;
    for (int i = 0; i < gen.n; ++i) {
      if (i != k && a(i) < -kStochasticTol) {
        throw Error(ErrorKind::Representation, "generator_flow: generator not conditionally positive");
      }
    }
  }
  const numerics::VectorField<double> field = [&gen](const VectorXd& mu) {
    const MatrixXd Q = gen.Q(mu);
    check_q_matrix(Q, gen.n);
    return VectorXd(Q.transpose() * mu);
  };
  const std::size_t steps = numerics::step_count(t_end, dt);
  if (record_every == 0) record_every = 1;
  FlowResult out;
  out.trajectory.times.push_back(0.0);
  out.trajectory.states.push_back(mu0);
  VectorXd mu = mu0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const VectorXd raw = numerics::rk4_step(field, mu, t, dt);
    if (!raw.allFinite()) throw Error(ErrorKind::BlowUp, "generator_flow: state blew up");
    mu = clean(raw);
    const double drift = (mu - raw).cwiseAbs().sum();
    out.max_drift = std::max(out.max_drift, drift);
    if (drift > kMaxDrift) {
      std::ostringstream os;
      os << "generator_flow: renormalization drift " << drift << " at t=" << t + dt;
      throw Error(ErrorKind::IntegrationQuality, os.str());
    }
    if ((k + 1) % record_every == 0 || k + 1 == steps) {
      out.trajectory.times.push_back(static_cast<double>(k + 1) * dt);
      out.trajectory.states.push_back(mu);
    }
  }
  return out;
}

SimplexGrid::SimplexGrid(int n, int N) : n_(n), N_(N) {
  if (n < 1 || N < 1) throw Error(ErrorKind::Domain, "SimplexGrid: need n >= 1 and N >= 1");
  double cells = 1.0;
  for (int j = 1; j < n; ++j) cells *= N + 1;
  if (cells > 5e7) throw Error(ErrorKind::Size, "SimplexGrid: grid too large");
  table_.assign(static_cast<std::size_t>(cells), -1);
  // Enumerate nondecreasing cumulative vectors 0 <= y_1 <= ... <= y_{n-1} <= N.
  std::vector<int> y(n - 1, 0);
  while (true) {
    std::vector<int> k(n);
    int prev = 0;
    for (int j = 0; j < n - 1; ++j) {
      k[j] = y[j] - prev;
      prev = y[j];
    }
    k[n - 1] = N - prev;
    std::size_t key = 0;
    for (int j = n - 2; j >= 0; --j) key = key * (N + 1) + y[j];
    table_[key] = static_cast<std::int64_t>(points_.size());
    points_.push_back(k);
    // Next nondecreasing vector in lexicographic order from the right.
    int j = n - 2;
    while (j >= 0 && y[j] == N) --j;
    if (j < 0) break;
    ++y[j];
    for (int t = j + 1; t < n - 1; ++t) y[t] = y[j];
  }
}

VectorXd SimplexGrid::point(std::size_t i) const {
  VectorXd mu(n_);
  for (int j = 0; j < n_; ++j) mu(j) = static_cast<double>(points_[i][j]) / N_;
  return mu;
}

std::size_t SimplexGrid::index_of_cumulative(const std::vector<int>& y) const {
  std::size_t key = 0;
  for (int j = n_ - 2; j >= 0; --j) key = key * (N_ + 1) + y[j];
  const std::int64_t idx = table_[key];
  if (idx < 0) throw Error(ErrorKind::Contract, "SimplexGrid: interpolation left the grid");
  return static_cast<std::size_t>(idx);
}

Stencil SimplexGrid::stencil(const VectorXd& mu) const {
  if (mu.size() != n_) throw Error(ErrorKind::Dimension, "SimplexGrid: law has the wrong length");
  Stencil st;
  if (n_ == 1) {
    st.push_back({0, 1.0});
    return st;
  }
  const int d = n_ - 1;
  std::vector<int> base(d);
  std::vector<double> frac(d);
  double cum = 0.0, prev = 0.0;
  for (int j = 0; j < d; ++j) {
    cum += std::max(mu(j), 0.0);
    const double y = std::clamp(std::max(cum * N_, prev), 0.0, static_cast<double>(N_));
    prev = y;
    base[j] = std::min(static_cast<int>(std::floor(y)), N_);
    frac[j] = y - base[j];
  }
  // Fractional parts in decreasing order; on ties the higher index moves
  // first, which keeps every vertex nondecreasing.
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return frac[a] != frac[b] ? frac[a] > frac[b] : a > b;
  });
  std::vector<int> vertex = base;
  const double w0 = 1.0 - frac[order[0]];
  if (w0 > 0.0) st.push_back({index_of_cumulative(vertex), w0});
  for (int k = 0; k < d; ++k) {
    const double w = frac[order[k]] - (k + 1 < d ? frac[order[k + 1]] : 0.0);
    ++vertex[order[k]];
    if (w > 0.0) st.push_back({index_of_cumulative(vertex), w});
  }
  return st;
}

double SimplexGrid::interpolate(const VectorXd& values, const VectorXd& mu) const {
  if (values.size() != static_cast<Eigen::Index>(size())) {
    throw Error(ErrorKind::Dimension, "SimplexGrid: size mismatch in interpolation");
  }
  double result = 0.0;
  for (const auto& [i, w] : stencil(mu)) result += w * values(i);
  return result;
}

void TabulatedModel::validate() const {
  if (n < 1) throw Error(ErrorKind::Model, "nlmarkov: n must be >= 1");
  if (P.empty() || P[0].empty()) throw Error(ErrorKind::Model, "nlmarkov: need at least one control each");
  for (const auto& row : P) {
    if (row.size() != P[0].size()) throw Error(ErrorKind::Model, "nlmarkov: ragged control table");
    for (const auto& mats : row) {
      if (mats.size() != 1 && static_cast<int>(mats.size()) != n) {
        throw Error(ErrorKind::Model, "nlmarkov: each transition needs 1 or n matrices");
      }
      for (const auto& m : mats) check_stochastic(m, n, "nlmarkov transition");
    }
  }
  if (gij.rows() != n || gij.cols() != n || !gij.allFinite()) {
    throw Error(ErrorKind::Model, "nlmarkov: g table must be a finite n x n matrix");
  }
}

MatrixXd TabulatedModel::transition(int u, int v, const VectorXd& mu) const {
  const auto& mats = P[u][v];
  if (mats.size() == 1) return mats[0];
  MatrixXd out = MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) out += mu(k) * mats[k];
  return out;
}

ControlledModel TabulatedModel::model() const {
  validate();
  ControlledModel m;
  m.n = n;
  m.n_u = n_u();
  m.n_v = n_v();
  const TabulatedModel self = *this;
  m.nu = [self](int u, int v, const VectorXd& mu) {
    return VectorXd(self.transition(u, v, mu).transpose() * mu);
  };
  m.g = [self](int u, int v, const VectorXd& mu) {
    const MatrixXd P = self.transition(u, v, mu);
    return mu.dot(P.cwiseProduct(self.gij).rowwise().sum());
  };
  return m;
}

BellmanOperator::BellmanOperator(const ControlledModel& model, const SimplexGrid& grid,
                                 int threads)
    : n_u_(model.n_u), n_v_(model.n_v), size_(grid.size()), threads_(threads) {
  if (grid.n() != model.n) throw Error(ErrorKind::Dimension, "bellman: grid and model disagree on n");
  if (grid.resolution() < 4) throw Error(ErrorKind::Domain, "bellman: grid step must be <= 1/4");
  if (model.n_u < 1 || model.n_v < 1) throw Error(ErrorKind::Model, "bellman: empty control set");
  const std::size_t per_point = static_cast<std::size_t>(n_u_) * n_v_;
  cost_.resize(size_ * per_point);
  stencils_.resize(size_ * per_point);
  parallel_for(size_, threads, [&](std::size_t i) {
    const VectorXd mu = grid.point(i);
    for (int u = 0; u < n_u_; ++u) {
      for (int v = 0; v < n_v_; ++v) {
        const VectorXd nu = model.nu(u, v, mu);
        if (nu.size() != model.n || !nu.allFinite() || (nu.array() < -kStochasticTol).any() ||
            std::abs(nu.sum() - 1.0) > kStochasticTol) {
          throw Error(ErrorKind::Model, "bellman: transition law left the simplex");
        }
        const std::size_t slot = i * per_point + static_cast<std::size_t>(u) * n_v_ + v;
        cost_[slot] = model.g(u, v, mu);
        stencils_[slot] = grid.stencil(clean(nu));
      }
    }
  });
}

VectorXd BellmanOperator::operator()(const VectorXd& S) const {
  if (S.size() != static_cast<Eigen::Index>(size_)) {
    throw Error(ErrorKind::Dimension, "bellman: value vector does not match the grid");
  }
  const std::size_t per_point = static_cast<std::size_t>(n_u_) * n_v_;
  VectorXd out(size_);
  auto body = [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t slot = i * per_point;
    for (int u = 0; u < n_u_; ++u) {
      double worst = -std::numeric_limits<double>::infinity();
      for (int v = 0; v < n_v_; ++v, ++slot) {
        double val = cost_[slot];
        for (const auto& [j, w] : stencils_[slot]) val += w * S(j);
        worst = std::max(worst, val);
      }
      best = std::min(best, worst);
    }
    out(i) = best;
  };
  // Thread start-up dominates on small grids.
  parallel_for(size_, size_ >= 4096 ? threads_ : 1, body);
  return out;
}

VectorXd bellman(const ControlledModel& model, const SimplexGrid& grid, const VectorXd& S,
                 int threads) {
  return BellmanOperator(model, grid, threads)(S);
}

VectorXd classical_bellman(const TabulatedModel& tab, const VectorXd& S) {
  tab.validate();
  if (S.size() != tab.n) throw Error(ErrorKind::Dimension, "classical_bellman: S has the wrong length");
  VectorXd out(tab.n);
  for (int i = 0; i < tab.n; ++i) {
    const VectorXd e = VectorXd::Unit(tab.n, i);
    double best = std::numeric_limits<double>::infinity();
    for (int u = 0; u < tab.n_u(); ++u) {
      double worst = -std::numeric_limits<double>::infinity();
      for (int v = 0; v < tab.n_v(); ++v) {
        const MatrixXd P = tab.transition(u, v, e);
        double s = 0.0;
        for (int j = 0; j < tab.n; ++j) s += P(i, j) * (tab.gij(i, j) + S(j));
        worst = std::max(worst, s);
      }
      best = std::min(best, worst);
    }
    out(i) = best;
  }
  return out;
}

double contraction_estimate(const ControlledModel& model, int pairs, std::uint64_t seed) {
  if (model.n < 2) return 0.0;
  std::mt19937_64 rng(seed);
  double delta = 0.0;
  for (int t = 0; t < pairs; ++t) {
    const VectorXd m1 = random_simplex_point(model.n, rng);
    const VectorXd m2 = random_simplex_point(model.n, rng);
    const double dist = (m1 - m2).cwiseAbs().sum();
    if (dist <= 1e-12) continue;
    for (int u = 0; u < model.n_u; ++u) {
      for (int v = 0; v < model.n_v; ++v) {
        delta = std::max(delta, (model.nu(u, v, m1) - model.nu(u, v, m2)).cwiseAbs().sum() / dist);
      }
    }
  }
  return delta;
}

GainResult average_gain(const ControlledModel& model, const SimplexGrid& grid,
                        const GainOptions& opts) {
  if (!(opts.tol > 0.0)) throw Error(ErrorKind::Domain, "average_gain: tol must be positive");
  GainResult res;
  res.delta_estimate = contraction_estimate(model, opts.contraction_pairs, opts.seed);
  if (res.delta_estimate >= 1.0) {
    std::ostringstream os;
    os << "average_gain: sampled contraction constant " << res.delta_estimate << " >= 1";
    throw Error(ErrorKind::ContractionViolated, os.str());
  }

  const BellmanOperator B(model, grid, opts.threads);
  VectorXd g = VectorXd::Zero(grid.size());
  if (opts.terminal.size() != 0) {
    if (opts.terminal.size() != g.size() || !opts.terminal.allFinite()) {
      throw Error(ErrorKind::Dimension, "average_gain: terminal function does not match the grid");
    }
    g = opts.terminal;
  }

  // Increments B^{m+1}g - B^m g bracket lambda between their min and max.
  VectorXd S = g;
  bool done = false;
  for (int m = 0; m < opts.max_iterations; ++m) {
    const VectorXd next = B(S);
    const VectorXd inc = next - S;
    const double hi = inc.maxCoeff(), lo = inc.minCoeff();
    if (hi - lo < opts.tol) {
      res.lambda = 0.5 * (hi + lo);
      res.bias = S.array() - m * res.lambda;
      res.iterations = m + 1;
      done = true;
      break;
    }
    S = next;
  }
  if (!done) {
    throw Error(ErrorKind::IterationLimit, "average_gain: increments did not stabilize");
  }
  const VectorXd check = B(res.bias);
  res.residual = (check.array() - res.lambda - res.bias.array()).abs().maxCoeff();

  // (B^m g - g) / m: lambda lies between its min and max.
  VectorXd T = g;
  done = false;
  for (long long m = 1; m <= opts.max_ratio_iterations; ++m) {
    T = B(T);
    const VectorXd diff = T - g;
    const double hi = diff.maxCoeff(), lo = diff.minCoeff();
    if ((hi - lo) / (2.0 * m) < opts.tol) {
      res.lambda_ratio = (hi + lo) / (2.0 * m);
      res.ratio_iterations = m;
      done = true;
      break;
    }
  }
  if (!done) {
    throw Error(ErrorKind::IterationLimit, "average_gain: B^m g / m did not settle");
  }
  return res;
}

}  // namespace gamelab::nlmarkov
