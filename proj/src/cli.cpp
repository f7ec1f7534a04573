#include "gamelab/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "gamelab/bimatrix.hpp"
#include "gamelab/cournot.hpp"
#include "gamelab/error.hpp"
#include "gamelab/inspection.hpp"
#include "gamelab/nlmarkov.hpp"
#include "gamelab/rainbow.hpp"
#include "gamelab/replicator.hpp"
#include "gamelab/taxgame.hpp"
#include "gamelab/vnm.hpp"

namespace gamelab::cli {

using nlohmann::json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct SchemaError : std::runtime_error {
  SchemaError(std::string f, const std::string& msg) : std::runtime_error(msg), field(std::move(f)) {}
  std::string field;
};

std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path.empty() ? "/" : path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(child(path, key), "required field is missing");
  return *it;
}

double as_num(const json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw SchemaError(path, "expected a finite number");
  return x;
}

long long as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw SchemaError(path, "expected an integer");
  return v.get<long long>();
}

const json& as_array(const json& v, const std::string& path, std::optional<std::size_t> size = {}) {
  if (!v.is_array()) throw SchemaError(path, "expected an array");
  if (size && v.size() != *size) {
    throw SchemaError(path, "expected " + std::to_string(*size) + " entries, got " + std::to_string(v.size()));
  }
  return v;
}

VectorXd as_vec(const json& v, const std::string& path, std::optional<std::size_t> size = {}) {
  as_array(v, path, size);
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = as_num(v[i], child(path, i));
  return out;
}

MatrixXd as_mat(const json& v, const std::string& path, std::optional<std::size_t> rows = {},
                std::optional<std::size_t> cols = {}) {
  as_array(v, path, rows);
  if (v.empty()) throw SchemaError(path, "expected a non-empty matrix");
  const std::size_t c = cols ? *cols : as_array(v[0], child(path, 0)).size();
  MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = as_vec(v[i], child(path, i), c).transpose();
  }
  return out;
}

double num_or(const json& j, const std::string& key, double def, const std::string& path) {
  const auto it = j.find(key);
  return it == j.end() ? def : as_num(*it, child(path, key));
}

long long int_or(const json& j, const std::string& key, long long def, const std::string& path) {
  const auto it = j.find(key);
  return it == j.end() ? def : as_int(*it, child(path, key));
}

json vec_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_json(const MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

json num_json(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// Shortest round-trip representation; "nan"/"inf" spelled out.
std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) { row(std::move(header)); }
  void row(std::vector<std::string> cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

struct Report {
  json result = json::object();
  std::vector<std::string> warnings;
  std::string csv;
};

void check_schema_version(const json& in) {
  const auto it = in.find("schema_version");
  if (it != in.end() && (!it->is_number_integer() || it->get<long long>() != kSchemaVersion)) {
    throw SchemaError("/schema_version", "unsupported schema version (expected 1)");
  }
}

// ---- bimatrix ----

json payoff_pair(const bimatrix::PayoffPair& p) { return {{"u", p.u}, {"v", p.v}}; }

Report run_bimatrix(const json& in) {
  bimatrix::BimatrixGame2x2 g;
  g.a = as_mat(need(in, "a", ""), "/a", 2, 2);
  g.b = as_mat(need(in, "b", ""), "/b", 2, 2);
  Report rep;
  Csv csv({"kind", "x", "y", "u", "v"});
  json eqs = json::array();
  for (const auto& e : bimatrix::enumerate_equilibria(g)) {
    json item = {{"kind", bimatrix::to_string(e.kind)}, {"x", e.x}, {"y", e.y}, {"payoffs", payoff_pair(e.payoffs)}};
    if (e.kind == bimatrix::EquilibriumKind::Component) {
      json boxes = json::array();
      for (const auto& b : e.boxes) {
        boxes.push_back({{"x", {b.x_lo, b.x_hi}}, {"y", {b.y_lo, b.y_hi}}});
      }
      item["boxes"] = boxes;
      item["payoff_min"] = payoff_pair(e.payoff_min);
      item["payoff_max"] = payoff_pair(e.payoff_max);
      rep.warnings.push_back("degenerate: continuum of equilibria");
    }
    eqs.push_back(item);
    csv.row({bimatrix::to_string(e.kind), fmt(e.x), fmt(e.y), fmt(e.payoffs.u), fmt(e.payoffs.v)});
  }
  rep.result["equilibria"] = eqs;
  if (const auto v = bimatrix::game_value(g)) {
    rep.result["value"] = payoff_pair(*v);
  } else {
    rep.result["value"] = nullptr;
    rep.warnings.push_back("ambiguous: equilibria have different payoffs, no common value");
  }
  rep.csv = csv.str();
  return rep;
}

// ---- inspect ----

Report run_inspect(const json& in) {
  inspection::InspectionParams p;
  p.p = as_num(need(in, "p", ""), "/p");
  p.f = as_num(need(in, "f", ""), "/f");
  p.r = as_num(need(in, "r", ""), "/r");
  p.s = as_num(need(in, "s", ""), "/s");
  p.c = as_num(need(in, "c", ""), "/c");
  p.l = as_num(need(in, "l", ""), "/l");
  const int n = static_cast<int>(as_int(need(in, "n", ""), "/n"));
  const int k = static_cast<int>(int_or(in, "k", n, ""));
  const int m = static_cast<int>(int_or(in, "m", n, ""));
  p.validate();

  Report rep;
  Csv csv({"n", "U", "V", "status"});
  json diag = json::array();
  for (const auto& step : inspection::solve_diagonal(p, n)) {
    const bool amb = step.status == inspection::EntryStatus::Ambiguous;
    diag.push_back({{"n", step.n}, {"U", step.U}, {"V", step.V}, {"status", amb ? "ambiguous" : "valued"}});
    csv.row({std::to_string(step.n), fmt(step.U), fmt(step.V), amb ? "ambiguous" : "valued"});
    if (amb) rep.warnings.push_back("ambiguous: diagonal stage " + std::to_string(step.n) + " has no unique value");
  }
  rep.result["diagonal"] = diag;
  const auto table = inspection::solve(p, k, m, n);
  const auto& e = table.at(k, m, n);
  const bool amb = e.status == inspection::EntryStatus::Ambiguous;
  json val = {{"k", k}, {"m", m}, {"n", n}, {"U", e.value.u}, {"V", e.value.v},
              {"status", amb ? "ambiguous" : "valued"}};
  if (e.stage) val["stage"] = {{"x", e.stage->x}, {"y", e.stage->y}, {"kind", bimatrix::to_string(e.stage->kind)}};
  rep.result["value"] = val;
  if (amb) rep.warnings.push_back("ambiguous: value of the (k, m, n) game is not unique");
  if (const auto t = inspection::thresholds(p)) {
    rep.result["thresholds"] = {{"s1", t->s1}, {"s2", t->s2}};
  } else {
    rep.result["thresholds"] = nullptr;
  }
  rep.csv = csv.str();
  return rep;
}

// ---- tax ----

json evasion_json(const taxgame::EvasionReport& r) {
  json j = {{"l_star", num_json(r.l_star)}, {"regime", taxgame::to_string(r.regime)}, {"l1", num_json(r.l1)},
            {"clamped", r.clamped}};
  j["p_range"] = r.p_range ? json{{"lo", r.p_range->lo}, {"hi", r.p_range->hi}} : json(nullptr);
  return j;
}

Report run_tax(const json& in) {
  taxgame::TaxParams t;
  t.p = num_or(in, "p", t.p, "");
  t.n = as_num(need(in, "n", ""), "/n");
  t.c = as_num(need(in, "c", ""), "/c");
  t.r = num_or(in, "r", t.r, "");
  t.lM = as_num(need(in, "lM", ""), "/lM");
  t.validate();

  Report rep;
  const auto report = taxgame::optimal_evasion(t);
  rep.result["evasion"] = evasion_json(report);
  rep.warnings = report.warnings;
  const auto range = taxgame::full_evasion_p_range(t.c, t.lM, t.n);
  rep.result["full_evasion_p_range"] = range ? json{{"lo", range->lo}, {"hi", range->hi}} : json(nullptr);
  const auto stage = taxgame::stage_equilibrium(t.p, t.n * t.lM, t.c, t.lM, t.r);
  rep.result["stage_at_lM"] = {{"regime", taxgame::to_string(stage.regime)},
                               {"hide", stage.equilibrium.x},
                               {"check", stage.equilibrium.y},
                               {"strict_dominance", stage.strict_dominance}};

  double lo = 0.01, hi = 0.99;
  long long steps = 99;
  if (const auto it = in.find("sweep"); it != in.end()) {
    lo = as_num(need(*it, "from", "/sweep"), "/sweep/from");
    hi = as_num(need(*it, "to", "/sweep"), "/sweep/to");
    steps = as_int(need(*it, "steps", "/sweep"), "/sweep/steps");
    if (steps < 1 || steps > 100000) throw SchemaError("/sweep/steps", "expected 1..100000");
    if (!(lo > 0.0) || !(hi < 1.0) || lo > hi) throw SchemaError("/sweep", "expected 0 < from <= to < 1");
  }
  Csv csv({"p", "l_star", "regime", "l1", "clamped"});
  json sweep = json::array();
  for (long long i = 0; i < steps; ++i) {
    taxgame::TaxParams q = t;
    q.p = steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
    const auto r = taxgame::optimal_evasion(q);
    json row = evasion_json(r);
    row["p"] = q.p;
    row.erase("p_range");
    sweep.push_back(row);
    csv.row({fmt(q.p), fmt(r.l_star), taxgame::to_string(r.regime), fmt(r.l1), r.clamped ? "true" : "false"});
  }
  rep.result["sweep"] = sweep;
  rep.csv = csv.str();
  return rep;
}

// ---- cournot ----

Report run_cournot(const json& in) {
  cournot::Market mk;
  mk.m = static_cast<int>(as_int(need(in, "m", ""), "/m"));
  mk.K = static_cast<int>(as_int(need(in, "K", ""), "/K"));
  mk.L = static_cast<int>(as_int(need(in, "L", ""), "/L"));
  if (mk.m < 1 || mk.K < 1 || mk.L < 1) throw SchemaError("/m", "m, K and L must be >= 1");
  mk.alpha = as_mat(need(in, "alpha", ""), "/alpha", mk.m, mk.K);
  mk.beta = as_mat(need(in, "beta", ""), "/beta", mk.m, mk.K);
  mk.p = as_mat(need(in, "p", ""), "/p", mk.K, mk.L);
  const json& xi = as_array(need(in, "xi", ""), "/xi", mk.m);
  for (int i = 0; i < mk.m; ++i) mk.xi.push_back(as_mat(xi[i], child("/xi", i), mk.K, mk.L));
  const int iters = static_cast<int>(int_or(in, "iterations", 20, ""));
  mk.validate();

  Report rep;
  const auto eq = cournot::symmetric_equilibrium(mk);
  for (const auto& [i, k] : eq.multiple_minimizers) {
    rep.warnings.push_back("tie: market (site " + std::to_string(i + 1) + ", product " + std::to_string(k + 1) +
                           ") has several cheapest production sites");
  }
  json Y = json::array();
  Csv csv({"site", "product", "production_site", "quantity"});
  for (int i = 0; i < mk.m; ++i) {
    Y.push_back(mat_json(eq.allocation.Y[i]));
    for (int k = 0; k < mk.K; ++k) {
      for (int l = 0; l < mk.L; ++l) {
        csv.row({std::to_string(i + 1), std::to_string(k + 1), std::to_string(l + 1), fmt(eq.allocation.Y[i](k, l))});
      }
    }
  }
  rep.result["equilibrium"] = Y;
  rep.result["payoff"] = cournot::payoff(mk, eq.allocation, eq.allocation);
  const auto it = cournot::best_response_iteration(mk, cournot::Allocation::zeros(mk), iters);
  json d = json::array();
  for (double x : it.distances) d.push_back(x);
  rep.result["iteration_distances"] = d;
  rep.csv = csv.str();
  return rep;
}

// ---- vnm ----

Report run_vnm(const json& in) {
  vnm::NTUGame g;
  g.n_players = static_cast<int>(as_int(need(in, "players", ""), "/players"));
  if (g.n_players < 1) throw SchemaError("/players", "expected at least one player");
  const json& pts = as_array(need(in, "points", ""), "/points");
  for (std::size_t i = 0; i < pts.size(); ++i) g.H.push_back(as_vec(pts[i], child("/points", i), g.n_players));
  const json& co = need(in, "coalitions", "");
  if (!co.is_object()) throw SchemaError("/coalitions", "expected an object keyed by \"1,3\"-style player lists");
  for (const auto& [key, val] : co.items()) {
    const std::string path = child("/coalitions", key);
    vnm::Coalition c;
    std::stringstream ss(key);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      int player = 0;
      const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), player);
      if (r.ec != std::errc() || r.ptr != tok.data() + tok.size() || player < 1 || player > g.n_players) {
        throw SchemaError(path, "coalition keys are comma-separated player numbers 1..players");
      }
      c.push_back(player - 1);
    }
    std::sort(c.begin(), c.end());
    if (c.empty() || std::adjacent_find(c.begin(), c.end()) != c.end()) {
      throw SchemaError(path, "coalition must list distinct players");
    }
    std::vector<int> idx;
    const json& arr = as_array(val, path);
    for (std::size_t t = 0; t < arr.size(); ++t) {
      const long long v = as_int(arr[t], child(path, t));
      if (v < 0 || v >= static_cast<long long>(g.H.size())) throw SchemaError(child(path, t), "point index out of range");
      idx.push_back(static_cast<int>(v));
    }
    g.v[c] = idx;
  }
  const double eps = as_num(need(in, "epsilon", ""), "/epsilon");
  g.validate();

  Report rep;
  const auto sol = vnm::find_epsilon_solution(g, eps);
  if (sol) {
    json pts_out = json::array();
    for (int i : sol->A) pts_out.push_back(vec_json(g.H[i]));
    rep.result["solution"] = {{"indices", sol->A}, {"points", pts_out}, {"criterion_value", num_json(sol->criterion_value)}};
  } else {
    rep.result["solution"] = nullptr;
    rep.warnings.push_back("no internally stable subset has a positive criterion value");
  }
  Csv csv({"subset", "criterion_value", "epsilon_solution"});
  json subsets = json::array();
  for (const auto& A : vnm::internally_stable_subsets(g)) {
    const double cv = vnm::criterion_value(g, A, eps);
    std::string name;
    for (std::size_t t = 0; t < A.size(); ++t) name += (t ? ";" : "") + std::to_string(A[t]);
    subsets.push_back({{"indices", A}, {"criterion_value", num_json(cv)}, {"epsilon_solution", cv > 0}});
    csv.row({name, fmt(cv), cv > 0 ? "true" : "false"});
  }
  rep.result["internally_stable_subsets"] = subsets;
  rep.csv = csv.str();
  return rep;
}

// ---- replicator ----

json complex_json(const std::complex<double>& z) { return {{"re", z.real()}, {"im", z.imag()}}; }

Report run_replicator(const json& in) {
  replicator::TwoActionGame game;
  game.n = static_cast<int>(as_int(need(in, "n", ""), "/n"));
  if (game.n < 2 || game.n > replicator::kMaxTwoActionPlayers) throw SchemaError("/n", "expected 2..12 players");
  const json& A = as_array(need(in, "payoffs", ""), "/payoffs", game.n);
  const std::size_t profiles = std::size_t{1} << game.n;
  for (int i = 0; i < game.n; ++i) {
    const VectorXd row = as_vec(A[i], child("/payoffs", i), profiles);
    game.A.emplace_back(row.data(), row.data() + row.size());
  }
  game.validate();
  const auto red = replicator::reduced_coeffs(game);

  Report rep;
  std::optional<replicator::FirstIntegral> integral;
  if (game.n == 3) {
    const auto rc = red.coeffs3();
    rep.result["coefficients"] = {{"a", rc.a}, {"A2", rc.A2}, {"A3", rc.A3}, {"A", rc.A},
                                  {"b", rc.b}, {"B1", rc.B1}, {"B3", rc.B3}, {"B", rc.B},
                                  {"c", rc.c}, {"C1", rc.C1}, {"C2", rc.C2}, {"C", rc.C}};
    const auto eqs = replicator::interior_equilibria_3(rc);
    if (eqs.continuum) rep.warnings.push_back("degenerate: interior equilibria form a continuum");
    for (const auto& n : eqs.notes) rep.warnings.push_back(n);
    json list = json::array();
    for (const auto& x : eqs.points) {
      const auto st = replicator::classify_stability(replicator::jacobian3(rc, x));
      const auto inv = replicator::degeneracy_invariants(rc, x);
      json ev = json::array();
      for (const auto& z : st.eigenvalues) ev.push_back(complex_json(z));
      json item = {{"point", vec_json(x)}, {"stability", replicator::to_string(st.verdict)}, {"eigenvalues", ev},
                   {"det_condition", inv.det_condition}, {"discriminant", inv.discriminant}};
      if (st.verdict == replicator::Stability::DegenerateInconclusive) {
        rep.warnings.push_back("degenerate: linearization is inconclusive at an interior equilibrium");
      }
      if (std::abs(inv.det_condition) <= 1e-9) {
        if (auto fi = replicator::first_integral_3(rc, x)) {
          item["first_integral"] = {{"coefficients", vec_json(fi->coef)}, {"verdict", replicator::to_string(fi->verdict)}};
          if (!integral) integral = fi;
        }
      }
      list.push_back(item);
    }
    rep.result["interior_equilibria"] = list;
    rep.result["continuum"] = eqs.continuum;
  }

  std::vector<std::string> header{"t"};
  for (int i = 1; i <= game.n; ++i) header.push_back("x" + std::to_string(i));
  header.push_back("V");
  Csv csv(header);
  if (const auto it = in.find("x0"); it != in.end()) {
    const VectorXd x0 = as_vec(*it, "/x0", game.n);
    const double t_end = num_or(in, "t_end", 10.0, "");
    const double dt = num_or(in, "dt", 0.01, "");
    const long long every = int_or(in, "record_every", 10, "");
    if (every < 1) throw SchemaError("/record_every", "expected a positive integer");
    const auto traj = replicator::simulate(red, x0, t_end, dt, static_cast<std::size_t>(every));
    json rows = json::array();
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      std::vector<std::string> cells{fmt(traj.times[k])};
      for (int i = 0; i < game.n; ++i) cells.push_back(fmt(traj.states[k](i)));
      json row = {{"t", traj.times[k]}, {"x", vec_json(traj.states[k])}};
      if (integral) {
        const double V = (*integral)(traj.states[k].head<3>());
        cells.push_back(fmt(V));
        row["V"] = num_json(V);
      } else {
        cells.push_back("");
      }
      csv.row(cells);
      rows.push_back(row);
    }
    rep.result["trajectory"] = rows;
  }
  rep.csv = csv.str();
  return rep;
}

// ---- nlmarkov ----

Report run_nlmarkov(const json& in, const RunConfig& cfg) {
  nlmarkov::TabulatedModel tab;
  tab.n = static_cast<int>(as_int(need(in, "n", ""), "/n"));
  if (tab.n < 1 || tab.n > 8) throw SchemaError("/n", "expected 1..8 states");
  const std::size_t n = static_cast<std::size_t>(tab.n);
  const json& P = as_array(need(need(in, "transition", ""), "P", "/transition"), "/transition/P");
  if (P.empty()) throw SchemaError("/transition/P", "expected at least one control u");
  for (std::size_t u = 0; u < P.size(); ++u) {
    const std::string pu = child("/transition/P", u);
    const json& row = as_array(P[u], pu);
    if (row.empty() || row.size() != as_array(P[0], child("/transition/P", 0)).size()) {
      throw SchemaError(pu, "every u needs the same non-empty list of v entries");
    }
    std::vector<std::vector<MatrixXd>> per_v;
    for (std::size_t v = 0; v < row.size(); ++v) {
      const std::string pv = child(pu, v);
      const json& e = as_array(row[v], pv);
      std::vector<MatrixXd> mats;
      // Either one n x n matrix or a list of n of them.
      if (!e.empty() && e[0].is_array() && !e[0].empty() && e[0][0].is_array()) {
        as_array(e, pv, n);
        for (std::size_t k = 0; k < n; ++k) mats.push_back(as_mat(e[k], child(pv, k), n, n));
      } else {
        mats.push_back(as_mat(e, pv, n, n));
      }
      per_v.push_back(std::move(mats));
    }
    tab.P.push_back(std::move(per_v));
  }
  tab.gij = as_mat(need(need(in, "g", ""), "gij", "/g"), "/g/gij", n, n);
  tab.validate();
  const int N = static_cast<int>(int_or(in, "grid", 20, ""));
  const nlmarkov::SimplexGrid grid(tab.n, N);

  nlmarkov::GainOptions opts;
  opts.tol = cfg.tolerance.value_or(num_or(in, "tol", 1e-6, ""));
  opts.seed = cfg.seed;
  opts.threads = cfg.threads;
  const auto model = tab.model();
  const auto res = nlmarkov::average_gain(model, grid, opts);

  Report rep;
  rep.result["lambda"] = res.lambda;
  rep.result["lambda_ratio"] = res.lambda_ratio;
  rep.result["delta_estimate"] = res.delta_estimate;
  rep.result["residual"] = res.residual;
  rep.result["iterations"] = res.iterations;
  rep.result["ratio_iterations"] = res.ratio_iterations;
  rep.result["grid_resolution"] = N;

  std::vector<std::string> header{"index"};
  for (std::size_t j = 1; j <= n; ++j) header.push_back("mu" + std::to_string(j));
  header.push_back("bias");
  Csv csv(header);
  json bias = json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const VectorXd mu = grid.point(i);
    std::vector<std::string> cells{std::to_string(i)};
    for (std::size_t j = 0; j < n; ++j) cells.push_back(fmt(mu(static_cast<Eigen::Index>(j))));
    cells.push_back(fmt(res.bias(static_cast<Eigen::Index>(i))));
    csv.row(cells);
    bias.push_back({{"mu", vec_json(mu)}, {"bias", res.bias(static_cast<Eigen::Index>(i))}});
  }
  rep.result["bias"] = bias;

  if (const auto it = in.find("simulate"); it != in.end()) {
    const VectorXd mu0 = as_vec(need(*it, "mu0", "/simulate"), "/simulate/mu0", n);
    const int horizon = static_cast<int>(as_int(need(*it, "horizon", "/simulate"), "/simulate/horizon"));
    const long long paths = int_or(*it, "paths", 1000, "/simulate");
    const int u = static_cast<int>(int_or(*it, "u", 0, "/simulate"));
    const int v = static_cast<int>(int_or(*it, "v", 0, "/simulate"));
    if (paths < 1 || paths > 10000000) throw SchemaError("/simulate/paths", "expected 1..1e7");
    if (u < 0 || u >= tab.n_u() || v < 0 || v >= tab.n_v()) throw SchemaError("/simulate", "control index out of range");
    nlmarkov::StochasticRep rep_uv{tab.n, [&tab, u, v](const VectorXd& mu) { return tab.transition(u, v, mu); }};
    const auto laws = nlmarkov::marginals(rep_uv, mu0, horizon);
    std::vector<VectorXd> counts(horizon + 1, VectorXd::Zero(tab.n));
    for (long long p = 0; p < paths; ++p) {
      const auto path = nlmarkov::sample_path(rep_uv, mu0, horizon, cfg.seed + static_cast<std::uint64_t>(p));
      for (int k = 0; k <= horizon; ++k) counts[k](path[k]) += 1.0;
    }
    json steps = json::array();
    for (int k = 0; k <= horizon; ++k) {
      steps.push_back({{"k", k}, {"law", vec_json(laws[k])}, {"empirical", vec_json(counts[k] / static_cast<double>(paths))}});
    }
    rep.result["simulation"] = {{"u", u}, {"v", v}, {"paths", paths}, {"steps", steps}};
  }
  rep.csv = csv.str();
  return rep;
}

// ---- rainbow ----

Report run_rainbow(const json& in) {
  rainbow::Model m;
  m.J = static_cast<int>(as_int(need(in, "J", ""), "/J"));
  if (m.J < 1) throw SchemaError("/J", "expected J >= 1");
  const std::size_t J = static_cast<std::size_t>(m.J);
  m.rho = as_num(need(in, "rho", ""), "/rho");
  m.d = as_vec(need(in, "d", ""), "/d", J);
  m.u = as_vec(need(in, "u", ""), "/u", J);
  m.validate();
  const json& pj = need(in, "payoff", "");
  rainbow::PayoffSpec desc;
  const json& kind = need(pj, "kind", "/payoff");
  if (!kind.is_string()) throw SchemaError("/payoff/kind", "expected a string");
  desc.kind = kind.get<std::string>();
  desc.K = num_or(pj, "K", 0.0, "/payoff");
  if (const auto it = pj.find("strikes"); it != pj.end()) {
    const VectorXd s = as_vec(*it, "/payoff/strikes", J);
    desc.strikes.assign(s.data(), s.data() + s.size());
  }
  if (const auto it = pj.find("weights"); it != pj.end()) {
    const VectorXd w = as_vec(*it, "/payoff/weights", J);
    desc.weights.assign(w.data(), w.data() + w.size());
  }
  const auto f = rainbow::make_payoff(desc);
  if (f.J != 0 && f.J != m.J) throw SchemaError("/payoff", "payoff is defined for a different number of assets");
  const VectorXd S0 = as_vec(need(in, "S0", ""), "/S0", J);
  const int n = static_cast<int>(as_int(need(in, "n", ""), "/n"));
  const long long budget = int_or(in, "max_nodes", static_cast<long long>(rainbow::kDefaultLatticeBudget), "");
  if (budget < 1) throw SchemaError("/max_nodes", "expected a positive integer");

  const auto res = rainbow::hedge(m, f, S0, n, true, static_cast<std::size_t>(budget));
  Report rep;
  rep.warnings = res.warnings;
  rep.result["price"] = res.price;
  rep.result["eligible_laws"] = res.eligible_laws;
  std::vector<std::string> header{"step"};
  for (std::size_t i = 1; i <= J; ++i) header.push_back("downs" + std::to_string(i));
  for (std::size_t i = 1; i <= J; ++i) header.push_back("S" + std::to_string(i));
  header.push_back("value");
  for (std::size_t i = 1; i <= J; ++i) header.push_back("gamma" + std::to_string(i));
  header.push_back("tie");
  Csv csv(header);
  json nodes = json::array();
  int ties = 0;
  for (const auto& node : res.nodes) {
    if (node.step == n) continue;
    std::vector<std::string> cells{std::to_string(node.step)};
    for (int k : node.downs) cells.push_back(std::to_string(k));
    for (Eigen::Index i = 0; i < node.price.size(); ++i) cells.push_back(fmt(node.price(i)));
    cells.push_back(fmt(node.value));
    for (Eigen::Index i = 0; i < node.gamma.size(); ++i) cells.push_back(fmt(node.gamma(i)));
    cells.push_back(node.tie ? "true" : "false");
    csv.row(cells);
    ties += node.tie;
    nodes.push_back({{"step", node.step}, {"downs", node.downs}, {"price", vec_json(node.price)},
                     {"value", node.value}, {"gamma", vec_json(node.gamma)}, {"tie", node.tie}});
  }
  if (ties > 0) {
    rep.warnings.push_back("tie: " + std::to_string(ties) + " lattice nodes have several maximizing laws");
  }
  rep.result["strategy"] = nodes;
  rep.csv = csv.str();
  return rep;
}

json error_doc(const std::string& kind, const std::string& message, const std::string& field = "") {
  json e = {{"kind", kind}, {"message", message}};
  if (!field.empty()) e["field"] = field;
  return {{"schema_version", kSchemaVersion}, {"status", "error"}, {"error", e}};
}

RunResult failure(const json& doc) {
  RunResult r;
  r.exit_code = kExitError;
  r.error = doc.dump(2) + "\n";
  return r;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"bimatrix", "inspect", "tax",      "cournot",
                                              "vnm",      "replicator", "nlmarkov", "rainbow"};
  return names;
}

RunResult run_document(const RunConfig& config, const json& input) {
  try {
    if (config.format != "json" && config.format != "csv") {
      return failure(error_doc("usage", "format must be json or csv"));
    }
    if (!input.is_object()) throw SchemaError("/", "expected a JSON object");
    check_schema_version(input);
    Report rep;
    const std::string& sc = config.subcommand;
    if (sc == "bimatrix") rep = run_bimatrix(input);
    else if (sc == "inspect") rep = run_inspect(input);
    else if (sc == "tax") rep = run_tax(input);
    else if (sc == "cournot") rep = run_cournot(input);
    else if (sc == "vnm") rep = run_vnm(input);
    else if (sc == "replicator") rep = run_replicator(input);
    else if (sc == "nlmarkov") rep = run_nlmarkov(input, config);
    else if (sc == "rainbow") rep = run_rainbow(input);
    else return failure(error_doc("usage", "unknown subcommand '" + sc + "'"));

    RunResult out;
    if (config.format == "csv") {
      out.output = rep.csv;
    } else {
      json doc = {{"schema_version", kSchemaVersion}, {"subcommand", sc}, {"status", "ok"},
                  {"seed", config.seed}, {"result", rep.result}, {"warnings", rep.warnings}};
      out.output = doc.dump(2) + "\n";
    }
    // CSV carries the data table only; warnings are in the JSON form.
    return out;
  } catch (const SchemaError& e) {
    return failure(error_doc("schema_violation", e.what(), e.field));
  } catch (const Error& e) {
    return failure(error_doc(std::string(to_string(e.kind())), e.what()));
  } catch (const json::exception& e) {
    return failure(error_doc("schema_violation", e.what()));
  }
}

RunResult run(const RunConfig& config) {
  std::ifstream file(config.input_path, std::ios::binary);
  if (!file) return failure(error_doc("io", "cannot read input file '" + config.input_path + "'"));
  std::stringstream buf;
  buf << file.rdbuf();
  json input;
  try {
    input = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    return failure(error_doc("malformed_json", e.what()));
  }
  return run_document(config, input);
}

int main_entry(int argc, char** argv) {
  CLI::App app{"gamelab: game-theory workbench"};
  RunConfig cfg;
  double tol = 0.0;
  app.add_option("subcommand", cfg.subcommand, "Analysis to run")
      ->required()
      ->check(CLI::IsMember(subcommands()));
  app.add_option("-i,--input", cfg.input_path, "Model JSON file")->required();
  app.add_option("-f,--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("-s,--seed", cfg.seed, "Seed for Monte-Carlo parts");
  app.add_option("-t,--threads", cfg.threads, "Worker threads")->check(CLI::PositiveNumber);
  auto* tol_opt = app.add_option("--tolerance", tol, "Tolerance override")->check(CLI::PositiveNumber);
  app.add_option("-o,--output", cfg.output_path, "Write the report here instead of stdout");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_doc("usage", e.what()).dump(2) << "\n";
    return kExitError;
  }
  if (*tol_opt) cfg.tolerance = tol;

  const RunResult res = run(cfg);
  if (res.exit_code != kExitOk) {
    std::cerr << res.error;
    return res.exit_code;
  }
  if (cfg.output_path.empty()) {
    std::cout << res.output;
  } else {
    std::ofstream out(cfg.output_path, std::ios::binary);
    if (!out || !(out << res.output)) {
      std::cerr << error_doc("io", "cannot write '" + cfg.output_path + "'").dump(2) << "\n";
      return kExitError;
    }
  }
  return kExitOk;
}

}  // namespace gamelab::cli
