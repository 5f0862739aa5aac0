#include "nlsctl/hum.hpp"

#include "nlsctl/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace nlsctl {

int resolved_modes(const Grid& grid, double mu, double dt, double T, double crossings) {
  const double h = grid.h();
  int k = 0;
  while (k < grid.size()) {
    const double a = (k + 1) * std::numbers::pi * h;
    const double beta = 4.0 / (h * h) * std::pow(std::sin(a / 2.0), 2) + mu;
    const double speed = 2.0 * std::sin(a) / (h * (1.0 + std::pow(dt * beta / 2.0, 2)));
    if (T * speed < crossings) break;
    ++k;
  }
  return std::max(k, 1);
}

TwoComponentField low_pass(const Grid& grid, const TwoComponentField& z, int modes) {
  if (modes < 1 || modes > grid.size()) throw DomainError("filter mode count must lie in [1, n_interior]");
  const Field x = grid.nodes();
  TwoComponentField out = TwoComponentField::zero(grid.size());
  for (int k = 1; k <= modes; ++k) {
    const Field s = (std::sqrt(2.0) * (k * std::numbers::pi * x.array()).sin()).matrix();
    out.first += inner(grid, z.first, s) * s;
    out.second += inner(grid, z.second, s) * s;
  }
  return out;
}

void HumProblem::validate() const {
  if (!(T > 0.0)) throw DomainError("control horizon T must be positive");
  if (nt < 2) throw DomainError("need at least two time steps");
  if (!(cg_tol > 0.0 && cg_tol < 1.0)) throw DomainError("cg_tol must lie in (0,1)");
  if (cg_max_iters < 1) throw DomainError("cg_max_iters must be positive");
  if (filter_modes < 0 || filter_modes > sys.grid.size()) throw DomainError("filter_modes must lie in [0, n_interior]");
}

SApplication apply_S_full(const HumProblem& problem, const TwoComponentField& v0) {
  problem.validate();
  SApplication a;
  a.v = propagate_adjoint(problem.sys, v0, problem.T, problem.nt);
  a.w2 = propagate_backward_forced(problem.sys, TwoComponentField::zero(problem.sys.grid.size()), a.v, problem.T,
                                   problem.nt);
  a.sv0 = -1.0 * a.w2.states.front();
  return a;
}

TwoComponentField apply_S(const HumProblem& problem, const TwoComponentField& v0) {
  return apply_S_full(problem, v0).sv0;
}

double observed_energy(const LinearizedSystem& sys, const Trajectory& v, double dt) {
  double total = 0.0;
  const int nt = v.steps();
  for (int n = 0; n <= nt; ++n) {
    const double w = (n == 0 || n == nt) ? 0.5 : 1.0;
    total += w * inner(sys.grid, v.states[n].scaled_by(sys.chi), v.states[n]);
  }
  return dt * total;
}

QuadraticIdentity quadratic_identity(const HumProblem& problem, const TwoComponentField& v0) {
  const SApplication a = apply_S_full(problem, v0);
  QuadraticIdentity q;
  q.lhs = inner(problem.sys.grid, a.sv0, v0);
  q.rhs = observed_energy(problem.sys, a.v, problem.dt());
  q.defect = q.lhs != 0.0 ? std::abs(q.lhs - q.rhs) / std::abs(q.lhs) : std::abs(q.rhs);
  return q;
}

namespace {

struct EdgePair {
  Field first;
  Field second;
};

EdgePair grad(const Grid& g, const TwoComponentField& z) {
  return {forward_difference(g, z.first), forward_difference(g, z.second)};
}

EdgePair edge_avg(const TwoComponentField& z) { return {edge_average(z.first), edge_average(z.second)}; }

double edge_inner(const Grid& g, const EdgePair& a, const EdgePair& b) {
  return g.h() * (a.first.dot(b.first) + a.second.dot(b.second));
}

// (D L1) Y = (-D(phi^2) Y2, 3 D(phi^2) Y1) on edges.
EdgePair dl1(const Field& dp, const EdgePair& y) {
  return {-dp.cwiseProduct(y.second), 3.0 * dp.cwiseProduct(y.first)};
}

EdgePair weighted(const Field& w, const EdgePair& y) { return {w.cwiseProduct(y.first), w.cwiseProduct(y.second)}; }

H1Identity h1_identity_from(const HumProblem& problem, const TwoComponentField& v0, const SApplication& a) {
  const LinearizedSystem& sys = problem.sys;
  const Grid& g = sys.grid;
  const double dt = problem.dt();
  const int nt = problem.nt;
  const Field dp = forward_difference(g, Field(sys.phi.cwiseProduct(sys.phi)));
  const Field chi_e = edge_average(sys.chi);
  const Field dchi = forward_difference(g, sys.chi);

  H1Identity r;
  r.lhs = edge_inner(g, grad(g, a.sv0), grad(g, v0));
  for (int n = 0; n <= nt; ++n) {
    const double w = (n == 0 || n == nt) ? 0.5 : 1.0;
    const TwoComponentField& v = a.v.states[n];
    const EdgePair dv = grad(g, v);
    r.i2 += w * dt * edge_inner(g, weighted(chi_e, dv), dv);
    r.i3 += w * dt * edge_inner(g, weighted(dchi, edge_avg(v)), dv);
  }
  for (int n = 0; n < nt; ++n) {
    const TwoComponentField& vn = a.v.states[n];
    const TwoComponentField& vn1 = a.v.states[n + 1];
    const TwoComponentField w_plus = a.w2.states[n] + 0.5 * dt * vn.scaled_by(sys.chi);
    const TwoComponentField w_minus = a.w2.states[n + 1] - 0.5 * dt * vn1.scaled_by(sys.chi);
    const TwoComponentField wbar = 0.5 * (w_plus + w_minus);
    const TwoComponentField vbar = 0.5 * (vn + vn1);
    r.i1 += dt * (edge_inner(g, dl1(dp, edge_avg(wbar)), grad(g, vbar)) -
                  edge_inner(g, dl1(dp, grad(g, wbar)), edge_avg(vbar)));
  }
  const double scale = std::max(std::abs(r.lhs), std::abs(r.i2));
  r.defect = scale > 0.0 ? std::abs(r.lhs - (r.i1 + r.i2 + r.i3)) / scale : 0.0;
  return r;
}

}  // namespace

H1Identity h1_identity(const HumProblem& problem, const TwoComponentField& v0) {
  return h1_identity_from(problem, v0, apply_S_full(problem, v0));
}

std::vector<TwoComponentField> smooth_probes(const Grid& grid, int count, int modes, std::uint64_t seed) {
  if (modes < 1 || modes > grid.size()) throw DomainError("probe mode count must lie in [1, n_interior]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> tilt(0.0, 2.0);
  const Field x = grid.nodes();
  std::vector<TwoComponentField> probes;
  for (int p = 0; p < count; ++p) {
    const double alpha = tilt(rng);
    TwoComponentField z = TwoComponentField::zero(grid.size());
    for (int k = 1; k <= modes; ++k) {
      const Field s = (k * std::numbers::pi * x.array()).sin().matrix();
      const double decay = std::pow(k, -alpha);
      z.first += normal(rng) * decay * s;
      z.second += normal(rng) * decay * s;
    }
    z *= 1.0 / norm_l2(grid, z);
    probes.push_back(std::move(z));
  }
  return probes;
}

std::vector<double> rayleigh_quotients(const HumProblem& problem, const std::vector<TwoComponentField>& probes) {
  std::vector<double> q;
  q.reserve(probes.size());
  for (const auto& p : probes) {
    const double nrm2 = inner(problem.sys.grid, p, p);
    q.push_back(nrm2 > 0.0 ? inner(problem.sys.grid, apply_S(problem, p), p) / nrm2 : 0.0);
  }
  return q;
}

namespace {

// Orthonormal (discrete L2) sine basis: sqrt2 sin(k pi x) in one component.
TwoComponentField sine_basis(const Grid& g, int index, int modes) {
  const int k = index % modes + 1;
  const Field s = std::numbers::sqrt2 * (k * std::numbers::pi * g.nodes().array()).sin().matrix();
  TwoComponentField z = TwoComponentField::zero(g.size());
  (index < modes ? z.first : z.second) = s;
  return z;
}

}  // namespace

ObservabilityEstimate observability_constant(const HumProblem& problem, int n_probes, std::uint64_t seed, int modes) {
  if (n_probes < 1) throw DomainError("need at least one probe");
  const Grid& g = problem.sys.grid;
  if (modes < 1 || modes > g.size()) throw DomainError("Lanczos mode count must lie in [1, n_interior]");
  const int dim = 2 * modes;
  std::vector<TwoComponentField> basis;
  for (int i = 0; i < dim; ++i) basis.push_back(sine_basis(g, i, modes));
  auto to_field = [&](const Eigen::VectorXd& c) {
    TwoComponentField z = TwoComponentField::zero(g.size());
    for (int i = 0; i < dim; ++i) z += c[i] * basis[i];
    return z;
  };
  auto project = [&](const TwoComponentField& z) {
    Eigen::VectorXd c(dim);
    for (int i = 0; i < dim; ++i) c[i] = inner(g, z, basis[i]);
    return c;
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd q(dim);
  for (int i = 0; i < dim; ++i) q[i] = normal(rng);
  q.normalize();

  Eigen::MatrixXd qs(dim, dim);
  std::vector<double> alpha, beta;
  int steps = 0;
  for (int k = 0; k < dim; ++k) {
    qs.col(k) = q;
    Eigen::VectorXd w = project(apply_S(problem, to_field(q)));
    alpha.push_back(q.dot(w));
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j <= k; ++j) w -= qs.col(j).dot(w) * qs.col(j);
    ++steps;
    const double b = w.norm();
    if (k + 1 == dim || b < 1e-12 * std::abs(alpha.front())) break;
    beta.push_back(b);
    q = w / b;
  }
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(steps, steps);
  for (int i = 0; i < steps; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < steps) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  ObservabilityEstimate est;
  est.lanczos_steps = steps;
  est.ritz_values.assign(es.eigenvalues().data(), es.eigenvalues().data() + steps);
  est.c_hum = es.eigenvalues()(0);
  est.minimizer = to_field(qs.leftCols(steps) * es.eigenvectors().col(0));

  const auto probes = smooth_probes(g, n_probes, modes, seed + 1);
  est.probe_quotients = rayleigh_quotients(problem, probes);
  for (std::size_t p = 0; p < probes.size(); ++p)
    if (est.probe_quotients[p] < est.c_hum) {
      est.c_hum = est.probe_quotients[p];
      est.minimizer = probes[p];
    }
  return est;
}

H1Observability h1_observability(const HumProblem& problem, int n_probes, std::uint64_t seed, int modes) {
  const Grid& g = problem.sys.grid;
  const auto probes = smooth_probes(g, n_probes, modes, seed);
  H1Observability r;
  std::vector<double> xs, ys;
  for (const auto& p : probes) {
    const SApplication a = apply_S_full(problem, p);
    H1ProbeRow row;
    row.identity = h1_identity_from(problem, p, a);
    row.s_grad = row.identity.lhs;
    row.grad_sq = seminorm_h1(g, p) * seminorm_h1(g, p);
    row.l2_sq = inner(g, p, p);
    r.max_identity_defect = std::max(r.max_identity_defect, row.identity.defect);
    xs.push_back(row.grad_sq / row.l2_sq);
    ys.push_back(row.s_grad / row.l2_sq);
    r.rows.push_back(row);
  }
  // Lower envelope of y/x over the high-frequency half of the ensemble; the low-frequency
  // half is dominated by the secular growth along the null pair and only sets C2.
  std::vector<double> sorted_x = xs;
  std::sort(sorted_x.begin(), sorted_x.end());
  const double median = sorted_x[sorted_x.size() / 2];
  r.c1 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i] >= median) r.c1 = std::min(r.c1, ys[i] / xs[i]);
  r.c2 = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) r.c2 = std::max(r.c2, r.c1 * xs[i] - ys[i]);
  return r;
}

CgResult solve_S(const HumProblem& problem, const TwoComponentField& b) {
  problem.validate();
  const Grid& g = problem.sys.grid;
  CgResult out;
  out.x = TwoComponentField::zero(g.size());
  const bool filtered = problem.filter_modes > 0;
  auto project = [&](const TwoComponentField& z) { return filtered ? low_pass(g, z, problem.filter_modes) : z; };
  const TwoComponentField pb = project(b);
  const double bnorm = norm_l2(g, pb);
  if (bnorm == 0.0) return out;
  TwoComponentField r = pb, p = pb;
  double rr = inner(g, r, r);
  for (int k = 1; k <= problem.cg_max_iters; ++k) {
    const TwoComponentField sp = project(apply_S(problem, p));
    const double curvature = inner(g, p, sp);
    if (!(curvature > 0.0))
      throw IterationError("conjugate gradients met a non-positive curvature", std::sqrt(rr) / bnorm, out.history);
    const double alpha = rr / curvature;
    out.x += alpha * p;
    r -= alpha * sp;
    const double rr_next = inner(g, r, r);
    out.iterations = k;
    out.history.push_back(std::sqrt(rr_next) / bnorm);
    if (out.history.back() <= problem.cg_tol) return out;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  throw IterationError("conjugate gradients did not reach the tolerance", out.history.back(), out.history);
}

ControlSolution solve_linear_control(const HumProblem& problem, const TwoComponentField& z1) {
  problem.validate();
  const LinearizedSystem& sys = problem.sys;
  const Grid& g = sys.grid;
  require_same_size(g, z1.first.size(), "solve_linear_control");
  require_same_size(g, z1.second.size(), "solve_linear_control");

  ControlSolution sol;
  sol.target = z1;
  const Trajectory none;
  const Trajectory w1 = propagate_backward_forced(sys, z1, none, problem.T, problem.nt);
  const CgResult cg = solve_S(problem, w1.states.front());
  sol.v0 = cg.x;
  sol.cg_iterations = cg.iterations;
  sol.cg_history = cg.history;
  sol.control = propagate_adjoint(sys, sol.v0, problem.T, problem.nt);
  sol.state = propagate_forward_forced(sys, TwoComponentField::zero(g.size()), sol.control, problem.T, problem.nt);

  const TwoComponentField miss = sol.state.states.back() - z1;
  const double zl2 = norm_l2(g, z1), zh1 = norm_h1(g, z1);
  sol.terminal_residual_l2 = zl2 > 0.0 ? norm_l2(g, miss) / zl2 : norm_l2(g, miss);
  sol.terminal_residual_h1 = zh1 > 0.0 ? norm_h1(g, miss) / zh1 : norm_h1(g, miss);
  double sup = 0.0;
  for (const auto& h : sol.control.states) sup = std::max(sup, norm_h1(g, h));
  sol.control_ratio = zh1 > 0.0 ? sup / zh1 : 0.0;
  return sol;
}

Eigen::MatrixXd assemble_S_dense(const HumProblem& problem) {
  const int n = problem.sys.grid.size();
  if (n > 64) throw DomainError("dense assembly of S is limited to 64 interior nodes");
  Eigen::MatrixXd s(2 * n, 2 * n);
  for (int j = 0; j < 2 * n; ++j) {
    Field e = Field::Zero(2 * n);
    e[j] = 1.0;
    s.col(j) = apply_S(problem, TwoComponentField::from_interleaved(e)).interleaved();
  }
  return s;
}

double duhamel_consistency(const HumProblem& problem, const TwoComponentField& v0) {
  problem.validate();
  const LinearizedSystem& sys = problem.sys;
  const Grid& g = sys.grid;
  const int n = g.size();
  const double dt = problem.dt();
  const double inv_h2 = 1.0 / (g.h() * g.h());

  // Edge operators D D^T + mu - avg(phi^2) and D D^T + mu - 3 avg(phi^2).
  const Field p_e = edge_average(Field(sys.phi.cwiseProduct(sys.phi)));
  Field neumann = Field::Constant(n + 1, 2.0 * inv_h2);
  neumann[0] = neumann[n] = inv_h2;
  LinearizedSystem edges;
  edges.grid = Grid(n + 1);
  edges.mu = sys.mu;
  edges.phi = Field::Zero(n + 1);
  edges.chi = Field::Zero(n + 1);
  edges.lminus.diag = (neumann.array() + sys.mu - p_e.array()).matrix();
  edges.lplus.diag = (neumann.array() + sys.mu - 3.0 * p_e.array()).matrix();
  edges.lminus.off = edges.lplus.off = Field::Constant(n, -inv_h2);

  const Field dp = forward_difference(g, Field(sys.phi.cwiseProduct(sys.phi)));
  const CayleyMap map(edges, CayleyMap::Generator::MinusLstar, dt);
  const Trajectory v = propagate_adjoint(sys, v0, problem.T, problem.nt);

  auto as_pair = [](const Field& a, const Field& b) { return TwoComponentField{a, b}; };
  TwoComponentField y = as_pair(forward_difference(g, v0.first), forward_difference(g, v0.second));
  double worst = 0.0;
  for (int k = 0; k < problem.nt; ++k) {
    const TwoComponentField vbar = 0.5 * (v.states[k] + v.states[k + 1]);
    const Field a1 = edge_average(vbar.first), a2 = edge_average(vbar.second);
    // (D L1*) applied to the edge average: (3 D(phi^2) V2, -D(phi^2) V1).
    const TwoComponentField forcing{3.0 * dp.cwiseProduct(a2), -dp.cwiseProduct(a1)};
    Field rhs = map.explicit_part(y.interleaved()) - dt * forcing.interleaved();
    map.solve_implicit(rhs);
    y = TwoComponentField::from_interleaved(rhs);
    const TwoComponentField dv =
        as_pair(forward_difference(g, v.states[k + 1].first), forward_difference(g, v.states[k + 1].second));
    const double scale = std::hypot(dv.first.norm(), dv.second.norm());
    const TwoComponentField diff = y - dv;
    if (scale > 0.0) worst = std::max(worst, std::hypot(diff.first.norm(), diff.second.norm()) / scale);
  }
  return worst;
}

}  // namespace nlsctl
