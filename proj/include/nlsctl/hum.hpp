#pragma once

#include "nlsctl/operators.hpp"

#include <cstdint>
#include <vector>

namespace nlsctl {

/// Number of leading sine modes whose Crank-Nicolson group velocity
/// 2 sin(k pi h) / (h (1 + (dt beta_k / 2)^2)), beta_k = (4/h^2) sin^2(k pi h/2) + mu, carries them
/// at least `crossings` times across (0,1) within T. Faster modes are nearly frozen by the scheme
/// and drop out of the discrete observability inequality.
int resolved_modes(const Grid& grid, double mu, double dt, double T, double crossings = 1.0);
/// Projection of both components onto sqrt(2) sin(k pi x), k = 1..modes.
TwoComponentField low_pass(const Grid& grid, const TwoComponentField& z, int modes);

struct HumProblem {
  LinearizedSystem sys;
  double T = 2.0;
  int nt = 1024;
  double cg_tol = 1e-8;
  int cg_max_iters = 500;
  /// When positive, S is solved on the span of the first `filter_modes` sines per component.
  int filter_modes = 0;

  double dt() const { return T / nt; }
  void validate() const;
};

struct SApplication {
  Trajectory v;   // adjoint trajectory from V0
  Trajectory w2;  // backward solve forced by chi V, W2(T) = 0
  TwoComponentField sv0;  // -W2(0)
};

/// S V0 = -W2(0): forward adjoint solve, then the backward forced solve.
TwoComponentField apply_S(const HumProblem& problem, const TwoComponentField& v0);
SApplication apply_S_full(const HumProblem& problem, const TwoComponentField& v0);

/// Time-trapezoid of \int chi |V|^2 along a trajectory.
double observed_energy(const LinearizedSystem& sys, const Trajectory& v, double dt);

struct QuadraticIdentity {
  double lhs = 0.0;  // <S V0, V0>
  double rhs = 0.0;  // \int_0^T <chi V, V> dt
  double defect = 0.0;  // |lhs - rhs| / lhs
};
QuadraticIdentity quadratic_identity(const HumProblem& problem, const TwoComponentField& v0);

struct H1Identity {
  double lhs = 0.0;  // <(S V0)_x, (V0)_x>
  double i1 = 0.0;   // potential commutator term
  double i2 = 0.0;   // \int <chi V_x, V_x>
  double i3 = 0.0;   // \int <chi_x V, V_x>
  double defect = 0.0;  // |lhs - (i1+i2+i3)| / max(|lhs|, i2)
};
H1Identity h1_identity(const HumProblem& problem, const TwoComponentField& v0);

/// Unit-L2 random fields from the first `modes` sines in each component.
std::vector<TwoComponentField> smooth_probes(const Grid& grid, int count, int modes, std::uint64_t seed);

struct ObservabilityEstimate {
  double c_hum = 0.0;
  TwoComponentField minimizer;
  std::vector<double> ritz_values;
  std::vector<double> probe_quotients;
  int lanczos_steps = 0;
};

std::vector<double> rayleigh_quotients(const HumProblem& problem, const std::vector<TwoComponentField>& probes);

/// Smallest Rayleigh quotient <S V0, V0> / |V0|^2 on the span of the first `modes` sines per
/// component (Lanczos with full reorthogonalization), also evaluated on `n_probes` random probes.
ObservabilityEstimate observability_constant(const HumProblem& problem, int n_probes, std::uint64_t seed = 1,
                                             int modes = 20);

struct H1ProbeRow {
  double s_grad = 0.0;     // <(S V0)_x, (V0)_x>
  double grad_sq = 0.0;    // |V0_x|^2
  double l2_sq = 0.0;      // |V0|^2
  H1Identity identity;
};

struct H1Observability {
  double c1 = 0.0;
  double c2 = 0.0;
  std::vector<H1ProbeRow> rows;
  double max_identity_defect = 0.0;
};

H1Observability h1_observability(const HumProblem& problem, int n_probes, std::uint64_t seed = 1, int modes = 20);

struct CgResult {
  TwoComponentField x;
  int iterations = 0;
  std::vector<double> history;  // relative residuals
};

/// Conjugate gradients for S x = b in the discrete L2 inner product, or for P S P x = P b
/// with P = low_pass when the problem is filtered.
CgResult solve_S(const HumProblem& problem, const TwoComponentField& b);

struct ControlSolution {
  TwoComponentField v0;
  Trajectory control;  // H = V
  Trajectory state;    // Z
  TwoComponentField target;
  double terminal_residual_l2 = 0.0;
  double terminal_residual_h1 = 0.0;
  int cg_iterations = 0;
  std::vector<double> cg_history;
  double control_ratio = 0.0;  // sup_t |H(t)|_{H1} / |Z1|_{H1}
};

ControlSolution solve_linear_control(const HumProblem& problem, const TwoComponentField& z1);

/// Dense S in the interleaved coordinates, one column per unit vector. Only for small grids.
Eigen::MatrixXd assemble_S_dense(const HumProblem& problem);

/// Evolves Y = D V on cell edges by its own Crank-Nicolson scheme, forced by the
/// derivative of the potential, and returns max_t |Y - D V| / |D V|.
double duhamel_consistency(const HumProblem& problem, const TwoComponentField& v0);

}  // namespace nlsctl
