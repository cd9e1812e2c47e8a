#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "rbsde/forward.hpp"
#include "rbsde/stopping.hpp"

namespace rbsde::testing {

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// dX = a1 dt + s dW in the uncontrolled block only (dim1 = d, dim2 = 0).
inline FsdeCoefficients uncontrolled(std::size_t d, StateFunction a1, double s, Eigen::VectorXd x0) {
  FsdeCoefficients c;
  c.dim1 = d;
  c.dim2 = 0;
  c.a1 = std::move(a1);
  const auto dd = static_cast<Eigen::Index>(d);
  c.sigma11 = [dd, s](const PathPrefix&) { return Eigen::MatrixXd(s * Eigen::MatrixXd::Identity(dd, dd)); };
  c.cg_a = 1.0;
  c.cg_sigma = [s](double) { return std::abs(s) * 1.0001; };
  c.x0 = std::move(x0);
  return c;
}

inline FsdeCoefficients brownian(std::size_t d = 1, double x0 = 0.0) {
  const auto dd = static_cast<Eigen::Index>(d);
  return uncontrolled(d, [dd](const PathPrefix&) { return Eigen::VectorXd::Zero(dd).eval(); }, 1.0,
                      Eigen::VectorXd::Constant(dd, x0));
}

/// dX = a2(X, alpha) dt + s22 dW in the controlled block only (dim1 = 0, dim2 = 1).
inline FsdeCoefficients controlled_1d(ControlledFunction a2, double s22, double x0, double k_l) {
  FsdeCoefficients c;
  c.dim1 = 0;
  c.dim2 = 1;
  c.a2 = std::move(a2);
  c.sigma11 = [](const PathPrefix&) { return Eigen::MatrixXd(0, 0); };
  c.sigma21 = [](const PathPrefix&) { return Eigen::MatrixXd(1, 0); };
  c.sigma22 = [s22](const PathPrefix&) { return Eigen::MatrixXd::Constant(1, 1, s22); };
  c.sigma22_inv_bound = 1.0 / std::abs(s22);
  c.cg_a = 1.0;
  c.cg_sigma = [s22](double) { return std::abs(s22) * 1.0001; };
  c.k_L = k_l;
  c.x0 = Eigen::VectorXd::Constant(1, x0);
  return c;
}

inline ControlSet interval(double lo, double hi, std::size_t points, std::size_t refine = 0) {
  return ControlSet(Eigen::VectorXd::Constant(1, lo), Eigen::VectorXd::Constant(1, hi), points, refine);
}

/// One-dimensional game dX = alpha dt + dW, A = [-1, 1], phi = 0, psi = 1 - exp(-x^2), rho(t) = t.
inline RobustStoppingProblem bang_bang(double t_solve = 8.0) {
  RobustStoppingProblem pb;
  pb.coeffs = controlled_1d([](const PathPrefix&, const Eigen::VectorXd& a) { return a; }, 1.0, 0.0, 1.0);
  pb.control_set = interval(-1.0, 1.0, 3);
  pb.ham.phi = [](const PathPrefix&, const Eigen::VectorXd&) { return 0.0; };
  pb.ham.psi = [](const PathPrefix& p) { return 1.0 - std::exp(-p.x[0] * p.x[0]); };
  pb.ham.rho = [](double t) { return t; };
  pb.ham.q = 0.0;
  pb.ham.cg_phi = 0.0;
  pb.ham.cg_psi = 1.0;
  pb.schedule.levels_m = {t_solve};
  pb.schedule.levels_n = {t_solve};
  pb.schedule.levels_l = {t_solve};
  pb.schedule.t_solve = t_solve;
  pb.schedule.tol = 1e-2;
  return pb;
}

}  // namespace rbsde::testing
