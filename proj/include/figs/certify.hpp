#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "figs/flatness.hpp"
#include "figs/types.hpp"

// Stability certification of feedback gains for the extended linear error
// dynamics zdot = A_EXT z + B_EXT s, s = -K z. For a Hurwitz closed loop
// A_cl = A_EXT - B_EXT K we solve A_cl' P + P A_cl = -I and obtain the ISS
// dissipation  Vdot <= -alpha ||z||^2 + beta rbar4^2  with alpha = 1-eps,
// beta = ||P B_EXT||_2^2 / eps, where rbar4 bounds the reference snap. The
// sublevel set Omega_rho = {V <= rho} is then forward invariant provided
// rho >= lambda_max(P) * beta rbar4^2 / alpha: on the boundary,
// ||z||^2 >= V/lambda_max(P) = rho/lambda_max(P) >= beta rbar4^2/alpha, so
// Vdot <= 0 pointwise. (The weaker rho > beta rbar4^2/alpha only controls
// the ultimate bound, not invariance of the level set itself — boundary
// points with small ||z|| can still have Vdot > 0.)

namespace figs {

// Layout: [0..2] position (x,y,z), [3..5] velocity, [6..8] acceleration,
// [9..11] jerk, [12] yaw angle, [13] yaw rate. All entries positive.
struct GainVector {
  Vec14 k = Vec14::Zero();

  // Assemble from per-axis quadruples (k_p, k_v, k_a, k_j) and a yaw pair.
  static GainVector from_axis_levels(const std::array<double, 4>& x,
                                     const std::array<double, 4>& y,
                                     const std::array<double, 4>& z,
                                     const std::array<double, 2>& yaw) {
    GainVector g;
    const std::array<double, 4>* axes[3] = {&x, &y, &z};
    for (int a = 0; a < 3; ++a) {
      g.k(a) = (*axes[a])[0];
      g.k(3 + a) = (*axes[a])[1];
      g.k(6 + a) = (*axes[a])[2];
      g.k(9 + a) = (*axes[a])[3];
    }
    g.k(12) = yaw[0];
    g.k(13) = yaw[1];
    return g;
  }
};

// Repeated pole placement (s + lambda)^4: Hurwitz for any lambda > 0.
inline std::array<double, 4> pole_placement_quadruple(double lambda) {
  return {lambda * lambda * lambda * lambda, 4.0 * lambda * lambda * lambda,
          6.0 * lambda * lambda, 4.0 * lambda};
}

// Yaw double integrator with poles at -mu: (s + mu)^2.
inline std::array<double, 2> pole_placement_yaw(double mu) {
  return {mu * mu, 2.0 * mu};
}

// Feedback matrix: s = -K z. Row i in {0,1,2} closes axis i's chain
// (e_r, e_v, e_a, e_j); row 3 closes the yaw double integrator.
inline Mat4x14 build_K(const GainVector& g) {
  Mat4x14 k = Mat4x14::Zero();
  for (int a = 0; a < 3; ++a) {
    k(a, a) = g.k(a);
    k(a, 3 + a) = g.k(3 + a);
    k(a, 6 + a) = g.k(6 + a);
    k(a, 9 + a) = g.k(9 + a);
  }
  k(3, 12) = g.k(12);
  k(3, 13) = g.k(13);
  return k;
}

struct RouthReport {
  std::array<bool, 3> axis_ok{};
  bool yaw_ok = false;
  bool stable = false;
};

// Routh-Hurwitz test on the per-axis characteristic polynomial
// p(s) = s^4 + k_j s^3 + k_a s^2 + k_v s + k_p and the yaw quadratic
// s^2 + k14 s + k13.
inline RouthReport routh_check(const GainVector& g) {
  RouthReport rep;
  for (int a = 0; a < 3; ++a) {
    const double kp = g.k(a), kv = g.k(3 + a), ka = g.k(6 + a), kj = g.k(9 + a);
    const bool positive = kp > 0 && kv > 0 && ka > 0 && kj > 0;
    const bool c2 = kj * ka > kv;
    const bool c3 = kv * (kj * ka - kv) > kj * kj * kp;
    rep.axis_ok[a] = positive && c2 && c3;
  }
  rep.yaw_ok = g.k(12) > 0 && g.k(13) > 0;
  rep.stable = rep.axis_ok[0] && rep.axis_ok[1] && rep.axis_ok[2] && rep.yaw_ok;
  return rep;
}

inline double max_real_eigenvalue(const Mat14& a) {
  Eigen::EigenSolver<Mat14> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

// Dual-route Hurwitz check: Routh per block and eigenvalues of the full
// 14x14 closed loop. Disagreement outside the +-margin ambiguity band is a
// bug, not a data condition.
inline bool is_hurwitz(const GainVector& g, double margin = 1e-9) {
  const bool routh_ok = routh_check(g).stable;
  const double max_re = max_real_eigenvalue(closed_loop(build_K(g)));
  const bool eig_ok = max_re < -margin;
  if (routh_ok != eig_ok && std::abs(max_re) > 10.0 * margin) {
    throw InternalDisagreement(
        "is_hurwitz: Routh and eigenvalue routes disagree (max Re = " +
        std::to_string(max_re) + ")");
  }
  return routh_ok && eig_ok;
}

// Solve A' P + P A = -I by vectorization: (I (x) A' + A' (x) I) vec(P) =
// vec(-I). Dense full-pivot LU; for the 14-state loop this is a 196x196
// system. Result is symmetrized and residual-checked.
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n) throw Error("solve_lyapunov: A must be square");
  const Eigen::MatrixXd at = a.transpose();
  const int n2 = n * n;
  Eigen::MatrixXd kron = Eigen::MatrixXd::Zero(n2, n2);
  // kron = I (x) A'  +  A' (x) I   (column-stacking vec convention)
  for (int j = 0; j < n; ++j) {
    kron.block(j * n, j * n, n, n) += at;
    for (int i = 0; i < n; ++i) {
      kron.block(j * n, i * n, n, n).diagonal().array() += at(j, i);
    }
  }
  Eigen::VectorXd rhs(n2);
  Eigen::Map<Eigen::MatrixXd>(rhs.data(), n, n) =
      -Eigen::MatrixXd::Identity(n, n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kron);
  if (!lu.isInvertible()) {
    throw NotHurwitz("solve_lyapunov: vectorized system is singular");
  }
  const Eigen::VectorXd vec_p = lu.solve(rhs);
  Eigen::MatrixXd p = Eigen::Map<const Eigen::MatrixXd>(vec_p.data(), n, n);
  p = 0.5 * (p + p.transpose()).eval();
  const double resid =
      (a.transpose() * p + p * a + Eigen::MatrixXd::Identity(n, n)).norm();
  if (!(resid <= 1e-8)) {
    throw InternalDisagreement("solve_lyapunov: residual " +
                               std::to_string(resid) + " out of tolerance");
  }
  return p;
}

struct IssConstants {
  double alpha;
  double beta;
};

inline IssConstants iss_constants(const Mat14& p, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::domain_error("iss_constants: epsilon must lie in (0,1)");
  }
  const Mat14x4 pb = p * b_ext();
  Eigen::JacobiSVD<Mat14x4> svd(pb);
  const double spectral = svd.singularValues()(0);
  return {1.0 - epsilon, spectral * spectral / epsilon};
}

struct Certificate {
  Mat14 P = Mat14::Zero();
  double alpha = 0.0;
  double beta = 0.0;
  double rho = 0.0;
  double snap_bound_used = 0.0;  // rbar4 [m/s^4]
  double lyap_residual = 0.0;    // Frobenius norm of A_cl'P + PA_cl + I
};

struct CertifyOptions {
  double epsilon = 0.5;        // minimizes beta/alpha = ||PB||^2/(eps(1-eps))
  double rho_margin = 1.05;
  double rho_floor = 1e-6;     // keeps Omega_rho a set when rbar4 = 0
  double hurwitz_margin = 1e-9;
};

inline Certificate certify_gain(const GainVector& g, double snap_bound,
                                const CertifyOptions& opts = {}) {
  if (!is_hurwitz(g, opts.hurwitz_margin)) {
    throw NotHurwitz("certify_gain: closed loop is not Hurwitz");
  }
  const Mat14 a_cl = closed_loop(build_K(g));
  Certificate cert;
  cert.P = solve_lyapunov(a_cl);
  cert.lyap_residual =
      (a_cl.transpose() * cert.P + cert.P * a_cl + Mat14::Identity()).norm();

  Eigen::LLT<Mat14> llt(cert.P);
  if (llt.info() != Eigen::Success) {
    throw NotHurwitz("certify_gain: Lyapunov solution is not positive definite");
  }
  const IssConstants iss = iss_constants(cert.P, opts.epsilon);
  cert.alpha = iss.alpha;
  cert.beta = iss.beta;
  cert.snap_bound_used = snap_bound;

  Eigen::SelfAdjointEigenSolver<Mat14> eig(cert.P,
                                           Eigen::EigenvaluesOnly);
  const double lam_max = eig.eigenvalues().maxCoeff();
  // Invariance needs rho >= lambda_max(P) beta rbar4^2 / alpha (see header
  // note); the max(1, .) keeps the margin meaningful when lambda_max < 1.
  const double base = cert.beta * snap_bound * snap_bound / cert.alpha;
  cert.rho = std::max(opts.rho_margin * std::max(1.0, lam_max) * base,
                      opts.rho_floor);
  return cert;
}

// --- certified action table -------------------------------------------------

struct GainTable {
  std::vector<GainVector> gains;
  std::vector<Certificate> certificates;
  std::vector<std::array<double, 4>> translational_levels;
  std::vector<std::array<double, 2>> yaw_levels;
  double snap_bound = 0.0;
  std::string content_hash;  // filled by table_io on save/load

  std::size_t size() const { return gains.size(); }
};

struct CandidateOutcome {
  GainVector gain;
  bool certified = false;
  std::string reason;  // empty on success, rejection reason otherwise
};

struct GainTableBuild {
  GainTable table;
  std::vector<CandidateOutcome> candidates;
};

// Cartesian product x-level x y-level x z-level x yaw-level, yaw index
// fastest. Uncertifiable candidates are recorded with a reason and skipped;
// an all-reject build throws EmptyTable.
inline GainTableBuild build_gain_table(
    const std::vector<std::array<double, 4>>& translational_levels,
    const std::vector<std::array<double, 2>>& yaw_levels, double snap_bound,
    const CertifyOptions& opts = {}, double k_min = 1e-6, double k_max = 1e6) {
  if (translational_levels.empty() || yaw_levels.empty()) {
    throw EmptyTable("build_gain_table: empty level list");
  }
  GainTableBuild out;
  out.table.snap_bound = snap_bound;
  out.table.translational_levels = translational_levels;
  out.table.yaw_levels = yaw_levels;
  for (const auto& lx : translational_levels) {
    for (const auto& ly : translational_levels) {
      for (const auto& lz : translational_levels) {
        for (const auto& yaw : yaw_levels) {
          CandidateOutcome cand;
          cand.gain = GainVector::from_axis_levels(lx, ly, lz, yaw);
          const double lo = cand.gain.k.minCoeff();
          const double hi = cand.gain.k.maxCoeff();
          if (!(lo >= k_min && hi <= k_max)) {
            cand.reason = "gain outside configured box";
          } else {
            try {
              const Certificate cert =
                  certify_gain(cand.gain, snap_bound, opts);
              cand.certified = true;
              out.table.gains.push_back(cand.gain);
              out.table.certificates.push_back(cert);
            } catch (const NotHurwitz& e) {
              cand.reason = e.what();
            }
          }
          out.candidates.push_back(cand);
        }
      }
    }
  }
  if (out.table.gains.empty()) {
    throw EmptyTable("build_gain_table: no candidate certified");
  }
  return out;
}

}  // namespace figs
