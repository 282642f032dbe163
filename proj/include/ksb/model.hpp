#pragma once

#include <Eigen/Dense>

#include <istream>
#include <string>

#include "ksb/errors.hpp"

namespace ksb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Normalization tolerance for Lambda_2 = -1 and for the GTR invariants.
inline constexpr double kModelTolerance = 1e-9;

enum class ModelDiagnostic {
  kBadDimension,
  kNegativeRate,
  kBadRowSum,
  kNonReversible,
  kInvalidStationary,
  kDegenerateSpectrum,
};

const char* to_string(ModelDiagnostic d);

class ModelError : public Error {
 public:
  ModelError(ModelDiagnostic diagnostic, const std::string& what)
      : Error(std::string(to_string(diagnostic)) + ": " + what), diagnostic_(diagnostic) {}
  ModelDiagnostic diagnostic() const { return diagnostic_; }

 private:
  ModelDiagnostic diagnostic_;
};

struct ModelValidation;

// Reversible rate matrix normalized so that its second eigenvalue is -1.
// Immutable; the spectral decomposition of the symmetrized matrix is cached
// for exact transition matrices.
class RateModel {
 public:
  // q-state symmetric (Potts) model: Q_ij = 1/q off the diagonal.
  static RateModel potts(int q);

  int q() const { return q_; }
  const Matrix& rate() const { return rate_; }
  const Vector& pi() const { return pi_; }
  double lambda2() const { return eigenvalues_(q_ - 2); }
  // Eigenvalues in ascending order (the last one is 0).
  const Vector& eigenvalues() const { return eigenvalues_; }
  // Uniform stationary law and equal off-diagonal rates.
  bool is_symmetric() const { return symmetric_; }

  // exp(tau Q) through the symmetric similarity transform.
  Matrix transition(double tau) const;

 private:
  friend ModelValidation validate_gtr(const Matrix& rate, const Vector& pi);
  RateModel(Matrix rate, Vector pi);

  int q_ = 0;
  Matrix rate_;
  Vector pi_;
  Vector eigenvalues_;
  Matrix eigenvectors_;  // of D^{1/2} Q D^{-1/2}
  Vector sqrt_pi_;
  bool symmetric_ = false;
};

struct ModelValidation {
  RateModel model;
  // Factor applied to the input matrix to reach Lambda_2 = -1.
  double scale;
};

// Checks the GTR invariants to kModelTolerance and rescales to Lambda_2 = -1.
// Throws ModelError carrying the first violated invariant.
ModelValidation validate_gtr(const Matrix& rate, const Vector& pi);

// Transition matrix of the model for branch length tau >= 0.
Matrix transition_matrix(const RateModel& model, double tau);

// Off-diagonal entry of the Potts transition matrix, (1/q)(1 - e^{-tau}).
double delta_from_tau(int q, double tau);

// Closed-form Potts transition matrix.
Matrix potts_transition(int q, double tau);

struct Thresholds {
  double g_lin;      // ln sqrt 2 under Lambda_2 = -1
  double g_perc;     // ln 2; meaningful for symmetric models
  double g_lin_bio;  // KS bound when sum_i pi_i Q_ii = -1
};

Thresholds thresholds(const RateModel& model);

// Plain-text model: `q`, then q rows of Q, then pi.
RateModel read_rate_model(std::istream& in);
RateModel read_rate_model_file(const std::string& path);

}  // namespace ksb
