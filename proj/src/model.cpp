#include "ksb/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ksb {

const char* to_string(ModelDiagnostic d) {
  switch (d) {
    case ModelDiagnostic::kBadDimension: return "bad-dimension";
    case ModelDiagnostic::kNegativeRate: return "negative-rate";
    case ModelDiagnostic::kBadRowSum: return "bad-row-sum";
    case ModelDiagnostic::kNonReversible: return "non-reversible";
    case ModelDiagnostic::kInvalidStationary: return "invalid-stationary";
    case ModelDiagnostic::kDegenerateSpectrum: return "degenerate-spectrum";
  }
  return "unknown";
}

RateModel::RateModel(Matrix rate, Vector pi)
    : q_(static_cast<int>(rate.rows())), rate_(std::move(rate)), pi_(std::move(pi)) {
  sqrt_pi_ = pi_.array().sqrt();
  const Vector inv_sqrt = sqrt_pi_.cwiseInverse();
  Matrix sym = sqrt_pi_.asDiagonal() * rate_ * inv_sqrt.asDiagonal();
  sym = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NumericError("eigendecomposition of the symmetrized rate matrix failed");
  }
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();

  symmetric_ = true;
  const double off = rate_(0, 1);
  for (int i = 0; i < q_ && symmetric_; ++i) {
    if (std::abs(pi_(i) - 1.0 / q_) > kModelTolerance) symmetric_ = false;
    for (int j = 0; j < q_; ++j) {
      if (i != j && std::abs(rate_(i, j) - off) > kModelTolerance * std::max(1.0, off)) {
        symmetric_ = false;
        break;
      }
    }
  }
}

RateModel RateModel::potts(int q) {
  if (q < 2) throw InvalidParameter("potts model needs q >= 2, got " + std::to_string(q));
  Matrix rate = Matrix::Constant(q, q, 1.0 / q);
  rate.diagonal().setConstant(-static_cast<double>(q - 1) / q);
  Vector pi = Vector::Constant(q, 1.0 / q);
  return validate_gtr(rate, pi).model;
}

Matrix RateModel::transition(double tau) const {
  if (!(tau >= 0.0) || !std::isfinite(tau)) {
    throw InvalidParameter("branch length must be finite and >= 0");
  }
  if (tau == 0.0) return Matrix::Identity(q_, q_);
  const Vector expo = (tau * eigenvalues_).array().exp();
  const Matrix sym_exp = eigenvectors_ * expo.asDiagonal() * eigenvectors_.transpose();
  Matrix m = sqrt_pi_.cwiseInverse().asDiagonal() * sym_exp * sqrt_pi_.asDiagonal();
  for (int i = 0; i < q_; ++i) {
    for (int j = 0; j < q_; ++j) {
      double& x = m(i, j);
      if (x < 0.0) {
        if (x < -1e-10) throw NumericError("negative transition probability");
        x = 0.0;
      }
    }
    const double row = m.row(i).sum();
    if (std::abs(row - 1.0) > 1e-8) throw NumericError("transition row does not sum to 1");
    m.row(i) /= row;
  }
  return m;
}

ModelValidation validate_gtr(const Matrix& rate, const Vector& pi) {
  const auto q = rate.rows();
  if (q < 2 || rate.cols() != q || pi.size() != q) {
    throw ModelError(ModelDiagnostic::kBadDimension,
                     "need a square q x q rate matrix with q >= 2 and a length-q pi");
  }
  for (Eigen::Index i = 0; i < q; ++i) {
    if (!(pi(i) > 0.0) || !std::isfinite(pi(i))) {
      throw ModelError(ModelDiagnostic::kInvalidStationary,
                       "pi_" + std::to_string(i + 1) + " must be positive");
    }
  }
  if (std::abs(pi.sum() - 1.0) > kModelTolerance) {
    throw ModelError(ModelDiagnostic::kInvalidStationary, "pi does not sum to 1");
  }
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) {
      if (i != j && !(rate(i, j) > 0.0)) {
        throw ModelError(ModelDiagnostic::kNegativeRate,
                         "Q_" + std::to_string(i + 1) + std::to_string(j + 1) + " must be > 0");
      }
    }
  }
  const double magnitude = rate.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < q; ++i) {
    if (std::abs(rate.row(i).sum()) > kModelTolerance * std::max(1.0, magnitude)) {
      throw ModelError(ModelDiagnostic::kBadRowSum,
                       "row " + std::to_string(i + 1) + " of Q does not sum to 0");
    }
  }
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = i + 1; j < q; ++j) {
      if (std::abs(pi(i) * rate(i, j) - pi(j) * rate(j, i)) >
          kModelTolerance * std::max(1.0, magnitude)) {
        throw ModelError(ModelDiagnostic::kNonReversible,
                         "pi_i Q_ij != pi_j Q_ji for i=" + std::to_string(i + 1) +
                             ", j=" + std::to_string(j + 1));
      }
    }
  }

  // Lambda_2 of the input, read off the symmetrized matrix.
  const Vector sqrt_pi = pi.array().sqrt();
  Matrix sym = sqrt_pi.asDiagonal() * rate * sqrt_pi.cwiseInverse().asDiagonal();
  sym = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("eigenvalue computation failed");
  const double lambda2 = solver.eigenvalues()(q - 2);
  if (!(lambda2 < -kModelTolerance)) {
    throw ModelError(ModelDiagnostic::kDegenerateSpectrum, "second eigenvalue is not negative");
  }
  double scale = -1.0 / lambda2;
  if (std::abs(scale - 1.0) <= kModelTolerance) scale = 1.0;
  return ModelValidation{RateModel(scale * rate, pi), scale};
}

Matrix transition_matrix(const RateModel& model, double tau) { return model.transition(tau); }

double delta_from_tau(int q, double tau) {
  if (q < 2) throw InvalidParameter("q must be >= 2");
  if (!(tau >= 0.0)) throw InvalidParameter("tau must be >= 0");
  return -std::expm1(-tau) / q;
}

Matrix potts_transition(int q, double tau) {
  const double delta = delta_from_tau(q, tau);
  Matrix m = Matrix::Constant(q, q, delta);
  m.diagonal().setConstant(1.0 - (q - 1) * delta);
  return m;
}

Thresholds thresholds(const RateModel& model) {
  if (std::abs(model.lambda2() + 1.0) > kModelTolerance) {
    throw InvalidParameter("thresholds need a model normalized to Lambda_2 = -1");
  }
  // Rescaling Q by c = 1 / (-sum_i pi_i Q_ii) gives the biological convention;
  // its largest negative eigenvalue is then -c.
  const double total_rate = -(model.pi().array() * model.rate().diagonal().array()).sum();
  const double lambda_bio = 1.0 / total_rate;
  Thresholds t;
  t.g_lin = std::log(std::sqrt(2.0));
  t.g_perc = std::log(2.0);
  t.g_lin_bio = std::log(2.0) / (2.0 * lambda_bio);
  return t;
}

RateModel read_rate_model(std::istream& in) {
  std::string line;
  std::stringstream body;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    body << line << '\n';
  }
  int q = 0;
  if (!(body >> q) || q < 2) throw InvalidParameter("model file: first value must be q >= 2");
  Matrix rate(q, q);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) {
      if (!(body >> rate(i, j))) throw InvalidParameter("model file: truncated rate matrix");
    }
  }
  Vector pi(q);
  for (int i = 0; i < q; ++i) {
    if (!(body >> pi(i))) throw InvalidParameter("model file: truncated stationary distribution");
  }
  return validate_gtr(rate, pi).model;
}

RateModel read_rate_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open model file " + path);
  return read_rate_model(in);
}

}  // namespace ksb
