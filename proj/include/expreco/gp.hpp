// Copyright 2026, The expreco Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * \file gp.hpp
 * \brief Squared-exponential Gaussian-process regression, one independent GP
 * per output dimension over a shared input set.
 */
#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace expreco {
namespace gp {

struct Hyperparameters {
  /// Diagonal of L, one entry per input feature (feature units).
  Eigen::VectorXd length_scales;
  /// sigma_f^2 (output units^2).
  double signal_variance = 0.0;
  /// sigma_eta^2 (output units^2).
  double noise_variance = 0.0;

  /// Throws std::invalid_argument on non-positive entries.
  void validate() const;

  /// sigma_f = 0.3, sigma_eta = 0.05, L = diag(1.0, 0.5, 0.5) for
  /// features (v_cmd, omega_cmd, curvature).
  static Hyperparameters defaults();

  bool operator==(const Hyperparameters &other) const;
};

struct Prediction {
  double mean = 0.0;
  /// Predictive variance of a noisy observation (latent variance + sigma_eta^2).
  double variance = 0.0;

  double stddev() const;
};

/// Predictions for a batch of query points: rows are points, columns are
/// output dimensions.
struct PredictionTable {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd variance;

  Eigen::Index rows() const { return mean.rows(); }
  Eigen::Index dims() const { return mean.cols(); }
  Prediction at(Eigen::Index row, Eigen::Index dim) const {
    return {mean(row, dim), variance(row, dim)};
  }
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// sigma_f^2 exp(-0.5 (a-b)^T L^-2 (a-b)).
double kernel(const Eigen::Ref<const Eigen::VectorXd> &a,
              const Eigen::Ref<const Eigen::VectorXd> &b,
              const Hyperparameters &hyper);

/// Immutable fitted GP. The empty model (no training data) is the prior.
class GPModel {
 public:
  /// Prior model with the given per-dimension hyperparameters.
  GPModel(Eigen::Index input_dim, std::vector<Hyperparameters> hypers);

  std::size_t size() const { return static_cast<std::size_t>(inputs_.rows()); }
  bool empty() const { return inputs_.rows() == 0; }
  Eigen::Index inputDim() const { return input_dim_; }
  Eigen::Index outputDim() const { return static_cast<Eigen::Index>(dims_.size()); }

  const Eigen::MatrixXd &inputs() const { return inputs_; }
  const Eigen::MatrixXd &outputs() const { return outputs_; }
  const Hyperparameters &hyper(Eigen::Index dim) const;

  /// Lower-triangular Cholesky factor of K for one output dimension.
  Eigen::MatrixXd factor(Eigen::Index dim) const;
  /// K = [kappa(a_i, a_j) + sigma_eta^2 delta_ij] plus any jitter applied.
  Eigen::MatrixXd covariance(Eigen::Index dim) const;
  double jitter(Eigen::Index dim) const;

  std::vector<Prediction> predict(const Eigen::Ref<const Eigen::VectorXd> &query) const;
  PredictionTable predictBatch(const Eigen::MatrixXd &queries) const;

  /// Posterior means only, cheaper than predict().
  Eigen::VectorXd predictMean(const Eigen::Ref<const Eigen::VectorXd> &query) const;

  /// d mu / d a as an (output_dim x input_dim) matrix.
  Eigen::MatrixXd meanGradient(const Eigen::Ref<const Eigen::VectorXd> &query) const;

 private:
  friend GPModel fit(const Eigen::MatrixXd &, const Eigen::MatrixXd &,
                     std::vector<Hyperparameters>);

  // Dimensions with identical hyperparameters share one factorization.
  struct Factor {
    Hyperparameters hyper;
    Eigen::MatrixXd scaled_inputs;  // inputs with columns divided by L
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
  };
  struct Dimension {
    std::size_t factor = 0;
    Eigen::VectorXd weights;  // K^-1 g_hat
  };

  Eigen::VectorXd kernelVector(const Factor &factor,
                               const Eigen::Ref<const Eigen::VectorXd> &query) const;

  Eigen::Index input_dim_ = 0;
  Eigen::MatrixXd inputs_;
  Eigen::MatrixXd outputs_;
  std::vector<std::shared_ptr<const Factor>> factors_;
  std::vector<Dimension> dims_;
  std::vector<Hyperparameters> hypers_;
};

/// Fits one GP per output column. inputs is (m x d), outputs is (m x D) and
/// hypers has D entries. Throws FitError when K stays indefinite after jitter
/// escalation, std::invalid_argument on shape or hyperparameter errors.
GPModel fit(const Eigen::MatrixXd &inputs, const Eigen::MatrixXd &outputs,
            std::vector<Hyperparameters> hypers);

/// Sum over points and output dimensions of log N(g | mu(a), sigma^2(a)).
double logLikelihood(const GPModel &model, const Eigen::MatrixXd &inputs,
                     const Eigen::MatrixXd &outputs);

/// Same as logLikelihood when the predictions at the inputs are already known.
double logLikelihood(const PredictionTable &predictions, const Eigen::MatrixXd &outputs);

}  // namespace gp
}  // namespace expreco
