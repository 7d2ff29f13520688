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

#include "expreco/gp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace expreco {
namespace gp {

namespace {

constexpr double kInitialJitter = 1e-10;
constexpr double kMaxJitter = 1e-6;

bool allFinite(const Eigen::Ref<const Eigen::MatrixXd> &m) { return m.allFinite(); }

Eigen::MatrixXd scaleInputs(const Eigen::MatrixXd &inputs, const Eigen::VectorXd &length_scales) {
  return inputs.array().rowwise() / length_scales.transpose().array();
}

}  // namespace

void Hyperparameters::validate() const {
  if (length_scales.size() == 0) {
    throw std::invalid_argument("hyperparameters: no length scales");
  }
  for (Eigen::Index i = 0; i < length_scales.size(); ++i) {
    if (!(length_scales[i] > 0.0) || !std::isfinite(length_scales[i])) {
      throw std::invalid_argument("hyperparameters: length scales must be positive");
    }
  }
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw std::invalid_argument("hyperparameters: signal variance must be positive");
  }
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
    throw std::invalid_argument("hyperparameters: noise variance must be positive");
  }
}

Hyperparameters Hyperparameters::defaults() {
  Hyperparameters h;
  h.length_scales = Eigen::Vector3d(1.0, 0.5, 0.5);
  h.signal_variance = 0.3 * 0.3;
  h.noise_variance = 0.05 * 0.05;
  return h;
}

bool Hyperparameters::operator==(const Hyperparameters &other) const {
  return signal_variance == other.signal_variance && noise_variance == other.noise_variance &&
         length_scales.size() == other.length_scales.size() &&
         length_scales == other.length_scales;
}

double Prediction::stddev() const { return std::sqrt(variance); }

double kernel(const Eigen::Ref<const Eigen::VectorXd> &a, const Eigen::Ref<const Eigen::VectorXd> &b,
              const Hyperparameters &hyper) {
  if (a.size() != b.size() || a.size() != hyper.length_scales.size()) {
    std::ostringstream msg;
    msg << "kernel: dimension mismatch (" << a.size() << ", " << b.size() << ", "
        << hyper.length_scales.size() << ")";
    throw std::invalid_argument(msg.str());
  }
  double sq = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = (a[i] - b[i]) / hyper.length_scales[i];
    sq += d * d;
  }
  return hyper.signal_variance * std::exp(-0.5 * sq);
}

GPModel::GPModel(Eigen::Index input_dim, std::vector<Hyperparameters> hypers)
    : input_dim_(input_dim), inputs_(0, input_dim), outputs_(0, static_cast<Eigen::Index>(hypers.size())) {
  if (hypers.empty()) {
    throw std::invalid_argument("GPModel: at least one output dimension is required");
  }
  for (const auto &h : hypers) {
    h.validate();
    if (h.length_scales.size() != input_dim) {
      throw std::invalid_argument("GPModel: length scale count does not match input dimension");
    }
  }
  hypers_ = std::move(hypers);
  dims_.resize(hypers_.size());
}

const Hyperparameters &GPModel::hyper(Eigen::Index dim) const {
  return hypers_.at(static_cast<std::size_t>(dim));
}

Eigen::MatrixXd GPModel::factor(Eigen::Index dim) const {
  if (empty()) return Eigen::MatrixXd(0, 0);
  const auto &f = *factors_.at(dims_.at(static_cast<std::size_t>(dim)).factor);
  return f.llt.matrixL();
}

Eigen::MatrixXd GPModel::covariance(Eigen::Index dim) const {
  const auto m = inputs_.rows();
  const auto &h = hyper(dim);
  Eigen::MatrixXd k(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = kernel(inputs_.row(i).transpose(), inputs_.row(j).transpose(), h);
    }
  }
  k.diagonal().array() += h.noise_variance + jitter(dim);
  return k;
}

double GPModel::jitter(Eigen::Index dim) const {
  if (empty()) return 0.0;
  return factors_.at(dims_.at(static_cast<std::size_t>(dim)).factor)->jitter;
}

Eigen::VectorXd GPModel::kernelVector(const Factor &factor,
                                      const Eigen::Ref<const Eigen::VectorXd> &query) const {
  const Eigen::VectorXd scaled = query.array() / factor.hyper.length_scales.array();
  const Eigen::Index m = factor.scaled_inputs.rows();
  Eigen::VectorXd k(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double sq = (factor.scaled_inputs.row(i).transpose() - scaled).squaredNorm();
    k[i] = factor.hyper.signal_variance * std::exp(-0.5 * sq);
  }
  return k;
}

std::vector<Prediction> GPModel::predict(const Eigen::Ref<const Eigen::VectorXd> &query) const {
  if (query.size() != input_dim_) {
    throw std::invalid_argument("predict: query dimension mismatch");
  }
  std::vector<Prediction> out(dims_.size());
  if (empty()) {
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      out[d] = {0.0, hypers_[d].signal_variance + hypers_[d].noise_variance};
    }
    return out;
  }
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    const Factor &factor = *factors_[f];
    const Eigen::VectorXd k = kernelVector(factor, query);
    const Eigen::VectorXd v = factor.llt.matrixL().solve(k);
    const double latent = std::max(0.0, factor.hyper.signal_variance - v.squaredNorm());
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      if (dims_[d].factor != f) continue;
      out[d] = {k.dot(dims_[d].weights), latent + factor.hyper.noise_variance};
    }
  }
  return out;
}

Eigen::VectorXd GPModel::predictMean(const Eigen::Ref<const Eigen::VectorXd> &query) const {
  if (query.size() != input_dim_) {
    throw std::invalid_argument("predictMean: query dimension mismatch");
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(outputDim());
  if (empty()) return mean;
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    const Eigen::VectorXd k = kernelVector(*factors_[f], query);
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      if (dims_[d].factor == f) mean[static_cast<Eigen::Index>(d)] = k.dot(dims_[d].weights);
    }
  }
  return mean;
}

PredictionTable GPModel::predictBatch(const Eigen::MatrixXd &queries) const {
  if (queries.cols() != input_dim_) {
    throw std::invalid_argument("predictBatch: query dimension mismatch");
  }
  const Eigen::Index n = queries.rows();
  PredictionTable table{Eigen::MatrixXd::Zero(n, outputDim()), Eigen::MatrixXd(n, outputDim())};
  if (empty()) {
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      table.variance.col(static_cast<Eigen::Index>(d))
          .setConstant(hypers_[d].signal_variance + hypers_[d].noise_variance);
    }
    return table;
  }
  const Eigen::Index m = inputs_.rows();
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    const Factor &factor = *factors_[f];
    const Eigen::MatrixXd scaled = scaleInputs(queries, factor.hyper.length_scales);
    Eigen::MatrixXd ks(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < m; ++i) {
        const double sq = (factor.scaled_inputs.row(i) - scaled.row(j)).squaredNorm();
        ks(i, j) = factor.hyper.signal_variance * std::exp(-0.5 * sq);
      }
    }
    const Eigen::MatrixXd v = factor.llt.matrixL().solve(ks);
    const Eigen::VectorXd latent =
        (factor.hyper.signal_variance - v.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      if (dims_[d].factor != f) continue;
      const auto col = static_cast<Eigen::Index>(d);
      table.mean.col(col) = ks.transpose() * dims_[d].weights;
      table.variance.col(col) = latent.array() + factor.hyper.noise_variance;
    }
  }
  return table;
}

Eigen::MatrixXd GPModel::meanGradient(const Eigen::Ref<const Eigen::VectorXd> &query) const {
  if (query.size() != input_dim_) {
    throw std::invalid_argument("meanGradient: query dimension mismatch");
  }
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(outputDim(), input_dim_);
  if (empty()) return grad;
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    const Factor &factor = *factors_[f];
    const Eigen::VectorXd k = kernelVector(factor, query);
    const Eigen::ArrayXd inv_sq = factor.hyper.length_scales.array().square().inverse();
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      if (dims_[d].factor != f) continue;
      Eigen::VectorXd g = Eigen::VectorXd::Zero(input_dim_);
      for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
        g += (dims_[d].weights[i] * k[i]) *
             ((inputs_.row(i).transpose() - query).array() * inv_sq).matrix();
      }
      grad.row(static_cast<Eigen::Index>(d)) = g.transpose();
    }
  }
  return grad;
}

GPModel fit(const Eigen::MatrixXd &inputs, const Eigen::MatrixXd &outputs,
            std::vector<Hyperparameters> hypers) {
  if (inputs.rows() != outputs.rows()) {
    throw std::invalid_argument("fit: inputs and outputs are not aligned");
  }
  if (static_cast<std::size_t>(outputs.cols()) != hypers.size()) {
    throw std::invalid_argument("fit: one hyperparameter set per output dimension is required");
  }
  if (!allFinite(inputs) || !allFinite(outputs)) {
    throw std::invalid_argument("fit: non-finite training data");
  }
  GPModel model(inputs.cols(), std::move(hypers));
  model.inputs_ = inputs;
  model.outputs_ = outputs;
  const Eigen::Index m = inputs.rows();
  if (m == 0) return model;

  for (std::size_t d = 0; d < model.dims_.size(); ++d) {
    const Hyperparameters &h = model.hypers_[d];
    std::size_t shared = model.factors_.size();
    for (std::size_t f = 0; f < model.factors_.size(); ++f) {
      if (model.factors_[f]->hyper == h) {
        shared = f;
        break;
      }
    }
    if (shared == model.factors_.size()) {
      auto factor = std::make_shared<GPModel::Factor>();
      factor->hyper = h;
      factor->scaled_inputs = scaleInputs(inputs, h.length_scales);
      Eigen::MatrixXd k(m, m);
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
          const double sq = (factor->scaled_inputs.row(i) - factor->scaled_inputs.row(j)).squaredNorm();
          k(i, j) = k(j, i) = h.signal_variance * std::exp(-0.5 * sq);
        }
      }
      k.diagonal().array() += h.noise_variance;

      double jitter = 0.0;
      for (;;) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        factor->llt.compute(kj);
        if (factor->llt.info() == Eigen::Success) {
          const auto diag = factor->llt.matrixLLT().diagonal();
          if (diag.allFinite() && (diag.array() > 0.0).all()) break;
        }
        jitter = jitter == 0.0 ? kInitialJitter * h.signal_variance : jitter * 10.0;
        if (jitter > kMaxJitter * h.signal_variance * (1.0 + 1e-9)) {
          throw FitError("fit: covariance is not positive definite after jitter escalation");
        }
      }
      factor->jitter = jitter;
      model.factors_.push_back(std::move(factor));
    }
    model.dims_[d].factor = shared;
    model.dims_[d].weights = model.factors_[shared]->llt.solve(outputs.col(static_cast<Eigen::Index>(d)));
  }
  return model;
}

double logLikelihood(const PredictionTable &predictions, const Eigen::MatrixXd &outputs) {
  if (predictions.mean.rows() != outputs.rows() || predictions.mean.cols() != outputs.cols()) {
    throw std::invalid_argument("logLikelihood: predictions and data are not aligned");
  }
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
    for (Eigen::Index d = 0; d < outputs.cols(); ++d) {
      const double var = predictions.variance(i, d);
      const double r = outputs(i, d) - predictions.mean(i, d);
      total += -0.5 * (log_two_pi + std::log(var) + r * r / var);
    }
  }
  return total;
}

double logLikelihood(const GPModel &model, const Eigen::MatrixXd &inputs, const Eigen::MatrixXd &outputs) {
  return logLikelihood(model.predictBatch(inputs), outputs);
}

}  // namespace gp
}  // namespace expreco
