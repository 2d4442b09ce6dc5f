#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "kcs/manifest.hpp"

namespace kcs {

using SimKFeatures = std::array<double, 4>;

struct SvmConfig {
  std::vector<double> c_grid = {0.1, 1.0, 10.0, 100.0};
  std::vector<double> gamma_grid = {0.1, 0.5, 2.0};
  int cv_folds = 5;
  std::uint64_t seed = 0;
  bool balanced = true;  // per-class C inversely proportional to class counts
  double tolerance = 1e-3;
  int max_iterations = 100000;
};

/// RBF C-SVC fitted by sequential minimal optimization (maximal violating
/// pair selection). Inputs are standardized with training-set statistics.
struct SvmModel {
  std::vector<SimKFeatures> support_x;
  std::vector<double> alpha_y;  // alpha_i * y_i, y in {-1 (normal), +1 (kc)}
  double bias = 0.0;
  double gamma = 1.0;
  double c = 1.0;
  SimKFeatures feat_mu = {0, 0, 0, 0};
  SimKFeatures feat_sigma = {1, 1, 1, 1};
};

/// Grid search over (C, gamma) by stratified cross-validation accuracy,
/// then a final fit on the full training set. Deterministic given the seed.
SvmModel svm_train(const std::vector<SimKFeatures>& features, const std::vector<Label>& labels,
                   const SvmConfig& config = {});

Label svm_predict(const SvmModel& model, const SimKFeatures& features);
double svm_decision(const SvmModel& model, const SimKFeatures& features);

}  // namespace kcs
