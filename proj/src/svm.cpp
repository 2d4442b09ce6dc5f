#include "kcs/svm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kcs/rng.hpp"

namespace kcs {

namespace {

double rbf(const SimKFeatures& a, const SimKFeatures& b, double gamma) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

struct Standardizer {
  SimKFeatures mu{}, sigma{};

  static Standardizer fit(const std::vector<SimKFeatures>& x) {
    Standardizer s;
    const double n = static_cast<double>(x.size());
    for (std::size_t k = 0; k < 4; ++k) {
      double sum = 0.0, sum_sq = 0.0;
      for (const auto& f : x) {
        sum += f[k];
        sum_sq += f[k] * f[k];
      }
      s.mu[k] = sum / n;
      const double var = std::max(sum_sq / n - s.mu[k] * s.mu[k], 0.0);
      s.sigma[k] = std::max(std::sqrt(var), 1e-9);
    }
    return s;
  }

  SimKFeatures apply(const SimKFeatures& f) const {
    SimKFeatures out;
    for (std::size_t k = 0; k < 4; ++k) out[k] = (f[k] - mu[k]) / sigma[k];
    return out;
  }
};

/// Dual C-SVC solver, maximal-violating-pair working set selection.
struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;
};

SmoResult solve_smo(const std::vector<SimKFeatures>& x, const std::vector<int>& y, double c_pos,
                    double c_neg, double gamma, double tolerance, int max_iterations) {
  const int n = static_cast<int>(x.size());
  std::vector<double> kernel(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = rbf(x[i], x[j], gamma);
      kernel[static_cast<std::size_t>(i) * n + j] = v;
      kernel[static_cast<std::size_t>(j) * n + i] = v;
    }
  const auto kij = [&](int i, int j) { return kernel[static_cast<std::size_t>(i) * n + j]; };
  const auto c_of = [&](int i) { return y[i] > 0 ? c_pos : c_neg; };

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // G_i = (Q alpha)_i - 1

  for (int iter = 0; iter < max_iterations; ++iter) {
    // i: max -y G over I_up; j: min -y G over I_low
    int i = -1, j = -1;
    double gmax = -1e300, gmin = 1e300;
    for (int t = 0; t < n; ++t) {
      const bool up = (y[t] > 0 && alpha[t] < c_of(t)) || (y[t] < 0 && alpha[t] > 0);
      const bool low = (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c_of(t));
      const double v = -y[t] * grad[t];
      if (up && v > gmax) {
        gmax = v;
        i = t;
      }
      if (low && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i < 0 || j < 0 || gmax - gmin < tolerance) break;

    const double old_ai = alpha[i], old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = kij(i, i) + kij(j, j) + 2.0 * kij(i, j);
      if (quad <= 0) quad = 1e-12;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else {
        if (alpha[i] < 0) {
          alpha[i] = 0;
          alpha[j] = -diff;
        }
      }
      if (diff > c_of(i) - c_of(j)) {
        if (alpha[i] > c_of(i)) {
          alpha[i] = c_of(i);
          alpha[j] = c_of(i) - diff;
        }
      } else {
        if (alpha[j] > c_of(j)) {
          alpha[j] = c_of(j);
          alpha[i] = c_of(j) + diff;
        }
      }
    } else {
      double quad = kij(i, i) + kij(j, j) - 2.0 * kij(i, j);
      if (quad <= 0) quad = 1e-12;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c_of(i)) {
        if (alpha[i] > c_of(i)) {
          alpha[i] = c_of(i);
          alpha[j] = sum - c_of(i);
        }
      } else {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = sum;
        }
      }
      if (sum > c_of(j)) {
        if (alpha[j] > c_of(j)) {
          alpha[j] = c_of(j);
          alpha[i] = sum - c_of(j);
        }
      } else {
        if (alpha[i] < 0) {
          alpha[i] = 0;
          alpha[j] = sum;
        }
      }
    }

    const double d_ai = (alpha[i] - old_ai) * y[i];
    const double d_aj = (alpha[j] - old_aj) * y[j];
    for (int t = 0; t < n; ++t)
      grad[t] += y[t] * (kij(t, i) * d_ai + kij(t, j) * d_aj);
  }

  // bias from the free support vectors, or the bound midpoint; for a free
  // vector KKT gives y_t * G_t = -b
  double sum_yg = 0.0;
  int n_free = 0;
  double ub = 1e300, lb = -1e300;
  for (int t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] <= 0) {
      if (y[t] > 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else if (alpha[t] >= c_of(t)) {
      if (y[t] < 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else {
      sum_yg += yg;
      ++n_free;
    }
  }
  SmoResult r;
  r.alpha = std::move(alpha);
  r.bias = n_free > 0 ? -sum_yg / n_free : -(ub + lb) / 2.0;
  return r;
}

SvmModel fit_one(const std::vector<SimKFeatures>& x_std, const std::vector<int>& y, double c,
                 double gamma, bool balanced, double tolerance, int max_iterations) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const int v : y) (v > 0 ? n_pos : n_neg)++;
  double c_pos = c, c_neg = c;
  if (balanced) {
    const double n = static_cast<double>(y.size());
    c_pos = c * n / (2.0 * static_cast<double>(n_pos));
    c_neg = c * n / (2.0 * static_cast<double>(n_neg));
  }
  const SmoResult r = solve_smo(x_std, y, c_pos, c_neg, gamma, tolerance, max_iterations);

  SvmModel m;
  m.gamma = gamma;
  m.c = c;
  m.bias = r.bias;
  for (std::size_t i = 0; i < x_std.size(); ++i) {
    if (r.alpha[i] > 0) {
      m.support_x.push_back(x_std[i]);
      m.alpha_y.push_back(r.alpha[i] * y[i]);
    }
  }
  return m;
}

double decision_std(const SvmModel& m, const SimKFeatures& x_std) {
  double f = m.bias;
  for (std::size_t i = 0; i < m.support_x.size(); ++i)
    f += m.alpha_y[i] * rbf(m.support_x[i], x_std, m.gamma);
  return f;
}

/// Stratified fold assignment, deterministic in the seed.
std::vector<int> fold_assignment(const std::vector<Label>& labels, int folds,
                                 std::uint64_t seed) {
  std::vector<int> assign(labels.size(), 0);
  Rng rng(derive_seed(seed, "svm-folds"));
  for (const Label cls : {Label::normal, Label::keratoconus}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    rng.shuffle(idx);
    for (std::size_t k = 0; k < idx.size(); ++k) assign[idx[k]] = static_cast<int>(k % folds);
  }
  return assign;
}

}  // namespace

SvmModel svm_train(const std::vector<SimKFeatures>& features, const std::vector<Label>& labels,
                   const SvmConfig& config) {
  if (features.size() != labels.size() || features.empty())
    throw std::runtime_error("svm_train: bad input sizes");
  std::size_t n_pos = 0, n_neg = 0;
  for (const Label l : labels) (l == Label::keratoconus ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw std::runtime_error("svm_train: both classes must be present");

  const Standardizer std_fit = Standardizer::fit(features);
  std::vector<SimKFeatures> x(features.size());
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    x[i] = std_fit.apply(features[i]);
    y[i] = labels[i] == Label::keratoconus ? 1 : -1;
  }

  const int folds = std::min<int>(config.cv_folds, static_cast<int>(std::min(n_pos, n_neg)));
  double best_acc = -1.0, best_c = config.c_grid.front(), best_gamma = config.gamma_grid.front();
  if (folds >= 2) {
    const auto assign = fold_assignment(labels, folds, config.seed);
    for (const double c : config.c_grid) {
      for (const double gamma : config.gamma_grid) {
        int correct = 0, total = 0;
        for (int f = 0; f < folds; ++f) {
          std::vector<SimKFeatures> xt;
          std::vector<int> yt;
          for (std::size_t i = 0; i < x.size(); ++i)
            if (assign[i] != f) {
              xt.push_back(x[i]);
              yt.push_back(y[i]);
            }
          bool has_pos = false, has_neg = false;
          for (const int v : yt) (v > 0 ? has_pos : has_neg) = true;
          if (!has_pos || !has_neg) continue;
          const SvmModel m = fit_one(xt, yt, c, gamma, config.balanced, config.tolerance,
                                     config.max_iterations);
          for (std::size_t i = 0; i < x.size(); ++i) {
            if (assign[i] != f) continue;
            const int pred = decision_std(m, x[i]) >= 0 ? 1 : -1;
            correct += pred == y[i];
            ++total;
          }
        }
        const double acc = total > 0 ? static_cast<double>(correct) / total : 0.0;
        if (acc > best_acc) {
          best_acc = acc;
          best_c = c;
          best_gamma = gamma;
        }
      }
    }
  }

  SvmModel model = fit_one(x, y, best_c, best_gamma, config.balanced, config.tolerance,
                           config.max_iterations);
  model.feat_mu = std_fit.mu;
  model.feat_sigma = std_fit.sigma;
  return model;
}

double svm_decision(const SvmModel& model, const SimKFeatures& features) {
  SimKFeatures x;
  for (std::size_t k = 0; k < 4; ++k)
    x[k] = (features[k] - model.feat_mu[k]) / model.feat_sigma[k];
  return decision_std(model, x);
}

Label svm_predict(const SvmModel& model, const SimKFeatures& features) {
  return svm_decision(model, features) >= 0 ? Label::keratoconus : Label::normal;
}

}  // namespace kcs
