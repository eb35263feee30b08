// hypothesis.hpp
//
// Hypothesis classes and training: linear models fit by QR least squares,
// epsilon-SVR with a second-order polynomial kernel fit by pairwise
// coordinate ascent on the dual (maximal-violating-pair selection).
// The loss everywhere is the absolute error.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrc/case_io.hpp"
#include "mrc/linalg.hpp"

namespace mrc::hypothesis {

using case_io::Dataset;

inline double abs_loss(double prediction, double target) { return std::abs(target - prediction); }

// --------------------------------------------------------------------------
// Linear hypothesis: h(x) = w.x + intercept over the dataset's normalized
// feature columns. Affine in its parameters, which the sup-problem encoding
// requires. Columns flagged constant by normalization carry zero weight.
// --------------------------------------------------------------------------
struct LinearHypothesis {
  std::vector<double> weights;
  double intercept = 0.0;

  double predict(const double* x) const {
    double v = intercept;
    for (std::size_t j = 0; j < weights.size(); ++j) v += weights[j] * x[j];
    return v;
  }
  double predict_row(const Mat& x, int i) const { return predict(x.row(i)); }

  // parameter vector [w..., intercept] used by the sup problem
  std::vector<double> params() const {
    std::vector<double> p = weights;
    p.push_back(intercept);
    return p;
  }
  static LinearHypothesis from_params(const std::vector<double>& p) {
    LinearHypothesis h;
    h.weights.assign(p.begin(), p.end() - 1);
    h.intercept = p.back();
    return h;
  }
};

struct RankError : std::runtime_error {
  std::vector<std::string> columns;
  RankError(std::vector<std::string> cols, const std::string& msg)
      : std::runtime_error(msg), columns(std::move(cols)) {}
};

inline LinearHypothesis fit_ols(const Dataset& d) {
  const int p = d.p();
  std::vector<int> active;
  for (int j = 0; j < p; ++j)
    if (!d.norm[j].constant) active.push_back(j);
  const int k = static_cast<int>(active.size());
  if (d.m <= k) throw std::invalid_argument("fit_ols: need more samples than regressors");

  Mat design(d.m, k + 1);
  for (int i = 0; i < d.m; ++i) {
    for (int j = 0; j < k; ++j) design(i, j) = d.x(i, active[j]);
    design(i, k) = 1.0;
  }
  QR qr(design);
  const auto bad = qr.deficient_columns(1e-10);
  if (!bad.empty()) {
    std::vector<std::string> names;
    for (int b : bad) names.push_back(b < k ? d.feature_names[active[b]] : std::string("intercept"));
    std::string msg = "fit_ols: rank-deficient design matrix, columns:";
    for (const auto& n : names) msg += " " + n;
    throw RankError(names, msg);
  }
  const auto beta = qr.solve(d.y);

  LinearHypothesis h;
  h.weights.assign(p, 0.0);
  for (int j = 0; j < k; ++j) h.weights[active[j]] = beta[j];
  h.intercept = beta[k];

  // residual orthogonality post-condition
  std::vector<double> r(d.m);
  for (int i = 0; i < d.m; ++i) r[i] = d.y[i] - h.predict_row(d.x, i);
  double xtr = 0, xty = 0;
  for (int j = 0; j <= k; ++j) {
    double sr = 0, sy = 0;
    for (int i = 0; i < d.m; ++i) {
      const double v = j < k ? d.x(i, active[j]) : 1.0;
      sr += v * r[i];
      sy += v * d.y[i];
    }
    xtr = std::max(xtr, std::abs(sr));
    xty = std::max(xty, std::abs(sy));
  }
  if (xtr > 1e-8 * std::max(xty, 1e-12))
    throw std::runtime_error("fit_ols: residual orthogonality check failed");
  return h;
}

// --------------------------------------------------------------------------
// epsilon-SVR, second-order polynomial kernel K(u,w) = (u.w + c)^2
// --------------------------------------------------------------------------
inline double poly2_kernel(const double* u, const double* w, int dim, double c) {
  double s = c;
  for (int j = 0; j < dim; ++j) s += u[j] * w[j];
  return s * s;
}

struct SvrHypothesis {
  std::vector<double> alpha_pos, alpha_neg;  // dual variables, both in [0, C]
  double bias = 0.0;
  double C = 1.0, eps = 0.1, kernel_c = 1.0;
  Mat support_x;  // training inputs (normalized)

  double beta(int i) const { return alpha_pos[i] - alpha_neg[i]; }
  int m() const { return support_x.rows(); }
  int dim() const { return support_x.cols(); }

  double predict(const double* x) const {
    double v = bias;
    for (int k = 0; k < m(); ++k) {
      const double b = alpha_pos[k] - alpha_neg[k];
      if (b == 0.0) continue;
      v += b * poly2_kernel(support_x.row(k), x, dim(), kernel_c);
    }
    return v;
  }
  double predict_row(const Mat& x, int i) const { return predict(x.row(i)); }
};

struct SvrOptions {
  double kkt_tol = 1e-6;
  long max_passes = 10'000;  // one pass = m pair updates
};

// Max KKT violation of the dual at the current point: the admissible-bias
// intervals across samples must intersect. Returns (violation, bias).
inline std::pair<double, double> svr_kkt(const std::vector<double>& beta, const std::vector<double>& yf,
                                         double C, double eps) {
  // yf_i = y_i - F_i where F_i is the biasless prediction
  double lo = -1e300, hi = 1e300;
  const int m = static_cast<int>(beta.size());
  for (int i = 0; i < m; ++i) {
    double l, h;
    const double b = beta[i];
    if (b >= C - 1e-12) { l = -1e300; h = yf[i] - eps; }
    else if (b > 1e-12) { l = yf[i] - eps; h = yf[i] - eps; }
    else if (b > -1e-12) { l = yf[i] - eps; h = yf[i] + eps; }
    else if (b > -C + 1e-12) { l = yf[i] + eps; h = yf[i] + eps; }
    else { l = yf[i] + eps; h = 1e300; }
    lo = std::max(lo, l);
    hi = std::min(hi, h);
  }
  return {lo - hi, 0.5 * (std::max(lo, -1e300) + std::min(hi, 1e300))};
}

inline SvrHypothesis fit_svr(const Dataset& d, double C, double eps, double kernel_c,
                             SvrOptions opt = SvrOptions()) {
  if (!(C > 0)) throw std::invalid_argument("fit_svr: C must be positive");
  if (eps < 0) throw std::invalid_argument("fit_svr: eps must be nonnegative");
  const int m = d.m;
  const int p = d.p();

  // Gram matrix
  Mat K(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      const double v = poly2_kernel(d.x.row(i), d.x.row(j), p, kernel_c);
      K(i, j) = v;
      K(j, i) = v;
    }

  std::vector<double> beta(m, 0.0), f(m, 0.0), yf(m);
  auto refresh_yf = [&]() {
    for (int i = 0; i < m; ++i) yf[i] = d.y[i] - f[i];
  };
  refresh_yf();

  const long max_updates = opt.max_passes * std::max(1, m);
  long updates = 0;
  double bias = 0.0;
  while (true) {
    // maximal violating pair in the admissible-bias formulation
    double lo = -1e300, hi = 1e300;
    int vi = -1, vj = -1;
    for (int i = 0; i < m; ++i) {
      const double b = beta[i];
      double l = -1e300, h = 1e300;
      if (b >= C - 1e-12) h = yf[i] - eps;
      else if (b > 1e-12) { l = yf[i] - eps; h = yf[i] - eps; }
      else if (b > -1e-12) { l = yf[i] - eps; h = yf[i] + eps; }
      else if (b > -C + 1e-12) { l = yf[i] + eps; h = yf[i] + eps; }
      else l = yf[i] + eps;
      if (l > lo) { lo = l; vi = i; }
      if (h < hi) { hi = h; vj = i; }
    }
    if (lo - hi <= opt.kkt_tol || vi < 0 || vj < 0 || vi == vj) {
      bias = 0.5 * (std::max(lo, hi) + std::min(lo, hi));
      if (lo <= -1e299) bias = hi;
      else if (hi >= 1e299) bias = lo;
      break;
    }
    if (updates++ > max_updates)
      throw std::runtime_error("fit_svr: dual ascent did not converge within max passes");

    // exact 1-D move: beta[vi] += t, beta[vj] -= t; concave piecewise
    // quadratic in t with kinks where either beta crosses zero
    const int i = vi, j = vj;
    const double eta = std::max(K(i, i) + K(j, j) - 2.0 * K(i, j), 1e-12);
    const double gi_smooth = yf[i];  // d/dbeta_i of smooth part
    const double gj_smooth = yf[j];
    const double t_min = std::max(-C - beta[i], beta[j] - C);
    const double t_max = std::min(C - beta[i], beta[j] + C);
    // candidate breakpoints
    std::vector<double> cands{t_min, t_max};
    const double k1 = -beta[i];  // beta_i crosses 0
    const double k2 = beta[j];   // beta_j crosses 0
    if (k1 > t_min && k1 < t_max) cands.push_back(k1);
    if (k2 > t_min && k2 < t_max) cands.push_back(k2);
    // per-segment vertex: W'(t) = gi - gj - eta t - eps*(sgn(beta_i+t) - sgn(beta_j - t)... )
    // enumerate sign combos via segment midpoints
    std::vector<double> sorted = cands;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t s = 0; s + 1 < sorted.size(); ++s) {
      const double mid = 0.5 * (sorted[s] + sorted[s + 1]);
      const double sgn_i = (beta[i] + mid) >= 0 ? 1.0 : -1.0;
      const double sgn_j = (beta[j] - mid) >= 0 ? 1.0 : -1.0;
      // dW/dt = (gi - eps*sgn_i) - (gj - eps*sgn_j) ... careful with -beta_j move
      // W(t) = smooth(t) - eps(|beta_i + t| + |beta_j - t| - const)
      // dW/dt = gi_smooth - gj_smooth - eta t - eps sgn_i + eps sgn_j
      const double t_star = (gi_smooth - gj_smooth - eps * sgn_i + eps * sgn_j) / eta;
      if (t_star > sorted[s] && t_star < sorted[s + 1]) cands.push_back(t_star);
    }
    auto w_of = [&](double t) {
      return (gi_smooth - gj_smooth) * t - 0.5 * eta * t * t -
             eps * (std::abs(beta[i] + t) - std::abs(beta[i])) -
             eps * (std::abs(beta[j] - t) - std::abs(beta[j]));
    };
    double best_t = 0.0, best_w = 0.0;
    for (double t : cands) {
      if (t < t_min - 1e-15 || t > t_max + 1e-15) continue;
      const double w = w_of(t);
      if (w > best_w + 1e-15) {
        best_w = w;
        best_t = t;
      }
    }
    if (best_w <= 1e-14) {
      // numerically stuck pair; nudge tolerance path: accept current point
      bias = 0.5 * (lo + hi);
      break;
    }
    beta[i] += best_t;
    beta[j] -= best_t;
    beta[i] = std::clamp(beta[i], -C, C);
    beta[j] = std::clamp(beta[j], -C, C);
    for (int k = 0; k < m; ++k) f[k] += best_t * (K(i, k) - K(j, k));
    refresh_yf();
  }

  SvrHypothesis h;
  h.C = C;
  h.eps = eps;
  h.kernel_c = kernel_c;
  h.support_x = d.x;
  h.alpha_pos.assign(m, 0.0);
  h.alpha_neg.assign(m, 0.0);
  for (int i = 0; i < m; ++i) {
    if (beta[i] > 0) h.alpha_pos[i] = beta[i];
    else h.alpha_neg[i] = -beta[i];
  }
  h.bias = bias;
  return h;
}

// recomputed-from-scratch KKT violation of a trained model on its data
inline double svr_kkt_violation(const SvrHypothesis& h, const Dataset& d) {
  std::vector<double> beta(d.m), yf(d.m);
  for (int i = 0; i < d.m; ++i) beta[i] = h.beta(i);
  for (int i = 0; i < d.m; ++i) {
    double f = 0;
    for (int k = 0; k < d.m; ++k)
      if (beta[k] != 0.0) f += beta[k] * poly2_kernel(d.x.row(k), d.x.row(i), d.p(), h.kernel_c);
    yf[i] = d.y[i] - f;
  }
  return svr_kkt(beta, yf, h.C, h.eps).first;
}

// --------------------------------------------------------------------------
// Errors
// --------------------------------------------------------------------------
template <typename H>
double empirical_error(const H& h, const Dataset& d) {
  double s = 0;
  for (int i = 0; i < d.m; ++i) s += std::abs(d.y[i] - h.predict_row(d.x, i));
  return s / d.m;
}

template <typename H>
double empirical_mse(const H& h, const Dataset& d) {
  double s = 0;
  for (int i = 0; i < d.m; ++i) {
    const double r = d.y[i] - h.predict_row(d.x, i);
    s += r * r;
  }
  return s / d.m;
}

// --------------------------------------------------------------------------
// Model persistence (JSON with provenance)
// --------------------------------------------------------------------------
inline std::uint64_t dataset_hash(const Dataset& d) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double v) {
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof v);
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  for (int i = 0; i < d.m; ++i) {
    for (int j = 0; j < d.p(); ++j) mix(d.x(i, j));
    mix(d.y[i]);
  }
  return h;
}

inline nlohmann::json to_json(const LinearHypothesis& h) {
  return {{"type", "lr"}, {"weights", h.weights}, {"intercept", h.intercept}};
}

inline nlohmann::json to_json(const SvrHypothesis& h) {
  nlohmann::json j;
  j["type"] = "svr";
  j["alpha_pos"] = h.alpha_pos;
  j["alpha_neg"] = h.alpha_neg;
  j["bias"] = h.bias;
  j["C"] = h.C;
  j["eps"] = h.eps;
  j["kernel_c"] = h.kernel_c;
  j["support_rows"] = h.support_x.rows();
  j["support_cols"] = h.support_x.cols();
  j["support_x"] = h.support_x.data();
  return j;
}

inline LinearHypothesis linear_from_json(const nlohmann::json& j) {
  LinearHypothesis h;
  h.weights = j.at("weights").get<std::vector<double>>();
  h.intercept = j.at("intercept").get<double>();
  return h;
}

inline SvrHypothesis svr_from_json(const nlohmann::json& j) {
  SvrHypothesis h;
  h.alpha_pos = j.at("alpha_pos").get<std::vector<double>>();
  h.alpha_neg = j.at("alpha_neg").get<std::vector<double>>();
  h.bias = j.at("bias").get<double>();
  h.C = j.at("C").get<double>();
  h.eps = j.at("eps").get<double>();
  h.kernel_c = j.at("kernel_c").get<double>();
  const int r = j.at("support_rows").get<int>(), c = j.at("support_cols").get<int>();
  h.support_x = Mat(r, c);
  h.support_x.data() = j.at("support_x").get<std::vector<double>>();
  return h;
}

}  // namespace mrc::hypothesis
