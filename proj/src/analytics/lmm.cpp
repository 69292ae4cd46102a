#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "retinavr/analytics.hpp"
#include "retinavr/error.hpp"

namespace retinavr {

namespace {

/// Sufficient statistics of the random-intercept model. With V = I + lambda Z Z',
/// each cluster's inverse is I - c_i J where c_i = lambda / (1 + lambda n_i), so
/// every lambda-dependent product reduces to per-cluster sums.
class Prepared {
 public:
  explicit Prepared(const LmmData& data) {
    const Eigen::Index n = data.X.rows();
    p_ = data.X.cols();
    n_obs_ = n;
    if (data.y.size() != n || static_cast<Eigen::Index>(data.group.size()) != n) {
      throw Error(ErrorCode::SingularDesign, "design, response and grouping sizes disagree");
    }
    if (n <= p_) throw Error(ErrorCode::SingularDesign, "fewer observations than fixed effects");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.X);
    if (qr.rank() < p_) {
      throw Error(ErrorCode::SingularDesign,
                  "fixed-effect design has rank " + std::to_string(qr.rank()) + " < " + std::to_string(p_));
    }
    xtx_ = data.X.transpose() * data.X;
    xty_ = data.X.transpose() * data.y;
    yty_ = data.y.squaredNorm();
    std::map<int, int> slot;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto [it, fresh] = slot.emplace(data.group[i], static_cast<int>(sizes_.size()));
      if (fresh) {
        sizes_.push_back(0);
        xsum_.push_back(Eigen::VectorXd::Zero(p_));
        ysum_.push_back(0.0);
      }
      const int g = it->second;
      ++sizes_[g];
      xsum_[g] += data.X.row(i).transpose();
      ysum_[g] += data.y[i];
    }
  }

  struct Eval {
    double criterion;
    double sigma2;
    Eigen::VectorXd beta;
    Eigen::MatrixXd xtvx_inv;
  };

  Eval evaluate(double lambda, bool want_beta) const {
    Eigen::MatrixXd a = xtx_;
    Eigen::VectorXd b = xty_;
    double yvy = yty_;
    double logdet_v = 0.0;
    for (std::size_t g = 0; g < sizes_.size(); ++g) {
      const double c = lambda / (1.0 + lambda * sizes_[g]);
      a.noalias() -= c * xsum_[g] * xsum_[g].transpose();
      b -= c * ysum_[g] * xsum_[g];
      yvy -= c * ysum_[g] * ysum_[g];
      logdet_v += std::log1p(lambda * sizes_[g]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularDesign, "X' V^-1 X is not positive definite");
    Eigen::VectorXd beta = llt.solve(b);
    const double rvr = std::max(yvy - b.dot(beta), std::numeric_limits<double>::min());
    const double dof = static_cast<double>(n_obs_ - p_);
    const double sigma2 = rvr / dof;
    double logdet_a = 0.0;
    const Eigen::MatrixXd& l = llt.matrixLLT();
    for (Eigen::Index k = 0; k < p_; ++k) logdet_a += 2.0 * std::log(l(k, k));
    Eval e{dof * std::log(sigma2) + logdet_v + logdet_a, sigma2, {}, {}};
    if (want_beta) {
      e.beta = std::move(beta);
      e.xtvx_inv = llt.solve(Eigen::MatrixXd::Identity(p_, p_));
    }
    return e;
  }

  double criterion(double lambda) const { return evaluate(lambda, false).criterion; }

 private:
  Eigen::Index p_ = 0;
  Eigen::Index n_obs_ = 0;
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
  double yty_ = 0.0;
  std::vector<int> sizes_;
  std::vector<Eigen::VectorXd> xsum_;
  std::vector<double> ysum_;
};

}  // namespace

double reml_criterion(const LmmData& data, double lambda) { return Prepared(data).criterion(lambda); }

LmmFit fit_lmm(const LmmData& data, const LmmOptions& options) {
  const Prepared prep(data);

  // Coarse log-spaced scan to bracket the optimum.
  std::vector<double> grid{0.0};
  for (double e = -8.0; std::pow(10.0, e) < options.lambda_max; e += 0.25) grid.push_back(std::pow(10.0, e));
  grid.push_back(options.lambda_max);
  std::vector<double> values;
  for (double l : grid) values.push_back(prep.criterion(l));
  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  double lo = grid[best == 0 ? 0 : best - 1];
  double hi = grid[std::min(best + 1, grid.size() - 1)];

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = prep.criterion(x1);
  double f2 = prep.criterion(x2);
  int iterations = 0;
  while (hi - lo > options.tolerance) {
    if (++iterations > options.max_iterations) {
      throw Error(ErrorCode::NonConvergence, "golden-section search stopped after " +
                                                 std::to_string(options.max_iterations) + " iterations with bracket [" +
                                                 std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = prep.criterion(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = prep.criterion(x2);
    }
  }

  // The bracket ends and the grid minimum are candidates too.
  double lambda = f1 <= f2 ? x1 : x2;
  double crit = std::min(f1, f2);
  for (double cand : {lo, hi}) {
    const double c = prep.criterion(cand);
    if (c < crit) {
      crit = c;
      lambda = cand;
    }
  }
  if (values[best] < crit) {
    crit = values[best];
    lambda = grid[best];
  }

  const auto e = prep.evaluate(lambda, true);
  LmmFit fit;
  fit.names = data.names;
  fit.beta = e.beta;
  fit.se = (e.sigma2 * e.xtvx_inv.diagonal()).cwiseSqrt();
  fit.p_value.resize(fit.beta.size());
  for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
    const double z = fit.beta[k] / fit.se[k];
    fit.p_value[k] = std::erfc(std::abs(z) / std::sqrt(2.0));
  }
  fit.sigma_e2 = e.sigma2;
  fit.sigma_b2 = lambda * e.sigma2;
  fit.lambda = lambda;
  fit.reml_criterion = e.criterion;
  fit.converged = true;
  fit.iterations = iterations;
  return fit;
}

LmmData build_lmm_data(const MetricsTable& table, TaskKind module, const std::string& metric) {
  std::vector<const MetricsRow*> rows;
  for (const auto& r : table.rows) {
    if (r.module == module && r.metric == metric) rows.push_back(&r);
  }
  LmmData data;
  data.names = {"intercept", "expertise", "age", "sex", "run"};
  data.X.resize(static_cast<Eigen::Index>(rows.size()), 5);
  data.y.resize(static_cast<Eigen::Index>(rows.size()));
  std::map<std::string, int> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const MetricsRow& r = *rows[i];
    const auto k = static_cast<Eigen::Index>(i);
    data.X(k, 0) = 1.0;
    data.X(k, 1) = r.group == Group::Novice ? 1.0 : 0.0;
    data.X(k, 2) = r.age;
    data.X(k, 3) = r.sex == Sex::Male ? 1.0 : 0.0;
    data.X(k, 4) = r.run_index;
    data.y[k] = r.value;
    auto [it, fresh] = ids.emplace(r.participant_id, static_cast<int>(ids.size()));
    data.group.push_back(it->second);
  }
  data.group_count = static_cast<int>(ids.size());
  return data;
}

}  // namespace retinavr
