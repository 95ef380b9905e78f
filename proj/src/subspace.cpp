#include "metabandit/subspace.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Householder>
#include <Eigen/QR>

#include "metabandit/linalg.hpp"

namespace metabandit {

namespace {

// Residuals below this (relative) size do not seed a new component; they are
// rounding leftovers of the deflation, not signal.
constexpr double kBootstrapTol = 1e-10;

std::string format17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

SubspaceModel::SubspaceModel(int dim)
    : dim_(dim),
      mean_(Eigen::VectorXd::Zero(dim)),
      components_(static_cast<size_t>(dim), Eigen::VectorXd::Zero(dim)) {
  if (dim < 1) throw RankOutOfRange("SubspaceModel: dim must be positive");
}

const Eigen::VectorXd& SubspaceModel::scaled_component(int j) const {
  return components_.at(static_cast<size_t>(j));
}

std::vector<double> SubspaceModel::eigenvalue_estimates() const {
  std::vector<double> sigma(components_.size());
  for (size_t j = 0; j < components_.size(); ++j) {
    sigma[j] = components_[j].norm();
  }
  return sigma;
}

void SubspaceModel::ccipca_update(const Eigen::VectorXd& theta_new) {
  if (theta_new.size() != dim_) {
    throw DimensionMismatch("ccipca_update: parameter dimension mismatch");
  }
  const long i = count_;  // samples absorbed before this one
  count_ += 1;
  mean_ += (theta_new - mean_) / static_cast<double>(count_);

  // Centered residual; deflated in place as each component absorbs its share.
  Eigen::VectorXd z = theta_new - mean_;
  const double scale = 1.0 + z.norm();

  for (auto& v : components_) {
    const double vnorm = v.norm();
    if (vnorm == 0.0) {
      if (z.norm() <= kBootstrapTol * scale) break;
      v = z;  // first surviving residual at this level
      z -= (z.dot(v) / v.squaredNorm()) * v;
      continue;
    }
    const double proj = z.dot(v) / vnorm;
    v = (static_cast<double>(i) * v + proj * z) / static_cast<double>(i + 1);
    const double vnew = v.norm();
    if (vnew > 0.0) {
      z -= (z.dot(v) / (vnew * vnew)) * v;
    }
  }
}

int select_rank(std::vector<double> eigenvalue_estimates) {
  const int d = static_cast<int>(eigenvalue_estimates.size());
  std::sort(eigenvalue_estimates.begin(), eigenvalue_estimates.end(),
            std::greater<double>());
  if (d < 2 ||
      eigenvalue_estimates.front() - eigenvalue_estimates.back() <= 1e-12) {
    throw DegenerateSpectrum("select_rank: no usable eigenvalue gap");
  }
  int best_p = 1;
  double best_gap = eigenvalue_estimates[0] - eigenvalue_estimates[1];
  for (int p = 2; p < d; ++p) {
    const double gap = eigenvalue_estimates[p - 1] - eigenvalue_estimates[p];
    if (gap > best_gap) {
      best_gap = gap;
      best_p = p;
    }
  }
  return best_p;
}

int select_rank(const SubspaceModel& model) {
  if (model.rank_override) return *model.rank_override;
  return select_rank(model.eigenvalue_estimates());
}

namespace {

ProjectionPair pair_from_orthonormal(const Eigen::MatrixXd& q,
                                     const Eigen::VectorXd& mean) {
  const int d = static_cast<int>(q.rows());
  const int p = static_cast<int>(q.cols());
  ProjectionPair pair;
  Eigen::MatrixXd proj = q * q.transpose();
  pair.p_hat = 0.5 * (proj + proj.transpose());
  pair.p_perp = Eigen::MatrixXd::Identity(d, d) - pair.p_hat;
  pair.bias_w = pair.p_perp * mean;
  pair.rank_p = p;
  pair.rank_q = d - p;
  return pair;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& basis) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  Eigen::MatrixXd thin_q =
      qr.householderQ() *
      Eigen::MatrixXd::Identity(basis.rows(), basis.cols());
  return thin_q;
}

}  // namespace

ProjectionPair build_projections(const SubspaceModel& model, int p) {
  const int d = model.dim();
  if (p < 1 || p > d) {
    throw RankOutOfRange("build_projections: rank must lie in [1, dim]");
  }
  if (p == d) return identity_projection(d);

  // Stable top-p selection by component norm; ties keep maintained order.
  std::vector<int> order(static_cast<size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  const std::vector<double> sigma = model.eigenvalue_estimates();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sigma[a] > sigma[b]; });

  Eigen::MatrixXd basis(d, p);
  for (int j = 0; j < p; ++j) {
    const Eigen::VectorXd& v = model.scaled_component(order[static_cast<size_t>(j)]);
    const double n = v.norm();
    basis.col(j) = n > 0.0 ? Eigen::VectorXd(v / n) : Eigen::VectorXd::Zero(d);
  }
  return pair_from_orthonormal(orthonormalize(basis), model.running_mean());
}

ProjectionPair projection_from_basis(const Eigen::MatrixXd& basis,
                                     const Eigen::VectorXd& mean) {
  if (basis.rows() != mean.size()) {
    throw DimensionMismatch("projection_from_basis: basis/mean mismatch");
  }
  if (basis.cols() < 1 || basis.cols() > basis.rows()) {
    throw RankOutOfRange("projection_from_basis: bad basis width");
  }
  if (basis.cols() == basis.rows()) {
    return identity_projection(static_cast<int>(basis.rows()));
  }
  return pair_from_orthonormal(orthonormalize(basis), mean);
}

ProjectionPair identity_projection(int dim) {
  ProjectionPair pair;
  pair.p_hat = Eigen::MatrixXd::Identity(dim, dim);
  pair.p_perp = Eigen::MatrixXd::Zero(dim, dim);
  pair.bias_w = Eigen::VectorXd::Zero(dim);
  pair.rank_p = dim;
  pair.rank_q = 0;
  return pair;
}

ProjectionPair complement_projection(const Eigen::VectorXd& mean) {
  const int d = static_cast<int>(mean.size());
  ProjectionPair pair;
  pair.p_hat = Eigen::MatrixXd::Zero(d, d);
  pair.p_perp = Eigen::MatrixXd::Identity(d, d);
  pair.bias_w = mean;
  pair.rank_p = 0;
  pair.rank_q = d;
  return pair;
}

double projection_error_metric(const ProjectionPair& pair,
                               const Eigen::VectorXd& theta_star,
                               const Eigen::VectorXd& theta_bar) {
  if (theta_star.size() != pair.dim() || theta_bar.size() != pair.dim()) {
    throw DimensionMismatch("projection_error_metric: dimension mismatch");
  }
  return (pair.p_perp * (theta_star - theta_bar)).norm();
}

void save_subspace(const SubspaceModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_subspace: cannot open " + path);
  out << "subspace-model 1\n";
  out << "dim " << model.dim() << "\n";
  out << "count " << model.count() << "\n";
  out << "rank_override " << (model.rank_override ? *model.rank_override : -1)
      << "\n";
  out << "mean";
  for (int i = 0; i < model.dim(); ++i) {
    out << " " << format17(model.running_mean()[i]);
  }
  out << "\n";
  for (int j = 0; j < model.dim(); ++j) {
    out << "comp";
    const Eigen::VectorXd& v = model.scaled_component(j);
    for (int i = 0; i < model.dim(); ++i) out << " " << format17(v[i]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_subspace: write failed: " + path);
}

void SubspaceModel::restore(long count, const Eigen::VectorXd& mean,
                            const std::vector<Eigen::VectorXd>& components) {
  if (mean.size() != dim_ || components.size() != static_cast<size_t>(dim_)) {
    throw DimensionMismatch("SubspaceModel::restore: dimension mismatch");
  }
  for (const auto& v : components) {
    if (v.size() != dim_) {
      throw DimensionMismatch("SubspaceModel::restore: component mismatch");
    }
  }
  count_ = count;
  mean_ = mean;
  components_ = components;
}

namespace {

struct RawModel {
  int dim = 0;
  long count = 0;
  int rank_override = -1;
  Eigen::VectorXd mean;
  std::vector<Eigen::VectorXd> comps;
};

RawModel parse_subspace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_subspace: cannot open " + path);
  RawModel raw;
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "subspace-model" || version != 1) {
    throw std::runtime_error("load_subspace: bad header in " + path);
  }
  if (!(in >> word >> raw.dim) || word != "dim" || raw.dim < 1) {
    throw std::runtime_error("load_subspace: bad dim in " + path);
  }
  if (!(in >> word >> raw.count) || word != "count") {
    throw std::runtime_error("load_subspace: bad count in " + path);
  }
  if (!(in >> word >> raw.rank_override) || word != "rank_override") {
    throw std::runtime_error("load_subspace: bad rank_override in " + path);
  }
  raw.mean.resize(raw.dim);
  if (!(in >> word) || word != "mean") {
    throw std::runtime_error("load_subspace: bad mean row in " + path);
  }
  for (int i = 0; i < raw.dim; ++i) {
    if (!(in >> raw.mean[i])) {
      throw std::runtime_error("load_subspace: truncated mean in " + path);
    }
  }
  raw.comps.assign(static_cast<size_t>(raw.dim),
                   Eigen::VectorXd::Zero(raw.dim));
  for (int j = 0; j < raw.dim; ++j) {
    if (!(in >> word) || word != "comp") {
      throw std::runtime_error("load_subspace: bad component row in " + path);
    }
    for (int i = 0; i < raw.dim; ++i) {
      if (!(in >> raw.comps[static_cast<size_t>(j)][i])) {
        throw std::runtime_error("load_subspace: truncated component in " +
                                 path);
      }
    }
  }
  return raw;
}

}  // namespace

SubspaceModel load_subspace(const std::string& path) {
  const RawModel raw = parse_subspace(path);
  SubspaceModel model(raw.dim);
  model.restore(raw.count, raw.mean, raw.comps);
  if (raw.rank_override >= 0) model.rank_override = raw.rank_override;
  return model;
}

}  // namespace metabandit
