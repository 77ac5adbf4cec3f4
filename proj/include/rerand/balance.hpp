#pragma once

// Covariate balance kernel: difference in group means, sample covariance,
// and the Mahalanobis distance between treated and control covariate means.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rerand/error.hpp"

namespace rerand {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Fixed n x k matrix of unit covariates (one row per unit).
class CovariateMatrix {
 public:
  explicit CovariateMatrix(Eigen::MatrixXd data, std::vector<std::string> column_names = {})
      : data_(std::move(data)), names_(std::move(column_names)) {
    detail::require(data_.rows() >= 2, "covariate matrix needs at least 2 units");
    detail::require(data_.cols() >= 1, "covariate matrix needs at least 1 column");
    detail::require(data_.allFinite(), "covariate matrix has non-finite entries");
    if (names_.empty()) {
      for (Eigen::Index j = 0; j < data_.cols(); ++j) {
        names_.push_back("x" + std::to_string(j + 1));
      }
    }
    detail::require(static_cast<Eigen::Index>(names_.size()) == data_.cols(),
                    "column name count does not match covariate count");
  }

  /// Single-covariate convenience constructor.
  static CovariateMatrix column(std::span<const double> values, std::string name = "x1") {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
      m(static_cast<Eigen::Index>(i), 0) = values[i];
    }
    return CovariateMatrix(std::move(m), {std::move(name)});
  }

  std::size_t n() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t k() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  const Eigen::MatrixXd& data() const noexcept { return data_; }
  const std::vector<std::string>& column_names() const noexcept { return names_; }

 private:
  Eigen::MatrixXd data_;
  std::vector<std::string> names_;
};

/// Binary treatment indicator W (1 = treated). Group sizes follow from the bits.
class Assignment {
 public:
  Assignment() = default;

  static Assignment from_bits(std::vector<std::uint8_t> bits) {
    Assignment w;
    for (auto b : bits) {
      detail::require(b <= 1, "assignment entries must be 0 or 1");
      w.n_treated_ += b;
    }
    w.bits_ = std::move(bits);
    return w;
  }

  static Assignment from_treated(std::size_t n, std::span<const std::uint32_t> treated) {
    std::vector<std::uint8_t> bits(n, 0);
    for (auto i : treated) {
      detail::require(i < n && bits[i] == 0, "treated index out of range or repeated");
      bits[i] = 1;
    }
    return from_bits(std::move(bits));
  }

  std::size_t size() const noexcept { return bits_.size(); }
  std::size_t n_treated() const noexcept { return n_treated_; }
  std::size_t n_control() const noexcept { return bits_.size() - n_treated_; }
  /// p_w = n_t / n.
  double treated_proportion() const noexcept {
    return static_cast<double>(n_treated_) / static_cast<double>(bits_.size());
  }
  bool treated(std::size_t i) const noexcept { return bits_[i] != 0; }
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  /// 1 - W: swap treatment and control.
  Assignment mirrored() const {
    Assignment w;
    w.bits_.resize(bits_.size());
    for (std::size_t i = 0; i < bits_.size(); ++i) {
      w.bits_[i] = static_cast<std::uint8_t>(1 - bits_[i]);
    }
    w.n_treated_ = n_control();
    return w;
  }

  friend bool operator==(const Assignment& a, const Assignment& b) noexcept { return a.bits_ == b.bits_; }
  friend auto operator<=>(const Assignment& a, const Assignment& b) noexcept { return a.bits_ <=> b.bits_; }

 private:
  friend class AssignmentDrawer;

  std::vector<std::uint8_t> bits_;
  std::size_t n_treated_ = 0;
};

namespace detail {

inline void require_nonempty_groups(const Assignment& w) {
  require(w.n_treated() >= 1 && w.n_control() >= 1, "assignment has an empty treatment or control group");
}

}  // namespace detail

/// Treated-minus-control mean of every covariate column.
///
/// Equal to x'(W - p_w 1) / (n p_w (1 - p_w)); computed from the group sums
/// so exact balance gives an exact zero.
inline Eigen::VectorXd diff_in_means(const CovariateMatrix& x, const Assignment& w) {
  detail::require(w.size() == x.n(), "assignment length does not match covariate rows");
  detail::require_nonempty_groups(w);
  const auto& data = x.data();
  Eigen::VectorXd sum_t = Eigen::VectorXd::Zero(data.cols());
  Eigen::VectorXd sum_c = Eigen::VectorXd::Zero(data.cols());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (w.treated(static_cast<std::size_t>(i))) {
      sum_t += data.row(i).transpose();
    } else {
      sum_c += data.row(i).transpose();
    }
  }
  return sum_t / static_cast<double>(w.n_treated()) - sum_c / static_cast<double>(w.n_control());
}

/// Unbiased sample covariance (divisor n - 1).
inline Eigen::MatrixXd sample_covariance(const CovariateMatrix& x) {
  const Eigen::MatrixXd centered = x.data().rowwise() - x.data().colwise().mean();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(x.n() - 1);
  return 0.5 * (cov + cov.transpose());
}

/// Precomputed state for evaluating balance of many assignments of one
/// covariate matrix at fixed group sizes. Immutable and cheap to copy.
///
/// cov(x) is factored as U diag(lambda) U'; eigenvalues at or below
/// lambda_max * k * 64 * eps are dropped (pseudo-inverse). The retained
/// part gives a whitening map L = diag(lambda_r)^{-1/2} U_r' so that
/// M = n p_w (1 - p_w) |L d|^2.
class BalanceContext {
 public:
  /// Builds the context; throws ValidationError when x carries no balance
  /// information (every column constant) or the group sizes are invalid.
  static BalanceContext build(const CovariateMatrix& x, std::size_t n_treated) {
    const std::size_t n = x.n();
    detail::require(n_treated >= 1 && n_treated + 1 <= n, "treated group size must be in [1, n-1]");

    auto impl = std::make_shared<Impl>(x);
    impl->n_treated = n_treated;
    const double p = static_cast<double>(n_treated) / static_cast<double>(n);
    impl->scale = static_cast<double>(n) * p * (1.0 - p);
    impl->cov = sample_covariance(x);
    impl->means = x.data().colwise().mean().transpose();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(impl->cov);
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double lambda_max = lambda.cwiseAbs().maxCoeff();
    const double cutoff = lambda_max * static_cast<double>(x.k()) * 64.0 * std::numeric_limits<double>::epsilon();
    std::vector<Eigen::Index> kept;
    for (Eigen::Index j = 0; j < lambda.size(); ++j) {
      if (lambda(j) > cutoff && lambda(j) > 0.0) {
        kept.push_back(j);
      }
    }
    if (kept.empty()) {
      throw ValidationError("no balance information: every covariate is constant");
    }
    impl->rank = kept.size();
    impl->whitening.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(x.k()));
    for (std::size_t r = 0; r < kept.size(); ++r) {
      const auto j = kept[r];
      impl->whitening.row(static_cast<Eigen::Index>(r)) = eig.eigenvectors().col(j).transpose() / std::sqrt(lambda(j));
    }
    const Eigen::MatrixXd centered = x.data().rowwise() - impl->means.transpose();
    impl->whitened = centered * impl->whitening.transpose();
    impl->centered = centered;
    return BalanceContext(std::move(impl));
  }

  const CovariateMatrix& covariates() const noexcept { return impl_->x; }
  std::size_t n() const noexcept { return impl_->x.n(); }
  std::size_t k() const noexcept { return impl_->x.k(); }
  std::size_t n_treated() const noexcept { return impl_->n_treated; }
  std::size_t n_control() const noexcept { return n() - impl_->n_treated; }
  std::size_t rank() const noexcept { return impl_->rank; }
  bool rank_deficient() const noexcept { return impl_->rank < k(); }
  /// n p_w (1 - p_w).
  double scale() const noexcept { return impl_->scale; }
  const Eigen::MatrixXd& covariance() const noexcept { return impl_->cov; }
  /// rank x k whitening map; L' L is the (pseudo-)inverse of cov(x).
  const Eigen::MatrixXd& whitening() const noexcept { return impl_->whitening; }

  void check(const Assignment& w) const {
    detail::require(w.size() == n(), "assignment length does not match the balance context");
    detail::require(w.n_treated() == n_treated(), "assignment group sizes do not match the balance context");
  }

  /// Difference in covariate means for w (original covariate units).
  Eigen::VectorXd diff(const Assignment& w) const {
    check(w);
    return group_difference(impl_->centered, w);
  }

  /// Canonical form Z = sqrt(n p_w (1-p_w)) L d. Under pure randomization
  /// cov(Z) = I on the retained rank, and M = |Z|^2.
  Eigen::VectorXd canonical(const Assignment& w) const {
    check(w);
    return std::sqrt(scale()) * group_difference(impl_->whitened, w);
  }

  /// Mahalanobis distance M = n p_w (1 - p_w) d' cov(x)^{-1} d.
  double mahalanobis(const Assignment& w) const {
    check(w);
    return scale() * group_difference(impl_->whitened, w).squaredNorm();
  }

 private:
  struct Impl {
    explicit Impl(const CovariateMatrix& covariates) : x(covariates) {}
    CovariateMatrix x;
    std::size_t n_treated = 0;
    std::size_t rank = 0;
    double scale = 0.0;
    Eigen::VectorXd means;
    Eigen::MatrixXd cov;
    Eigen::MatrixXd whitening;
    RowMatrix centered;
    RowMatrix whitened;
  };

  explicit BalanceContext(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

  Eigen::VectorXd group_difference(const RowMatrix& rows, const Assignment& w) const {
    Eigen::VectorXd sum_t = Eigen::VectorXd::Zero(rows.cols());
    Eigen::VectorXd sum_c = Eigen::VectorXd::Zero(rows.cols());
    const auto& bits = w.bits();
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      if (bits[static_cast<std::size_t>(i)] != 0) {
        sum_t += rows.row(i).transpose();
      } else {
        sum_c += rows.row(i).transpose();
      }
    }
    return sum_t / static_cast<double>(n_treated()) - sum_c / static_cast<double>(n_control());
  }

  std::shared_ptr<const Impl> impl_;
};

inline BalanceContext build_context(const CovariateMatrix& x, std::size_t n_treated) {
  return BalanceContext::build(x, n_treated);
}

inline double mahalanobis(const BalanceContext& ctx, const Assignment& w) { return ctx.mahalanobis(w); }

}  // namespace rerand
