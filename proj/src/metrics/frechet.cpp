#include <Eigen/Dense>
#include <cstdio>
#include <stdexcept>

#include "mdt/metrics/metrics.hpp"

namespace mdt::metrics {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

void mean_cov(const EmbeddingSet& s, Vec& mu, Mat& cov) {
  const i64 n = s.count(), d = s.dim();
  const Eigen::Map<const Mat> x(s.vectors.data(), d, n);  // column-major view
  mu = x.rowwise().mean();
  const Mat centered = x.colwise() - mu;
  cov = centered * centered.transpose() / static_cast<double>(n - 1);
}

// PSD square root with eigenvalue hygiene: eigenvalues below
// -1e-6 * max(1, lambda_max) are an error, small negatives clip to zero.
Mat sqrt_psd(const Mat& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Mat> eig((m + m.transpose()) * 0.5);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error(std::string("eigendecomposition failed in ") + what);
  Vec ev = eig.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (i64 i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-6 * scale)
      throw std::runtime_error(std::string("matrix square root not PSD in ") + what);
    if (ev[i] < 0.0) ev[i] = 0.0;
    ev[i] = std::sqrt(ev[i]);
  }
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.embedder_id != b.embedder_id)
    throw std::runtime_error("embedder mismatch: " + a.embedder_id + " vs " + b.embedder_id);
  if (a.dim() != b.dim())
    throw std::runtime_error("embedding dimension mismatch");
  if (a.count() < 2 || b.count() < 2)
    throw std::runtime_error("insufficient samples for covariance (need >= 2)");
  const i64 d = a.dim();
  if (a.count() < d + 1 || b.count() < d + 1)
    std::fprintf(stderr,
                 "mdt: warning: embedding sets of %lld/%lld samples in %lld dims "
                 "give rank-deficient covariances\n",
                 static_cast<long long>(a.count()), static_cast<long long>(b.count()),
                 static_cast<long long>(d));

  Vec mu_a, mu_b;
  Mat cov_a, cov_b;
  mean_cov(a, mu_a, cov_a);
  mean_cov(b, mu_b, cov_b);

  const Mat root_a = sqrt_psd(cov_a, "cov(A)");
  const Mat prod = root_a * cov_b * root_a;
  Eigen::SelfAdjointEigenSolver<Mat> eig((prod + prod.transpose()) * 0.5);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition failed in sqrt(cov(A) cov(B))");
  Vec ev = eig.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  double tr_sqrt = 0.0;
  for (i64 i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-6 * scale)
      throw std::runtime_error("matrix square root not PSD in sqrt(cov(A) cov(B))");
    tr_sqrt += std::sqrt(std::max(ev[i], 0.0));
  }

  const double fd = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() -
                    2.0 * tr_sqrt;
  return std::max(fd, 0.0);
}

double dpd(double fid, double content_similarity_pct, double lambda) {
  return fid + lambda * (1.0 - content_similarity_pct / 100.0) * 100.0;
}

}  // namespace mdt::metrics
