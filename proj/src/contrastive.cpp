#include "figurelink/contrastive.hpp"

#include "figurelink/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace figurelink::contrastive {

void EmbeddingBatch::validate() const {
  if (image.rows() < 1 || image.cols() < 1) throw Error(ErrorCode::InvalidArgument, "batch needs N >= 1 and D >= 1");
  if (image.rows() != text.rows() || image.cols() != text.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "image and text batches differ in shape");
  }
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (!(n > 0.0)) throw Error(ErrorCode::ZeroNormRow, "row " + std::to_string(i) + " has zero norm");
    out.row(i) /= n;
  }
  return out;
}

Temperature::Temperature(double log_scale) : log_scale_(log_scale) {
  if (!std::isfinite(log_scale)) throw Error(ErrorCode::NonFiniteInput, "log_scale must be finite");
}

Temperature Temperature::from_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
  return Temperature(std::log(1.0 / tau));
}

double Temperature::scale() const noexcept { return std::min(std::exp(log_scale_), kScaleCap); }

bool Temperature::clamped() const noexcept { return std::exp(log_scale_) > kScaleCap; }

Matrix cosine_matrix(const EmbeddingBatch& batch) {
  batch.validate();
  return normalize_rows(batch.image) * normalize_rows(batch.text).transpose();
}

namespace {

void require_finite(const EmbeddingBatch& batch) {
  if (!batch.image.allFinite() || !batch.text.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "embeddings contain NaN or infinity");
  }
}

// Loss and gradients w.r.t. the normalized rows, before the normalization Jacobian.
struct Partial {
  double loss_sum = 0.0;  // sum of per-row cross-entropies, both directions
  Matrix grad_image;
  Matrix grad_text;
  double grad_log_scale = 0.0;

  void add(const Partial& o) {
    loss_sum += o.loss_sum;
    grad_image += o.grad_image;
    grad_text += o.grad_text;
    grad_log_scale += o.grad_log_scale;
  }
};

// One direction of one block: queries[r0, r0+b) against all keys. Accumulates the block's
// cross-entropy and pushes dL/dlogits back into both operands.
void directional_block(const Matrix& queries, const Matrix& keys, Eigen::Index r0, Eigen::Index b, double scale,
                       double inv_2n, Matrix& grad_queries, Matrix& grad_keys, double& loss_sum,
                       double& grad_log_scale, std::size_t& live_entries) {
  const Eigen::Index n = keys.rows();
  Matrix logits = scale * (queries.middleRows(r0, b) * keys.transpose());
  live_entries += static_cast<std::size_t>(logits.size());
  Matrix coeff(b, n);  // dL/dlogits, scaled by 1/(2N)
  for (Eigen::Index k = 0; k < b; ++k) {
    const double mx = logits.row(k).maxCoeff();
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) denom += std::exp(logits(k, j) - mx);
    const double lse = mx + std::log(denom);
    loss_sum += lse - logits(k, r0 + k);
    for (Eigen::Index j = 0; j < n; ++j) coeff(k, j) = std::exp(logits(k, j) - lse) * inv_2n;
    coeff(k, r0 + k) -= inv_2n;
  }
  grad_log_scale += (coeff.array() * logits.array()).sum();
  grad_queries.middleRows(r0, b) += scale * (coeff * keys);
  grad_keys += scale * (coeff.transpose() * queries.middleRows(r0, b));
}

Partial block_partial(const Matrix& img, const Matrix& txt, Eigen::Index r0, Eigen::Index b, double scale,
                      std::size_t& live_entries) {
  const Eigen::Index n = img.rows();
  const double inv_2n = 1.0 / (2.0 * static_cast<double>(n));
  Partial p;
  p.grad_image = Matrix::Zero(n, img.cols());
  p.grad_text = Matrix::Zero(n, img.cols());
  directional_block(img, txt, r0, b, scale, inv_2n, p.grad_image, p.grad_text, p.loss_sum, p.grad_log_scale,
                    live_entries);
  directional_block(txt, img, r0, b, scale, inv_2n, p.grad_text, p.grad_image, p.loss_sum, p.grad_log_scale,
                    live_entries);
  return p;
}

// Chain rule through x_hat = x / |x|.
Matrix through_normalization(const Matrix& raw, const Matrix& unit, const Matrix& grad_unit) {
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double n = raw.row(i).norm();
    const double radial = unit.row(i).dot(grad_unit.row(i));
    out.row(i) = (grad_unit.row(i) - radial * unit.row(i)) / n;
  }
  return out;
}

LossReport finish(const EmbeddingBatch& batch, const Matrix& img, const Matrix& txt, const Partial& total,
                  const Temperature& temp) {
  const double n = static_cast<double>(batch.size());
  LossReport r;
  r.loss = total.loss_sum / (2.0 * n);
  r.grad_image = through_normalization(batch.image, img, total.grad_image);
  r.grad_text = through_normalization(batch.text, txt, total.grad_text);
  r.grad_log_scale = temp.clamped() ? 0.0 : total.grad_log_scale;
  return r;
}

Partial pairwise_sum(std::vector<Partial> parts) {
  while (parts.size() > 1) {
    std::vector<Partial> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t i = 0; i < parts.size(); i += 2) {
      if (i + 1 < parts.size()) parts[i].add(parts[i + 1]);
      next.push_back(std::move(parts[i]));
    }
    parts = std::move(next);
  }
  return std::move(parts.front());
}

double loss_only(const EmbeddingBatch& batch, const Temperature& temp) {
  const Matrix img = normalize_rows(batch.image);
  const Matrix txt = normalize_rows(batch.text);
  const Matrix logits = temp.scale() * (img * txt.transpose());
  const Eigen::Index n = logits.rows();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rmx = logits.row(i).maxCoeff();
    const double cmx = logits.col(i).maxCoeff();
    sum += rmx + std::log((logits.row(i).array() - rmx).exp().sum()) - logits(i, i);
    sum += cmx + std::log((logits.col(i).array() - cmx).exp().sum()) - logits(i, i);
  }
  return sum / (2.0 * static_cast<double>(n));
}

}  // namespace

LossReport info_nce(const EmbeddingBatch& batch, const Temperature& temp) {
  batch.validate();
  require_finite(batch);
  const Matrix img = normalize_rows(batch.image);
  const Matrix txt = normalize_rows(batch.text);
  std::size_t live = 0;
  const Partial total = block_partial(img, txt, 0, img.rows(), temp.scale(), live);
  return finish(batch, img, txt, total, temp);
}

LossReport info_nce_sharded(const EmbeddingBatch& batch, const Temperature& temp, std::size_t shards,
                            ShardStats* stats) {
  batch.validate();
  require_finite(batch);
  const std::size_t n = batch.size();
  if (shards < 1 || shards > n) throw Error(ErrorCode::InvalidArgument, "shard count must be in [1, N]");
  const Matrix img = normalize_rows(batch.image);
  const Matrix txt = normalize_rows(batch.text);

  std::vector<Partial> parts;
  parts.reserve(shards);
  std::size_t peak = 0;
  // Contiguous blocks; the first n % shards blocks take one extra row.
  const std::size_t base = n / shards;
  const std::size_t extra = n % shards;
  std::size_t r0 = 0;
  for (std::size_t k = 0; k < shards; ++k) {
    const std::size_t b = base + (k < extra ? 1 : 0);
    std::size_t live = 0;
    parts.push_back(block_partial(img, txt, static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(b), temp.scale(),
                                  live));
    peak = std::max(peak, live);
    r0 += b;
  }
  if (stats != nullptr) *stats = {shards, peak};
  return finish(batch, img, txt, pairwise_sum(std::move(parts)), temp);
}

double grad_check(const EmbeddingBatch& batch, const Temperature& temp, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-3)) throw Error(ErrorCode::InvalidArgument, "epsilon must be in (0, 1e-3]");
  const LossReport analytic = info_nce(batch, temp);
  double worst = 0.0;
  auto track = [&](double a, double f) {
    const double denom = std::max({std::abs(a), std::abs(f), 1e-3});
    worst = std::max(worst, std::abs(a - f) / denom);
  };
  EmbeddingBatch probe = batch;
  for (int side = 0; side < 2; ++side) {
    Matrix& m = side == 0 ? probe.image : probe.text;
    const Matrix& g = side == 0 ? analytic.grad_image : analytic.grad_text;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double orig = m(i, j);
        m(i, j) = orig + epsilon;
        const double up = loss_only(probe, temp);
        m(i, j) = orig - epsilon;
        const double down = loss_only(probe, temp);
        m(i, j) = orig;
        track(g(i, j), (up - down) / (2.0 * epsilon));
      }
    }
  }
  const double up = loss_only(batch, Temperature(temp.log_scale() + epsilon));
  const double down = loss_only(batch, Temperature(temp.log_scale() - epsilon));
  track(analytic.grad_log_scale, (up - down) / (2.0 * epsilon));
  return worst;
}

}  // namespace figurelink::contrastive
