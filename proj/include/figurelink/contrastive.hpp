#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace figurelink::contrastive {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Paired image/text embeddings; row i of `image` pairs with row i of `text`.
struct EmbeddingBatch {
  Matrix image;
  Matrix text;

  std::size_t size() const noexcept { return static_cast<std::size_t>(image.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(image.cols()); }

  /// Throws Error(InvalidArgument) for an empty batch, Error(DimensionMismatch) when shapes differ.
  void validate() const;
};

/// Rows scaled to unit L2 norm. Throws Error(ZeroNormRow).
Matrix normalize_rows(const Matrix& m);

/// Learnable temperature stored as log(1/tau). The effective logit scale is
/// exp(log_scale) clamped to kScaleCap; past the cap the scale has zero gradient.
class Temperature {
 public:
  static constexpr double kScaleCap = 100.0;

  explicit Temperature(double log_scale = 0.0);
  static Temperature from_tau(double tau);

  double log_scale() const noexcept { return log_scale_; }
  double scale() const noexcept;
  bool clamped() const noexcept;

 private:
  double log_scale_;
};

struct LossReport {
  double loss = 0.0;
  Matrix grad_image;  // dL/d(raw image rows), normalization included
  Matrix grad_text;
  double grad_log_scale = 0.0;
};

/// S_ij = cos(image_i, text_j). Throws Error(ZeroNormRow).
Matrix cosine_matrix(const EmbeddingBatch& batch);

/// Symmetric InfoNCE: mean of the image->text and text->image cross-entropies over logits
/// scale * S, with analytic gradients for the raw embeddings and log_scale.
/// Throws Error(NonFiniteInput) or Error(ZeroNormRow).
LossReport info_nce(const EmbeddingBatch& batch, const Temperature& temp);

struct ShardStats {
  std::size_t shards = 0;
  /// Largest number of similarity entries alive at once.
  std::size_t peak_similarity_entries = 0;
};

/// Same loss and gradients as info_nce, computed shard by shard: shard k owns a contiguous
/// block of rows and only forms its rows' similarity slices against the full opposite
/// modality (2 * rows_k * N entries). Partial results are combined by a pairwise tree sum in
/// ascending shard order. With one shard the arithmetic is identical to info_nce.
LossReport info_nce_sharded(const EmbeddingBatch& batch, const Temperature& temp, std::size_t shards,
                            ShardStats* stats = nullptr);

/// Largest relative deviation between analytic gradients and central finite differences
/// over every embedding coordinate and log_scale. Relative to max(|analytic|, |numeric|, 1e-3).
double grad_check(const EmbeddingBatch& batch, const Temperature& temp, double epsilon);

}  // namespace figurelink::contrastive
