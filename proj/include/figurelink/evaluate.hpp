#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace figurelink::evaluate {

enum class Modality : std::uint8_t { Image = 0, Text = 1 };

/// N unit-normalized D-dimensional rows with unique string ids. Frozen after construction;
/// all queries are read-only and may run concurrently.
class EmbeddingStore {
 public:
  static constexpr double kUnitTolerance = 1e-6;

  EmbeddingStore() = default;
  /// Rows are normalized when `normalize` is set, otherwise checked against kUnitTolerance.
  /// Throws Error(InvalidArgument) for duplicate ids or shape mismatch, Error(ZeroNormRow).
  EmbeddingStore(std::vector<std::string> ids, std::size_t dim, std::vector<double> values, Modality modality,
                 bool normalize = true);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  Modality modality() const noexcept { return modality_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<const double> row(std::size_t i) const noexcept { return {values_.data() + i * dim_, dim_}; }
  std::optional<std::size_t> find(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<double> values_;
  Modality modality_ = Modality::Image;
  std::map<std::string, std::size_t> index_;
};

/// EMB1 file: "EMB1", u32 N, u32 D, u8 modality, N x (u16 length + UTF-8 id), N*D f32, all
/// little-endian. Reading normalizes rows. Throws Error(MalformedFile).
EmbeddingStore read_emb(const std::filesystem::path& path);
void write_emb(const EmbeddingStore& store, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_emb(const EmbeddingStore& store);
EmbeddingStore decode_emb(std::span<const std::uint8_t> bytes);

struct Hit {
  std::string id;
  std::size_t index = 0;
  double similarity = 0.0;

  bool operator==(const Hit&) const = default;
};

double dot(std::span<const double> a, std::span<const double> b) noexcept;

/// Exact top-k by descending cosine; equal similarities order by ascending id.
/// Throws Error(DimensionMismatch), Error(InvalidArgument) when k > N.
std::vector<Hit> exact_topk(std::span<const double> query, const EmbeddingStore& store, std::size_t k);

struct IndexParams {
  std::size_t max_degree = 16;
  std::size_t ef_construction = 100;
  std::size_t ef_search = 64;
  bool exhaustive = false;  // scan every row; equals exact_topk
};

/// Single-layer navigable proximity graph searched best-first with a bounded candidate
/// list. Candidates are re-ranked with the exact_topk order. An ef_search >= N, or
/// `exhaustive`, falls back to the exact scan.
class GraphIndex {
 public:
  GraphIndex() = default;
  GraphIndex(const EmbeddingStore& store, IndexParams params);

  bool built() const noexcept { return store_ != nullptr; }
  const IndexParams& params() const noexcept { return params_; }
  std::size_t degree(std::size_t node) const { return graph_.at(node).size(); }

  /// Throws Error(IndexNotBuilt), Error(DimensionMismatch).
  std::vector<Hit> search(std::span<const double> query, std::size_t k) const;

 private:
  std::vector<std::size_t> beam(std::span<const double> query, std::size_t ef, std::size_t limit) const;
  void link(std::size_t node, const std::vector<std::size_t>& neighbours);

  const EmbeddingStore* store_ = nullptr;
  IndexParams params_;
  std::vector<std::vector<std::size_t>> graph_;
  std::size_t entry_ = 0;
};

std::vector<Hit> ann_topk(std::span<const double> query, const GraphIndex& index, std::size_t k);

/// Fraction of exact top-k ids present in the approximate top-k, averaged over queries.
double candidate_recall(const EmbeddingStore& queries, const EmbeddingStore& targets, const GraphIndex& index,
                        std::size_t k);

struct RetrievalRun {
  std::string direction;                      // "image_to_text" / "text_to_image"
  std::vector<std::size_t> k_values;
  std::vector<std::optional<std::size_t>> ranks;  // 1-based rank of the paired target per query
  std::map<std::size_t, double> recall_at;
};

struct RetrievalReport {
  RetrievalRun forward;   // queries -> targets
  RetrievalRun backward;  // targets -> queries
};

/// Query id -> target id; must be a bijection covering every query.
using Pairing = std::map<std::string, std::string>;

/// Pairs rows with equal ids.
Pairing identity_pairing(const EmbeddingStore& queries);

/// Rank of the paired target under the exact_topk order, both directions.
/// With an index for each direction, ranks come from their top-max(k) lists instead
/// (absent when the target is not retrieved).
/// Throws Error(MissingPair), Error(DimensionMismatch).
RetrievalReport recall_at_k(const EmbeddingStore& queries, const EmbeddingStore& targets, const Pairing& pairing,
                            const std::vector<std::size_t>& k_values, const GraphIndex* forward_index = nullptr,
                            const GraphIndex* backward_index = nullptr);

nlohmann::ordered_json to_json(const RetrievalRun& run);

// ---------------------------------------------------------------------------
// Zero-shot classification

struct ClassSpec {
  std::string class_name;
  std::vector<std::string> prompt_templates;  // each holds exactly one "{}"

  void validate() const;  // Error(InvalidArgument)
};

/// Fills the single "{}" slot.
std::string render_prompt(const std::string& prompt_template, const std::string& class_name);

using TextEmbedder = std::function<std::vector<double>(const std::string&)>;

struct ZeroShotResult {
  std::vector<std::vector<double>> scores;  // N x C cosine similarities
  std::vector<std::size_t> predicted;       // argmax, first class wins ties
  std::optional<double> accuracy;
  std::optional<double> auroc;  // binary tasks only; score = s[1] - s[0], class 1 positive
};

/// Class embedding = renormalized mean of the template embeddings.
/// Throws Error(EmbedderFailure) when the embedder throws or returns a wrong-sized or zero vector.
std::vector<std::vector<double>> class_embeddings(const std::vector<ClassSpec>& classes, const TextEmbedder& embed,
                                                  std::size_t dim);

ZeroShotResult zero_shot_classify(const EmbeddingStore& images, const std::vector<ClassSpec>& classes,
                                  const TextEmbedder& embed,
                                  const std::optional<std::vector<std::size_t>>& labels = std::nullopt);

/// First maximum wins.
std::size_t argmax(std::span<const double> values);

/// Rank-based (Mann-Whitney) AUROC, ties count 1/2. nullopt without both classes.
std::optional<double> auroc(std::span<const double> scores, std::span<const bool> positive);

/// The prompt templates of the published zero-shot benchmarks.
std::vector<ClassSpec> benchmark_classes(const std::string& dataset);

// ---------------------------------------------------------------------------
// Image-type census

struct TaxonomyKeyword {
  std::string type_name;
  std::string keyword;
  std::vector<double> embedding;  // unit norm
};

struct TaxonomyType {
  std::string type_name;
  std::vector<std::string> keywords;
};

/// [{"type_name": string, "keywords": [string]}]. Throws Error(MalformedFile).
std::vector<TaxonomyType> parse_taxonomy(const nlohmann::json& j);

std::vector<TaxonomyKeyword> embed_taxonomy(const std::vector<TaxonomyType>& types, const TextEmbedder& embed,
                                            std::size_t dim);

/// Each image goes to its most similar keyword (first listed wins ties); counts per type,
/// sorted by descending count, then by first appearance in the keyword list.
std::vector<std::pair<std::string, std::size_t>> taxonomy_census(const EmbeddingStore& images,
                                                                 const std::vector<TaxonomyKeyword>& keywords);

/// Embedder backed by a text-modality store whose ids are the prompt strings.
TextEmbedder lookup_embedder(const EmbeddingStore& prompts);

}  // namespace figurelink::evaluate
