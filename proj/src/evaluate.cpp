#include "figurelink/evaluate.hpp"

#include "figurelink/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

namespace figurelink::evaluate {

// ---------------------------------------------------------------------------
// Store

EmbeddingStore::EmbeddingStore(std::vector<std::string> ids, std::size_t dim, std::vector<double> values,
                               Modality modality, bool normalize)
    : ids_(std::move(ids)), dim_(dim), values_(std::move(values)), modality_(modality) {
  if (dim_ == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be >= 1");
  if (values_.size() != ids_.size() * dim_) throw Error(ErrorCode::InvalidArgument, "values size != N*D");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw Error(ErrorCode::InvalidArgument, "duplicate id " + ids_[i]);
    double* r = values_.data() + i * dim_;
    double sq = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) sq += r[d] * r[d];
    const double n = std::sqrt(sq);
    if (!std::isfinite(n)) throw Error(ErrorCode::NonFiniteInput, "row " + ids_[i] + " is not finite");
    if (!(n > 0.0)) throw Error(ErrorCode::ZeroNormRow, "row " + ids_[i] + " has zero norm");
    if (normalize) {
      for (std::size_t d = 0; d < dim_; ++d) r[d] /= n;
    } else if (std::abs(n - 1.0) > kUnitTolerance) {
      throw Error(ErrorCode::InvalidArgument, "row " + ids_[i] + " is not unit norm");
    }
  }
}

std::optional<std::size_t> EmbeddingStore::find(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

static_assert(std::endian::native == std::endian::little, "EMB1 I/O assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw Error(ErrorCode::MalformedFile, "EMB1 file truncated");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_emb(const EmbeddingStore& store) {
  std::vector<std::uint8_t> out = {'E', 'M', 'B', '1'};
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(store.modality()));
  for (const auto& id : store.ids()) {
    if (id.size() > 0xFFFF) throw Error(ErrorCode::InvalidArgument, "id longer than 65535 bytes");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out.insert(out.end(), id.begin(), id.end());
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    for (const double v : store.row(i)) put<float>(out, static_cast<float>(v));
  }
  return out;
}

EmbeddingStore decode_emb(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "EMB1", 4) != 0) {
    throw Error(ErrorCode::MalformedFile, "missing EMB1 magic");
  }
  std::size_t pos = 4;
  const auto n = take<std::uint32_t>(bytes, pos);
  const auto d = take<std::uint32_t>(bytes, pos);
  const auto modality = take<std::uint8_t>(bytes, pos);
  if (modality > 1) throw Error(ErrorCode::MalformedFile, "unknown modality byte");
  if (d == 0) throw Error(ErrorCode::MalformedFile, "zero dimension");
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = take<std::uint16_t>(bytes, pos);
    if (pos + len > bytes.size()) throw Error(ErrorCode::MalformedFile, "EMB1 id truncated");
    ids.emplace_back(reinterpret_cast<const char*>(bytes.data() + pos), len);
    pos += len;
  }
  const std::size_t count = static_cast<std::size_t>(n) * d;
  if (bytes.size() - pos != count * sizeof(float)) {
    throw Error(ErrorCode::MalformedFile, "EMB1 payload size does not match N*D");
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = take<float>(bytes, pos);
  try {
    return EmbeddingStore(std::move(ids), d, std::move(values), static_cast<Modality>(modality), true);
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedFile, e.what());
  }
}

EmbeddingStore read_emb(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MalformedFile, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_emb(bytes);
}

void write_emb(const EmbeddingStore& store, const std::filesystem::path& path) {
  const auto bytes = encode_emb(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::OutputUnwritable, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Exact search

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

bool hit_before(const Hit& a, const Hit& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.id < b.id;
}

void check_dim(std::span<const double> query, const EmbeddingStore& store) {
  if (query.size() != store.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "query has dimension " + std::to_string(query.size()) + ", store has " + std::to_string(store.dim()));
  }
}

std::vector<Hit> rank_candidates(std::span<const double> query, const EmbeddingStore& store,
                                 const std::vector<std::size_t>& candidates, std::size_t k) {
  std::vector<Hit> hits;
  hits.reserve(candidates.size());
  for (const auto i : candidates) hits.push_back({store.id(i), i, dot(query, store.row(i))});
  k = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), hit_before);
  hits.resize(k);
  return hits;
}

}  // namespace

std::vector<Hit> exact_topk(std::span<const double> query, const EmbeddingStore& store, std::size_t k) {
  check_dim(query, store);
  if (k > store.size()) throw Error(ErrorCode::InvalidArgument, "k exceeds store size");
  std::vector<std::size_t> all(store.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return rank_candidates(query, store, all, k);
}

// ---------------------------------------------------------------------------
// Graph index

GraphIndex::GraphIndex(const EmbeddingStore& store, IndexParams params) : store_(&store), params_(params) {
  if (params_.max_degree < 1 || params_.ef_construction < 1 || params_.ef_search < 1) {
    throw Error(ErrorCode::InvalidArgument, "index parameters must be >= 1");
  }
  const std::size_t n = store.size();
  graph_.assign(n, {});
  if (n == 0 || params_.exhaustive) return;
  for (std::size_t i = 1; i < n; ++i) {
    const auto found = beam(store.row(i), params_.ef_construction, i);
    std::vector<std::size_t> nearest(found.begin(),
                                     found.begin() + static_cast<std::ptrdiff_t>(std::min(found.size(), params_.max_degree)));
    link(i, nearest);
  }
}

void GraphIndex::link(std::size_t node, const std::vector<std::size_t>& neighbours) {
  const std::size_t cap = 2 * params_.max_degree;
  graph_[node] = neighbours;
  for (const auto nb : neighbours) {
    auto& adj = graph_[nb];
    adj.push_back(node);
    if (adj.size() > cap) {
      const auto anchor = store_->row(nb);
      std::stable_sort(adj.begin(), adj.end(), [&](std::size_t a, std::size_t b) {
        return dot(anchor, store_->row(a)) > dot(anchor, store_->row(b));
      });
      adj.resize(cap);
    }
  }
}

// Best-first search over nodes [0, limit); returns up to ef node ids, best first.
std::vector<std::size_t> GraphIndex::beam(std::span<const double> query, std::size_t ef, std::size_t limit) const {
  using Entry = std::pair<double, std::size_t>;  // (similarity, node)
  auto worse = [](const Entry& a, const Entry& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); };
  auto better = [](const Entry& a, const Entry& b) { return a.first < b.first || (a.first == b.first && a.second > b.second); };
  std::priority_queue<Entry, std::vector<Entry>, decltype(better)> frontier(better);  // max-heap
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> best(worse);        // min-heap of kept results
  std::vector<bool> visited(limit, false);
  const std::size_t start = std::min(entry_, limit - 1);
  const Entry first{dot(query, store_->row(start)), start};
  visited[start] = true;
  frontier.push(first);
  best.push(first);
  while (!frontier.empty()) {
    const Entry cur = frontier.top();
    frontier.pop();
    if (best.size() >= ef && cur.first < best.top().first) break;
    for (const auto nb : graph_[cur.second]) {
      if (nb >= limit || visited[nb]) continue;
      visited[nb] = true;
      const Entry e{dot(query, store_->row(nb)), nb};
      if (best.size() < ef || e.first > best.top().first) {
        frontier.push(e);
        best.push(e);
        if (best.size() > ef) best.pop();
      }
    }
  }
  std::vector<Entry> out;
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  std::vector<std::size_t> ids;
  ids.reserve(out.size());
  for (const auto& e : out) ids.push_back(e.second);
  return ids;
}

std::vector<Hit> GraphIndex::search(std::span<const double> query, std::size_t k) const {
  if (!built()) throw Error(ErrorCode::IndexNotBuilt, "search on an index that was never built");
  check_dim(query, *store_);
  if (k > store_->size()) throw Error(ErrorCode::InvalidArgument, "k exceeds store size");
  const std::size_t ef = std::max(params_.ef_search, k);
  if (params_.exhaustive || ef >= store_->size()) return exact_topk(query, *store_, k);
  return rank_candidates(query, *store_, beam(query, ef, store_->size()), k);
}

std::vector<Hit> ann_topk(std::span<const double> query, const GraphIndex& index, std::size_t k) {
  return index.search(query, k);
}

double candidate_recall(const EmbeddingStore& queries, const EmbeddingStore& targets, const GraphIndex& index,
                        std::size_t k) {
  if (queries.size() == 0) return 1.0;
  double total = 0.0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto exact = exact_topk(queries.row(q), targets, k);
    const auto approx = index.search(queries.row(q), k);
    std::set<std::size_t> got;
    for (const auto& h : approx) got.insert(h.index);
    std::size_t found = 0;
    for (const auto& h : exact) found += got.count(h.index);
    total += static_cast<double>(found) / static_cast<double>(exact.size());
  }
  return total / static_cast<double>(queries.size());
}

// ---------------------------------------------------------------------------
// Recall@k

Pairing identity_pairing(const EmbeddingStore& queries) {
  Pairing p;
  for (const auto& id : queries.ids()) p.emplace(id, id);
  return p;
}

namespace {

// 1-based position of `target` in the exact order, without sorting.
std::size_t exact_rank(std::span<const double> query, const EmbeddingStore& store, std::size_t target) {
  const double s_true = dot(query, store.row(target));
  const std::string& id_true = store.id(target);
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < store.size(); ++j) {
    if (j == target) continue;
    const double s = dot(query, store.row(j));
    if (s > s_true || (s == s_true && store.id(j) < id_true)) ++ahead;
  }
  return ahead + 1;
}

RetrievalRun run_direction(const std::string& name, const EmbeddingStore& queries, const EmbeddingStore& targets,
                           const std::vector<std::size_t>& target_of, const std::vector<std::size_t>& k_values,
                           const GraphIndex* index) {
  RetrievalRun run;
  run.direction = name;
  run.k_values = k_values;
  const std::size_t max_k = k_values.empty() ? 1 : std::min(targets.size(), *std::max_element(k_values.begin(), k_values.end()));
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (index == nullptr) {
      run.ranks.emplace_back(exact_rank(queries.row(q), targets, target_of[q]));
      continue;
    }
    const auto hits = index->search(queries.row(q), max_k);
    std::optional<std::size_t> rank;
    for (std::size_t r = 0; r < hits.size(); ++r) {
      if (hits[r].index == target_of[q]) {
        rank = r + 1;
        break;
      }
    }
    run.ranks.push_back(rank);
  }
  for (const auto k : k_values) {
    std::size_t hit = 0;
    for (const auto& r : run.ranks) hit += (r && *r <= k) ? 1 : 0;
    run.recall_at[k] = queries.size() == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(queries.size());
  }
  return run;
}

}  // namespace

RetrievalReport recall_at_k(const EmbeddingStore& queries, const EmbeddingStore& targets, const Pairing& pairing,
                            const std::vector<std::size_t>& k_values, const GraphIndex* forward_index,
                            const GraphIndex* backward_index) {
  if (queries.dim() != targets.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "queries have dimension " + std::to_string(queries.dim()) +
                                                  ", targets have " + std::to_string(targets.dim()));
  }
  for (const auto k : k_values) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k values must be >= 1");
  }
  std::vector<std::size_t> target_of(queries.size());
  std::vector<std::optional<std::size_t>> query_of(targets.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto it = pairing.find(queries.id(q));
    if (it == pairing.end()) throw Error(ErrorCode::MissingPair, "query " + queries.id(q) + " has no pair");
    const auto t = targets.find(it->second);
    if (!t) throw Error(ErrorCode::MissingPair, "target " + it->second + " not in target store");
    if (query_of[*t]) throw Error(ErrorCode::MissingPair, "target " + it->second + " paired twice");
    target_of[q] = *t;
    query_of[*t] = q;
  }
  std::vector<std::size_t> back_target(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (!query_of[t]) throw Error(ErrorCode::MissingPair, "target " + targets.id(t) + " has no pair");
    back_target[t] = *query_of[t];
  }
  const bool image_queries = queries.modality() == Modality::Image;
  RetrievalReport report;
  report.forward = run_direction(image_queries ? "image_to_text" : "text_to_image", queries, targets, target_of,
                                 k_values, forward_index);
  report.backward = run_direction(image_queries ? "text_to_image" : "image_to_text", targets, queries, back_target,
                                  k_values, backward_index);
  return report;
}

nlohmann::ordered_json to_json(const RetrievalRun& run) {
  nlohmann::ordered_json j;
  j["direction"] = run.direction;
  j["queries"] = run.ranks.size();
  nlohmann::ordered_json recall;
  for (const auto& [k, r] : run.recall_at) recall["R@" + std::to_string(k)] = r;
  j["recall"] = recall;
  return j;
}

// ---------------------------------------------------------------------------
// Zero-shot

void ClassSpec::validate() const {
  if (class_name.empty()) throw Error(ErrorCode::InvalidArgument, "class name is empty");
  if (prompt_templates.empty()) throw Error(ErrorCode::InvalidArgument, "class " + class_name + " has no templates");
  for (const auto& t : prompt_templates) {
    const auto first = t.find("{}");
    if (first == std::string::npos || t.find("{}", first + 2) != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "template must contain exactly one {} slot: " + t);
    }
  }
}

std::string render_prompt(const std::string& prompt_template, const std::string& class_name) {
  std::string out = prompt_template;
  const auto at = out.find("{}");
  if (at != std::string::npos) out.replace(at, 2, class_name);
  return out;
}

namespace {

std::vector<double> embed_checked(const TextEmbedder& embed, const std::string& text, std::size_t dim) {
  std::vector<double> v;
  try {
    v = embed(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::EmbedderFailure, "embedding '" + text + "': " + e.what());
  }
  if (v.size() != dim) {
    throw Error(ErrorCode::EmbedderFailure, "embedding '" + text + "' has dimension " + std::to_string(v.size()));
  }
  double sq = 0.0;
  for (const double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::EmbedderFailure, "embedding '" + text + "' is degenerate");
  for (auto& x : v) x /= n;
  return v;
}

}  // namespace

std::vector<std::vector<double>> class_embeddings(const std::vector<ClassSpec>& classes, const TextEmbedder& embed,
                                                  std::size_t dim) {
  std::vector<std::vector<double>> out;
  for (const auto& c : classes) {
    c.validate();
    std::vector<double> mean(dim, 0.0);
    for (const auto& t : c.prompt_templates) {
      const auto v = embed_checked(embed, render_prompt(t, c.class_name), dim);
      for (std::size_t d = 0; d < dim; ++d) mean[d] += v[d];
    }
    double sq = 0.0;
    for (const double x : mean) sq += x * x;
    const double n = std::sqrt(sq);
    if (!(n > 0.0)) throw Error(ErrorCode::EmbedderFailure, "class " + c.class_name + " templates cancel out");
    for (auto& x : mean) x /= n;
    out.push_back(std::move(mean));
  }
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::optional<double> auroc(std::span<const double> scores, std::span<const bool> positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        pos_rank_sum += mid_rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

ZeroShotResult zero_shot_classify(const EmbeddingStore& images, const std::vector<ClassSpec>& classes,
                                  const TextEmbedder& embed, const std::optional<std::vector<std::size_t>>& labels) {
  if (classes.size() < 2) throw Error(ErrorCode::InvalidArgument, "zero-shot classification needs >= 2 classes");
  if (labels && labels->size() != images.size()) throw Error(ErrorCode::InvalidArgument, "one label per image required");
  const auto class_vecs = class_embeddings(classes, embed, images.dim());
  ZeroShotResult out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::vector<double> row;
    row.reserve(classes.size());
    for (const auto& c : class_vecs) row.push_back(dot(images.row(i), c));
    out.predicted.push_back(argmax(row));
    out.scores.push_back(std::move(row));
  }
  if (labels) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < images.size(); ++i) correct += out.predicted[i] == (*labels)[i] ? 1 : 0;
    out.accuracy = images.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(images.size());
    if (classes.size() == 2) {
      std::vector<double> margin;
      std::unique_ptr<bool[]> positive(new bool[images.size()]);
      for (std::size_t i = 0; i < images.size(); ++i) {
        margin.push_back(out.scores[i][1] - out.scores[i][0]);
        positive[i] = (*labels)[i] == 1;
      }
      out.auroc = auroc(margin, std::span<const bool>(positive.get(), images.size()));
    }
  }
  return out;
}

std::vector<ClassSpec> benchmark_classes(const std::string& dataset) {
  const std::vector<std::string> image_of = {"this is an image of {}", "{} presented in image"};
  const std::vector<std::string> photo_of = {"a photo of {}", "{} presented in image"};
  auto make = [](std::vector<std::string> names, const std::vector<std::string>& templates) {
    std::vector<ClassSpec> out;
    for (auto& n : names) out.push_back({std::move(n), templates});
    return out;
  };
  if (dataset == "pcam") return make({"normal lymph node", "lymph node metastasis"}, image_of);
  if (dataset == "lc25000_lung") {
    return make({"lung adenocarcinomas", "normal lung tissue", "lung squamous cell carcinomas"}, image_of);
  }
  if (dataset == "lc25000_colon") return make({"colon adenocarcinomas", "normal colonic tissue"}, photo_of);
  if (dataset == "tcga_til") return make({"none", "tumor infiltrating lymphocytes"}, photo_of);
  if (dataset == "rsna") return make({"normal lung", "pneumonia"}, photo_of);
  throw Error(ErrorCode::InvalidArgument, "unknown benchmark dataset " + dataset);
}

// ---------------------------------------------------------------------------
// Census

std::vector<TaxonomyType> parse_taxonomy(const nlohmann::json& j) {
  std::vector<TaxonomyType> out;
  try {
    if (!j.is_array()) throw Error(ErrorCode::MalformedFile, "taxonomy must be a JSON list");
    for (const auto& t : j) {
      TaxonomyType type{t.at("type_name").get<std::string>(), t.at("keywords").get<std::vector<std::string>>()};
      if (type.type_name.empty() || type.keywords.empty()) {
        throw Error(ErrorCode::MalformedFile, "taxonomy entry needs a type_name and >= 1 keyword");
      }
      out.push_back(std::move(type));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("taxonomy: ") + e.what());
  }
  return out;
}

std::vector<TaxonomyKeyword> embed_taxonomy(const std::vector<TaxonomyType>& types, const TextEmbedder& embed,
                                            std::size_t dim) {
  std::vector<TaxonomyKeyword> out;
  for (const auto& t : types) {
    for (const auto& k : t.keywords) out.push_back({t.type_name, k, embed_checked(embed, k, dim)});
  }
  return out;
}

std::vector<std::pair<std::string, std::size_t>> taxonomy_census(const EmbeddingStore& images,
                                                                 const std::vector<TaxonomyKeyword>& keywords) {
  if (keywords.empty()) throw Error(ErrorCode::InvalidArgument, "census needs >= 1 keyword");
  std::vector<std::string> type_order;
  std::map<std::string, std::size_t> counts;
  for (const auto& k : keywords) {
    if (k.embedding.size() != images.dim()) throw Error(ErrorCode::DimensionMismatch, "keyword " + k.keyword);
    if (counts.emplace(k.type_name, 0).second) type_order.push_back(k.type_name);
  }
  std::vector<double> sims(keywords.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t k = 0; k < keywords.size(); ++k) sims[k] = dot(images.row(i), keywords[k].embedding);
    ++counts[keywords[argmax(sims)].type_name];
  }
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& t : type_order) out.emplace_back(t, counts[t]);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

TextEmbedder lookup_embedder(const EmbeddingStore& prompts) {
  return [&prompts](const std::string& text) -> std::vector<double> {
    const auto i = prompts.find(text);
    if (!i) throw Error(ErrorCode::EmbedderFailure, "no embedding for prompt '" + text + "'");
    const auto r = prompts.row(*i);
    return std::vector<double>(r.begin(), r.end());
  };
}

}  // namespace figurelink::evaluate
