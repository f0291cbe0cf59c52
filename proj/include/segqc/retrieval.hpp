#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "segqc/core.hpp"

namespace segqc {

enum class Similarity { Cosine, Euclidean, InnerProduct };

std::string to_string(Similarity s);
Similarity parse_similarity(std::string_view name);

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

/// Similarity under the chosen measure; larger is always more similar
/// (Euclidean returns the negated distance).
double similarity(Similarity kind, const EmbeddingVector& u, const EmbeddingVector& v);

struct Neighbor {
  std::string id;
  double similarity = 0;
};

/// Immutable set of embeddings with distinct ids and a common dimension.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;
  explicit EmbeddingIndex(std::vector<EmbeddingVector> vectors);

  std::size_t size() const { return vectors_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return vectors_.empty(); }
  const std::vector<EmbeddingVector>& vectors() const { return vectors_; }
  const EmbeddingVector* find(const std::string& id) const;

  /// Exhaustive search: the min(k, size) most similar entries, descending,
  /// ties kept in insertion order.
  std::vector<Neighbor> top_k(const EmbeddingVector& query, std::size_t k,
                              Similarity kind = Similarity::Cosine) const;

  /// Restricts the index to the given ids, keeping the index's own order.
  EmbeddingIndex restricted_to(const std::vector<std::string>& ids) const;

 private:
  std::vector<EmbeddingVector> vectors_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t dim_ = 0;
};

/// Reads JSONL records {"id": string, "vec": [numbers]}; blank lines are skipped.
/// Errors name the offending line number and id.
EmbeddingIndex load_embeddings(const std::filesystem::path& path);
EmbeddingIndex parse_embeddings(const std::string& text);

/// Seeded sample of min(k, ids.size()) ids without replacement, in sampled order.
std::vector<std::string> random_subset(const std::vector<std::string>& ids, std::size_t k, std::uint64_t seed);

}  // namespace segqc
