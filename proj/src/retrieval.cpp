#include "segqc/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "segqc/errors.hpp"
#include "segqc/io.hpp"
#include "segqc/rng.hpp"

namespace segqc {

namespace {

double dot(const EmbeddingVector& u, const EmbeddingVector& v) {
  double s = 0;
  for (std::size_t i = 0; i < u.values.size(); ++i) s += static_cast<double>(u.values[i]) * v.values[i];
  return s;
}

double norm(const EmbeddingVector& u) { return std::sqrt(dot(u, u)); }

void require_compatible(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dim() != v.dim()) {
    throw DataError("embedding dimension mismatch: " + std::to_string(u.dim()) + " vs " + std::to_string(v.dim()));
  }
}

}  // namespace

std::string to_string(Similarity s) {
  switch (s) {
    case Similarity::Cosine: return "cosine";
    case Similarity::Euclidean: return "euclidean";
    case Similarity::InnerProduct: return "inner";
  }
  return "unknown";
}

Similarity parse_similarity(std::string_view name) {
  if (name == "cosine") return Similarity::Cosine;
  if (name == "euclidean") return Similarity::Euclidean;
  if (name == "inner" || name == "inner-product") return Similarity::InnerProduct;
  throw UsageError("unknown similarity '" + std::string(name) + "' (expected cosine, euclidean or inner)");
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  require_compatible(u, v);
  const double nu = norm(u);
  const double nv = norm(v);
  if (!(nu > 0) || !(nv > 0)) throw DataError("cosine similarity of a zero-norm vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

double similarity(Similarity kind, const EmbeddingVector& u, const EmbeddingVector& v) {
  switch (kind) {
    case Similarity::Cosine: return cosine_similarity(u, v);
    case Similarity::InnerProduct: require_compatible(u, v); return dot(u, v);
    case Similarity::Euclidean: {
      require_compatible(u, v);
      double s = 0;
      for (std::size_t i = 0; i < u.values.size(); ++i) {
        const double d = static_cast<double>(u.values[i]) - v.values[i];
        s += d * d;
      }
      return -std::sqrt(s);
    }
  }
  return 0;
}

EmbeddingIndex::EmbeddingIndex(std::vector<EmbeddingVector> vectors) : vectors_(std::move(vectors)) {
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    const auto& v = vectors_[i];
    if (i == 0) dim_ = v.dim();
    if (v.dim() == 0) throw DataError("embedding '" + v.id + "' is empty");
    if (v.dim() != dim_) {
      throw DataError("inconsistent embedding dimension for '" + v.id + "': " + std::to_string(v.dim()) +
                      " (expected " + std::to_string(dim_) + ")");
    }
    if (!(norm(v) > 0)) throw DataError("embedding '" + v.id + "' has zero norm");
    if (!by_id_.emplace(v.id, i).second) throw DataError("duplicate embedding id '" + v.id + "'");
  }
}

const EmbeddingVector* EmbeddingIndex::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &vectors_[it->second];
}

std::vector<Neighbor> EmbeddingIndex::top_k(const EmbeddingVector& query, std::size_t k, Similarity kind) const {
  if (vectors_.empty()) throw DataError("top_k on an empty embedding index");
  if (k == 0) throw UsageError("top_k requires k >= 1");
  std::vector<double> sims(vectors_.size());
  for (std::size_t i = 0; i < vectors_.size(); ++i) sims[i] = similarity(kind, query, vectors_[i]);

  std::vector<std::size_t> order(vectors_.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t take = std::min(k, order.size());
  auto by_similarity = [&](std::size_t x, std::size_t y) { return sims[x] > sims[y] || (sims[x] == sims[y] && x < y); };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), by_similarity);

  std::vector<Neighbor> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({vectors_[order[i]].id, sims[order[i]]});
  return out;
}

EmbeddingIndex EmbeddingIndex::restricted_to(const std::vector<std::string>& ids) const {
  std::vector<char> keep(vectors_.size(), 0);
  for (const auto& id : ids) {
    auto it = by_id_.find(id);
    if (it != by_id_.end()) keep[it->second] = 1;
  }
  std::vector<EmbeddingVector> out;
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    if (keep[i]) out.push_back(vectors_[i]);
  }
  return EmbeddingIndex(std::move(out));
}

EmbeddingIndex parse_embeddings(const std::string& text) {
  std::vector<EmbeddingVector> vectors;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::unordered_map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "embeddings line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw DataError(where + ": malformed JSON");
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("vec") || !j["vec"].is_array()) {
      throw DataError(where + ": expected {\"id\": string, \"vec\": [numbers]}");
    }
    EmbeddingVector v;
    v.id = j["id"].get<std::string>();
    for (const auto& x : j["vec"]) {
      if (!x.is_number()) throw DataError(where + " (id '" + v.id + "'): non-numeric vector entry");
      v.values.push_back(x.get<float>());
    }
    if (!vectors.empty() && v.dim() != vectors.front().dim()) {
      throw DataError(where + " (id '" + v.id + "'): inconsistent dimension " + std::to_string(v.dim()) +
                      ", expected " + std::to_string(vectors.front().dim()));
    }
    if (auto [it, fresh] = seen.emplace(v.id, line_no); !fresh) {
      throw DataError(where + ": duplicate id '" + v.id + "' (first seen on line " + std::to_string(it->second) + ")");
    }
    vectors.push_back(std::move(v));
  }
  try {
    return EmbeddingIndex(std::move(vectors));
  } catch (const DataError& e) {
    throw DataError(std::string("embeddings: ") + e.what());
  }
}

EmbeddingIndex load_embeddings(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("embeddings file '" + path.string() + "' does not exist");
  return parse_embeddings(read_text_file(path));
}

std::vector<std::string> random_subset(const std::vector<std::string>& ids, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> pool = ids;
  Rng rng(seed);
  const std::size_t take = std::min(k, pool.size());
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

}  // namespace segqc
