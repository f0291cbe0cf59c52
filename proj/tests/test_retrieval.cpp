#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "segqc/errors.hpp"
#include "segqc/retrieval.hpp"
#include "segqc/rng.hpp"

using namespace segqc;

namespace {

EmbeddingVector vec(std::string id, std::vector<float> v) { return {std::move(id), std::move(v)}; }

std::vector<EmbeddingVector> random_vectors(std::size_t n, std::size_t dim, Rng& rng) {
  std::vector<EmbeddingVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    out.push_back(vec("v" + std::to_string(i), std::move(v)));
  }
  return out;
}

}  // namespace

TEST_SUITE("retrieval") {
  TEST_CASE("cosine hand examples") {
    const auto u = vec("u", {1, 0});
    CHECK(cosine_similarity(u, u) == doctest::Approx(1.0));
    CHECK(cosine_similarity(u, vec("v", {0, 1})) == 0.0);
    CHECK(cosine_similarity(vec("a", {1, 1}), u) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_similarity(u, vec("w", {1, 0, 0})), DataError);
    CHECK_THROWS_AS(cosine_similarity(u, vec("z", {0, 0})), DataError);
  }

  TEST_CASE("other similarity measures") {
    const auto a = vec("a", {1, 2}), b = vec("b", {4, 6});
    CHECK(similarity(Similarity::Euclidean, a, b) == doctest::Approx(-5.0));
    CHECK(similarity(Similarity::InnerProduct, a, b) == doctest::Approx(16.0));
    CHECK(parse_similarity("inner") == Similarity::InnerProduct);
    CHECK_THROWS_AS(parse_similarity("manhattan"), UsageError);
  }

  TEST_CASE("top_k returns an exact match first") {
    Rng rng(2);
    const EmbeddingIndex index(random_vectors(50, 8, rng));
    const auto& target = index.vectors()[17];
    const auto top = index.top_k(target, 1);
    REQUIRE(top.size() == 1);
    CHECK(top[0].id == "v17");
    CHECK(top[0].similarity == doctest::Approx(1.0));
  }

  TEST_CASE("k >= m returns everything sorted") {
    Rng rng(3);
    const EmbeddingIndex index(random_vectors(20, 4, rng));
    const auto q = random_vectors(1, 4, rng)[0];
    const auto all = index.top_k(q, 100);
    CHECK(all.size() == 20);
    for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1].similarity >= all[i].similarity);
  }

  TEST_CASE("top_k matches the linear-scan oracle") {
    Rng rng(4);
    const EmbeddingIndex index(random_vectors(1000, 64, rng));
    for (int t = 0; t < 10; ++t) {
      const auto q = random_vectors(1, 64, rng)[0];
      for (auto kind : {Similarity::Cosine, Similarity::Euclidean, Similarity::InnerProduct}) {
        std::vector<double> s;
        for (const auto& v : index.vectors()) s.push_back(similarity(kind, q, v));
        const auto expected = oracle::ranked(s, 8);
        const auto got = index.top_k(q, 8, kind);
        REQUIRE(got.size() == 8);
        for (std::size_t i = 0; i < 8; ++i) CHECK(got[i].id == index.vectors()[expected[i]].id);
      }
    }
  }

  TEST_CASE("ties keep insertion order") {
    const EmbeddingIndex index({vec("b", {1, 0}), vec("a", {2, 0}), vec("c", {0, 1})});
    const auto top = index.top_k(vec("q", {1, 0}), 2);
    CHECK(top[0].id == "b");
    CHECK(top[1].id == "a");
  }

  TEST_CASE("index validation") {
    CHECK_THROWS_AS(EmbeddingIndex({vec("a", {1, 0}), vec("a", {0, 1})}), DataError);
    CHECK_THROWS_AS(EmbeddingIndex({vec("a", {1, 0}), vec("b", {0, 1, 0})}), DataError);
    const EmbeddingIndex empty;
    CHECK_THROWS_AS(empty.top_k(vec("q", {1}), 1), DataError);
  }

  TEST_CASE("parse_embeddings") {
    const auto ok = parse_embeddings("{\"id\":\"a\",\"vec\":[1,2,3,4]}\n\n{\"id\":\"b\",\"vec\":[0,1,0,0]}\n");
    CHECK(ok.size() == 2);
    CHECK(ok.dim() == 4);
    CHECK_THROWS_WITH_AS(parse_embeddings("{\"id\":\"a\",\"vec\":[1,2,3,4]}\n{\"id\":\"b\",\"vec\":[1,2,3,4,5]}\n"),
                         doctest::Contains("line 2"), DataError);
    CHECK_THROWS_WITH_AS(parse_embeddings("{\"id\":\"a\",\"vec\":[1,2,3,4]}\n{\"id\":\"b\",\"vec\":[1,2,3,4,5]}\n"),
                         doctest::Contains("'b'"), DataError);
    CHECK_THROWS_WITH_AS(parse_embeddings("{\"id\":\"a\",\"vec\":[1]}\n{\"id\":\"a\",\"vec\":[2]}\n"),
                         doctest::Contains("duplicate"), DataError);
    CHECK_THROWS_WITH_AS(parse_embeddings("{\"id\":\"a\",\"vec\":[1]}\nnot json\n"), doctest::Contains("line 2"),
                         DataError);
    CHECK_THROWS_AS(load_embeddings("/nonexistent/embeddings.jsonl"), DataError);
  }

  TEST_CASE("restricted_to keeps index order") {
    const EmbeddingIndex index({vec("a", {1}), vec("b", {2}), vec("c", {3})});
    const auto r = index.restricted_to({"c", "a", "zz"});
    REQUIRE(r.size() == 2);
    CHECK(r.vectors()[0].id == "a");
    CHECK(r.vectors()[1].id == "c");
  }

  TEST_CASE("random_subset is seeded and without replacement") {
    std::vector<std::string> ids;
    for (int i = 0; i < 30; ++i) ids.push_back(std::to_string(i));
    const auto a = random_subset(ids, 10, 42);
    CHECK(a == random_subset(ids, 10, 42));
    CHECK(std::set<std::string>(a.begin(), a.end()).size() == 10);
    CHECK(random_subset(ids, 100, 1).size() == 30);
  }
}
