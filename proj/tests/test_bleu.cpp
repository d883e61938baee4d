#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "vicap/bleu.hpp"
#include "vicap/errors.hpp"
#include "vicap/viet_text.hpp"

using namespace vicap;

namespace {

Tokens words(const char* s) { return split_words(s); }

std::vector<EvalRecord> random_corpus(std::mt19937& rng, std::size_t records, std::size_t min_len) {
  const std::vector<std::string> alphabet{"a", "b", "c", "d", "e", "f"};
  auto sentence = [&] {
    Tokens t;
    for (std::size_t n = min_len + rng() % 6; n > 0; --n) t.push_back(alphabet[rng() % alphabet.size()]);
    return t;
  };
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < records; ++i) {
    EvalRecord r{"r" + std::to_string(i), sentence(), {}};
    for (int k = 0; k < 5; ++k) r.references.push_back(sentence());
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

TEST_CASE("modified precision clips by the max reference count") {
  const NgramPrecision p = modified_precision(words("the the the the"), {words("the cat the"), words("the")}, 1);
  CHECK(p.matched == 2);
  CHECK(p.total == 4);
  CHECK(modified_precision(words("a"), {words("a")}, 2).total == 0);
  CHECK_THROWS_AS(modified_precision(words("a"), {words("a")}, 5), ContractError);
}

TEST_CASE("closest reference length ties go to the shorter") {
  CHECK(closest_reference_length(5, {words("a b c d"), words("a b c d e f")}) == 4);
  CHECK(closest_reference_length(5, {words("a b c d e f g"), words("a b c")}) == 3);
}

TEST_CASE("hand case: brevity penalty only") {
  const BleuScores s = corpus_bleu({{"x", words("a b c d"), {words("a b c d e")}}});
  CHECK(std::abs(s.bleu[0] - std::exp(-0.25)) < 1e-6);
  CHECK(std::abs(s.brevity_penalty - std::exp(1.0 - 5.0 / 4.0)) < 1e-12);
  CHECK(s.bleu[3] == doctest::Approx(std::exp(-0.25)));
}

TEST_CASE("self-identity") {
  std::mt19937 rng(8);
  auto corpus = random_corpus(rng, 20, 4);
  for (auto& r : corpus) r.candidate = r.references[rng() % 5];
  for (double b : corpus_bleu(corpus).bleu) CHECK(b == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("order permutation invariance") {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    auto corpus = random_corpus(rng, 15, 1);
    const BleuScores a = corpus_bleu(corpus);
    std::shuffle(corpus.begin(), corpus.end(), rng);
    CHECK(corpus_bleu(corpus).bleu == a.bleu);
  }
}

TEST_CASE("scores lie in [0, 1] and fall with n when every candidate is long enough") {
  std::mt19937 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const BleuScores s = corpus_bleu(random_corpus(rng, 10, 5));
    for (std::size_t n = 0; n < 4; ++n) {
      CHECK(s.bleu[n] >= 0.0);
      CHECK(s.bleu[n] <= 1.0);
      if (n > 0) CHECK(s.bleu[n] <= s.bleu[n - 1] + 1e-15);
    }
  }
}

TEST_CASE("errors and zero matches") {
  CHECK_THROWS_AS(corpus_bleu({}), ContractError);
  CHECK_THROWS_AS(corpus_bleu({{"x", words("a"), {}}}), ContractError);
  const BleuScores z = corpus_bleu({{"x", words("a b"), {words("c d")}}});
  for (double b : z.bleu) CHECK(b == 0.0);
  CHECK(corpus_bleu({{"x", {}, {words("c d")}}}).bleu[0] == 0.0);
}

TEST_CASE("sentence BLEU with add-one smoothing") {
  const Tokens cand = words("a b x y");
  const std::vector<Tokens> refs{words("a b c d")};
  CHECK(sentence_bleu(cand, refs).bleu[1] == doctest::Approx(std::sqrt(0.5 * (1.0 / 3))));
  CHECK(sentence_bleu(cand, refs).bleu[2] == 0.0);
  const BleuScores s = sentence_bleu(cand, refs, 4, true);
  // p1 = 2/4, p2 = (1+1)/(3+1), p3 = (0+1)/(2+1), p4 = (0+1)/(1+1)
  CHECK(s.bleu[3] == doctest::Approx(std::pow(0.5 * 0.5 * (1.0 / 3) * 0.5, 0.25)));
}

TEST_CASE("report formats") {
  const BleuScores s = corpus_bleu({{"x", words("a b c d"), {words("a b c d e")}}});
  CHECK(format_bleu_report(s, 1) == "records: 1\nBLEU-1: 0.7788\nBLEU-2: 0.7788\nBLEU-3: 0.7788\nBLEU-4: 0.7788\n");
  const auto j = nlohmann::json::parse(bleu_report_json(s, 1));
  CHECK(j["records"] == 1);
  CHECK(j["bleu"]["BLEU-1"].get<double>() == doctest::Approx(std::exp(-0.25)));
  CHECK(j["precisions"][0]["matched"] == 4);
}
