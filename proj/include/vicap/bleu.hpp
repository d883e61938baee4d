#pragma once

// BLEU-1..4 over segmented Vietnamese tokens.

#include <cstddef>
#include <string>
#include <vector>

namespace vicap {

using Tokens = std::vector<std::string>;

// Clipped n-gram matches over candidate n-grams. `total` is zero when the
// candidate is shorter than n; value() is then undefined.
struct NgramPrecision {
  std::size_t matched = 0;
  std::size_t total = 0;

  double value() const;
  friend bool operator==(const NgramPrecision&, const NgramPrecision&) = default;
};

// ContractError unless 1 <= n <= 4.
NgramPrecision modified_precision(const Tokens& candidate, const std::vector<Tokens>& references, std::size_t n);

// Length of the reference closest to candidate_length; ties go to the shorter.
std::size_t closest_reference_length(std::size_t candidate_length, const std::vector<Tokens>& references);

struct EvalRecord {
  std::string image_id;
  Tokens candidate;
  std::vector<Tokens> references;
};

struct BleuScores {
  std::vector<double> bleu;                   // bleu[n - 1] = BLEU-n
  std::vector<NgramPrecision> precisions;     // summed over the corpus
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
  double brevity_penalty = 0.0;
};

// Standard corpus BLEU: n-gram counts and lengths summed over all records
// before the geometric mean, BP = min(1, exp(1 - r / c)), no smoothing.
// ContractError for an empty corpus or a record without references.
BleuScores corpus_bleu(const std::vector<EvalRecord>& records, std::size_t max_n = 4);

// Single-sentence BLEU. With add_one_smoothing, precisions for n >= 2 use
// (matched + 1) / (total + 1).
BleuScores sentence_bleu(const Tokens& candidate, const std::vector<Tokens>& references, std::size_t max_n = 4,
                         bool add_one_smoothing = false);

// "records: N" then one "BLEU-n: x.xxxx" line per order.
std::string format_bleu_report(const BleuScores& scores, std::size_t records);
std::string bleu_report_json(const BleuScores& scores, std::size_t records);

}  // namespace vicap
