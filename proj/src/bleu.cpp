#include "vicap/bleu.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "vicap/errors.hpp"

namespace vicap {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

double combine(const std::vector<double>& precisions, std::size_t n, double bp) {
  double log_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(precisions[k] > 0.0)) return 0.0;
    log_sum += std::log(precisions[k]);
  }
  return bp * std::exp(log_sum / static_cast<double>(n));
}

double brevity_penalty(std::size_t candidate_length, std::size_t reference_length) {
  if (candidate_length == 0) return 0.0;
  if (candidate_length > reference_length) return 1.0;
  return std::exp(1.0 - static_cast<double>(reference_length) / static_cast<double>(candidate_length));
}

void check_order(std::size_t n) {
  if (n < 1 || n > 4) throw ContractError(fmt::format("BLEU order {} outside 1..4", n));
}

}  // namespace

double NgramPrecision::value() const {
  return total ? static_cast<double>(matched) / static_cast<double>(total) : std::numeric_limits<double>::quiet_NaN();
}

NgramPrecision modified_precision(const Tokens& candidate, const std::vector<Tokens>& references, std::size_t n) {
  check_order(n);
  const NgramCounts cand = count_ngrams(candidate, n);
  NgramCounts max_ref;
  for (const auto& ref : references) {
    for (const auto& [gram, count] : count_ngrams(ref, n)) {
      auto& slot = max_ref[gram];
      slot = std::max(slot, count);
    }
  }
  NgramPrecision p;
  for (const auto& [gram, count] : cand) {
    p.total += count;
    auto it = max_ref.find(gram);
    if (it != max_ref.end()) p.matched += std::min(count, it->second);
  }
  return p;
}

std::size_t closest_reference_length(std::size_t candidate_length, const std::vector<Tokens>& references) {
  if (references.empty()) throw ContractError("no references");
  std::size_t best = references.front().size();
  for (const auto& ref : references) {
    const auto diff = [&](std::size_t len) {
      return len > candidate_length ? len - candidate_length : candidate_length - len;
    };
    if (diff(ref.size()) < diff(best) || (diff(ref.size()) == diff(best) && ref.size() < best)) best = ref.size();
  }
  return best;
}

BleuScores corpus_bleu(const std::vector<EvalRecord>& records, std::size_t max_n) {
  check_order(max_n);
  if (records.empty()) throw ContractError("corpus_bleu: empty corpus");
  BleuScores scores;
  scores.precisions.assign(max_n, {});
  for (const auto& record : records) {
    if (record.references.empty()) {
      throw ContractError(fmt::format("record '{}' has no references", record.image_id));
    }
    for (std::size_t n = 1; n <= max_n; ++n) {
      const NgramPrecision p = modified_precision(record.candidate, record.references, n);
      scores.precisions[n - 1].matched += p.matched;
      scores.precisions[n - 1].total += p.total;
    }
    scores.candidate_length += record.candidate.size();
    scores.reference_length += closest_reference_length(record.candidate.size(), record.references);
  }
  scores.brevity_penalty = brevity_penalty(scores.candidate_length, scores.reference_length);
  std::vector<double> values;
  for (const auto& p : scores.precisions) values.push_back(p.total ? p.value() : 0.0);
  for (std::size_t n = 1; n <= max_n; ++n) scores.bleu.push_back(combine(values, n, scores.brevity_penalty));
  return scores;
}

BleuScores sentence_bleu(const Tokens& candidate, const std::vector<Tokens>& references, std::size_t max_n,
                         bool add_one_smoothing) {
  check_order(max_n);
  if (references.empty()) throw ContractError("sentence_bleu: no references");
  BleuScores scores;
  std::vector<double> values;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const NgramPrecision p = modified_precision(candidate, references, n);
    scores.precisions.push_back(p);
    if (add_one_smoothing && n >= 2) {
      values.push_back(static_cast<double>(p.matched + 1) / static_cast<double>(p.total + 1));
    } else {
      values.push_back(p.total ? p.value() : 0.0);
    }
  }
  scores.candidate_length = candidate.size();
  scores.reference_length = closest_reference_length(candidate.size(), references);
  scores.brevity_penalty = brevity_penalty(scores.candidate_length, scores.reference_length);
  for (std::size_t n = 1; n <= max_n; ++n) scores.bleu.push_back(combine(values, n, scores.brevity_penalty));
  return scores;
}

std::string format_bleu_report(const BleuScores& scores, std::size_t records) {
  std::string out = fmt::format("records: {}\n", records);
  for (std::size_t n = 0; n < scores.bleu.size(); ++n) out += fmt::format("BLEU-{}: {:.4f}\n", n + 1, scores.bleu[n]);
  return out;
}

std::string bleu_report_json(const BleuScores& scores, std::size_t records) {
  nlohmann::json j;
  j["records"] = records;
  for (std::size_t n = 0; n < scores.bleu.size(); ++n) {
    j["bleu"][fmt::format("BLEU-{}", n + 1)] = scores.bleu[n];
    j["precisions"].push_back({{"n", n + 1}, {"matched", scores.precisions[n].matched},
                               {"total", scores.precisions[n].total}});
  }
  j["candidate_length"] = scores.candidate_length;
  j["reference_length"] = scores.reference_length;
  j["brevity_penalty"] = scores.brevity_penalty;
  return j.dump(2) + "\n";
}

}  // namespace vicap
