#include "vicap/merge_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "vicap/errors.hpp"

namespace vicap {

namespace {

std::size_t argmax(const Tensor& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] > t[best]) best = i;
  }
  return best;
}

double log_of(float p) {
  return p > 0.0f ? std::log(static_cast<double>(p)) : -std::numeric_limits<double>::infinity();
}

}  // namespace

CaptionModel::CaptionModel(const WeightStore& store, Vocabulary vocab, std::optional<std::size_t> max_len)
    : vocab_(std::move(vocab)) {
  if (store.model_kind() != kCaptionModelKind) {
    throw ContractError(fmt::format("expected a {} model, got '{}'", kCaptionModelKind, store.model_kind()));
  }
  lstm_ = LstmWeights::from_store(store, "lstm");
  const std::size_t hidden = lstm_.hidden_size();
  const std::size_t vocab_size = vocab_.size();

  const Tensor& emb = store.get("embedding.embeddings");
  embedding_ = store.get("embedding.embeddings", {vocab_size, emb.rank() == 2 ? emb.dim(1) : 0});
  if (lstm_.input_size() != embedding_.dim(1)) {
    throw WeightStoreError("lstm.kernel", fmt::format("lstm.kernel expects {} inputs but embeddings are {} wide",
                                                      lstm_.input_size(), embedding_.dim(1)));
  }
  image_kernel_ = store.get("image_dense.kernel", {kFeatureDim, hidden});
  image_bias_ = store.get("image_dense.bias", {hidden});

  const Tensor& merge = store.get("merge_dense.kernel");
  const std::size_t merge_width = merge.rank() == 2 ? merge.dim(1) : 0;
  merge_kernel_ = store.get("merge_dense.kernel", {2 * hidden, merge_width});
  merge_bias_ = store.get("merge_dense.bias", {merge_width});
  output_kernel_ = store.get("output_dense.kernel", {merge_width, vocab_size});
  output_bias_ = store.get("output_dense.bias", {vocab_size});

  if (auto declared = store.metadata("vocab_size"); declared && *declared != std::to_string(vocab_size)) {
    throw ContractError(
        fmt::format("model declares vocab_size={} but the vocabulary has {} tokens", *declared, vocab_size));
  }
  if (max_len) {
    max_len_ = *max_len;
  } else if (auto stored = store.metadata("max_len")) {
    max_len_ = std::stoul(*stored);
  } else {
    max_len_ = kDefaultMaxLen;
  }
}

Tensor CaptionModel::image_branch(const Tensor& image_feat) const {
  if (image_feat.rank() != 1 || image_feat.size() != kFeatureDim) {
    throw DimensionError(fmt::format("image feature must be [{}], got {}", kFeatureDim,
                                     shape_to_string(image_feat.shape())));
  }
  return dense(image_feat, image_kernel_, image_bias_, Activation::relu);
}

Tensor CaptionModel::embed(TokenId id) const {
  if (id >= vocab_.size()) throw ContractError(fmt::format("token id {} outside vocabulary", id));
  const std::size_t width = embedding_.dim(1);
  const auto row = embedding_.data().subspan(id * width, width);
  return Tensor::vector(std::vector<float>(row.begin(), row.end()));
}

LstmState CaptionModel::advance(const LstmState& state, TokenId id) const {
  return lstm_step(embed(id), state, lstm_);
}

Tensor CaptionModel::distribution(const Tensor& image_branch, const LstmState& state) const {
  const Tensor merged = dense(concat(image_branch, state.h), merge_kernel_, merge_bias_, Activation::relu);
  return dense(merged, output_kernel_, output_bias_, Activation::softmax);
}

Tensor step_distribution(const CaptionModel& model, const Tensor& image_feat, std::span<const TokenId> prefix) {
  if (prefix.empty() || prefix.front() != Vocabulary::kStart) {
    throw ContractError("step_distribution: prefix must begin with START");
  }
  const Tensor image = model.image_branch(image_feat);
  LstmState state = LstmState::zeros(model.hidden_size());
  for (TokenId id : prefix) state = model.advance(state, id);
  return model.distribution(image, state);
}

TokenSequence to_sequence(const std::vector<TokenId>& ids, const Vocabulary& vocab) {
  TokenSequence seq;
  for (TokenId id : ids) {
    if (id == Vocabulary::kPad) continue;
    seq.push_back(id, vocab.token(id));
  }
  return seq;
}

TokenSequence greedy_decode(const CaptionModel& model, const Tensor& image_feat) {
  const Tensor image = model.image_branch(image_feat);
  LstmState state = model.advance(LstmState::zeros(model.hidden_size()), Vocabulary::kStart);
  std::vector<TokenId> generated;
  while (generated.size() < model.max_len()) {
    const auto next = static_cast<TokenId>(argmax(model.distribution(image, state)));
    if (next == Vocabulary::kEnd) break;
    generated.push_back(next);
    state = model.advance(state, next);
  }
  return to_sequence(generated, model.vocab());
}

Hypothesis beam_search(const CaptionModel& model, const Tensor& image_feat, std::size_t width) {
  if (width == 0) throw ContractError("beam_decode: width must be at least 1");

  struct Beam {
    std::vector<TokenId> tokens;
    double score;
    LstmState state;
  };
  struct Candidate {
    double score;
    TokenId token;
    std::size_t parent;
  };

  const Tensor image = model.image_branch(image_feat);
  std::vector<Beam> alive{{{}, 0.0, model.advance(LstmState::zeros(model.hidden_size()), Vocabulary::kStart)}};
  std::vector<Hypothesis> finished;
  const std::size_t vocab_size = model.vocab().size();

  while (!alive.empty()) {
    std::vector<Candidate> candidates;
    candidates.reserve(alive.size() * vocab_size);
    for (std::size_t b = 0; b < alive.size(); ++b) {
      const Tensor dist = model.distribution(image, alive[b].state);
      for (std::size_t t = 0; t < vocab_size; ++t) {
        candidates.push_back({alive[b].score + log_of(dist[t]), static_cast<TokenId>(t), b});
      }
    }
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.token != b.token) return a.token < b.token;
                        return a.parent < b.parent;
                      });

    std::vector<Beam> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      const Beam& parent = alive[c.parent];
      if (c.token == Vocabulary::kEnd) {
        finished.push_back({parent.tokens, c.score, true});
        continue;
      }
      std::vector<TokenId> tokens = parent.tokens;
      tokens.push_back(c.token);
      if (tokens.size() >= model.max_len()) {
        finished.push_back({std::move(tokens), c.score, false});
      } else {
        next.push_back({std::move(tokens), c.score, model.advance(parent.state, c.token)});
      }
    }
    alive = std::move(next);

    // Scores only fall as hypotheses grow, so a finished hypothesis at least as
    // good as every live one cannot be beaten.
    if (!finished.empty() && !alive.empty()) {
      double best_finished = -std::numeric_limits<double>::infinity();
      for (const auto& h : finished) best_finished = std::max(best_finished, h.log_prob);
      double best_alive = -std::numeric_limits<double>::infinity();
      for (const auto& b : alive) best_alive = std::max(best_alive, b.score);
      if (best_finished >= best_alive) break;
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (finished[i].log_prob > finished[best].log_prob) best = i;
  }
  return finished[best];
}

TokenSequence beam_decode(const CaptionModel& model, const Tensor& image_feat, std::size_t width) {
  return to_sequence(beam_search(model, image_feat, width).tokens, model.vocab());
}

double sequence_log_prob(const CaptionModel& model, const Tensor& image_feat, std::span<const TokenId> tokens) {
  if (tokens.size() > model.max_len()) {
    throw ContractError(fmt::format("sequence of {} tokens exceeds max_len {}", tokens.size(), model.max_len()));
  }
  const Tensor image = model.image_branch(image_feat);
  LstmState state = model.advance(LstmState::zeros(model.hidden_size()), Vocabulary::kStart);
  double total = 0.0;
  for (TokenId id : tokens) {
    total += log_of(model.distribution(image, state)[id]);
    state = model.advance(state, id);
  }
  if (tokens.size() < model.max_len()) total += log_of(model.distribution(image, state)[Vocabulary::kEnd]);
  return total;
}

}  // namespace vicap
