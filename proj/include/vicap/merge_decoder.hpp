#pragma once

// Merge-architecture caption decoder.
//
//   image feature [4096] --dense+relu--> image branch [H]
//   prefix tokens --embedding--> LSTM --> final hidden state [H]
//   concat(image branch, hidden) [2H] --dense+relu--> [M] --dense+softmax--> [V]
//
// The image branch always comes first in the concatenation.
//
// Weight names in a caption_merge store:
//   image_dense.kernel [4096 x H]     image_dense.bias [H]
//   embedding.embeddings [V x E]
//   lstm.kernel [E x 4H]  lstm.recurrent_kernel [H x 4H]  lstm.bias [4H]   (gates i, f, c, o)
//   merge_dense.kernel [2H x M]       merge_dense.bias [M]
//   output_dense.kernel [M x V]       output_dense.bias [V]

#include <optional>
#include <span>
#include <vector>

#include "vicap/model_io.hpp"
#include "vicap/tensor.hpp"
#include "vicap/viet_text.hpp"

namespace vicap {

class CaptionModel {
 public:
  // Throws WeightStoreError for missing or mis-shaped tensors and
  // ContractError if the store is not a caption_merge model or its widths do
  // not match the vocabulary. max_len defaults to the "max_len" metadata, else
  // kDefaultMaxLen.
  CaptionModel(const WeightStore& store, Vocabulary vocab, std::optional<std::size_t> max_len = std::nullopt);

  const Vocabulary& vocab() const noexcept { return vocab_; }
  std::size_t max_len() const noexcept { return max_len_; }
  std::size_t hidden_size() const noexcept { return lstm_.hidden_size(); }
  std::size_t embedding_dim() const noexcept { return embedding_.dim(1); }

  Tensor image_branch(const Tensor& image_feat) const;
  Tensor embed(TokenId id) const;
  LstmState advance(const LstmState& state, TokenId id) const;
  Tensor distribution(const Tensor& image_branch, const LstmState& state) const;

 private:
  Tensor image_kernel_, image_bias_;
  Tensor embedding_;
  LstmWeights lstm_;
  Tensor merge_kernel_, merge_bias_;
  Tensor output_kernel_, output_bias_;
  Vocabulary vocab_;
  std::size_t max_len_;
};

// Next-token distribution for a prefix that starts with START. The LSTM runs
// over the whole prefix from a zero state on every call.
Tensor step_distribution(const CaptionModel& model, const Tensor& image_feat, std::span<const TokenId> prefix);

// Repeated argmax (ties to the lowest id) from START until END or max_len
// generated tokens. The result holds neither START nor END; PAD is dropped.
TokenSequence greedy_decode(const CaptionModel& model, const Tensor& image_feat);

struct Hypothesis {
  std::vector<TokenId> tokens;  // generated tokens, without START/END
  double log_prob = 0.0;        // includes log P(END) when ended_with_end
  bool ended_with_end = false;
};

// Beam search ranked by summed log-probabilities; candidate ties break by
// token id, then by parent order. width = 1 reproduces greedy_decode.
Hypothesis beam_search(const CaptionModel& model, const Tensor& image_feat, std::size_t width);
TokenSequence beam_decode(const CaptionModel& model, const Tensor& image_feat, std::size_t width);

// Log-probability of a generated token list under the decoding objective:
// the tokens' log-probabilities plus log P(END) unless the list already has
// max_len tokens.
double sequence_log_prob(const CaptionModel& model, const Tensor& image_feat, std::span<const TokenId> tokens);

TokenSequence to_sequence(const std::vector<TokenId>& ids, const Vocabulary& vocab);

}  // namespace vicap
