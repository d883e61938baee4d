// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "vicap/bleu.hpp"
#include "vicap/caption_editor.hpp"
#include "vicap/color.hpp"
#include "vicap/errors.hpp"
#include "vicap/fer.hpp"
#include "vicap/pipeline.hpp"

using namespace vicap;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kKernelTol = 1e-6;
constexpr double kLstmScalarTol = 1e-6;
constexpr double kLstmGoldenRelTol = 1e-4;
constexpr double kSumTol = 1e-6;
constexpr double kBleuHandTol = 1e-6;
constexpr double kFerGoldenTol = 1e-4;

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failure_.empty()) failure_ = what;
  }
  void note(std::string s) { notes_ = std::move(s); }
  bool ok() const { return failure_.empty(); }
  const std::string& failure() const { return failure_; }
  const std::string& notes() const { return notes_; }

 private:
  std::string failure_;
  std::string notes_;
};

double max_abs_diff(const Tensor& got, const std::vector<double>& want) {
  if (got.size() != want.size()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < want.size(); ++i) m = std::max(m, std::abs(got[i] - want[i]));
  return m;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1] * (1 + 1e-12) + 1e-9) return false;
  }
  return true;
}

void kernels(Check& check) {
  std::mt19937 rng(101);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  const auto start = Clock::now();
  double worst = 0;
  constexpr int kShapes = 120;
  for (int trial = 0; trial < kShapes; ++trial) {
    const std::size_t c = pick(1, 4), h = pick(1, 16), w = pick(1, 16);
    const std::size_t k = pick(1, 4), kh = pick(1, std::min<std::size_t>(h, 5)), kw = pick(1, std::min<std::size_t>(w, 5));
    const std::size_t s = pick(1, 3);
    const Tensor img = oracle::random_tensor(rng, {c, h, w});
    const Tensor ker = oracle::random_tensor(rng, {k, c, kh, kw});
    const Tensor bias = oracle::random_tensor(rng, {k});
    worst = std::max(worst, max_abs_diff(conv2d(img, ker, bias, s),
                                         oracle::conv2d(oracle::as_double(img), c, h, w, oracle::as_double(ker), k,
                                                        kh, kw, oracle::as_double(bias), s)));
    const std::size_t win = pick(1, std::min(h, w));
    worst = std::max(worst, max_abs_diff(avg_pool2d(img, win, s),
                                         oracle::avg_pool(oracle::as_double(img), c, h, w, win, s)));
    const std::size_t n = pick(1, c * h * w), m = pick(1, 64);
    const Tensor x = oracle::random_tensor(rng, {n});
    const Tensor W = oracle::random_tensor(rng, {n, m});
    const Tensor b = oracle::random_tensor(rng, {m});
    worst = std::max(worst, max_abs_diff(dense(x, W, b, Activation::none),
                                         oracle::dense(oracle::as_double(x), oracle::as_double(W),
                                                       oracle::as_double(b))));
  }
  const double elapsed = seconds_since(start);
  check.expect(worst <= kKernelTol, fmt::format("max error {:.3g} > {:g}", worst, kKernelTol));
  check.expect(elapsed < 10.0, fmt::format("took {:.2f} s", elapsed));
  check.note(fmt::format("{} shapes, max error {:.3g}, {:.3f} s", kShapes, worst, elapsed));
}

void lstm(Check& check) {
  LstmWeights w{Tensor({1, 4}, {0.5f, -0.5f, 1.0f, 0.25f}), Tensor({1, 4}, {0.1f, 0.2f, -0.3f, 0.4f}),
                Tensor::vector({0.0f, 1.0f, 0.0f, -1.0f})};
  const LstmState next = lstm_step(Tensor::vector({2.0f}), {Tensor::vector({0.5f}), Tensor::vector({-0.25f})}, w);
  const double i = oracle::sigmoid(1.05), f = oracle::sigmoid(0.1), g = std::tanh(1.85), o = oracle::sigmoid(-0.3);
  const double c = f * -0.25 + i * g;
  check.expect(std::abs(next.c[0] - c) <= kLstmScalarTol && std::abs(next.h[0] - o * std::tanh(c)) <= kLstmScalarTol,
               "scalar case");

  std::ifstream in(oracle::fixture("lstm_golden.json"));
  const auto gold = nlohmann::json::parse(in);
  const WeightStore store = load_weights(oracle::data("models") / gold["model"].get<std::string>());
  const LstmWeights lw = LstmWeights::from_store(store, gold["prefix"].get<std::string>());
  auto vec = [&](const char* key) { return Tensor::vector(gold[key].get<std::vector<float>>()); };
  const LstmState out = lstm_step(vec("x"), {vec("h0"), vec("c0")}, lw);
  const auto h1 = gold["h1"].get<std::vector<double>>();
  const auto c1 = gold["c1"].get<std::vector<double>>();
  double worst = 0;
  for (std::size_t u = 0; u < h1.size(); ++u) {
    worst = std::max(worst, std::abs(out.h[u] - h1[u]) / std::max(1.0, std::abs(h1[u])));
    worst = std::max(worst, std::abs(out.c[u] - c1[u]) / std::max(1.0, std::abs(c1[u])));
  }
  check.expect(h1.size() == 256 && out.h.size() == 256, "golden is not 256 units");
  check.expect(worst <= kLstmGoldenRelTol, fmt::format("golden error {:.3g}", worst));
  check.note(fmt::format("golden 256 units, max rel error {:.3g}", worst));
}

void decoder(Check& check) {
  const Tensor zero(Shape{kFeatureDim});
  const CaptionModel chain(oracle::chain_store({2, 3, 2, 5, 2, 2}), oracle::tiny_vocab(6));
  check.expect(greedy_decode(chain, zero).ids == std::vector<TokenId>{3, 5}, "forced chain (greedy)");
  check.expect(beam_decode(chain, zero, 3).ids == std::vector<TokenId>{3, 5}, "forced chain (beam)");

  std::mt19937 rng(303);
  for (int trial = 0; trial < 30; ++trial) {
    const CaptionModel m(oracle::random_caption_store(rng, 8, 4, 3, 5, 3.f), oracle::tiny_vocab(8), 6);
    const Tensor feat = oracle::random_feature(rng);
    check.expect(beam_decode(m, feat, 1) == greedy_decode(m, feat), "beam(1) differs from greedy");
  }

  double slowest = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const CaptionModel m(oracle::random_caption_store(rng, 6, 3, 2, 4, 2.f), oracle::tiny_vocab(6), 4);
    const Tensor feat = oracle::random_feature(rng);
    const auto start = Clock::now();
    const oracle::Best best = oracle::brute_force(m, feat);
    const Hypothesis h = beam_search(m, feat, 6 * 6 * 6 * 6);
    slowest = std::max(slowest, seconds_since(start));
    check.expect(h.tokens == best.tokens && std::abs(h.log_prob - best.score) < 1e-9, "beam differs from brute force");
  }
  check.expect(slowest < 1.0, fmt::format("brute-force comparison took {:.2f} s", slowest));
  check.note(fmt::format("brute force vocab 6 / length 4, slowest {:.3f} s", slowest));
}

void probabilities(Check& check) {
  std::mt19937 rng(404);
  double worst = 0;
  bool negative = false;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t V = 4 + rng() % 20;
    const CaptionModel m(oracle::random_caption_store(rng, V, 1 + rng() % 6, 1 + rng() % 6, 1 + rng() % 6, 5.f),
                         oracle::tiny_vocab(V));
    std::vector<TokenId> prefix{Vocabulary::kStart};
    for (std::size_t n = rng() % 8; n > 0; --n) prefix.push_back(static_cast<TokenId>(rng() % V));
    const Tensor p = step_distribution(m, oracle::random_feature(rng), prefix);
    double sum = 0;
    for (float v : p.values()) {
      negative |= v < 0.0f;
      sum += v;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  check.expect(!negative, "negative probability");
  check.expect(worst <= kSumTol, fmt::format("sum error {:.3g}", worst));
  check.note(fmt::format("1000 models, max |sum - 1| {:.3g}", worst));
}

void color(Check& check) {
  const auto xkcd = load_colors(oracle::data("xkcd_colors.tsv"));
  const auto basic = load_colors(oracle::data("basic_colors.tsv"));

  RgbImage square(64, 64, {255, 255, 255});
  square.fill_rect(16, 16, 32, 32, {255, 0, 0});
  const ColorResult red = dominant_color(square, xkcd, basic);
  check.expect(red.vietnamese_basic == "đỏ", "red square named " + red.vietnamese_basic);
  check.expect(red.cluster_share >= 0.9, fmt::format("red share {:.3f}", red.cluster_share));

  RgbImage split(100, 100, {255, 255, 255});
  split.fill_rect(20, 20, 36, 60, {0, 200, 0});
  split.fill_rect(56, 20, 24, 60, {255, 255, 0});
  const ColorResult green = dominant_color(split, xkcd, basic);
  check.expect(green.vietnamese_basic == "xanh lá", "60/40 fixture named " + green.vietnamese_basic);

  const Rgb own{150, 90, 40};
  const ColorResult uniform = dominant_color(RgbImage(30, 30, own), xkcd, basic);
  check.expect(uniform.background_fallback && uniform.rgb == own, "uniform image did not fall back to its own color");

  const ColorResult file = dominant_color(load_image(oracle::fixture("solid_red.png")), xkcd, basic);
  check.expect(file.vietnamese_basic == "đỏ", "solid_red.png named " + file.vietnamese_basic);

  for (const ColorResult* r : {&red, &green, &uniform, &file}) {
    check.expect(non_increasing(r->clustering.objective), "k-means objective increased");
  }
  check.note(fmt::format("red share {:.3f}, green share {:.3f}", red.cluster_share, green.cluster_share));
}

void editor(Check& check) {
  EditorLexicons lex;
  lex.person_nouns = load_person_nouns(oracle::data("person_nouns.txt"));
  lex.colors = load_color_lexicon(oracle::data("color_terms.txt"));
  lex.words = load_lexicon(oracle::data("lexicon.txt"));

  struct Row {
    const char* caption;
    const char* color;
    const char* emotion;
    const char* expected;
  };
  const Row rows[] = {
      {"một người đàn ông đang đi xe đạp trên một con đường", "đỏ", "neutral",
       "một người đàn ông đang đi xe đạp trên một con đường"},
      {"một con chó đen và trắng đang chạy qua một cánh đồng", "nâu", "neutral",
       "một con chó nâu đang chạy qua một cánh đồng"},
      {"một cậu bé đang chơi trong hồ bơi", "xanh dương", "happy",
       "một cậu bé với vẻ mặt vui vẻ đang chơi trong hồ bơi"},
  };
  int n = 0;
  for (const Row& row : rows) {
    ++n;
    AnnotatedCaption c = replace_color(AnnotatedCaption::unedited(row.caption), row.color, lex);
    if (const auto person = find_person_noun(c.text, lex)) {
      c = insert_emotion(c, *person, emotion_by_name(row.emotion));
    }
    check.expect(c.text == row.expected, fmt::format("row {}: \"{}\"", n, c.text));
    check.expect(apply_edits(c.original, c.edits) == c.text, fmt::format("row {}: trace does not replay", n));
  }
  check.note(fmt::format("{} rows", n));
}

void bleu(Check& check) {
  const BleuScores hand = corpus_bleu({{"x", split_words("a b c d"), {split_words("a b c d e")}}});
  check.expect(std::abs(hand.bleu[0] - std::exp(-0.25)) <= kBleuHandTol, fmt::format("hand case {:.8f}", hand.bleu[0]));

  const auto dataset = load_caption_dataset(oracle::fixture("captions.tsv"));
  std::vector<EvalRecord> identity;
  for (const auto& set : dataset) {
    EvalRecord r{set.image_id, split_words(set.captions[0]), {}};
    for (const auto& ref : set.captions) r.references.push_back(split_words(ref));
    identity.push_back(std::move(r));
  }
  for (double b : corpus_bleu(identity).bleu) check.expect(std::abs(b - 1.0) < 1e-12, "self-identity");

  PipelineConfig config = PipelineConfig::with_data_dir(VICAP_DATA_DIR);
  config.features = oracle::fixture("features.capf");
  const Pipeline pipeline(config, {true, true, false});
  const EvaluationResult result = evaluate(pipeline, dataset, {});
  const std::string report = format_bleu_report(result.scores, result.records.size());
  check.expect(report == read_file(oracle::fixture("bleu_golden.txt")), "golden report differs:\n" + report);

  std::vector<EvalRecord> shuffled = result.records;
  std::mt19937 rng(707);
  for (int i = 0; i < 10; ++i) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    check.expect(corpus_bleu(shuffled).bleu == result.scores.bleu, "order changes the score");
  }
  check.note(fmt::format("hand BLEU-1 {:.6f}, golden BLEU-4 {:.4f}", hand.bleu[0], result.scores.bleu[3]));
}

void fer(Check& check) {
  WeightStore zero(kFerModelKind);
  zero.add("conv1.kernel", Tensor({32, 1, 3, 3}));
  zero.add("conv1.bias", Tensor({32}));
  zero.add("conv2.kernel", Tensor({64, 32, 3, 3}));
  zero.add("conv2.bias", Tensor({64}));
  zero.add("fc1.kernel", Tensor({6400, 128}));
  zero.add("fc1.bias", Tensor({128}));
  zero.add("fc2.kernel", Tensor({128, 7}));
  zero.add("fc2.bias", Tensor({7}));
  const FerResult tie = classify(FerModel(zero), preprocess_face(RgbImage(48, 48, {90, 90, 90})));
  check.expect(tie.label.id == 0, "uniform logits did not pick label 0");

  const FerModel model(load_weights(oracle::data("models/fer_model.capw")));
  std::ifstream in(oracle::fixture("fer_golden.json"));
  const auto golden = nlohmann::json::parse(in);
  double worst = 0, worst_sum = 0;
  for (const auto& g : golden) {
    const FerResult r = classify(model, preprocess_face(load_image(oracle::fixture(g["image"].get<std::string>()))));
    check.expect(r.label.english == g["label"].get<std::string>(), "label differs for " + g["image"].get<std::string>());
    const auto want = g["confidences"].get<std::vector<double>>();
    worst = std::max(worst, max_abs_diff(r.confidences, want));
    double sum = 0;
    for (float v : r.confidences.values()) sum += v;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }
  check.expect(!golden.empty(), "no golden faces");
  check.expect(worst <= kFerGoldenTol, fmt::format("confidence error {:.3g}", worst));
  check.expect(worst_sum <= kSumTol, fmt::format("sum error {:.3g}", worst_sum));
  check.note(fmt::format("{} faces, max error {:.3g}", golden.size(), worst));
}

FormatErrorKind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.kind();
  }
  throw std::runtime_error("no FormatError raised");
}

void formats(Check& check) {
  std::mt19937 rng(909);
  for (int i = 0; i < 50; ++i) {
    WeightStore s(i % 2 ? kFerModelKind : kCaptionModelKind);
    for (int t = static_cast<int>(rng() % 5); t >= 0; --t) {
      Shape shape;
      for (std::size_t r = rng() % 4; r > 0; --r) shape.push_back(1 + rng() % 6);
      s.add(fmt::format("t{}_{}", rng() % 1000, t), oracle::random_tensor(rng, shape, -1e3f, 1e3f));
    }
    const auto bytes = serialize_weights(s);
    const WeightStore back = parse_weights(bytes);
    check.expect(back == s && serialize_weights(back) == bytes, "CAPW round-trip");

    FeatureTable table;
    for (int r = static_cast<int>(rng() % 3); r >= 0; --r) table.add(fmt::format("img{}", r), oracle::random_feature(rng));
    const auto fbytes = serialize_features(table);
    const FeatureTable fback = parse_features(fbytes);
    check.expect(fback == table && serialize_features(fback) == fbytes, "CAPF round-trip");
  }

  WeightStore s(kFerModelKind);
  s.add("w", Tensor({2, 2}, {1, 2, 3, 4}));
  const auto bytes = serialize_weights(s);
  auto bad = bytes;
  bad[0] = 'X';
  check.expect(error_kind([&] { parse_weights(bad); }) == FormatErrorKind::bad_magic, "CAPW magic");
  for (std::size_t cut : {std::size_t{3}, std::size_t{9}, bytes.size() - 1}) {
    const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + cut);
    check.expect(error_kind([&] { parse_weights(part); }) == FormatErrorKind::truncated,
                 fmt::format("CAPW truncated at {}", cut));
  }

  FeatureTable t;
  t.add("a", oracle::random_feature(rng));
  const auto fbytes = serialize_features(t);
  auto fbad = fbytes;
  fbad[1] = 'X';
  check.expect(error_kind([&] { parse_features(fbad); }) == FormatErrorKind::bad_magic, "CAPF magic");
  const std::vector<std::uint8_t> fcut(fbytes.begin(), fbytes.end() - 4);
  check.expect(error_kind([&] { parse_features(fcut); }) == FormatErrorKind::truncated, "CAPF truncated");
  check.note("50 random stores and tables");
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    void (*run)(Check&);
  };
  const Criterion criteria[] = {
      {"kernel oracle suite", kernels},       {"lstm correctness", lstm},
      {"decoder determinism", decoder},       {"probability invariants", probabilities},
      {"color pipeline", color},              {"caption editor regression", editor},
      {"bleu", bleu},                         {"fer invariants", fer},
      {"format round-trips", formats},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Check check;
    try {
      c.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    if (check.ok()) {
      fmt::print("PASS {} ({})\n", c.name, check.notes());
    } else {
      ++failed;
      fmt::print("FAIL {}: {}\n", c.name, check.failure());
    }
  }
  return failed == 0 ? 0 : 1;
}
