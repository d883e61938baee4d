#include "vicap/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <map>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "vicap/errors.hpp"

namespace vicap {

namespace fs = std::filesystem;
using nlohmann::json;

PipelineConfig PipelineConfig::with_data_dir(const fs::path& dir) {
  PipelineConfig c;
  c.caption_model = dir / "models" / "caption_model.capw";
  c.fer_model = dir / "models" / "fer_model.capw";
  c.vocabulary = dir / "vocab.txt";
  c.lexicon = dir / "lexicon.txt";
  c.features = dir / "features.capf";
  c.boxes = dir / "boxes.tsv";
  c.images = dir / "images";
  c.xkcd_colors = dir / "xkcd_colors.tsv";
  c.basic_colors = dir / "basic_colors.tsv";
  c.color_terms = dir / "color_terms.txt";
  c.person_nouns = dir / "person_nouns.txt";
  return c;
}

void PipelineConfig::apply_json_file(const fs::path& path) {
  apply_json_text(read_text_file(path), path.parent_path());
}

void PipelineConfig::apply_json_text(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("config: {}", e.what()));
  }
  if (!j.is_object()) throw InputError("config: expected a JSON object");

  const std::map<std::string, fs::path*> paths{
      {"caption_model", &caption_model}, {"vocabulary", &vocabulary},     {"lexicon", &lexicon},
      {"features", &features},           {"fer_model", &fer_model},       {"xkcd_colors", &xkcd_colors},
      {"basic_colors", &basic_colors},   {"color_terms", &color_terms},   {"person_nouns", &person_nouns},
      {"boxes", &boxes},                 {"images", &images},
  };
  for (const auto& [key, value] : j.items()) {
    auto expect = [&](bool ok, const char* type) {
      if (!ok) throw InputError(fmt::format("config: '{}' must be {}", key, type));
    };
    if (auto it = paths.find(key); it != paths.end()) {
      expect(value.is_string(), "a string");
      fs::path p = value.get<std::string>();
      *it->second = p.is_relative() ? base_dir / p : p;
    } else if (key == "beam_width" || key == "threads" || key == "max_len" || key == "k" || key == "seed" ||
               key == "max_iter") {
      expect(value.is_number_unsigned(), "a non-negative integer");
      const auto v = value.get<std::uint64_t>();
      if (key == "beam_width") beam_width = v;
      if (key == "threads") threads = v;
      if (key == "max_len") max_len = v;
      if (key == "k") color.kmeans.k = v;
      if (key == "seed") color.kmeans.seed = static_cast<std::uint32_t>(v);
      if (key == "max_iter") color.kmeans.max_iter = v;
    } else if (key == "threshold" || key == "corner_frac" || key == "max_removed") {
      expect(value.is_number(), "a number");
      const double v = value.get<double>();
      if (key == "threshold") color.background.threshold = v;
      if (key == "corner_frac") color.background.corner_frac = v;
      if (key == "max_removed") color.background.max_removed = v;
    } else if (key == "color_fix" || key == "emotion" || key == "insert_neutral") {
      expect(value.is_boolean(), "a boolean");
      const bool v = value.get<bool>();
      if (key == "color_fix") color_fix = v;
      if (key == "emotion") emotion = v;
      if (key == "insert_neutral") insert_neutral = v;
    } else {
      throw InputError(fmt::format("config: unknown key '{}'", key));
    }
  }
}

void PipelineConfig::validate() const {
  if (beam_width == 0) throw InputError("beam width must be at least 1");
  if (threads == 0) throw InputError("thread count must be at least 1");
  if (max_len && *max_len == 0) throw InputError("max_len must be at least 1");
  if (color.kmeans.k == 0) throw InputError("k must be at least 1");
  if (color.kmeans.max_iter == 0) throw InputError("max_iter must be at least 1");
  if (!(color.background.threshold >= 0.0)) throw InputError("threshold must be non-negative");
  if (!(color.background.corner_frac > 0.0 && color.background.corner_frac <= 0.5)) {
    throw InputError("corner_frac must be in (0, 0.5]");
  }
  if (!(color.background.max_removed >= 0.0 && color.background.max_removed <= 1.0)) {
    throw InputError("max_removed must be in [0, 1]");
  }
}

void require_files(const PipelineConfig& config, const PipelineNeeds& needs) {
  std::vector<std::pair<const char*, const fs::path*>> required;
  if (needs.caption) {
    required.insert(required.end(), {{"caption model", &config.caption_model},
                                     {"vocabulary", &config.vocabulary},
                                     {"features", &config.features}});
  }
  if (needs.words) required.push_back({"lexicon", &config.lexicon});
  if (needs.editing && config.color_fix) {
    required.insert(required.end(), {{"xkcd colors", &config.xkcd_colors},
                                     {"basic colors", &config.basic_colors},
                                     {"color terms", &config.color_terms}});
  }
  if (needs.editing && config.emotion) {
    required.insert(required.end(), {{"fer model", &config.fer_model}, {"person nouns", &config.person_nouns}});
  }
  std::vector<std::string> missing;
  for (const auto& [what, path] : required) {
    if (path->empty() || !fs::is_regular_file(*path)) missing.push_back(fmt::format("{} ({})", what, path->string()));
  }
  if (!missing.empty()) throw InputError(fmt::format("missing input files: {}", fmt::join(missing, ", ")));
}

Box parse_box(const std::string& text) {
  long v[4];
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 4; ++i) {
    auto [next, ec] = std::from_chars(p, end, v[i]);
    if (ec != std::errc{} || v[i] < 0) throw InputError(fmt::format("malformed box '{}'", text));
    p = next;
    if (i < 3) {
      if (p == end || *p != ',') throw InputError(fmt::format("malformed box '{}'", text));
      ++p;
    }
  }
  if (p != end) throw InputError(fmt::format("malformed box '{}'", text));
  if (v[2] == 0 || v[3] == 0) throw InputError(fmt::format("empty box '{}'", text));
  return {v[0], v[1], v[2], v[3]};
}

SidecarBoxes SidecarBoxes::parse(const std::string& text) {
  SidecarBoxes out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || t1 == 0) {
      throw FormatError(FormatErrorKind::parse, fmt::format("boxes line {}: expected id<TAB>label<TAB>x,y,w,h", i + 1));
    }
    Box box;
    try {
      box = parse_box(line.substr(t2 + 1));
    } catch (const InputError& e) {
      throw FormatError(FormatErrorKind::parse, fmt::format("boxes line {}: {}", i + 1, e.what()));
    }
    out.rows_.push_back({line.substr(0, t1), {normalize(line.substr(t1 + 1, t2 - t1 - 1)), box}});
  }
  return out;
}

SidecarBoxes SidecarBoxes::load(const fs::path& path) { return parse(read_text_file(path)); }

std::vector<LabeledBox> SidecarBoxes::boxes(const std::string& image_id) const {
  std::vector<LabeledBox> out;
  for (const auto& [id, box] : rows_) {
    if (id == image_id) out.push_back(box);
  }
  return out;
}

std::optional<Box> locate_object(const ObjectLocator& locator, const std::string& image_id, const std::string& noun) {
  const auto boxes = locator.boxes(image_id);
  for (const auto& b : boxes) {
    if (!noun.empty() && b.label == noun) return b.box;
  }
  for (const auto& b : boxes) {
    if (b.label != kFaceLabel) return b.box;
  }
  return std::nullopt;
}

std::optional<Box> locate_face(const ObjectLocator& locator, const std::string& image_id) {
  for (const auto& b : locator.boxes(image_id)) {
    if (b.label == kFaceLabel) return b.box;
  }
  return std::nullopt;
}

namespace {

json box_json(const std::optional<Box>& box) {
  if (!box) return nullptr;
  return json::array({box->x, box->y, box->width, box->height});
}

std::string hex(Rgb c) { return fmt::format("#{:02x}{:02x}{:02x}", c[0], c[1], c[2]); }

}  // namespace

std::string describe_json(const DescribeResult& r) {
  json j;
  j["image_id"] = r.image_id;
  j["raw_caption"] = r.caption.original;
  j["caption"] = r.caption.text;
  j["edits"] = json::array();
  for (const Edit& e : r.caption.edits) {
    j["edits"].push_back({{"kind", to_string(e.kind)},
                          {"begin", e.begin},
                          {"end", e.end},
                          {"old", e.old_text},
                          {"new", e.new_text}});
  }
  if (r.color) {
    j["color"] = {{"object", r.object_noun},
                  {"box", box_json(r.object_box)},
                  {"rgb", hex(r.color->rgb)},
                  {"xkcd", r.color->xkcd_name},
                  {"basic", r.color->vietnamese_basic},
                  {"share", r.color->cluster_share},
                  {"background_fallback", r.color->background_fallback}};
  } else {
    j["color"] = nullptr;
  }
  if (r.emotion) {
    j["emotion"] = {{"person", r.person_noun},
                    {"box", box_json(r.face_box)},
                    {"label", std::string(r.emotion->label.english)},
                    {"vietnamese", std::string(r.emotion->label.vietnamese)},
                    {"confidences", r.emotion->confidences.values()}};
  } else {
    j["emotion"] = nullptr;
  }
  return j.dump();
}

Pipeline::Pipeline(PipelineConfig config, PipelineNeeds needs) : config_(std::move(config)) {
  config_.validate();
  require_files(config_, needs);
  if (needs.words) lexicons_.words = load_lexicon(config_.lexicon);
  if (needs.caption) {
    model_ = std::make_unique<CaptionModel>(load_weights(config_.caption_model), load_vocabulary(config_.vocabulary),
                                            config_.max_len);
    features_ = std::make_unique<FeatureTable>(load_features(config_.features));
  }
  if (needs.editing && config_.color_fix) {
    xkcd_ = load_colors(config_.xkcd_colors);
    basic_ = load_colors(config_.basic_colors);
    lexicons_.colors = load_color_lexicon(config_.color_terms);
  }
  if (needs.editing && config_.emotion) {
    fer_ = std::make_unique<FerModel>(load_weights(config_.fer_model));
    lexicons_.person_nouns = load_person_nouns(config_.person_nouns);
  }
  if (needs.editing && (config_.color_fix || config_.emotion) && !config_.boxes.empty() &&
      fs::is_regular_file(config_.boxes)) {
    boxes_ = std::make_unique<SidecarBoxes>(SidecarBoxes::load(config_.boxes));
  }
}

const CaptionModel& Pipeline::caption_model() const {
  if (!model_) throw ContractError("pipeline was built without a caption model");
  return *model_;
}

const FeatureTable& Pipeline::features() const {
  if (!features_) throw ContractError("pipeline was built without features");
  return *features_;
}

std::vector<TokenId> Pipeline::generate(const std::string& image_id) const {
  const Tensor& feat = features().at(image_id);
  if (config_.beam_width == 1) return greedy_decode(caption_model(), feat).ids;
  return beam_decode(caption_model(), feat, config_.beam_width).ids;
}

RgbImage Pipeline::image_for(const std::string& image_id, const std::optional<fs::path>& image) const {
  if (image) {
    if (!fs::is_regular_file(*image)) throw MissingSidecarError(fmt::format("image {} not found", image->string()));
    return load_image(*image);
  }
  if (!config_.images.empty()) {
    for (const char* ext : {"", ".png", ".bmp"}) {
      const fs::path candidate = config_.images / (image_id + ext);
      if (fs::is_regular_file(candidate)) return load_image(candidate);
    }
  }
  throw MissingSidecarError(fmt::format("no image for '{}' in {}", image_id, config_.images.string()));
}

DescribeResult Pipeline::describe(const std::string& image_id, const std::optional<fs::path>& image) const {
  DescribeResult r;
  r.image_id = image_id;
  r.tokens = generate(image_id);
  r.caption = AnnotatedCaption::unedited(decode(r.tokens, caption_model().vocab()));

  std::optional<RgbImage> pixels;
  auto source = [&]() -> const RgbImage& {
    if (!pixels) pixels = image_for(image_id, image);
    return *pixels;
  };

  if (config_.color_fix && !xkcd_.empty()) {
    if (const auto phrase = find_color_phrase(r.caption.text, lexicons_)) {
      r.object_noun = phrase->object_noun;
      if (boxes_) r.object_box = locate_object(*boxes_, image_id, phrase->object_noun);
      const RgbImage region = r.object_box ? crop(source(), *r.object_box) : source();
      r.color = dominant_color(region, xkcd_, basic_, config_.color);
      r.caption = replace_color(r.caption, r.color->vietnamese_basic, lexicons_);
    }
  }

  if (config_.emotion && fer_) {
    if (const auto match = find_person_noun(r.caption.text, lexicons_)) {
      r.person_noun = match->phrase;
      if (boxes_) r.face_box = locate_face(*boxes_, image_id);
      if (!r.face_box) throw MissingSidecarError(fmt::format("no face box for '{}'", image_id));
      r.emotion = classify(*fer_, preprocess_face(crop(source(), *r.face_box)));
      r.caption = insert_emotion(r.caption, *match, r.emotion->label, config_.insert_neutral);
    }
  }
  return r;
}

EvaluationResult evaluate(const Pipeline& pipeline, const std::vector<CaptionSet>& dataset,
                          const EvaluationOptions& options) {
  if (dataset.empty()) throw InputError("evaluation dataset is empty");
  if (options.threads == 0) throw InputError("thread count must be at least 1");
  for (const auto& set : dataset) {
    if (set.captions.empty() ||
        (options.references_per_image != 0 && set.captions.size() != options.references_per_image)) {
      throw InputError(fmt::format("image '{}' has {} reference captions, expected {}", set.image_id,
                                   set.captions.size(), options.references_per_image));
    }
  }

  std::map<std::string, std::string> given;
  if (options.candidates) {
    for (auto& set : load_caption_dataset(*options.candidates)) given.emplace(set.image_id, set.captions.front());
    for (const auto& set : dataset) {
      if (!given.count(set.image_id)) throw LookupError(fmt::format("no candidate caption for '{}'", set.image_id));
    }
  } else {
    for (const auto& set : dataset) pipeline.features().at(set.image_id);
  }

  EvaluationResult result;
  result.records.resize(dataset.size());
  result.candidates.resize(dataset.size());
  std::vector<std::exception_ptr> errors(dataset.size());

  auto work = [&](std::size_t i) {
    const CaptionSet& set = dataset[i];
    std::string text;
    if (options.candidates) {
      text = given.at(set.image_id);
    } else if (options.with_edits) {
      text = pipeline.describe(set.image_id).caption.text;
    } else {
      text = decode(pipeline.generate(set.image_id), pipeline.caption_model().vocab());
    }
    EvalRecord& record = result.records[i];
    record.image_id = set.image_id;
    record.candidate = tokenize(text, pipeline.words());
    for (const auto& ref : set.captions) record.references.push_back(tokenize(ref, pipeline.words()));
    result.candidates[i] = std::move(text);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(options.threads, dataset.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  result.scores = corpus_bleu(result.records);
  return result;
}

}  // namespace vicap
