// vicap: Vietnamese image captioning with color and emotion post-editing.
//
// Exit codes: 0 ok, 1 internal error, 2 bad input (arguments, files, unknown
// ids, empty dataset), 3 missing sidecar data.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "vicap/errors.hpp"
#include "vicap/pipeline.hpp"

#ifndef VICAP_DEFAULT_DATA_DIR
#define VICAP_DEFAULT_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace vicap;

namespace {

enum Exit { kOk = 0, kInternal = 1, kBadInput = 2, kMissingSidecar = 3 };

struct CommonOptions {
  std::string data_dir = VICAP_DEFAULT_DATA_DIR;
  std::string config_file;
  std::map<std::string, std::string> paths;
  std::optional<std::size_t> beam, threads, max_len, k;
  std::optional<std::uint32_t> seed;
  std::optional<double> threshold;
  bool no_color_fix = false;
  bool no_emotion = false;
  bool insert_neutral = false;
};

void add_path_option(CLI::App* cmd, CommonOptions& o, const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      "--" + key, [&o, key](const std::string& v) { o.paths[key] = v; }, help);
}

void add_common(CLI::App* cmd, CommonOptions& o, bool editing) {
  cmd->add_option("--data-dir", o.data_dir, "Directory holding models, vocabulary and color tables")
      ->capture_default_str();
  cmd->add_option("--config", o.config_file, "JSON file overriding paths and options");
  add_path_option(cmd, o, "caption-model", "Caption model (.capw)");
  add_path_option(cmd, o, "vocab", "Vocabulary, one token per line");
  add_path_option(cmd, o, "lexicon", "Word segmentation lexicon");
  add_path_option(cmd, o, "features", "Image features (.capf)");
  cmd->add_option("--beam", o.beam, "Beam width; 1 decodes greedily");
  cmd->add_option("--max-len", o.max_len, "Maximum generated tokens");
  if (!editing) return;
  add_path_option(cmd, o, "fer-model", "Facial expression model (.capw)");
  add_path_option(cmd, o, "boxes", "Sidecar boxes TSV: image_id, label, x,y,w,h");
  add_path_option(cmd, o, "images", "Directory of <image_id>.png/.bmp");
  add_path_option(cmd, o, "xkcd-colors", "Color dictionary TSV");
  add_path_option(cmd, o, "basic-colors", "Vietnamese basic color anchors TSV");
  add_path_option(cmd, o, "color-terms", "Vietnamese color words");
  add_path_option(cmd, o, "person-nouns", "Person noun phrases");
  cmd->add_flag("--no-color-fix", o.no_color_fix, "Skip color correction");
  cmd->add_flag("--no-emotion", o.no_emotion, "Skip emotion insertion");
  cmd->add_flag("--insert-neutral", o.insert_neutral, "Insert the neutral expression too");
  cmd->add_option("--k", o.k, "Color clusters");
  cmd->add_option("--seed", o.seed, "k-means seed");
  cmd->add_option("--threshold", o.threshold, "Background distance threshold");
}

PipelineConfig build_config(const CommonOptions& o) {
  PipelineConfig c = PipelineConfig::with_data_dir(o.data_dir);
  if (!o.config_file.empty()) c.apply_json_file(o.config_file);
  const std::map<std::string, fs::path*> targets{
      {"caption-model", &c.caption_model}, {"vocab", &c.vocabulary},        {"lexicon", &c.lexicon},
      {"features", &c.features},           {"fer-model", &c.fer_model},     {"boxes", &c.boxes},
      {"images", &c.images},               {"xkcd-colors", &c.xkcd_colors}, {"basic-colors", &c.basic_colors},
      {"color-terms", &c.color_terms},     {"person-nouns", &c.person_nouns},
  };
  for (const auto& [key, value] : o.paths) *targets.at(key) = value;
  if (o.beam) c.beam_width = *o.beam;
  if (o.threads) c.threads = *o.threads;
  if (o.max_len) c.max_len = *o.max_len;
  if (o.k) c.color.kmeans.k = *o.k;
  if (o.seed) c.color.kmeans.seed = *o.seed;
  if (o.threshold) c.color.background.threshold = *o.threshold;
  if (o.no_color_fix) c.color_fix = false;
  if (o.no_emotion) c.emotion = false;
  if (o.insert_neutral) c.insert_neutral = true;
  c.validate();
  return c;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write {}", path));
  out << content;
}

std::string hex(Rgb c) { return fmt::format("#{:02x}{:02x}{:02x}", c[0], c[1], c[2]); }

RgbImage load_region(const std::string& path, const std::string& box) {
  RgbImage image = load_image(path);
  return box.empty() ? image : crop(image, parse_box(box));
}

int run(int argc, char** argv) {
  CLI::App app{"Vietnamese image captioning with color and emotion post-editing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vicap 1.0.0");

  // describe
  CommonOptions describe_opts;
  std::vector<std::string> describe_ids;
  std::string describe_image, describe_trace;
  bool describe_json_out = false;
  auto* describe = app.add_subcommand("describe", "Caption images and post-edit color and emotion");
  describe->add_option("image_ids", describe_ids, "Image ids present in the feature table")->required();
  describe->add_option("--image", describe_image, "Image file to use instead of the images directory (one id only)");
  describe->add_option("--trace", describe_trace, "Write one JSON edit trace per line to this file");
  describe->add_flag("--json", describe_json_out, "Print the JSON trace instead of the caption line");
  add_common(describe, describe_opts, true);

  // evaluate
  CommonOptions eval_opts;
  std::string eval_dataset, eval_candidates, eval_report, eval_json, eval_out;
  bool eval_with_edits = false;
  std::size_t eval_refs = 5;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Corpus BLEU-1..4 against reference captions");
  evaluate_cmd->add_option("dataset", eval_dataset, "Reference captions TSV: image_id<TAB>caption")->required();
  evaluate_cmd->add_option("--candidates", eval_candidates, "Candidate captions TSV instead of decoding");
  evaluate_cmd->add_flag("--with-edits", eval_with_edits, "Score post-edited captions");
  evaluate_cmd->add_option("--threads", eval_opts.threads, "Worker threads");
  evaluate_cmd->add_option("--references", eval_refs, "Required references per image; 0 accepts any")
      ->capture_default_str();
  evaluate_cmd->add_option("--report", eval_report, "Also write the text report here");
  evaluate_cmd->add_option("--json", eval_json, "Write the JSON report here");
  evaluate_cmd->add_option("--captions-out", eval_out, "Write the scored candidate captions here");
  add_common(evaluate_cmd, eval_opts, true);

  // color
  std::string color_image, color_box, color_data = VICAP_DEFAULT_DATA_DIR, color_xkcd, color_basic;
  std::size_t color_k = 3;
  std::uint32_t color_seed = 42;
  double color_threshold = 30.0;
  bool color_text = false;
  auto* color_cmd = app.add_subcommand("color", "Dominant color of an image region");
  color_cmd->add_option("image", color_image, "PNG or BMP image")->required();
  color_cmd->add_option("--box", color_box, "Region x,y,w,h");
  color_cmd->add_option("--k", color_k, "Clusters")->capture_default_str();
  color_cmd->add_option("--seed", color_seed, "k-means seed")->capture_default_str();
  color_cmd->add_option("--threshold", color_threshold, "Background distance threshold")->capture_default_str();
  color_cmd->add_option("--data-dir", color_data, "Directory holding the color tables")->capture_default_str();
  color_cmd->add_option("--xkcd-colors", color_xkcd, "Color dictionary TSV");
  color_cmd->add_option("--basic-colors", color_basic, "Vietnamese basic color anchors TSV");
  color_cmd->add_flag("--text", color_text, "Print a tab-separated line instead of JSON");

  // fer
  std::string fer_image, fer_box, fer_model, fer_data = VICAP_DEFAULT_DATA_DIR;
  bool fer_text = false;
  auto* fer_cmd = app.add_subcommand("fer", "Facial expression of a face image");
  fer_cmd->add_option("image", fer_image, "PNG or BMP image")->required();
  fer_cmd->add_option("--box", fer_box, "Face region x,y,w,h");
  fer_cmd->add_option("--fer-model", fer_model, "Facial expression model (.capw)");
  fer_cmd->add_option("--data-dir", fer_data, "Directory holding models/fer_model.capw")->capture_default_str();
  fer_cmd->add_flag("--text", fer_text, "Print a readable table instead of JSON");

  // fer-eval
  std::string fe_manifest, fe_model, fe_data = VICAP_DEFAULT_DATA_DIR;
  auto* fe_cmd = app.add_subcommand("fer-eval", "Accuracy and per-class metrics over a labeled face manifest");
  fe_cmd->add_option("manifest", fe_manifest, "TSV: image_path<TAB>label")->required();
  fe_cmd->add_option("--fer-model", fe_model, "Facial expression model (.capw)");
  fe_cmd->add_option("--data-dir", fe_data, "Directory holding models/fer_model.capw")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  if (describe->parsed()) {
    if (!describe_image.empty() && describe_ids.size() != 1) throw InputError("--image needs exactly one image id");
    Pipeline pipeline(build_config(describe_opts), {});
    std::ofstream trace;
    if (!describe_trace.empty()) {
      trace.open(describe_trace, std::ios::binary);
      if (!trace) throw InputError(fmt::format("cannot write {}", describe_trace));
    }
    for (const auto& id : describe_ids) {
      const auto result =
          pipeline.describe(id, describe_image.empty() ? std::nullopt : std::optional<fs::path>(describe_image));
      const std::string json = describe_json(result);
      if (describe_json_out) {
        std::cout << json << "\n";
      } else {
        std::cout << result.caption.text << "\n";
      }
      if (trace.is_open()) trace << json << "\n";
    }
    return kOk;
  }

  if (evaluate_cmd->parsed()) {
    PipelineConfig config = build_config(eval_opts);
    const bool decode = eval_candidates.empty();
    Pipeline pipeline(config, {decode, true, decode && eval_with_edits});
    EvaluationOptions options;
    if (!decode) options.candidates = eval_candidates;
    options.with_edits = eval_with_edits;
    options.threads = config.threads;
    options.references_per_image = eval_refs;
    const auto result = evaluate(pipeline, load_caption_dataset(eval_dataset), options);
    const std::string report = format_bleu_report(result.scores, result.records.size());
    std::cout << report;
    if (!eval_report.empty()) write_file(eval_report, report);
    if (!eval_json.empty()) write_file(eval_json, bleu_report_json(result.scores, result.records.size()));
    if (!eval_out.empty()) {
      std::string lines;
      for (std::size_t i = 0; i < result.records.size(); ++i) {
        lines += result.records[i].image_id + "\t" + result.candidates[i] + "\n";
      }
      write_file(eval_out, lines);
    }
    return kOk;
  }

  if (color_cmd->parsed()) {
    ColorOptions options;
    options.kmeans.k = color_k;
    options.kmeans.seed = color_seed;
    options.background.threshold = color_threshold;
    if (color_k == 0) throw InputError("k must be at least 1");
    const auto xkcd = load_colors(color_xkcd.empty() ? fs::path(color_data) / "xkcd_colors.tsv" : fs::path(color_xkcd));
    const auto basic =
        load_colors(color_basic.empty() ? fs::path(color_data) / "basic_colors.tsv" : fs::path(color_basic));
    const auto result = dominant_color(load_region(color_image, color_box), xkcd, basic, options);
    if (!color_text) {
      nlohmann::json j{{"rgb", hex(result.rgb)},
                       {"xkcd", result.xkcd_name},
                       {"basic", result.vietnamese_basic},
                       {"share", result.cluster_share},
                       {"background_fallback", result.background_fallback},
                       {"objective", result.clustering.objective}};
      std::cout << j.dump() << "\n";
    } else {
      std::cout << fmt::format("{}\t{}\t{}\t{:.4f}\n", result.vietnamese_basic, hex(result.rgb), result.xkcd_name,
                               result.cluster_share);
    }
    return kOk;
  }

  if (fer_cmd->parsed()) {
    const FerModel model(load_weights(fer_model.empty() ? fs::path(fer_data) / "models" / "fer_model.capw"
                                                        : fs::path(fer_model)));
    const auto result = classify(model, preprocess_face(load_region(fer_image, fer_box)));
    if (!fer_text) {
      nlohmann::json j{{"label", std::string(result.label.english)},
                       {"vietnamese", std::string(result.label.vietnamese)},
                       {"confidences", result.confidences.values()}};
      std::cout << j.dump() << "\n";
    } else {
      std::cout << result.label.english << "\t" << result.label.vietnamese << "\n";
      for (const auto& label : emotion_labels()) {
        std::cout << fmt::format("  {:<10} {:.4f}\n", label.english,
                                 result.confidences.data()[static_cast<std::size_t>(label.id)]);
      }
    }
    return kOk;
  }

  if (fe_cmd->parsed()) {
    const FerModel model(load_weights(fe_model.empty() ? fs::path(fe_data) / "models" / "fer_model.capw"
                                                       : fs::path(fe_model)));
    const auto manifest = load_fer_manifest(fe_manifest);
    if (manifest.empty()) throw InputError("face manifest is empty");
    const auto eval = evaluate_fer(model, manifest);
    std::cout << fmt::format("faces: {}\naccuracy: {:.4f}\n", eval.total, eval.accuracy);
    std::cout << fmt::format("{:<10} {:>7} {:>9} {:>7} {:>7}\n", "label", "support", "precision", "recall", "f1");
    for (const auto& label : emotion_labels()) {
      const auto& m = eval.per_class[static_cast<std::size_t>(label.id)];
      std::cout << fmt::format("{:<10} {:>7} {:>9.4f} {:>7.4f} {:>7.4f}\n", label.english, m.support, m.precision,
                               m.recall, m.f1);
    }
    return kOk;
  }
  return kInternal;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const MissingSidecarError& e) {
    std::cerr << "vicap: " << e.what() << "\n";
    return kMissingSidecar;
  } catch (const InputError& e) {
    std::cerr << "vicap: " << e.what() << "\n";
    return kBadInput;
  } catch (const FormatError& e) {
    std::cerr << "vicap: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return kBadInput;
  } catch (const LookupError& e) {
    std::cerr << "vicap: " << e.what() << "\n";
    return kBadInput;
  } catch (const WeightStoreError& e) {
    std::cerr << "vicap: bad model: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "vicap: internal error: " << e.what() << "\n";
    return kInternal;
  }
}
