#pragma once

// End-to-end captioning: decode a caption from precomputed image features,
// then correct its color phrase and add the facial expression of the person
// it mentions. Also the corpus evaluation loop behind `vicap evaluate`.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vicap/bleu.hpp"
#include "vicap/caption_editor.hpp"
#include "vicap/color.hpp"
#include "vicap/fer.hpp"
#include "vicap/image.hpp"
#include "vicap/merge_decoder.hpp"
#include "vicap/model_io.hpp"
#include "vicap/viet_text.hpp"

namespace vicap {

// Bad command-line or configuration input.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A stage needs sidecar data (boxes, the image itself) that is not there.
class MissingSidecarError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PipelineConfig {
  std::filesystem::path caption_model;
  std::filesystem::path vocabulary;
  std::filesystem::path lexicon;
  std::filesystem::path features;
  std::filesystem::path fer_model;
  std::filesystem::path xkcd_colors;
  std::filesystem::path basic_colors;
  std::filesystem::path color_terms;
  std::filesystem::path person_nouns;
  std::filesystem::path boxes;   // optional sidecar
  std::filesystem::path images;  // directory of <image_id>.png / .bmp

  std::size_t beam_width = 1;  // 1 = greedy
  std::optional<std::size_t> max_len;
  bool color_fix = true;
  bool emotion = true;
  bool insert_neutral = false;
  ColorOptions color;
  std::size_t threads = 1;

  // Paths laid out as in the shipped data directory:
  //   models/caption_model.capw  models/fer_model.capw  vocab.txt  lexicon.txt
  //   features.capf  boxes.tsv  images/  xkcd_colors.tsv  basic_colors.tsv
  //   color_terms.txt  person_nouns.txt
  static PipelineConfig with_data_dir(const std::filesystem::path& dir);

  // Overrides fields from a JSON object. Relative paths resolve against the
  // file's directory. InputError for unknown keys or wrong value types.
  void apply_json_file(const std::filesystem::path& path);
  void apply_json_text(const std::string& text, const std::filesystem::path& base_dir);

  // Range checks on the numeric options; InputError on failure.
  void validate() const;
};

// What a run needs loaded.
struct PipelineNeeds {
  bool caption = true;  // model, vocabulary, features
  bool words = true;    // lexicon
  bool editing = true;  // color and emotion assets, as enabled in the config
};

// InputError listing every required file that does not exist.
void require_files(const PipelineConfig& config, const PipelineNeeds& needs);

struct LabeledBox {
  std::string label;  // normalized
  Box box;
};

inline constexpr std::string_view kFaceLabel = "face";

class ObjectLocator {
 public:
  virtual ~ObjectLocator() = default;
  virtual std::vector<LabeledBox> boxes(const std::string& image_id) const = 0;
};

// `image_id<TAB>label<TAB>x,y,w,h` lines.
class SidecarBoxes : public ObjectLocator {
 public:
  static SidecarBoxes parse(const std::string& text);
  static SidecarBoxes load(const std::filesystem::path& path);

  std::vector<LabeledBox> boxes(const std::string& image_id) const override;
  std::size_t size() const noexcept { return rows_.size(); }

 private:
  std::vector<std::pair<std::string, LabeledBox>> rows_;
};

// "x,y,w,h" with non-negative integers and positive extent; InputError otherwise.
Box parse_box(const std::string& text);

// Box labeled with the object noun, else the first box that is not a face.
std::optional<Box> locate_object(const ObjectLocator& locator, const std::string& image_id, const std::string& noun);
std::optional<Box> locate_face(const ObjectLocator& locator, const std::string& image_id);

struct DescribeResult {
  std::string image_id;
  std::vector<TokenId> tokens;
  AnnotatedCaption caption;

  std::string object_noun;
  std::optional<Box> object_box;  // nullopt: the full image was used
  std::optional<ColorResult> color;

  std::string person_noun;
  std::optional<Box> face_box;
  std::optional<FerResult> emotion;
};

std::string describe_json(const DescribeResult& result);

class Pipeline {
 public:
  Pipeline(PipelineConfig config, PipelineNeeds needs);

  const PipelineConfig& config() const noexcept { return config_; }
  const Lexicon& words() const noexcept { return lexicons_.words; }
  const EditorLexicons& lexicons() const noexcept { return lexicons_; }
  const CaptionModel& caption_model() const;
  const FeatureTable& features() const;

  std::vector<TokenId> generate(const std::string& image_id) const;
  // Raw caption, then color fix, then emotion, as enabled in the config.
  // `image` overrides the image looked up in the images directory.
  DescribeResult describe(const std::string& image_id,
                          const std::optional<std::filesystem::path>& image = std::nullopt) const;

 private:
  RgbImage image_for(const std::string& image_id, const std::optional<std::filesystem::path>& image) const;

  PipelineConfig config_;
  std::unique_ptr<CaptionModel> model_;
  std::unique_ptr<FeatureTable> features_;
  EditorLexicons lexicons_;
  std::unique_ptr<FerModel> fer_;
  std::vector<NamedColor> xkcd_;
  std::vector<NamedColor> basic_;
  std::unique_ptr<SidecarBoxes> boxes_;
};

struct EvaluationOptions {
  std::optional<std::filesystem::path> candidates;  // `image_id<TAB>caption`, replaces decoding
  bool with_edits = false;
  std::size_t threads = 1;
  std::size_t references_per_image = 5;  // 0 accepts any positive count
};

struct EvaluationResult {
  std::vector<EvalRecord> records;       // dataset order
  std::vector<std::string> candidates;   // caption text per record
  BleuScores scores;
};

// InputError for an empty dataset or a wrong reference count, LookupError for
// ids without features or candidates. With candidates, the pipeline only
// needs its word lexicon.
EvaluationResult evaluate(const Pipeline& pipeline, const std::vector<CaptionSet>& dataset,
                          const EvaluationOptions& options);

}  // namespace vicap
