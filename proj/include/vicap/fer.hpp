#pragma once

// Facial expression recognition over pre-cropped faces.

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vicap/image.hpp"
#include "vicap/model_io.hpp"
#include "vicap/tensor.hpp"

namespace vicap {

struct EmotionLabel {
  int id;
  std::string_view english;
  std::string_view vietnamese;

  friend bool operator==(const EmotionLabel&, const EmotionLabel&) = default;
};

inline constexpr std::size_t kEmotionCount = 7;
inline constexpr std::size_t kFaceSize = 48;

// afraid, angry, disgusted, happy, neutral, sad, surprised (ids 0..6).
const std::array<EmotionLabel, kEmotionCount>& emotion_labels();
const EmotionLabel& emotion_by_id(int id);
// Throws LookupError for unknown names.
const EmotionLabel& emotion_by_name(std::string_view english);

struct FaceImage {
  Tensor pixels;  // [1 x size x size], values in [0, 1]
};

// Luma grayscale (0.299 R + 0.587 G + 0.114 B), bilinear resize with
// half-pixel centers, scaled to [0, 1].
FaceImage preprocess_face(const RgbImage& rgb, std::size_t target = kFaceSize);

// Default layer sequence, used when the store has no "architecture" metadata:
// conv 32@3x3 + relu, avgpool 2, conv 64@3x3 + relu, avgpool 2, dense 128 + relu, dense 7 + softmax.
inline constexpr std::string_view kReferenceFerArchitecture =
    "conv:conv1:1|relu|avgpool:2:2|conv:conv2:1|relu|avgpool:2:2|flatten|dense:fc1:relu|dense:fc2:softmax";

class FerModel {
 public:
  // The "architecture" metadata is a '|' separated layer list:
  //   conv:<name>:<stride>   uses <name>.kernel [k x c x kh x kw] and <name>.bias [k]
  //   avgpool:<window>:<stride>
  //   relu | flatten
  //   dense:<name>:<relu|softmax|none>   uses <name>.kernel [n x m] and <name>.bias [m]
  // Shapes are checked end to end against "input_shape" (default 1x48x48); the
  // last layer must be a 7-way softmax dense.
  explicit FerModel(const WeightStore& store);

  const Shape& input_shape() const noexcept { return input_shape_; }
  // Output of the network; with_softmax=false stops before the final softmax.
  Tensor forward(const FaceImage& face, bool with_softmax = true) const;

 private:
  enum class LayerKind { conv, avgpool, relu, flatten, dense };
  struct Layer {
    LayerKind kind;
    Tensor kernel;
    Tensor bias;
    std::size_t window = 0;
    std::size_t stride = 1;
    Activation activation = Activation::none;
  };
  std::vector<Layer> layers_;
  Shape input_shape_;
};

struct FerResult {
  EmotionLabel label;
  Tensor confidences;  // [7], sums to 1
};

FerResult classify(const FerModel& model, const FaceImage& face);

struct FerClassMetrics {
  std::size_t support = 0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

struct FerEvaluation {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::array<FerClassMetrics, kEmotionCount> per_class{};
  std::array<std::array<std::size_t, kEmotionCount>, kEmotionCount> confusion{};  // [truth][predicted]
};

FerEvaluation summarize_predictions(const std::vector<std::pair<int, int>>& truth_and_predicted);

// `image_path<TAB>english_label` lines, paths relative to the manifest's directory.
struct ManifestEntry {
  std::filesystem::path image;
  const EmotionLabel* label;
};
std::vector<ManifestEntry> load_fer_manifest(const std::filesystem::path& path);

FerEvaluation evaluate_fer(const FerModel& model, const std::vector<ManifestEntry>& manifest);

}  // namespace vicap
