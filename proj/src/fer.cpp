#include "vicap/fer.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "vicap/errors.hpp"
#include "vicap/viet_text.hpp"

namespace vicap {

const std::array<EmotionLabel, kEmotionCount>& emotion_labels() {
  static constexpr std::array<EmotionLabel, kEmotionCount> labels{{
      {0, "afraid", "sợ hãi"},
      {1, "angry", "giận dữ"},
      {2, "disgusted", "ghê tởm"},
      {3, "happy", "vui vẻ"},
      {4, "neutral", "trung lập"},
      {5, "sad", "buồn bã"},
      {6, "surprised", "ngạc nhiên"},
  }};
  return labels;
}

const EmotionLabel& emotion_by_id(int id) {
  if (id < 0 || id >= static_cast<int>(kEmotionCount)) throw LookupError(fmt::format("no emotion with id {}", id));
  return emotion_labels()[static_cast<std::size_t>(id)];
}

const EmotionLabel& emotion_by_name(std::string_view english) {
  for (const auto& label : emotion_labels()) {
    if (label.english == english) return label;
  }
  throw LookupError(fmt::format("unknown emotion '{}'", english));
}

FaceImage preprocess_face(const RgbImage& rgb, std::size_t target) {
  if (rgb.empty()) throw ContractError("preprocess_face: empty image");
  if (target == 0) throw ContractError("preprocess_face: target size must be positive");
  const std::size_t w = rgb.width, h = rgb.height;
  std::vector<double> gray(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const Rgb c = rgb.at(x, y);
      gray[y * w + x] = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
    }
  }

  auto source_coord = [](std::size_t dst, std::size_t in, std::size_t out) {
    const double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };

  Tensor pixels({1, target, target});
  for (std::size_t oy = 0; oy < target; ++oy) {
    const double sy = source_coord(oy, h, target);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < target; ++ox) {
      const double sx = source_coord(ox, w, target);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = gray[y0 * w + x0] * (1.0 - fx) + gray[y0 * w + x1] * fx;
      const double bottom = gray[y1 * w + x0] * (1.0 - fx) + gray[y1 * w + x1] * fx;
      const double v = (top * (1.0 - fy) + bottom * fy) / 255.0;
      pixels[oy * target + ox] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return {std::move(pixels)};
}

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = s.find(sep, start);
    parts.emplace_back(s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return parts;
}

std::size_t parse_positive(const std::string& s, const std::string& layer) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || v == 0) {
    throw ContractError(fmt::format("architecture layer '{}': '{}' is not a positive integer", layer, s));
  }
  return v;
}

Shape parse_shape(const std::string& s) {
  Shape shape;
  for (const auto& part : split(s, 'x')) shape.push_back(parse_positive(part, "input_shape"));
  return shape;
}

}  // namespace

FerModel::FerModel(const WeightStore& store) {
  if (store.model_kind() != kFerModelKind) {
    throw ContractError(fmt::format("expected a {} model, got '{}'", kFerModelKind, store.model_kind()));
  }
  const std::string arch = store.metadata("architecture").value_or(std::string(kReferenceFerArchitecture));
  input_shape_ = parse_shape(store.metadata("input_shape").value_or("1x48x48"));
  if (input_shape_.size() != 3) throw ContractError("input_shape must be CxHxW");

  Shape shape = input_shape_;
  for (const std::string& spec : split(arch, '|')) {
    const auto parts = split(spec, ':');
    const std::string& op = parts[0];
    Layer layer{};
    if (op == "conv" && parts.size() == 3) {
      layer.kind = LayerKind::conv;
      layer.kernel = store.get(parts[1] + ".kernel");
      layer.stride = parse_positive(parts[2], spec);
      if (shape.size() != 3 || layer.kernel.rank() != 4 || layer.kernel.dim(1) != shape[0] ||
          layer.kernel.dim(2) > shape[1] || layer.kernel.dim(3) > shape[2]) {
        throw WeightStoreError(parts[1] + ".kernel",
                               fmt::format("{}.kernel {} does not fit input {}", parts[1],
                                           shape_to_string(layer.kernel.shape()), shape_to_string(shape)));
      }
      layer.bias = store.get(parts[1] + ".bias", {layer.kernel.dim(0)});
      shape = {layer.kernel.dim(0), (shape[1] - layer.kernel.dim(2)) / layer.stride + 1,
               (shape[2] - layer.kernel.dim(3)) / layer.stride + 1};
    } else if (op == "avgpool" && parts.size() == 3) {
      layer.kind = LayerKind::avgpool;
      layer.window = parse_positive(parts[1], spec);
      layer.stride = parse_positive(parts[2], spec);
      if (shape.size() != 3 || layer.window > shape[1] || layer.window > shape[2]) {
        throw ContractError(fmt::format("layer '{}' does not fit input {}", spec, shape_to_string(shape)));
      }
      shape = {shape[0], (shape[1] - layer.window) / layer.stride + 1, (shape[2] - layer.window) / layer.stride + 1};
    } else if (op == "relu" && parts.size() == 1) {
      layer.kind = LayerKind::relu;
    } else if (op == "flatten" && parts.size() == 1) {
      layer.kind = LayerKind::flatten;
      shape = {shape_product(shape)};
    } else if (op == "dense" && parts.size() == 3) {
      layer.kind = LayerKind::dense;
      if (parts[2] == "relu") {
        layer.activation = Activation::relu;
      } else if (parts[2] == "softmax") {
        layer.activation = Activation::softmax;
      } else if (parts[2] == "none") {
        layer.activation = Activation::none;
      } else {
        // Only relu/softmax/none are available to dense layers.
        throw ContractError(fmt::format("layer '{}': unsupported activation '{}'", spec, parts[2]));
      }
      layer.kernel = store.get(parts[1] + ".kernel");
      if (shape.size() != 1 || layer.kernel.rank() != 2 || layer.kernel.dim(0) != shape[0]) {
        throw WeightStoreError(parts[1] + ".kernel",
                               fmt::format("{}.kernel {} does not fit input {}", parts[1],
                                           shape_to_string(layer.kernel.shape()), shape_to_string(shape)));
      }
      layer.bias = store.get(parts[1] + ".bias", {layer.kernel.dim(1)});
      shape = {layer.kernel.dim(1)};
    } else {
      throw ContractError(fmt::format("unknown architecture layer '{}'", spec));
    }
    layers_.push_back(std::move(layer));
  }
  if (layers_.empty() || layers_.back().kind != LayerKind::dense ||
      layers_.back().activation != Activation::softmax || shape != Shape{kEmotionCount}) {
    throw ContractError("FER architecture must end in a 7-way softmax dense layer");
  }
}

Tensor FerModel::forward(const FaceImage& face, bool with_softmax) const {
  if (face.pixels.shape() != input_shape_) {
    throw DimensionError(fmt::format("face {} does not match model input {}", shape_to_string(face.pixels.shape()),
                                     shape_to_string(input_shape_)));
  }
  Tensor x = face.pixels;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    switch (layer.kind) {
      case LayerKind::conv:
        x = conv2d(x, layer.kernel, layer.bias, layer.stride);
        break;
      case LayerKind::avgpool:
        x = avg_pool2d(x, layer.window, layer.stride);
        break;
      case LayerKind::relu:
        x = relu(x);
        break;
      case LayerKind::flatten:
        x = flatten(x);
        break;
      case LayerKind::dense: {
        const bool last = i + 1 == layers_.size();
        const Activation act = (last && !with_softmax) ? Activation::none : layer.activation;
        x = dense(x.rank() == 1 ? x : flatten(x), layer.kernel, layer.bias, act);
        break;
      }
    }
  }
  return x;
}

FerResult classify(const FerModel& model, const FaceImage& face) {
  Tensor confidences = model.forward(face, true);
  std::size_t best = 0;
  for (std::size_t i = 1; i < confidences.size(); ++i) {
    if (confidences[i] > confidences[best]) best = i;
  }
  return {emotion_by_id(static_cast<int>(best)), std::move(confidences)};
}

FerEvaluation summarize_predictions(const std::vector<std::pair<int, int>>& truth_and_predicted) {
  FerEvaluation eval;
  for (const auto& [truth, predicted] : truth_and_predicted) {
    emotion_by_id(truth);
    emotion_by_id(predicted);
    ++eval.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
    ++eval.total;
    if (truth == predicted) ++eval.correct;
  }
  eval.accuracy = eval.total ? static_cast<double>(eval.correct) / static_cast<double>(eval.total) : 0.0;
  for (std::size_t c = 0; c < kEmotionCount; ++c) {
    std::size_t support = 0, predicted = 0;
    for (std::size_t k = 0; k < kEmotionCount; ++k) {
      support += eval.confusion[c][k];
      predicted += eval.confusion[k][c];
    }
    const double hits = static_cast<double>(eval.confusion[c][c]);
    FerClassMetrics& m = eval.per_class[c];
    m.support = support;
    m.recall = support ? hits / static_cast<double>(support) : 0.0;
    m.precision = predicted ? hits / static_cast<double>(predicted) : 0.0;
    m.f1 = (m.recall + m.precision) > 0.0 ? 2.0 * m.recall * m.precision / (m.recall + m.precision) : 0.0;
  }
  return eval;
}

std::vector<ManifestEntry> load_fer_manifest(const std::filesystem::path& path) {
  std::vector<ManifestEntry> entries;
  const auto lines = split_lines(read_text_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) {
      throw FormatError(FormatErrorKind::parse, fmt::format("{}:{}: expected 'image_path<TAB>label'",
                                                            path.string(), i + 1));
    }
    const std::string label = lines[i].substr(tab + 1);
    const EmotionLabel* emotion = nullptr;
    try {
      emotion = &emotion_by_name(label);
    } catch (const LookupError&) {
      throw FormatError(FormatErrorKind::parse, fmt::format("{}:{}: unknown label '{}'", path.string(), i + 1, label));
    }
    entries.push_back({path.parent_path() / lines[i].substr(0, tab), emotion});
  }
  return entries;
}

FerEvaluation evaluate_fer(const FerModel& model, const std::vector<ManifestEntry>& manifest) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(manifest.size());
  for (const auto& entry : manifest) {
    const FerResult result = classify(model, preprocess_face(load_image(entry.image), model.input_shape()[1]));
    pairs.emplace_back(entry.label->id, result.label.id);
  }
  return summarize_predictions(pairs);
}

}  // namespace vicap
