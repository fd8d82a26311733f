#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "morphocf/dataset.hpp"
#include "morphocf/distance.hpp"
#include "morphocf/errors.hpp"

namespace morphocf {

using ClassId = std::uint32_t;

// The model-agnostic contract: a deterministic, total prediction function.
// Hard labels only; Algorithms 1-3 never consume probabilities.
class Predictor {
public:
  virtual ~Predictor() = default;

  virtual std::vector<ClassId> predict(const std::vector<EncodedInstance>& batch) const = 0;
  virtual const std::vector<std::string>& class_names() const = 0;
  virtual std::string fingerprint() const = 0;

  std::size_t n_classes() const { return class_names().size(); }

  ClassId predict_one(const EncodedInstance& x) const {
    return predict(std::vector<EncodedInstance>{x}).front();
  }
};

inline std::vector<std::string> default_class_names(std::size_t n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t i = 0; i < n; ++i) names.push_back(std::to_string(i));
  return names;
}

// Majority vote over the k nearest training rows. Neighbour ties break by
// row index, vote ties by the smallest class index.
class KnnPredictor final : public Predictor {
public:
  KnnPredictor(std::vector<EncodedInstance> train, std::vector<ClassId> labels, std::size_t k,
               DistanceSpec spec, std::vector<std::string> names)
      : train_(std::move(train)), labels_(std::move(labels)), k_(k), spec_(spec),
        names_(std::move(names)) {
    if (train_.empty()) throw EmptyTrainingSet("knn predictor needs training rows");
    if (train_.size() != labels_.size())
      throw ShapeMismatch("knn: labels do not match training rows");
    if (k_ < 1 || k_ > train_.size())
      throw Error("knn: k must be in [1, n]");
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& e : train_)
      h = fnv1a(e.values.data(), e.values.size() * sizeof(double), h);
    h = fnv1a(labels_.data(), labels_.size() * sizeof(ClassId), h);
    char buf[80];
    std::snprintf(buf, sizeof buf, "knn:k=%zu:%s:%016llx", k_, to_string(spec_.metric),
                  static_cast<unsigned long long>(h));
    fingerprint_ = buf;
  }

  std::vector<ClassId> predict(const std::vector<EncodedInstance>& batch) const override {
    std::vector<ClassId> out;
    out.reserve(batch.size());
    std::vector<std::size_t> order(train_.size());
    std::vector<double> dist(train_.size());
    for (const auto& x : batch) {
      for (std::size_t i = 0; i < train_.size(); ++i) dist[i] = distance(x, train_[i], spec_);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_),
                        order.end(), [&](std::size_t a, std::size_t b) {
                          return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
                        });
      std::vector<std::size_t> votes(names_.size(), 0);
      for (std::size_t r = 0; r < k_; ++r) ++votes[labels_[order[r]]];
      out.push_back(static_cast<ClassId>(
          std::max_element(votes.begin(), votes.end()) - votes.begin()));
    }
    return out;
  }

  const std::vector<std::string>& class_names() const override { return names_; }
  std::string fingerprint() const override { return fingerprint_; }

private:
  std::vector<EncodedInstance> train_;
  std::vector<ClassId> labels_;
  std::size_t k_;
  DistanceSpec spec_;
  std::vector<std::string> names_;
  std::string fingerprint_;
};

inline std::unique_ptr<Predictor> knn_predictor(const Dataset& train,
                                                const std::vector<ClassId>& labels, std::size_t k,
                                                DistanceSpec spec,
                                                std::vector<std::string> names = {}) {
  if (names.empty()) {
    ClassId maxc = 0;
    for (auto c : labels) maxc = std::max(maxc, c);
    names = default_class_names(maxc + 1);
  }
  return std::make_unique<KnnPredictor>(train.encoded, labels, k, spec, std::move(names));
}

// Plain dense stack: dense -> ReLU -> ... -> dense -> argmax, evaluated with
// straight loops. Argmax ties break toward the lowest class index.
class MlpPredictor final : public Predictor {
public:
  struct Layer {
    std::vector<std::vector<double>> weights; // [out][in]
    std::vector<double> bias;                 // [out]
  };

  MlpPredictor(std::vector<Layer> layers, std::string fingerprint)
      : layers_(std::move(layers)), fingerprint_(std::move(fingerprint)) {
    if (layers_.empty()) throw CorruptWeights("mlp: no layers");
    for (const auto& l : layers_) {
      if (l.weights.empty() || l.bias.size() != l.weights.size())
        throw ShapeMismatch("mlp: bias size does not match layer output");
      for (const auto& row : l.weights)
        if (row.size() != l.weights.front().size())
          throw ShapeMismatch("mlp: ragged weight matrix");
    }
    for (std::size_t i = 1; i < layers_.size(); ++i)
      if (layers_[i].weights.front().size() != layers_[i - 1].weights.size())
        throw ShapeMismatch("mlp: layer widths do not chain");
    names_ = default_class_names(layers_.back().weights.size());
  }

  std::vector<ClassId> predict(const std::vector<EncodedInstance>& batch) const override {
    std::vector<ClassId> out;
    out.reserve(batch.size());
    for (const auto& x : batch) {
      if (x.width() != layers_.front().weights.front().size())
        throw ShapeMismatch("mlp: input width " + std::to_string(x.width()) + ", expected " +
                            std::to_string(layers_.front().weights.front().size()));
      std::vector<double> act = x.values;
      for (std::size_t li = 0; li < layers_.size(); ++li) {
        const auto& l = layers_[li];
        std::vector<double> next(l.weights.size());
        for (std::size_t o = 0; o < l.weights.size(); ++o) {
          double s = l.bias[o];
          for (std::size_t i = 0; i < act.size(); ++i) s += l.weights[o][i] * act[i];
          next[o] = (li + 1 < layers_.size() && s < 0.0) ? 0.0 : s;
        }
        act = std::move(next);
      }
      out.push_back(static_cast<ClassId>(
          std::max_element(act.begin(), act.end()) - act.begin()));
    }
    return out;
  }

  const std::vector<std::string>& class_names() const override { return names_; }
  std::string fingerprint() const override { return fingerprint_; }

private:
  std::vector<Layer> layers_;
  std::vector<std::string> names_;
  std::string fingerprint_;
};

// Weights file: JSON {"layers": [{"weights": [[...]], "bias": [...]}, ...]}.
inline std::unique_ptr<Predictor> mlp_predictor(const std::string& weights_path) {
  std::ifstream in(weights_path, std::ios::binary);
  if (!in) throw CorruptWeights("cannot open weights file '" + weights_path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptWeights("weights parse error: " + std::string(e.what()));
  }
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
    throw CorruptWeights("weights file needs a non-empty 'layers' array");
  std::vector<MlpPredictor::Layer> layers;
  try {
    for (const auto& jl : j["layers"]) {
      MlpPredictor::Layer l;
      l.weights = jl.at("weights").get<std::vector<std::vector<double>>>();
      l.bias = jl.at("bias").get<std::vector<double>>();
      layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptWeights("weights structure error: " + std::string(e.what()));
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "mlp:%016llx",
                static_cast<unsigned long long>(fnv1a(text.data(), text.size())));
  try {
    return std::make_unique<MlpPredictor>(std::move(layers), buf);
  } catch (const ShapeMismatch& e) {
    throw CorruptWeights(e.what());
  }
}

// Test/CLI helper: wraps an arbitrary deterministic function.
class FunctionPredictor final : public Predictor {
public:
  FunctionPredictor(std::function<ClassId(const EncodedInstance&)> fn, std::size_t n_classes,
                    std::string fingerprint = "function", std::vector<std::string> names = {})
      : fn_(std::move(fn)), names_(names.empty() ? default_class_names(n_classes) : std::move(names)),
        fingerprint_(std::move(fingerprint)) {}

  FunctionPredictor(std::function<ClassId(const EncodedInstance&)> fn, std::size_t n_classes,
                    std::vector<std::string> names)
      : FunctionPredictor(std::move(fn), n_classes, "function", std::move(names)) {}

  std::vector<ClassId> predict(const std::vector<EncodedInstance>& batch) const override {
    std::vector<ClassId> out;
    out.reserve(batch.size());
    for (const auto& x : batch) out.push_back(fn_(x));
    return out;
  }

  const std::vector<std::string>& class_names() const override { return names_; }
  std::string fingerprint() const override { return fingerprint_; }

private:
  std::function<ClassId(const EncodedInstance&)> fn_;
  std::vector<std::string> names_;
  std::string fingerprint_;
};

// One ClassId per instance, dataset order preserved. Internally batched so
// bridge predictors see bounded requests.
inline std::vector<ClassId> predict_labels(const Dataset& ds, const Predictor& p,
                                           std::size_t batch_size = 256) {
  std::vector<ClassId> out;
  out.reserve(ds.size());
  std::vector<EncodedInstance> batch;
  for (std::size_t i = 0; i < ds.size(); i += batch_size) {
    const std::size_t e = std::min(ds.size(), i + batch_size);
    batch.assign(ds.encoded.begin() + static_cast<std::ptrdiff_t>(i),
                 ds.encoded.begin() + static_cast<std::ptrdiff_t>(e));
    auto part = p.predict(batch);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

} // namespace morphocf
