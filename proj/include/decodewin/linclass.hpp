#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace decodewin {

/// Non-owning view of N labeled row-major vectors of dimension `dim`.
struct SampleView {
  std::span<const float> features;
  std::span<const int> labels;
  std::size_t dim = 0;

  std::size_t size() const { return labels.size(); }
  std::span<const float> row(std::size_t i) const { return features.subspan(i * dim, dim); }
  SampleView slice(std::size_t begin, std::size_t end) const {
    return {features.subspan(begin * dim, (end - begin) * dim), labels.subspan(begin, end - begin), dim};
  }
};

/// Owning counterpart of SampleView.
struct Samples {
  std::size_t dim = 0;
  std::vector<float> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  void push(std::span<const float> x, int label) {
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(label);
  }
  SampleView view() const { return {features, labels, dim}; }
};

struct TrainConfig {
  double l2_strength = 1.0;
  int max_iterations = 500;
  double grad_tolerance = 1e-4; // max-norm of the full gradient

  void validate() const;
};

/// Per-dimension z-scoring fitted on training data.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev; // zero-variance dimensions hold 1

  static Standardizer fit(const SampleView& samples);
  void apply(std::span<const float> x, std::span<double> out) const;
};

/// Multinomial logistic regression over standardized inputs.
/// weights is K x (D+1), row-major, last column the bias.
struct LinearClassifier {
  std::vector<std::string> class_vocab;
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;
  Standardizer standardizer;
  double l2_strength = 0.0;
  bool converged = false;
  int iterations_used = 0;

  double weight(std::size_t k, std::size_t d) const { return weights[k * (dim + 1) + d]; }
};

/// Mean softmax cross-entropy plus (l2/2)*||W without bias||^2 on the given
/// (already preprocessed) samples. Writes the gradient when `grad` is non-empty.
double softmax_objective(const SampleView& samples, std::size_t n_classes, double l2,
                         std::span<const double> weights, std::span<double> grad);

/// Full-batch gradient descent from zero weights with Armijo backtracking;
/// the trial step comes from the Barzilai-Borwein rule. `loss_trace`, when
/// given, receives the objective after every accepted step (first entry: at zero).
LinearClassifier train_softmax(const SampleView& samples, std::size_t n_classes,
                               const TrainConfig& config,
                               std::vector<double>* loss_trace = nullptr);

int predict(const LinearClassifier& clf, std::span<const float> x);

/// Fraction of correctly predicted samples.
double accuracy(const LinearClassifier& clf, const SampleView& samples);

/// Number of correct predictions; the building block of batched evaluation.
std::size_t count_correct(const LinearClassifier& clf, const SampleView& samples);

/// Worst relative deviation between the analytic gradient of softmax_objective
/// and central differences, probing `probe_count` random coordinates at a
/// random weight point drawn from N(0, 0.5^2).
double gradient_check(const SampleView& samples, std::size_t n_classes, double l2, int probe_count,
                      double epsilon = 1e-5, std::uint64_t seed = 0);

/// Same check at caller-provided weights over all coordinates.
double gradient_check_at(const SampleView& samples, std::size_t n_classes, double l2,
                         std::span<const double> weights, double epsilon = 1e-5);

nlohmann::json to_json(const LinearClassifier& clf);
LinearClassifier classifier_from_json(const nlohmann::json& doc);

} // namespace decodewin
