#include "decodewin/linclass.hpp"

#include "decodewin/errors.hpp"
#include "decodewin/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace decodewin {
namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-14;
constexpr double kMaxStep = 1e8;

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_samples(const SampleView& samples, std::size_t n_classes) {
  if (samples.dim == 0) throw ValidationError("samples have zero dimension");
  if (samples.features.size() != samples.size() * samples.dim)
    throw ValidationError("feature buffer size does not match labels x dim");
  for (int y : samples.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
      throw ValidationError("class id " + std::to_string(y) + " outside [0, " +
                            std::to_string(n_classes) + ")");
}

} // namespace

void TrainConfig::validate() const {
  if (!(l2_strength >= 0.0) || !std::isfinite(l2_strength))
    throw UsageError("l2_strength must be a finite non-negative number");
  if (max_iterations < 1) throw UsageError("max_iterations must be at least 1");
  if (!(grad_tolerance > 0.0)) throw UsageError("grad_tolerance must be positive");
}

Standardizer Standardizer::fit(const SampleView& samples) {
  const std::size_t n = samples.size();
  const std::size_t d = samples.dim;
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  if (n == 0) {
    s.stddev.assign(d, 1.0);
    return s;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = samples.row(i);
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += x[j];
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = samples.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x[j] - s.mean[j];
      s.stddev[j] += c * c;
    }
  }
  for (double& v : s.stddev) {
    v = std::sqrt(v / static_cast<double>(n));
    if (!(v > 0.0) || !std::isfinite(v)) v = 1.0;
  }
  return s;
}

void Standardizer::apply(std::span<const float> x, std::span<double> out) const {
  // Rounded through float so prediction sees exactly what training saw.
  for (std::size_t j = 0; j < x.size(); ++j)
    out[j] = static_cast<float>((x[j] - mean[j]) / stddev[j]);
}

double softmax_objective(const SampleView& samples, std::size_t n_classes, double l2,
                         std::span<const double> weights, std::span<double> grad) {
  const std::size_t n = samples.size();
  const std::size_t d = samples.dim;
  const std::size_t stride = d + 1;
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

  std::vector<double> logits(n_classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = samples.row(i);
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n_classes; ++k) {
      const double* w = weights.data() + k * stride;
      double z = w[d];
      for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
      logits[k] = z;
      zmax = std::max(zmax, z);
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < n_classes; ++k) {
      logits[k] = std::exp(logits[k] - zmax);
      denom += logits[k];
    }
    const auto y = static_cast<std::size_t>(samples.labels[i]);
    loss += std::log(denom) - std::log(logits[y]);
    if (!want_grad) continue;
    for (std::size_t k = 0; k < n_classes; ++k) {
      const double delta = logits[k] / denom - (k == y ? 1.0 : 0.0);
      double* g = grad.data() + k * stride;
      for (std::size_t j = 0; j < d; ++j) g[j] += delta * x[j];
      g[d] += delta;
    }
  }

  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  loss *= inv_n;
  double penalty = 0.0;
  for (std::size_t k = 0; k < n_classes; ++k) {
    for (std::size_t j = 0; j < d; ++j) {
      const double w = weights[k * stride + j];
      penalty += w * w;
      if (want_grad) grad[k * stride + j] = grad[k * stride + j] * inv_n + l2 * w;
    }
    if (want_grad) grad[k * stride + d] *= inv_n;
  }
  return loss + 0.5 * l2 * penalty;
}

LinearClassifier train_softmax(const SampleView& samples, std::size_t n_classes,
                               const TrainConfig& config, std::vector<double>* loss_trace) {
  config.validate();
  check_samples(samples, n_classes);
  if (samples.size() == 0) throw ValidationError("cannot train on an empty sample set");
  for (float v : samples.features)
    if (!std::isfinite(v)) throw ValidationError("non-finite feature value in training data");
  const std::set<int> present(samples.labels.begin(), samples.labels.end());
  if (present.size() < 2 || n_classes < 2)
    throw ValidationError("training data must contain at least two distinct classes");

  LinearClassifier clf;
  clf.n_classes = n_classes;
  clf.dim = samples.dim;
  clf.l2_strength = config.l2_strength;
  clf.standardizer = Standardizer::fit(samples);

  Samples z;
  z.dim = samples.dim;
  z.labels.assign(samples.labels.begin(), samples.labels.end());
  z.features.resize(samples.features.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto x = samples.row(i);
    for (std::size_t j = 0; j < samples.dim; ++j)
      z.features[i * samples.dim + j] = static_cast<float>(
          (x[j] - clf.standardizer.mean[j]) / clf.standardizer.stddev[j]);
  }
  const SampleView data = z.view();

  const std::size_t n_params = n_classes * (samples.dim + 1);
  std::vector<double> w(n_params, 0.0), g(n_params), w_next(n_params), g_next(n_params);
  double f = softmax_objective(data, n_classes, config.l2_strength, w, g);
  if (loss_trace) loss_trace->assign(1, f);

  double step = 1.0;
  int accepted = 0;
  bool converged = max_abs(g) <= config.grad_tolerance;
  while (!converged && accepted < config.max_iterations) {
    const double g_sq = dot(g, g);
    double t = step;
    double f_next = 0.0;
    bool ok = false;
    while (t >= kMinStep) {
      for (std::size_t p = 0; p < n_params; ++p) w_next[p] = w[p] - t * g[p];
      f_next = softmax_objective(data, n_classes, config.l2_strength, w_next, g_next);
      if (std::isfinite(f_next) && f_next <= f - kArmijo * t * g_sq) {
        ok = true;
        break;
      }
      t *= 0.5;
    }
    if (!ok) break;

    double s_dot_y = 0.0, s_sq = 0.0;
    for (std::size_t p = 0; p < n_params; ++p) {
      const double s = w_next[p] - w[p];
      s_dot_y += s * (g_next[p] - g[p]);
      s_sq += s * s;
    }
    step = s_dot_y > 0.0 ? std::clamp(s_sq / s_dot_y, kMinStep, kMaxStep) : std::min(2.0 * t, kMaxStep);

    w.swap(w_next);
    g.swap(g_next);
    f = f_next;
    ++accepted;
    if (loss_trace) loss_trace->push_back(f);
    converged = max_abs(g) <= config.grad_tolerance;
  }

  clf.weights = std::move(w);
  clf.converged = converged;
  clf.iterations_used = accepted;
  return clf;
}

int predict(const LinearClassifier& clf, std::span<const float> x) {
  if (x.size() != clf.dim) {
    throw ValidationError("input has dimension " + std::to_string(x.size()) + ", classifier expects " +
                          std::to_string(clf.dim));
  }
  std::vector<double> z(clf.dim);
  clf.standardizer.apply(x, z);
  const std::size_t stride = clf.dim + 1;
  int best = 0;
  double best_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < clf.n_classes; ++k) {
    const double* w = clf.weights.data() + k * stride;
    double logit = w[clf.dim];
    for (std::size_t j = 0; j < clf.dim; ++j) logit += w[j] * z[j];
    if (logit > best_logit) { // strict: ties keep the lowest id
      best_logit = logit;
      best = static_cast<int>(k);
    }
  }
  return best;
}

std::size_t count_correct(const LinearClassifier& clf, const SampleView& samples) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (predict(clf, samples.row(i)) == samples.labels[i]) ++correct;
  return correct;
}

double accuracy(const LinearClassifier& clf, const SampleView& samples) {
  if (samples.size() == 0) throw ValidationError("accuracy of an empty sample set is undefined");
  return static_cast<double>(count_correct(clf, samples)) / static_cast<double>(samples.size());
}

double gradient_check_at(const SampleView& samples, std::size_t n_classes, double l2,
                         std::span<const double> weights, double epsilon) {
  check_samples(samples, n_classes);
  std::vector<double> grad(weights.size());
  softmax_objective(samples, n_classes, l2, weights, grad);
  std::vector<double> probe(weights.begin(), weights.end());
  double worst = 0.0;
  for (std::size_t p = 0; p < weights.size(); ++p) {
    probe[p] = weights[p] + epsilon;
    const double up = softmax_objective(samples, n_classes, l2, probe, {});
    probe[p] = weights[p] - epsilon;
    const double down = softmax_objective(samples, n_classes, l2, probe, {});
    probe[p] = weights[p];
    const double numeric = (up - down) / (2.0 * epsilon);
    // Relative error with a 1e-4 floor so near-zero components are judged absolutely.
    const double scale = std::max({std::abs(numeric), std::abs(grad[p]), 1e-4});
    worst = std::max(worst, std::abs(numeric - grad[p]) / scale);
  }
  return worst;
}

double gradient_check(const SampleView& samples, std::size_t n_classes, double l2, int probe_count,
                      double epsilon, std::uint64_t seed) {
  if (probe_count < 1) throw UsageError("probe_count must be at least 1");
  if (!(epsilon > 0.0)) throw UsageError("epsilon must be positive");
  check_samples(samples, n_classes);

  Rng rng(seed);
  const std::size_t n_params = n_classes * (samples.dim + 1);
  std::vector<double> w(n_params);
  for (double& v : w) v = 0.5 * rng.normal();

  std::vector<double> grad(n_params);
  softmax_objective(samples, n_classes, l2, w, grad);
  double worst = 0.0;
  for (int i = 0; i < probe_count; ++i) {
    const auto p = static_cast<std::size_t>(rng.index(n_params));
    const double saved = w[p];
    w[p] = saved + epsilon;
    const double up = softmax_objective(samples, n_classes, l2, w, {});
    w[p] = saved - epsilon;
    const double down = softmax_objective(samples, n_classes, l2, w, {});
    w[p] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double scale = std::max({std::abs(numeric), std::abs(grad[p]), 1e-4});
    worst = std::max(worst, std::abs(numeric - grad[p]) / scale);
  }
  return worst;
}

nlohmann::json to_json(const LinearClassifier& clf) {
  nlohmann::json doc;
  doc["class_vocab"] = clf.class_vocab;
  doc["n_classes"] = clf.n_classes;
  doc["dim"] = clf.dim;
  doc["weights"] = clf.weights;
  doc["mean"] = clf.standardizer.mean;
  doc["stddev"] = clf.standardizer.stddev;
  doc["l2_strength"] = clf.l2_strength;
  doc["converged"] = clf.converged;
  doc["iterations_used"] = clf.iterations_used;
  return doc;
}

LinearClassifier classifier_from_json(const nlohmann::json& doc) {
  LinearClassifier clf;
  try {
    clf.class_vocab = doc.at("class_vocab").get<std::vector<std::string>>();
    clf.n_classes = doc.at("n_classes").get<std::size_t>();
    clf.dim = doc.at("dim").get<std::size_t>();
    clf.weights = doc.at("weights").get<std::vector<double>>();
    clf.standardizer.mean = doc.at("mean").get<std::vector<double>>();
    clf.standardizer.stddev = doc.at("stddev").get<std::vector<double>>();
    clf.l2_strength = doc.at("l2_strength").get<double>();
    clf.converged = doc.at("converged").get<bool>();
    clf.iterations_used = doc.at("iterations_used").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("classifier document: ") + e.what());
  }
  if (clf.weights.size() != clf.n_classes * (clf.dim + 1) || clf.standardizer.mean.size() != clf.dim ||
      clf.standardizer.stddev.size() != clf.dim)
    throw FormatError("classifier document: array sizes do not match n_classes and dim");
  return clf;
}

} // namespace decodewin
