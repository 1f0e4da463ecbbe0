#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace oracle {
namespace {

// class at time t, last phone persists past the end, -1 before zero
int class_at(const Utterance& u, double t) {
  if (t < 0.0) return -1;
  int cls = -1;
  for (const Phone& p : u.phones) {
    if (p.onset_s <= t) cls = p.cls;
    else break;
  }
  return cls;
}

long long onset_frame(double t, double rate) { return static_cast<long long>(std::floor(t * rate + 1e-6)); }

} // namespace

MatchCurve label_match_curve(const std::vector<Utterance>& utts, const Layout& L) {
  const double rate = L.out_rate_hz();
  const long long n = std::llround(L.window_ms * rate / 1000.0);
  const long long first = -(n / 2);
  const std::size_t slots = static_cast<std::size_t>(L.stack) + (L.video_lead_ms ? 1 : 0);

  MatchCurve c;
  std::vector<std::vector<double>> hits(static_cast<std::size_t>(n), std::vector<double>(slots, 0.0));
  c.count.assign(static_cast<std::size_t>(n), 0);
  for (const Utterance& u : utts) {
    for (const Phone& p : u.phones) {
      const long long k = onset_frame(p.onset_s, rate);
      for (long long j = 0; j < n; ++j) {
        const long long f = k + first + j;
        if (f < 0 || f >= static_cast<long long>(u.out_frames)) continue;
        c.count[j]++;
        for (int m = 0; m < L.stack; ++m) {
          const double t = static_cast<double>(f * L.stack + m) / L.base_rate_hz - L.audio_delay_ms / 1000.0;
          if (class_at(u, t) == p.cls) hits[j][m] += 1.0;
        }
        if (L.video_lead_ms) {
          const double t = (static_cast<double>(f) + 0.5) / L.video_rate_hz + *L.video_lead_ms / 1000.0;
          if (class_at(u, t) == p.cls) hits[j][slots - 1] += 1.0;
        }
      }
    }
  }
  for (long long j = 0; j < n; ++j) {
    c.offsets_ms.push_back(static_cast<double>(first + j) * 1000.0 / rate);
    std::vector<double> rates(slots, 0.0);
    if (c.count[j] > 0)
      for (std::size_t s = 0; s < slots; ++s) rates[s] = hits[j][s] / static_cast<double>(c.count[j]);
    c.score.push_back(*std::max_element(rates.begin(), rates.end()));
    c.slot_rate.push_back(std::move(rates));
  }
  return c;
}

std::vector<double> argmax_offsets(const MatchCurve& c, double tol) {
  const double best = *std::max_element(c.score.begin(), c.score.end());
  std::vector<double> out;
  for (std::size_t j = 0; j < c.score.size(); ++j)
    if (c.score[j] >= best - tol) out.push_back(c.offsets_ms[j]);
  return out;
}

double stacking_advance_ms(double base_rate_hz, int stack, std::size_t n_phases, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> phase(0.0, 10.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < n_phases; ++i) {
    const double onset = phase(gen);
    const auto base = static_cast<long long>(std::floor(onset * base_rate_hz));
    const long long out = base / stack;
    const double stamp = static_cast<double>(out * stack) / base_rate_hz;
    sum += (onset - stamp) * 1000.0;
  }
  return sum / static_cast<double>(n_phases);
}

long double softmax_loss(const std::vector<double>& x, const std::vector<int>& y, std::size_t d, std::size_t k,
                         double l2, const std::vector<double>& w) {
  const std::size_t n = y.size();
  long double total = 0.0L;
  std::vector<long double> z(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      long double s = w[c * (d + 1) + d];
      for (std::size_t j = 0; j < d; ++j) s += static_cast<long double>(w[c * (d + 1) + j]) * x[i * d + j];
      z[c] = s;
    }
    const long double mx = *std::max_element(z.begin(), z.end());
    long double lse = 0.0L;
    for (long double v : z) lse += std::exp(v - mx);
    total += std::log(lse) + mx - z[static_cast<std::size_t>(y[i])];
  }
  long double reg = 0.0L;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < d; ++j) reg += static_cast<long double>(w[c * (d + 1) + j]) * w[c * (d + 1) + j];
  return total / static_cast<long double>(n) + 0.5L * l2 * reg;
}

std::vector<double> numeric_gradient(const std::vector<double>& x, const std::vector<int>& y, std::size_t d,
                                     std::size_t k, double l2, const std::vector<double>& w, double eps) {
  std::vector<double> g(w.size());
  std::vector<double> probe = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    probe[i] = w[i] + eps;
    const long double up = softmax_loss(x, y, d, k, l2, probe);
    probe[i] = w[i] - eps;
    const long double down = softmax_loss(x, y, d, k, l2, probe);
    probe[i] = w[i];
    g[i] = static_cast<double>((up - down) / (2.0L * eps));
  }
  return g;
}

} // namespace oracle
