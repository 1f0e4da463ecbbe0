#include "decodewin/windowing.hpp"

#include "decodewin/errors.hpp"
#include "decodewin/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace decodewin {

namespace {

constexpr std::size_t kDropped = SIZE_MAX;

// Copies every row whose instance survives (new_index != kDropped) into `out`,
// taking the label from the surviving instance.
void copy_rows(const OffsetDataset& in, std::span<const std::size_t> new_index, OffsetDataset& out) {
  out.offsets.assign(in.offsets.size(), {});
  const auto dim = static_cast<std::ptrdiff_t>(in.dim);
  for (std::size_t o = 0; o < in.offsets.size(); ++o) {
    const auto& src = in.offsets[o];
    auto& dst = out.offsets[o];
    for (std::size_t r = 0; r < src.size(); ++r) {
      const std::size_t ni = new_index[src.instances[r]];
      if (ni == kDropped) continue;
      const auto begin = src.features.begin() + static_cast<std::ptrdiff_t>(r) * dim;
      dst.features.insert(dst.features.end(), begin, begin + dim);
      dst.labels.push_back(out.instances[ni].class_id);
      dst.instances.push_back(ni);
    }
  }
}

} // namespace

int WindowSpec::n_offsets() const {
  if (!(window_ms > 0.0) || !(frame_rate_hz > 0.0))
    throw UsageError("window_ms and frame_rate_hz must be positive");
  const auto n = std::lround(window_ms * frame_rate_hz / 1000.0);
  if (n < 1) throw UsageError("window covers no frames at this frame rate");
  return static_cast<int>(n);
}

int WindowSpec::first_offset() const { return -(n_offsets() / 2); }

int WindowSpec::last_offset() const { return n_offsets() - 1 - n_offsets() / 2; }

std::int64_t frame_of(double t_s, double frame_rate_hz) {
  return static_cast<std::int64_t>(std::floor(t_s * frame_rate_hz + 1e-6));
}

std::vector<std::size_t> OffsetDataset::sample_counts() const {
  std::vector<std::size_t> counts;
  counts.reserve(offsets.size());
  for (const auto& o : offsets) counts.push_back(o.size());
  return counts;
}

std::size_t OffsetDataset::total_samples() const {
  std::size_t total = 0;
  for (const auto& o : offsets) total += o.size();
  return total;
}

OffsetDataset build_offset_dataset(std::span<const FeatureMatrix> features,
                                   std::span<const PhoneRecord> phones, const WindowSpec& spec) {
  const int first = spec.first_offset();
  const int n = spec.n_offsets();

  std::unordered_map<std::string, const FeatureMatrix*> by_id;
  std::size_t dim = 0;
  for (const auto& m : features) {
    if (std::abs(m.frame_rate_hz - spec.frame_rate_hz) > 1e-9 * spec.frame_rate_hz) {
      std::ostringstream msg;
      msg << "frame rate mismatch: utterance '" << m.utterance_id << "' has " << m.frame_rate_hz
          << " Hz, window expects " << spec.frame_rate_hz << " Hz";
      throw ValidationError(msg.str());
    }
    if (dim == 0) dim = m.dim;
    if (m.dim != dim) {
      throw ValidationError("dimension mismatch: utterance '" + m.utterance_id + "' has " +
                            std::to_string(m.dim) + " dims, expected " + std::to_string(dim));
    }
    if (!by_id.emplace(m.utterance_id, &m).second)
      throw ValidationError("duplicate feature matrix for utterance '" + m.utterance_id + "'");
  }

  OffsetDataset ds;
  ds.spec = spec;
  ds.dim = dim;

  std::set<std::string> labels;
  for (const auto& p : phones) {
    if (!by_id.contains(p.utterance_id))
      throw ValidationError("no feature matrix for utterance '" + p.utterance_id + "'");
    labels.insert(p.phone);
  }
  ds.class_vocab.assign(labels.begin(), labels.end());
  std::unordered_map<std::string, int> class_of;
  for (std::size_t c = 0; c < ds.class_vocab.size(); ++c)
    class_of.emplace(ds.class_vocab[c], static_cast<int>(c));

  ds.offsets.resize(static_cast<std::size_t>(n));
  for (const auto& p : phones) {
    const FeatureMatrix& m = *by_id.at(p.utterance_id);
    const std::size_t inst = ds.instances.size();
    const int cls = class_of.at(p.phone);
    ds.instances.push_back({p.utterance_id, p.phone, p.onset_s, cls});

    const std::int64_t k0 = frame_of(p.onset_s, spec.frame_rate_hz);
    for (int idx = 0; idx < n; ++idx) {
      const std::int64_t k = k0 + first + idx;
      if (k < 0 || k >= static_cast<std::int64_t>(m.frames)) continue;
      auto& slot = ds.offsets[static_cast<std::size_t>(idx)];
      const auto row = m.row(static_cast<std::size_t>(k));
      slot.features.insert(slot.features.end(), row.begin(), row.end());
      slot.labels.push_back(cls);
      slot.instances.push_back(inst);
    }
  }
  return ds;
}

const std::set<std::string>& plosive_labels() {
  static const std::set<std::string> labels = {"P", "B", "T", "D", "K", "G"};
  return labels;
}

PhoneSubset PhoneSubset::parse(std::string_view text) {
  if (text == "all") return all();
  if (text == "plosive") return plosive();
  std::set<std::string> labels;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    auto item = text.substr(start, comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) labels.insert(strip_stress(item));
    start = comma + 1;
  }
  if (labels.empty()) throw UsageError("phone subset '" + std::string(text) + "' names no labels");
  return explicit_list(std::move(labels));
}

bool PhoneSubset::contains(const std::string& label) const {
  switch (kind) {
  case Kind::All: return true;
  case Kind::Plosive: return plosive_labels().contains(label);
  case Kind::Explicit: return labels.contains(label);
  }
  return false;
}

std::string PhoneSubset::name() const {
  switch (kind) {
  case Kind::All: return "all";
  case Kind::Plosive: return "plosive";
  case Kind::Explicit: break;
  }
  std::string out;
  for (const auto& l : labels) {
    if (!out.empty()) out += ',';
    out += l;
  }
  return out;
}

std::vector<PhoneRecord> filter_phones(std::span<const PhoneRecord> records,
                                       const PhoneSubset& subset) {
  std::vector<PhoneRecord> out;
  for (const auto& r : records)
    if (subset.contains(r.phone)) out.push_back(r);
  if (out.empty()) throw ValidationError("phone subset '" + subset.name() + "' selects no records");
  return out;
}

OffsetDataset filter_phones(const OffsetDataset& dataset, const PhoneSubset& subset) {
  if (subset.kind == PhoneSubset::Kind::All) return dataset;

  // Vocabulary is recomputed from the surviving labels; class ids are remapped.
  std::vector<int> remap(dataset.class_vocab.size(), -1);
  OffsetDataset out;
  out.spec = dataset.spec;
  out.dim = dataset.dim;
  std::set<int> present;
  for (const auto& inst : dataset.instances)
    if (subset.contains(inst.phone)) present.insert(inst.class_id);
  if (present.empty())
    throw ValidationError("phone subset '" + subset.name() + "' selects no samples");
  for (int c : present) {
    remap[static_cast<std::size_t>(c)] = static_cast<int>(out.class_vocab.size());
    out.class_vocab.push_back(dataset.class_vocab[static_cast<std::size_t>(c)]);
  }

  std::vector<std::size_t> new_index(dataset.instances.size(), kDropped);
  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    const auto& inst = dataset.instances[i];
    if (remap[static_cast<std::size_t>(inst.class_id)] < 0) continue;
    new_index[i] = out.instances.size();
    auto copy = inst;
    copy.class_id = remap[static_cast<std::size_t>(inst.class_id)];
    out.instances.push_back(std::move(copy));
  }

  copy_rows(dataset, new_index, out);
  return out;
}

FoldPlan make_folds(std::span<const std::string> utterance_ids, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw UsageError("n_folds must be at least 2");
  std::vector<std::string> ids(utterance_ids.begin(), utterance_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < static_cast<std::size_t>(n_folds)) {
    throw UsageError("cannot split " + std::to_string(ids.size()) + " utterances into " +
                     std::to_string(n_folds) + " folds");
  }

  Rng rng(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.index(i + 1));
    std::swap(ids[i], ids[j]);
  }

  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.seed = seed;
  for (std::size_t p = 0; p < ids.size(); ++p)
    plan.assignment.emplace(ids[p], static_cast<int>(p % static_cast<std::size_t>(n_folds)));
  return plan;
}

OffsetDataset subsample(const OffsetDataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) throw UsageError("sample fraction must lie in (0, 1]");
  const std::size_t total = dataset.instances.size();
  if (fraction == 1.0 || total == 0) return dataset;

  auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  keep = std::clamp<std::size_t>(keep, 1, total);

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.index(total - i));
    std::swap(order[i], order[j]);
  }
  order.resize(keep);
  std::sort(order.begin(), order.end());

  std::vector<std::size_t> new_index(total, kDropped);
  OffsetDataset out;
  out.spec = dataset.spec;
  out.dim = dataset.dim;
  out.class_vocab = dataset.class_vocab;
  for (std::size_t i : order) {
    new_index[i] = out.instances.size();
    out.instances.push_back(dataset.instances[i]);
  }

  copy_rows(dataset, new_index, out);
  return out;
}

ShiftResult shift_onsets(std::span<const PhoneRecord> phones, double delta_ms) {
  ShiftResult result;
  const double delta_s = delta_ms / 1000.0;
  for (const auto& p : phones) {
    if (delta_ms == 0.0) {
      result.records.push_back(p);
      continue;
    }
    PhoneRecord shifted = p;
    shifted.onset_s += delta_s;
    shifted.offset_s += delta_s;
    if (shifted.onset_s < 0.0) {
      ++result.dropped;
      continue;
    }
    result.records.push_back(std::move(shifted));
  }
  return result;
}

} // namespace decodewin
