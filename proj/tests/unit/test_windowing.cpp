#include "decodewin/errors.hpp"
#include "decodewin/windowing.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

using namespace decodewin;

namespace {

// frame f of utterance carries value f in every dim
FeatureMatrix ramp(const std::string& id, std::size_t frames, double rate = 50.0, std::size_t dim = 2) {
  FeatureMatrix m;
  m.utterance_id = id;
  m.frame_rate_hz = rate;
  m.frames = frames;
  m.dim = dim;
  m.encoder_tag = "ramp";
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t d = 0; d < dim; ++d) m.data.push_back(static_cast<float>(f));
  return m;
}

std::vector<PhoneRecord> tiled(const std::string& id, int n, double step_s, const std::vector<std::string>& labels) {
  std::vector<PhoneRecord> out;
  for (int i = 0; i < n; ++i)
    out.push_back({id, labels[static_cast<std::size_t>(i) % labels.size()], i * step_s, (i + 1) * step_s});
  return out;
}

} // namespace

TEST_CASE("offset-count law") {
  CHECK(WindowSpec{1200, 25}.n_offsets() == 30);
  CHECK(WindowSpec{1200, 50}.n_offsets() == 60);
  CHECK(WindowSpec{1200, 50}.first_offset() == -30);
  CHECK(WindowSpec{1200, 50}.last_offset() == 29);
  CHECK(WindowSpec{1200, 25}.first_offset() == -15);
  CHECK(WindowSpec{1200, 25}.last_offset() == 14);
  CHECK(WindowSpec{100, 50}.n_offsets() == 5);
  CHECK(WindowSpec{100, 50}.first_offset() == -2);
  CHECK(WindowSpec{100, 50}.last_offset() == 2);
  CHECK(WindowSpec{1200, 50}.offset_ms(-30) == -600.0);
}

TEST_CASE("frame_of is floor of t*rate") {
  CHECK(frame_of(1.0, 50) == 50);
  CHECK(frame_of(0.999, 50) == 49);
  CHECK(frame_of(0.0, 25) == 0);
  CHECK(frame_of(0.58, 50) == 29); // 0.58*50 = 28.999999999999996
}

TEST_CASE("single phone fully inside: 60 samples") {
  const std::vector<FeatureMatrix> f{ramp("u", 100)};
  const std::vector<PhoneRecord> p{{"u", "AA", 1.0, 1.1}};
  const auto ds = build_offset_dataset(f, p, WindowSpec{1200, 50});
  CHECK(ds.offsets.size() == 60);
  CHECK(ds.total_samples() == 60);
  for (int j = -30; j <= 29; ++j) {
    REQUIRE(ds.at(j).size() == 1);
    CHECK(ds.at(j).features[0] == static_cast<float>(50 + j));
  }
}

TEST_CASE("onset at 0 only feeds non-negative offsets") {
  const std::vector<FeatureMatrix> f{ramp("u", 100)};
  const std::vector<PhoneRecord> p{{"u", "AA", 0.0, 0.1}};
  const auto ds = build_offset_dataset(f, p, WindowSpec{1200, 50});
  for (int j = -30; j <= 29; ++j) CHECK(ds.at(j).size() == (j >= 0 ? 1u : 0u));
}

TEST_CASE("sample conservation and shared vocabulary") {
  std::vector<FeatureMatrix> f{ramp("a", 40), ramp("b", 75)};
  auto p = tiled("a", 8, 0.1, {"T", "AA", "B"});
  const auto pb = tiled("b", 15, 0.1, {"IY", "T"});
  p.insert(p.end(), pb.begin(), pb.end());
  const WindowSpec spec{600, 50};
  const auto ds = build_offset_dataset(f, p, spec);
  CHECK(ds.class_vocab == std::vector<std::string>{"AA", "B", "IY", "T"});
  std::size_t expected = 0;
  for (const auto& inst : ds.instances) {
    const auto frames = inst.utterance_id == "a" ? 40 : 75;
    const auto k = frame_of(inst.onset_s, 50);
    for (int j = spec.first_offset(); j <= spec.last_offset(); ++j)
      if (k + j >= 0 && k + j < frames) ++expected;
  }
  CHECK(ds.total_samples() == expected);
  const auto counts = ds.sample_counts();
  CHECK(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == expected);
  for (const auto& o : ds.offsets)
    for (int l : o.labels) CHECK((l >= 0 && l < 4));
}

TEST_CASE("dataset errors") {
  const std::vector<FeatureMatrix> f{ramp("a", 40)};
  std::vector<PhoneRecord> p{{"zz", "AA", 0.1, 0.2}};
  try {
    build_offset_dataset(f, p, WindowSpec{400, 50});
    FAIL("expected missing utterance error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("zz") != std::string::npos);
  }
  p = {{"a", "AA", 0.1, 0.2}};
  CHECK_THROWS_AS(build_offset_dataset(f, p, WindowSpec{400, 25}), ValidationError);
  const std::vector<FeatureMatrix> mixed{ramp("a", 40), ramp("b", 40, 50.0, 3)};
  CHECK_THROWS_AS(build_offset_dataset(mixed, p, WindowSpec{400, 50}), ValidationError);
  const std::vector<FeatureMatrix> dup{ramp("a", 40), ramp("a", 40)};
  CHECK_THROWS_AS(build_offset_dataset(dup, p, WindowSpec{400, 50}), ValidationError);
}

TEST_CASE("phone subsets") {
  const std::vector<PhoneRecord> recs{{"u", "B", 0, 0.1}, {"u", "AH", 0.1, 0.2}, {"u", "T", 0.2, 0.3}, {"u", "IY", 0.3, 0.4}};
  const auto plosive = filter_phones(recs, PhoneSubset::plosive());
  REQUIRE(plosive.size() == 2);
  CHECK(plosive[0].phone == "B");
  CHECK(plosive[1].phone == "T");
  CHECK(filter_phones(recs, PhoneSubset::all()) == recs);
  CHECK_THROWS_AS(filter_phones(recs, PhoneSubset::explicit_list({"ZZ"})), ValidationError);
  CHECK(plosive_labels() == std::set<std::string>{"P", "B", "T", "D", "K", "G"});
  CHECK(PhoneSubset::parse("plosive").kind == PhoneSubset::Kind::Plosive);
  CHECK(PhoneSubset::parse("all").kind == PhoneSubset::Kind::All);
  const auto ex = PhoneSubset::parse("AH,IY");
  CHECK(ex.contains("AH"));
  CHECK_FALSE(ex.contains("B"));
  CHECK_THROWS(PhoneSubset::parse(""));
}

TEST_CASE("dataset filter recomputes vocabulary") {
  const std::vector<FeatureMatrix> f{ramp("u", 60)};
  const auto p = tiled("u", 10, 0.1, {"AA", "B", "K", "IY"});
  const auto ds = build_offset_dataset(f, p, WindowSpec{200, 50});
  const auto only = filter_phones(ds, PhoneSubset::plosive());
  CHECK(only.class_vocab == std::vector<std::string>{"B", "K"});
  for (const auto& o : only.offsets)
    for (std::size_t r = 0; r < o.size(); ++r)
      CHECK(only.class_vocab[static_cast<std::size_t>(o.labels[r])] == only.instances[o.instances[r]].phone);
  CHECK_THROWS_AS(filter_phones(ds, PhoneSubset::explicit_list({"ZZ"})), ValidationError);
}

TEST_CASE("folds: balance, determinism, errors") {
  const std::vector<std::string> six{"a", "b", "c", "d", "e", "f"};
  const auto plan = make_folds(six, 3, 42);
  std::vector<int> sizes(3, 0);
  for (const auto& [id, fold] : plan.assignment) sizes[static_cast<std::size_t>(fold)]++;
  CHECK(sizes == std::vector<int>{2, 2, 2});
  CHECK(make_folds(six, 3, 42).assignment == plan.assignment);
  std::vector<std::string> shuffled{"f", "c", "a", "e", "b", "d"};
  CHECK(make_folds(shuffled, 3, 42).assignment == plan.assignment);
  const std::vector<std::string> two{"a", "b"};
  CHECK_THROWS(make_folds(two, 3, 1));
  CHECK_THROWS(make_folds(six, 1, 1));

  std::vector<std::string> many;
  for (int i = 0; i < 17; ++i) many.push_back("u" + std::to_string(i));
  const auto p5 = make_folds(many, 5, 9);
  std::vector<int> s5(5, 0);
  for (const auto& [id, fold] : p5.assignment) s5[static_cast<std::size_t>(fold)]++;
  CHECK(*std::max_element(s5.begin(), s5.end()) - *std::min_element(s5.begin(), s5.end()) <= 1);
}

TEST_CASE("subsample by instance") {
  std::vector<FeatureMatrix> f{ramp("u", 800)};
  const auto p = tiled("u", 150, 0.1, {"AA", "B", "K"});
  const auto ds = build_offset_dataset(f, p, WindowSpec{200, 50});
  const auto same = subsample(ds, 1.0, 3);
  CHECK(same.instances.size() == ds.instances.size());
  CHECK(same.total_samples() == ds.total_samples());

  const auto sub = subsample(ds, 1.0 / 15.0, 3);
  CHECK(sub.instances.size() == 10);
  CHECK(sub.class_vocab == ds.class_vocab);
  // each kept instance appears at every in-bounds offset
  std::vector<int> per_instance(sub.instances.size(), 0);
  for (const auto& o : sub.offsets)
    for (std::size_t i : o.instances) per_instance[i]++;
  for (std::size_t i = 0; i < sub.instances.size(); ++i) {
    const auto k = frame_of(sub.instances[i].onset_s, 50);
    int expected = 0;
    for (int j = -5; j <= 4; ++j) expected += (k + j >= 0 && k + j < 800) ? 1 : 0;
    CHECK(per_instance[i] == expected);
  }
  const auto again = subsample(ds, 1.0 / 15.0, 3);
  for (std::size_t i = 0; i < sub.instances.size(); ++i) CHECK(again.instances[i].onset_s == sub.instances[i].onset_s);
  CHECK_THROWS(subsample(ds, 0.0, 1));
  CHECK_THROWS(subsample(ds, 1.5, 1));
}

TEST_CASE("shift_onsets") {
  const std::vector<PhoneRecord> recs{{"u", "AA", 0.10, 0.2}, {"u", "B", 0.01, 0.05}};
  const auto zero = shift_onsets(recs, 0.0);
  CHECK(zero.records == recs);
  CHECK(zero.dropped == 0);
  const auto back = shift_onsets(recs, -20.0);
  REQUIRE(back.records.size() == 1);
  CHECK(back.records[0].onset_s == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(back.records[0].offset_s == doctest::Approx(0.18).epsilon(1e-12));
  CHECK(back.dropped == 1);
}
