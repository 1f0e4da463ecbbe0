#include "decodewin/errors.hpp"
#include "decodewin/tensorio.hpp"

#include "../support/pipeline.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

using namespace decodewin;
namespace fs = std::filesystem;

namespace {

FeatureMatrix make_matrix(std::size_t frames, std::size_t dim, double rate, std::uint64_t seed = 1) {
  FeatureMatrix m;
  m.utterance_id = "utt";
  m.frame_rate_hz = rate;
  m.frames = frames;
  m.dim = dim;
  m.encoder_tag = "hubert-L9";
  m.layer = 9;
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> nd;
  for (std::size_t i = 0; i < frames * dim; ++i) m.data.push_back(nd(gen));
  return m;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::uint32_t header_len(const std::string& bytes) {
  std::uint32_t h = 0;
  for (int i = 0; i < 4; ++i) h |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
  return h;
}

std::string format_error_of(const fs::path& p) {
  try {
    read_feature_file(p);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST_CASE("1x1 matrix round trip and file size") {
  const auto dir = testsupport::scratch_dir("tio_small");
  FeatureMatrix m = make_matrix(1, 1, 50.0);
  m.data = {0.0f};
  m.layer.reset();
  const auto p = dir / "a.fdt";
  write_feature_file(m, p);
  const std::string bytes = testsupport::slurp(p);
  CHECK(bytes.substr(0, 8) == std::string("FDT\0v001", 8));
  CHECK(bytes.size() == 12 + header_len(bytes) + 4);
  CHECK(read_feature_file(p) == m);
}

TEST_CASE("30x768 at 25 Hz payload size") {
  const auto dir = testsupport::scratch_dir("tio_big");
  const FeatureMatrix m = make_matrix(30, 768, 25.0);
  const auto p = dir / "b.fdt";
  write_feature_file(m, p);
  const std::string bytes = testsupport::slurp(p);
  CHECK(bytes.size() - 12 - header_len(bytes) == 30u * 768u * 4u);
  const FeatureMatrix back = read_feature_file(p);
  CHECK(back == m);
  CHECK(std::memcmp(back.data.data(), m.data.data(), m.data.size() * 4) == 0);
  const FeatureMatrix head = read_feature_header(p);
  CHECK(head.frames == 30);
  CHECK(head.dim == 768);
  CHECK(head.data.empty());
}

TEST_CASE("round trip property over random shapes, special values and metadata") {
  const auto dir = testsupport::scratch_dir("tio_prop");
  std::mt19937_64 gen(3);
  for (int t = 0; t < 50; ++t) {
    const std::size_t frames = 1 + gen() % 40, dim = 1 + gen() % 17;
    const double rate = std::array{25.0, 50.0, 100.0, 12.5, 33.3333}[gen() % 5];
    FeatureMatrix m = make_matrix(frames, dim, rate, gen());
    if (t % 3 == 0) m.layer.reset();
    m.data[0] = -0.0f;
    if (m.data.size() > 1) m.data[1] = std::numeric_limits<float>::denorm_min();
    if (m.data.size() > 2) m.data[2] = std::numeric_limits<float>::max();
    m.utterance_id = "u\"" + std::to_string(t) + "é";
    const auto p = dir / ("r" + std::to_string(t) + ".fdt");
    write_feature_file(m, p);
    const FeatureMatrix back = read_feature_file(p);
    REQUIRE(back.data.size() == m.data.size());
    CHECK(std::memcmp(back.data.data(), m.data.data(), m.data.size() * 4) == 0);
    CHECK(back.utterance_id == m.utterance_id);
    CHECK(back.frame_rate_hz == m.frame_rate_hz);
    CHECK(back.layer == m.layer);
  }
}

TEST_CASE("non-finite values are rejected and nothing is written") {
  const auto dir = testsupport::scratch_dir("tio_nan");
  FeatureMatrix m = make_matrix(3, 2, 50.0);
  m.data[4] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(write_feature_file(m, dir / "nan.fdt"), ValidationError);
  CHECK_FALSE(fs::exists(dir / "nan.fdt"));
  m.data[4] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(validate(m), ValidationError);
}

TEST_CASE("invariant violations") {
  FeatureMatrix m = make_matrix(2, 2, 50.0);
  m.frames = 0;
  m.data.clear();
  CHECK_THROWS_AS(validate(m), ValidationError);
  m = make_matrix(2, 2, 50.0);
  m.frame_rate_hz = 0.0;
  CHECK_THROWS_AS(validate(m), ValidationError);
  m = make_matrix(2, 2, 50.0);
  m.data.pop_back();
  CHECK_THROWS_AS(validate(m), ValidationError);
}

TEST_CASE("format errors name the failed check") {
  const auto dir = testsupport::scratch_dir("tio_fmt");
  const FeatureMatrix m = make_matrix(4, 3, 50.0);
  const auto good = dir / "good.fdt";
  write_feature_file(m, good);
  const std::string bytes = testsupport::slurp(good);
  const std::uint32_t h = header_len(bytes);

  write_bytes(dir / "trunc.fdt", bytes.substr(0, bytes.size() - 5));
  CHECK(format_error_of(dir / "trunc.fdt").find("payload truncated") != std::string::npos);

  write_bytes(dir / "long.fdt", bytes + "abcd");
  CHECK(format_error_of(dir / "long.fdt").find("payload longer") != std::string::npos);

  std::string bad = bytes;
  bad[0] = 'X';
  write_bytes(dir / "magic.fdt", bad);
  CHECK(format_error_of(dir / "magic.fdt").find("bad magic") != std::string::npos);

  write_bytes(dir / "short.fdt", bytes.substr(0, 6));
  CHECK(format_error_of(dir / "short.fdt").find("too short") != std::string::npos);

  write_bytes(dir / "header.fdt", bytes.substr(0, 12 + h / 2));
  CHECK(format_error_of(dir / "header.fdt").find("header truncated") != std::string::npos);

  std::string header = bytes.substr(12, h);
  const auto pos = header.find("\"frame_rate_hz\":50");
  REQUIRE(pos != std::string::npos);
  std::string zero_rate = header;
  zero_rate.replace(pos, 18, "\"frame_rate_hz\": 0");
  write_bytes(dir / "rate.fdt", bytes.substr(0, 12) + zero_rate + bytes.substr(12 + h));
  CHECK(format_error_of(dir / "rate.fdt").find("non-positive frame rate") != std::string::npos);

  std::string no_dim = header;
  const auto dpos = no_dim.find("\"dim\"");
  REQUIRE(dpos != std::string::npos);
  no_dim.replace(dpos, 5, "\"dix\"");
  write_bytes(dir / "key.fdt", bytes.substr(0, 12) + no_dim + bytes.substr(12 + h));
  CHECK(format_error_of(dir / "key.fdt").find("header missing key") != std::string::npos);
}

TEST_CASE("missing feature file is an I/O error naming the path") {
  try {
    read_feature_file("/nonexistent/dir/x.fdt");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/dir/x.fdt") != std::string::npos);
  }
}

TEST_CASE("alignment row parse") {
  const auto recs = parse_alignments("utterance_id\tphone\tonset_s\toffset_s\nu1\tB\t0.10\t0.18\n", "t.tsv");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0] == PhoneRecord{"u1", "B", 0.10, 0.18});
}

TEST_CASE("stress digits stripped") {
  const auto recs = parse_alignments("utterance_id\tphone\tonset_s\toffset_s\nu1\tAH1\t0\t0.1\nu1\tIY0\t0.1\t0.2\n", "t");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].phone == "AH");
  CHECK(recs[1].phone == "IY");
  CHECK(strip_stress("ER2") == "ER");
  CHECK(strip_stress("B") == "B");
}

TEST_CASE("overlap error lists the pair") {
  try {
    parse_alignments("utterance_id\tphone\tonset_s\toffset_s\nu1\tAA\t0.1\t0.2\nu1\tK\t0.15\t0.3\n", "t");
    FAIL("expected overlap error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("AA") != std::string::npos);
    CHECK(msg.find("K") != std::string::npos);
  }
}

TEST_CASE("malformed rows give line-numbered errors") {
  const std::string head = "utterance_id\tphone\tonset_s\toffset_s\n";
  const std::vector<std::string> bad_rows{"u1\tB\t0.1\n",          "u1\tB\tzero\t0.2\n", "u1\t\t0.1\t0.2\n",
                                          "u1\tB\t0.3\t0.2\n",     "u1\tB\t-0.1\t0.2\n", "\tB\t0.1\t0.2\n",
                                          "u1\tB\t0.1\t0.2\textra\n", "u1\tB\tnan\t0.2\n"};
  for (const auto& row : bad_rows) {
    CAPTURE(row);
    try {
      parse_alignments(head + "u0\tAA\t0\t0.05\n" + row, "f.tsv");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("f.tsv:3") != std::string::npos);
    }
  }
  CHECK_THROWS_AS(parse_alignments("u1\tB\t0.1\t0.2\n", "f"), FormatError);
}

TEST_CASE("alignments sorted per utterance, silences removed") {
  const auto recs = parse_alignments("utterance_id\tphone\tonset_s\toffset_s\n"
                                     "u2\tT\t0.3\t0.4\n"
                                     "u1\tsil\t0\t0.1\n"
                                     "u2\tAA\t0.1\t0.3\n"
                                     "u1\tSP\t0.1\t0.2\n"
                                     "u1\tD\t0.2\t0.3\n"
                                     "u1\tspn\t0.3\t0.4\n",
                                     "t");
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].utterance_id == "u1");
  CHECK(recs[0].phone == "D");
  CHECK(recs[1].phone == "AA");
  CHECK(recs[2].phone == "T");
  CHECK(is_silence_label("Sil"));
  CHECK_FALSE(is_silence_label("S"));
}

TEST_CASE("alignment write/read round trip") {
  const auto dir = testsupport::scratch_dir("tio_tsv");
  const std::vector<PhoneRecord> recs{{"a", "B", 0.0, 0.123456}, {"a", "AA", 0.123456, 0.5}, {"b", "K", 1.25, 1.5}};
  write_alignments(recs, dir / "x.tsv");
  CHECK(read_alignments(dir / "x.tsv") == recs);
  CHECK_THROWS_AS(read_alignments(dir / "missing.tsv"), IoError);
}
