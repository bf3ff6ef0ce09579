#include <doctest.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "attnvgg/data.hpp"
#include "attnvgg/error.hpp"
#include "attnvgg/rng.hpp"

using namespace attnvgg;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> bytes_of(const std::string& header, std::vector<unsigned char> pixels) {
  std::vector<unsigned char> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

FormatError::Kind pgm_error(const std::vector<unsigned char>& bytes) {
  try {
    parse_pgm(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("parse_pgm accepted malformed input");
  return FormatError::Kind::kMalformed;
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "attnvgg_test_data" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Oracle: quotas in millionths, then hand out the leftover one unit at a time
// to the slot with the largest remaining remainder (first slot wins ties).
SplitCounts oracle_allocation(std::size_t n) {
  const std::array<std::uint64_t, 3> parts{750000, 150000, 100000};
  std::array<std::uint64_t, 3> count{}, rem{};
  std::uint64_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    count[i] = n * parts[i] / 1000000;
    rem[i] = n * parts[i] % 1000000;
    assigned += count[i];
  }
  std::array<bool, 3> used{};
  while (assigned < n) {
    int best = -1;
    for (int i = 0; i < 3; ++i) {
      if (!used[i] && (best < 0 || rem[i] > rem[best])) best = i;
    }
    used[best] = true;
    ++count[best];
    ++assigned;
  }
  return {count[0], count[1], count[2]};
}

std::vector<std::string> make_ids(const std::string& prefix, std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

}  // namespace

TEST_CASE("P5 decode") {
  const Tensor t = parse_pgm(bytes_of("P5 2 2 255\n", {0, 255, 0, 255}));
  CHECK(t == Tensor({2, 2, 1}, std::vector<double>{0, 255, 0, 255}));
  const Tensor wide = parse_pgm(bytes_of("P5\n3 1\n200\n", {1, 2, 3}));
  CHECK(wide.shape() == Shape{1, 3, 1});
  CHECK(wide.at(0, 2, 0) == 3.0);
}

TEST_CASE("PGM header comments are tolerated") {
  const Tensor plain = parse_pgm(bytes_of("P5\n2 2\n255\n", {9, 8, 7, 6}));
  const Tensor commented = parse_pgm(bytes_of("P5\n# made by hand\n2 # width\n2\n255\n", {9, 8, 7, 6}));
  CHECK(plain == commented);
}

TEST_CASE("PGM errors are distinct") {
  CHECK(pgm_error(bytes_of("P2 2 2 255\n", {0, 1, 2, 3})) == FormatError::Kind::kBadMagic);
  CHECK(pgm_error(bytes_of("P5 2 2 65535\n", {0, 1, 2, 3, 4, 5, 6, 7})) ==
        FormatError::Kind::kUnsupportedMaxval);
  CHECK(pgm_error(bytes_of("P5 2 2 255\n", {0, 1, 2})) == FormatError::Kind::kTruncated);
  CHECK(pgm_error(bytes_of("P5 2", {})) == FormatError::Kind::kTruncated);
  CHECK(pgm_error(bytes_of("P5 0 2 255\n", {})) == FormatError::Kind::kMalformed);
  CHECK_THROWS_AS(load_pgm("/nonexistent/x.pgm"), IoError);
}

TEST_CASE("PGM write/read round trip") {
  const fs::path dir = temp_dir("pgm");
  Rng rng(1);
  Tensor t({7, 5, 1});
  for (double& v : t.data()) v = static_cast<double>(rng.uniform_index(256));
  write_pgm(t, dir / "a.pgm");
  CHECK(load_pgm(dir / "a.pgm") == t);
  std::ifstream in(dir / "a.pgm", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  CHECK(bytes.rfind("P5", 0) == 0);
  CHECK(bytes.size() == std::string("P5\n5 7\n255\n").size() + 35);
}

TEST_CASE("normalize examples") {
  CHECK(normalize(Tensor({2, 2, 1}, std::vector<double>{0, 255, 0, 255})) ==
        Tensor({2, 2, 1}, std::vector<double>{0, 1, 0, 1}));
  CHECK(normalize(Tensor::filled({3, 3, 1}, 128.0)) == Tensor({3, 3, 1}));
  CHECK(normalize(Tensor({1, 3, 1}, std::vector<double>{50, 100, 150})).at(0, 1, 0) == 0.5);
}

TEST_CASE("prepare resizes then normalizes") {
  CHECK(prepare(Tensor::filled({256, 256, 1}, 77.0), 128, 128) == Tensor({128, 128, 1}));
  Rng rng(2);
  Tensor raw({16, 16, 1});
  for (double& v : raw.data()) v = 255.0 * rng.uniform01();
  CHECK(prepare(raw, 16, 16) == normalize(raw));
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {5, 9}, {32, 12}}) {
    const Tensor p = prepare(raw, h, w);
    CHECK(p.shape() == Shape{h, w, 1});
    const double lo = *std::min_element(p.data().begin(), p.data().end());
    const double hi = *std::max_element(p.data().begin(), p.data().end());
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
  }
  const Tensor rgb = replicate_channels(prepare(raw, 4, 4), 3);
  CHECK(rgb.shape() == Shape{4, 4, 3});
  CHECK(rgb.at(1, 2, 0) == rgb.at(1, 2, 2));
}

TEST_CASE("split count examples") {
  CHECK(allocate_split_counts(100) == SplitCounts{75, 15, 10});
  CHECK(allocate_split_counts(249) == SplitCounts{187, 37, 25});
  CHECK(allocate_split_counts(190) == SplitCounts{143, 28, 19});
  CHECK(allocate_split_counts(1) == SplitCounts{1, 0, 0});
  SplitFractions bad;
  bad.test = 0.2;
  CHECK_THROWS_AS(allocate_split_counts(10, bad), ConfigError);
}

TEST_CASE("allocation matches the oracle for 200 random sizes") {
  Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t a = 1 + rng.uniform_index(2000);
    const std::size_t b = 1 + rng.uniform_index(2000);
    CHECK(allocate_split_counts(a) == oracle_allocation(a));
    CHECK(allocate_split_counts(b) == oracle_allocation(b));

    std::vector<std::string> ids = make_ids("b", a);
    const auto m = make_ids("m", b);
    ids.insert(ids.end(), m.begin(), m.end());
    std::vector<int> labels(a, kBenign);
    labels.resize(a + b, kMalignant);
    const auto split = stratified_split(ids, labels, rep);

    std::set<std::string> seen;
    SplitCounts benign, malignant;
    for (int part = 0; part < 3; ++part) {
      const auto& list = part == 0 ? split.train : part == 1 ? split.validation : split.test;
      for (const auto& id : list) {
        CHECK(seen.insert(id).second);
        SplitCounts& cls = id[0] == 'b' ? benign : malignant;
        ++(part == 0 ? cls.train : part == 1 ? cls.validation : cls.test);
      }
    }
    CHECK(seen.size() == a + b);
    CHECK(benign == oracle_allocation(a));
    CHECK(malignant == oracle_allocation(b));
  }
}

TEST_CASE("split determinism") {
  const auto samples = synth_dataset(20, 8, 1);
  const auto a = stratified_split(samples, 9);
  const auto b = stratified_split(samples, 9);
  const auto c = stratified_split(samples, 10);
  CHECK(a.train == b.train);
  CHECK(a.validation == b.validation);
  CHECK(a.test == b.test);
  CHECK(split_manifest_json(a) == split_manifest_json(b));
  CHECK(a.train != c.train);
  CHECK(a.train.size() == c.train.size());
  CHECK(a.test.size() == c.test.size());
}

TEST_CASE("split rejects empty classes and bad input") {
  const std::vector<std::string> ids{"a", "b"};
  const std::vector<int> same{kBenign, kBenign};
  CHECK_THROWS_AS(stratified_split(ids, same, 1), ConfigError);
  const std::vector<std::string> dup{"a", "a"};
  const std::vector<int> both{kBenign, kMalignant};
  CHECK_THROWS_AS(stratified_split(dup, both, 1), ConfigError);
}

TEST_CASE("manifest round trip") {
  const auto split = stratified_split(synth_dataset(10, 8, 2), 4);
  const std::string json = split_manifest_json(split);
  const auto back = parse_split_manifest(json);
  CHECK(back.seed == 4);
  CHECK(back.train == split.train);
  CHECK(back.validation == split.validation);
  CHECK(back.test == split.test);
  CHECK(back.fractions.train == 0.75);
  CHECK(json.find("\"validation\"") != std::string::npos);

  const fs::path dir = temp_dir("manifest");
  write_split_manifest(split, dir / "split.json");
  CHECK(read_split_manifest(dir / "split.json").test == split.test);
  CHECK_THROWS_AS(parse_split_manifest("{\"seed\": 1}"), FormatError);
  CHECK_THROWS_AS(parse_split_manifest("not json"), FormatError);
}

TEST_CASE("synthetic data contract") {
  const auto samples = synth_dataset(32, 32, 5);
  REQUIRE(samples.size() == 64);
  std::size_t benign = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    CHECK(s.image.shape() == Shape{32, 32, 1});
    for (double v : s.image.data()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(s.label == (i < 32 ? kBenign : kMalignant));
    benign += s.label == kBenign;
  }
  CHECK(benign == 32);
  CHECK(samples[0].id == "synth_benign_000");
  CHECK(samples[32].id == "synth_malignant_000");

  const auto again = synth_dataset(32, 32, 5);
  for (std::size_t i = 0; i < samples.size(); ++i) CHECK(samples[i].image == again[i].image);
  CHECK(synth_dataset(32, 32, 6)[0].image != samples[0].image);
  CHECK_THROWS_AS(synth_dataset(0, 32, 1), ConfigError);
  CHECK_THROWS_AS(synth_dataset(4, 7, 1), ConfigError);
}

TEST_CASE("synthetic classes separate on mean intensity") {
  const auto samples = synth_dataset(100, 32, 7);
  std::vector<std::pair<double, int>> means;
  double mean_b = 0.0, mean_m = 0.0;
  for (const auto& s : samples) {
    double m = 0.0;
    for (double v : s.image.data()) m += v;
    m /= static_cast<double>(s.image.size());
    means.emplace_back(m, s.label);
    (s.label == kBenign ? mean_b : mean_m) += m / 100.0;
  }
  CHECK(mean_b > mean_m);

  // Best single threshold, benign above it.
  std::sort(means.begin(), means.end());
  std::size_t best = 0;
  for (std::size_t cut = 0; cut <= means.size(); ++cut) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < means.size(); ++i) {
      correct += (i < cut) == (means[i].second == kMalignant);
    }
    best = std::max(best, correct);
  }
  const double accuracy = static_cast<double>(best) / static_cast<double>(means.size());
  MESSAGE("mean-intensity threshold accuracy: " << accuracy);
  CHECK(accuracy >= 0.8);
}

TEST_CASE("labels CSV parsing") {
  const auto recs = parse_labels_csv("a.pgm,benign\nb.pgm,malignant\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].filename == "a.pgm");
  CHECK(recs[0].label == kBenign);
  CHECK(recs[1].label == kMalignant);
  CHECK(recs[1].line == 2);

  const auto with_header = parse_labels_csv("filename,label\r\nc.pgm,Malignant\r\n\n");
  REQUIRE(with_header.size() == 1);
  CHECK(with_header[0].label == kMalignant);
  CHECK(with_header[0].line == 2);

  try {
    parse_labels_csv("a.pgm,benign\nb.pgm,cyst\n", "labels.csv");
    FAIL("expected a label error");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::kBadLabel);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  try {
    parse_labels_csv("a.pgm,benign\na.pgm,malignant\n");
    FAIL("expected a duplicate error");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::kDuplicateEntry);
  }
  CHECK_THROWS_AS(parse_labels_csv("just_a_name\n"), FormatError);
  CHECK_THROWS_AS(load_labels_csv("/nonexistent/labels.csv"), IoError);
}

TEST_CASE("dataset directory round trip") {
  const fs::path dir = temp_dir("dataset");
  const auto samples = synth_dataset(3, 16, 8);
  write_dataset(samples, dir);
  CHECK(fs::exists(dir / "labels.csv"));
  const auto loaded = load_dataset(dir, dir / "labels.csv", 16, 16, 1);
  REQUIRE(loaded.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded[i].label == samples[i].label);
    CHECK(loaded[i].id.find(samples[i].id) == 0);
    CHECK(loaded[i].image.shape() == Shape{16, 16, 1});
  }
  const auto rgb = load_dataset(dir, dir / "labels.csv", 8, 8, 3);
  CHECK(rgb[0].image.shape() == Shape{8, 8, 3});

  std::ofstream(dir / "labels.csv", std::ios::app) << "ghost.pgm,benign\n";
  try {
    load_dataset(dir, dir / "labels.csv", 16, 16, 1);
    FAIL("expected a missing-image error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("ghost.pgm") != std::string::npos);
  }
}
