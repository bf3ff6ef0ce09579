#include "attnvgg/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "attnvgg/error.hpp"
#include "attnvgg/rng.hpp"

namespace attnvgg {

std::string_view label_name(int label) { return label == kMalignant ? "malignant" : "benign"; }

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

Tensor parse_pgm(std::span<const unsigned char> bytes, std::string_view source) {
  const std::string src(source);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError(FormatError::Kind::kBadMagic, src + ": not a binary PGM (expected P5 magic)");
  }
  std::size_t pos = 2;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space_and_comments();
    if (pos >= bytes.size()) {
      throw FormatError(FormatError::Kind::kTruncated,
                        src + ": PGM header ends before the " + std::string(what));
    }
    if (!std::isdigit(bytes[pos])) {
      throw FormatError(FormatError::Kind::kMalformed,
                        src + ": PGM header is missing the " + std::string(what));
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) {
        throw FormatError(FormatError::Kind::kMalformed, src + ": PGM " + what + " is too large");
      }
      ++pos;
    }
    return v;
  };

  const std::size_t width = read_int("width");
  const std::size_t height = read_int("height");
  const std::size_t maxval = read_int("maxval");
  if (width == 0 || height == 0) {
    throw FormatError(FormatError::Kind::kMalformed, src + ": PGM extents must be positive");
  }
  if (maxval == 0 || maxval > 255) {
    throw FormatError(FormatError::Kind::kUnsupportedMaxval,
                      src + ": PGM maxval " + std::to_string(maxval) +
                          " unsupported (only 8-bit, maxval <= 255)");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FormatError(FormatError::Kind::kTruncated, src + ": PGM header not terminated");
  }
  ++pos;  // exactly one whitespace byte before the raster

  const std::size_t n = width * height;
  if (bytes.size() - pos < n) {
    throw FormatError(FormatError::Kind::kTruncated,
                      src + ": PGM pixel data truncated (" + std::to_string(bytes.size() - pos) +
                          " of " + std::to_string(n) + " bytes)");
  }
  Tensor image({height, width, 1});
  for (std::size_t i = 0; i < n; ++i) image[i] = static_cast<double>(bytes[pos + i]);
  return image;
}

Tensor load_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_pgm(bytes, path.string());
}

void write_pgm(const Tensor& image, const std::filesystem::path& path) {
  if (image.rank() != 3 || image.extent(2) != 1) {
    throw ShapeError("write_pgm expects HxWx1, got " + shape_to_string(image.shape()));
  }
  std::ostringstream os;
  os << "P5\n" << image.extent(1) << ' ' << image.extent(0) << "\n255\n";
  std::string data = os.str();
  for (double v : image.data()) {
    data.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0)))));
  }
  write_text(path, data);
}

Tensor normalize(const Tensor& raw) {
  const auto [lo, hi] = std::minmax_element(raw.data().begin(), raw.data().end());
  const double min = *lo, max = *hi;
  Tensor out(raw.shape());
  if (max == min) return out;
  const double range = max - min;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - min) / range;
  return out;
}

Tensor prepare(const Tensor& raw, std::size_t target_h, std::size_t target_w) {
  return normalize(bilinear_resize(raw, target_h, target_w));
}

Tensor replicate_channels(const Tensor& image, std::size_t channels) {
  if (image.rank() != 3 || image.extent(2) != 1) {
    throw ShapeError("replicate_channels expects HxWx1, got " + shape_to_string(image.shape()));
  }
  if (channels == 1) return image;
  const std::size_t hw = image.extent(0) * image.extent(1);
  Tensor out({image.extent(0), image.extent(1), channels});
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < channels; ++c) out[p * channels + c] = image[p];
  }
  return out;
}

SplitCounts allocate_split_counts(std::size_t n, const SplitFractions& fractions) {
  constexpr std::uint64_t kDen = 1'000'000;
  const double parts[3] = {fractions.train, fractions.validation, fractions.test};
  std::uint64_t num[3];
  for (int i = 0; i < 3; ++i) {
    if (!(parts[i] >= 0.0)) throw ConfigError("split fractions must be non-negative");
    num[i] = static_cast<std::uint64_t>(std::llround(parts[i] * kDen));
  }
  if (num[0] + num[1] + num[2] != kDen) throw ConfigError("split fractions must sum to 1");

  std::size_t counts[3];
  std::uint64_t rem[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const std::uint64_t quota = static_cast<std::uint64_t>(n) * num[i];
    counts[i] = static_cast<std::size_t>(quota / kDen);
    rem[i] = quota % kDen;
    assigned += counts[i];
  }
  int order[3] = {0, 1, 2};
  std::stable_sort(order, order + 3, [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k]];
  return {counts[0], counts[1], counts[2]};
}

DatasetSplit stratified_split(std::span<const std::string> ids, std::span<const int> labels,
                              std::uint64_t seed, const SplitFractions& fractions) {
  if (ids.size() != labels.size()) throw ShapeError("stratified_split: ids/labels length differ");
  std::set<std::string> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size()) throw ConfigError("stratified_split: duplicate sample ids");

  DatasetSplit split;
  split.seed = seed;
  split.fractions = fractions;
  Rng rng(seed);
  for (int cls : {kBenign, kMalignant}) {
    std::vector<std::string> members;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (labels[i] == cls) members.push_back(ids[i]);
    }
    if (members.empty()) {
      throw ConfigError("stratified_split: class '" + std::string(label_name(cls)) +
                        "' has no samples");
    }
    rng.shuffle(std::span<std::string>(members));
    const SplitCounts c = allocate_split_counts(members.size(), fractions);
    auto it = members.begin();
    split.train.insert(split.train.end(), it, it + static_cast<std::ptrdiff_t>(c.train));
    it += static_cast<std::ptrdiff_t>(c.train);
    split.validation.insert(split.validation.end(), it,
                            it + static_cast<std::ptrdiff_t>(c.validation));
    it += static_cast<std::ptrdiff_t>(c.validation);
    split.test.insert(split.test.end(), it, members.end());
  }
  return split;
}

DatasetSplit stratified_split(std::span<const Sample> samples, std::uint64_t seed,
                              const SplitFractions& fractions) {
  std::vector<std::string> ids;
  std::vector<int> labels;
  for (const auto& s : samples) {
    ids.push_back(s.id);
    labels.push_back(s.label);
  }
  return stratified_split(ids, labels, seed, fractions);
}

std::string split_manifest_json(const DatasetSplit& split) {
  nlohmann::ordered_json j;
  j["seed"] = split.seed;
  j["fractions"] = {{"train", split.fractions.train},
                    {"validation", split.fractions.validation},
                    {"test", split.fractions.test}};
  j["train"] = split.train;
  j["validation"] = split.validation;
  j["test"] = split.test;
  return j.dump(2) + "\n";
}

DatasetSplit parse_split_manifest(std::string_view json, std::string_view source) {
  try {
    const auto j = nlohmann::json::parse(json);
    DatasetSplit split;
    split.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("fractions")) {
      const auto& f = j.at("fractions");
      split.fractions = {f.at("train").get<double>(), f.at("validation").get<double>(),
                         f.at("test").get<double>()};
    }
    split.train = j.at("train").get<std::vector<std::string>>();
    split.validation = j.at("validation").get<std::vector<std::string>>();
    split.test = j.at("test").get<std::vector<std::string>>();
    return split;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed,
                      std::string(source) + ": invalid split manifest: " + e.what());
  }
}

void write_split_manifest(const DatasetSplit& split, const std::filesystem::path& path) {
  write_text(path, split_manifest_json(split));
}

DatasetSplit read_split_manifest(const std::filesystem::path& path) {
  return parse_split_manifest(read_text(path), path.string());
}

namespace {

std::string numbered(std::string_view stem, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return std::string(stem) + buf;
}

Tensor background(std::size_t size, Rng& rng) {
  Tensor img({size, size, 1});
  for (double& v : img.data()) v = 0.35 + 0.05 * rng.normal();
  return img;
}

void clamp_unit(Tensor& img) {
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
}

Tensor benign_image(std::size_t size, Rng& rng) {
  const double s = static_cast<double>(size);
  Tensor img = background(size, rng);
  const double cy = s / 2.0 + (rng.uniform01() - 0.5) * s / 4.0;
  const double cx = s / 2.0 + (rng.uniform01() - 0.5) * s / 4.0;
  const double sigma = s * (0.12 + 0.08 * rng.uniform01());
  const double amp = 0.40 + 0.15 * rng.uniform01();
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const double dy = static_cast<double>(i) + 0.5 - cy;
      const double dx = static_cast<double>(j) + 0.5 - cx;
      img.at(i, j, 0) += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  }
  clamp_unit(img);
  return img;
}

Tensor malignant_image(std::size_t size, Rng& rng) {
  const double s = static_cast<double>(size);
  Tensor img = background(size, rng);
  const double cy = s / 2.0 + (rng.uniform01() - 0.5) * s / 4.0;
  const double cx = s / 2.0 + (rng.uniform01() - 0.5) * s / 4.0;
  const double a = s * (0.18 + 0.10 * rng.uniform01());
  const double b = s * (0.12 + 0.08 * rng.uniform01());
  const double theta = std::numbers::pi * rng.uniform01();
  const double ph1 = 2.0 * std::numbers::pi * rng.uniform01();
  const double ph2 = 2.0 * std::numbers::pi * rng.uniform01();
  const double ct = std::cos(theta), st = std::sin(theta);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const double dy = static_cast<double>(i) + 0.5 - cy;
      const double dx = static_cast<double>(j) + 0.5 - cx;
      const double u = ct * dx + st * dy;
      const double v = -st * dx + ct * dy;
      const double phi = std::atan2(v, u);
      // irregular boundary: angular modulation of the ellipse radius
      const double boundary = 1.0 + 0.15 * std::sin(3.0 * phi + ph1) + 0.10 * std::sin(5.0 * phi + ph2);
      const double rho = std::sqrt((u / a) * (u / a) + (v / b) * (v / b)) / boundary;
      double& px = img.at(i, j, 0);
      if (rho < 1.0) {
        px = 0.08 + 0.03 * rng.normal();
      } else if (rho < 1.15) {
        px = 0.75 + 0.05 * rng.normal();
      }
    }
  }
  clamp_unit(img);
  return img;
}

}  // namespace

std::vector<Sample> synth_dataset(std::size_t n_per_class, std::size_t size, std::uint64_t seed) {
  if (n_per_class == 0) throw ConfigError("synth_dataset: n_per_class must be >= 1");
  if (size < 8) throw ConfigError("synth_dataset: size must be >= 8");
  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(2 * n_per_class);
  for (std::size_t i = 0; i < n_per_class; ++i) {
    out.push_back({numbered("synth_benign_", i), benign_image(size, rng), kBenign});
  }
  for (std::size_t i = 0; i < n_per_class; ++i) {
    out.push_back({numbered("synth_malignant_", i), malignant_image(size, rng), kMalignant});
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::vector<LabelRecord> parse_labels_csv(std::string_view text, std::string_view source) {
  const std::string src(source);
  std::vector<LabelRecord> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool first = true;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = trim(text.substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty()) continue;

    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw FormatError(FormatError::Kind::kMalformed,
                        src + ":" + std::to_string(line_no) + ": expected 'filename,label'");
    }
    const std::string name = trim(std::string_view(line).substr(0, comma));
    const std::string token = lower(trim(std::string_view(line).substr(comma + 1)));
    const bool header = first && lower(name) == "filename" && token == "label";
    first = false;
    if (header) continue;
    int label = 0;
    if (token == "benign") {
      label = kBenign;
    } else if (token == "malignant") {
      label = kMalignant;
    } else {
      throw FormatError(FormatError::Kind::kBadLabel,
                        src + ":" + std::to_string(line_no) + ": unknown label '" + token +
                            "' (expected benign or malignant)");
    }
    if (name.empty()) {
      throw FormatError(FormatError::Kind::kMalformed,
                        src + ":" + std::to_string(line_no) + ": empty filename");
    }
    if (!seen.insert(name).second) {
      throw FormatError(FormatError::Kind::kDuplicateEntry,
                        src + ":" + std::to_string(line_no) + ": duplicate filename '" + name + "'");
    }
    out.push_back({name, label, line_no});
  }
  return out;
}

std::vector<LabelRecord> load_labels_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("labels file not found: " + path.string());
  return parse_labels_csv(read_text(path), path.string());
}

std::vector<Sample> load_dataset(const std::filesystem::path& data_dir,
                                 const std::filesystem::path& labels_path, std::size_t target_h,
                                 std::size_t target_w, std::size_t channels) {
  const auto records = load_labels_csv(labels_path);
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    const auto image_path = data_dir / rec.filename;
    if (!std::filesystem::exists(image_path)) {
      throw IoError(labels_path.string() + ":" + std::to_string(rec.line) +
                    ": image file not found: " + image_path.string());
    }
    Tensor img = prepare(load_pgm(image_path), target_h, target_w);
    out.push_back({rec.filename, replicate_channels(img, channels), rec.label});
  }
  return out;
}

void write_dataset(std::span<const Sample> samples, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string csv = "filename,label\n";
  for (const auto& s : samples) {
    const std::string file = s.id + ".pgm";
    write_pgm(scale(s.image, 255.0), dir / file);
    csv += file + "," + std::string(label_name(s.label)) + "\n";
  }
  write_text(dir / "labels.csv", csv);
}

}  // namespace attnvgg
