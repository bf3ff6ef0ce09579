#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnvgg/tensor.hpp"

namespace attnvgg {

inline constexpr int kBenign = 0;
inline constexpr int kMalignant = 1;

std::string_view label_name(int label);

struct Sample {
  std::string id;
  Tensor image;  // H x W x C, values in [0, 1]
  int label = kBenign;
};

// --- PGM --------------------------------------------------------------------

/// Decodes binary PGM (P5, maxval <= 255) into an H x W x 1 tensor of raw
/// byte values, top row first.
Tensor parse_pgm(std::span<const unsigned char> bytes, std::string_view source = "<memory>");
Tensor load_pgm(const std::filesystem::path& path);

/// Writes an H x W x 1 tensor of values in [0, 255] as P5, rounding to the
/// nearest byte.
void write_pgm(const Tensor& image, const std::filesystem::path& path);

// --- preprocessing ----------------------------------------------------------

/// Per-image min-max scaling to [0, 1]; a constant image becomes all zeros.
Tensor normalize(const Tensor& raw);

/// Resize to target_h x target_w, then normalize.
Tensor prepare(const Tensor& raw, std::size_t target_h, std::size_t target_w);

/// Repeats a single-channel image over `channels` channels.
Tensor replicate_channels(const Tensor& image, std::size_t channels);

// --- splitting --------------------------------------------------------------

/// Positional fractions: train, validation, test.
struct SplitFractions {
  double train = 0.75;
  double validation = 0.15;
  double test = 0.10;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;

  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

/// Largest-remainder allocation of n items; equal remainders favour train,
/// then validation, then test. Quotas are computed in exact integer
/// arithmetic on fractions rounded to millionths.
SplitCounts allocate_split_counts(std::size_t n, const SplitFractions& fractions = {});

struct DatasetSplit {
  std::uint64_t seed = 0;
  SplitFractions fractions;
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

/// Per class (benign first): shuffle that class's ids in input order with one
/// generator seeded by `seed`, then hand out train, validation, test slices
/// contiguously. Throws ConfigError if a class is empty.
DatasetSplit stratified_split(std::span<const std::string> ids, std::span<const int> labels,
                              std::uint64_t seed, const SplitFractions& fractions = {});
DatasetSplit stratified_split(std::span<const Sample> samples, std::uint64_t seed,
                              const SplitFractions& fractions = {});

/// Manifest JSON: {seed, fractions, train, validation, test}.
std::string split_manifest_json(const DatasetSplit& split);
DatasetSplit parse_split_manifest(std::string_view json, std::string_view source = "<memory>");
void write_split_manifest(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit read_split_manifest(const std::filesystem::path& path);

// --- synthetic data ---------------------------------------------------------

/// Two-class stand-in data. Benign: smooth bright Gaussian blob at a jittered
/// center. Malignant: dark irregular ellipse with a bright rim. Both on the
/// same low-amplitude noise background, values in [0, 1]. Benign samples
/// come first, ids "synth_benign_NNN" / "synth_malignant_NNN".
std::vector<Sample> synth_dataset(std::size_t n_per_class, std::size_t size, std::uint64_t seed);

// --- labels and datasets ----------------------------------------------------

struct LabelRecord {
  std::string filename;
  int label = kBenign;
  std::size_t line = 0;  // 1-based
};

/// `filename,label` per line, label benign/malignant in any case, optional
/// `filename,label` header. Throws FormatError naming the line.
std::vector<LabelRecord> parse_labels_csv(std::string_view text,
                                          std::string_view source = "<memory>");
std::vector<LabelRecord> load_labels_csv(const std::filesystem::path& path);

/// Loads every labelled PGM from `data_dir` and prepares it to
/// target_h x target_w x channels. Ids are the CSV filenames.
std::vector<Sample> load_dataset(const std::filesystem::path& data_dir,
                                 const std::filesystem::path& labels_path, std::size_t target_h,
                                 std::size_t target_w, std::size_t channels);

/// Writes samples as PGM files plus labels.csv into `dir`.
void write_dataset(std::span<const Sample> samples, const std::filesystem::path& dir);

}  // namespace attnvgg
