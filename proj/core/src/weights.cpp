// AGW1 weight files:
//   "AGW1" | u32 count | count x { u16 name_len | name | u8 rank |
//                                   rank x u32 extent | volume x f32 }
// All integers and floats little-endian.

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "attnvgg/error.hpp"
#include "attnvgg/model.hpp"

namespace attnvgg {

namespace {

constexpr char kMagic[4] = {'A', 'G', 'W', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  const std::vector<unsigned char>& buffer() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& buf, std::string path)
      : buf_(buf), path_(std::move(path)) {}

  void need(std::size_t n, const char* what) const {
    if (buf_.size() - pos_ < n) {
      throw FormatError(FormatError::Kind::kTruncated,
                        "weight file " + path_ + " truncated while reading " + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return buf_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_] | (buf_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  const std::vector<unsigned char>& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

bool is_backbone_parameter(std::string_view name) { return name.starts_with("block"); }

void save_weights(const Model& model, const std::filesystem::path& path) {
  const auto params = model.parameters();
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    w.u16(static_cast<std::uint16_t>(p->name.size()));
    w.bytes(p->name.data(), p->name.size());
    const Shape& shape = p->value.shape();
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (auto e : shape) w.u32(static_cast<std::uint32_t>(e));
    for (double v : p->value.data()) w.f32(static_cast<float>(v));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open weight file for writing: " + path.string());
  const auto& buf = w.buffer();
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing weight file: " + path.string());
}

LoadReport load_weights(Model& model, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file: " + path.string());
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
  const std::string where = path.string();
  Reader r(buf, where);

  if (buf.size() < sizeof kMagic || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(FormatError::Kind::kBadMagic, "weight file " + where + " lacks AGW1 magic");
  }
  r.str(sizeof kMagic, "magic");
  const std::uint32_t count = r.u32("tensor count");

  std::map<std::string, Tensor> staged;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint16_t len = r.u16("name length");
    std::string name = r.str(len, "tensor name");
    const std::uint8_t rank = r.u8("rank");
    if (rank < 1 || rank > 4) {
      throw FormatError(FormatError::Kind::kMalformed,
                        "weight file " + where + ": tensor '" + name + "' has rank " +
                            std::to_string(rank));
    }
    Shape shape(rank);
    for (auto& e : shape) e = r.u32("extent");

    Parameter* target = model.find_parameter(name);
    if (!target) {
      throw FormatError(FormatError::Kind::kUnknownTensor,
                        "weight file " + where + ": model has no tensor named '" + name + "'");
    }
    if (target->value.shape() != shape) {
      throw FormatError(FormatError::Kind::kShapeMismatch,
                        "weight file " + where + ": tensor '" + name + "' has shape " +
                            shape_to_string(shape) + ", model expects " +
                            shape_to_string(target->value.shape()));
    }
    if (staged.count(name)) {
      throw FormatError(FormatError::Kind::kDuplicateEntry,
                        "weight file " + where + ": tensor '" + name + "' appears twice");
    }
    Tensor value(shape);
    for (double& v : value.data()) v = static_cast<double>(r.f32("tensor data"));
    staged.emplace(std::move(name), std::move(value));
  }
  if (!r.at_end()) {
    throw FormatError(FormatError::Kind::kMalformed,
                      "weight file " + where + " has trailing bytes after the last tensor");
  }

  LoadReport report;
  for (const Parameter* p : model.parameters()) {
    if (is_backbone_parameter(p->name) && !staged.count(p->name)) {
      throw FormatError(FormatError::Kind::kMissingTensor,
                        "weight file " + where + " lacks backbone tensor '" + p->name + "'");
    }
  }
  for (Parameter* p : model.parameters()) {
    auto it = staged.find(p->name);
    if (it == staged.end()) {
      report.kept_fresh.push_back(p->name);
      continue;
    }
    p->value = std::move(it->second);
    report.loaded.push_back(p->name);
  }
  return report;
}

}  // namespace attnvgg
