#include "dimco/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace dimco::io {

namespace {

class Writer {
 public:
  void magic(const char (&tag)[5]) { bytes_.insert(bytes_.end(), tag, tag + 4); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  Bytes take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes bytes_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> b, const char* format) : bytes_(b), format_(format) {}

  std::size_t offset() const noexcept { return pos_; }

  void header(const char (&tag)[5]) {
    need(4);
    if (std::memcmp(bytes_.data(), tag, 4) != 0) fail("bad magic, expected " + std::string(tag, 4));
    pos_ = 4;
    const std::size_t at = pos_;
    const std::uint32_t version = u32();
    if (version != kFormatVersion) {
      pos_ = at;
      fail("unsupported version " + std::to_string(version));
    }
  }

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(take(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint64_t u64() { return take(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  // Checks the file length against the length implied by the header.
  void expect_total(std::size_t total) const {
    if (bytes_.size() < total) {
      throw ParseError(std::string(format_) + ": truncated file, " + std::to_string(bytes_.size()) +
                           " bytes present but the header implies " + std::to_string(total),
                       total);
    }
    if (bytes_.size() > total) {
      throw ParseError(std::string(format_) + ": trailing bytes after the payload", total);
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(std::string(format_) + ": " + what, pos_);
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string(format_) + ": unexpected end of file", bytes_.size());
    }
  }
  std::uint64_t take(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  const char* format_;
  std::size_t pos_ = 0;
};

template <class T>
T narrow(std::size_t v, const char* what) {
  if (v > std::numeric_limits<T>::max()) {
    throw ArgumentError(std::string(what) + " (" + std::to_string(v) + ") does not fit the file format");
  }
  return static_cast<T>(v);
}

}  // namespace

Bytes encode_embeddings(const LabeledEmbeddings& data) {
  data.validate();
  if (data.size() == 0) throw ArgumentError("DEMB: cannot write an empty dataset");
  Writer w;
  w.magic("DEMB");
  w.u32(kFormatVersion);
  w.u32(narrow<std::uint32_t>(data.size(), "item count"));
  w.u32(narrow<std::uint32_t>(data.dim(), "dimension"));
  w.u32(data.class_count);
  for (double v : data.data.data) w.f32(static_cast<float>(v));
  for (auto y : data.labels) w.u32(y);
  return w.take();
}

LabeledEmbeddings decode_embeddings(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "DEMB");
  r.header("DEMB");
  const std::uint32_t n = r.u32();
  const std::uint32_t dim = r.u32();
  const std::uint32_t classes = r.u32();
  if (n == 0) r.fail("item count must be >= 1");
  if (dim == 0) r.fail("dimension must be >= 1");
  r.expect_total(20 + static_cast<std::size_t>(n) * dim * 4 + static_cast<std::size_t>(n) * 4);
  LabeledEmbeddings out;
  out.class_count = classes;
  out.data = Matrix(n, dim);
  for (double& v : out.data.data) {
    const std::size_t at = r.offset();
    v = r.f32();
    if (!std::isfinite(v)) throw ParseError("DEMB: non-finite value", at);
  }
  out.labels.resize(n);
  for (auto& y : out.labels) {
    const std::size_t at = r.offset();
    y = r.u32();
    if (y >= classes) {
      throw ParseError("DEMB: label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")", at);
    }
  }
  return out;
}

Bytes encode_codes(const CodeDatabase& db) {
  db.validate();
  const CodeSpec& spec = db.spec();
  Writer w;
  w.magic("DCOD");
  w.u32(kFormatVersion);
  w.u32(narrow<std::uint32_t>(db.size(), "code count"));
  w.u16(narrow<std::uint16_t>(spec.k, "k"));
  w.u16(narrow<std::uint16_t>(spec.d, "d"));
  w.u8(db.has_labels ? 1 : 0);
  w.raw(db.packed.payload());
  if (db.has_labels) {
    for (auto y : db.labels) w.u32(y);
  }
  return w.take();
}

CodeDatabase decode_codes(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "DCOD");
  r.header("DCOD");
  const std::uint32_t n = r.u32();
  const CodeSpec spec{r.u16(), r.u16()};
  if (spec.k < 2) r.fail("k must be >= 2");
  if (spec.d < 1) r.fail("d must be >= 1");
  const std::size_t flag_at = r.offset();
  const std::uint8_t has_labels = r.u8();
  if (has_labels > 1) throw ParseError("DCOD: has_labels must be 0 or 1", flag_at);
  const std::size_t payload = static_cast<std::size_t>(n) * spec.bytes_per_code();
  r.expect_total(kCodeHeaderBytes + payload + (has_labels ? static_cast<std::size_t>(n) * 4 : 0));
  const std::size_t payload_at = r.offset();
  const auto raw = r.raw(payload);
  CodeDatabase db{PackedCodes::from_payload(spec, n, Bytes(raw.begin(), raw.end())), {}, has_labels == 1};
  Codeword word(spec.d);
  for (std::size_t i = 0; i < n; ++i) {
    db.packed.unpack_into(i, word);
    for (auto s : word) {
      if (s >= spec.k) throw ParseError("DCOD: symbol out of range", payload_at + i * spec.bytes_per_code());
    }
  }
  if (has_labels) {
    db.labels.resize(n);
    for (auto& y : db.labels) y = r.u32();
  }
  return db;
}

Bytes encode_model(const EncoderParams& params) {
  const EncoderConfig& c = params.config();
  Writer w;
  w.magic("DMDL");
  w.u32(kFormatVersion);
  w.u32(c.input_dim);
  w.u32(narrow<std::uint32_t>(c.hidden_dims.size(), "hidden layer count"));
  for (auto h : c.hidden_dims) w.u32(h);
  w.u32(c.bottleneck);
  w.u32(c.spec.k);
  w.u32(c.spec.d);
  w.u32(static_cast<std::uint32_t>(c.activation));
  w.u64(c.seed);
  for (double v : params.values()) w.f64(v);
  return w.take();
}

EncoderParams decode_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "DMDL");
  r.header("DMDL");
  EncoderConfig c;
  c.input_dim = r.u32();
  const std::uint32_t hidden = r.u32();
  if (hidden > 1024) r.fail("implausible hidden layer count " + std::to_string(hidden));
  for (std::uint32_t i = 0; i < hidden; ++i) c.hidden_dims.push_back(r.u32());
  c.bottleneck = r.u32();
  c.spec.k = r.u32();
  c.spec.d = r.u32();
  const std::size_t act_at = r.offset();
  const std::uint32_t act = r.u32();
  if (act > 1) throw ParseError("DMDL: unknown activation " + std::to_string(act), act_at);
  c.activation = static_cast<Activation>(act);
  c.seed = r.u64();
  const std::size_t config_end = r.offset();
  EncoderParams params = [&] {
    try {
      return EncoderParams(c);
    } catch (const ConfigError& e) {
      throw ParseError(std::string("DMDL: invalid encoder config: ") + e.what(), config_end);
    }
  }();
  r.expect_total(config_end + params.size() * 8);
  for (double& v : params.values()) {
    const std::size_t at = r.offset();
    v = r.f64();
    if (!std::isfinite(v)) throw ParseError("DMDL: non-finite parameter", at);
  }
  return params;
}

Bytes encode_pq(const PQCodebook& cb) {
  Writer w;
  w.magic("DPQ1");
  w.u32(kFormatVersion);
  w.u32(cb.spec.k);
  w.u32(cb.spec.d);
  w.u32(cb.input_dim);
  w.u32(cb.padded_dim);
  for (const auto& m : cb.centroids) {
    for (double v : m.data) w.f64(v);
  }
  return w.take();
}

PQCodebook decode_pq(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "DPQ1");
  r.header("DPQ1");
  PQCodebook cb;
  cb.spec.k = r.u32();
  cb.spec.d = r.u32();
  cb.input_dim = r.u32();
  cb.padded_dim = r.u32();
  if (cb.spec.k < 2 || cb.spec.d < 1) r.fail("invalid code spec");
  if (cb.input_dim == 0 || cb.padded_dim < cb.input_dim || cb.padded_dim % cb.spec.d != 0 ||
      cb.padded_dim - cb.input_dim >= cb.spec.d) {
    r.fail("inconsistent input/padded dimensions");
  }
  const std::size_t sub = cb.subspace_dim();
  r.expect_total(r.offset() + static_cast<std::size_t>(cb.spec.d) * cb.spec.k * sub * 8);
  for (std::uint32_t i = 0; i < cb.spec.d; ++i) {
    Matrix m(cb.spec.k, sub);
    for (double& v : m.data) v = r.f64();
    cb.centroids.push_back(std::move(m));
  }
  return cb;
}

Bytes encode_sq(const SQCodebook& cb) {
  Writer w;
  w.magic("DSQ1");
  w.u32(kFormatVersion);
  w.u32(cb.k);
  w.u32(cb.dim);
  for (double v : cb.levels.data) w.f64(v);
  return w.take();
}

SQCodebook decode_sq(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "DSQ1");
  r.header("DSQ1");
  SQCodebook cb;
  cb.k = r.u32();
  cb.dim = r.u32();
  if (cb.k < 2 || cb.dim == 0) r.fail("invalid scalar quantizer shape");
  r.expect_total(r.offset() + static_cast<std::size_t>(cb.k) * cb.dim * 8);
  cb.levels = Matrix(cb.dim, cb.k);
  for (double& v : cb.levels.data) v = r.f64();
  return cb;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LabeledEmbeddings read_embeddings(const std::filesystem::path& path) { return decode_embeddings(read_file(path)); }
void write_embeddings(const std::filesystem::path& path, const LabeledEmbeddings& data) {
  write_file_atomic(path, encode_embeddings(data));
}
CodeDatabase read_codes(const std::filesystem::path& path) { return decode_codes(read_file(path)); }
void write_codes(const std::filesystem::path& path, const CodeDatabase& db) {
  write_file_atomic(path, encode_codes(db));
}
EncoderParams read_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }
void write_model(const std::filesystem::path& path, const EncoderParams& params) {
  write_file_atomic(path, encode_model(params));
}
PQCodebook read_pq(const std::filesystem::path& path) { return decode_pq(read_file(path)); }
void write_pq(const std::filesystem::path& path, const PQCodebook& codebook) {
  write_file_atomic(path, encode_pq(codebook));
}
SQCodebook read_sq(const std::filesystem::path& path) { return decode_sq(read_file(path)); }
void write_sq(const std::filesystem::path& path, const SQCodebook& codebook) {
  write_file_atomic(path, encode_sq(codebook));
}

}  // namespace dimco::io
