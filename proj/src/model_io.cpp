// Model file layout (all integers little-endian, doubles as IEEE-754 bits):
//
//   magic    8 bytes  "GEOLOCMD"
//   version  u32      kModelFormatVersion
//   length   u64      payload byte count
//   payload  ...      manifest, optional corpus-wide mixture, entries
//   crc32    u32      zlib crc32 of the payload
//
// Doubles are stored bit-exactly so a reloaded model locates identically.

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "geoloc/errors.hpp"
#include "geoloc/model.hpp"

namespace geoloc {

namespace {

constexpr char kMagic[8] = {'G', 'E', 'O', 'L', 'O', 'C', 'M', 'D'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8;

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) throw ModelLoadError(ModelLoadError::Kind::format, "model payload ends early");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void write_gmm(Writer& w, const Gmm2D& g) {
  w.u64(g.n_points());
  w.f64(g.log_likelihood());
  w.u32(static_cast<std::uint32_t>(g.size()));
  for (const auto& c : g.components()) {
    w.f64(c.weight);
    w.f64(c.mean.x());
    w.f64(c.mean.y());
    w.f64(c.cov(0, 0));
    w.f64(c.cov(0, 1));
    w.f64(c.cov(1, 1));
  }
}

Gmm2D read_gmm(Reader& r) {
  const auto n_points = r.u64();
  const double ll = r.f64();
  const auto k = r.u32();
  std::vector<GaussComponent2D> comps(k);
  for (auto& c : comps) {
    c.weight = r.f64();
    c.mean = {r.f64(), r.f64()};
    const double a = r.f64(), b = r.f64(), d = r.f64();
    c.cov << a, b, b, d;
  }
  try {
    return Gmm2D(std::move(comps), n_points, ll);
  } catch (const std::invalid_argument& e) {
    throw ModelLoadError(ModelLoadError::Kind::format, std::string("invalid mixture: ") + e.what());
  }
}

Field read_field(Reader& r) {
  const auto f = r.u8();
  if (f > static_cast<std::uint8_t>(Field::tz)) throw ModelLoadError(ModelLoadError::Kind::format, "bad field tag");
  return static_cast<Field>(f);
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const LocationModel& model) {
  Writer p;
  const TrainConfig& c = model.config();
  p.u8(static_cast<std::uint8_t>(c.algorithm));
  p.f64(c.alpha);
  p.f64(c.lambda);
  p.u8(static_cast<std::uint8_t>(c.qpr_property));
  p.u8(static_cast<std::uint8_t>(c.fields.size()));
  for (Field f : c.fields) p.u8(static_cast<std::uint8_t>(f));
  p.u64(c.min_instances);
  p.i32(c.max_components);
  p.u64(c.seed);
  p.f64(c.em.tolerance);
  p.i32(c.em.max_iterations);
  p.f64(c.em.cov_floor);
  p.f64(c.em.prune_weight);

  const Provenance& prov = model.provenance();
  p.i64(prov.train_begin);
  p.i64(prov.train_end);
  p.u64(prov.corpus_hash);
  p.u64(prov.n_training);

  p.u8(model.all_tweets() ? 1 : 0);
  if (model.all_tweets()) write_gmm(p, *model.all_tweets());

  p.u64(model.entries().size());
  for (const auto& e : model.entries()) {
    p.u8(static_cast<std::uint8_t>(e.ngram.field));
    p.str(e.ngram.gram);
    write_gmm(p, e.gmm);
    p.f64(e.weight);
    for (double v : e.properties.values) p.f64(v);
    p.f64(e.mean_error);
    p.u64(e.n_messages);
  }

  const auto& payload = p.bytes();
  Writer out;
  for (char ch : kMagic) out.u8(static_cast<std::uint8_t>(ch));
  out.u32(kModelFormatVersion);
  out.u64(payload.size());
  out.bytes().insert(out.bytes().end(), payload.begin(), payload.end());
  out.u32(static_cast<std::uint32_t>(::crc32(0L, payload.data(), static_cast<uInt>(payload.size()))));
  return std::move(out.bytes());
}

LocationModel deserialize_model(std::span<const std::uint8_t> bytes) {
  using Kind = ModelLoadError::Kind;
  if (bytes.size() < 8 && (bytes.empty() || std::memcmp(bytes.data(), kMagic, bytes.size()) == 0))
    throw ModelLoadError(Kind::truncated, "model file is truncated");
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw ModelLoadError(Kind::bad_magic, "not a model file");
  if (bytes.size() < kHeaderSize) throw ModelLoadError(Kind::truncated, "model header is truncated");
  Reader header(bytes.subspan(8, kHeaderSize - 8));
  const auto version = header.u32();
  if (version != kModelFormatVersion)
    throw ModelLoadError(Kind::version, "unsupported model format version " + std::to_string(version));
  const auto length = header.u64();
  if (bytes.size() < kHeaderSize + 4 || length > bytes.size() - kHeaderSize - 4)
    throw ModelLoadError(Kind::truncated, "model file is truncated");
  if (length != bytes.size() - kHeaderSize - 4) throw ModelLoadError(Kind::format, "trailing bytes after model");
  const auto payload = bytes.subspan(kHeaderSize, length);
  Reader tail(bytes.subspan(kHeaderSize + length, 4));
  const auto stored_crc = tail.u32();
  if (stored_crc != static_cast<std::uint32_t>(::crc32(0L, payload.data(), static_cast<uInt>(payload.size()))))
    throw ModelLoadError(Kind::checksum, "model checksum mismatch");

  Reader r(payload);
  TrainConfig c;
  const auto algo = r.u8();
  if (algo > static_cast<std::uint8_t>(Algorithm::opt_both)) throw ModelLoadError(Kind::format, "bad algorithm id");
  c.algorithm = static_cast<Algorithm>(algo);
  c.alpha = r.f64();
  c.lambda = r.f64();
  const auto prop = r.u8();
  if (prop >= kQualityPropertyCount) throw ModelLoadError(Kind::format, "bad property id");
  c.qpr_property = static_cast<QualityProperty>(prop);
  c.fields.clear();
  for (auto n = r.u8(); n > 0; --n) c.fields.push_back(read_field(r));
  c.min_instances = r.u64();
  c.max_components = r.i32();
  c.seed = r.u64();
  c.em.tolerance = r.f64();
  c.em.max_iterations = r.i32();
  c.em.cov_floor = r.f64();
  c.em.prune_weight = r.f64();

  Provenance prov;
  prov.train_begin = r.i64();
  prov.train_end = r.i64();
  prov.corpus_hash = r.u64();
  prov.n_training = r.u64();

  std::optional<Gmm2D> all;
  if (r.u8()) all = read_gmm(r);

  const auto n = r.u64();
  std::vector<ModelEntry> entries;
  for (std::uint64_t i = 0; i < n; ++i) {
    ModelEntry e;
    e.ngram.field = read_field(r);
    e.ngram.gram = r.str();
    e.gmm = read_gmm(r);
    e.weight = r.f64();
    for (double& v : e.properties.values) v = r.f64();
    e.mean_error = r.f64();
    e.n_messages = r.u64();
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw ModelLoadError(Kind::format, "unexpected bytes at end of payload");
  return LocationModel(std::move(c), prov, std::move(entries), std::move(all));
}

void save_model(const LocationModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing model file " + path.string());
}

LocationModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelLoadError(ModelLoadError::Kind::io, "cannot open model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace geoloc
