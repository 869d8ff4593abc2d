#include <cstring>
#include <filesystem>
#include <fstream>

#include "svaesr/core/error.hpp"
#include "svaesr/train/trainer.hpp"

namespace svaesr::train {

namespace {

constexpr char kMagic[8] = {'S', 'V', 'A', 'E', 'S', 'R', '0', '1'};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename V>
  void pod(const V& v) { out_.write(reinterpret_cast<const char*>(&v), sizeof(V)); }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void floats(const std::vector<float>& v) {
    pod<std::uint64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, const std::string& path) : in_(in), path_(path) {}
  template <typename V>
  V pod() {
    V v{};
    raw(&v, sizeof(V));
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    check_size(n);
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  std::vector<float> floats() {
    const auto n = pod<std::uint64_t>();
    check_size(n * sizeof(float));
    std::vector<float> v(n);
    raw(v.data(), n * sizeof(float));
    return v;
  }
  void raw(void* dst, std::size_t n) {
    if (!in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n)))
      throw FormatError("checkpoint '" + path_ + "' is truncated");
  }

 private:
  void check_size(std::uint64_t n) {
    if (n > (std::uint64_t{1} << 34)) throw FormatError("checkpoint '" + path_ + "' is corrupt");
  }
  std::ifstream& in_;
  std::string path_;
};

void write_adam(Writer& w, const Adam& a) {
  w.pod<std::uint64_t>(a.t);
  w.floats(a.m);
  w.floats(a.v);
}

void read_adam(Reader& r, Adam& a, std::size_t size, const std::string& path) {
  a.t = r.pod<std::uint64_t>();
  a.m = r.floats();
  a.v = r.floats();
  if (a.m.size() != size || a.v.size() != size)
    throw FormatError("checkpoint '" + path + "': optimizer state does not match the parameters");
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + tmp + "'");
    Writer w(out);
    out.write(kMagic, sizeof(kMagic));
    w.pod<std::uint32_t>(kCheckpointVersion);
    w.str(config_to_json(state.config));
    w.pod<std::uint64_t>(state.iteration);
    w.pod<std::uint64_t>(state.stream.epoch);
    w.pod<std::uint64_t>(state.stream.position);
    w.pod<std::uint64_t>(state.stream.counter);
    w.pod<std::uint64_t>(state.config.seed);
    w.pod<double>(state.best_val_psnr);
    w.floats(state.generator);
    w.floats(state.encoder);
    write_adam(w, state.generator_opt);
    write_adam(w, state.encoder_opt);
    if (!out) throw IoError("failed writing checkpoint '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  Reader r(in, path);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw FormatError("'" + path + "' is not a checkpoint (bad magic)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint '" + path + "' has format version " + std::to_string(version) +
                      ", expected version " + std::to_string(kCheckpointVersion));
  TrainState s;
  s.config = config_from_json(r.str());
  s.iteration = r.pod<std::uint64_t>();
  s.stream.epoch = r.pod<std::uint64_t>();
  s.stream.position = r.pod<std::uint64_t>();
  s.stream.counter = r.pod<std::uint64_t>();
  if (r.pod<std::uint64_t>() != s.config.seed)
    throw FormatError("checkpoint '" + path + "': seed does not match its config");
  s.best_val_psnr = r.pod<double>();
  s.generator = r.floats();
  s.encoder = r.floats();

  const model::SvaeModel model(s.config.model);
  if (s.generator.size() != model.generator_layout().total() ||
      s.encoder.size() != model.encoder_layout().total())
    throw FormatError("checkpoint '" + path + "': parameter count does not match its config");
  s.generator_opt = Adam(s.generator.size(), s.config.lr_rate);
  s.encoder_opt = Adam(s.encoder.size(), s.config.lr_rate);
  read_adam(r, s.generator_opt, s.generator.size(), path);
  read_adam(r, s.encoder_opt, s.encoder.size(), path);
  return s;
}

}  // namespace svaesr::train
