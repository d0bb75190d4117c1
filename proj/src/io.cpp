#include "sepca/io.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <cstring>
#include "json.hpp"
#include <sstream>

#include "sepca/errors.hpp"

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace sepca {
namespace {
using json = nlohmann::json;
using cd = std::complex<double>;
namespace fs = std::filesystem;

constexpr const char* kMagic = "SEPCA-CONTAINER 1\n";

void write_bytes(std::ofstream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), std::streamsize(n));
  if (!out) throw DataError("write failed");
}

class ContainerWriter {
 public:
  json meta = json::object();

  void add(const std::string& name, const Eigen::MatrixXd& M) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = M;
    push(name, "f64", M.rows(), M.cols(), R.data(), sizeof(double) * R.size());
  }
  void add(const std::string& name, const Eigen::MatrixXcd& M) {
    Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = M;
    push(name, "c128", M.rows(), M.cols(), R.data(), sizeof(cd) * R.size());
  }

  void save(const std::string& path, const std::string& kind) const {
    json head;
    head["kind"] = kind;
    head["meta"] = meta;
    head["arrays"] = index_;
    const std::string h = head.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    write_bytes(out, kMagic, std::char_traits<char>::length(kMagic));
    const std::uint64_t len = h.size();
    write_bytes(out, &len, sizeof len);
    write_bytes(out, h.data(), h.size());
    write_bytes(out, payload_.data(), payload_.size());
  }

 private:
  void push(const std::string& name, const char* dtype, long r, long c, const void* p, size_t bytes) {
    index_.push_back({{"name", name}, {"dtype", dtype}, {"shape", {r, c}}, {"offset", payload_.size()}, {"bytes", bytes}});
    const char* s = static_cast<const char*>(p);
    payload_.insert(payload_.end(), s, s + bytes);
  }
  json index_ = json::array();
  std::string payload_;
};

class ContainerReader {
 public:
  ContainerReader(const std::string& path, const std::string& kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string magic(std::char_traits<char>::length(kMagic), '\0');
    in.read(magic.data(), std::streamsize(magic.size()));
    if (!in || magic != kMagic) throw DataError("'" + path + "' is not a sepca container");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || len > (1ull << 32)) throw DataError("corrupt container header in '" + path + "'");
    std::string h(len, '\0');
    in.read(h.data(), std::streamsize(len));
    if (!in) throw DataError("truncated container header in '" + path + "'");
    try {
      head_ = json::parse(h);
    } catch (const json::exception& e) {
      throw DataError("bad container header in '" + path + "': " + e.what());
    }
    if (head_.value("kind", "") != kind) throw DataError("'" + path + "' holds a " + head_.value("kind", "?") + ", expected " + kind);
    std::ostringstream rest;
    rest << in.rdbuf();
    payload_ = rest.str();
    for (const auto& a : head_["arrays"]) entries_[a["name"].get<std::string>()] = a;
  }

  const json& meta() const { return head_["meta"]; }

  Eigen::MatrixXd real(const std::string& name) const {
    const json& a = entry(name, "f64");
    const long r = a["shape"][0], c = a["shape"][1];
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> M(r, c);
    copy(a, M.data(), sizeof(double) * M.size());
    return M;
  }
  Eigen::MatrixXcd complex(const std::string& name) const {
    const json& a = entry(name, "c128");
    const long r = a["shape"][0], c = a["shape"][1];
    Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> M(r, c);
    copy(a, M.data(), sizeof(cd) * M.size());
    return M;
  }

 private:
  const json& entry(const std::string& name, const char* dtype) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw DataError("container has no array '" + name + "'");
    if (it->second["dtype"] != dtype) throw DataError("array '" + name + "' has unexpected dtype");
    return it->second;
  }
  void copy(const json& a, void* dst, size_t bytes) const {
    const size_t off = a["offset"], len = a["bytes"];
    if (len != bytes || off + len > payload_.size()) throw DataError("array '" + a["name"].get<std::string>() + "' is truncated");
    std::memcpy(dst, payload_.data() + off, bytes);
  }
  json head_;
  std::string payload_;
  std::map<std::string, json> entries_;
};

json params_json(const BasisParams& p) { return {{"c", p.c}, {"R", p.R}, {"L", p.L}}; }
BasisParams params_from(const json& j) { return {j.at("c").get<double>(), j.at("R").get<int>(), j.at("L").get<int>()}; }

template <class F>
auto guarded(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError("malformed metadata in '" + path + "': " + e.what());
  }
}

}  // namespace

void write_stack(const std::string& path, const ImageStack& stack) {
  const std::string bin = path + ".bin";
  json h = {{"n", stack.n()},
            {"L", stack.L},
            {"dtype", "f64"},
            {"layout", "row-major"},
            {"kind", stack.kind == StackKind::Counts ? "counts" : "intensity"},
            {"data", fs::path(bin).filename().string()}};
  {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << h.dump(2) << "\n";
  }
  std::ofstream out(bin, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + bin + "' for writing");
  write_bytes(out, stack.pixels.data(), sizeof(double) * size_t(stack.pixels.size()));
}

ImageStack read_stack(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stack '" + path + "'");
  return guarded(path, [&] {
    json h;
    try {
      h = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError("stack header '" + path + "' is not valid JSON");
    }
    if (h.at("dtype") != "f64" || h.at("layout") != "row-major") throw DataError("unsupported stack encoding in '" + path + "'");
    const long n = h.at("n").get<long>();
    const int L = h.at("L").get<int>();
    if (n < 0 || L <= 0) throw DataError("invalid stack dimensions in '" + path + "'");
    const std::string kind = h.at("kind");
    if (kind != "counts" && kind != "intensity") throw DataError("unknown stack kind '" + kind + "'");
    ImageStack s(L, n, kind == "counts" ? StackKind::Counts : StackKind::Intensity);
    const fs::path bin = fs::path(path).parent_path() / h.value("data", fs::path(path).filename().string() + ".bin");
    std::ifstream b(bin, std::ios::binary);
    if (!b) throw DataError("cannot open stack data '" + bin.string() + "'");
    const std::streamsize bytes = std::streamsize(sizeof(double) * size_t(s.pixels.size()));
    b.read(reinterpret_cast<char*>(s.pixels.data()), bytes);
    if (b.gcount() != bytes) throw DataError("stack data '" + bin.string() + "' is truncated");
    if (!s.pixels.allFinite()) throw DataError("stack '" + path + "' contains non-finite values");
    return s;
  });
}

void write_model(const std::string& path, const SepcaModel& m) {
  ContainerWriter w;
  json diag = json::array();
  for (const auto& d : m.diag)
    diag.push_back({{"ell", d.ell}, {"cos2", d.cos2}, {"tau", d.tau}, {"t", d.t}, {"alpha", d.alpha}});
  w.meta = {{"params", params_json(m.params)},
            {"radial_oversample", m.radial_oversample},
            {"reflections", m.options.reflections},
            {"whiten", m.options.whiten},
            {"n", m.n},
            {"ranks", m.ranks},
            {"shrink_ranks", m.shrink_ranks},
            {"gamma", m.gamma},
            {"diagnostics", diag}};
  w.add("mean_coeffs", Eigen::MatrixXd(m.mean.coeffs));
  w.add("pixel_profile", Eigen::MatrixXd(m.mean.pixel_profile));
  w.add("node_profile", Eigen::MatrixXd(m.mean.node_profile));
  for (size_t k = 0; k < m.cov.size(); ++k) {
    w.add("B" + std::to_string(k), m.rm.B[k]);
    w.add("D" + std::to_string(k), m.rm.D[k]);
    w.add("S" + std::to_string(k), m.cov[k]);
  }
  w.save(path, "sepca-model");
}

SepcaModel read_model(const std::string& path) {
  ContainerReader r(path, "sepca-model");
  return guarded(path, [&] {
    SepcaModel m;
    const json& meta = r.meta();
    m.params = params_from(meta.at("params"));
    m.radial_oversample = meta.at("radial_oversample");
    m.options.reflections = meta.at("reflections");
    m.options.whiten = meta.at("whiten");
    m.n = meta.at("n");
    m.ranks = meta.at("ranks").get<std::vector<int>>();
    m.shrink_ranks = meta.at("shrink_ranks").get<std::vector<int>>();
    m.gamma = meta.at("gamma").get<std::vector<double>>();
    for (const auto& d : meta.at("diagnostics"))
      m.diag.push_back({d.at("ell"), d.at("cos2"), d.at("tau"), d.at("t"), d.at("alpha")});
    m.mean.coeffs = r.real("mean_coeffs").col(0);
    m.mean.pixel_profile = r.real("pixel_profile").col(0);
    m.mean.node_profile = r.real("node_profile").col(0);
    for (size_t k = 0; k < m.ranks.size(); ++k) {
      m.rm.B.push_back(r.real("B" + std::to_string(k)));
      m.rm.D.push_back(r.real("D" + std::to_string(k)));
      m.cov.push_back(r.complex("S" + std::to_string(k)));
    }
    return m;
  });
}

void write_truth(const std::string& path, const GroundTruthModel& m) {
  ContainerWriter w;
  w.meta = {{"params", params_json(m.params)},
            {"intensity_scale", m.intensity_scale},
            {"signal_radius", m.signal_radius},
            {"clip_rate", m.clip_rate},
            {"seed", m.seed},
            {"blocks", m.sigma.size()}};
  w.add("mean_coeffs", Eigen::MatrixXd(m.mean_coeffs));
  for (size_t k = 0; k < m.sigma.size(); ++k) w.add("Sigma" + std::to_string(k), m.sigma[k]);
  w.save(path, "sepca-truth");
}

GroundTruthModel read_truth(const std::string& path) {
  ContainerReader r(path, "sepca-truth");
  return guarded(path, [&] {
    GroundTruthModel m;
    const json& meta = r.meta();
    m.params = params_from(meta.at("params"));
    m.intensity_scale = meta.at("intensity_scale");
    m.signal_radius = meta.at("signal_radius");
    m.clip_rate = meta.at("clip_rate");
    m.seed = meta.at("seed");
    m.mean_coeffs = r.real("mean_coeffs").col(0);
    const size_t K = meta.at("blocks");
    for (size_t k = 0; k < K; ++k) m.sigma.push_back(r.real("Sigma" + std::to_string(k)));
    return m;
  });
}

}  // namespace sepca
