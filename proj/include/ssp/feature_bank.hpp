#pragma once

// Feature bank: a directory holding manifest.json plus raw little-endian
// tensors. Every feature row is unit-normalized on load.
//
//   train_global [N,K,d]      float32
//   train_local  [N,K,h*w,d]  float32
//   text         [N,d]        float32
//   test_global  [M,d]        float32
//   test_labels  [M]          int32
//   test_local   [M,h*w,d]    float32 (optional)

#include "ssp/binary_io.hpp"
#include "ssp/common.hpp"
#include "ssp/vmf.hpp"

#include <json.hpp>

#include <filesystem>
#include <numbers>
#include <optional>
#include <random>

namespace ssp {

using json = nlohmann::json;

struct BankManifest {
  int version = 1;
  std::size_t dim = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t num_classes = 0;
  std::size_t shots = 0;
  std::size_t num_test = 0;
  bool has_test_local = false;
  json meta = json::object();

  std::size_t cells() const { return grid_h * grid_w; }

  void validate() const {
    if (version != 1) throw DomainError("unsupported bank version " + std::to_string(version));
    require(dim >= 2, "bank: dim must be >= 2");
    require(num_classes >= 2, "bank: num_classes must be >= 2");
    require(shots >= 1, "bank: shots must be >= 1");
    require(cells() >= 1, "bank: grid must have at least one cell");
    require(meta.is_object(), "bank: meta must be an object");
  }

  json tensor_entry(const std::string& name, std::vector<std::size_t> shape) const {
    return {{"file", name + ".bin"}, {"shape", shape}, {"dtype", name == "test_labels" ? "int32" : "float32"}};
  }

  json tensors_json() const {
    const auto n = num_classes, k = shots, d = dim, m = num_test, c = cells();
    json t = {
        {"train_global", tensor_entry("train_global", {n, k, d})},
        {"train_local", tensor_entry("train_local", {n, k, c, d})},
        {"text", tensor_entry("text", {n, d})},
        {"test_global", tensor_entry("test_global", {m, d})},
        {"test_labels", tensor_entry("test_labels", {m})},
    };
    if (has_test_local) t["test_local"] = tensor_entry("test_local", {m, c, d});
    return t;
  }

  json to_json() const {
    return {{"version", version},       {"dim", dim},     {"grid", {grid_h, grid_w}}, {"num_classes", num_classes},
            {"shots", shots},           {"num_test", num_test}, {"tensors", tensors_json()}, {"meta", meta}};
  }

  /// Canonical manifest text; this is what save_bank writes.
  std::string serialized() const { return to_json().dump(2) + "\n"; }

  /// Provenance digest: FNV-1a over the canonical manifest text.
  std::uint64_t digest() const { return fnv1a64(serialized()); }
};

struct FeatureBank {
  BankManifest manifest;
  RowMatrixF train_global;  // row i*K + j
  RowMatrixF train_local;   // row (i*K + j)*hw + cell
  RowMatrixF text;          // row i
  RowMatrixF test_global;   // row m
  std::vector<std::int32_t> test_labels;
  std::optional<RowMatrixF> test_local;  // row m*hw + cell

  std::size_t N() const { return manifest.num_classes; }
  std::size_t K() const { return manifest.shots; }
  std::size_t d() const { return manifest.dim; }
  std::size_t M() const { return manifest.num_test; }
  std::size_t cells() const { return manifest.cells(); }

  Eigen::Index sample_row(std::size_t cls, std::size_t shot) const {
    return static_cast<Eigen::Index>(cls * K() + shot);
  }

  VectorD global(std::size_t cls, std::size_t shot) const { return row_as_double(train_global, sample_row(cls, shot)); }
  VectorD text_row(std::size_t cls) const { return row_as_double(text, static_cast<Eigen::Index>(cls)); }
  VectorD test_row(std::size_t m) const { return row_as_double(test_global, static_cast<Eigen::Index>(m)); }

  /// The h*w x d local grid of one training sample, widened to double.
  RowMatrixD local_grid(std::size_t cls, std::size_t shot) const {
    const auto hw = static_cast<Eigen::Index>(cells());
    return train_local.middleRows(sample_row(cls, shot) * hw, hw).cast<double>();
  }

  RowMatrixD test_local_grid(std::size_t m) const {
    if (!test_local) throw DomainError("bank has no test_local tensor");
    const auto hw = static_cast<Eigen::Index>(cells());
    return test_local->middleRows(static_cast<Eigen::Index>(m) * hw, hw).cast<double>();
  }

  std::uint64_t digest() const { return manifest.digest(); }

  /// Checks shapes, label range, finiteness and unit norms.
  void validate() const {
    manifest.validate();
    const auto d = static_cast<Eigen::Index>(this->d());
    auto check = [&](const RowMatrixF& m, std::size_t rows, const char* name) {
      require_shape(m.rows() == static_cast<Eigen::Index>(rows) && m.cols() == d,
                    std::string("bank: tensor ") + name + " has wrong shape");
      if (!m.allFinite()) throw NumericError(std::string("bank: non-finite value in ") + name);
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double n = norm(row_as_double(m, r));
        if (std::abs(n - 1.0) > 1e-5)
          throw NumericError(std::string("bank: row ") + std::to_string(r) + " of " + name + " is not unit norm");
      }
    };
    check(train_global, N() * K(), "train_global");
    check(train_local, N() * K() * cells(), "train_local");
    check(text, N(), "text");
    check(test_global, M(), "test_global");
    require_shape(test_labels.size() == M(), "bank: test_labels has wrong length");
    for (auto l : test_labels)
      require(l >= 0 && static_cast<std::size_t>(l) < N(), "bank: test label out of range");
    require(manifest.has_test_local == test_local.has_value(), "bank: manifest/test_local presence mismatch");
    if (test_local) check(*test_local, M() * cells(), "test_local");
  }
};

namespace detail {

/// Rows within 1e-6 of unit norm are left untouched so that normalization is
/// bitwise idempotent across save/load cycles.
inline void normalize_rows(RowMatrixF& m, const std::string& name) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const VectorD v = row_as_double(m, r);
    const double n = norm(v);
    if (!(n > 0.0)) throw NumericError("zero-norm row " + std::to_string(r) + " in " + name);
    if (std::abs(n - 1.0) <= 1e-6) continue;
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<float>(v[c] / n);
  }
}

inline std::vector<std::size_t> shape_of(const json& entry) {
  std::vector<std::size_t> shape;
  for (const auto& s : entry.at("shape")) shape.push_back(s.get<std::size_t>());
  return shape;
}

inline std::string tensor_bytes(const std::filesystem::path& dir, const json& entry,
                                const std::vector<std::size_t>& expected_shape, const std::string& expected_dtype,
                                const std::string& name) {
  if (shape_of(entry) != expected_shape) throw ShapeError("manifest shape for " + name + " disagrees with header fields");
  if (entry.at("dtype").get<std::string>() != expected_dtype)
    throw DomainError("tensor " + name + " must have dtype " + expected_dtype);
  const auto path = dir / entry.at("file").get<std::string>();
  if (!std::filesystem::exists(path)) throw IoError("missing tensor file " + path.string());
  std::string bytes = binio::read_file(path);
  std::size_t count = 1;
  for (auto s : expected_shape) count *= s;
  if (bytes.size() != count * 4)
    throw ShapeError("tensor " + name + ": file holds " + std::to_string(bytes.size()) + " bytes, expected " +
                     std::to_string(count * 4));
  return bytes;
}

inline RowMatrixF decode_f32(const std::string& bytes, std::size_t rows, std::size_t cols, const std::string& name) {
  RowMatrixF m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  binio::Reader r(bytes);
  float* out = m.data();
  for (std::size_t i = 0; i < rows * cols; ++i) {
    out[i] = r.f32();
    if (!std::isfinite(out[i])) throw NumericError("non-finite value in tensor " + name);
  }
  return m;
}

inline std::string encode_f32(const RowMatrixF& m) {
  binio::Writer w;
  const float* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) w.f32(p[i]);
  return w.str();
}

}  // namespace detail

inline FeatureBank load_bank(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw IoError("missing " + manifest_path.string());
  json j;
  try {
    j = json::parse(binio::read_file(manifest_path));
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest.json: ") + e.what());
  }

  FeatureBank bank;
  auto& m = bank.manifest;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw DomainError("unsupported bank version " + std::to_string(m.version));
    m.dim = j.at("dim").get<std::size_t>();
    const auto& grid = j.at("grid");
    require_shape(grid.is_array() && grid.size() == 2, "manifest grid must be [h, w]");
    m.grid_h = grid[0].get<std::size_t>();
    m.grid_w = grid[1].get<std::size_t>();
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.shots = j.at("shots").get<std::size_t>();
    m.num_test = j.at("num_test").get<std::size_t>();
    if (j.contains("meta")) m.meta = j.at("meta");
    m.has_test_local = j.at("tensors").contains("test_local");
    m.validate();

    const auto& t = j.at("tensors");
    const auto n = m.num_classes, k = m.shots, d = m.dim, mt = m.num_test, c = m.cells();
    auto f32 = [&](const std::string& name, std::vector<std::size_t> shape, std::size_t rows) {
      if (!t.contains(name)) throw IoError("manifest lacks tensor " + name);
      auto mat = detail::decode_f32(detail::tensor_bytes(dir, t.at(name), shape, "float32", name), rows, d, name);
      detail::normalize_rows(mat, name);
      return mat;
    };
    bank.train_global = f32("train_global", {n, k, d}, n * k);
    bank.train_local = f32("train_local", {n, k, c, d}, n * k * c);
    bank.text = f32("text", {n, d}, n);
    bank.test_global = f32("test_global", {mt, d}, mt);
    if (!t.contains("test_labels")) throw IoError("manifest lacks tensor test_labels");
    const auto label_bytes = detail::tensor_bytes(dir, t.at("test_labels"), {mt}, "int32", "test_labels");
    binio::Reader r(label_bytes);
    bank.test_labels.resize(mt);
    for (auto& l : bank.test_labels) l = r.get<std::int32_t>();
    if (m.has_test_local) bank.test_local = f32("test_local", {mt, c, d}, mt * c);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest.json: ") + e.what());
  }
  bank.validate();
  return bank;
}

inline void save_bank(const FeatureBank& bank, const std::filesystem::path& dir) {
  bank.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  binio::write_file(dir / "manifest.json", bank.manifest.serialized());
  binio::write_file(dir / "train_global.bin", detail::encode_f32(bank.train_global));
  binio::write_file(dir / "train_local.bin", detail::encode_f32(bank.train_local));
  binio::write_file(dir / "text.bin", detail::encode_f32(bank.text));
  binio::write_file(dir / "test_global.bin", detail::encode_f32(bank.test_global));
  binio::Writer labels;
  for (auto l : bank.test_labels) labels.put(l);
  binio::write_file(dir / "test_labels.bin", labels.str());
  if (bank.test_local) binio::write_file(dir / "test_local.bin", detail::encode_f32(*bank.test_local));
}

/// Copy of the bank that keeps the first `k` shots of every class.
inline FeatureBank subsample_shots(const FeatureBank& bank, std::size_t k) {
  require(k >= 1 && k <= bank.K(), "subsample_shots: k must be in [1, K]");
  FeatureBank out = bank;
  out.manifest.shots = k;
  const auto d = static_cast<Eigen::Index>(bank.d());
  const auto hw = static_cast<Eigen::Index>(bank.cells());
  out.train_global.resize(static_cast<Eigen::Index>(bank.N() * k), d);
  out.train_local.resize(static_cast<Eigen::Index>(bank.N() * k) * hw, d);
  for (std::size_t i = 0; i < bank.N(); ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto dst = static_cast<Eigen::Index>(i * k + j);
      const auto src = bank.sample_row(i, j);
      out.train_global.row(dst) = bank.train_global.row(src);
      out.train_local.middleRows(dst * hw, hw) = bank.train_local.middleRows(src * hw, hw);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic banks with an injected modality gap.

struct SynthParams {
  std::size_t num_classes = 8;
  std::size_t shots = 16;
  std::size_t num_test = 256;
  std::size_t dim = 64;
  std::size_t grid_h = 7;
  std::size_t grid_w = 7;
  double gap_angle_deg = 60.0;
  double noise_kappa = 50.0;
  std::uint64_t seed = 7;
  /// Share of local cells drawn around the class prototype; the rest sit
  /// around a clutter direction shared by all classes.
  double foreground_fraction = 0.6;

  void validate() const {
    require(num_classes >= 2, "synth: classes must be >= 2");
    require(shots >= 1, "synth: shots must be >= 1");
    require(num_test >= 1, "synth: test count must be >= 1");
    require(dim >= 2, "synth: dim must be >= 2");
    require(grid_h >= 1 && grid_w >= 1, "synth: grid dimensions must be >= 1");
    require(gap_angle_deg >= 0.0 && gap_angle_deg < 180.0, "synth: gap angle must be in [0, 180)");
    require(noise_kappa > 0.0 && std::isfinite(noise_kappa), "synth: noise kappa must be > 0");
    require(foreground_fraction >= 0.0 && foreground_fraction <= 1.0, "synth: foreground fraction must be in [0, 1]");
  }
};

/// Draws N class prototypes; image features (global and local cells) scatter
/// around their prototype, background cells around a shared clutter direction,
/// and each text feature scatters around its prototype rotated by the gap angle
/// toward a shared gap direction (within the plane spanned by the prototype and
/// that direction).
inline FeatureBank synth_bank(const SynthParams& p) {
  p.validate();
  std::mt19937_64 rng(p.seed);
  const auto d = static_cast<Eigen::Index>(p.dim);
  const std::size_t hw = p.grid_h * p.grid_w;

  std::vector<VectorD> prototypes;
  for (std::size_t i = 0; i < p.num_classes; ++i) prototypes.push_back(sample_uniform_sphere(d, rng));
  const VectorD clutter = sample_uniform_sphere(d, rng);
  const VectorD gap_dir = sample_uniform_sphere(d, rng);

  FeatureBank bank;
  auto& m = bank.manifest;
  m.dim = p.dim;
  m.grid_h = p.grid_h;
  m.grid_w = p.grid_w;
  m.num_classes = p.num_classes;
  m.shots = p.shots;
  m.num_test = p.num_test;
  m.has_test_local = true;
  m.meta = {{"generator", "synth"},
            {"gap_angle", p.gap_angle_deg},
            {"noise_kappa", p.noise_kappa},
            {"foreground_fraction", p.foreground_fraction},
            {"seed", p.seed}};

  auto put = [](RowMatrixF& dst, Eigen::Index row, const VectorD& v) { dst.row(row) = v.cast<float>().transpose(); };
  auto around = [&](const VectorD& center) { return sample_vmf_one(VmfParams{center, p.noise_kappa}, rng); };
  std::bernoulli_distribution foreground(p.foreground_fraction);
  auto fill_grid = [&](RowMatrixF& dst, Eigen::Index first_row, const VectorD& proto) {
    for (std::size_t c = 0; c < hw; ++c)
      put(dst, first_row + static_cast<Eigen::Index>(c), around(foreground(rng) ? proto : clutter));
  };

  const double gap = p.gap_angle_deg * std::numbers::pi / 180.0;
  bank.text.resize(static_cast<Eigen::Index>(p.num_classes), d);
  for (std::size_t i = 0; i < p.num_classes; ++i) {
    const VectorD& proto = prototypes[i];
    VectorD ortho = gap_dir - dot(gap_dir, proto) * proto;
    ortho = normalized(ortho);
    const VectorD center = normalized(std::cos(gap) * proto + std::sin(gap) * ortho);
    put(bank.text, static_cast<Eigen::Index>(i), around(center));
  }

  bank.train_global.resize(static_cast<Eigen::Index>(p.num_classes * p.shots), d);
  bank.train_local.resize(static_cast<Eigen::Index>(p.num_classes * p.shots * hw), d);
  for (std::size_t i = 0; i < p.num_classes; ++i) {
    for (std::size_t j = 0; j < p.shots; ++j) {
      const auto row = static_cast<Eigen::Index>(i * p.shots + j);
      put(bank.train_global, row, around(prototypes[i]));
      fill_grid(bank.train_local, row * static_cast<Eigen::Index>(hw), prototypes[i]);
    }
  }

  bank.test_global.resize(static_cast<Eigen::Index>(p.num_test), d);
  bank.test_local = RowMatrixF(static_cast<Eigen::Index>(p.num_test * hw), d);
  bank.test_labels.resize(p.num_test);
  for (std::size_t t = 0; t < p.num_test; ++t) {
    const std::size_t cls = t % p.num_classes;
    bank.test_labels[t] = static_cast<std::int32_t>(cls);
    put(bank.test_global, static_cast<Eigen::Index>(t), around(prototypes[cls]));
    fill_grid(*bank.test_local, static_cast<Eigen::Index>(t * hw), prototypes[cls]);
  }

  for (RowMatrixF* t : {&bank.train_global, &bank.train_local, &bank.text, &bank.test_global, &*bank.test_local})
    detail::normalize_rows(*t, "synth");
  return bank;
}

}  // namespace ssp
