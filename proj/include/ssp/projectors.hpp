#pragma once

// Vision and language projectors.
//
// Vision: for every training sample, score its local grid against its global
// feature, keep the top-Q cells, stack [f_ij; selected cells] for all samples
// (N*K*(Q+1) rows) and take one shared principal subspace.
//
// Language: for class i, score every shot's grid against the class text
// feature, keep the top-C cells per shot, stack [t_i; selected cells]
// (K*C+1 rows) and take a principal subspace per class.

#include "ssp/binary_io.hpp"
#include "ssp/feature_bank.hpp"
#include "ssp/selectors.hpp"
#include "ssp/subspace.hpp"

#include <filesystem>

namespace ssp {

struct SspConfig {
  std::size_t q = 40;       // vision cells per sample
  std::size_t c = 40;       // language cells per shot
  std::size_t r_vis = 900;  // requested vision components
  std::size_t r_tex = 900;  // requested language components
  double rank_rel_tol = 1e-6;

  /// Q = C = min(40, h*w), r_vis = r_tex = min(900, d).
  static SspConfig defaults_for(const BankManifest& m) {
    SspConfig cfg;
    cfg.q = cfg.c = std::min<std::size_t>(40, m.cells());
    cfg.r_vis = cfg.r_tex = std::min<std::size_t>(900, m.dim);
    return cfg;
  }

  void validate(std::size_t cells) const {
    require(q >= 1 && q <= cells, "config: Q must be in [1, h*w] (h*w = " + std::to_string(cells) + ")");
    require(c >= 1 && c <= cells, "config: C must be in [1, h*w] (h*w = " + std::to_string(cells) + ")");
    require(r_vis >= 1 && r_tex >= 1, "config: requested ranks must be >= 1");
    require(rank_rel_tol >= 0.0 && rank_rel_tol < 1.0, "config: rank_rel_tol must be in [0, 1)");
  }

  json to_json() const { return {{"q", q}, {"c", c}, {"r_vis", r_vis}, {"r_tex", r_tex}, {"rank_rel_tol", rank_rel_tol}}; }
};

struct SspModel {
  Subspace vision;
  std::vector<Subspace> language;  // one per class
  RowMatrixD aligned_train;        // (N*K) x d, row i*K + j = P_vis f_ij
  RowMatrixD aligned_text;         // N x d,     row i = P_tex^i t_i
  SspConfig config;
  std::uint64_t provenance = 0;

  std::size_t N() const { return language.size(); }
  std::size_t d() const { return vision.dim(); }
  std::size_t K() const { return N() == 0 ? 0 : static_cast<std::size_t>(aligned_train.rows()) / N(); }

  void check_provenance(const FeatureBank& bank) const {
    if (provenance != bank.digest()) throw ProvenanceError(provenance, bank.digest());
  }
};

/// The N*K*(Q+1) x d stack behind the vision subspace.
inline RowMatrixD vision_stack(const FeatureBank& bank, std::size_t q) {
  const auto d = static_cast<Eigen::Index>(bank.d());
  const auto block = static_cast<Eigen::Index>(q + 1);
  RowMatrixD x(static_cast<Eigen::Index>(bank.N() * bank.K()) * block, d);
  parallel_for(bank.N() * bank.K(), [&](std::size_t s) {
    const std::size_t i = s / bank.K(), j = s % bank.K();
    const VectorD f = bank.global(i, j);
    const RowMatrixD grid = bank.local_grid(i, j);
    const auto sel = top_k(similarity_scores(f, grid), q);
    const auto first = static_cast<Eigen::Index>(s) * block;
    x.row(first) = f.transpose();
    for (std::size_t k = 0; k < q; ++k)
      x.row(first + 1 + static_cast<Eigen::Index>(k)) = grid.row(static_cast<Eigen::Index>(sel.indices[k]));
  });
  return x;
}

/// The K*C+1 x d stack behind the language subspace of class `cls`.
inline RowMatrixD language_stack(const FeatureBank& bank, std::size_t cls, std::size_t c) {
  const auto d = static_cast<Eigen::Index>(bank.d());
  RowMatrixD x(static_cast<Eigen::Index>(bank.K() * c + 1), d);
  const VectorD t = bank.text_row(cls);
  x.row(0) = t.transpose();
  for (std::size_t j = 0; j < bank.K(); ++j) {
    const RowMatrixD grid = bank.local_grid(cls, j);
    const auto sel = top_k(similarity_scores(t, grid), c);
    for (std::size_t k = 0; k < c; ++k)
      x.row(1 + static_cast<Eigen::Index>(j * c + k)) = grid.row(static_cast<Eigen::Index>(sel.indices[k]));
  }
  return x;
}

inline Subspace build_vision_subspace(const FeatureBank& bank, const SspConfig& cfg) {
  cfg.validate(bank.cells());
  return principal_subspace(vision_stack(bank, cfg.q), cfg.r_vis, cfg.rank_rel_tol);
}

inline std::vector<Subspace> build_language_subspaces(const FeatureBank& bank, const SspConfig& cfg) {
  cfg.validate(bank.cells());
  std::vector<Subspace> out(bank.N());
  parallel_for(bank.N(), [&](std::size_t i) {
    out[i] = principal_subspace(language_stack(bank, i, cfg.c), cfg.r_tex, cfg.rank_rel_tol);
  });
  return out;
}

/// Projects the bank's training and text features through the given subspaces.
inline SspModel assemble_model(const FeatureBank& bank, const SspConfig& cfg, Subspace vision,
                               std::vector<Subspace> language) {
  require_shape(language.size() == bank.N(), "assemble_model: need one language subspace per class");
  require_shape(vision.dim() == bank.d(), "assemble_model: vision subspace dimension mismatch");
  SspModel model;
  model.config = cfg;
  model.provenance = bank.digest();
  model.vision = std::move(vision);
  model.language = std::move(language);
  const auto d = static_cast<Eigen::Index>(bank.d());
  model.aligned_train.resize(static_cast<Eigen::Index>(bank.N() * bank.K()), d);
  model.aligned_text.resize(static_cast<Eigen::Index>(bank.N()), d);
  for (std::size_t i = 0; i < bank.N(); ++i) {
    require_shape(model.language[i].dim() == bank.d(), "assemble_model: language subspace dimension mismatch");
    model.aligned_text.row(static_cast<Eigen::Index>(i)) = project(model.language[i], bank.text_row(i)).transpose();
    for (std::size_t j = 0; j < bank.K(); ++j)
      model.aligned_train.row(bank.sample_row(i, j)) = project(model.vision, bank.global(i, j)).transpose();
  }
  return model;
}

/// Builds both projector families and the aligned features.
inline SspModel align(const FeatureBank& bank, const SspConfig& cfg) {
  cfg.validate(bank.cells());
  auto vision = build_vision_subspace(bank, cfg);
  auto language = build_language_subspaces(bank, cfg);
  return assemble_model(bank, cfg, std::move(vision), std::move(language));
}

// Model file: "SSPM", u32 version, u32 N, u32 d, u32 Q, u32 C, u32 r_vis,
// u32 r_tex, f32 rank_rel_tol, u64 provenance, vision record, N language
// records, aligned train (N*K*d f32), aligned text (N*d f32).

inline std::string serialize_model(const SspModel& m) {
  binio::Writer w;
  w.bytes("SSPM");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(m.N()));
  w.u32(static_cast<std::uint32_t>(m.d()));
  w.u32(static_cast<std::uint32_t>(m.config.q));
  w.u32(static_cast<std::uint32_t>(m.config.c));
  w.u32(static_cast<std::uint32_t>(m.config.r_vis));
  w.u32(static_cast<std::uint32_t>(m.config.r_tex));
  w.f32(static_cast<float>(m.config.rank_rel_tol));
  w.u64(m.provenance);
  write_subspace(w, m.vision);
  for (const auto& s : m.language) write_subspace(w, s);
  for (const RowMatrixD* t : {&m.aligned_train, &m.aligned_text})
    for (Eigen::Index r = 0; r < t->rows(); ++r)
      for (Eigen::Index c = 0; c < t->cols(); ++c) w.f32(static_cast<float>((*t)(r, c)));
  return w.str();
}

inline SspModel deserialize_model(std::string_view bytes) {
  binio::Reader in(bytes);
  if (in.bytes(4) != "SSPM") throw IoError("not an SSP model file (bad magic)");
  if (const auto v = in.u32(); v != 1) throw IoError("unsupported model version " + std::to_string(v));
  SspModel m;
  const std::size_t n = in.u32();
  const std::size_t d = in.u32();
  if (n < 1 || d < 2) throw IoError("invalid model header");
  m.config.q = in.u32();
  m.config.c = in.u32();
  m.config.r_vis = in.u32();
  m.config.r_tex = in.u32();
  m.config.rank_rel_tol = in.f32();
  m.provenance = in.u64();
  m.vision = read_subspace(in);
  m.vision.requested_rank = m.config.r_vis;
  for (std::size_t i = 0; i < n; ++i) {
    m.language.push_back(read_subspace(in));
    m.language.back().requested_rank = m.config.r_tex;
  }
  if (m.vision.dim() != d) throw IoError("vision subspace dimension disagrees with model header");
  for (const auto& s : m.language)
    if (s.dim() != d) throw IoError("language subspace dimension disagrees with model header");
  const std::size_t floats = in.remaining() / 4;
  if (in.remaining() % 4 != 0 || floats < 2 * n * d || (floats - n * d) % (n * d) != 0)
    throw IoError("model payload size is inconsistent with N and d");
  const std::size_t k = (floats - n * d) / (n * d);
  auto read_block = [&](RowMatrixD& t, std::size_t rows) {
    t.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = in.f32();
  };
  read_block(m.aligned_train, n * k);
  read_block(m.aligned_text, n);
  return m;
}

inline void save_model(const SspModel& m, const std::filesystem::path& path) { binio::write_file(path, serialize_model(m)); }

inline SspModel load_model(const std::filesystem::path& path) { return deserialize_model(binio::read_file(path)); }

}  // namespace ssp
