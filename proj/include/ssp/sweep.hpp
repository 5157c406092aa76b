#pragma once

// Grid evaluation over Q, C or the retained rank, with the mean projection
// error of the test features recorded next to the accuracy.

#include "ssp/classify.hpp"

#include <sstream>

namespace ssp {

enum class SweepParam { q, c, rank };

inline std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::q: return "q";
    case SweepParam::c: return "c";
    case SweepParam::rank: return "rank";
  }
  return "?";
}

struct SweepRow {
  std::size_t value = 0;
  double accuracy = 0.0;
  double vision_residual = 0.0;    // mean ||(I - P_vis) f||^2 over test rows
  double language_residual = 0.0;  // mean residual against the routed language subspace
  std::size_t vision_rank = 0;
  std::size_t max_language_rank = 0;
};

inline std::vector<SweepRow> run_sweep(const FeatureBank& bank, const SspConfig& base, const ClassifierSpec& spec,
                                       SweepParam param, const std::vector<std::size_t>& values) {
  require(!values.empty(), "sweep: no values given");
  std::vector<SweepRow> rows;
  for (auto v : values) {
    SspConfig cfg = base;
    switch (param) {
      case SweepParam::q: cfg.q = v; break;
      case SweepParam::c: cfg.c = v; break;
      case SweepParam::rank: cfg.r_vis = cfg.r_tex = v; break;
    }
    const SspModel model = align(bank, cfg);
    SweepRow row;
    row.value = v;
    row.accuracy = evaluate(bank, spec.kind == ClassifierKind::raw_zeroshot ? nullptr : &model, spec).accuracy;
    std::vector<double> vis(bank.M()), tex(bank.M());
    parallel_for(bank.M(), [&](std::size_t t) {
      const VectorD f = bank.test_row(t);
      vis[t] = residual_sq_norm(model.vision, f);
      tex[t] = route_language_subspace(model, f).residual;
    });
    for (std::size_t t = 0; t < bank.M(); ++t) {
      row.vision_residual += vis[t];
      row.language_residual += tex[t];
    }
    row.vision_residual /= static_cast<double>(bank.M());
    row.language_residual /= static_cast<double>(bank.M());
    row.vision_rank = model.vision.rank();
    for (const auto& s : model.language) row.max_language_rank = std::max(row.max_language_rank, s.rank());
    rows.push_back(row);
  }
  return rows;
}

inline std::string sweep_csv(SweepParam param, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "param,value,accuracy,vision_residual,language_residual,vision_rank,max_language_rank\n";
  for (const auto& r : rows)
    out << to_string(param) << ',' << r.value << ',' << r.accuracy << ',' << r.vision_residual << ','
        << r.language_residual << ',' << r.vision_rank << ',' << r.max_language_rank << '\n';
  return out.str();
}

}  // namespace ssp
