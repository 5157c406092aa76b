#pragma once

// Projector on/off ablation: {neither, vision only, language only, both},
// evaluated for several shot counts. Disabled sides use identity projectors,
// so their features stay unprojected. The "neither" row is plain cosine
// zero-shot with the raw text features.

#include "ssp/classify.hpp"

#include <sstream>

namespace ssp {

struct AblationRow {
  bool use_vision = false;
  bool use_language = false;
  std::vector<std::pair<std::size_t, double>> accuracy;  // (shots, accuracy)
};

inline std::vector<AblationRow> run_ablation(const FeatureBank& bank, const SspConfig& cfg, const ClassifierSpec& spec,
                                             const std::vector<std::size_t>& shots_list) {
  require(!shots_list.empty(), "ablation: shots list is empty");
  for (auto k : shots_list) require(k >= 1 && k <= bank.K(), "ablation: shot count exceeds the bank's K");
  require(spec.kind != ClassifierKind::raw_zeroshot, "ablation: classifier must be an SSP kind");

  std::vector<AblationRow> rows = {{false, false, {}}, {true, false, {}}, {false, true, {}}, {true, true, {}}};
  for (auto k : shots_list) {
    const FeatureBank sub = subsample_shots(bank, k);
    const Subspace vision = build_vision_subspace(sub, cfg);
    const auto language = build_language_subspaces(sub, cfg);
    for (auto& row : rows) {
      double acc = 0.0;
      if (!row.use_vision && !row.use_language) {
        acc = evaluate(sub, nullptr, ClassifierSpec{ClassifierKind::raw_zeroshot}).accuracy;
      } else {
        auto model = assemble_model(sub, cfg, row.use_vision ? vision : Subspace::identity(sub.d()),
                                    row.use_language ? language
                                                     : std::vector<Subspace>(sub.N(), Subspace::identity(sub.d())));
        acc = evaluate(sub, model, spec).accuracy;
      }
      row.accuracy.emplace_back(k, acc);
    }
  }
  return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "use_vision,use_language,shots,accuracy\n";
  for (const auto& r : rows)
    for (const auto& [k, acc] : r.accuracy) out << int(r.use_vision) << ',' << int(r.use_language) << ',' << k << ',' << acc << '\n';
  return out.str();
}

}  // namespace ssp
