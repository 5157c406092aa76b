#pragma once

#include "ssp/classify.hpp"
#include "ssp/vmf.hpp"

namespace ssp {

struct GapMetrics {
  double mu_cosine = 0.0;
  double kappa_tex = 0.0;
  double kappa_vis = 0.0;
  double kappa_gap = 0.0;
  double kl_tex_vis = 0.0;
  double kl_vis_tex = 0.0;
  double kl_sym = 0.0;

  json to_json() const {
    return {{"mu_cosine", mu_cosine},   {"kappa_tex", kappa_tex},   {"kappa_vis", kappa_vis}, {"kappa_gap", kappa_gap},
            {"kl_tex_vis", kl_tex_vis}, {"kl_vis_tex", kl_vis_tex}, {"kl_sym", kl_sym}};
  }
};

struct GapReport {
  GapMetrics before;
  std::optional<GapMetrics> after;

  json to_json() const {
    json j = {{"before", before.to_json()}};
    if (after) j["after"] = after->to_json();
    j["meta"] = {{"estimator", "banerjee"},
                 {"kl", "closed form between fitted vMF densities"},
                 {"image_features", "train_global"}};
    return j;
  }
};

inline GapMetrics gap_metrics(const VmfParams& tex, const VmfParams& vis) {
  GapMetrics g;
  g.mu_cosine = std::clamp(dot(tex.mu, vis.mu), -1.0, 1.0);
  g.kappa_tex = tex.kappa;
  g.kappa_vis = vis.kappa;
  g.kappa_gap = std::abs(tex.kappa - vis.kappa);
  g.kl_tex_vis = kl_vmf(tex, vis);
  g.kl_vis_tex = kl_vmf(vis, tex);
  g.kl_sym = g.kl_tex_vis + g.kl_vis_tex;
  return g;
}

/// Fits vMFs to the training image features and the text features, and when
/// a model is given, to their aligned counterparts as well.
inline GapReport gap_report(const FeatureBank& bank, const SspModel* model = nullptr) {
  GapReport rep;
  rep.before = gap_metrics(fit_vmf(bank.text.cast<double>()), fit_vmf(bank.train_global.cast<double>()));
  if (model) {
    model->check_provenance(bank);
    rep.after = gap_metrics(fit_vmf(normalized_rows(model->aligned_text, "aligned text")),
                            fit_vmf(normalized_rows(model->aligned_train, "aligned train")));
  }
  return rep;
}

}  // namespace ssp
