#pragma once

#include "ssp/feature_bank.hpp"
#include "ssp/projectors.hpp"

#include <chrono>
#include <limits>
#include <optional>

namespace ssp {

enum class ClassifierKind { raw_zeroshot, ssp_zeroshot, ssp_cache };
enum class TextTermSource { tex, vis };

inline std::string to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::raw_zeroshot: return "raw-zeroshot";
    case ClassifierKind::ssp_zeroshot: return "ssp-zeroshot";
    case ClassifierKind::ssp_cache: return "ssp-cache";
  }
  return "?";
}

inline std::string to_string(TextTermSource s) { return s == TextTermSource::tex ? "tex" : "vis"; }

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::ssp_zeroshot;
  double alpha = 1.0;  // cache blend weight
  double beta = 5.5;   // cache sharpness
  TextTermSource text_term_source = TextTermSource::tex;

  void validate() const {
    require(std::isfinite(alpha) && alpha >= 0.0, "classifier: alpha must be finite and >= 0");
    require(std::isfinite(beta) && beta > 0.0, "classifier: beta must be finite and > 0");
  }

  json to_json() const {
    return {{"kind", to_string(kind)}, {"alpha", alpha}, {"beta", beta}, {"text_term_source", to_string(text_term_source)}};
  }
};

/// logit_i = <f, T_i>. Inputs are expected to be unit-normalized already.
inline VectorD zero_shot_logits(const VectorD& f, const RowMatrixD& t) {
  require_shape(f.size() == t.cols(), "zero_shot_logits: dimension mismatch");
  VectorD out(t.rows());
  const std::span<const double> fs(f.data(), static_cast<std::size_t>(f.size()));
  for (Eigen::Index i = 0; i < t.rows(); ++i) out[i] = dot(fs, std::span<const double>(t.row(i).data(), fs.size()));
  return out;
}

/// Smallest index among the maxima.
inline std::size_t argmax(const VectorD& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
  return best;
}

inline RowMatrixD normalized_rows(const RowMatrixD& m, const char* what) {
  RowMatrixD out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const VectorD v = m.row(r).transpose();
    if (!(norm(v) >= 1e-9)) throw NumericError(std::string("degenerate projection: a row of ") + what + " is ~0");
    out.row(r) = normalized(v).transpose();
  }
  return out;
}

/// One-hot labels of the N*K training rows, row i*K + j has a 1 in column i.
inline MatrixD onehot_labels(std::size_t n, std::size_t k) {
  MatrixD l = MatrixD::Zero(static_cast<Eigen::Index>(n * k), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) l(static_cast<Eigen::Index>(i * k + j), static_cast<Eigen::Index>(i)) = 1.0;
  return l;
}

struct Route {
  std::size_t cls = 0;
  VectorD projected;  // P_tex^cls f, not renormalized
  double residual = 0.0;
};

/// Nearest language subspace by orthogonal residual; ties go to the smaller index.
inline Route route_language_subspace(const SspModel& model, const VectorD& f) {
  require_shape(!model.language.empty(), "route: model has no language subspaces");
  Route best;
  best.residual = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < model.language.size(); ++i) {
    const double r = residual_sq_norm(model.language[i], f);
    if (r < best.residual) {
      best.residual = r;
      best.cls = i;
    }
  }
  best.projected = project(model.language[best.cls], f);
  return best;
}

struct TestProjection {
  VectorD f_vis;  // unit norm
  VectorD f_tex;  // unit norm
  double vis_norm = 0.0;  // norms before renormalization
  double tex_norm = 0.0;
  std::size_t routed = 0;
};

inline TestProjection project_test(const SspModel& model, const VectorD& f) {
  TestProjection out;
  const VectorD v = project(model.vision, f);
  out.vis_norm = norm(v);
  if (!(out.vis_norm >= 1e-9)) throw NumericError("degenerate projection: test feature vanishes in the vision subspace");
  const Route route = route_language_subspace(model, f);
  out.routed = route.cls;
  out.tex_norm = norm(route.projected);
  if (!(out.tex_norm >= 1e-9))
    throw NumericError("degenerate projection: test feature vanishes in language subspace " + std::to_string(route.cls));
  out.f_vis = v / out.vis_norm;
  out.f_tex = route.projected / out.tex_norm;
  return out;
}

/// Precomputed state for scoring test features against a model.
class SspClassifier {
 public:
  SspClassifier(const SspModel& model, ClassifierSpec spec, MatrixD labels_onehot)
      : model_(model), spec_(spec), labels_(std::move(labels_onehot)) {
    spec_.validate();
    if (spec_.kind == ClassifierKind::raw_zeroshot)
      throw DomainError("SspClassifier: raw-zeroshot does not use a model; use RawClassifier");
    text_ = normalized_rows(model.aligned_text, "aligned text");
    if (spec_.kind == ClassifierKind::ssp_cache) {
      require_shape(labels_.rows() == model.aligned_train.rows() && labels_.cols() == static_cast<Eigen::Index>(model.N()),
                    "ssp_logits: label matrix must be [N*K, N]");
      train_ = normalized_rows(model.aligned_train, "aligned train");
    }
  }

  SspClassifier(const SspModel& model, ClassifierSpec spec)
      : SspClassifier(model, spec, onehot_labels(model.N(), model.K())) {}

  VectorD logits(const VectorD& f_test, TestProjection* diag = nullptr) const {
    require_shape(static_cast<std::size_t>(f_test.size()) == model_.d(), "ssp_logits: dimension mismatch");
    const TestProjection p = project_test(model_, f_test);
    VectorD out = zero_shot_logits(spec_.text_term_source == TextTermSource::tex ? p.f_tex : p.f_vis, text_);
    if (spec_.kind == ClassifierKind::ssp_cache) {
      const VectorD affinity = zero_shot_logits(p.f_vis, train_);
      const VectorD phi = (-spec_.beta * (1.0 - affinity.array())).exp().matrix();
      out += spec_.alpha * (labels_.transpose() * phi);
    }
    if (diag) *diag = p;
    return out;
  }

 private:
  const SspModel& model_;
  ClassifierSpec spec_;
  MatrixD labels_;
  RowMatrixD text_;
  RowMatrixD train_;
};

/// Cosine zero-shot against the bank's own text features.
class RawClassifier {
 public:
  explicit RawClassifier(const RowMatrixD& text) : text_(normalized_rows(text, "text")) {}
  VectorD logits(const VectorD& f_test) const { return zero_shot_logits(normalized(f_test), text_); }

 private:
  RowMatrixD text_;
};

inline VectorD ssp_logits(const SspModel& model, const ClassifierSpec& spec, const MatrixD& labels_onehot,
                          const VectorD& f_test) {
  return SspClassifier(model, spec, labels_onehot).logits(f_test);
}

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes without test rows
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  double logit_min = 0.0, logit_max = 0.0, logit_mean = 0.0;
  std::optional<double> routing_accuracy;  // share of test rows routed to their own class
  std::vector<std::size_t> predictions;
  ClassifierSpec spec;
  double timing_ms = 0.0;

  /// `timing_ms` is wall-clock and therefore non-deterministic; it is emitted
  /// as null unless asked for.
  json to_json(bool include_timing = false) const {
    json j = {{"accuracy", accuracy},
              {"per_class_accuracy", per_class_accuracy},
              {"confusion", confusion},
              {"logit_stats", {{"min", logit_min}, {"max", logit_max}, {"mean", logit_mean}}},
              {"spec", spec.to_json()},
              {"timing_ms", include_timing ? json(timing_ms) : json(nullptr)}};
    if (routing_accuracy) j["routing_accuracy"] = *routing_accuracy;
    return j;
  }
};

/// Classifies every test row of the bank. `model` may be null for raw-zeroshot.
inline EvalReport evaluate(const FeatureBank& bank, const SspModel* model, const ClassifierSpec& spec) {
  const auto start = std::chrono::steady_clock::now();
  spec.validate();
  if (bank.M() == 0) throw DomainError("evaluate: empty test set");
  const bool uses_model = spec.kind != ClassifierKind::raw_zeroshot;
  if (uses_model && !model) throw DomainError("evaluate: " + to_string(spec.kind) + " needs a model");
  if (model) {
    model->check_provenance(bank);
    require_shape(model->d() == bank.d() && model->N() == bank.N(), "evaluate: model and bank shapes disagree");
  }

  const std::size_t n = bank.N(), m = bank.M();
  std::optional<SspClassifier> ssp;
  std::optional<RawClassifier> raw;
  if (uses_model)
    ssp.emplace(*model, spec);
  else
    raw.emplace(bank.text.cast<double>());

  std::vector<VectorD> logits(m);
  std::vector<std::size_t> routed(m, 0);
  parallel_for(m, [&](std::size_t t) {
    const VectorD f = bank.test_row(t);
    if (ssp) {
      TestProjection diag;
      logits[t] = ssp->logits(f, &diag);
      routed[t] = diag.routed;
    } else {
      logits[t] = raw->logits(f);
    }
  });

  EvalReport rep;
  rep.spec = spec;
  rep.confusion.assign(n, std::vector<std::size_t>(n, 0));
  rep.predictions.resize(m);
  rep.logit_min = std::numeric_limits<double>::infinity();
  rep.logit_max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  std::size_t correct = 0, routed_ok = 0;
  for (std::size_t t = 0; t < m; ++t) {
    const auto truth = static_cast<std::size_t>(bank.test_labels[t]);
    const std::size_t pred = argmax(logits[t]);
    rep.predictions[t] = pred;
    ++rep.confusion[truth][pred];
    correct += pred == truth;
    routed_ok += routed[t] == truth;
    rep.logit_min = std::min(rep.logit_min, logits[t].minCoeff());
    rep.logit_max = std::max(rep.logit_max, logits[t].maxCoeff());
    for (Eigen::Index i = 0; i < logits[t].size(); ++i) sum += logits[t][i];
  }
  rep.logit_mean = sum / static_cast<double>(m * n);
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(m);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t total = 0;
    for (auto c : rep.confusion[i]) total += c;
    rep.per_class_accuracy.push_back(total == 0 ? std::numeric_limits<double>::quiet_NaN()
                                                : static_cast<double>(rep.confusion[i][i]) / static_cast<double>(total));
  }
  if (uses_model) rep.routing_accuracy = static_cast<double>(routed_ok) / static_cast<double>(m);
  rep.timing_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

inline EvalReport evaluate(const FeatureBank& bank, const SspModel& model, const ClassifierSpec& spec) {
  return evaluate(bank, &model, spec);
}

}  // namespace ssp
