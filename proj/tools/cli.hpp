#pragma once

// Command-line front end. Kept as a header so tests can drive it in-process.
//
// Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error,
// 3 model/bank provenance mismatch.

#include "ssp/ssp.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace ssp::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kUsage = 2, kProvenance = 3 };

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Data goes to `path`, or to `out` when path is "-".
inline void write_output(const std::string& path, std::string_view data, std::ostream& out) {
  if (path == "-") {
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
  } else {
    binio::write_file(path, data);
  }
}

/// Throws UsageError instead of the library's DomainError for argument checks.
template <class Fn>
void check_args(Fn&& fn) {
  try {
    fn();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

struct ConfigFlags {
  std::optional<std::size_t> q, c, rank, r_vis, r_tex;
  double rank_tol = 1e-6;

  void add(CLI::App* app) {
    app->add_option("--q", q, "vision regions per sample (default min(40, h*w))");
    app->add_option("--c", c, "language regions per shot (default min(40, h*w))");
    app->add_option("--rank", rank, "requested components for both subspaces (default min(900, d))");
    app->add_option("--r-vis", r_vis, "requested vision components (overrides --rank)");
    app->add_option("--r-tex", r_tex, "requested language components (overrides --rank)");
    app->add_option("--rank-tol", rank_tol, "relative singular-value cutoff for the numerical rank");
  }

  SspConfig resolve(const FeatureBank& bank) const {
    SspConfig cfg = SspConfig::defaults_for(bank.manifest);
    if (q) cfg.q = *q;
    if (c) cfg.c = *c;
    if (rank) cfg.r_vis = cfg.r_tex = *rank;
    if (r_vis) cfg.r_vis = *r_vis;
    if (r_tex) cfg.r_tex = *r_tex;
    cfg.rank_rel_tol = rank_tol;
    check_args([&] { cfg.validate(bank.cells()); });
    return cfg;
  }
};

struct ClassifierFlags {
  std::string kind = "ssp-zeroshot";
  double alpha = 1.0;
  double beta = 5.5;
  std::string text_source = "tex";

  void add(CLI::App* app) {
    app->add_option("--classifier", kind, "raw-zeroshot | ssp-zeroshot | ssp-cache")
        ->check(CLI::IsMember({"raw-zeroshot", "ssp-zeroshot", "ssp-cache"}));
    app->add_option("--alpha", alpha, "cache blend weight");
    app->add_option("--beta", beta, "cache sharpness");
    app->add_option("--text-source", text_source, "test feature used against the text rows: tex | vis")
        ->check(CLI::IsMember({"tex", "vis"}));
  }

  ClassifierSpec resolve() const {
    ClassifierSpec spec;
    spec.kind = kind == "raw-zeroshot"   ? ClassifierKind::raw_zeroshot
                : kind == "ssp-cache"    ? ClassifierKind::ssp_cache
                                         : ClassifierKind::ssp_zeroshot;
    spec.alpha = alpha;
    spec.beta = beta;
    spec.text_term_source = text_source == "vis" ? TextTermSource::vis : TextTermSource::tex;
    check_args([&] { spec.validate(); });
    return spec;
  }
};

inline std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(item, &pos);
      if (pos != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("expected a comma-separated list of positive integers, got '" + s + "'");
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(int argc, const char* const* argv) {
    CLI::App app{"Selective subspace projection for vision-language embeddings"};
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = all cores); results do not depend on it");

    SynthParams synth;
    std::vector<std::size_t> grid{7, 7};
    std::string out_path = "-";
    std::string bank_path, model_path;
    ConfigFlags cfg_flags;
    ClassifierFlags cls_flags;
    bool timing = false;

    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic feature bank with an injected modality gap");
    synth_cmd->add_option("--classes", synth.num_classes, "number of classes N");
    synth_cmd->add_option("--shots", synth.shots, "shots per class K");
    synth_cmd->add_option("--test", synth.num_test, "number of test features M");
    synth_cmd->add_option("--dim", synth.dim, "embedding dimension d");
    synth_cmd->add_option("--grid", grid, "local grid h w")->expected(2);
    synth_cmd->add_option("--gap-angle", synth.gap_angle_deg, "text/image gap angle in degrees, [0, 180)");
    synth_cmd->add_option("--kappa", synth.noise_kappa, "vMF concentration of the feature noise");
    synth_cmd->add_option("--foreground", synth.foreground_fraction, "share of local cells around the prototype");
    synth_cmd->add_option("--seed", synth.seed, "random seed");
    synth_cmd->add_option("--out", out_path, "output bank directory")->required();

    auto* build_cmd = app.add_subcommand("build", "build the SSP model (projectors and aligned features)");
    build_cmd->add_option("--bank", bank_path, "feature bank directory")->required();
    build_cmd->add_option("--out", out_path, "model file ('-' for stdout)")->required();
    cfg_flags.add(build_cmd);

    auto* classify_cmd = app.add_subcommand("classify", "evaluate a classifier on the bank's test split");
    classify_cmd->add_option("--bank", bank_path, "feature bank directory")->required();
    classify_cmd->add_option("--model", model_path, "model file (not needed for raw-zeroshot)");
    classify_cmd->add_option("--out", out_path, "report JSON ('-' for stdout)");
    classify_cmd->add_flag("--timing", timing, "record wall-clock time in the report");
    cls_flags.add(classify_cmd);

    auto* gap_cmd = app.add_subcommand("gap", "vMF modality-gap metrics, before and (with --model) after alignment");
    gap_cmd->add_option("--bank", bank_path, "feature bank directory")->required();
    gap_cmd->add_option("--model", model_path, "model file");
    gap_cmd->add_option("--out", out_path, "report JSON ('-' for stdout)");

    std::size_t map_class = 0, map_shot = 0;
    std::optional<std::size_t> map_test;
    std::string map_ref = "text";
    bool map_normalized = false;
    auto* simmap_cmd = app.add_subcommand("simmap", "similarity map between a reference feature and a local grid");
    simmap_cmd->add_option("--bank", bank_path, "feature bank directory")->required();
    simmap_cmd->add_option("--class", map_class, "class index");
    simmap_cmd->add_option("--shot", map_shot, "shot index of the training sample");
    simmap_cmd->add_option("--test-index", map_test, "use this test sample's grid instead (needs test_local)");
    simmap_cmd->add_option("--ref", map_ref, "reference: text | image | aligned-text")
        ->check(CLI::IsMember({"text", "image", "aligned-text"}));
    simmap_cmd->add_option("--model", model_path, "model file (for --ref aligned-text)");
    simmap_cmd->add_flag("--normalized", map_normalized, "min-max normalize the map to [0, 1]");
    simmap_cmd->add_option("--out", out_path, "map JSON ('-' for stdout)");

    std::string sweep_param = "rank", sweep_values;
    auto* sweep_cmd = app.add_subcommand("sweep", "build + classify over a grid of Q, C or rank values (CSV)");
    sweep_cmd->add_option("--bank", bank_path, "feature bank directory")->required();
    sweep_cmd->add_option("--param", sweep_param, "q | c | rank")->check(CLI::IsMember({"q", "c", "rank"}));
    sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep_cmd->add_option("--out", out_path, "CSV ('-' for stdout)");
    cfg_flags.add(sweep_cmd);
    cls_flags.add(sweep_cmd);

    std::string ablate_shots;
    auto* ablate_cmd = app.add_subcommand("ablate", "projector on/off ablation over shot counts (CSV)");
    ablate_cmd->add_option("--bank", bank_path, "feature bank directory")->required();
    ablate_cmd->add_option("--shots", ablate_shots, "comma-separated shot counts (default: the bank's K)");
    ablate_cmd->add_option("--out", out_path, "CSV ('-' for stdout)");
    cfg_flags.add(ablate_cmd);
    cls_flags.add(ablate_cmd);

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out_, err_);
      return code == 0 ? kOk : kUsage;
    }

    try {
      thread_cap() = threads;
      if (*synth_cmd) return synth_run(synth, grid, out_path);
      if (*build_cmd) return build_run(bank_path, out_path, cfg_flags);
      if (*classify_cmd) return classify_run(bank_path, model_path, out_path, cls_flags, timing);
      if (*gap_cmd) return gap_run(bank_path, model_path, out_path);
      if (*simmap_cmd)
        return simmap_run(bank_path, model_path, out_path, map_class, map_shot, map_test, map_ref, map_normalized);
      if (*sweep_cmd) return sweep_run(bank_path, out_path, sweep_param, sweep_values, cfg_flags, cls_flags);
      if (*ablate_cmd) return ablate_run(bank_path, out_path, ablate_shots, cfg_flags, cls_flags);
    } catch (const UsageError& e) {
      err_ << "error: " << e.what() << "\n";
      return kUsage;
    } catch (const ProvenanceError& e) {
      err_ << "error: " << e.what() << "\n";
      return kProvenance;
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << "\n";
      return kRuntime;
    }
    return kUsage;
  }

 private:
  /// Human-readable summaries go to stdout unless stdout carries the data.
  std::ostream& info(const std::string& out_path) { return out_path == "-" ? err_ : out_; }

  int synth_run(SynthParams p, const std::vector<std::size_t>& grid, const std::string& out_path) {
    if (out_path == "-") throw UsageError("synth writes a directory; --out - is not supported");
    p.grid_h = grid.at(0);
    p.grid_w = grid.at(1);
    check_args([&] { p.validate(); });
    const FeatureBank bank = synth_bank(p);
    save_bank(bank, out_path);
    info(out_path) << "wrote " << out_path << ": N=" << bank.N() << " K=" << bank.K() << " M=" << bank.M()
                   << " d=" << bank.d() << " grid=" << p.grid_h << "x" << p.grid_w << " digest "
                   << ProvenanceError::hex(bank.digest()) << "\n";
    return kOk;
  }

  int build_run(const std::string& bank_path, const std::string& out_path, const ConfigFlags& flags) {
    const FeatureBank bank = load_bank(bank_path);
    const SspConfig cfg = flags.resolve(bank);
    const SspModel model = align(bank, cfg);
    if (model.vision.clamped())
      err_ << "warning: vision subspace clamped from " << cfg.r_vis << " to " << model.vision.rank()
           << " components (numerical rank)\n";
    for (std::size_t i = 0; i < model.N(); ++i)
      if (model.language[i].clamped())
        err_ << "warning: language subspace " << i << " clamped from " << cfg.r_tex << " to "
             << model.language[i].rank() << " components (" << model.language[i].source_rows << " rows)\n";
    write_output(out_path, serialize_model(model), out_);
    info(out_path) << "built model: vision rank " << model.vision.rank() << ", N=" << model.N() << ", digest "
                   << ProvenanceError::hex(model.provenance) << "\n";
    return kOk;
  }

  int classify_run(const std::string& bank_path, const std::string& model_path, const std::string& out_path,
                   const ClassifierFlags& flags, bool timing) {
    const ClassifierSpec spec = flags.resolve();
    if (spec.kind != ClassifierKind::raw_zeroshot && model_path.empty())
      throw UsageError("--model is required for " + to_string(spec.kind));
    const FeatureBank bank = load_bank(bank_path);
    std::optional<SspModel> model;
    if (!model_path.empty()) model = load_model(model_path);
    const EvalReport rep = evaluate(bank, model ? &*model : nullptr, spec);
    write_output(out_path, rep.to_json(timing).dump(2) + "\n", out_);
    info(out_path) << to_string(spec.kind) << " accuracy " << rep.accuracy << "\n";
    return kOk;
  }

  int gap_run(const std::string& bank_path, const std::string& model_path, const std::string& out_path) {
    const FeatureBank bank = load_bank(bank_path);
    std::optional<SspModel> model;
    if (!model_path.empty()) model = load_model(model_path);
    const GapReport rep = gap_report(bank, model ? &*model : nullptr);
    write_output(out_path, rep.to_json().dump(2) + "\n", out_);
    return kOk;
  }

  int simmap_run(const std::string& bank_path, const std::string& model_path, const std::string& out_path,
                 std::size_t cls, std::size_t shot, std::optional<std::size_t> test, const std::string& ref,
                 bool normalized_map) {
    const FeatureBank bank = load_bank(bank_path);
    if (cls >= bank.N()) throw UsageError("--class out of range");
    if (!test && shot >= bank.K()) throw UsageError("--shot out of range");
    if (test && *test >= bank.M()) throw UsageError("--test-index out of range");
    if (test && !bank.test_local) throw UsageError("bank has no test_local tensor; --test-index unavailable");

    VectorD reference;
    if (ref == "image") {
      reference = test ? bank.test_row(*test) : bank.global(cls, shot);
    } else if (ref == "aligned-text") {
      if (model_path.empty()) throw UsageError("--ref aligned-text needs --model");
      const SspModel model = load_model(model_path);
      model.check_provenance(bank);
      reference = normalized(model.aligned_text.row(static_cast<Eigen::Index>(cls)).transpose());
    } else {
      reference = bank.text_row(cls);
    }
    const RowMatrixD grid = test ? bank.test_local_grid(*test) : bank.local_grid(cls, shot);
    const RowMatrixD map = similarity_map(reference, grid, bank.manifest.grid_h, bank.manifest.grid_w, normalized_map);

    json rows = json::array();
    for (Eigen::Index r = 0; r < map.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < map.cols(); ++c) row.push_back(map(r, c));
      rows.push_back(row);
    }
    json j = {{"class", cls}, {"h", bank.manifest.grid_h}, {"w", bank.manifest.grid_w}, {"map", rows},
              {"ref", ref},   {"normalized", normalized_map}};
    if (test) {
      j["shot"] = nullptr;
      j["test"] = *test;
    } else {
      j["shot"] = shot;
    }
    write_output(out_path, j.dump(2) + "\n", out_);
    return kOk;
  }

  int sweep_run(const std::string& bank_path, const std::string& out_path, const std::string& param,
                const std::string& values, const ConfigFlags& cfg_flags, const ClassifierFlags& cls_flags) {
    const auto list = parse_list(values);
    const ClassifierSpec spec = cls_flags.resolve();
    const FeatureBank bank = load_bank(bank_path);
    const SspConfig base = cfg_flags.resolve(bank);
    const SweepParam p = param == "q" ? SweepParam::q : param == "c" ? SweepParam::c : SweepParam::rank;
    for (auto v : list) {
      SspConfig probe = base;
      if (p == SweepParam::q) probe.q = v;
      if (p == SweepParam::c) probe.c = v;
      if (p == SweepParam::rank) probe.r_vis = probe.r_tex = v;
      check_args([&] { probe.validate(bank.cells()); });
    }
    write_output(out_path, sweep_csv(p, run_sweep(bank, base, spec, p, list)), out_);
    return kOk;
  }

  int ablate_run(const std::string& bank_path, const std::string& out_path, const std::string& shots,
                 const ConfigFlags& cfg_flags, const ClassifierFlags& cls_flags) {
    const ClassifierSpec spec = cls_flags.resolve();
    if (spec.kind == ClassifierKind::raw_zeroshot) throw UsageError("ablate needs an SSP classifier");
    const FeatureBank bank = load_bank(bank_path);
    const SspConfig cfg = cfg_flags.resolve(bank);
    const auto list = shots.empty() ? std::vector<std::size_t>{bank.K()} : parse_list(shots);
    for (auto k : list)
      if (k > bank.K()) throw UsageError("--shots value exceeds the bank's K");
    write_output(out_path, ablation_csv(run_ablation(bank, cfg, spec, list)), out_);
    return kOk;
  }

  std::ostream& out_;
  std::ostream& err_;
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return Runner(out, err).run(argc, argv);
}

}  // namespace ssp::cli
