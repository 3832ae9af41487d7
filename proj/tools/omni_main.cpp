// omni: command-line front end. Every stage reads and writes manifests so
// stages can be run one at a time or chained by `pipeline`.
//
// Exit codes: 0 success, 1 validation error (bad input or arguments),
// 2 runtime error (training divergence, I/O failure, degenerate models).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "omni/config.hpp"
#include "omni/dedup.hpp"
#include "omni/error.hpp"
#include "omni/eval.hpp"
#include "omni/featurize.hpp"
#include "omni/filtering.hpp"
#include "omni/inflate.hpp"
#include "omni/manifest_io.hpp"
#include "omni/pipeline.hpp"
#include "omni/synth.hpp"
#include "omni/teacher.hpp"
#include "omni/trainer.hpp"
#include "omni/trim.hpp"

namespace fs = std::filesystem;
using namespace omni;

namespace {

/// Flag beats OMNI_SEED beats the config file.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t from_config) {
  if (flag) return *flag;
  if (auto env = seed_from_environment()) return *env;
  return from_config;
}

/// Keeps stored features when they already match the featurizer, otherwise
/// recomputes them from the frames.
Manifest with_features(const Manifest& m, const FeaturizerConfig& fc) {
  bool ready = !m.empty();
  for (const auto& s : m.samples) ready = ready && s.feature && s.feature->dims() == fc.dims();
  if (ready) return m;
  Manifest out = featurize_manifest(m, fc);
  out.feature_dims = out.empty() ? 0 : fc.dims();
  return out;
}

std::vector<ClassifierModel> load_models(const std::string& list) {
  std::vector<ClassifierModel> models;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) models.push_back(ClassifierModel::load(item));
  }
  if (models.empty()) throw ValidationError("--teacher needs at least one model path");
  return models;
}

void write_records(const std::vector<TrainRecord>& records, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& r : records) out << r.to_json().dump() << '\n';
  if (!out) throw RuntimeError("cannot write " + path.string());
}

FlatConfig optional_config(const std::string& path) {
  return path.empty() ? FlatConfig{} : FlatConfig::load(path);
}

nlohmann::json evaluation_json(const Evaluation& e, const std::string& model_path) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : confusion_pairs(e.matrix)) pairs.push_back({{"i", p.i}, {"j", p.j}, {"score", p.score}});
  return {{"model", model_path}, {"top1", e.top1}, {"top5", e.top5}, {"matrix", e.matrix.to_json()}, {"pairs", pairs}};
}

ConfusionMatrix matrix_from_json(const nlohmann::json& rows) {
  if (!rows.is_array() || rows.empty()) throw ValidationError("report has no confusion matrix");
  const std::size_t k = rows.size();
  std::vector<std::uint64_t> counts;
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != k) throw ValidationError("confusion matrix must be square");
    for (const auto& v : row) counts.push_back(v.get<std::uint64_t>());
  }
  return ConfusionMatrix(k, std::move(counts));
}

// ---------------------------------------------------------------------------

struct GenSynthArgs {
  std::string out;
  std::string spec;
  std::optional<std::uint64_t> seed;
};

void gen_synth(const GenSynthArgs& a) {
  const SynthSpec spec = a.spec.empty() ? SynthSpec{} : SynthSpec::from_json(read_json_file(a.spec));
  const std::uint64_t seed = resolve_seed(a.seed, 0);
  const SynthData data = generate_synthetic(spec, seed);
  save_synthetic(data, spec, a.out);
  std::cout << "wrote synthetic data (seed " << seed << ") to " << a.out << '\n';
}

struct DedupArgs {
  std::string pool, refs, out, report;
  std::optional<double> threshold;
  std::optional<std::uint64_t> seed;
  std::string fit = "union";
  bool no_whiten = false;
  int crops = 4;
};

void dedup(const DedupArgs& a) {
  DedupConfig c;
  c.threshold_override = a.threshold;
  c.seed = resolve_seed(a.seed, 0);
  c.whiten = !a.no_whiten;
  c.crops_per_frame = a.crops;
  if (a.fit == "references") c.fit = WhitenFit::kReferences;
  else if (a.fit != "union") throw ValidationError("--fit must be 'union' or 'references'");
  const auto r = dedup_pool(load_manifest(a.pool), load_manifest(a.refs), c);
  save_manifest(r.clean, a.out);
  write_json_file(r.report.to_json(), a.report);
  std::cout << "flagged " << r.report.flagged << " of " << r.report.pool_size << " (threshold " << r.report.threshold
            << ")\n";
}

struct TeacherArgs {
  std::string target, val, config, out_model, report;
  std::optional<std::uint64_t> seed;
};

void train_teacher(const TeacherArgs& a) {
  const FlatConfig cfg = optional_config(a.config);
  const ModelSpec spec = model_spec_from(cfg, "model");
  const OptimizerConfig opt = optimizer_from(cfg, "teacher", PipelineConfig::default_teacher_optimizer());
  const std::uint64_t seed = resolve_seed(a.seed, cfg.get_uint("seed").value_or(0));
  const Manifest target = with_features(load_manifest(a.target), spec.featurizer);
  const TrainedClassifier t = train_classifier(target, opt, seed, spec);
  t.model.save(a.out_model);
  nlohmann::json report = {{"seed", seed}, {"final_loss", t.final_loss}, {"epoch_losses", t.epoch_losses}};
  if (!a.val.empty()) {
    const Evaluation e = evaluate(t.model, with_features(load_manifest(a.val), spec.featurizer));
    report["val_top1"] = e.top1;
    report["val_top5"] = e.top5;
    std::cout << "teacher validation top-1 " << e.top1 << '\n';
  }
  if (!a.report.empty()) write_json_file(report, a.report);
}

struct FilterArgs {
  std::string pool, teacher, out, report;
  double threshold = 0.5;
  bool per_frame = false;
};

void filter(const FilterArgs& a) {
  const auto teachers = load_models(a.teacher);
  FilterConfig c;
  c.threshold = a.threshold;
  c.per_frame = a.per_frame;
  c.teacher_kind = teachers.front().consensus() == Consensus::kStackK ? TeacherKind::k3d : TeacherKind::k2d;
  const auto r = filter_pool(load_manifest(a.pool), teachers, c);
  save_manifest(r.auxiliary, a.out);
  if (!a.report.empty()) write_json_file(r.report.to_json(), a.report);
  std::cout << "kept " << r.report.kept << " of " << r.report.pool_size << " (rejection rate "
            << r.report.rejection_rate() << ")\n";
}

struct InflateArgs {
  std::string in, mode = "replicate", warp_model, out, fill = "edge-clamp";
  int clip_len = 8;
  std::vector<double> speed{1.0, 0.0};
  double range = 1.0;
  std::optional<std::uint64_t> seed;
};

void inflate(const InflateArgs& a) {
  InflateConfig c;
  c.mode = parse_inflate_mode(a.mode);
  c.clip_len = a.clip_len;
  if (a.speed.size() != 2) throw ValidationError("--speed takes two values: dx dy");
  c.speed_x = a.speed[0];
  c.speed_y = a.speed[1];
  c.translate_range = a.range;
  c.fill.policy = parse_fill_policy(a.fill);
  if (!a.warp_model.empty()) c.warp_models = load_warp_models(a.warp_model);
  const Manifest out = inflate_manifest(load_manifest(a.in), c, resolve_seed(a.seed, 0));
  save_manifest(out, a.out);
  std::cout << "inflated " << out.size() << " images into " << c.clip_len << "-frame clips\n";
}

struct FitWarpArgs {
  std::string sequences, out;
  std::optional<int> cls;
};

void fit_warp(const FitWarpArgs& a) {
  const auto seqs = sequences_from_json(read_json_file(a.sequences));
  const WarpModel m = fit_warp_model(seqs, a.cls);
  save_warp_models(std::vector<WarpModel>{m}, a.out);
}

struct TrimArgs {
  std::string mode, in, teacher, out, report;
  double threshold = 0.5;
  double sample_fps = 1.0;
  int n_pos = 1, n_neg = 2;
  double clip_seconds = 10.0;
  std::optional<std::uint64_t> seed;
};

void trim(const TrimArgs& a) {
  const Manifest pool = load_manifest(a.in);
  const ClassifierModel teacher = ClassifierModel::load(a.teacher);
  TrimResult r;
  if (a.mode == "snippets") {
    SnippetConfig c;
    c.threshold = a.threshold;
    c.sample_fps = a.sample_fps;
    c.n_pos = a.n_pos;
    c.n_neg = a.n_neg;
    r = snippets_from_pool(pool, teacher, c, resolve_seed(a.seed, 0));
  } else {
    ClipConfig c;
    c.threshold = a.threshold;
    c.clip_seconds = a.clip_seconds;
    r = clips_from_pool(pool, teacher, c);
  }
  save_manifest(r.auxiliary, a.out);
  if (!a.report.empty()) write_json_file(r.report.to_json(), a.report);
  std::cout << "emitted " << r.report.emitted << " " << a.mode << " from " << r.report.videos << " videos\n";
}

struct TrainArgs {
  std::string target, aux, val, config, out_model, log;
  std::optional<std::uint64_t> seed;
};

void train(const TrainArgs& a) {
  const FlatConfig cfg = optional_config(a.config);
  const ModelSpec spec = model_spec_from(cfg, "model");
  const OptimizerConfig opt = optimizer_from(cfg, "student", PipelineConfig::default_student_optimizer());
  const SamplerConfig sc = sampler_from(cfg, "sampler");
  const MixupConfig mix = mixup_from(cfg, "mixup");
  const std::uint64_t seed = resolve_seed(a.seed, cfg.get_uint("seed").value_or(0));
  const Manifest target = with_features(load_manifest(a.target), spec.featurizer);
  const Manifest aux = a.aux.empty() ? Manifest{} : with_features(load_manifest(a.aux), spec.featurizer);
  std::optional<Manifest> val;
  if (!a.val.empty()) val = with_features(load_manifest(a.val), spec.featurizer);
  const StudentResult r = train_student(target, aux, opt, sc, mix, val ? &*val : nullptr, seed, spec);
  r.model.save(a.out_model);
  if (!a.log.empty()) write_records(r.records, a.log);
  if (!r.records.empty() && r.records.back().val_top1) {
    std::cout << "validation top-1 " << *r.records.back().val_top1 << '\n';
  }
}

struct EvalArgs {
  std::string model, data, baseline, report;
};

void eval(const EvalArgs& a) {
  const ClassifierModel model = ClassifierModel::load(a.model);
  const Manifest data = with_features(load_manifest(a.data), model.featurizer());
  const Evaluation e = evaluate(model, data);
  nlohmann::json report = evaluation_json(e, a.model);
  if (!a.baseline.empty()) {
    const ClassifierModel base = ClassifierModel::load(a.baseline);
    const Evaluation b = evaluate(base, with_features(load_manifest(a.data), base.featurizer()));
    report["baseline"] = evaluation_json(b, a.baseline);
    report["confusion"] = confusion_delta(e.matrix, b.matrix, a.model, a.baseline).to_json(data.label_space.names());
  }
  write_json_file(report, a.report);
  std::cout << "top-1 " << e.top1 << "  top-5 " << e.top5 << '\n';
}

struct ConfusionArgs {
  std::string omni, base, out;
  std::size_t improved = 5, regressed = 2;
};

void report_confusion(const ConfusionArgs& a) {
  const nlohmann::json o = read_json_file(a.omni);
  const nlohmann::json b = read_json_file(a.base);
  if (!o.contains("matrix") || !b.contains("matrix")) throw ValidationError("inputs must be eval reports");
  const ConfusionReport r = confusion_delta(matrix_from_json(o["matrix"]), matrix_from_json(b["matrix"]),
                                            o.value("model", a.omni), b.value("model", a.base));
  nlohmann::json j = r.to_json();
  auto rows = [](const std::vector<PairDelta>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : v) arr.push_back({{"i", p.i}, {"j", p.j}, {"delta", p.delta}});
    return arr;
  };
  j["most_improved"] = rows(r.most_improved(a.improved));
  j["most_regressed"] = rows(r.most_regressed(a.regressed));
  write_json_file(j, a.out);
  for (const auto& p : r.most_improved(a.improved)) {
    std::printf("improved  (%zu,%zu)  delta %+.4f\n", p.i, p.j, p.delta);
  }
  for (const auto& p : r.most_regressed(a.regressed)) {
    std::printf("regressed (%zu,%zu)  delta %+.4f\n", p.i, p.j, p.delta);
  }
}

struct PipelineArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
};

void pipeline(const PipelineArgs& a) {
  PipelineConfig c = load_pipeline_config(a.config);
  if (a.seed) {
    c.seed = *a.seed;
    c.dedup.seed = *a.seed;
  }
  const PipelineResult r = run_pipeline(c);
  std::cout << "teacher top-1 " << r.teacher_eval.top1 << '\n';
  for (const auto& p : r.pools) std::cout << p.pool << ": " << p.contributed << " auxiliary samples\n";
  std::cout << "student top-1 " << r.student_eval.top1;
  if (r.baseline_eval) std::cout << "  baseline top-1 " << r.baseline_eval->top1;
  std::cout << "\nartifacts in " << c.paths.output.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Webly supervised video classification at desk scale"};
  app.require_subcommand(1);

  GenSynthArgs gs;
  auto* c_gs = app.add_subcommand("gen-synth", "Generate a synthetic target set, web pools and camera motions");
  c_gs->add_option("--out", gs.out, "Output directory")->required();
  c_gs->add_option("--spec", gs.spec, "JSON file overriding SynthSpec fields");
  c_gs->add_option("--seed", gs.seed);

  DedupArgs dd;
  auto* c_dd = app.add_subcommand("dedup", "Remove pool samples that duplicate reference samples");
  c_dd->add_option("--pool", dd.pool)->required();
  c_dd->add_option("--refs", dd.refs)->required();
  c_dd->add_option("--threshold", dd.threshold, "Fixed similarity threshold (default: derived from crops)");
  c_dd->add_option("--out", dd.out)->required();
  c_dd->add_option("--report", dd.report)->required();
  c_dd->add_option("--fit", dd.fit, "Whitening fit set: union or references");
  c_dd->add_option("--crops", dd.crops, "Crops per frame for the derived threshold");
  c_dd->add_flag("--no-whiten", dd.no_whiten);
  c_dd->add_option("--seed", dd.seed);

  TeacherArgs tt;
  auto* c_tt = app.add_subcommand("train-teacher", "Train a classifier on the target set");
  c_tt->add_option("--target", tt.target)->required();
  c_tt->add_option("--val", tt.val);
  c_tt->add_option("--config", tt.config, "Reads [model], [teacher] and seed");
  c_tt->add_option("--out-model", tt.out_model)->required();
  c_tt->add_option("--report", tt.report);
  c_tt->add_option("--seed", tt.seed);

  FilterArgs fl;
  auto* c_fl = app.add_subcommand("filter", "Keep confidently scored pool samples and pseudo-label them");
  c_fl->add_option("--pool", fl.pool)->required();
  c_fl->add_option("--teacher", fl.teacher, "Model path, or comma-separated ensemble")->required();
  c_fl->add_option("--threshold", fl.threshold)->required();
  c_fl->add_option("--out", fl.out)->required();
  c_fl->add_option("--report", fl.report);
  c_fl->add_flag("--per-frame", fl.per_frame, "Score untrimmed videos by their best frame");

  InflateArgs in;
  auto* c_in = app.add_subcommand("inflate", "Turn images into pseudo clips");
  c_in->add_option("--in", in.in)->required();
  c_in->add_option("--mode", in.mode, "replicate, translate-random, translate-constant or warp")->required();
  c_in->add_option("--clip-len", in.clip_len)->required();
  c_in->add_option("--warp-model", in.warp_model);
  c_in->add_option("--speed", in.speed, "translate-constant step in pixels: dx dy")->expected(2);
  c_in->add_option("--range", in.range, "translate-random step bound in pixels");
  c_in->add_option("--fill", in.fill, "edge-clamp or constant");
  c_in->add_option("--out", in.out)->required();
  c_in->add_option("--seed", in.seed);

  FitWarpArgs fw;
  auto* c_fw = app.add_subcommand("fit-warp", "Fit a Gaussian warp model to homography sequences");
  c_fw->add_option("--sequences", fw.sequences)->required();
  c_fw->add_option("--class", fw.cls, "Fit on one class only");
  c_fw->add_option("--out", fw.out)->required();

  TrimArgs tr;
  auto* c_tr = app.add_subcommand("trim", "Turn untrimmed videos into snippets or clips");
  c_tr->add_option("mode", tr.mode, "snippets or clips")->required()->check(CLI::IsMember({"snippets", "clips"}));
  c_tr->add_option("--in", tr.in)->required();
  c_tr->add_option("--teacher", tr.teacher)->required();
  c_tr->add_option("--threshold", tr.threshold)->required();
  c_tr->add_option("--out", tr.out)->required();
  c_tr->add_option("--report", tr.report);
  c_tr->add_option("--sample-fps", tr.sample_fps);
  c_tr->add_option("--n-pos", tr.n_pos);
  c_tr->add_option("--n-neg", tr.n_neg);
  c_tr->add_option("--clip-seconds", tr.clip_seconds);
  c_tr->add_option("--seed", tr.seed);

  TrainArgs tn;
  auto* c_tn = app.add_subcommand("train", "Jointly train a student on target and auxiliary data");
  c_tn->add_option("--target", tn.target)->required();
  c_tn->add_option("--aux", tn.aux);
  c_tn->add_option("--val", tn.val);
  c_tn->add_option("--config", tn.config, "Reads [model], [student], [sampler], [mixup] and seed");
  c_tn->add_option("--out-model", tn.out_model)->required();
  c_tn->add_option("--log", tn.log, "JSON-Lines, one record per epoch");
  c_tn->add_option("--seed", tn.seed);

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Accuracy, confusion matrix and confusion scores");
  c_ev->add_option("--model", ev.model)->required();
  c_ev->add_option("--data", ev.data)->required();
  c_ev->add_option("--baseline-model", ev.baseline);
  c_ev->add_option("--report", ev.report)->required();

  ConfusionArgs cf;
  auto* c_cf = app.add_subcommand("report-confusion", "Confusion-score deltas between two eval reports");
  c_cf->add_option("--omni", cf.omni, "Eval report of the jointly trained model")->required();
  c_cf->add_option("--base", cf.base, "Eval report of the baseline model")->required();
  c_cf->add_option("--out", cf.out)->required();
  c_cf->add_option("--improved", cf.improved);
  c_cf->add_option("--regressed", cf.regressed);

  PipelineArgs pl;
  auto* c_pl = app.add_subcommand("pipeline", "Run every stage from a config file");
  c_pl->add_option("--config", pl.config)->required();
  c_pl->add_option("--seed", pl.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*c_gs) gen_synth(gs);
    else if (*c_dd) dedup(dd);
    else if (*c_tt) train_teacher(tt);
    else if (*c_fl) filter(fl);
    else if (*c_in) inflate(in);
    else if (*c_fw) fit_warp(fw);
    else if (*c_tr) trim(tr);
    else if (*c_tn) train(tn);
    else if (*c_ev) eval(ev);
    else if (*c_cf) report_confusion(cf);
    else if (*c_pl) pipeline(pl);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const RuntimeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
