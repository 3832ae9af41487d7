#include "omni/pipeline.hpp"

#include <fstream>
#include <set>

#include "omni/error.hpp"
#include "omni/featurize.hpp"
#include "omni/manifest_io.hpp"

namespace omni {

std::string_view to_string(TrimMode mode) { return mode == TrimMode::kClips ? "clips" : "snippets"; }

TrimMode parse_trim_mode(std::string_view text) {
  if (text == "snippets") return TrimMode::kSnippets;
  if (text == "clips") return TrimMode::kClips;
  throw ValidationError("unknown trim mode '" + std::string(text) + "'");
}

std::string_view to_string(WarpScope scope) {
  return scope == WarpScope::kSpecific ? "class-specific" : "class-agnostic";
}

WarpScope parse_warp_scope(std::string_view text) {
  if (text == "class-agnostic" || text == "agnostic") return WarpScope::kAgnostic;
  if (text == "class-specific" || text == "specific") return WarpScope::kSpecific;
  throw ValidationError("unknown warp scope '" + std::string(text) + "'");
}

OptimizerConfig PipelineConfig::default_teacher_optimizer() {
  OptimizerConfig c;
  c.lr_per_sample = 0.03;
  c.epochs = 60;
  c.schedule = ScheduleKind::kCosine;
  return c;
}

OptimizerConfig PipelineConfig::default_student_optimizer() {
  OptimizerConfig c;
  c.lr_per_sample = 0.01;
  c.epochs = 12;
  c.schedule = ScheduleKind::kCosine;
  return c;
}

void PipelineConfig::validate() const {
  if (paths.target.empty()) throw ValidationError("config: paths.target is required");
  if (paths.validation.empty()) throw ValidationError("config: paths.validation is required");
  if (paths.output.empty()) throw ValidationError("config: paths.output is required");
  std::set<std::filesystem::path> seen;
  for (const auto* p : {&paths.target, &paths.validation, &paths.images, &paths.trimmed, &paths.untrimmed,
                        &paths.homographies, &paths.output}) {
    if (p->empty()) continue;
    if (!seen.insert(p->lexically_normal()).second) {
      throw ValidationError("config: path '" + p->string() + "' is used twice");
    }
  }
  teacher.validate();
  student.validate();
  if (dedup_enabled) dedup.validate();
  filter.validate();
  if (inflate.clip_len < 1) throw ValidationError("config: inflate.clip_len must be >= 1");
  if (inflate.mode == InflateMode::kWarp && !paths.images.empty() && paths.homographies.empty()) {
    throw ValidationError("config: inflate mode 'warp' needs paths.homographies");
  }
  snippets.validate();
  clips.validate();
  sampler.validate();
  mixup.validate();
  if (model.kind == ModelKind::kMlp && model.hidden == 0) throw ValidationError("config: model.hidden must be >= 1");
  if (model.featurizer.grid < 1) throw ValidationError("config: model.grid must be >= 1");
}

nlohmann::json to_json(const ModelSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"hidden", spec.hidden},
          {"grid", spec.featurizer.grid},
          {"consensus", to_string(spec.featurizer.consensus)},
          {"stack_k", spec.featurizer.stack_k}};
}

nlohmann::json to_json(const OptimizerConfig& c) {
  return {{"lr_per_sample", c.lr_per_sample}, {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},   {"schedule", to_string(c.schedule)},
          {"milestones", c.milestones},       {"factor", c.factor},
          {"warmup_epochs", c.warmup_epochs}, {"epochs", c.epochs},
          {"batch_size", c.batch_size}};
}

nlohmann::json to_json(const SamplerConfig& c) {
  return {{"ratio", c.ratio.to_string()},
          {"batch_target", c.batch_target},
          {"resample", {{"kind", to_string(c.resample.kind)}, {"p", c.resample.p}, {"n_c", c.resample.n_c}}}};
}

nlohmann::json to_json(const MixupConfig& c) {
  return {{"enabled", c.enabled}, {"scope", to_string(c.scope)}, {"alpha", c.alpha}};
}

nlohmann::json PipelineConfig::to_json() const {
  auto path = [](const std::filesystem::path& p) { return p.generic_string(); };
  return {
      {"seed", seed},
      {"paths",
       {{"target", path(paths.target)},
        {"validation", path(paths.validation)},
        {"images", path(paths.images)},
        {"trimmed", path(paths.trimmed)},
        {"untrimmed", path(paths.untrimmed)},
        {"homographies", path(paths.homographies)},
        {"output", path(paths.output)}}},
      {"model", omni::to_json(model)},
      {"teacher", omni::to_json(teacher)},
      {"student", omni::to_json(student)},
      {"dedup",
       {{"enabled", dedup_enabled},
        {"crops_per_frame", dedup.crops_per_frame},
        {"crop_min_ratio", dedup.crop_min_ratio},
        {"crop_max_ratio", dedup.crop_max_ratio},
        {"whiten", dedup.whiten},
        {"fit", dedup.fit == WhitenFit::kUnion ? "union" : "references"},
        {"threshold", dedup.threshold_override ? nlohmann::json(*dedup.threshold_override) : nlohmann::json()},
        {"threshold_frames", dedup.threshold_frames}}},
      {"filter", {{"threshold", filter.threshold}}},
      {"inflate",
       {{"mode", to_string(inflate.mode)},
        {"clip_len", inflate.clip_len},
        {"speed_x", inflate.speed_x},
        {"speed_y", inflate.speed_y},
        {"translate_range", inflate.translate_range},
        {"fill", to_string(inflate.fill.policy)},
        {"fill_value", inflate.fill.value},
        {"warp_scope", to_string(warp_scope)}}},
      {"trim",
       {{"mode", to_string(trim_mode)},
        {"sample_fps", snippets.sample_fps},
        {"snippet_threshold", snippets.threshold},
        {"n_pos", snippets.n_pos},
        {"n_neg", snippets.n_neg},
        {"clip_seconds", clips.clip_seconds},
        {"clip_threshold", clips.threshold}}},
      {"sampler", omni::to_json(sampler)},
      {"mixup", omni::to_json(mixup)},
      {"eval", {{"baseline", train_baseline}}},
      {"overwrite", overwrite},
  };
}

namespace {

std::string key(const std::string& section, const char* name) {
  return section.empty() ? std::string(name) : section + "." + name;
}

template <typename T, typename Get>
void read(Get&& value, T& out) {
  if (auto v = value()) out = static_cast<T>(*v);
}

}  // namespace

ModelSpec model_spec_from(const FlatConfig& cfg, const std::string& section, ModelSpec spec) {
  if (auto v = cfg.get_string(key(section, "kind"))) spec.kind = parse_model_kind(*v);
  if (auto v = cfg.get_uint(key(section, "hidden"))) spec.hidden = *v;
  if (auto v = cfg.get_int(key(section, "grid"))) spec.featurizer.grid = static_cast<int>(*v);
  if (auto v = cfg.get_string(key(section, "consensus"))) spec.featurizer.consensus = parse_consensus(*v);
  if (auto v = cfg.get_int(key(section, "stack_k"))) spec.featurizer.stack_k = static_cast<int>(*v);
  return spec;
}

OptimizerConfig optimizer_from(const FlatConfig& cfg, const std::string& section, OptimizerConfig c) {
  read([&] { return cfg.get_double(key(section, "lr_per_sample")); }, c.lr_per_sample);
  read([&] { return cfg.get_double(key(section, "momentum")); }, c.momentum);
  read([&] { return cfg.get_double(key(section, "weight_decay")); }, c.weight_decay);
  if (auto v = cfg.get_string(key(section, "schedule"))) c.schedule = parse_schedule_kind(*v);
  if (auto v = cfg.get_doubles(key(section, "milestones"))) c.milestones = *v;
  read([&] { return cfg.get_double(key(section, "factor")); }, c.factor);
  read([&] { return cfg.get_int(key(section, "warmup_epochs")); }, c.warmup_epochs);
  read([&] { return cfg.get_int(key(section, "epochs")); }, c.epochs);
  read([&] { return cfg.get_uint(key(section, "batch_size")); }, c.batch_size);
  return c;
}

SamplerConfig sampler_from(const FlatConfig& cfg, const std::string& section) {
  SamplerConfig c;
  if (auto v = cfg.get_string(key(section, "ratio"))) c.ratio = BatchRatio::parse(*v);
  if (auto v = cfg.get_uint(key(section, "batch_target"))) c.batch_target = *v;
  if (auto v = cfg.get_string(key(section, "resample.kind"))) c.resample.kind = parse_resample_kind(*v);
  read([&] { return cfg.get_double(key(section, "resample.p")); }, c.resample.p);
  read([&] { return cfg.get_double(key(section, "resample.n_c")); }, c.resample.n_c);
  return c;
}

MixupConfig mixup_from(const FlatConfig& cfg, const std::string& section) {
  MixupConfig c;
  if (auto v = cfg.get_bool(key(section, "enabled"))) c.enabled = *v;
  if (auto v = cfg.get_string(key(section, "scope"))) c.scope = parse_mixup_scope(*v);
  read([&] { return cfg.get_double(key(section, "alpha")); }, c.alpha);
  return c;
}

PipelineConfig pipeline_config_from(const FlatConfig& cfg, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  auto path = [&](const char* name, std::filesystem::path& out) {
    if (auto v = cfg.get_string(std::string("paths.") + name)) {
      const std::filesystem::path p(*v);
      out = p.empty() || p.is_absolute() ? p : (base_dir / p).lexically_normal();
    }
  };
  if (auto v = cfg.get_uint("seed")) c.seed = *v;
  path("target", c.paths.target);
  path("validation", c.paths.validation);
  path("images", c.paths.images);
  path("trimmed", c.paths.trimmed);
  path("untrimmed", c.paths.untrimmed);
  path("homographies", c.paths.homographies);
  path("output", c.paths.output);

  c.model = model_spec_from(cfg, "model");
  c.teacher = optimizer_from(cfg, "teacher", PipelineConfig::default_teacher_optimizer());
  c.student = optimizer_from(cfg, "student", PipelineConfig::default_student_optimizer());

  if (auto v = cfg.get_bool("dedup.enabled")) c.dedup_enabled = *v;
  read([&] { return cfg.get_int("dedup.crops_per_frame"); }, c.dedup.crops_per_frame);
  read([&] { return cfg.get_double("dedup.crop_min_ratio"); }, c.dedup.crop_min_ratio);
  read([&] { return cfg.get_double("dedup.crop_max_ratio"); }, c.dedup.crop_max_ratio);
  if (auto v = cfg.get_bool("dedup.whiten")) c.dedup.whiten = *v;
  if (auto v = cfg.get_string("dedup.fit")) {
    if (*v == "union") c.dedup.fit = WhitenFit::kUnion;
    else if (*v == "references") c.dedup.fit = WhitenFit::kReferences;
    else throw ValidationError("config: dedup.fit must be 'union' or 'references'");
  }
  if (auto v = cfg.get_double("dedup.threshold")) c.dedup.threshold_override = *v;
  read([&] { return cfg.get_uint("dedup.threshold_frames"); }, c.dedup.threshold_frames);

  read([&] { return cfg.get_double("filter.threshold"); }, c.filter.threshold);

  if (auto v = cfg.get_string("inflate.mode")) c.inflate.mode = parse_inflate_mode(*v);
  read([&] { return cfg.get_int("inflate.clip_len"); }, c.inflate.clip_len);
  read([&] { return cfg.get_double("inflate.speed_x"); }, c.inflate.speed_x);
  read([&] { return cfg.get_double("inflate.speed_y"); }, c.inflate.speed_y);
  read([&] { return cfg.get_double("inflate.translate_range"); }, c.inflate.translate_range);
  if (auto v = cfg.get_string("inflate.fill")) c.inflate.fill.policy = parse_fill_policy(*v);
  read([&] { return cfg.get_double("inflate.fill_value"); }, c.inflate.fill.value);
  if (auto v = cfg.get_string("inflate.warp_scope")) c.warp_scope = parse_warp_scope(*v);

  if (auto v = cfg.get_string("trim.mode")) c.trim_mode = parse_trim_mode(*v);
  read([&] { return cfg.get_double("trim.sample_fps"); }, c.snippets.sample_fps);
  if (auto v = cfg.get_double("trim.threshold")) c.snippets.threshold = c.clips.threshold = *v;
  read([&] { return cfg.get_int("trim.n_pos"); }, c.snippets.n_pos);
  read([&] { return cfg.get_int("trim.n_neg"); }, c.snippets.n_neg);
  read([&] { return cfg.get_double("trim.clip_seconds"); }, c.clips.clip_seconds);

  c.sampler = sampler_from(cfg, "sampler");
  c.mixup = mixup_from(cfg, "mixup");
  if (auto v = cfg.get_bool("eval.baseline")) c.train_baseline = *v;
  if (auto v = cfg.get_bool("overwrite")) c.overwrite = *v;

  cfg.reject_unread();
  c.dedup.featurizer.grid = c.model.featurizer.grid;
  c.dedup.seed = c.seed;
  c.filter.teacher_kind = c.model.featurizer.consensus == Consensus::kStackK ? TeacherKind::k3d : TeacherKind::k2d;
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  FlatConfig cfg = FlatConfig::load(path);
  if (auto seed = seed_from_environment()) cfg.set("seed", std::to_string(*seed));
  return pipeline_config_from(cfg, path.parent_path());
}

PipelineInputs load_pipeline_inputs(const PipelineConfig& config) {
  PipelineInputs in;
  in.target = load_manifest(config.paths.target);
  in.validation = load_manifest(config.paths.validation);
  auto pool = [](const std::filesystem::path& p) -> std::optional<Manifest> {
    if (p.empty()) return std::nullopt;
    return load_manifest(p);
  };
  in.images = pool(config.paths.images);
  in.trimmed = pool(config.paths.trimmed);
  in.untrimmed = pool(config.paths.untrimmed);
  if (!config.paths.homographies.empty()) in.sequences = sequences_from_json(read_json_file(config.paths.homographies));
  return in;
}

nlohmann::json PoolOutcome::to_json() const {
  nlohmann::json j = {{"pool", pool}, {"contributed", contributed}};
  if (dedup) j["dedup"] = {{"pool_size", dedup->pool_size}, {"flagged", dedup->flagged}, {"threshold", dedup->threshold}};
  if (filter) j["filter"] = filter->to_json();
  if (trim) j["trim"] = trim->to_json();
  return j;
}

namespace {

/// Runs one stage, prefixing errors with the stage name. The error class
/// is kept so the CLI can still map it to the right exit code.
template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError("stage '" + name + "': " + e.what());
  } catch (const RuntimeError& e) {
    throw RuntimeError("stage '" + name + "': " + e.what());
  } catch (const std::exception& e) {
    throw RuntimeError("stage '" + name + "': " + e.what());
  }
}

/// Writes artifacts under the output directory and appends one JSON line
/// per finished stage to pipeline.log. Nothing time-dependent is logged.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(const std::filesystem::path* dir) : dir_(dir) {
    if (!dir_) return;
    std::filesystem::create_directories(*dir_);
    log_.open(*dir_ / "pipeline.log", std::ios::binary | std::ios::trunc);
    if (!log_) throw RuntimeError("cannot open " + (*dir_ / "pipeline.log").string());
  }

  bool enabled() const { return dir_ != nullptr; }

  void manifest(const std::string& rel, const Manifest& m) {
    if (dir_) save_manifest(m, prepare(rel));
  }
  void json(const std::string& rel, const nlohmann::json& j) {
    if (dir_) write_json_file(j, prepare(rel));
  }
  void model(const std::string& rel, const ClassifierModel& m) {
    if (dir_) m.save(prepare(rel));
  }
  void records(const std::string& rel, const std::vector<TrainRecord>& records) {
    if (!dir_) return;
    std::ofstream out(prepare(rel), std::ios::binary | std::ios::trunc);
    for (const auto& r : records) out << r.to_json().dump() << '\n';
    if (!out) throw RuntimeError("cannot write " + rel);
  }
  void log(const nlohmann::json& event) {
    if (!dir_) return;
    log_ << event.dump() << '\n';
    log_.flush();
    if (!log_) throw RuntimeError("cannot write pipeline.log");
  }

 private:
  std::filesystem::path prepare(const std::string& rel) {
    const auto p = *dir_ / rel;
    std::filesystem::create_directories(p.parent_path());
    return p;
  }

  const std::filesystem::path* dir_;
  std::ofstream log_;
};

Manifest with_prefixed_ids(Manifest m, const std::string& pool) {
  for (auto& s : m.samples) s.id = pool + "/" + s.id;
  return m;
}

std::vector<WarpModel> warp_models_for(const PipelineConfig& config, const std::vector<HomographySequence>& seqs,
                                       std::size_t num_classes) {
  std::vector<WarpModel> models;
  if (config.warp_scope == WarpScope::kSpecific) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      std::size_t n = 0;
      for (const auto& s : seqs) {
        if (s.class_index && *s.class_index == static_cast<int>(c)) n += s.steps.size();
      }
      if (n >= 2) models.push_back(fit_warp_model(seqs, static_cast<int>(c)));
    }
  }
  // The class-agnostic model backs up classes without their own fit.
  models.push_back(fit_warp_model(seqs));
  return models;
}

nlohmann::json eval_json(const Evaluation& e) {
  return {{"top1", e.top1}, {"top5", e.top5}, {"matrix", e.matrix.to_json()}};
}

}  // namespace

PipelineResult run_experiment(const PipelineInputs& inputs, const PipelineConfig& config,
                              const std::filesystem::path* out_dir) {
  config.validate();
  ArtifactWriter out(out_dir);
  PipelineResult result;
  const FeaturizerConfig& fc = config.model.featurizer;
  const std::size_t k = inputs.target.label_space.size();

  out.json("00_config.json", config.to_json());

  Manifest target;
  Manifest validation;
  stage("featurize", [&] {
    if (inputs.target.role != ManifestRole::kTarget) throw ValidationError("paths.target is not a target manifest");
    if (inputs.validation.role != ManifestRole::kValidation) {
      throw ValidationError("paths.validation is not a validation manifest");
    }
    if (inputs.validation.label_space != inputs.target.label_space) {
      throw ValidationError("target and validation label spaces differ");
    }
    target = featurize_manifest(inputs.target, fc);
    validation = featurize_manifest(inputs.validation, fc);
  });

  struct Pool {
    std::string name;
    const std::optional<Manifest>* input;
  };
  const std::vector<Pool> pools = {{"images", &inputs.images}, {"trimmed", &inputs.trimmed}, {"untrimmed", &inputs.untrimmed}};

  // Dedup against everything the student is trained or evaluated on.
  std::vector<std::optional<Manifest>> clean(pools.size());
  Manifest references = inputs.target;
  references.samples.insert(references.samples.end(), inputs.validation.samples.begin(), inputs.validation.samples.end());
  for (std::size_t p = 0; p < pools.size(); ++p) {
    if (!pools[p].input->has_value()) continue;
    const Manifest& pool = **pools[p].input;
    result.pools.push_back({pools[p].name, {}, {}, {}, 0});
    stage("dedup/" + pools[p].name, [&] {
      if (pool.role != ManifestRole::kWebPool) throw ValidationError("not a web pool manifest");
      if (pool.label_space != inputs.target.label_space) throw ValidationError("label space differs from the target");
      if (!config.dedup_enabled) {
        clean[p] = pool;
        return;
      }
      auto r = dedup_pool(pool, references, config.dedup);
      out.manifest("01_dedup/" + pools[p].name + ".jsonl", r.clean);
      out.json("01_dedup/" + pools[p].name + "_report.json", r.report.to_json());
      out.log({{"stage", "dedup/" + pools[p].name}, {"pool_size", r.report.pool_size}, {"flagged", r.report.flagged},
               {"threshold", r.report.threshold}});
      result.pools.back().dedup = std::move(r.report);
      clean[p] = std::move(r.clean);
    });
  }

  stage("teacher", [&] {
    result.teacher = train_classifier(target, config.teacher, config.seed, config.model);
    result.teacher_eval = evaluate(result.teacher.model, validation);
    out.model("02_teacher/teacher.omdl", result.teacher.model);
    out.json("02_teacher/report.json", {{"final_loss", result.teacher.final_loss},
                                        {"epoch_losses", result.teacher.epoch_losses},
                                        {"validation", eval_json(result.teacher_eval)}});
    out.log({{"stage", "teacher"}, {"final_loss", result.teacher.final_loss}, {"val_top1", result.teacher_eval.top1}});
  });

  const std::vector<ClassifierModel> teachers{result.teacher.model};
  Manifest aux;
  aux.role = ManifestRole::kAuxiliary;
  aux.label_space = inputs.target.label_space;
  std::size_t outcome = 0;
  for (std::size_t p = 0; p < pools.size(); ++p) {
    if (!clean[p]) continue;
    const std::string& name = pools[p].name;
    PoolOutcome& report = result.pools[outcome++];
    Manifest kept;
    if (name == "untrimmed") {
      kept = stage("trim/" + name, [&] {
        TrimResult r = config.trim_mode == TrimMode::kSnippets
                           ? snippets_from_pool(*clean[p], result.teacher.model, config.snippets, config.seed)
                           : clips_from_pool(*clean[p], result.teacher.model, config.clips);
        out.manifest("04_transform/untrimmed.jsonl", r.auxiliary);
        out.json("04_transform/untrimmed_report.json", r.report.to_json());
        out.log({{"stage", "trim/" + name}, {"mode", to_string(config.trim_mode)}, {"videos", r.report.videos},
                 {"emitted", r.report.emitted}});
        report.trim = r.report;
        return std::move(r.auxiliary);
      });
    } else {
      kept = stage("filter/" + name, [&] {
        FilterResult r = filter_pool(*clean[p], teachers, config.filter);
        out.manifest("03_filter/" + name + ".jsonl", r.auxiliary);
        out.json("03_filter/" + name + "_report.json", r.report.to_json());
        out.log({{"stage", "filter/" + name}, {"pool_size", r.report.pool_size}, {"kept", r.report.kept},
                 {"rejection_rate", r.report.rejection_rate()}});
        report.filter = r.report;
        return std::move(r.auxiliary);
      });
      if (name == "images") {
        kept = stage("inflate/images", [&] {
          InflateConfig ic = config.inflate;
          if (ic.mode == InflateMode::kWarp) ic.warp_models = warp_models_for(config, inputs.sequences, k);
          Manifest clips = inflate_manifest(kept, ic, config.seed);
          out.manifest("04_transform/images.jsonl", clips);
          if (ic.mode == InflateMode::kWarp) {
            nlohmann::json models = nlohmann::json::array();
            for (const auto& m : ic.warp_models) models.push_back(m.to_json());
            out.json("04_transform/warp_models.json", models);
          }
          out.log({{"stage", "inflate/images"}, {"mode", to_string(ic.mode)}, {"clips", clips.size()}});
          return clips;
        });
      }
    }
    report.contributed = kept.size();
    Manifest prefixed = with_prefixed_ids(std::move(kept), name);
    for (auto& s : prefixed.samples) aux.samples.push_back(std::move(s));
  }

  stage("union", [&] {
    result.auxiliary = featurize_manifest(aux, fc);
    result.auxiliary.feature_dims = result.auxiliary.empty() ? 0 : fc.dims();
    out.manifest("05_auxiliary.jsonl", result.auxiliary);
    out.log({{"stage", "union"}, {"samples", result.auxiliary.size()}});
  });

  stage("train", [&] {
    result.student = train_student(target, result.auxiliary, config.student, config.sampler, config.mixup, &validation,
                                   config.seed, config.model);
    out.model("06_student/student.omdl", result.student.model);
    out.records("06_student/train_log.jsonl", result.student.records);
    out.log({{"stage", "train"}, {"epochs", result.student.records.size()},
             {"final_total_loss", result.student.records.empty() ? 0.0 : result.student.records.back().total_loss}});
    if (!config.train_baseline) return;
    const Manifest none;
    result.baseline =
        train_student(target, none, config.student, config.sampler, config.mixup, &validation, config.seed, config.model);
    out.model("06_student/baseline.omdl", result.baseline->model);
    out.records("06_student/baseline_log.jsonl", result.baseline->records);
    out.log({{"stage", "train/baseline"}, {"epochs", result.baseline->records.size()}});
  });

  stage("eval", [&] {
    result.student_eval = evaluate(result.student.model, validation);
    nlohmann::json report = {{"student", eval_json(result.student_eval)},
                             {"teacher", {{"top1", result.teacher_eval.top1}, {"top5", result.teacher_eval.top5}}}};
    if (result.baseline) {
      result.baseline_eval = evaluate(result.baseline->model, validation);
      result.confusion = confusion_delta(result.student_eval.matrix, result.baseline_eval->matrix, "student", "baseline");
      report["baseline"] = eval_json(*result.baseline_eval);
      report["confusion"] = result.confusion->to_json(inputs.target.label_space.names());
    }
    nlohmann::json pools_json = nlohmann::json::array();
    for (const auto& p : result.pools) pools_json.push_back(p.to_json());
    report["pools"] = pools_json;
    out.json("07_eval/report.json", report);
    out.log({{"stage", "eval"},
             {"student_top1", result.student_eval.top1},
             {"baseline_top1", result.baseline_eval ? nlohmann::json(result.baseline_eval->top1) : nlohmann::json()}});
  });
  return result;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  config.validate();
  const auto& dir = config.paths.output;
  if (std::filesystem::exists(dir)) {
    if (!std::filesystem::is_directory(dir)) throw ValidationError("output '" + dir.string() + "' is not a directory");
    if (!config.overwrite && !std::filesystem::is_empty(dir)) {
      throw ValidationError("output directory '" + dir.string() + "' is not empty; set overwrite = true to reuse it");
    }
  }
  std::filesystem::create_directories(dir);
  const PipelineInputs inputs = stage("load", [&] { return load_pipeline_inputs(config); });
  return run_experiment(inputs, config, &dir);
}

}  // namespace omni
