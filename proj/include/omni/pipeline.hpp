#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "omni/config.hpp"
#include "omni/dedup.hpp"
#include "omni/eval.hpp"
#include "omni/filtering.hpp"
#include "omni/homography.hpp"
#include "omni/inflate.hpp"
#include "omni/sampler.hpp"
#include "omni/teacher.hpp"
#include "omni/trainer.hpp"
#include "omni/trim.hpp"

namespace omni {

enum class TrimMode { kSnippets, kClips };
enum class WarpScope { kAgnostic, kSpecific };

std::string_view to_string(TrimMode mode);
TrimMode parse_trim_mode(std::string_view text);
std::string_view to_string(WarpScope scope);
WarpScope parse_warp_scope(std::string_view text);

struct PipelinePaths {
  std::filesystem::path target;
  std::filesystem::path validation;
  /// Empty pool paths skip that source.
  std::filesystem::path images;
  std::filesystem::path trimmed;
  std::filesystem::path untrimmed;
  /// Per-video homography lists; required by inflate mode "warp".
  std::filesystem::path homographies;
  std::filesystem::path output;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  PipelinePaths paths;
  /// Architecture and featurizer of both teacher and student.
  ModelSpec model;
  OptimizerConfig teacher = default_teacher_optimizer();
  OptimizerConfig student = default_student_optimizer();
  bool dedup_enabled = true;
  DedupConfig dedup;
  /// Images and trimmed clips. teacher_kind follows the model consensus.
  FilterConfig filter;
  InflateConfig inflate;
  WarpScope warp_scope = WarpScope::kAgnostic;
  TrimMode trim_mode = TrimMode::kSnippets;
  SnippetConfig snippets;
  ClipConfig clips;
  SamplerConfig sampler;
  MixupConfig mixup;
  /// Also train on the target set alone and report confusion deltas.
  bool train_baseline = true;
  /// Allow writing into an output directory that already holds artifacts.
  bool overwrite = false;

  static OptimizerConfig default_teacher_optimizer();
  static OptimizerConfig default_student_optimizer();

  void validate() const;
  nlohmann::json to_json() const;
};

ModelSpec model_spec_from(const FlatConfig& cfg, const std::string& section, ModelSpec defaults = {});
OptimizerConfig optimizer_from(const FlatConfig& cfg, const std::string& section, OptimizerConfig defaults);
SamplerConfig sampler_from(const FlatConfig& cfg, const std::string& section);
MixupConfig mixup_from(const FlatConfig& cfg, const std::string& section);

nlohmann::json to_json(const ModelSpec& spec);
nlohmann::json to_json(const OptimizerConfig& config);
nlohmann::json to_json(const SamplerConfig& config);
nlohmann::json to_json(const MixupConfig& config);

/// Reads every section and rejects unknown keys. Relative paths resolve
/// against `base_dir`.
PipelineConfig pipeline_config_from(const FlatConfig& cfg, const std::filesystem::path& base_dir);
/// Loads a config file; OMNI_SEED, when set, replaces the file's seed.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct PipelineInputs {
  Manifest target;
  Manifest validation;
  std::optional<Manifest> images;
  std::optional<Manifest> trimmed;
  std::optional<Manifest> untrimmed;
  std::vector<HomographySequence> sequences;
};

PipelineInputs load_pipeline_inputs(const PipelineConfig& config);

struct PoolOutcome {
  std::string pool;  // "images", "trimmed" or "untrimmed"
  std::optional<DedupReport> dedup;
  std::optional<FilterReport> filter;
  std::optional<TrimReport> trim;
  std::size_t contributed = 0;  // samples added to the auxiliary union

  nlohmann::json to_json() const;
};

struct PipelineResult {
  TrainedClassifier teacher;
  Evaluation teacher_eval;
  std::vector<PoolOutcome> pools;
  /// Featurized union; ids are "<pool>/<original id>".
  Manifest auxiliary;
  StudentResult student;
  Evaluation student_eval;
  std::optional<StudentResult> baseline;
  std::optional<Evaluation> baseline_eval;
  std::optional<ConfusionReport> confusion;
};

/// dedup -> teacher -> per-pool filter or trim -> inflate images -> union
/// -> joint training -> evaluation. With `out_dir` every intermediate
/// manifest, model and report is written under numbered stage directories
/// as the stage finishes. Stage failures are rethrown with the stage name
/// prepended, keeping their ValidationError/RuntimeError type.
PipelineResult run_experiment(const PipelineInputs& inputs, const PipelineConfig& config,
                              const std::filesystem::path* out_dir = nullptr);

/// Loads the configured inputs and runs the experiment into paths.output,
/// which must be empty or absent unless overwrite is set.
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace omni
