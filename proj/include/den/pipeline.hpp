#pragma once

#include "den/config.hpp"
#include "den/data_io.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace den {

struct PipelineManifest {
  std::map<std::string, std::filesystem::path> artifacts;
  std::vector<std::pair<std::string, double>> stage_seconds;  // in run order
  RunConfig config;
  int n_clusters = 0;
  int k_raw = 0;
  double head_accuracy = 0.0;
  double finetune_accuracy = 0.0;
  bool finetune_reverted = false;
  // Against ground-truth labels, when the dataset has them. ACC is absent
  // when the cluster counts differ.
  std::optional<double> spectral_acc;
  std::optional<double> spectral_nmi;
  std::optional<double> head_acc;
  std::optional<double> head_nmi;
  std::vector<int> spectral_labels;
  std::vector<int> predicted_labels;

  std::string to_json() const;
};

/// Loads cfg.data (CSV, or IDX with cfg.labels_path) and standardizes it per
/// cfg.standardize ("auto" = dense data only).
Dataset load_dataset(const RunConfig& cfg);

/// graph -> embed -> cluster -> fit-head -> finetune -> explain -> plot, with
/// every artifact and manifest.json written under cfg.out_dir. A failing
/// stage rethrows its error with the stage name prefixed.
PipelineManifest run_pipeline(const RunConfig& cfg);
PipelineManifest run_pipeline(const Dataset& data, const RunConfig& cfg);

}  // namespace den
