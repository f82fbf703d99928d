#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace den {

/// Hyperparameters for every stage. Field names double as the keys of the
/// flat "key = value" config file.
struct RunConfig {
  // pair graph
  int k = 10;
  int j = 1;
  int negative_pool = 0;  // 0: all other samples, or 10^4 when N > 10^4

  // embedding
  int embed_dim = 2;
  int epochs_embed = 50;
  double lr = 1e-3;
  int batch_size = 256;
  std::string hidden = "256,128";

  // spectral clustering
  double gamma = 1.0;
  double eigen_threshold = 1e-2;
  int spectral_subsample = 1000;
  int knn_filter_neighbors = 50;
  int kmeans_restarts = 10;
  int kmeans_max_iter = 300;

  // cluster head
  int epochs_head = 50;
  int epochs_finetune = 50;
  double lr_finetune = 1e-4;
  std::string head_hidden = "64,64";

  // explanation
  int background_size = 100;
  int n_coalitions = 0;  // 0: min(2^D, 2048)
  int explain_samples = 10;

  std::uint64_t seed = 0;

  // pipeline inputs
  std::string data;
  std::string labels_path;  // IDX label file
  std::string format = "csv";
  bool has_labels = false;
  std::string standardize = "auto";  // auto | on | off
  int vocab_size = 0;                // > 0 marks token data
  int token_embed_dim = 32;
  std::string out_dir = "den_out";

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// Sets one field from its textual value; unknown keys raise ConfigError.
  void set(std::string_view key, std::string_view value);

  /// "key = value" lines for every field, in declaration order.
  std::string to_text() const;

  static std::vector<std::string> keys();
};

/// Parses a config file on top of the defaults. '#' starts a comment.
RunConfig load_config(const std::filesystem::path& path);
void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& source);

std::vector<int> parse_layer_sizes(std::string_view text);

}  // namespace den
