#include "den/config.hpp"

#include "den/common.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace den {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_as(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("invalid value '" + std::string(value) + "' for config key '" + std::string(key) + "'");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  throw ConfigError("invalid boolean '" + std::string(value) + "' for config key '" + std::string(key) + "'");
}

struct Field {
  const char* name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
std::string show(const T& v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

#define DEN_NUM_FIELD(name, type)                                                     \
  Field {                                                                             \
    #name, [](RunConfig& c, std::string_view v) { c.name = parse_as<type>(#name, v); }, \
        [](const RunConfig& c) { return show(c.name); }                               \
  }
#define DEN_STR_FIELD(name)                                                 \
  Field {                                                                   \
    #name, [](RunConfig& c, std::string_view v) { c.name = std::string(v); }, \
        [](const RunConfig& c) { return c.name; }                           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      DEN_NUM_FIELD(k, int),
      DEN_NUM_FIELD(j, int),
      DEN_NUM_FIELD(negative_pool, int),
      DEN_NUM_FIELD(embed_dim, int),
      DEN_NUM_FIELD(epochs_embed, int),
      DEN_NUM_FIELD(lr, double),
      DEN_NUM_FIELD(batch_size, int),
      DEN_STR_FIELD(hidden),
      DEN_NUM_FIELD(gamma, double),
      DEN_NUM_FIELD(eigen_threshold, double),
      DEN_NUM_FIELD(spectral_subsample, int),
      DEN_NUM_FIELD(knn_filter_neighbors, int),
      DEN_NUM_FIELD(kmeans_restarts, int),
      DEN_NUM_FIELD(kmeans_max_iter, int),
      DEN_NUM_FIELD(epochs_head, int),
      DEN_NUM_FIELD(epochs_finetune, int),
      DEN_NUM_FIELD(lr_finetune, double),
      DEN_STR_FIELD(head_hidden),
      DEN_NUM_FIELD(background_size, int),
      DEN_NUM_FIELD(n_coalitions, int),
      DEN_NUM_FIELD(explain_samples, int),
      DEN_NUM_FIELD(seed, std::uint64_t),
      DEN_STR_FIELD(data),
      DEN_STR_FIELD(labels_path),
      DEN_STR_FIELD(format),
      Field{"has_labels", [](RunConfig& c, std::string_view v) { c.has_labels = parse_bool("has_labels", v); },
            [](const RunConfig& c) { return std::string(c.has_labels ? "true" : "false"); }},
      DEN_STR_FIELD(standardize),
      DEN_NUM_FIELD(vocab_size, int),
      DEN_NUM_FIELD(token_embed_dim, int),
      DEN_STR_FIELD(out_dir),
  };
  return table;
}

#undef DEN_NUM_FIELD
#undef DEN_STR_FIELD

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  if (k < 2) fail("k", "must be at least 2");
  if (j < 1 || j >= k) fail("j", "must satisfy 1 <= j < k");
  if (negative_pool < 0) fail("negative_pool", "must be nonnegative");
  if (embed_dim < 1) fail("embed_dim", "must be positive");
  if (epochs_embed < 0) fail("epochs_embed", "must be nonnegative");
  if (!(lr > 0)) fail("lr", "must be positive");
  if (batch_size < 1) fail("batch_size", "must be positive");
  if (!(gamma > 0)) fail("gamma", "must be positive");
  if (!(eigen_threshold > 0)) fail("eigen_threshold", "must be positive");
  if (spectral_subsample < 2) fail("spectral_subsample", "must be at least 2");
  if (knn_filter_neighbors < 1) fail("knn_filter_neighbors", "must be positive");
  if (kmeans_restarts < 1) fail("kmeans_restarts", "must be positive");
  if (kmeans_max_iter < 1) fail("kmeans_max_iter", "must be positive");
  if (epochs_head < 0) fail("epochs_head", "must be nonnegative");
  if (epochs_finetune < 0) fail("epochs_finetune", "must be nonnegative");
  if (lr_finetune < 0 || !(lr_finetune < lr)) fail("lr_finetune", "must satisfy 0 <= lr_finetune < lr");
  if (background_size < 1) fail("background_size", "must be positive");
  if (n_coalitions < 0) fail("n_coalitions", "must be nonnegative");
  if (format != "csv" && format != "idx") fail("format", "must be csv or idx");
  if (standardize != "auto" && standardize != "on" && standardize != "off")
    fail("standardize", "must be auto, on or off");
  if (vocab_size < 0) fail("vocab_size", "must be nonnegative");
  try {
    parse_layer_sizes(hidden);
  } catch (const ConfigError& e) {
    fail("hidden", e.what());
  }
  try {
    parse_layer_sizes(head_hidden);
  } catch (const ConfigError& e) {
    fail("head_hidden", e.what());
  }
}

void RunConfig::set(std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (key == f.name) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.name) + " = " + f.get(*this) + "\n";
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.name);
  return out;
}

void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    cfg.set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, ss.str(), path.string());
  return cfg;
}

std::vector<int> parse_layer_sizes(std::string_view text) {
  std::vector<int> out;
  std::string s(text);
  if (trim(s).empty()) return out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const std::string t = trim(tok);
    int v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || v < 1)
      throw ConfigError("bad layer size list '" + s + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace den
