#include "isilab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "isilab/checkpoint.hpp"
#include "isilab/errors.hpp"
#include "isilab/losses.hpp"
#include "isilab/rng.hpp"
#include "isilab/sampling.hpp"

namespace isilab {

namespace fs = std::filesystem;

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ---- config file ----

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

struct ConfigEntry {
  std::string value;
  int line = 0;
  bool used = false;
};

struct ConfigDoc {
  std::map<std::string, ConfigEntry> entries;

  const ConfigEntry* take(const std::string& key) {
    auto it = entries.find(key);
    if (it == entries.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }
};

[[noreturn]] void bad_value(const std::string& key, const ConfigEntry& entry,
                            const std::string& expected) {
  throw ConfigParseError("line " + std::to_string(entry.line) + ": key '" + key + "' expects " +
                         expected + ", got '" + entry.value + "'");
}

ConfigDoc parse_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());

  static const std::set<std::string> known_sections = {
      "phantom", "splits", "train", "train.loss", "train.encoder", "train.augment", "eval"};

  ConfigDoc doc;
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigParseError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (known_sections.count(section) == 0)
        throw ConfigParseError("line " + std::to_string(lineno) + ": unknown section [" + section +
                               "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigParseError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigParseError("line " + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    const auto [it, inserted] = doc.entries.emplace(full, ConfigEntry{value, lineno});
    if (!inserted)
      throw ConfigParseError("line " + std::to_string(lineno) + ": duplicate key '" + full +
                             "' (first set at line " + std::to_string(it->second.line) + ")");
  }
  return doc;
}

std::vector<std::string> split_fields(const std::string& value) {
  std::istringstream in(value);
  std::vector<std::string> fields;
  std::string f;
  while (in >> f) fields.push_back(f);
  return fields;
}

std::int64_t to_i64(const std::string& key, const ConfigEntry& entry, const std::string& field) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(field, &pos);
    if (pos != field.size()) bad_value(key, entry, "an integer");
    return v;
  } catch (const ConfigParseError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, entry, "an integer");
  }
}

std::uint64_t to_u64(const std::string& key, const ConfigEntry& entry) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(entry.value, &pos);
    if (pos != entry.value.size()) bad_value(key, entry, "an unsigned integer");
    return v;
  } catch (const ConfigParseError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, entry, "an unsigned integer");
  }
}

double to_f64(const std::string& key, const ConfigEntry& entry, const std::string& field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size()) bad_value(key, entry, "a number");
    return v;
  } catch (const ConfigParseError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, entry, "a number");
  }
}

bool to_bool(const std::string& key, const ConfigEntry& entry) {
  if (entry.value == "true") return true;
  if (entry.value == "false") return false;
  bad_value(key, entry, "'true' or 'false'");
}

struct ConfigReader {
  ConfigDoc& doc;

  void i64(const std::string& key, std::int64_t& out) {
    if (const auto* e = doc.take(key)) out = to_i64(key, *e, e->value);
  }
  void u64(const std::string& key, std::uint64_t& out) {
    if (const auto* e = doc.take(key)) out = to_u64(key, *e);
  }
  void f64(const std::string& key, double& out) {
    if (const auto* e = doc.take(key)) out = to_f64(key, *e, e->value);
  }
  void boolean(const std::string& key, bool& out) {
    if (const auto* e = doc.take(key)) out = to_bool(key, *e);
  }
  void i64_triple(const std::string& key, std::array<std::int64_t, 3>& out) {
    if (const auto* e = doc.take(key)) {
      const auto fields = split_fields(e->value);
      if (fields.size() != 3) bad_value(key, *e, "three integers");
      for (int t = 0; t < 3; ++t)
        out[static_cast<std::size_t>(t)] = to_i64(key, *e, fields[static_cast<std::size_t>(t)]);
    }
  }
  void f64_triple(const std::string& key, std::array<double, 3>& out) {
    if (const auto* e = doc.take(key)) {
      const auto fields = split_fields(e->value);
      if (fields.size() != 3) bad_value(key, *e, "three numbers");
      for (int t = 0; t < 3; ++t)
        out[static_cast<std::size_t>(t)] = to_f64(key, *e, fields[static_cast<std::size_t>(t)]);
    }
  }
  void int_interval(const std::string& key, IntInterval& out) {
    if (const auto* e = doc.take(key)) {
      const auto fields = split_fields(e->value);
      if (fields.size() != 2) bad_value(key, *e, "two integers");
      out.lo = to_i64(key, *e, fields[0]);
      out.hi = to_i64(key, *e, fields[1]);
    }
  }
  void real_interval(const std::string& key, RealInterval& out) {
    if (const auto* e = doc.take(key)) {
      const auto fields = split_fields(e->value);
      if (fields.size() != 2) bad_value(key, *e, "two numbers");
      out.lo = to_f64(key, *e, fields[0]);
      out.hi = to_f64(key, *e, fields[1]);
    }
  }
  void i64_list(const std::string& key, std::vector<std::int64_t>& out) {
    if (const auto* e = doc.take(key)) {
      const auto fields = split_fields(e->value);
      if (fields.empty()) bad_value(key, *e, "one or more integers");
      out.clear();
      for (const auto& f : fields) out.push_back(to_i64(key, *e, f));
    }
  }
  void path(const std::string& key, fs::path& out) {
    if (const auto* e = doc.take(key)) {
      if (e->value.empty()) bad_value(key, *e, "a path");
      out = e->value;
    }
  }
};

// ---- artifact plumbing ----

void commit_file(const fs::path& tmp, const fs::path& final_path) {
  std::error_code ec;
  fs::rename(tmp, final_path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + final_path.string());
}

fs::path temp_sibling(const fs::path& p) {
  return p.parent_path() / (p.filename().string() + ".tmp");
}

void write_text_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  commit_file(tmp, path);
}

std::string subject_name(std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "subject_%03lld", static_cast<long long>(index));
  return buf;
}

fs::path volumes_dir(const ExperimentConfig& config) { return config.output_dir / "volumes"; }
fs::path manifest_path(const ExperimentConfig& config) {
  return config.output_dir / "manifest.json";
}

std::vector<Volume> load_split_volumes(const ExperimentConfig& config, const std::string& split) {
  const fs::path manifest = manifest_path(config);
  if (!fs::exists(manifest))
    throw MissingData("no manifest at " + manifest.string() + "; run gen-data first");
  std::ifstream in(manifest);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw FormatError("cannot parse " + manifest.string() + ": " + e.what());
  }

  std::vector<std::string> ids;
  for (const auto& [id, s] : doc.items())
    if (s.get<std::string>() == split) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw MissingData("manifest lists no '" + split + "' subjects");

  std::vector<Volume> volumes;
  volumes.reserve(ids.size());
  for (const auto& id : ids) {
    const fs::path file = volumes_dir(config) / (id + ".vol");
    if (!fs::exists(file))
      throw MissingData("volume file " + file.string() + " is missing; rerun gen-data");
    volumes.push_back(read_volume(file.string()));
  }
  return volumes;
}

std::string checkpoint_label(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  if (!p.has_filename()) p = p.parent_path();  // tolerate a trailing slash
  return p.filename().string();
}

double mean_of(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

constexpr const char* kMetricNames[5] = {"auc", "accuracy", "f1", "sensitivity", "specificity"};

std::vector<double> metric_column(const std::vector<MetricsRecord>& records, int metric) {
  std::vector<double> column;
  column.reserve(records.size());
  for (const auto& r : records) {
    switch (metric) {
      case 0: column.push_back(r.auc); break;
      case 1: column.push_back(r.accuracy); break;
      case 2: column.push_back(r.f1); break;
      case 3: column.push_back(r.sensitivity); break;
      default: column.push_back(r.specificity); break;
    }
  }
  return column;
}

}  // namespace

void validate(const ExperimentConfig& config) {
  validate(config.phantom);
  validate(config.train);
  if (config.splits.train <= 0 || config.splits.val <= 0 || config.splits.test <= 0)
    throw InvalidConfig("split counts must all be positive");
  if (config.eval.n_per_class <= 0) throw InvalidConfig("eval n_per_class must be positive");
  if (config.eval.k_folds < 2) throw InvalidConfig("eval k_folds must be at least 2");
  if (config.eval.n_per_class < config.eval.k_folds)
    throw InvalidConfig("eval needs n_per_class >= k_folds so every fold sees both classes");
  if (config.eval.probe_steps <= 0) throw InvalidConfig("eval probe_steps must be positive");
  if (config.eval.probe_lr <= 0.0) throw InvalidConfig("eval probe_lr must be positive");
  if (config.output_dir.empty()) throw InvalidConfig("output_dir must not be empty");
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  ConfigDoc doc = parse_config_file(path);
  ConfigReader read{doc};
  ExperimentConfig cfg;

  read.path("output_dir", cfg.output_dir);
  read.u64("master_seed", cfg.master_seed);

  read.i64_triple("phantom.shape", cfg.phantom.shape);
  read.f64_triple("phantom.spacing", cfg.phantom.spacing);
  read.i64("phantom.n_organs", cfg.phantom.n_organs);
  read.f64("phantom.organ_jitter", cfg.phantom.organ_jitter);
  read.int_interval("phantom.lesion_count_range", cfg.phantom.lesion_count_range);
  read.real_interval("phantom.lesion_radius_range", cfg.phantom.lesion_radius_range);
  read.f64("phantom.noise_std", cfg.phantom.noise_std);
  read.u64("phantom.seed", cfg.phantom.seed);

  read.i64("splits.train", cfg.splits.train);
  read.i64("splits.val", cfg.splits.val);
  read.i64("splits.test", cfg.splits.test);

  read.i64("train.epochs", cfg.train.epochs);
  read.i64("train.steps_per_epoch", cfg.train.steps_per_epoch);
  read.i64("train.volumes_per_batch", cfg.train.volumes_per_batch);
  read.i64("train.patches_per_volume", cfg.train.patches_per_volume);
  read.i64("train.patch_size", cfg.train.patch_size);
  read.f64("train.lr0", cfg.train.lr0);
  read.f64("train.lr_gamma", cfg.train.lr_gamma);
  read.boolean("train.augment_isimed", cfg.train.augment_isimed);

  if (const auto* e = doc.take("train.loss.method")) {
    try {
      cfg.train.loss.method = parse_method(e->value);
    } catch (const InvalidConfig&) {
      bad_value("train.loss.method", *e, "one of isimed|simclr|barlow|reg-isimed");
    }
  }
  read.f64("train.loss.tau", cfg.train.loss.tau);
  read.f64("train.loss.lambda_bt", cfg.train.loss.lambda_bt);
  read.f64("train.loss.lambda_scale", cfg.train.loss.lambda_scale);

  if (const auto* e = doc.take("train.encoder.kind")) {
    if (e->value == "conv3d_small")
      cfg.train.encoder.kind = EncoderKind::conv3d_small;
    else if (e->value == "mlp")
      cfg.train.encoder.kind = EncoderKind::mlp;
    else
      bad_value("train.encoder.kind", *e, "'conv3d_small' or 'mlp'");
  }
  read.i64("train.encoder.backbone_dim", cfg.train.encoder.backbone_dim);
  read.i64("train.encoder.head_isimed_dim", cfg.train.encoder.head_isimed_dim);
  read.i64("train.encoder.head_barlow_dim", cfg.train.encoder.head_barlow_dim);
  read.i64_list("train.encoder.conv_channels", cfg.train.encoder.conv_channels);

  read.i64("train.augment.dropout_holes", cfg.train.augment.dropout_holes);
  read.int_interval("train.augment.fg_cut_range", cfg.train.augment.fg_cut_range);
  read.int_interval("train.augment.bg_keep_range", cfg.train.augment.bg_keep_range);
  read.f64("train.augment.shuffle_prob", cfg.train.augment.shuffle_prob);
  read.i64("train.augment.shuffle_block", cfg.train.augment.shuffle_block);
  read.f64("train.augment.fill_value", cfg.train.augment.fill_value);

  read.i64("eval.n_per_class", cfg.eval.n_per_class);
  read.i64("eval.k_folds", cfg.eval.k_folds);
  read.i64("eval.probe_steps", cfg.eval.probe_steps);
  read.f64("eval.probe_lr", cfg.eval.probe_lr);

  for (const auto& [key, entry] : doc.entries)
    if (!entry.used)
      throw ConfigParseError("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");

  cfg.train.encoder.input_patch = cfg.train.patch_size;
  validate(cfg);
  return cfg;
}

std::uint64_t component_seed(std::uint64_t master_seed, std::string_view component) {
  return mix_seed(master_seed, fnv1a64(component));
}

std::string method_name(LossMethod method) {
  switch (method) {
    case LossMethod::isimed: return "isimed";
    case LossMethod::simclr: return "simclr";
    case LossMethod::barlow: return "barlow";
    default: return "reg-isimed";
  }
}

LossMethod parse_method(std::string_view name) {
  if (name == "isimed") return LossMethod::isimed;
  if (name == "simclr") return LossMethod::simclr;
  if (name == "barlow") return LossMethod::barlow;
  if (name == "reg-isimed") return LossMethod::reg_isimed;
  throw InvalidConfig("unknown method '" + std::string(name) +
                      "'; expected isimed|simclr|barlow|reg-isimed");
}

GenDataResult cmd_gen_data(const ExperimentConfig& config) {
  validate(config);
  fs::create_directories(volumes_dir(config));
  const std::uint64_t gen_seed = component_seed(config.master_seed, "gen-data");
  const std::int64_t total = config.splits.train + config.splits.val + config.splits.test;

  GenDataResult result;
  nlohmann::json manifest;
  for (std::int64_t i = 0; i < total; ++i) {
    Volume v = generate_phantom(config.phantom, mix_seed(gen_seed, static_cast<std::uint64_t>(i)));
    v = scale_intensity_percentiles(v, 5.0, 95.0, -1.0, 1.0);
    v = crop_foreground(v);
    v.subject_id = subject_name(i);

    const fs::path file = volumes_dir(config) / (v.subject_id + ".vol");
    const fs::path tmp = temp_sibling(file);
    write_volume(v, tmp.string());
    commit_file(tmp, file);
    result.volume_files.push_back(file);

    const char* split = i < config.splits.train                      ? "train"
                        : i < config.splits.train + config.splits.val ? "val"
                                                                      : "test";
    manifest[v.subject_id] = split;
  }
  result.manifest_file = manifest_path(config);
  write_text_file(result.manifest_file, manifest.dump(2) + "\n");
  return result;
}

TrainCmdResult cmd_train(const ExperimentConfig& config, LossMethod method) {
  TrainConfig tc = config.train;
  tc.loss.method = method;
  const std::uint64_t train_seed = component_seed(config.master_seed, "train");
  tc.seed = mix_seed(train_seed, fnv1a64(method_name(method)));
  tc.encoder.seed = mix_seed(tc.seed, fnv1a64("encoder"));

  ExperimentConfig resolved = config;
  resolved.train = tc;
  validate(resolved);

  const auto volumes = load_split_volumes(config, "train");
  const TrainResult trained = train(tc, volumes);

  TrainCmdResult result;
  result.checkpoint_dir = config.output_dir / "checkpoints" / method_name(method);
  fs::create_directories(result.checkpoint_dir.parent_path());
  const fs::path tmp_dir = temp_sibling(result.checkpoint_dir);
  fs::remove_all(tmp_dir);
  save_checkpoint(trained.model, tmp_dir);
  fs::remove_all(result.checkpoint_dir);
  commit_file(tmp_dir, result.checkpoint_dir);

  result.loss_csv = config.output_dir / ("loss_" + method_name(method) + ".csv");
  const fs::path tmp_csv = temp_sibling(result.loss_csv);
  write_loss_csv(trained.history, tmp_csv);
  commit_file(tmp_csv, result.loss_csv);

  result.final_loss = trained.history.back().loss;
  return result;
}

EvalCmdResult cmd_eval(const ExperimentConfig& config,
                       const std::vector<fs::path>& checkpoints) {
  validate(config);
  if (checkpoints.empty()) throw InvalidConfig("eval needs at least one checkpoint");

  const auto volumes = load_split_volumes(config, "test");
  const std::uint64_t eval_seed = component_seed(config.master_seed, "eval");
  const auto patches = sample_labeled_patches(volumes, config.train.patch_size,
                                              config.eval.n_per_class, eval_seed);
  const auto labels = patch_labels(patches);

  EvalCmdResult result;
  std::map<std::string, int> label_counts;
  for (const auto& checkpoint : checkpoints) {
    const Model model = load_checkpoint(checkpoint);
    const Tensor z = embed_dataset(model, patches);
    auto records = kfold_cv(z, labels, config.eval.k_folds, eval_seed, config.eval.probe_steps,
                            config.eval.probe_lr);
    std::string name = checkpoint_label(checkpoint);
    const int seen = ++label_counts[name];
    if (seen > 1) name += "#" + std::to_string(seen);
    result.per_model.emplace_back(std::move(name), std::move(records));
  }

  std::string csv = "model,fold,auc,accuracy,f1,sensitivity,specificity\n";
  for (const auto& [name, records] : result.per_model) {
    for (const auto& r : records)
      csv += name + "," + std::to_string(r.fold) + "," + format_real(r.auc) + "," +
             format_real(r.accuracy) + "," + format_real(r.f1) + "," +
             format_real(r.sensitivity) + "," + format_real(r.specificity) + "\n";
    csv += name + ",summary";
    for (int metric = 0; metric < 5; ++metric) {
      const auto column = metric_column(records, metric);
      csv += "," + format_fixed4(mean_of(column)) + "±" + format_fixed4(std_of(column));
    }
    csv += "\n";
  }
  result.metrics_csv = config.output_dir / "metrics.csv";
  write_text_file(result.metrics_csv, csv);

  if (result.per_model.size() >= 2) {
    std::string table = "model_a,model_b,metric,t,p\n";
    for (std::size_t a = 0; a < result.per_model.size(); ++a)
      for (std::size_t b = a + 1; b < result.per_model.size(); ++b)
        for (int metric = 0; metric < 5; ++metric) {
          const auto col_a = metric_column(result.per_model[a].second, metric);
          const auto col_b = metric_column(result.per_model[b].second, metric);
          TTest tt;
          try {
            tt = paired_t_test(col_a, col_b);
          } catch (const ZeroVariance&) {
            // constant fold differences: no spread to test against, so report
            // certainty in the direction of the (possibly zero) mean gap
            const double diff = mean_of(col_a) - mean_of(col_b);
            tt.t = diff == 0.0 ? 0.0 : std::copysign(HUGE_VAL, diff);
            tt.p = diff == 0.0 ? 1.0 : 0.0;
          }
          table += result.per_model[a].first + "," + result.per_model[b].first + "," +
                   kMetricNames[metric] + "," + format_real(tt.t) + "," + format_real(tt.p) + "\n";
        }
    result.ttests_csv = config.output_dir / "ttests.csv";
    write_text_file(*result.ttests_csv, table);
  }
  return result;
}

AnalyzeCmdResult cmd_analyze(const ExperimentConfig& config, const fs::path& checkpoint,
                             bool svg) {
  validate(config);
  const auto volumes = load_split_volumes(config, "test");
  const std::uint64_t analyze_seed = component_seed(config.master_seed, "analyze");
  const PatchBatch batch =
      sample_patch_batch(volumes, config.train.patches_per_volume, config.train.patch_size,
                         CoordinateMode::millimeter, analyze_seed);

  const Model model = load_checkpoint(checkpoint);
  const Tensor z = embed_dataset(model, batch.patches);
  const DistanceMatrix d_latent = to_distance_matrix(pairwise_embedding_distances(z));
  const DistanceMatrix d_physical = physical_distance_matrix(batch);

  AnalyzeCmdResult result;
  result.stats = distance_error_stats(d_latent, d_physical);

  const std::int64_t n = static_cast<std::int64_t>(batch.patches.size());
  const PCAResult components = pca(z, 3);
  result.correlations = spatial_correlation(components.projections, n, 3, batch.centers);

  const fs::path dir = config.output_dir / "analysis";
  fs::create_directories(dir);
  const std::string name = checkpoint_label(checkpoint);

  result.quantiles_csv = dir / (name + "_quantiles.csv");
  {
    const fs::path tmp = temp_sibling(result.quantiles_csv);
    write_quantiles_csv(result.stats, tmp);
    commit_file(tmp, result.quantiles_csv);
  }
  result.correlation_csv = dir / (name + "_correlation.csv");
  {
    const fs::path tmp = temp_sibling(result.correlation_csv);
    write_correlation_csv(result.correlations, 3, tmp);
    commit_file(tmp, result.correlation_csv);
  }
  result.variance_csv = dir / (name + "_variance.csv");
  {
    std::string csv = "component,explained_variance\n";
    for (std::size_t c = 0; c < components.explained_variance.size(); ++c)
      csv += std::to_string(c + 1) + "," + format_real(components.explained_variance[c]) + "\n";
    write_text_file(result.variance_csv, csv);
  }
  if (svg) {
    result.scatter_svg = dir / (name + "_scatter.svg");
    const fs::path tmp = temp_sibling(*result.scatter_svg);
    write_projection_svg(components.projections, n, 3, batch.centers, tmp);
    commit_file(tmp, *result.scatter_svg);
  }
  return result;
}

}  // namespace isilab
