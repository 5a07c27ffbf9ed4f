// lago: command-line front end. See README.md for the config schema.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lago/checkpoint.hpp"
#include "lago/evaluation.hpp"
#include "lago/training.hpp"
#include "lago/tuning.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lago;

namespace {

json defaults() {
  const SearchSpace space;
  const SyntheticConfig synth;
  const TrainConfig train;
  return {
      {"seed", 0},
      {"data",
       {{"features", ""}, {"labels", ""}, {"attribute_labels", ""}, {"descriptions", ""}, {"groups", ""}, {"splits", ""}}},
      {"model",
       {{"variant", "semantic-hard"},
        {"comp_mode", "const"},
        {"prior_mode", "uniform"},
        {"zeta", 10.0},
        {"c_comp", 0.5},
        {"num_groups", 1}}},
      {"loss", {{"cxe_weight", 1.0}, {"alpha", 0.0}, {"beta", 0.0}, {"lambda", 0.0}, {"psi", 0.0}}},
      {"train",
       {{"lr_w", train.lr_w},
        {"lr_v", train.lr_v},
        {"epochs", train.epochs},
        {"batch_size", train.batch_size},
        {"early_stop_patience", train.early_stop_patience},
        {"alternate", train.alternate}}},
      {"search",
       {{"lr_w", space.lr_w},
        {"beta", space.beta},
        {"lambda", space.lambda},
        {"lr_v", space.lr_v},
        {"zeta", space.zeta},
        {"num_groups", space.num_groups},
        {"psi", space.psi},
        {"seeds", space.seeds},
        {"budget", 50}}},
      {"synth",
       {{"num_groups", synth.num_groups},
        {"attributes_per_group", synth.attributes_per_group},
        {"train_classes", synth.train_classes},
        {"val_classes", synth.val_classes},
        {"test_classes", synth.test_classes},
        {"feature_dim", synth.feature_dim},
        {"samples_per_class", synth.samples_per_class},
        {"rho", synth.rho},
        {"sigma", synth.sigma}}},
      {"noise",
       {{"arms", {"singletons", "semantic-hard"}},
        {"ratios", {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}},
        {"seeds", {0, 1, 2, 3, 4}}}},
      {"eval", {{"checkpoint", ""}, {"split", "test"}}},
      {"gamma", {{"tau", kDefaultGammaTau}}},
      {"gradcheck", {{"h", 1e-6}, {"samples", 40}, {"tolerance", 1e-5}}},
      {"finalize", {{"trial", ""}}},
  };
}

// Sections whose keys collide with others get a prefix on the command line.
std::string flag_for(const std::string& section, const std::string& key) {
  std::string name = key;
  if (section == "search" || section == "synth" || section == "noise" || section == "gradcheck") name = section + "_" + key;
  for (char& c : name) {
    if (c == '_') c = '-';
  }
  return "--" + name;
}

bool same_kind(const json& want, const json& got) {
  if (want.is_number_float()) return got.is_number();
  if (want.is_number_integer()) return got.is_number_integer();
  if (want.is_array()) {
    if (!got.is_array()) return false;
    for (const auto& e : got) {
      if (!same_kind(want.front(), e)) return false;
    }
    return true;
  }
  return want.type() == got.type();
}

void check_schema(const json& want, const json& got, const std::string& where) {
  if (!got.is_object()) throw Error("config" + where + ": expected an object");
  for (const auto& [key, value] : got.items()) {
    const std::string path = where + "." + key;
    if (!want.contains(key)) throw Error("config: unknown key '" + path.substr(1) + "'");
    if (want[key].is_object()) {
      check_schema(want[key], value, path);
    } else if (!same_kind(want[key], value)) {
      throw Error("config: '" + path.substr(1) + "' has the wrong type");
    }
  }
}

json parse_scalar(const json& like, const std::string& text, const std::string& flag) {
  try {
    std::size_t used = 0;
    if (like.is_number_float()) {
      const double v = std::stod(text, &used);
      if (used == text.size()) return v;
    } else if (like.is_number_unsigned()) {
      if (!text.empty() && text[0] != '-') {
        const unsigned long long v = std::stoull(text, &used);
        if (used == text.size()) return v;
      }
    } else if (like.is_number_integer()) {
      const long long v = std::stoll(text, &used);
      if (used == text.size()) return v;
    } else if (like.is_boolean()) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
    } else {
      return text;
    }
  } catch (const std::exception&) {
  }
  throw Error("invalid value '" + text + "' for " + flag);
}

json parse_override(const json& like, const std::string& text, const std::string& flag) {
  if (!like.is_array()) return parse_scalar(like, text, flag);
  json out = json::array();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_scalar(like.front(), item, flag));
  if (out.empty()) throw Error("empty list for " + flag);
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Relative paths inside a config file are taken relative to that file.
void resolve_paths(json& cfg, const fs::path& base) {
  auto fix = [&](json& v) {
    const std::string p = v.get<std::string>();
    if (!p.empty() && fs::path(p).is_relative()) v = (base / p).lexically_normal().string();
  };
  if (cfg.contains("data")) {
    for (auto& [key, v] : cfg["data"].items()) fix(v);
  }
  if (cfg.contains("eval") && cfg["eval"].contains("checkpoint")) fix(cfg["eval"]["checkpoint"]);
  if (cfg.contains("finalize") && cfg["finalize"].contains("trial")) fix(cfg["finalize"]["trial"]);
}

// Artifacts are held in memory and only written once a command has succeeded.
class Outputs {
 public:
  Outputs(fs::path dir, std::string command, json config, int jobs)
      : dir_(std::move(dir)), command_(std::move(command)), config_(std::move(config)), jobs_(jobs) {}

  void add(const std::string& name, std::string bytes) { pending_.emplace_back(name, std::move(bytes)); }
  /// A file some library writer already put under the output directory.
  void adopt(const std::string& name) { hashes_[name] = fnv1a_hex(read_file(dir_ / name)); }
  void input(const std::string& path) {
    if (!path.empty()) inputs_[path] = fnv1a_hex(read_file(path));
  }
  const fs::path& dir() const { return dir_; }

  void commit() {
    fs::create_directories(dir_);
    for (const auto& [name, bytes] : pending_) {
      std::ofstream out(dir_ / name, std::ios::binary);
      out << bytes;
      if (!out) throw Error("cannot write " + (dir_ / name).string());
      hashes_[name] = fnv1a_hex(bytes);
    }
    json manifest{{"command", command_},
                  {"seed", config_["seed"]},
                  {"jobs", jobs_},
                  {"config", config_},
                  {"inputs", inputs_},
                  {"artifacts", hashes_}};
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
    if (!out) throw Error("cannot write manifest");
  }

 private:
  fs::path dir_;
  std::string command_;
  json config_;
  int jobs_;
  std::vector<std::pair<std::string, std::string>> pending_;
  std::map<std::string, std::string> hashes_;
  std::map<std::string, std::string> inputs_;
};

// -- config to library structs ----------------------------------------------

ModelConfig model_config(const json& c) {
  const json& m = c["model"];
  ModelConfig out;
  out.variant = parse_variant(m["variant"].get<std::string>());
  out.comp_mode = parse_comp_mode(m["comp_mode"].get<std::string>());
  out.prior_mode = parse_prior_mode(m["prior_mode"].get<std::string>());
  out.zeta = m["zeta"].get<double>();
  out.c_comp = m["c_comp"].get<double>();
  out.num_groups = m["num_groups"].get<int>();
  return out;
}

LossConfig loss_config(const json& c) {
  const json& l = c["loss"];
  LossConfig out;
  out.cxe_weight = l["cxe_weight"].get<double>();
  out.alpha = l["alpha"].get<double>();
  out.beta = l["beta"].get<double>();
  out.lambda = l["lambda"].get<double>();
  out.psi = l["psi"].get<double>();
  return out;
}

TrainConfig train_config(const json& c) {
  const json& t = c["train"];
  TrainConfig out;
  out.lr_w = t["lr_w"].get<double>();
  out.lr_v = t["lr_v"].get<double>();
  out.epochs = t["epochs"].get<int>();
  out.batch_size = t["batch_size"].get<int>();
  out.early_stop_patience = t["early_stop_patience"].get<int>();
  out.alternate = t["alternate"].get<bool>();
  out.seed = c["seed"].get<std::uint64_t>();
  return out;
}

SearchSpace search_space(const json& c) {
  const json& s = c["search"];
  SearchSpace out;
  out.lr_w = s["lr_w"].get<std::vector<double>>();
  out.beta = s["beta"].get<std::vector<double>>();
  out.lambda = s["lambda"].get<std::vector<double>>();
  out.lr_v = s["lr_v"].get<std::vector<double>>();
  out.zeta = s["zeta"].get<std::vector<double>>();
  out.num_groups = s["num_groups"].get<std::vector<int>>();
  out.psi = s["psi"].get<std::vector<double>>();
  out.seeds = s["seeds"].get<std::vector<std::uint64_t>>();
  out.validate();
  return out;
}

SyntheticConfig synth_config(const json& c) {
  const json& s = c["synth"];
  SyntheticConfig out;
  out.num_groups = s["num_groups"].get<int>();
  out.attributes_per_group = s["attributes_per_group"].get<int>();
  out.train_classes = s["train_classes"].get<int>();
  out.val_classes = s["val_classes"].get<int>();
  out.test_classes = s["test_classes"].get<int>();
  out.feature_dim = s["feature_dim"].get<int>();
  out.samples_per_class = s["samples_per_class"].get<int>();
  out.rho = s["rho"].get<double>();
  out.sigma = s["sigma"].get<double>();
  return out;
}

// -- data ----------------------------------------------------------------------

std::string required_path(const json& c, const std::string& key) {
  const std::string p = c["data"][key].get<std::string>();
  if (p.empty()) throw Error("data." + key + " is required (flag " + flag_for("data", key) + ")");
  if (!fs::exists(p)) throw Error("data." + key + ": file not found: " + p);
  return p;
}

struct Workspace {
  ClassDescriptions u;
  SplitSpec split;
  std::optional<GroupSpec> groups;
  std::string features, labels;
  std::optional<std::string> attribute_labels;

  Workspace(const json& c, Outputs& out, bool need_groups) {
    features = required_path(c, "features");
    labels = required_path(c, "labels");
    const std::string desc = required_path(c, "descriptions");
    const std::string splits = required_path(c, "splits");
    u = read_descriptions(desc);
    split = read_splits(splits);
    split.validate();
    for (const auto& p : {features, labels, desc, splits}) out.input(p);
    if (!c["data"]["attribute_labels"].get<std::string>().empty()) {
      attribute_labels = required_path(c, "attribute_labels");
      out.input(*attribute_labels);
    }
    if (!c["data"]["groups"].get<std::string>().empty()) {
      const std::string g = required_path(c, "groups");
      groups = read_groups(g, u.attribute_names);
      out.input(g);
    } else if (need_groups) {
      throw Error("variant " + c["model"]["variant"].get<std::string>() + " requires data.groups");
    }
  }

  /// Only rows of the named classes are read into memory.
  Dataset load(const std::vector<std::string>& classes) const {
    LoadOptions opts;
    opts.class_names = classes;
    opts.attribute_names = u.attribute_names;
    opts.keep_classes = std::set<std::string>(classes.begin(), classes.end());
    Dataset ds = load_dataset(features, labels, attribute_labels, opts);
    if (ds.size() == 0) throw Error("no samples for the requested split");
    return ds;
  }
  const GroupSpec* group_ptr() const { return groups ? &*groups : nullptr; }
};

bool needs_groups(const ModelConfig& m) { return is_semantic(m.variant); }

std::string summary_json(const TrainResult& r) {
  json doc{{"best_epoch", r.best_epoch}, {"epochs_run", r.history.size()}};
  doc["best_val_balanced_acc"] =
      r.best_epoch > 0 && r.history[r.best_epoch - 1].val_balanced_acc ? json(*r.history[r.best_epoch - 1].val_balanced_acc)
                                                                       : json(nullptr);
  return doc.dump(2) + "\n";
}

Checkpoint load_checkpoint(const json& c) {
  const std::string path = c["eval"]["checkpoint"].get<std::string>();
  if (path.empty()) throw Error("eval.checkpoint is required (flag --checkpoint)");
  if (!fs::exists(path)) throw Error("checkpoint not found: " + path);
  return read_checkpoint(path);
}

// -- commands ------------------------------------------------------------------

void cmd_synth(const json& c, Outputs& out) {
  const auto bench = generate_synthetic(synth_config(c), c["seed"].get<std::uint64_t>());
  const Dataset all = merge_splits(bench);
  fs::create_directories(out.dir());
  write_features_binary(out.dir() / "features.bin", all.features);
  write_labels(out.dir() / "labels.txt", all);
  write_attribute_labels(out.dir() / "attributes.csv", *all.attribute_labels);
  write_descriptions(out.dir() / "descriptions.csv", bench.descriptions);
  write_groups(out.dir() / "groups.json", bench.groups, bench.descriptions.attribute_names);
  write_splits(out.dir() / "splits.json", bench.split);
  for (const char* f : {"features.bin", "labels.txt", "attributes.csv", "descriptions.csv", "groups.json", "splits.json"}) {
    out.adopt(f);
  }
  json data{{"data",
             {{"features", "features.bin"},
              {"labels", "labels.txt"},
              {"attribute_labels", "attributes.csv"},
              {"descriptions", "descriptions.csv"},
              {"groups", "groups.json"},
              {"splits", "splits.json"}}}};
  out.add("data.json", data.dump(2) + "\n");
}

void cmd_train(const json& c, Outputs& out) {
  const ModelConfig model = model_config(c);
  const Workspace ws(c, out, needs_groups(model));
  const Dataset train_ds = ws.load(ws.split.train);
  const ClassDescriptions u_train = ws.u.select(ws.split.train);
  std::optional<Dataset> val_ds;
  ClassDescriptions u_val;
  if (!ws.split.val.empty()) {
    val_ds = ws.load(ws.split.val);
    u_val = ws.u.select(ws.split.val);
  }
  const TrainInputs inputs{&train_ds, &u_train, val_ds ? &*val_ds : nullptr, val_ds ? &u_val : nullptr, ws.group_ptr()};
  const TrainConfig tc = train_config(c);
  const auto result = train(model, inputs, loss_config(c), tc);
  out.add("checkpoint.bin", encode_checkpoint({result.params, tc.seed, ws.u.attribute_names}));
  out.add("history.csv", history_csv(result.history));
  out.add("summary.json", summary_json(result));
}

void cmd_eval(const json& c, Outputs& out) {
  const Checkpoint ckpt = load_checkpoint(c);
  out.input(c["eval"]["checkpoint"].get<std::string>());
  const std::string split = c["eval"]["split"].get<std::string>();
  if (split != "test" && split != "val") throw Error("eval.split must be 'test' or 'val'");
  const Workspace ws(c, out, false);
  if (ckpt.attribute_names != ws.u.attribute_names) throw Error("checkpoint attributes do not match the descriptions");
  const auto& classes = split == "test" ? ws.split.test : ws.split.val;
  const Dataset ds = ws.load(classes);
  const double acc = evaluate(ckpt.params, ds, ws.u.select(classes));
  json doc{{"split", split},
           {"balanced_accuracy", acc},
           {"num_samples", ds.size()},
           {"num_classes", ds.num_classes()},
           {"variant", to_string(ckpt.params.variant)}};
  out.add("accuracy.json", doc.dump(2) + "\n");
}

json trial_to_json(const TrialResult& t) {
  const auto& k = t.config;
  return {{"lr_w", k.lr_w},   {"beta", k.beta},         {"lambda", k.lambda},         {"lr_v", k.lr_v},
          {"zeta", k.zeta},   {"num_groups", k.num_groups}, {"psi", k.psi},            {"mean", t.mean},
          {"stddev", t.stddev}, {"per_seed", t.per_seed}, {"best_epochs", t.best_epochs}, {"config_hash", k.hash()}};
}

TrialResult trial_from_json(const json& j) {
  TrialResult t;
  t.config = {j.at("lr_w").get<double>(), j.at("beta").get<double>(), j.at("lambda").get<double>(),
              j.at("lr_v").get<double>(), j.at("zeta").get<double>(), j.at("num_groups").get<int>(),
              j.at("psi").get<double>()};
  t.mean = j.at("mean").get<double>();
  t.per_seed = j.at("per_seed").get<std::vector<double>>();
  t.best_epochs = j.at("best_epochs").get<std::vector<int>>();
  return t;
}

struct SearchSetup {
  SearchBase base;
  Dataset train_ds, val_ds;
  ClassDescriptions u;
  SearchData data;
};

// Train and val classes only; the test split is never loaded.
void search_setup(const json& c, const Workspace& ws, SearchSetup& s) {
  if (ws.split.val.empty()) throw Error("search needs a non-empty val split");
  s.base = {model_config(c), loss_config(c), train_config(c)};
  s.train_ds = ws.load(ws.split.train);
  s.val_ds = ws.load(ws.split.val);
  std::vector<std::string> classes = ws.split.train;
  classes.insert(classes.end(), ws.split.val.begin(), ws.split.val.end());
  s.u = ws.u.select(classes);
  s.data = {&s.train_ds, &s.val_ds, &s.u, ws.group_ptr()};
}

void cmd_sweep(const json& c, Outputs& out, int jobs) {
  SearchSetup s;
  const Workspace ws(c, out, needs_groups(model_config(c)));
  search_setup(c, ws, s);
  const long budget = c["search"]["budget"].get<long>();
  if (budget < 1) throw Error("search.budget must be >= 1");
  const auto result = grid_search(search_space(c), s.base, s.data, static_cast<std::size_t>(budget),
                                  c["seed"].get<std::uint64_t>(), jobs);
  out.add("trials.csv", trial_table_csv(result.trials));
  out.add("best.json", trial_to_json(result.best()).dump(2) + "\n");
}

void cmd_finalize(const json& c, Outputs& out) {
  const std::string trial_path = c["finalize"]["trial"].get<std::string>();
  if (trial_path.empty()) throw Error("finalize.trial is required (flag --trial, usually best.json from sweep)");
  const TrialResult best = trial_from_json(json::parse(read_file(trial_path)));
  out.input(trial_path);
  SearchSetup s;
  const Workspace ws(c, out, needs_groups(model_config(c)));
  search_setup(c, ws, s);
  const auto final_model = finalize(best, s.base, s.data);
  out.add("checkpoint.bin", encode_checkpoint({final_model.params, s.base.train.seed, ws.u.attribute_names}));
  out.add("history.csv", history_csv(final_model.history));
  json doc{{"epochs", final_model.epochs}, {"classes", final_model.class_names}, {"trial", trial_to_json(best)}};
  out.add("final.json", doc.dump(2) + "\n");
}

void cmd_analyze_gamma(const json& c, Outputs& out) {
  const Checkpoint ckpt = load_checkpoint(c);
  out.input(c["eval"]["checkpoint"].get<std::string>());
  const Workspace ws(c, out, false);
  if (ckpt.attribute_names != ws.u.attribute_names) throw Error("checkpoint attributes do not match the descriptions");
  const Dataset train_ds = ws.load(ws.split.train);
  const Matrix occurrence = occurrence_matrix(train_ds, ws.u.select(ws.split.train));
  const auto analysis = analyze_gamma(membership(ckpt.params).gamma, occurrence, c["gamma"]["tau"].get<double>());
  out.add("gamma.json", to_json(analysis) + "\n");
}

void cmd_noise(const json& c, Outputs& out, int jobs) {
  const Workspace ws(c, out, false);
  const Dataset train_ds = ws.load(ws.split.train);
  const Dataset test_ds = ws.load(ws.split.test);
  std::optional<Dataset> val_ds;
  if (!ws.split.val.empty()) val_ds = ws.load(ws.split.val);
  std::vector<NoiseArm> arms;
  for (const auto& name : c["noise"]["arms"].get<std::vector<std::string>>()) {
    NoiseArm arm{name, model_config(c), loss_config(c), train_config(c)};
    arm.model.variant = parse_variant(name);
    if (needs_groups(arm.model) && !ws.groups) throw Error("arm " + name + " requires data.groups");
    arms.push_back(arm);
  }
  const NoiseData data{&train_ds, val_ds ? &*val_ds : nullptr, &test_ds, &ws.u, ws.group_ptr()};
  const auto curve = noise_robustness_experiment(arms, data, c["noise"]["ratios"].get<std::vector<double>>(),
                                                 c["noise"]["seeds"].get<std::vector<std::uint64_t>>(), jobs);
  out.add("noise_curve.csv", noise_curve_csv(curve));
}

// Returns false when the check exceeds the tolerance.
bool cmd_gradcheck(const json& c, Outputs& out) {
  const std::uint64_t seed = c["seed"].get<std::uint64_t>();
  const ModelConfig model = model_config(c);
  LossConfig loss = loss_config(c);
  Dataset ds;
  ClassDescriptions u;
  std::optional<GroupSpec> groups;
  if (c["data"]["features"].get<std::string>().empty()) {
    const auto bench = generate_synthetic(synth_config(c), seed);
    ds = bench.train;
    u = bench.descriptions.select(bench.train.class_names);
    groups = bench.groups;
  } else {
    const Workspace ws(c, out, needs_groups(model));
    ds = ws.load(ws.split.train);
    u = ws.u.select(ws.split.train);
    groups = ws.groups;
  }

  Rng rng(seed);
  const TrainInputs inputs{&ds, &u, nullptr, nullptr, groups ? &*groups : nullptr};
  LagoParams params = init_params(model, inputs, rng);
  if (model.variant == Variant::semantic_soft && loss.psi > 0.0) loss.gamma_sem = gamma_from_v(params.v, params.zeta).gamma;
  loss.validate();
  // Move away from the initialization so every term is exercised.
  params.w += rng.normal_matrix(params.w.rows(), params.w.cols(), 0.1);
  if (params.v.size()) params.v += rng.normal_matrix(params.v.rows(), params.v.cols(), 0.1);

  const auto n = std::min<std::size_t>(ds.size(), c["gradcheck"]["samples"].get<std::size_t>());
  if (n == 0) throw Error("gradcheck: no samples");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back(i * ds.size() / n);
  const Batch batch = make_batch(ds, attribute_targets(ds, u), rows);
  const auto report =
      finite_diff_check(params, batch, prepare_descriptions(params, u), loss, c["gradcheck"]["h"].get<double>(), seed);
  const double tol = c["gradcheck"]["tolerance"].get<double>();
  const bool passed = report.max_rel_error() <= tol;
  json doc{{"variant", to_string(model.variant)},
           {"comp_mode", to_string(model.comp_mode)},
           {"prior_mode", to_string(model.prior_mode)},
           {"max_rel_error", report.max_rel_error()},
           {"max_rel_error_w", report.max_rel_error_w},
           {"max_rel_error_v", report.max_rel_error_v},
           {"coords_w", report.coords_w},
           {"coords_v", report.coords_v},
           {"samples", n},
           {"tolerance", tol},
           {"passed", passed}};
  out.add("gradcheck.json", doc.dump(2) + "\n");
  std::cout << "max relative error " << report.max_rel_error() << (passed ? " (ok)" : " (exceeds tolerance)") << '\n';
  return passed;
}

int resolve_jobs(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("LAGO_JOBS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
    throw Error(std::string("LAGO_JOBS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LAGO zero-shot attribute models"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 0;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "directory for every artifact")->required();
  app.add_option("--seed", seed, "master seed (default 0)");
  app.add_option("--jobs", jobs, "worker threads for sweep and noise-exp (default $LAGO_JOBS or 1)");

  const json base = defaults();
  std::map<std::string, std::string> overrides;  // json pointer -> raw flag value
  std::map<std::string, std::string> flag_of;
  for (const auto& [section, body] : base.items()) {
    if (!body.is_object()) continue;
    for (const auto& [key, value] : body.items()) {
      const std::string ptr = "/" + section + "/" + key;
      const std::string flag = flag_for(section, key);
      flag_of[ptr] = flag;
      app.add_option(flag, overrides[ptr], section + "." + key + (value.is_array() ? " (comma-separated)" : ""));
    }
  }

  const std::map<std::string, std::string> commands{
      {"synth", "write a synthetic benchmark"},
      {"train", "train one model; writes checkpoint and history"},
      {"eval", "balanced accuracy of a checkpoint on the val or test split"},
      {"sweep", "grid search on train/val; writes the trial table"},
      {"finalize", "retrain the best trial on train+val"},
      {"analyze-gamma", "group-membership analysis of a checkpoint"},
      {"noise-exp", "salt-and-pepper description noise curve"},
      {"gradcheck", "finite-difference gradient check"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    json cfg = base;
    if (!config_path.empty()) {
      json file = json::parse(read_file(config_path));
      check_schema(base, file, "");
      resolve_paths(file, fs::absolute(config_path).parent_path());
      cfg.merge_patch(file);
    }
    for (const auto& [ptr, text] : overrides) {
      if (app.count(flag_of[ptr]) == 0) continue;
      const json::json_pointer p(ptr);
      cfg[p] = parse_override(base[p], text, flag_of[ptr]);
    }
    if (seed) cfg["seed"] = *seed;
    resolve_paths(cfg, fs::current_path());

    Outputs out(out_dir, command, cfg, resolve_jobs(jobs));
    bool ok = true;
    if (command == "synth") cmd_synth(cfg, out);
    else if (command == "train") cmd_train(cfg, out);
    else if (command == "eval") cmd_eval(cfg, out);
    else if (command == "sweep") cmd_sweep(cfg, out, resolve_jobs(jobs));
    else if (command == "finalize") cmd_finalize(cfg, out);
    else if (command == "analyze-gamma") cmd_analyze_gamma(cfg, out);
    else if (command == "noise-exp") cmd_noise(cfg, out, resolve_jobs(jobs));
    else if (command == "gradcheck") ok = cmd_gradcheck(cfg, out);
    out.commit();
    if (!ok) {
      std::cerr << "lago " << command << ": gradient check exceeded tolerance\n";
      return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "lago " << command << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
