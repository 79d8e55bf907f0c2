// cluekit command-line tool.
//
//   cluekit gen-data --generator minidigits --seed 7 --out data/
//   cluekit train    --data data/ --seed 7 --out bundle/
//   cluekit explain  --bundle bundle/ --data data/ --top 8 --method dclue --out runs/explain
//   cluekit sweep    --bundle bundle/ --data data/ --axis delta --grid 0.5,1,2,4 --out runs/sweep
//   cluekit glam     --bundle bundle/ --data data/ --variant all --clue-sets0 a.json --clue-sets3 b.json --out runs/glam
//   cluekit bench    --bundle bundle/ --data data/ --repetitions 5 --out runs/bench
//
// Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.

#include <chrono>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "cluekit/bundle_io.hpp"
#include "cluekit/experiments.hpp"
#include "cluekit/io.hpp"

using namespace cluekit;
using json = nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string bundle;
  std::optional<std::size_t> threads;
};

// Flag values land in the config document; the document is the single source
// the commands read from.
struct Overrides {
  std::vector<std::pair<std::string, std::function<void(json&)>>> setters;

  template <typename T>
  void bind(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = nullptr;
    if constexpr (std::is_same_v<T, bool>) opt = app->add_flag(flag, *value, help);
    else opt = app->add_option(flag, *value, help);
    setters.emplace_back(pointer, [value, opt, pointer](json& doc) {
      if (opt->count() > 0) doc[json::json_pointer(pointer)] = *value;
    });
  }
  void apply(json& doc) const {
    for (const auto& [_, set] : setters) set(doc);
  }
};

void experiment_flags(CLI::App* app, Overrides& ov) {
  ov.bind<double>(app, "--delta", "/experiment/delta", "latent ball radius (inf allowed)");
  ov.bind<std::size_t>(app, "--k", "/experiment/k", "candidates per input");
  ov.bind<double>(app, "--r", "/experiment/r", "initialization radius");
  ov.bind<std::string>(app, "--scheme", "/experiment/scheme", "initialization scheme S1..S5");
  ov.bind<double>(app, "--lambda-x", "/experiment/lambda_x", "input distance weight");
  ov.bind<double>(app, "--lambda-y", "/experiment/lambda_y", "prediction distance weight");
  ov.bind<double>(app, "--lambda-d", "/experiment/lambda_d", "diversity weight");
  ov.bind<std::size_t>(app, "--n-i", "/experiment/n_i", "diversity pre-search steps");
  ov.bind<double>(app, "--lr", "/experiment/lr", "step size");
  ov.bind<std::size_t>(app, "--iters", "/experiment/iters", "descent steps");
  ov.bind<double>(app, "--h-threshold", "/experiment/h_threshold", "acceptance entropy threshold");
  ov.bind<bool>(app, "--trace", "/experiment/trace", "keep per-step trajectories");
  ov.bind<std::string>(app, "--metric", "/diversity/metric", "diversity metric (dpp, apd, coverage)");
  ov.bind<std::string>(app, "--space", "/diversity/space", "diversity space (input, latent, prediction)");
}

void selection_flags(CLI::App* app, Overrides& ov) {
  ov.bind<std::string>(app, "--data", "/data", "dataset directory");
  ov.bind<std::string>(app, "--split", "/select/split", "train or test (default test)");
  ov.bind<std::size_t>(app, "--top", "/select/top", "explain the n most uncertain rows (default 8)");
  ov.bind<bool>(app, "--uncertain", "/select/uncertain", "explain every row above the bundle's tau_high instead");
}

json load_config(const Common& c) {
  if (c.config_path.empty()) return json::object();
  if (!fs::exists(c.config_path)) throw ConfigError("config file '" + c.config_path + "' does not exist");
  try {
    auto j = json::parse(read_file(c.config_path));
    if (!j.is_object()) throw ConfigError("config file '" + c.config_path + "' must hold a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + c.config_path + "': " + e.what());
  }
}

json section(const json& doc, const char* key) {
  return doc.contains(key) ? doc[key] : json::object();
}

std::uint64_t resolved_seed(const json& doc) { return doc.value("seed", std::uint64_t{0}); }

ExperimentConfig experiment_config(const json& doc) {
  ExperimentConfig cfg;
  cfg.seed = resolved_seed(doc);
  cfg.update(section(doc, "experiment"));
  cfg.validate();
  return cfg;
}

DiversitySpec diversity_spec(const json& doc) { return DiversitySpec::from_json(section(doc, "diversity")); }

fs::path required_path(const json& doc, const char* key, const std::string& what) {
  if (!doc.contains(key)) throw ConfigError(what + " path is required (--" + std::string(key) + ")");
  fs::path p = doc[key].get<std::string>();
  if (!fs::exists(p)) throw ConfigError(what + " path '" + p.string() + "' does not exist");
  return p;
}

Split split_of(const json& doc) {
  const auto s = section(doc, "select").value("split", std::string("test"));
  if (s == "test") return Split::Test;
  if (s == "train") return Split::Train;
  throw ConfigError("unknown split '" + s + "'");
}

struct Loaded {
  ModelBundle bundle;
  Dataset full;
  Dataset train;
  Dataset part;  // the selected split
};

Loaded load_inputs(const json& doc, RunManifest& m) {
  Loaded l;
  const auto bpath = required_path(doc, "bundle", "bundle");
  const auto dpath = required_path(doc, "data", "dataset");
  l.bundle = load_bundle(bpath);
  l.full = load_dataset(dpath);
  if (l.full.dim() != l.bundle.dims.input) throw ConfigError("dataset and bundle input dimensions differ");
  l.train = l.full.subset(Split::Train);
  l.part = l.full.subset(split_of(doc));
  m.add_input(bpath);
  m.add_input(dpath);
  return l;
}

std::vector<std::size_t> selected_rows(const json& doc, const Loaded& l) {
  const auto sel = section(doc, "select");
  if (sel.value("uncertain", false)) {
    const double th = l.bundle.report.at("tau_high");
    const auto p = partition_by_certainty(l.part, l.bundle, l.bundle.report.at("tau_low"), th);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < p.uncertain.size(); ++i)
      if (p.uncertain[i]) rows.push_back(i);
    return rows;
  }
  return top_uncertain(l.part, l.bundle, sel.value("top", std::size_t{8}));
}

GroupPartition train_partition(const Loaded& l) {
  return partition_by_certainty(l.train, l.bundle, l.bundle.report.at("tau_low"), l.bundle.report.at("tau_high"));
}

void finish(RunManifest& m, const fs::path& out, std::chrono::steady_clock::time_point t0) {
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  write_atomic(out / "run.json", dump_json(m.to_json()));
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(item == "inf" ? kInf : std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("grid value '" + item + "' is not a number");
    }
  }
  return out;
}

// ---- commands ---------------------------------------------------------------

void cmd_gen_data(const json& doc, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  json spec = section(doc, "generator_params");
  spec["generator"] = doc.value("generator", std::string("minidigits"));
  spec["seed"] = resolved_seed(doc);
  const auto data = generate(spec);
  fs::create_directories(out);
  save_dataset(data, out);
  RunManifest m;
  m.command = "gen-data";
  m.config = doc;
  m.seed = resolved_seed(doc);
  m.write_output(out / "data.csv", dataset_csv(data));
  for (const auto& [p, h] : hash_tree(out))
    if (p == "manifest.json" || p == "inputs.f64") m.outputs.emplace_back(p, h);
  finish(m, out, t0);
  std::cout << "dataset: " << data.size() << " rows, " << data.dim() << " columns, " << data.classes << " classes\n";
}

void cmd_train(const json& doc, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dpath = required_path(doc, "data", "dataset");
  const auto data = load_dataset(dpath);
  const auto vh = vae_hyper_from_json(section(doc, "vae"));
  const auto eh = ensemble_hyper_from_json(section(doc, "ensemble"));
  const auto seed = resolved_seed(doc);
  const auto bundle = train_bundle(data, vh, eh, seed);
  fs::create_directories(out);
  const json meta = {{"dataset_spec", data.spec}, {"vae", to_json(vh)}, {"ensemble", to_json(eh)}, {"seed", seed}};
  save_bundle(bundle, out, meta);
  RunManifest m;
  m.command = "train";
  m.config = doc;
  m.seed = seed;
  m.add_input(dpath);
  m.write_output(out / "training_report.json", dump_json(bundle.report));
  for (const auto& f : bundle_files(out)) m.outputs.emplace_back(f, sha256_file(out / f));
  finish(m, out, t0);
  std::cout << "held-out accuracy " << format_double(bundle.report["ensemble"]["heldout_accuracy"].get<double>())
            << ", median training entropy " << format_double(bundle.report["train_median_entropy"].get<double>())
            << "\n";
}

void cmd_explain(const json& doc, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest m;
  m.command = "explain";
  m.config = doc;
  m.seed = resolved_seed(doc);
  const auto l = load_inputs(doc, m);
  const auto cfg = experiment_config(doc);
  const auto method = method_from_name(doc.value("method", std::string("dclue")));
  const auto spec = diversity_spec(doc);
  const auto rows = selected_rows(doc, l);
  const auto pool = certain_pool(l.train, l.bundle, train_partition(l));
  const auto res = explain(l.part, rows, l.bundle, method, cfg, spec, pool.context(l.bundle));
  fs::create_directories(out);
  m.write_output(out / "ceset.json", dump_json(res.to_json()));
  m.write_output(out / "scatter.csv", scatter_csv(res));
  m.write_output(out / "labels.csv", label_distribution_csv(res, l.bundle.dims.classes));
  m.write_output(out / "metrics.csv", explain_metrics_csv(res));
  finish(m, out, t0);
  std::size_t n = 0, acc = 0;
  for (const auto& r : res.runs) {
    n += r.set.candidates.size();
    acc += r.set.accepted().size();
  }
  std::cout << method_name(method) << ": " << rows.size() << " inputs, " << n << " candidates, " << acc
            << " accepted\n";
}

void cmd_sweep(const json& doc, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest m;
  m.command = "sweep";
  m.config = doc;
  m.seed = resolved_seed(doc);
  const auto l = load_inputs(doc, m);
  const auto axis = axis_from_name(doc.value("axis", std::string("delta")));
  std::vector<double> grid;
  if (doc.contains("grid")) {
    if (doc["grid"].is_string()) grid = parse_grid(doc["grid"].get<std::string>());
    else for (const auto& v : doc["grid"]) grid.push_back(json_to_double(v));
  }
  if (grid.empty()) throw ConfigError("sweep grid is empty (--grid a,b,c)");
  const auto pool = certain_pool(l.train, l.bundle, train_partition(l));
  SweepSetup s;
  s.data = &l.part;
  s.bundle = &l.bundle;
  s.cfg = experiment_config(doc);
  s.spec = diversity_spec(doc);
  s.ctx = pool.context(l.bundle);
  s.train = &l.train;
  s.mapper = mapper_hyper_from_json(section(doc, "mapper"));
  const std::string default_method = axis == SweepAxis::LambdaD || axis == SweepAxis::NI ? "divclue-sim" : "dclue";
  s.method = method_from_name(doc.value("method", default_method));
  if (axis == SweepAxis::LambdaTheta) {
    const auto p = partition_by_certainty(l.part, l.bundle, l.bundle.report.at("tau_low"), l.bundle.report.at("tau_high"));
    for (std::size_t i = 0; i < p.uncertain.size(); ++i)
      if (p.uncertain[i]) s.rows.push_back(i);
  } else {
    s.rows = selected_rows(doc, l);
  }
  const auto rows = sweep(axis, grid, s);
  fs::create_directories(out);
  m.write_output(out / "sweep.csv", sweep_csv(axis, rows));
  finish(m, out, t0);
  std::cout << axis_name(axis) << " sweep: " << grid.size() << " grid values, " << s.rows.size() << " inputs\n";
}

std::vector<std::string> requested_variants(const json& doc, const std::vector<std::string>& fallback) {
  std::vector<std::string> v;
  if (doc.contains("variants")) {
    for (const auto& e : doc["variants"]) {
      const auto s = e.get<std::string>();
      if (s == "all") {
        v.insert(v.end(), kGlamVariants.begin(), kGlamVariants.end());
        v.insert(v.end(), kBaselineVariants.begin(), kBaselineVariants.end());
      } else {
        v.push_back(s);
      }
    }
  }
  return v.empty() ? fallback : v;
}

std::optional<std::vector<CESet>> clue_sets(const json& doc, const char* key, RunManifest& m) {
  if (!doc.contains(key)) return std::nullopt;
  fs::path p = doc[key].get<std::string>();
  if (fs::is_directory(p)) p /= "ceset.json";  // an explain output directory
  if (!fs::exists(p)) throw ConfigError("CESet file '" + p.string() + "' does not exist");
  m.add_input(p);
  try {
    return ExplainResult::from_json(json::parse(read_file(p))).sets();
  } catch (const json::parse_error& e) {
    throw ConfigError("CESet file '" + p.string() + "': " + e.what());
  }
}

void cmd_glam(const json& doc, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest m;
  m.command = "glam";
  m.config = doc;
  m.seed = resolved_seed(doc);
  const auto l = load_inputs(doc, m);
  auto variants = requested_variants(doc, {"glam1"});
  const auto sets0 = clue_sets(doc, "clue_sets0", m);
  const auto sets3 = clue_sets(doc, "clue_sets3", m);
  const auto hyper = mapper_hyper_from_json(section(doc, "mapper"));
  const auto ptrain = train_partition(l);
  const auto suite = build_glam(l.bundle, l.train, ptrain, variants, hyper, sets0 ? &*sets0 : nullptr,
                                sets3 ? &*sets3 : nullptr);
  for (const auto& w : suite.warnings) std::cerr << "warning: " << w << "\n";
  const double lambda_x = doc.value("lambda_x", 0.03);
  const auto pp = partition_by_certainty(l.part, l.bundle, l.bundle.report.at("tau_low"), l.bundle.report.at("tau_high"));
  const auto rows = glam_rows(suite, pp);
  const auto cfg = experiment_config(doc);
  const bool with_clue = doc.value("with_clue", true);
  const auto schemes = suite_schemes(suite, l.bundle, lambda_x, with_clue ? &cfg : nullptr);
  Tensor xs(Shape{rows.size(), l.part.dim()});
  std::vector<int> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = l.part.inputs.row(rows[i]);
    std::copy(r.begin(), r.end(), xs.row(i).begin());
    groups.push_back(l.part.labels[rows[i]]);
  }
  const auto table = evaluate_schemes(xs, groups, schemes, lambda_x, doc.value("repetitions", std::size_t{1}));
  fs::create_directories(out);
  m.write_output(out / "mappers.json", dump_json(suite.to_json()));
  m.write_output(out / "comparison.csv", table.csv());
  for (const auto& s : table.summary) {
    CsvWriter w({"point", "row", "group", "H", "d_x", "cost", "label"});
    for (const auto& r : table.rows) {
      if (r.scheme != s.scheme) continue;
      w.cell(r.point).cell(rows[r.point]).cell(r.group).cell(r.H).cell(r.d_x).cell(r.cost).cell(r.label);
      w.end_row();
    }
    m.write_output(out / ("dist_" + s.scheme + ".csv"), w.str());
  }
  finish(m, out, t0);
  for (const auto& s : table.summary) {
    std::cout << s.scheme << ": mean cost " << format_double(s.mean_cost) << ", target-group fraction "
              << format_double(s.valid_fraction) << "\n";
  }
}

void cmd_bench(const json& doc, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest m;
  m.command = "bench";
  m.config = doc;
  m.seed = resolved_seed(doc);
  const auto l = load_inputs(doc, m);
  std::vector<std::string> fallback = {"glam1"};
  fallback.insert(fallback.end(), kBaselineVariants.begin(), kBaselineVariants.end());
  const auto variants = requested_variants(doc, fallback);
  const auto hyper = mapper_hyper_from_json(section(doc, "mapper"));
  const auto ptrain = train_partition(l);
  const auto suite = build_glam(l.bundle, l.train, ptrain, variants, hyper);
  const auto pp = partition_by_certainty(l.part, l.bundle, l.bundle.report.at("tau_low"), l.bundle.report.at("tau_high"));
  auto rows = glam_rows(suite, pp);
  if (rows.size() > doc.value("max_inputs", std::size_t{32})) rows.resize(doc.value("max_inputs", std::size_t{32}));
  const auto cfg = experiment_config(doc);
  const double lambda_x = doc.value("lambda_x", 0.03);
  const auto schemes = suite_schemes(suite, l.bundle, lambda_x, &cfg);
  Tensor xs(Shape{rows.size(), l.part.dim()});
  std::vector<int> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = l.part.inputs.row(rows[i]);
    std::copy(r.begin(), r.end(), xs.row(i).begin());
    groups.push_back(l.part.labels[rows[i]]);
  }
  const auto reps = doc.value("repetitions", std::size_t{5});
  const auto table = evaluate_schemes(xs, groups, schemes, lambda_x, reps);
  const double clue_ms = table.find("dclue").median_time_ms;
  CsvWriter w({"scheme", "inputs", "repetitions", "median_per_ce_ms", "train_ms", "ratio_to_dclue"});
  for (const auto& s : table.summary) {
    w.cell(s.scheme).cell(s.n).cell(reps).cell(s.median_time_ms).cell(s.train_ms);
    w.cell(clue_ms > 0 ? s.median_time_ms / clue_ms : 0.0);
    w.end_row();
  }
  fs::create_directories(out);
  m.write_output(out / "timing.csv", w.str());
  finish(m, out, t0);
  for (const auto& s : table.summary)
    std::cout << s.scheme << ": " << format_double(s.median_time_ms) << " ms per CE\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual latent uncertainty explanations"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "JSON config file; flags override its values");
  app.add_option("--seed", common.seed, "root seed");
  app.add_option("--out", common.out, "output directory");
  app.add_option("--bundle", common.bundle, "model bundle directory");
  app.add_option("--threads", common.threads, "worker threads for independent descents");

  Overrides ov;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  ov.bind<std::string>(gen, "--generator", "/generator", "blobs or minidigits");
  ov.bind<std::size_t>(gen, "--n-train", "/generator_params/n_train", "training rows");
  ov.bind<std::size_t>(gen, "--n-test", "/generator_params/n_test", "test rows");
  ov.bind<std::size_t>(gen, "--classes", "/generator_params/classes", "blobs: classes");
  ov.bind<std::size_t>(gen, "--dim", "/generator_params/dim", "blobs: dimension");
  ov.bind<double>(gen, "--spread", "/generator_params/spread", "blobs: cluster spread");
  ov.bind<double>(gen, "--ambiguity", "/generator_params/ambiguity", "minidigits: segment toggle probability");
  ov.bind<double>(gen, "--noise", "/generator_params/noise", "minidigits: pixel noise");

  auto* train = app.add_subcommand("train", "train the VAE and the ensemble");
  ov.bind<std::string>(train, "--data", "/data", "dataset directory");
  ov.bind<std::size_t>(train, "--latent", "/vae/latent", "latent dimension");
  ov.bind<std::size_t>(train, "--vae-epochs", "/vae/epochs", "VAE epochs");
  ov.bind<std::size_t>(train, "--ensemble-epochs", "/ensemble/epochs", "ensemble epochs");
  ov.bind<std::string>(train, "--reconstruction", "/vae/reconstruction", "bernoulli or gaussian");

  auto* expl = app.add_subcommand("explain", "generate counterfactuals for the most uncertain inputs");
  selection_flags(expl, ov);
  experiment_flags(expl, ov);
  ov.bind<std::string>(expl, "--method", "/method", "clue, dclue, divclue-sim, divclue-seq, divclue-pen");

  auto* sw = app.add_subcommand("sweep", "sweep one parameter over a grid");
  selection_flags(sw, ov);
  experiment_flags(sw, ov);
  ov.bind<std::string>(sw, "--method", "/method", "method for delta, lambda_D and n_i sweeps");
  ov.bind<std::string>(sw, "--axis", "/axis", "delta, lambda_D, lambda_theta or n_i");
  ov.bind<std::string>(sw, "--grid", "/grid", "comma-separated grid values");

  auto* glam = app.add_subcommand("glam", "train and compare amortized mappers and baselines");
  ov.bind<std::string>(glam, "--data", "/data", "dataset directory");
  ov.bind<std::string>(glam, "--split", "/select/split", "evaluation split (default test)");
  ov.bind<std::vector<std::string>>(glam, "--variant", "/variants",
                                    "glam1, glam2, glam3, dbm-input, dbm-latent, nn-input, nn-latent or all");
  ov.bind<std::string>(glam, "--clue-sets0", "/clue_sets0", "explain output (ceset.json or its directory) at lambda_x = 0 on uncertain training rows");
  ov.bind<std::string>(glam, "--clue-sets3", "/clue_sets3", "explain output (ceset.json or its directory) at lambda_x = 0.03 on uncertain training rows");
  ov.bind<double>(glam, "--lambda-x", "/lambda_x", "cost weight for d_x (default 0.03)");
  ov.bind<double>(glam, "--lambda-theta", "/mapper/lambda_theta", "mapper l1 weight");
  ov.bind<std::size_t>(glam, "--steps", "/mapper/steps", "mapper training steps");
  ov.bind<std::size_t>(glam, "--repetitions", "/repetitions", "timing repetitions");
  ov.bind<bool>(glam, "--with-clue", "/with_clue", "include per-input delta-CLUE in the table");

  auto* bench = app.add_subcommand("bench", "time per-CE inference of every scheme");
  ov.bind<std::string>(bench, "--data", "/data", "dataset directory");
  ov.bind<std::vector<std::string>>(bench, "--schemes", "/variants", "mapper and baseline variants to time");
  ov.bind<std::size_t>(bench, "--repetitions", "/repetitions", "repetitions (median reported)");
  ov.bind<std::size_t>(bench, "--max-inputs", "/max_inputs", "uncertain inputs timed (default 32)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    json doc = load_config(common);
    ov.apply(doc);
    if (common.seed) doc["seed"] = *common.seed;
    if (!common.bundle.empty()) doc["bundle"] = common.bundle;
    if (common.threads) doc["/experiment/threads"_json_pointer] = *common.threads;
    const fs::path out = common.out;
    auto* sub = app.get_subcommands().front();
    const auto name = sub->get_name();
    if (name == "gen-data") cmd_gen_data(doc, out);
    else if (name == "train") cmd_train(doc, out);
    else if (name == "explain") cmd_explain(doc, out);
    else if (name == "sweep") cmd_sweep(doc, out);
    else if (name == "glam") cmd_glam(doc, out);
    else if (name == "bench") cmd_bench(doc, out);
    return 0;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed configuration: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
