#include "cluekit/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "cluekit/io.hpp"

namespace cluekit {
namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j[key].get<T>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; }))
      throw ConfigError("unknown " + what + " key '" + it.key() + "'");
  }
}

template <typename F>
auto wrap_json(const std::string& what, F f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

Tensor gather(const Tensor& t, const std::vector<std::size_t>& idx) {
  Tensor out(Shape{idx.size(), t.cols()});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto r = t.row(idx[i]);
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

VaeHyper vae_hyper_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"latent", "hidden", "hidden_layers", "epochs", "batch", "learning_rate", "beta", "reconstruction",
                     "gaussian_sigma"},
                 "vae");
  return wrap_json("vae config", [&] {
    VaeHyper h;
    read_key(j, "latent", h.latent);
    read_key(j, "hidden", h.hidden);
    read_key(j, "hidden_layers", h.hidden_layers);
    read_key(j, "epochs", h.epochs);
    read_key(j, "batch", h.batch);
    read_key(j, "learning_rate", h.learning_rate);
    read_key(j, "beta", h.beta);
    read_key(j, "gaussian_sigma", h.gaussian_sigma);
    if (j.contains("reconstruction")) {
      const auto r = j["reconstruction"].get<std::string>();
      if (r == "bernoulli") h.reconstruction = Reconstruction::Bernoulli;
      else if (r == "gaussian") h.reconstruction = Reconstruction::Gaussian;
      else throw ConfigError("unknown reconstruction '" + r + "'");
    }
    return h;
  });
}

nlohmann::json to_json(const VaeHyper& h) {
  return {{"latent", h.latent},
          {"hidden", h.hidden},
          {"hidden_layers", h.hidden_layers},
          {"epochs", h.epochs},
          {"batch", h.batch},
          {"learning_rate", h.learning_rate},
          {"beta", h.beta},
          {"reconstruction", h.reconstruction == Reconstruction::Bernoulli ? "bernoulli" : "gaussian"},
          {"gaussian_sigma", h.gaussian_sigma}};
}

EnsembleHyper ensemble_hyper_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"members", "hidden", "hidden_layers", "epochs", "batch", "learning_rate"}, "ensemble");
  return wrap_json("ensemble config", [&] {
    EnsembleHyper h;
    read_key(j, "members", h.members);
    read_key(j, "hidden", h.hidden);
    read_key(j, "hidden_layers", h.hidden_layers);
    read_key(j, "epochs", h.epochs);
    read_key(j, "batch", h.batch);
    read_key(j, "learning_rate", h.learning_rate);
    return h;
  });
}

nlohmann::json to_json(const EnsembleHyper& h) {
  return {{"members", h.members},   {"hidden", h.hidden}, {"hidden_layers", h.hidden_layers},
          {"epochs", h.epochs},     {"batch", h.batch},   {"learning_rate", h.learning_rate}};
}

MapperHyper mapper_hyper_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"lr", "steps", "lambda_theta", "max_certain"}, "mapper");
  return wrap_json("mapper config", [&] {
    MapperHyper h;
    read_key(j, "lr", h.lr);
    read_key(j, "steps", h.steps);
    read_key(j, "lambda_theta", h.lambda_theta);
    read_key(j, "max_certain", h.max_certain);
    h.validate();
    return h;
  });
}

ModelBundle train_bundle(const Dataset& data, const VaeHyper& vh, const EnsembleHyper& eh, std::uint64_t seed) {
  data.validate();
  const auto train = data.subset(Split::Train);
  const auto test = data.subset(Split::Test);
  if (train.size() == 0) throw ConfigError("dataset has no training rows");
  auto vae = train_vae(train.inputs, vh, seed);
  auto ens = test.size() > 0 ? train_ensemble(train.inputs, train.labels, data.classes, eh, seed, &test.inputs, &test.labels)
                             : train_ensemble(train.inputs, train.labels, data.classes, eh, seed);
  auto bundle = assemble_bundle(std::move(vae), std::move(ens), data.classes);
  record_entropy_stats(bundle, train.inputs);
  return bundle;
}

std::vector<std::size_t> top_uncertain(const Dataset& data, const ModelBundle& bundle, std::size_t n) {
  if (n == 0 || data.size() == 0) return {};
  const auto h = dataset_entropies(data, bundle);
  std::vector<std::size_t> idx(h.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return h[a] > h[b]; });
  idx.resize(std::min(n, idx.size()));
  return idx;
}

InitContext CertainPool::context(const ModelBundle& bundle) const {
  InitContext c;
  c.bundle = &bundle;
  if (!labels.empty()) {
    c.certain_latents = &latents;
    c.certain_labels = &labels;
  }
  return c;
}

CertainPool certain_pool(const Dataset& train, const ModelBundle& bundle, const GroupPartition& part) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < part.certain.size(); ++i)
    if (part.certain[i]) rows.push_back(i);
  CertainPool pool;
  if (rows.empty()) return pool;
  pool.latents = encode_batch(bundle, gather(train.inputs, rows));
  for (auto r : rows) pool.labels.push_back(train.labels[r]);
  return pool;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Clue: return "clue";
    case Method::DClue: return "dclue";
    case Method::DivSim: return "divclue-sim";
    case Method::DivSeq: return "divclue-seq";
    case Method::DivPen: return "divclue-pen";
  }
  return "?";
}

Method method_from_name(const std::string& s) {
  for (auto m : {Method::Clue, Method::DClue, Method::DivSim, Method::DivSeq, Method::DivPen})
    if (method_name(m) == s) return m;
  throw ConfigError("unknown method '" + s + "' (expected clue, dclue, divclue-sim, divclue-seq or divclue-pen)");
}

nlohmann::json ExplainResult::to_json() const {
  nlohmann::json runs_j = nlohmann::json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    auto j = runs[i].to_json();
    j["row"] = rows[i];
    if (method == Method::Clue || method == Method::DClue) {
      j.erase("joint_loss");
      j.erase("spec");
      j["method"] = method_name(method);
    }
    runs_j.push_back(std::move(j));
  }
  return {{"method", method_name(method)}, {"runs", runs_j}};
}

ExplainResult ExplainResult::from_json(const nlohmann::json& j) {
  return wrap_json("explanation file", [&] {
    ExplainResult r;
    r.method = method_from_name(j.at("method").get<std::string>());
    for (const auto& run : j.at("runs")) {
      DivRunRecord rec;
      rec.method = r.method == Method::DivSeq   ? DivMethod::Sequential
                   : r.method == Method::DivPen ? DivMethod::Penalty
                                                : DivMethod::Simultaneous;
      rec.set = CESet::from_json(run.at("ceset"));
      rec.config = rec.set.config;
      if (run.contains("spec")) rec.spec = DiversitySpec::from_json(run["spec"]);
      if (run.contains("joint_loss"))
        for (const auto& v : run["joint_loss"]) rec.joint_loss.push_back(json_to_double(v));
      for (const auto& m : run.at("metrics"))
        rec.metrics.push_back({m.at("metric"), m.at("space"), m.at("k"), json_to_double(m.at("value"))});
      r.rows.push_back(run.at("row").get<std::size_t>());
      r.runs.push_back(std::move(rec));
    }
    return r;
  });
}

std::vector<CESet> ExplainResult::sets() const {
  std::vector<CESet> out;
  for (const auto& r : runs) out.push_back(r.set);
  return out;
}

ExplainResult explain(const Dataset& data, const std::vector<std::size_t>& rows, const ModelBundle& bundle, Method method,
                      const ExperimentConfig& cfg, const DiversitySpec& spec, const InitContext& ctx) {
  cfg.validate();
  ExplainResult res;
  res.method = method;
  res.rows = rows;
  for (auto row : rows) {
    if (row >= data.size()) throw ConfigError("row " + std::to_string(row) + " is outside the dataset");
    const auto x0 = data.inputs.row(row);
    DivRunRecord rec;
    switch (method) {
      case Method::Clue: {
        rec.config = cfg;
        rec.set = clue(x0, bundle, cfg);
        rec.metrics = evaluate_metrics(rec.set, bundle.dims.classes);
        break;
      }
      case Method::DClue: {
        rec.config = cfg;
        rec.set = delta_clue(x0, bundle, cfg, ctx);
        rec.metrics = evaluate_metrics(rec.set, bundle.dims.classes);
        break;
      }
      case Method::DivSim: rec = nabla_clue_simultaneous(x0, bundle, cfg, spec, ctx); break;
      case Method::DivSeq: rec = nabla_clue_sequential(x0, bundle, cfg, spec, ctx); break;
      case Method::DivPen: rec = nabla_clue_penalty(x0, bundle, cfg, ctx); break;
    }
    res.runs.push_back(std::move(rec));
  }
  return res;
}

std::string scatter_csv(const ExplainResult& r) {
  CsvWriter w({"point", "row", "candidate", "H", "d_x", "d_y", "rho", "cost", "label", "accepted"});
  for (std::size_t p = 0; p < r.runs.size(); ++p) {
    for (const auto& c : r.runs[p].set.candidates) {
      w.cell(p).cell(r.rows[p]).cell(c.index).cell(c.H).cell(c.d_x).cell(c.d_y).cell(c.rho).cell(c.cost);
      w.cell(c.label).cell(c.accepted ? 1 : 0);
      w.end_row();
    }
  }
  return w.str();
}

std::string label_distribution_csv(const ExplainResult& r, std::size_t classes) {
  CsvWriter w({"point", "row", "class", "probability"});
  for (std::size_t p = 0; p < r.runs.size(); ++p) {
    if (r.runs[p].set.accepted().empty()) continue;  // no distribution to report
    const auto dist = label_distribution(r.runs[p].set, classes);
    for (std::size_t c = 0; c < dist.size(); ++c) {
      w.cell(p).cell(r.rows[p]).cell(c).cell(dist[c]);
      w.end_row();
    }
  }
  return w.str();
}

std::string explain_metrics_csv(const ExplainResult& r) {
  CsvWriter w({"point", "row", "metric", "space", "k", "value"});
  for (std::size_t p = 0; p < r.runs.size(); ++p) {
    for (const auto& m : r.runs[p].metrics) {
      w.cell(p).cell(r.rows[p]).cell(m.metric).cell(m.space).cell(m.k).cell(m.value);
      w.end_row();
    }
  }
  return w.str();
}

std::string axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::Delta: return "delta";
    case SweepAxis::LambdaD: return "lambda_D";
    case SweepAxis::LambdaTheta: return "lambda_theta";
    case SweepAxis::NI: return "n_i";
  }
  return "?";
}

SweepAxis axis_from_name(const std::string& s) {
  for (auto a : {SweepAxis::Delta, SweepAxis::LambdaD, SweepAxis::LambdaTheta, SweepAxis::NI})
    if (axis_name(a) == s) return a;
  if (s == "lambda_d") return SweepAxis::LambdaD;
  throw ConfigError("unknown sweep axis '" + s + "' (expected delta, lambda_D, lambda_theta or n_i)");
}

namespace {

void push_hdx_stats(std::vector<SweepRow>& out, double v, const std::vector<std::vector<const CandidateCE*>>& sets) {
  double min_h = 0, mean_h = 0, max_h = 0, min_d = 0, mean_d = 0, max_d = 0, minimizer_d = 0;
  std::size_t n = 0, nonempty = 0;
  for (const auto& s : sets) {
    if (s.empty()) continue;
    ++nonempty;
    double lo = kInf, hi = -kInf, dlo = kInf, dhi = -kInf, dmin = 0;
    for (const auto* c : s) {
      if (c->H < lo) {
        lo = c->H;
        dmin = c->d_x;
      }
      hi = std::max(hi, c->H);
      dlo = std::min(dlo, c->d_x);
      dhi = std::max(dhi, c->d_x);
      mean_h += c->H;
      mean_d += c->d_x;
      ++n;
    }
    min_h += lo;
    max_h += hi;
    min_d += dlo;
    max_d += dhi;
    minimizer_d += dmin;
  }
  const double nn = static_cast<double>(std::max<std::size_t>(nonempty, 1));
  const double nc = static_cast<double>(std::max<std::size_t>(n, 1));
  out.push_back({v, "min_H", min_h / nn});
  out.push_back({v, "mean_H", mean_h / nc});
  out.push_back({v, "max_H", max_h / nn});
  out.push_back({v, "min_d_x", min_d / nn});
  out.push_back({v, "mean_d_x", mean_d / nc});
  out.push_back({v, "max_d_x", max_d / nn});
  out.push_back({v, "minimizer_d_x", minimizer_d / nn});
}

}  // namespace

std::vector<SweepRow> sweep(SweepAxis axis, const std::vector<double>& grid, const SweepSetup& setup) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  if (!setup.data || !setup.bundle) throw ConfigError("sweep needs a dataset and a bundle");
  const auto& bundle = *setup.bundle;
  std::vector<SweepRow> out;
  for (double v : grid) {
    if (axis == SweepAxis::LambdaTheta) {
      if (!setup.train) throw ConfigError("lambda_theta sweep needs the training split");
      MapperHyper h = setup.mapper;
      h.lambda_theta = v;
      const double tl = bundle.report.at("tau_low"), th = bundle.report.at("tau_high");
      const auto ptrain = partition_by_certainty(*setup.train, bundle, tl, th);
      const auto suite = build_glam(bundle, *setup.train, ptrain, {"glam1"}, h);
      std::vector<CandidateCE> mapped;
      for (auto row : setup.rows) {
        const int g = setup.data->labels[row];
        if (std::find(suite.groups.begin(), suite.groups.end(), g) == suite.groups.end()) continue;
        mapped.push_back(apply_mapper(suite.mappers.at("glam1")[static_cast<std::size_t>(g)],
                                      setup.data->inputs.row(row), bundle, setup.cfg.lambda_x));
      }
      std::vector<std::vector<const CandidateCE*>> sets;
      for (const auto& c : mapped) sets.push_back({&c});
      push_hdx_stats(out, v, sets);
      continue;
    }
    ExperimentConfig cfg = setup.cfg;
    switch (axis) {
      case SweepAxis::Delta: cfg.delta = v; break;
      case SweepAxis::LambdaD: cfg.lambda_d = v; break;
      case SweepAxis::NI:
        if (v < 0 || v != std::floor(v)) throw ConfigError("n_i grid values must be non-negative integers");
        cfg.n_i = static_cast<std::size_t>(v);
        break;
      default: break;
    }
    const auto res = explain(*setup.data, setup.rows, bundle, setup.method, cfg, setup.spec, setup.ctx);
    std::vector<std::vector<const CandidateCE*>> sets;
    std::map<std::string, double> metric_sum;
    std::vector<std::string> metric_order;
    for (const auto& run : res.runs) {
      std::vector<const CandidateCE*> s;
      for (const auto& c : run.set.candidates) s.push_back(&c);
      sets.push_back(std::move(s));
      for (const auto& m : run.metrics) {
        const auto key = m.metric + "_" + m.space;
        if (!metric_sum.count(key)) metric_order.push_back(key);
        metric_sum[key] += m.value;
      }
    }
    push_hdx_stats(out, v, sets);
    const double n = static_cast<double>(std::max<std::size_t>(res.runs.size(), 1));
    for (const auto& key : metric_order) out.push_back({v, key, metric_sum[key] / n});
  }
  return out;
}

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
  CsvWriter w({"axis", "value", "statistic", "result"});
  for (const auto& r : rows) {
    w.cell(axis_name(axis)).cell(r.value).cell(r.statistic).cell(r.result);
    w.end_row();
  }
  return w.str();
}

nlohmann::json GlamSuite::to_json() const {
  nlohmann::json j = {{"groups", groups}, {"warnings", warnings}};
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [name, list] : mappers) {
    auto arr = nlohmann::json::array();
    for (auto g : groups) arr.push_back(list[static_cast<std::size_t>(g)].to_json());
    m[name] = arr;
  }
  nlohmann::json b = nlohmann::json::object();
  for (const auto& [name, list] : baselines) {
    auto arr = nlohmann::json::array();
    for (auto g : groups) arr.push_back(list[static_cast<std::size_t>(g)].to_json());
    b[name] = arr;
  }
  j["mappers"] = m;
  j["baselines"] = b;
  return j;
}

GlamSuite build_glam(const ModelBundle& bundle, const Dataset& train, const GroupPartition& part,
                     const std::vector<std::string>& variants, const MapperHyper& hyper,
                     const std::vector<CESet>* clue_sets0, const std::vector<CESet>* clue_sets3) {
  hyper.validate();
  GlamSuite suite;
  const auto classes = bundle.dims.classes;
  for (const auto& v : variants) {
    const bool known = std::find(kGlamVariants.begin(), kGlamVariants.end(), v) != kGlamVariants.end() ||
                       std::find(kBaselineVariants.begin(), kBaselineVariants.end(), v) != kBaselineVariants.end();
    if (!known) throw ConfigError("unknown GLAM variant '" + v + "'");
    if (v == "glam2" && !clue_sets0)
      throw ConfigError("glam2 requires delta-CLUE sets computed at lambda_x = 0 for the uncertain training rows");
    if (v == "glam3" && !clue_sets3)
      throw ConfigError("glam3 requires delta-CLUE sets computed at lambda_x = 0.03 for the uncertain training rows");
  }
  std::vector<Tensor> xu(classes), xc(classes), t0(classes), t3(classes);
  for (std::size_t g = 0; g < classes; ++g) {
    const auto ui = part.uncertain_in(static_cast<int>(g));
    const auto ci = part.certain_in(static_cast<int>(g));
    if (ui.empty() || ci.empty()) {
      suite.warnings.push_back("group " + std::to_string(g) + " has " + std::to_string(ci.size()) + " certain and " +
                               std::to_string(ui.size()) + " uncertain training rows; no mapper built");
      continue;
    }
    xu[g] = gather(train.inputs, ui);
    xc[g] = gather(train.inputs, ci);
    if (clue_sets0) t0[g] = ce_targets(*clue_sets0, static_cast<int>(g));
    if (clue_sets3) t3[g] = ce_targets(*clue_sets3, static_cast<int>(g));
    bool ok = true;
    for (const auto& v : variants) {
      if ((v == "glam2" && t0[g].size() == 0) || (v == "glam3" && t3[g].size() == 0)) {
        suite.warnings.push_back("group " + std::to_string(g) + " has no accepted delta-CLUE targets for " + v +
                                 "; no mapper built");
        ok = false;
      }
    }
    if (ok) suite.groups.push_back(static_cast<int>(g));
  }
  for (const auto& v : variants) {
    double total = 0.0;
    const auto t_start = std::chrono::steady_clock::now();
    if (v.rfind("glam", 0) == 0) {
      auto& list = suite.mappers[v];
      list.resize(classes);
      for (auto g : suite.groups) {
        const auto gi = static_cast<std::size_t>(g);
        const Tensor& targets = v == "glam1" ? xc[gi] : v == "glam2" ? t0[gi] : t3[gi];
        list[gi] = train_mapper(xu[gi], targets, bundle, hyper, g, g);
        list[gi].variant = v;
        total += list[gi].train_ms;
      }
    } else {
      auto& list = suite.baselines[v];
      list.resize(classes);
      const auto kind = baseline_from_name(v);
      for (auto g : suite.groups) {
        const auto gi = static_cast<std::size_t>(g);
        list[gi] = (kind == BaselineKind::DbmInput || kind == BaselineKind::DbmLatent)
                       ? dbm_baseline(kind, xu[gi], xc[gi], bundle, g, g)
                       : nn_baseline(kind, xc[gi], bundle, g, g);
      }
      total = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
    }
    suite.train_ms[v] = total;
  }
  return suite;
}

std::vector<std::size_t> glam_rows(const GlamSuite& suite, const GroupPartition& part) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < part.uncertain.size(); ++i)
    if (part.uncertain[i] && std::find(suite.groups.begin(), suite.groups.end(), part.group[i]) != suite.groups.end())
      rows.push_back(i);
  return rows;
}

std::vector<NamedScheme> suite_schemes(const GlamSuite& suite, const ModelBundle& bundle, double lambda_x,
                                       const ExperimentConfig* clue_cfg) {
  std::vector<NamedScheme> out;
  const auto* b = &bundle;
  for (const auto& v : kGlamVariants) {
    auto it = suite.mappers.find(v);
    if (it == suite.mappers.end()) continue;
    const auto* list = &it->second;
    out.push_back({v, [=](std::span<const double> x, int g) { return apply_mapper((*list)[static_cast<std::size_t>(g)], x, *b, lambda_x); },
                   suite.train_ms.at(v)});
  }
  for (const auto& v : kBaselineVariants) {
    auto it = suite.baselines.find(v);
    if (it == suite.baselines.end()) continue;
    const auto* list = &it->second;
    out.push_back({v, [=](std::span<const double> x, int g) { return apply_baseline((*list)[static_cast<std::size_t>(g)], x, *b, lambda_x); },
                   suite.train_ms.at(v)});
  }
  if (clue_cfg) {
    ExperimentConfig cfg = *clue_cfg;
    cfg.lambda_x = lambda_x;
    out.push_back({"dclue", [=](std::span<const double> x, int) {
                     const auto set = delta_clue(x, *b, cfg);
                     const CandidateCE* best = &set.candidates.front();
                     for (const auto& c : set.candidates)
                       if (c.cost < best->cost) best = &c;
                     return *best;
                   },
                   0.0});
  }
  return out;
}

void RunManifest::add_input(const fs::path& p) {
  if (fs::is_directory(p)) {
    // An upstream run.json records provenance, not content.
    for (const auto& [rel, h] : hash_tree(p))
      if (rel != "run.json") inputs.emplace_back((p / rel).generic_string(), h);
  } else {
    inputs.emplace_back(p.generic_string(), sha256_file(p));
  }
}

void RunManifest::write_output(const fs::path& p, std::string_view bytes) {
  write_atomic(p, bytes);
  outputs.emplace_back(p.filename().generic_string(), sha256_hex(bytes));
}

nlohmann::json RunManifest::to_json() const {
  auto list = [](const auto& v) {
    auto a = nlohmann::json::array();
    for (const auto& [p, h] : v) a.push_back({{"path", p}, {"sha256", h}});
    return a;
  };
  return {{"command", command}, {"config", config},  {"seed", seed},
          {"inputs", list(inputs)}, {"outputs", list(outputs)}, {"wall_ms", wall_ms}};
}

std::vector<std::pair<std::string, std::string>> hash_tree(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    out.emplace_back(fs::relative(e.path(), dir).generic_string(), sha256_file(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cluekit
