#pragma once

// Workflows shared by the command-line tool, the Python module and the
// acceptance suite: input selection, explanation runs, sweeps, GLAM suites
// and run manifests.

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluekit/data.hpp"
#include "cluekit/divclue.hpp"
#include "cluekit/glam.hpp"
#include "cluekit/training.hpp"

namespace cluekit {

VaeHyper vae_hyper_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VaeHyper& h);
EnsembleHyper ensemble_hyper_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnsembleHyper& h);
MapperHyper mapper_hyper_from_json(const nlohmann::json& j);

/// Trains both models on the train split and records the entropy statistics.
ModelBundle train_bundle(const Dataset& data, const VaeHyper& vh, const EnsembleHyper& eh, std::uint64_t seed);

/// The n rows of highest predictive entropy, most uncertain first (ties by
/// lower index).
std::vector<std::size_t> top_uncertain(const Dataset& data, const ModelBundle& bundle, std::size_t n);

/// Encodings of the certain rows of a (training) dataset, for S2 starts.
struct CertainPool {
  Tensor latents;
  std::vector<int> labels;
  InitContext context(const ModelBundle& bundle) const;
};
CertainPool certain_pool(const Dataset& train, const ModelBundle& bundle, const GroupPartition& part);

enum class Method { Clue, DClue, DivSim, DivSeq, DivPen };
std::string method_name(Method m);
Method method_from_name(const std::string& s);

struct ExplainResult {
  Method method = Method::DClue;
  std::vector<std::size_t> rows;     // dataset rows explained
  std::vector<DivRunRecord> runs;    // one per row; joint_loss empty for clue/dclue

  nlohmann::json to_json() const;
  static ExplainResult from_json(const nlohmann::json& j);
  std::vector<CESet> sets() const;
};

ExplainResult explain(const Dataset& data, const std::vector<std::size_t>& rows, const ModelBundle& bundle, Method method,
                      const ExperimentConfig& cfg, const DiversitySpec& spec, const InitContext& ctx = {});

/// point,row,candidate,H,d_x,d_y,rho,cost,label,accepted
std::string scatter_csv(const ExplainResult& r);
/// point,row,class,probability
std::string label_distribution_csv(const ExplainResult& r, std::size_t classes);
/// point,row,metric,space,k,value
std::string explain_metrics_csv(const ExplainResult& r);

enum class SweepAxis { Delta, LambdaD, LambdaTheta, NI };
std::string axis_name(SweepAxis a);
SweepAxis axis_from_name(const std::string& s);

struct SweepRow {
  double value;
  std::string statistic;
  double result;
};

struct SweepSetup {
  const Dataset* data = nullptr;          // rows are drawn from here
  std::vector<std::size_t> rows;
  const ModelBundle* bundle = nullptr;
  Method method = Method::DClue;
  ExperimentConfig cfg;
  DiversitySpec spec;
  InitContext ctx;
  // lambda_theta axis only
  const Dataset* train = nullptr;
  MapperHyper mapper;
};

/// Per grid value: statistics of H and d_x over all candidates (min/max are
/// per-set values averaged over inputs; minimizer_d_x is the d_x of each
/// set's lowest-entropy candidate), and every diversity metric averaged over
/// inputs. The lambda_theta axis trains class mappers and reports H and d_x
/// of the mapped uncertain rows.
std::vector<SweepRow> sweep(SweepAxis axis, const std::vector<double>& grid, const SweepSetup& setup);
std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows);

struct GlamSuite {
  std::vector<int> groups;                                // groups with both certain and uncertain rows
  std::map<std::string, std::vector<MapperParams>> mappers;  // by variant, indexed by group
  std::map<std::string, std::vector<Baseline>> baselines;
  std::map<std::string, double> train_ms;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

inline const std::vector<std::string> kGlamVariants = {"glam1", "glam2", "glam3"};
inline const std::vector<std::string> kBaselineVariants = {"dbm-input", "dbm-latent", "nn-input", "nn-latent"};

/// Builds the requested variants for every usable class. glam2/glam3 need the
/// recorded delta-CLUE sets for the uncertain training rows (lambda_x = 0 and
/// 0.03 respectively).
GlamSuite build_glam(const ModelBundle& bundle, const Dataset& train, const GroupPartition& part,
                     const std::vector<std::string>& variants, const MapperHyper& hyper,
                     const std::vector<CESet>* clue_sets0 = nullptr, const std::vector<CESet>* clue_sets3 = nullptr);

/// Uncertain rows of `data` whose group has mappers.
std::vector<std::size_t> glam_rows(const GlamSuite& suite, const GroupPartition& part);

/// Schemes in suite order, plus per-input delta-CLUE when clue_cfg is given.
std::vector<NamedScheme> suite_schemes(const GlamSuite& suite, const ModelBundle& bundle, double lambda_x,
                                       const ExperimentConfig* clue_cfg = nullptr);

/// Command, resolved configuration, inputs and outputs with SHA-256 hashes,
/// wall time and seed.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;
  double wall_ms = 0.0;

  void add_input(const fs::path& p);
  /// Writes the file atomically and records its hash.
  void write_output(const fs::path& p, std::string_view bytes);
  nlohmann::json to_json() const;
};

/// Hash of every regular file under dir, in path order.
std::vector<std::pair<std::string, std::string>> hash_tree(const fs::path& dir);

}  // namespace cluekit
