#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluekit/io.hpp"
#include "cluekit/models.hpp"

namespace cluekit {

enum class Split : std::uint8_t { Train = 0, Test = 1 };

struct Dataset {
  Tensor inputs;             // (N, d') in [0,1]
  std::vector<int> labels;   // in [0, classes)
  std::vector<Split> split;
  std::size_t classes = 0;
  nlohmann::json spec;       // generator name, parameters and seed

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return inputs.cols(); }
  /// Rows with the given tag, in original order.
  Dataset subset(Split s) const;
  Dataset rows(const std::vector<std::size_t>& idx) const;
  void validate() const;
};

struct BlobsParams {
  std::size_t classes = 3;
  std::size_t dim = 2;
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  double spread = 0.12;
};

/// Gaussian clusters around class means drawn inside the unit hypercube,
/// clipped to [0,1].
Dataset gen_blobs(const BlobsParams& p, std::uint64_t seed);

struct DigitsParams {
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  double ambiguity = 0.15;  // probability of one segment dropped or added
  double noise = 0.05;      // pixel noise amplitude
};

/// 8x8 seven-segment glyphs of the ten digits with positional and stroke
/// jitter. Classes share segments, so a dropped or extra segment makes a
/// glyph genuinely ambiguous (8/0, 7/1, 9/3, 6/5 ...).
Dataset gen_minidigits(const DigitsParams& p, std::uint64_t seed);

/// Regenerates a dataset from its spec.
Dataset generate(const nlohmann::json& spec);

struct GroupPartition {
  std::vector<int> group;           // class label per point
  std::vector<double> entropy;
  std::vector<bool> certain;        // H <= tau_low
  std::vector<bool> uncertain;      // H > tau_high and not certain
  double tau_low = 0.0;
  double tau_high = 0.0;
  std::vector<std::string> warnings;

  /// Row indices of (group, certain) / (group, uncertain).
  std::vector<std::size_t> certain_in(int g) const;
  std::vector<std::size_t> uncertain_in(int g) const;
  std::size_t certain_count() const;
  std::size_t uncertain_count() const;
};

GroupPartition partition_by_certainty(const Dataset& data, const ModelBundle& bundle, double tau_low, double tau_high);
GroupPartition partition_by_entropy(const std::vector<int>& groups, const std::vector<double>& entropy,
                                    std::size_t classes, double tau_low, double tau_high);

/// Predictive entropy of every row.
std::vector<double> dataset_entropies(const Dataset& data, const ModelBundle& bundle);

/// dir/manifest.json (spec, labels, split) plus dir/inputs.f64.
void save_dataset(const Dataset& data, const fs::path& dir);
Dataset load_dataset(const fs::path& dir);
std::string dataset_csv(const Dataset& data);

}  // namespace cluekit
