#include "cluekit/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cluekit/rng.hpp"

namespace cluekit {

Dataset Dataset::rows(const std::vector<std::size_t>& idx) const {
  Dataset out;
  out.classes = classes;
  out.spec = spec;
  out.inputs = Tensor(Shape{idx.size(), dim()});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = inputs.row(idx[r]);
    std::copy(src.begin(), src.end(), out.inputs.row(r).begin());
    out.labels.push_back(labels[idx[r]]);
    out.split.push_back(split[idx[r]]);
  }
  return out;
}

Dataset Dataset::subset(Split s) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < size(); ++i)
    if (split[i] == s) idx.push_back(i);
  return rows(idx);
}

void Dataset::validate() const {
  if (inputs.rank() != 2 || inputs.rows() != labels.size() || split.size() != labels.size()) {
    throw ShapeError("dataset: inputs, labels and split disagree in length");
  }
  for (double v : inputs.data())
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("dataset: input value outside [0,1]");
  std::vector<bool> seen(classes, false);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) throw ConfigError("dataset: label out of range");
    if (split[i] == Split::Train) seen[static_cast<std::size_t>(labels[i])] = true;
  }
  for (std::size_t c = 0; c < classes; ++c)
    if (!seen[c]) throw ConfigError("dataset: class " + std::to_string(c) + " missing from the train split");
}

Dataset gen_blobs(const BlobsParams& p, std::uint64_t seed) {
  if (p.classes < 2 || p.dim < 2) throw ConfigError("gen_blobs: need classes >= 2 and dim >= 2");
  if (p.spread < 0.0 || !std::isfinite(p.spread)) throw ConfigError("gen_blobs: spread must be finite and >= 0");
  if (p.n_train < p.classes) throw ConfigError("gen_blobs: n_train must cover every class");
  auto rng = make_rng(seed, Stream::Data, {0});
  std::uniform_real_distribution<double> u(0.15, 0.85);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Means are redrawn until every pair is at least min_sep apart, so small
  // spreads give separable classes.
  const double min_sep = 0.4;
  std::vector<Vec> means;
  for (std::size_t attempt = 0; means.size() < p.classes; ++attempt) {
    if (attempt > 100000) throw ConfigError("gen_blobs: cannot place that many separated class means");
    Vec m(p.dim);
    for (auto& v : m) v = u(rng);
    bool ok = true;
    for (const auto& o : means) {
      double s = 0.0;
      for (std::size_t j = 0; j < p.dim; ++j) s += (m[j] - o[j]) * (m[j] - o[j]);
      ok = ok && std::sqrt(s) >= min_sep;
    }
    if (ok) means.push_back(std::move(m));
  }

  Dataset d;
  d.classes = p.classes;
  const std::size_t n = p.n_train + p.n_test;
  d.inputs = Tensor(Shape{n, p.dim});
  for (std::size_t i = 0; i < n; ++i) {
    const bool train = i < p.n_train;
    const std::size_t local = train ? i : i - p.n_train;
    const int label = static_cast<int>(local % p.classes);
    for (std::size_t j = 0; j < p.dim; ++j) {
      const double v = means[static_cast<std::size_t>(label)][j] + p.spread * normal(rng);
      d.inputs.at(i, j) = std::clamp(v, 0.0, 1.0);
    }
    d.labels.push_back(label);
    d.split.push_back(train ? Split::Train : Split::Test);
  }
  d.spec = {{"generator", "blobs"},
            {"classes", p.classes},
            {"dim", p.dim},
            {"n_train", p.n_train},
            {"n_test", p.n_test},
            {"spread", p.spread},
            {"seed", seed}};
  d.validate();
  return d;
}

namespace {

// Segment endpoints in pixel coordinates (x right, y down) on an 8x8 grid.
struct Segment {
  double x0, y0, x1, y1;
};
constexpr double kLeft = 1.5, kRight = 5.5, kTop = 1.0, kMid = 3.75, kBottom = 6.5;
const std::array<Segment, 7> kSegments = {{
    {kLeft, kTop, kRight, kTop},        // a: top
    {kRight, kTop, kRight, kMid},       // b: upper right
    {kRight, kMid, kRight, kBottom},    // c: lower right
    {kLeft, kBottom, kRight, kBottom},  // d: bottom
    {kLeft, kMid, kLeft, kBottom},      // e: lower left
    {kLeft, kTop, kLeft, kMid},         // f: upper left
    {kLeft, kMid, kRight, kMid},        // g: middle
}};
// Bit s set when segment s is lit.
const std::array<unsigned, 10> kDigitSegments = {
    0b0111111,  // 0: a b c d e f
    0b0000110,  // 1: b c
    0b1011011,  // 2: a b d e g
    0b1001111,  // 3: a b c d g
    0b1100110,  // 4: b c f g
    0b1101101,  // 5: a c d f g
    0b1111101,  // 6: a c d e f g
    0b0000111,  // 7: a b c
    0b1111111,  // 8
    0b1101111,  // 9: a b c d f g
};

double segment_distance(double px, double py, const Segment& s) {
  const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - s.x0) * vx + (py - s.y0) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (s.x0 + t * vx), dy = py - (s.y0 + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Dataset gen_minidigits(const DigitsParams& p, std::uint64_t seed) {
  if (p.n_train < 10) throw ConfigError("gen_minidigits: n_train must cover every class");
  if (p.ambiguity < 0.0 || p.ambiguity > 1.0) throw ConfigError("gen_minidigits: ambiguity must lie in [0,1]");
  constexpr std::size_t side = 8, classes = 10;
  const std::size_t n = p.n_train + p.n_test;
  Dataset d;
  d.classes = classes;
  d.inputs = Tensor(Shape{n, side * side});
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = make_rng(seed, Stream::Data, {1, i});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool train = i < p.n_train;
    const int label = static_cast<int>((train ? i : i - p.n_train) % classes);
    unsigned lit = kDigitSegments[static_cast<std::size_t>(label)];
    if (u(rng) < p.ambiguity) {
      const auto s = static_cast<unsigned>(u(rng) * 7.0) % 7;
      lit ^= 1u << s;
    }
    const double shift_x = (u(rng) - 0.5) * 1.2, shift_y = (u(rng) - 0.5) * 1.0;
    const double slant = (u(rng) - 0.5) * 0.3;
    const double width = 0.55 + 0.35 * u(rng);
    const double ink = 0.75 + 0.25 * u(rng);
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t c = 0; c < side; ++c) {
        const double py = static_cast<double>(r) + 0.5 - shift_y;
        const double px = static_cast<double>(c) + 0.5 - shift_x - slant * (py - kMid);
        double v = 0.0;
        for (std::size_t s = 0; s < 7; ++s) {
          if (!(lit >> s & 1u)) continue;
          const double dist = segment_distance(px, py, kSegments[s]);
          v = std::max(v, std::clamp(1.0 - (dist - width * 0.5) / width, 0.0, 1.0));
        }
        v = ink * v + p.noise * (u(rng) - 0.5) * 2.0;
        d.inputs.at(i, r * side + c) = std::clamp(v, 0.0, 1.0);
      }
    }
    d.labels.push_back(label);
    d.split.push_back(train ? Split::Train : Split::Test);
  }
  d.spec = {{"generator", "minidigits"},
            {"n_train", p.n_train},
            {"n_test", p.n_test},
            {"ambiguity", p.ambiguity},
            {"noise", p.noise},
            {"seed", seed}};
  d.validate();
  return d;
}

Dataset generate(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("generator")) throw ConfigError("dataset spec names no generator");
  const auto gen = spec.at("generator").get<std::string>();
  if (gen != "blobs" && gen != "minidigits") throw ConfigError("unknown generator '" + gen + "'");
  const auto seed = spec.value("seed", std::uint64_t{0});
  if (gen == "blobs") {
    BlobsParams p;
    p.classes = spec.value("classes", p.classes);
    p.dim = spec.value("dim", p.dim);
    p.n_train = spec.value("n_train", p.n_train);
    p.n_test = spec.value("n_test", p.n_test);
    p.spread = spec.value("spread", p.spread);
    return gen_blobs(p, seed);
  }
  if (gen == "minidigits") {
    DigitsParams p;
    p.n_train = spec.value("n_train", p.n_train);
    p.n_test = spec.value("n_test", p.n_test);
    p.ambiguity = spec.value("ambiguity", p.ambiguity);
    p.noise = spec.value("noise", p.noise);
    return gen_minidigits(p, seed);
  }
  throw ConfigError("unknown generator '" + gen + "'");
}

std::vector<std::size_t> GroupPartition::certain_in(int g) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < group.size(); ++i)
    if (group[i] == g && certain[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> GroupPartition::uncertain_in(int g) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < group.size(); ++i)
    if (group[i] == g && uncertain[i]) out.push_back(i);
  return out;
}

std::size_t GroupPartition::certain_count() const { return static_cast<std::size_t>(std::count(certain.begin(), certain.end(), true)); }
std::size_t GroupPartition::uncertain_count() const {
  return static_cast<std::size_t>(std::count(uncertain.begin(), uncertain.end(), true));
}

std::vector<double> dataset_entropies(const Dataset& data, const ModelBundle& bundle) {
  return entropy_rows(predict_batch(bundle, data.inputs));
}

GroupPartition partition_by_entropy(const std::vector<int>& groups, const std::vector<double>& entropy,
                                    std::size_t classes, double tau_low, double tau_high) {
  if (groups.size() != entropy.size()) throw ShapeError("partition: groups and entropies differ in length");
  if (!(tau_low <= tau_high)) throw ConfigError("partition: tau_low must not exceed tau_high");
  GroupPartition p;
  p.group = groups;
  p.entropy = entropy;
  p.tau_low = tau_low;
  p.tau_high = tau_high;
  for (double h : entropy) {
    const bool c = h <= tau_low;
    p.certain.push_back(c);
    p.uncertain.push_back(!c && h > tau_high);
  }
  for (std::size_t g = 0; g < classes; ++g) {
    if (p.certain_in(static_cast<int>(g)).empty()) {
      p.warnings.push_back("class " + std::to_string(g) + " has no certain points");
    }
  }
  return p;
}

GroupPartition partition_by_certainty(const Dataset& data, const ModelBundle& bundle, double tau_low, double tau_high) {
  return partition_by_entropy(data.labels, dataset_entropies(data, bundle), data.classes, tau_low, tau_high);
}

void save_dataset(const Dataset& data, const fs::path& dir) {
  std::vector<int> split;
  for (auto s : data.split) split.push_back(static_cast<int>(s));
  nlohmann::json manifest = {{"format", "cluekit-dataset-1"},
                             {"spec", data.spec},
                             {"rows", data.size()},
                             {"cols", data.dim()},
                             {"classes", data.classes},
                             {"labels", data.labels},
                             {"split", split},
                             {"inputs_file", "inputs.f64"}};
  write_atomic(dir / "inputs.f64", encode_f64(data.inputs.data()));
  write_atomic(dir / "manifest.json", dump_json(manifest));
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw ConfigError("no dataset at '" + dir.string() + "'");
  const auto m = nlohmann::json::parse(read_file(dir / "manifest.json"));
  Dataset d;
  d.spec = m.at("spec");
  d.classes = m.at("classes");
  d.labels = m.at("labels").get<std::vector<int>>();
  for (int s : m.at("split").get<std::vector<int>>()) d.split.push_back(static_cast<Split>(s));
  d.inputs = Tensor(Shape{m.at("rows").get<std::size_t>(), m.at("cols").get<std::size_t>()},
                    decode_f64(read_file(dir / m.at("inputs_file").get<std::string>())));
  d.validate();
  return d;
}

std::string dataset_csv(const Dataset& data) {
  std::vector<std::string> header{"index", "split", "label"};
  for (std::size_t j = 0; j < data.dim(); ++j) header.push_back("x" + std::to_string(j));
  CsvWriter w(header);
  for (std::size_t i = 0; i < data.size(); ++i) {
    w.cell(i).cell(std::string(data.split[i] == Split::Train ? "train" : "test")).cell(data.labels[i]);
    for (double v : data.inputs.row(i)) w.cell(v);
    w.end_row();
  }
  return w.str();
}

}  // namespace cluekit
