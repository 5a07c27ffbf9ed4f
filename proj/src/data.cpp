#include "lago/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace lago {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kFeatureMagic[4] = {'L', 'A', 'G', 'O'};
constexpr std::uint32_t kFeatureVersion = 1;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, const fs::path& path, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw Error(path.string() + ": malformed number '" + cell + "' at row " + std::to_string(row));
  }
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

Matrix read_numeric_csv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<double> values;
    for (const auto& cell : split_csv(line)) values.push_back(parse_number(cell, path, row));
    if (!rows.empty() && values.size() != rows.front().size()) {
      throw Error(path.string() + ": malformed row " + std::to_string(row) + " (expected " +
                  std::to_string(rows.front().size()) + " columns, got " + std::to_string(values.size()) + ")");
    }
    rows.push_back(std::move(values));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

void write_numeric_csv(const fs::path& path, const Matrix& m) {
  auto out = open_out(path);
  out.precision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
}

std::vector<std::string> read_lines(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

int find_name(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

}  // namespace

// -- types -------------------------------------------------------------------

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error("row count mismatch: " + std::to_string(features.rows()) + " feature rows vs " +
                std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size()) {
      throw Error("label out of range at row " + std::to_string(i + 1));
    }
  }
  if (!features.allFinite()) throw Error("features contain non-finite values");
  if (attribute_labels) {
    if (static_cast<std::size_t>(attribute_labels->rows()) != labels.size()) {
      throw Error("row count mismatch: attribute labels have " + std::to_string(attribute_labels->rows()) + " rows");
    }
    for (Eigen::Index r = 0; r < attribute_labels->rows(); ++r) {
      for (Eigen::Index c = 0; c < attribute_labels->cols(); ++c) {
        const double v = (*attribute_labels)(r, c);
        if (v != 0.0 && v != 1.0) throw Error("attribute label not in {0,1} at row " + std::to_string(r + 1));
      }
    }
  }
}

int ClassDescriptions::class_index(const std::string& name) const { return find_name(class_names, name); }

ClassDescriptions ClassDescriptions::select(const std::vector<std::string>& classes) const {
  ClassDescriptions out;
  out.attribute_names = attribute_names;
  out.class_names = classes;
  out.u.resize(u.rows(), static_cast<Eigen::Index>(classes.size()));
  for (std::size_t j = 0; j < classes.size(); ++j) {
    const int idx = class_index(classes[j]);
    if (idx < 0) throw Error("unknown class in descriptions: " + classes[j]);
    out.u.col(j) = u.col(idx);
  }
  return out;
}

std::vector<int> GroupSpec::assignment(int num_attributes) const {
  std::vector<int> owner(num_attributes, -1);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    for (int m : groups[k].attributes) {
      if (m < 0 || m >= num_attributes) throw Error("group '" + groups[k].name + "' has invalid attribute index");
      if (owner[m] >= 0) throw Error("overlapping groups: attribute " + std::to_string(m) + " is in more than one group");
      owner[m] = static_cast<int>(k);
    }
  }
  return owner;
}

bool GroupSpec::is_partition(int num_attributes) const {
  try {
    const auto owner = assignment(num_attributes);
    return std::none_of(owner.begin(), owner.end(), [](int k) { return k < 0; });
  } catch (const Error&) {
    return false;
  }
}

GroupSpec GroupSpec::with_singletons(const std::vector<std::string>& attribute_names) const {
  GroupSpec out = *this;
  const auto owner = assignment(static_cast<int>(attribute_names.size()));
  for (std::size_t m = 0; m < owner.size(); ++m) {
    if (owner[m] < 0) out.groups.push_back({attribute_names[m], {static_cast<int>(m)}});
  }
  return out;
}

Matrix GroupSpec::one_hot(int num_attributes) const {
  const auto owner = assignment(num_attributes);
  Matrix g = Matrix::Zero(num_attributes, static_cast<Eigen::Index>(groups.size()));
  for (int m = 0; m < num_attributes; ++m) {
    if (owner[m] >= 0) g(m, owner[m]) = 1.0;
  }
  return g;
}

void SplitSpec::validate() const {
  std::set<std::string> seen;
  for (const auto* part : {&train, &val, &test}) {
    for (const auto& name : *part) {
      if (!seen.insert(name).second) throw Error("split classes overlap: " + name);
    }
  }
}

std::string to_string(PriorMode mode) { return mode == PriorMode::uniform ? "uniform" : "per-attribute"; }

PriorMode parse_prior_mode(const std::string& text) {
  if (text == "uniform") return PriorMode::uniform;
  if (text == "per-attribute") return PriorMode::per_attribute;
  throw Error("unknown prior mode: " + text);
}

Vector AttributePrior::expand(Eigen::Index n) const {
  if (mode == PriorMode::uniform) return Vector::Constant(n, values[0]);
  if (values.size() != n) throw Error("attribute prior has wrong length");
  return values;
}

// -- file ingestion ----------------------------------------------------------

Matrix read_features(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::equal(magic, magic + 4, kFeatureMagic)) {
    const auto version = detail::get_le<std::uint32_t>(in, "feature version");
    if (version != kFeatureVersion) throw Error(path.string() + ": unsupported feature format version " + std::to_string(version));
    const auto rows = detail::get_le<std::uint64_t>(in, "feature rows");
    const auto cols = detail::get_le<std::uint64_t>(in, "feature cols");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = detail::get_f32(in, "feature data");
    return m;
  }
  in.close();
  return read_numeric_csv(path);
}

void write_features_binary(const fs::path& path, const Matrix& features) {
  auto out = open_out(path, std::ios::binary);
  out.write(kFeatureMagic, 4);
  detail::put_le<std::uint32_t>(out, kFeatureVersion);
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(features.rows()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.size(); ++i) detail::put_f32(out, static_cast<float>(features.data()[i]));
}

void write_features_csv(const fs::path& path, const Matrix& features) { write_numeric_csv(path, features); }

void write_labels(const fs::path& path, const Dataset& dataset) {
  auto out = open_out(path);
  for (int label : dataset.labels) out << dataset.class_names.at(label) << '\n';
}

void write_attribute_labels(const fs::path& path, const Matrix& labels) { write_numeric_csv(path, labels); }

Dataset load_dataset(const fs::path& features_path, const fs::path& labels_path,
                     const std::optional<fs::path>& attr_labels_path, const LoadOptions& options) {
  const Matrix features = read_features(features_path);
  const auto names = read_lines(labels_path);
  if (static_cast<std::size_t>(features.rows()) != names.size()) {
    throw Error("row count mismatch: " + features_path.string() + " has " + std::to_string(features.rows()) +
                " rows but " + labels_path.string() + " has " + std::to_string(names.size()));
  }
  std::optional<Matrix> attrs;
  if (attr_labels_path) {
    attrs = read_numeric_csv(*attr_labels_path);
    if (attrs->rows() != features.rows()) {
      throw Error("row count mismatch: " + attr_labels_path->string() + " has " + std::to_string(attrs->rows()) +
                  " rows, expected " + std::to_string(features.rows()));
    }
    if (!options.attribute_names.empty() && static_cast<std::size_t>(attrs->cols()) != options.attribute_names.size()) {
      throw Error("attribute label width does not match attribute registry");
    }
  }

  Dataset ds;
  ds.class_names = options.class_names;
  ds.attribute_names = options.attribute_names;
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < ds.class_names.size(); ++i) index[ds.class_names[i]] = static_cast<int>(i);

  std::vector<Eigen::Index> kept;
  for (std::size_t r = 0; r < names.size(); ++r) {
    if (options.keep_classes && !options.keep_classes->count(names[r])) continue;
    auto it = index.find(names[r]);
    if (it == index.end()) {
      if (!options.class_names.empty()) {
        throw Error(labels_path.string() + ": unknown class name '" + names[r] + "' at row " + std::to_string(r + 1));
      }
      it = index.emplace(names[r], static_cast<int>(ds.class_names.size())).first;
      ds.class_names.push_back(names[r]);
    }
    ds.labels.push_back(it->second);
    kept.push_back(static_cast<Eigen::Index>(r));
  }
  ds.features.resize(static_cast<Eigen::Index>(kept.size()), features.cols());
  for (std::size_t i = 0; i < kept.size(); ++i) ds.features.row(i) = features.row(kept[i]);
  if (attrs) {
    Matrix a(static_cast<Eigen::Index>(kept.size()), attrs->cols());
    for (std::size_t i = 0; i < kept.size(); ++i) a.row(i) = attrs->row(kept[i]);
    ds.attribute_labels = std::move(a);
  }
  ds.validate();
  return ds;
}

ClassDescriptions read_descriptions(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  ClassDescriptions out;
  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (row == 1) {
      out.class_names.assign(cells.begin() + 1, cells.end());
      continue;
    }
    if (cells.size() != out.class_names.size() + 1) {
      throw Error(path.string() + ": malformed row " + std::to_string(row) + " in class descriptions");
    }
    out.attribute_names.push_back(cells[0]);
    std::vector<double> values;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const double v = parse_number(cells[c], path, row);
      if (v < 0.0 || v > 1.0) throw Error(path.string() + ": description outside [0,1] at row " + std::to_string(row));
      values.push_back(v);
    }
    rows.push_back(std::move(values));
  }
  out.u.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(out.class_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) out.u(r, c) = rows[r][c];
  }
  return out;
}

void write_descriptions(const fs::path& path, const ClassDescriptions& u) {
  auto out = open_out(path);
  out.precision(17);
  for (const auto& name : u.class_names) out << ',' << name;
  out << '\n';
  for (Eigen::Index m = 0; m < u.u.rows(); ++m) {
    out << u.attribute_names.at(m);
    for (Eigen::Index z = 0; z < u.u.cols(); ++z) out << ',' << u.u(m, z);
    out << '\n';
  }
}

GroupSpec read_groups(const fs::path& path, const std::vector<std::string>& attribute_names) {
  auto in = open_in(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  GroupSpec spec;
  for (const auto& g : doc.at("groups")) {
    Group group{g.at("name").get<std::string>(), {}};
    for (const auto& a : g.at("attributes")) {
      const int idx = find_name(attribute_names, a.get<std::string>());
      if (idx < 0) throw Error(path.string() + ": unknown attribute '" + a.get<std::string>() + "'");
      group.attributes.push_back(idx);
    }
    spec.groups.push_back(std::move(group));
  }
  return spec.with_singletons(attribute_names);
}

void write_groups(const fs::path& path, const GroupSpec& groups, const std::vector<std::string>& attribute_names) {
  json doc;
  doc["groups"] = json::array();
  for (const auto& g : groups.groups) {
    json names = json::array();
    for (int m : g.attributes) names.push_back(attribute_names.at(m));
    doc["groups"].push_back({{"name", g.name}, {"attributes", names}});
  }
  open_out(path) << doc.dump(2) << '\n';
}

SplitSpec read_splits(const fs::path& path) {
  auto in = open_in(path);
  try {
    const json doc = json::parse(in);
    SplitSpec s{doc.at("train").get<std::vector<std::string>>(), doc.at("val").get<std::vector<std::string>>(),
                doc.at("test").get<std::vector<std::string>>()};
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_splits(const fs::path& path, const SplitSpec& split) {
  const json doc = {{"train", split.train}, {"val", split.val}, {"test", split.test}};
  open_out(path) << doc.dump(2) << '\n';
}

// -- dataset manipulation ----------------------------------------------------

Dataset select_classes(const Dataset& dataset, const std::vector<std::string>& classes) {
  std::vector<int> remap(dataset.class_names.size(), -1);
  for (std::size_t j = 0; j < classes.size(); ++j) {
    const int idx = find_name(dataset.class_names, classes[j]);
    if (idx >= 0) remap[idx] = static_cast<int>(j);
  }
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
    if (remap[dataset.labels[i]] >= 0) rows.push_back(static_cast<Eigen::Index>(i));
  }
  Dataset out;
  out.class_names = classes;
  out.attribute_names = dataset.attribute_names;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), dataset.features.cols());
  if (dataset.attribute_labels) out.attribute_labels = Matrix(static_cast<Eigen::Index>(rows.size()), dataset.attribute_labels->cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(i) = dataset.features.row(rows[i]);
    out.labels.push_back(remap[dataset.labels[rows[i]]]);
    if (dataset.attribute_labels) out.attribute_labels->row(i) = dataset.attribute_labels->row(rows[i]);
  }
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.features.cols() != b.features.cols() && a.size() && b.size()) throw Error("concat: feature dims differ");
  if (a.attribute_labels.has_value() != b.attribute_labels.has_value()) throw Error("concat: attribute labels present in only one dataset");
  Dataset out;
  out.attribute_names = a.attribute_names.empty() ? b.attribute_names : a.attribute_names;
  out.class_names = a.class_names;
  std::vector<int> remap_b;
  for (const auto& name : b.class_names) {
    int idx = find_name(out.class_names, name);
    if (idx < 0) {
      idx = static_cast<int>(out.class_names.size());
      out.class_names.push_back(name);
    }
    remap_b.push_back(idx);
  }
  const Eigen::Index cols = a.size() ? a.features.cols() : b.features.cols();
  out.features.resize(static_cast<Eigen::Index>(a.size() + b.size()), cols);
  if (a.size()) out.features.topRows(a.size()) = a.features;
  if (b.size()) out.features.bottomRows(b.size()) = b.features;
  out.labels = a.labels;
  for (int l : b.labels) out.labels.push_back(remap_b[l]);
  if (a.attribute_labels) {
    Matrix m(static_cast<Eigen::Index>(a.size() + b.size()), a.attribute_labels->cols());
    if (a.size()) m.topRows(a.size()) = *a.attribute_labels;
    if (b.size()) m.bottomRows(b.size()) = *b.attribute_labels;
    out.attribute_labels = std::move(m);
  }
  return out;
}

// -- estimation --------------------------------------------------------------

ClassDescriptions estimate_class_descriptions(const Dataset& dataset) {
  if (!dataset.attribute_labels) throw Error("estimate_class_descriptions: dataset has no attribute labels");
  const Matrix& a = *dataset.attribute_labels;
  const auto num_classes = static_cast<Eigen::Index>(dataset.class_names.size());
  Matrix counts = Matrix::Zero(a.cols(), num_classes);
  std::vector<double> totals(num_classes, 0.0);
  for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
    counts.col(dataset.labels[i]) += a.row(i).transpose();
    totals[dataset.labels[i]] += 1.0;
  }
  ClassDescriptions out;
  out.attribute_names = dataset.attribute_names;
  out.class_names = dataset.class_names;
  out.u.resize(a.cols(), num_classes);
  for (Eigen::Index z = 0; z < num_classes; ++z) {
    if (totals[z] == 0.0) throw Error("estimate_class_descriptions: class '" + dataset.class_names[z] + "' has no samples");
    out.u.col(z) = counts.col(z) / totals[z];
  }
  return out;
}

AttributePrior estimate_attribute_prior(const ClassDescriptions& u, PriorMode mode) {
  if (u.u.size() == 0) throw Error("estimate_attribute_prior: empty descriptions");
  const Vector per_attribute = u.u.rowwise().mean();
  AttributePrior prior{mode, {}};
  if (mode == PriorMode::uniform) {
    prior.values = Vector::Constant(1, std::max(per_attribute.mean(), kPriorFloor));
  } else {
    prior.values = per_attribute.cwiseMax(kPriorFloor);
  }
  return prior;
}

ClassDescriptions normalize_group_sums(const ClassDescriptions& u, const GroupSpec& groups) {
  groups.assignment(static_cast<int>(u.u.rows()));  // throws on overlap
  ClassDescriptions out = u;
  for (const auto& g : groups.groups) {
    for (Eigen::Index z = 0; z < u.u.cols(); ++z) {
      double s = 0.0;
      for (int m : g.attributes) s += out.u(m, z);
      if (s > 1.0) {
        for (int m : g.attributes) out.u(m, z) /= s;
      }
    }
  }
  return out;
}

Matrix clamp_descriptions(const Matrix& u, double floor) { return u.cwiseMax(floor).cwiseMin(1.0 - floor); }

ClassDescriptions inject_salt_pepper(const ClassDescriptions& u, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error("inject_salt_pepper: ratio must lie in [0,1]");
  ClassDescriptions out = u;
  const auto total = static_cast<std::size_t>(u.u.size());
  const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
  Rng rng(seed);
  std::vector<std::size_t> positions(total);
  std::iota(positions.begin(), positions.end(), 0);
  // Partial Fisher-Yates: the first `count` slots become a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.index(total - i);
    std::swap(positions[i], positions[j]);
    out.u.data()[positions[i]] = rng.coin() ? 1.0 : 0.0;
  }
  return out;
}

Matrix attribute_targets(const Dataset& dataset, const ClassDescriptions& u) {
  if (dataset.attribute_labels) return *dataset.attribute_labels;
  Matrix t(static_cast<Eigen::Index>(dataset.size()), u.u.rows());
  for (std::size_t i = 0; i < dataset.size(); ++i) t.row(i) = u.u.col(dataset.labels[i]).transpose();
  return t;
}

}  // namespace lago
