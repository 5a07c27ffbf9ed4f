#include "lago/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "parallel.hpp"

namespace lago {

using nlohmann::json;

double balanced_accuracy(std::span<const int> predictions, std::span<const int> labels, int num_classes) {
  if (predictions.empty()) throw Error("balanced_accuracy: no predictions");
  if (predictions.size() != labels.size()) throw Error("balanced_accuracy: prediction/label length mismatch");
  std::vector<double> correct(num_classes, 0.0), total(num_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw Error("balanced_accuracy: label out of range");
    total[labels[i]] += 1.0;
    if (predictions[i] == labels[i]) correct[labels[i]] += 1.0;
  }
  double sum = 0.0;
  int represented = 0;
  for (int z = 0; z < num_classes; ++z) {
    if (total[z] == 0.0) continue;
    sum += correct[z] / total[z];
    ++represented;
  }
  return sum / represented;
}

double evaluate(const LagoParams& params, const Dataset& dataset, const ClassDescriptions& u) {
  const Matrix prepared = prepare_descriptions(params, u);
  const auto predictions = predict_all(params, prepared, dataset.features);
  return balanced_accuracy(predictions, dataset.labels, static_cast<int>(dataset.num_classes()));
}

double gamma_sparsity(const Matrix& gamma, double tau) {
  if (!(tau > 0.0)) throw Error("gamma_sparsity: tau must be positive");
  if (gamma.size() == 0) return 0.0;
  return static_cast<double>((gamma.array() > tau).count()) / static_cast<double>(gamma.size());
}

std::vector<AttributePair> grouped_pairs(const Matrix& gamma, double tau) {
  if (!(tau > 0.0)) throw Error("grouped_pairs: tau must be positive");
  const auto support = (gamma.array() > tau).cast<double>().matrix();
  const Matrix overlap = support * support.transpose();
  std::vector<AttributePair> pairs;
  for (Eigen::Index a = 0; a < gamma.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < gamma.rows(); ++b) {
      if (overlap(a, b) > 0.0) pairs.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
  }
  return pairs;
}

GammaAnalysis anticorrelation_report(const Matrix& occurrence, const std::vector<AttributePair>& pairs) {
  if (occurrence.rows() < 2) throw Error("anticorrelation_report: need at least two observations");
  const Eigen::Index A = occurrence.cols();
  std::vector<std::vector<double>> columns(A);
  for (Eigen::Index m = 0; m < A; ++m) {
    columns[m].resize(occurrence.rows());
    for (Eigen::Index r = 0; r < occurrence.rows(); ++r) columns[m][r] = occurrence(r, m);
  }
  auto correlation = [&](int a, int b) { return pearson(columns[a], columns[b]); };

  GammaAnalysis out;
  out.grouped_pairs = pairs;

  std::vector<double> all;
  for (int a = 0; a < A; ++a) {
    for (int b = a + 1; b < A; ++b) {
      if (auto r = correlation(a, b)) all.push_back(*r);
    }
  }
  if (!all.empty()) {
    out.anticorr_baseline_fraction =
        static_cast<double>(std::count_if(all.begin(), all.end(), [](double r) { return r < 0.0; })) /
        static_cast<double>(all.size());
  }

  std::vector<double> grouped;
  for (const auto& [a, b] : pairs) {
    if (a < 0 || b < 0 || a >= A || b >= A) throw Error("anticorrelation_report: pair index out of range");
    if (auto r = correlation(a, b)) grouped.push_back(*r);
  }
  if (!grouped.empty()) {
    out.anticorr_grouped_fraction =
        static_cast<double>(std::count_if(grouped.begin(), grouped.end(), [](double r) { return r < 0.0; })) /
        static_cast<double>(grouped.size());
    if (!all.empty()) out.ks = ks_two_sample(grouped, all);
  }
  return out;
}

GammaAnalysis analyze_gamma(const Matrix& gamma, const Matrix& occurrence, double tau) {
  GammaAnalysis out = anticorrelation_report(occurrence, grouped_pairs(gamma, tau));
  out.sparsity_fraction = gamma_sparsity(gamma, tau);
  return out;
}

Matrix occurrence_matrix(const Dataset& dataset, const ClassDescriptions& u) {
  if (dataset.attribute_labels) return *dataset.attribute_labels;
  return u.u.transpose();
}

std::string to_json(const GammaAnalysis& analysis) {
  json doc;
  doc["sparsity_fraction"] = analysis.sparsity_fraction;
  doc["num_grouped_pairs"] = analysis.grouped_pairs.size();
  json pairs = json::array();
  for (const auto& [a, b] : analysis.grouped_pairs) pairs.push_back({a, b});
  doc["grouped_pairs"] = pairs;
  doc["anticorr_grouped_fraction"] =
      analysis.anticorr_grouped_fraction ? json(*analysis.anticorr_grouped_fraction) : json(nullptr);
  doc["anticorr_baseline_fraction"] = analysis.anticorr_baseline_fraction;
  if (analysis.ks) {
    doc["ks"] = {{"statistic", analysis.ks->statistic}, {"p_value", analysis.ks->p_value}};
  } else {
    doc["ks"] = nullptr;
  }
  return doc.dump(2);
}

std::vector<NoiseCurvePoint> noise_robustness_experiment(const std::vector<NoiseArm>& arms, const NoiseData& data,
                                                         const std::vector<double>& ratios,
                                                         const std::vector<std::uint64_t>& seeds, int jobs) {
  if (!data.train || !data.test || !data.u) throw Error("noise experiment: train, test and descriptions are required");
  if (std::find(ratios.begin(), ratios.end(), 0.0) == ratios.end()) throw Error("noise experiment: ratios must include 0");
  if (seeds.empty()) throw Error("noise experiment: no seeds");

  const std::size_t cells = arms.size() * ratios.size() * seeds.size();
  std::vector<double> accuracy(cells);
  detail::parallel_for(cells, jobs, [&](std::size_t cell) {
    const std::size_t s = cell % seeds.size();
    const std::size_t r = (cell / seeds.size()) % ratios.size();
    const std::size_t a = cell / (seeds.size() * ratios.size());
    const ClassDescriptions noisy = inject_salt_pepper(*data.u, ratios[r], seeds[s]);
    const ClassDescriptions u_train = noisy.select(data.train->class_names);
    std::optional<ClassDescriptions> u_val;
    if (data.val) u_val = noisy.select(data.val->class_names);
    TrainInputs inputs{data.train, &u_train, data.val, u_val ? &*u_val : nullptr, data.groups};
    TrainConfig cfg = arms[a].train;
    cfg.seed = mix_seed(cfg.seed, seeds[s]);
    const auto trained = train(arms[a].model, inputs, arms[a].loss, cfg);
    accuracy[cell] = evaluate(trained.params, *data.test, noisy.select(data.test->class_names));
  });

  std::vector<NoiseCurvePoint> curve;
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const std::size_t base = curve.size();
    std::size_t zero_index = 0;
    for (std::size_t r = 0; r < ratios.size(); ++r) {
      NoiseCurvePoint point{arms[a].name, ratios[r], 0.0, 0.0, {}};
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        point.per_seed.push_back(accuracy[(a * ratios.size() + r) * seeds.size() + s]);
      }
      for (double v : point.per_seed) point.mean_accuracy += v;
      point.mean_accuracy /= static_cast<double>(seeds.size());
      if (ratios[r] == 0.0) zero_index = base + r;
      curve.push_back(std::move(point));
    }
    const double baseline = curve[zero_index].mean_accuracy;
    for (std::size_t r = 0; r < ratios.size(); ++r) {
      auto& point = curve[base + r];
      point.relative_accuracy = base + r == zero_index ? 1.0 : (baseline > 0.0 ? point.mean_accuracy / baseline : 0.0);
    }
  }
  return curve;
}

std::string noise_curve_csv(const std::vector<NoiseCurvePoint>& curve) {
  std::ostringstream out;
  out.precision(17);
  std::size_t seeds = curve.empty() ? 0 : curve.front().per_seed.size();
  out << "variant,ratio,mean_balanced_acc,relative_acc";
  for (std::size_t s = 0; s < seeds; ++s) out << ",seed_" << s;
  out << '\n';
  for (const auto& p : curve) {
    out << p.arm << ',' << p.ratio << ',' << p.mean_accuracy << ',' << p.relative_accuracy;
    for (double v : p.per_seed) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

}  // namespace lago
