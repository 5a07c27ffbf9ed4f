#include "lago/tuning.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "lago/evaluation.hpp"
#include "parallel.hpp"

namespace lago {

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Grid point as one index per axis: lr_w, beta, lambda, lr_v, zeta, num_groups, psi.
using GridIndex = std::array<std::size_t, 7>;

std::array<std::size_t, 7> axis_sizes(const SearchSpace& s) {
  return {s.lr_w.size(), s.beta.size(), s.lambda.size(), s.lr_v.size(), s.zeta.size(), s.num_groups.size(), s.psi.size()};
}

TrialConfig at(const SearchSpace& s, const GridIndex& i) {
  return {s.lr_w[i[0]], s.beta[i[1]], s.lambda[i[2]], s.lr_v[i[3]], s.zeta[i[4]], s.num_groups[i[5]], s.psi[i[6]]};
}

GridIndex unflatten(std::size_t flat, const std::array<std::size_t, 7>& sizes) {
  GridIndex idx{};
  for (std::size_t a = 0; a < sizes.size(); ++a) {
    idx[a] = flat % sizes[a];
    flat /= sizes[a];
  }
  return idx;
}

bool ranks_before(const TrialResult& a, const TrialResult& b) {
  if (a.mean != b.mean) return a.mean > b.mean;
  return a.config.hash() < b.config.hash();
}

}  // namespace

void SearchSpace::validate() const {
  if (lr_w.empty() || beta.empty() || lambda.empty() || lr_v.empty() || zeta.empty() || num_groups.empty() ||
      psi.empty() || seeds.empty()) {
    throw Error("search space has an empty axis");
  }
}

SearchSpace SearchSpace::restricted_to(Variant variant) const {
  validate();
  SearchSpace s = *this;
  if (!learns_groups(variant)) {
    s.lr_v.resize(1);
    s.zeta.resize(1);
  }
  if (variant != Variant::k_soft) s.num_groups.resize(1);
  if (variant != Variant::semantic_soft) s.psi.resize(1);
  return s;
}

std::size_t SearchSpace::grid_size() const {
  std::size_t n = 1;
  for (std::size_t s : axis_sizes(*this)) n *= s;
  return n;
}

std::string TrialConfig::key() const {
  return "lr_w=" + shortest(lr_w) + ";beta=" + shortest(beta) + ";lambda=" + shortest(lambda) + ";lr_v=" +
         shortest(lr_v) + ";zeta=" + shortest(zeta) + ";K=" + std::to_string(num_groups) + ";psi=" + shortest(psi);
}

std::uint64_t TrialConfig::hash() const { return fnv1a(key()); }

SearchBase apply(const TrialConfig& config, const SearchBase& base) {
  SearchBase out = base;
  out.train.lr_w = config.lr_w;
  out.loss.beta = config.beta;
  out.loss.lambda = config.lambda;
  if (learns_groups(base.model.variant)) {
    out.train.lr_v = config.lr_v;
    out.model.zeta = config.zeta;
  }
  if (base.model.variant == Variant::k_soft) out.model.num_groups = config.num_groups;
  if (base.model.variant == Variant::semantic_soft) out.loss.psi = config.psi;
  return out;
}

namespace {

struct SeedRun {
  double accuracy = 0.0;
  int best_epoch = 0;
};

SeedRun run_seed(const TrialConfig& config, std::uint64_t seed, const SearchBase& base, const SearchData& data) {
  const SearchBase applied = apply(config, base);
  TrainConfig cfg = applied.train;
  cfg.seed = mix_seed(seed, config.hash());
  const ClassDescriptions u_train = data.u->select(data.train->class_names);
  const ClassDescriptions u_val = data.u->select(data.val->class_names);
  TrainInputs inputs{data.train, &u_train, data.val, &u_val, data.groups};
  const auto result = train(applied.model, inputs, applied.loss, cfg);
  SeedRun run;
  run.best_epoch = result.best_epoch;
  run.accuracy = result.best_epoch > 0 ? *result.history[result.best_epoch - 1].val_balanced_acc
                                       : evaluate(result.params, *data.val, u_val);
  return run;
}

TrialResult summarize(const TrialConfig& config, const std::vector<SeedRun>& runs) {
  TrialResult t;
  t.config = config;
  for (const auto& r : runs) {
    t.per_seed.push_back(r.accuracy);
    t.best_epochs.push_back(r.best_epoch);
    t.mean += r.accuracy;
  }
  t.mean /= static_cast<double>(runs.size());
  for (double v : t.per_seed) t.stddev += (v - t.mean) * (v - t.mean);
  t.stddev = std::sqrt(t.stddev / static_cast<double>(runs.size()));
  return t;
}

void check(const SearchData& data) {
  if (!data.train || !data.val || !data.u) throw Error("search: train, val and descriptions are required");
}

std::vector<TrialResult> run_trials(const std::vector<TrialConfig>& configs, const std::vector<std::uint64_t>& seeds,
                                    const SearchBase& base, const SearchData& data, int jobs) {
  std::vector<SeedRun> runs(configs.size() * seeds.size());
  detail::parallel_for(runs.size(), jobs, [&](std::size_t i) {
    runs[i] = run_seed(configs[i / seeds.size()], seeds[i % seeds.size()], base, data);
  });
  std::vector<TrialResult> out;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    out.push_back(summarize(configs[c], {runs.begin() + static_cast<std::ptrdiff_t>(c * seeds.size()),
                                         runs.begin() + static_cast<std::ptrdiff_t>((c + 1) * seeds.size())}));
  }
  return out;
}

}  // namespace

TrialResult run_trial(const TrialConfig& config, const std::vector<std::uint64_t>& seeds, const SearchBase& base,
                      const SearchData& data) {
  check(data);
  if (seeds.empty()) throw Error("run_trial: no seeds");
  return run_trials({config}, seeds, base, data, 1).front();
}

SearchResult grid_search(const SearchSpace& space, const SearchBase& base, const SearchData& data, std::size_t budget,
                         std::uint64_t master_seed, int jobs) {
  check(data);
  if (budget < 1) throw Error("grid_search: budget must be >= 1");
  const SearchSpace s = space.restricted_to(base.model.variant);
  const auto sizes = axis_sizes(s);
  const std::size_t total = s.grid_size();

  std::set<GridIndex> visited;
  std::vector<TrialResult> results;
  auto evaluate_batch = [&](const std::vector<GridIndex>& points) {
    std::vector<TrialConfig> configs;
    for (const auto& p : points) {
      if (visited.insert(p).second) configs.push_back(at(s, p));
    }
    auto batch = run_trials(configs, s.seeds, base, data, jobs);
    results.insert(results.end(), batch.begin(), batch.end());
  };

  // Coarse stage.
  std::vector<std::size_t> flat(total);
  std::iota(flat.begin(), flat.end(), 0);
  if (budget < total) {
    Rng rng(master_seed);
    std::shuffle(flat.begin(), flat.end(), rng.engine());
    flat.resize(budget);
    std::sort(flat.begin(), flat.end());
  }
  std::vector<GridIndex> coarse;
  for (std::size_t f : flat) coarse.push_back(unflatten(f, sizes));
  evaluate_batch(coarse);

  // Refinement: adjacent grid points around the incumbent, two rounds.
  std::map<std::uint64_t, GridIndex> index_of;
  for (const auto& p : visited) index_of[at(s, p).hash()] = p;
  for (int round = 0; round < 2 && visited.size() < total; ++round) {
    const auto incumbent = *std::min_element(results.begin(), results.end(), ranks_before);
    const GridIndex center = index_of.at(incumbent.config.hash());
    std::vector<GridIndex> neighbors;
    for (std::size_t a = 0; a < sizes.size(); ++a) {
      for (int step : {-1, 1}) {
        const auto moved = static_cast<long>(center[a]) + step;
        if (moved < 0 || moved >= static_cast<long>(sizes[a])) continue;
        GridIndex n = center;
        n[a] = static_cast<std::size_t>(moved);
        if (!visited.count(n)) neighbors.push_back(n);
      }
    }
    if (neighbors.empty()) break;
    evaluate_batch(neighbors);
    for (const auto& p : neighbors) index_of[at(s, p).hash()] = p;
  }

  std::sort(results.begin(), results.end(), ranks_before);
  return {std::move(results)};
}

std::string trial_table_csv(const std::vector<TrialResult>& trials) {
  std::ostringstream out;
  out.precision(17);
  const std::size_t seeds = trials.empty() ? 0 : trials.front().per_seed.size();
  out << "rank,config_hash,lr_w,beta,lambda,lr_v,zeta,num_groups,psi,mean_val_acc,std_val_acc";
  for (std::size_t s = 0; s < seeds; ++s) out << ",seed_" << s;
  out << '\n';
  for (std::size_t r = 0; r < trials.size(); ++r) {
    const auto& t = trials[r];
    const auto& c = t.config;
    out << r + 1 << ',' << c.hash() << ',' << c.lr_w << ',' << c.beta << ',' << c.lambda << ',' << c.lr_v << ','
        << c.zeta << ',' << c.num_groups << ',' << c.psi << ',' << t.mean << ',' << t.stddev;
    for (double v : t.per_seed) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

FinalModel finalize(const TrialResult& best, const SearchBase& base, const SearchData& data) {
  check(data);
  const SearchBase applied = apply(best.config, base);
  double epochs = 0.0;
  for (int e : best.best_epochs) epochs += e;
  epochs = best.best_epochs.empty() ? applied.train.epochs : epochs / static_cast<double>(best.best_epochs.size());

  FinalModel out;
  out.epochs = std::max(1, static_cast<int>(std::lround(epochs)));
  const Dataset merged = concat(*data.train, *data.val);
  out.class_names = merged.class_names;
  const ClassDescriptions u = data.u->select(merged.class_names);
  TrainConfig cfg = applied.train;
  cfg.epochs = out.epochs;
  cfg.seed = mix_seed(base.train.seed, best.config.hash());
  TrainInputs inputs{&merged, &u, nullptr, nullptr, data.groups};
  auto result = train(applied.model, inputs, applied.loss, cfg);
  out.params = std::move(result.params);
  out.history = std::move(result.history);
  return out;
}

}  // namespace lago
