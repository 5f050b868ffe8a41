#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sgw/embedding.hpp"
#include "sgw/errors.hpp"
#include "sgw/gw_exact.hpp"
#include "sgw/gw_sliced.hpp"
#include "sgw/losses.hpp"
#include "sgw/matrix.hpp"
#include "sgw/nn.hpp"
#include "sgw/rng.hpp"

namespace sgw::trainer {

using losses::LossBreakdown;
using losses::LossWeights;
using nn::DenseNet;

// ---- synthetic data ----

// K well-separated Gaussian clusters form the high-quality domain; the
// low-quality domain pushes the same points through a fixed invertible
// linear map (random rotation times per-axis scaling) and adds noise.
struct DatasetSpec {
  std::size_t classes = 3;
  std::size_t dim = 8;
  std::size_t points_per_class = 300;
  double cluster_std = 0.6;
  double mean_separation = 2.5;
  double noise_std = 0.05;
  double scale_min = 0.3;
  double scale_max = 2.5;
  bool identity_map = false;  // replaces the linear map with the identity
  std::uint64_t seed = 1;

  void validate() const {
    if (classes < 2 || dim < 2) throw InvalidSpec("DatasetSpec: need K >= 2 and d >= 2");
    if (points_per_class < 2) throw InvalidSpec("DatasetSpec: need points_per_class >= 2");
    if (!(cluster_std >= 0.0) || !(noise_std >= 0.0))
      throw InvalidSpec("DatasetSpec: negative dispersion");
    if (!(scale_min > 0.0) || !(scale_max >= scale_min))
      throw InvalidSpec("DatasetSpec: degradation scales must satisfy 0 < min <= max");
  }
};

struct SyntheticDataset {
  EmbeddingSet low;
  EmbeddingSet high;
  Matrix degrade_map;  // the d x d map actually applied
  DatasetSpec spec;
};

namespace detail_synth {

// Orthogonalize gaussian columns by modified Gram-Schmidt.
inline Matrix random_orthogonal(std::size_t d, SeededRng& rng) {
  Matrix q(d, d);
  for (std::size_t i = 0; i < q.size(); ++i) q.data()[i] = rng.normal();
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t prev = 0; prev < c; ++prev) {
      double dot = 0.0;
      for (std::size_t r = 0; r < d; ++r) dot += q(r, c) * q(r, prev);
      for (std::size_t r = 0; r < d; ++r) q(r, c) -= dot * q(r, prev);
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < d; ++r) norm += q(r, c) * q(r, c);
    norm = std::sqrt(norm);
    if (norm < 1e-12) return random_orthogonal(d, rng);  // degenerate draw, retry
    for (std::size_t r = 0; r < d; ++r) q(r, c) /= norm;
  }
  return q;
}

}  // namespace detail_synth

inline SyntheticDataset make_synthetic(const DatasetSpec& spec) {
  spec.validate();
  SeededRng root(spec.seed);
  SeededRng mean_rng = root.child("means");
  SeededRng point_rng = root.child("points");
  SeededRng map_rng = root.child("map");
  SeededRng noise_rng = root.child("noise");

  // Class means: scaled random unit directions.
  Matrix means(spec.classes, spec.dim);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    double norm = 0.0;
    for (std::size_t k = 0; k < spec.dim; ++k) {
      const double g = mean_rng.normal();
      means(c, k) = g;
      norm += g * g;
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < spec.dim; ++k)
      means(c, k) = means(c, k) / norm * spec.mean_separation;
  }

  Matrix degrade = Matrix::identity(spec.dim);
  if (!spec.identity_map) {
    const Matrix q = detail_synth::random_orthogonal(spec.dim, map_rng);
    Matrix scales(spec.dim, spec.dim);
    for (std::size_t k = 0; k < spec.dim; ++k)
      scales(k, k) = map_rng.uniform(spec.scale_min, spec.scale_max);
    degrade = matmul(q, scales);
  }

  const std::size_t n = spec.classes * spec.points_per_class;
  Matrix high(n, spec.dim);
  std::vector<std::string> labels(n);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < spec.points_per_class; ++i) {
      const std::size_t row = c * spec.points_per_class + i;
      labels[row] = "c" + std::to_string(c);
      for (std::size_t k = 0; k < spec.dim; ++k)
        high(row, k) = means(c, k) + spec.cluster_std * point_rng.normal();
    }
  }

  // low = degrade * high + noise, rowwise (points are rows: low = high A^T).
  Matrix low = matmul_abt(high, degrade);
  for (std::size_t i = 0; i < low.size(); ++i) low.data()[i] += spec.noise_std * noise_rng.normal();

  return SyntheticDataset{EmbeddingSet(std::move(low), labels),
                          EmbeddingSet(std::move(high), labels), degrade, spec};
}

// Silhouette-style class-separation score in [-1, 1]: mean over points of
// (b - a) / max(a, b), a = mean intra-class distance, b = smallest mean
// distance to another class.
inline double class_separation(const EmbeddingSet& set) {
  if (!set.has_labels()) throw MissingLabels("class_separation: labels required");
  const DistanceMatrix d = pairwise_distances(set);
  const auto& labels = set.labels();
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < set.size(); ++i) groups[labels[i]].push_back(i);
  double score = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    double a = 0.0;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, idx] : groups) {
      double mean_dist = 0.0;
      std::size_t count = 0;
      for (std::size_t j : idx) {
        if (j == i) continue;
        mean_dist += d(i, j);
        ++count;
      }
      if (count == 0) continue;
      mean_dist /= static_cast<double>(count);
      if (label == labels[i])
        a = mean_dist;
      else
        b = std::min(b, mean_dist);
    }
    const double denom = std::max(a, b);
    score += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return score / static_cast<double>(set.size());
}

// ---- training configuration ----

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t steps_per_epoch = 50;  // 0 derives floor(n_low / batch_size)
  std::size_t batch_size = 32;
  std::size_t critic_steps = 5;  // critic updates per generator update
  std::size_t hidden_dim = 32;
  double lr_generator = 1e-3;
  double lr_critic = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LossWeights weights;
  std::size_t projections = 32;       // L per training step
  std::size_t eval_projections = 64;  // fixed basis for progress snapshots
  std::size_t snapshot_interval = 1000;
  std::size_t checkpoint_interval = 0;  // 0 = final checkpoint only
  std::size_t eval_subsample = 64;      // per-class cap for entropic GW
  std::uint64_t seed = 1;
  DatasetSpec dataset;

  void validate() const {
    if (batch_size < 2) throw InvalidArgument("TrainConfig: batch_size must be >= 2");
    if (critic_steps < 1) throw InvalidArgument("TrainConfig: critic_steps must be >= 1");
    if (!(lr_generator > 0.0) || !(lr_critic > 0.0))
      throw InvalidArgument("TrainConfig: learning rates must be > 0");
    if (projections < 1 || eval_projections < 1)
      throw InvalidArgument("TrainConfig: projections must be >= 1");
    weights.validate();
    dataset.validate();
  }
};

// Full-scale configuration: hours, not minutes; config-reachable via the CLI.
inline TrainConfig paper_preset() {
  TrainConfig c;
  c.epochs = 200;
  c.steps_per_epoch = 0;
  c.batch_size = 16;
  c.critic_steps = 5;
  c.lr_generator = 1e-5;
  c.lr_critic = 1e-5;
  c.projections = 256;
  c.snapshot_interval = 1000;
  return c;
}

// Desk-scale preset: minutes on one core, clear signal.
inline TrainConfig desk_preset() {
  TrainConfig c;  // defaults above are the desk preset
  return c;
}

// ---- training report ----

struct StepRecord {
  std::size_t step = 0;
  LossBreakdown breakdown;
};

struct Snapshot {
  std::size_t step = 0;
  double sgw_to_target = 0.0;  // SGW(G(low), high) on the fixed eval basis
  double class_sep = 0.0;      // class separation of G(low)
  double overall_class_gw = 0.0;
  std::map<std::string, double> per_class_gw;  // entropic GW per label
};

struct TrainReport {
  TrainConfig config;
  std::vector<StepRecord> history;
  std::vector<Snapshot> snapshots;
  double baseline_sgw = 0.0;  // SGW(low, high) before any training
  double final_sgw = 0.0;     // SGW(G(low), high) after the last step
  std::uint64_t eval_basis_seed = 0;
  std::uint64_t eval_subsample_seed = 0;  // per-class subsampling in snapshots
  std::string checkpoint_path;  // set by callers that persist the generator
};

struct TrainResult {
  TrainReport report;
  DenseNet generator;
  DenseNet critic;
};

// ---- relational evaluation (per-label entropic GW) ----

struct RelationalEval {
  std::map<std::string, double> per_class;
  std::map<std::string, bool> converged;
  double overall = 0.0;  // label-weighted mean
  std::uint64_t subsample_seed = 0;
};

// Per-class entropic GW between G(low_class) and high_class, subsampled to
// at most eval_subsample points per side. epsilon <= 0 picks the
// scale-adaptive default per class.
inline RelationalEval evaluate_relational(const DenseNet& generator,
                                          const SyntheticDataset& dataset, double epsilon,
                                          std::size_t eval_subsample = 64,
                                          std::uint64_t subsample_seed = 17,
                                          std::size_t max_outer = 200, double tol = 1e-5) {
  if (!dataset.low.has_labels() || !dataset.high.has_labels())
    throw MissingLabels("evaluate_relational: dataset must be labeled");
  const Matrix enhanced = generator.forward_plain(dataset.low.points());
  const EmbeddingSet enhanced_set(enhanced, dataset.low.labels());
  const auto low_groups = split_by_label(enhanced_set);
  const auto high_groups = split_by_label(dataset.high);

  RelationalEval eval;
  eval.subsample_seed = subsample_seed;
  SeededRng rng(subsample_seed);
  double weighted = 0.0;
  std::size_t total = 0;
  for (const auto& [label, enhanced_class] : low_groups) {
    const auto hit = high_groups.find(label);
    if (hit == high_groups.end()) continue;
    SeededRng lo_rng = rng.child(label + "/low");
    SeededRng hi_rng = rng.child(label + "/high");
    const EmbeddingSet a = subsample(enhanced_class, eval_subsample, lo_rng);
    const EmbeddingSet b = subsample(hit->second, eval_subsample, hi_rng);
    const double eps = epsilon > 0.0
                           ? epsilon
                           : default_entropic_epsilon(pairwise_distances(a));
    const GwResult r = gw_entropic(a, b, eps, max_outer, tol);
    eval.per_class[label] = r.value;
    eval.converged[label] = r.converged;
    weighted += r.value * static_cast<double>(enhanced_class.size());
    total += enhanced_class.size();
  }
  if (total > 0) eval.overall = weighted / static_cast<double>(total);
  return eval;
}

// ---- the alternating loop ----

namespace detail_train {

inline Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), src.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < src.cols(); ++c) out(r, c) = src(idx[r], c);
  return out;
}

inline std::string describe(const LossBreakdown& b) {
  std::ostringstream os;
  os << "critic=" << b.critic_loss << " gp=" << b.gp_term << " rmse=" << b.rmse_term
     << " sgw=" << b.sgw_term << " adv=" << b.adv_term << " total=" << b.total_generator;
  return os.str();
}

}  // namespace detail_train

// Alternating adversarial training: critic_steps critic updates, then one
// generator update, for epochs x steps_per_epoch generator steps. Fully
// deterministic given config.seed. Throws NonFiniteLoss with the offending
// step's breakdown if any term or gradient leaves the finite range.
inline TrainResult train(
    const TrainConfig& config, const SyntheticDataset& dataset,
    const std::function<void(std::size_t, const DenseNet&)>& on_checkpoint = {}) {
  config.validate();
  const std::size_t n_low = dataset.low.size();
  const std::size_t n_high = dataset.high.size();
  if (n_low < config.batch_size || n_high < config.batch_size)
    throw InvalidArgument("train: dataset smaller than one batch");
  const std::size_t d = dataset.low.dim();

  SeededRng root(config.seed);
  SeededRng init_g = root.child("init-generator");
  SeededRng init_d = root.child("init-critic");
  SeededRng batch_rng = root.child("batches");
  SeededRng gp_rng = root.child("gp");
  SeededRng sgw_rng = root.child("sgw");
  SeededRng eval_rng = root.child("eval-basis");

  using nn::Activation;
  // Residual generator: starts at the identity map (zeroed last layer), the
  // desk-scale analogue of a skip-connected enhancement net.
  DenseNet generator({d, config.hidden_dim, config.hidden_dim, d},
                     {Activation::LeakyRelu, Activation::LeakyRelu, Activation::Identity},
                     /*residual=*/true);
  DenseNet critic({d, config.hidden_dim, config.hidden_dim, 1},
                  {Activation::LeakyRelu, Activation::LeakyRelu, Activation::Identity});
  generator.init_he(init_g);
  generator.zero_last_layer();
  critic.init_he(init_d);

  nn::AdamState adam_g = nn::AdamState::for_net(generator, config.lr_generator,
                                                config.adam_beta1, config.adam_beta2,
                                                config.adam_eps);
  nn::AdamState adam_d = nn::AdamState::for_net(critic, config.lr_critic, config.adam_beta1,
                                                config.adam_beta2, config.adam_eps);

  const std::size_t steps_per_epoch =
      config.steps_per_epoch > 0 ? config.steps_per_epoch : n_low / config.batch_size;
  const std::size_t total_steps = config.epochs * steps_per_epoch;

  TrainReport report;
  report.config = config;
  report.eval_basis_seed = eval_rng.seed();
  report.eval_subsample_seed = root.child("eval-subsample").seed();
  const ProjectionBasis eval_basis = sample_basis(eval_rng, config.eval_projections, d);
  report.baseline_sgw = sgw(dataset.low, dataset.high, eval_basis).value;

  const auto eval_snapshot = [&](std::size_t step) {
    const Matrix enhanced = generator.forward_plain(dataset.low.points());
    const EmbeddingSet enhanced_set(enhanced, dataset.low.labels());
    Snapshot s;
    s.step = step;
    s.sgw_to_target = sgw(enhanced_set, dataset.high, eval_basis).value;
    s.class_sep = class_separation(enhanced_set);
    const auto relational = evaluate_relational(generator, dataset, 0.0, config.eval_subsample,
                                                report.eval_subsample_seed);
    s.overall_class_gw = relational.overall;
    s.per_class_gw = relational.per_class;
    return s;
  };

  report.history.reserve(total_steps);
  for (std::size_t step = 0; step < total_steps; ++step) {
    LossBreakdown breakdown;
    for (std::size_t c = 0; c < config.critic_steps; ++c) {
      const Matrix low_batch = detail_train::gather_rows(
          dataset.low.points(), batch_rng.sample_indices(n_low, config.batch_size));
      const Matrix high_batch = detail_train::gather_rows(
          dataset.high.points(), batch_rng.sample_indices(n_high, config.batch_size));
      const Matrix fake = generator.forward_plain(low_batch);
      auto res = losses::critic_loss(critic, high_batch, fake, config.weights.gp_weight, gp_rng);
      if (!std::isfinite(res.value) || !res.grads.all_finite())
        throw NonFiniteLoss("train: non-finite critic loss at step " + std::to_string(step));
      nn::adam_step(critic, res.grads, adam_d);
      breakdown.critic_loss = res.value;
      breakdown.gp_term = res.penalty;
    }

    const Matrix low_batch = detail_train::gather_rows(
        dataset.low.points(), batch_rng.sample_indices(n_low, config.batch_size));
    const Matrix high_batch = detail_train::gather_rows(
        dataset.high.points(), batch_rng.sample_indices(n_high, config.batch_size));
    auto gen = losses::generator_loss(generator, critic, low_batch, high_batch, config.weights,
                                      sgw_rng, config.projections);
    breakdown.rmse_term = gen.breakdown.rmse_term;
    breakdown.sgw_term = gen.breakdown.sgw_term;
    breakdown.adv_term = gen.breakdown.adv_term;
    breakdown.total_generator = gen.breakdown.total_generator;
    if (!breakdown.all_finite() || !gen.grads.all_finite())
      throw NonFiniteLoss("train: non-finite generator loss at step " + std::to_string(step) +
                          " (" + detail_train::describe(breakdown) + ")");
    nn::adam_step(generator, gen.grads, adam_g);

    report.history.push_back(StepRecord{step, breakdown});
    if (config.snapshot_interval > 0 && (step + 1) % config.snapshot_interval == 0)
      report.snapshots.push_back(eval_snapshot(step + 1));
    if (on_checkpoint && config.checkpoint_interval > 0 &&
        (step + 1) % config.checkpoint_interval == 0)
      on_checkpoint(step + 1, generator);
  }

  {
    const Matrix enhanced = generator.forward_plain(dataset.low.points());
    report.final_sgw = sgw(EmbeddingSet(enhanced, dataset.low.labels()), dataset.high,
                           eval_basis).value;
  }
  return TrainResult{std::move(report), std::move(generator), std::move(critic)};
}

// ---- config and report serialization ----

namespace detail_config {

inline std::string fmt(double v) { return sgw::detail::format_double(v); }

inline void set_key(TrainConfig& c, const std::string& key, const std::string& value,
                    const std::string& where) {
  const auto to_u = [&](const std::string& s) -> std::uint64_t {
    return std::stoull(s);
  };
  const auto to_d = [&](const std::string& s) -> double { return std::stod(s); };
  if (key == "epochs") c.epochs = to_u(value);
  else if (key == "steps_per_epoch") c.steps_per_epoch = to_u(value);
  else if (key == "batch_size") c.batch_size = to_u(value);
  else if (key == "critic_steps") c.critic_steps = to_u(value);
  else if (key == "hidden_dim") c.hidden_dim = to_u(value);
  else if (key == "lr_generator") c.lr_generator = to_d(value);
  else if (key == "lr_critic") c.lr_critic = to_d(value);
  else if (key == "adam_beta1") c.adam_beta1 = to_d(value);
  else if (key == "adam_beta2") c.adam_beta2 = to_d(value);
  else if (key == "adam_eps") c.adam_eps = to_d(value);
  else if (key == "lambda_rmse") c.weights.lambda_rmse = to_d(value);
  else if (key == "lambda_sgw") c.weights.lambda_sgw = to_d(value);
  else if (key == "lambda_adv") c.weights.lambda_adv = to_d(value);
  else if (key == "gp_weight") c.weights.gp_weight = to_d(value);
  else if (key == "projections") c.projections = to_u(value);
  else if (key == "eval_projections") c.eval_projections = to_u(value);
  else if (key == "snapshot_interval") c.snapshot_interval = to_u(value);
  else if (key == "checkpoint_interval") c.checkpoint_interval = to_u(value);
  else if (key == "eval_subsample") c.eval_subsample = to_u(value);
  else if (key == "seed") c.seed = to_u(value);
  else if (key == "data_classes") c.dataset.classes = to_u(value);
  else if (key == "data_dim") c.dataset.dim = to_u(value);
  else if (key == "data_points_per_class") c.dataset.points_per_class = to_u(value);
  else if (key == "data_cluster_std") c.dataset.cluster_std = to_d(value);
  else if (key == "data_mean_separation") c.dataset.mean_separation = to_d(value);
  else if (key == "data_noise_std") c.dataset.noise_std = to_d(value);
  else if (key == "data_scale_min") c.dataset.scale_min = to_d(value);
  else if (key == "data_scale_max") c.dataset.scale_max = to_d(value);
  else if (key == "data_identity_map") c.dataset.identity_map = value == "1" || value == "true";
  else if (key == "data_seed") c.dataset.seed = to_u(value);
  else throw MalformedFile(where + ": unknown config key '" + key + "'");
}

}  // namespace detail_config

// Flat key = value listing of every resolved field, in fixed order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& c) {
  using detail_config::fmt;
  return {
      {"epochs", std::to_string(c.epochs)},
      {"steps_per_epoch", std::to_string(c.steps_per_epoch)},
      {"batch_size", std::to_string(c.batch_size)},
      {"critic_steps", std::to_string(c.critic_steps)},
      {"hidden_dim", std::to_string(c.hidden_dim)},
      {"lr_generator", fmt(c.lr_generator)},
      {"lr_critic", fmt(c.lr_critic)},
      {"adam_beta1", fmt(c.adam_beta1)},
      {"adam_beta2", fmt(c.adam_beta2)},
      {"adam_eps", fmt(c.adam_eps)},
      {"lambda_rmse", fmt(c.weights.lambda_rmse)},
      {"lambda_sgw", fmt(c.weights.lambda_sgw)},
      {"lambda_adv", fmt(c.weights.lambda_adv)},
      {"gp_weight", fmt(c.weights.gp_weight)},
      {"projections", std::to_string(c.projections)},
      {"eval_projections", std::to_string(c.eval_projections)},
      {"snapshot_interval", std::to_string(c.snapshot_interval)},
      {"checkpoint_interval", std::to_string(c.checkpoint_interval)},
      {"eval_subsample", std::to_string(c.eval_subsample)},
      {"seed", std::to_string(c.seed)},
      {"data_classes", std::to_string(c.dataset.classes)},
      {"data_dim", std::to_string(c.dataset.dim)},
      {"data_points_per_class", std::to_string(c.dataset.points_per_class)},
      {"data_cluster_std", fmt(c.dataset.cluster_std)},
      {"data_mean_separation", fmt(c.dataset.mean_separation)},
      {"data_noise_std", fmt(c.dataset.noise_std)},
      {"data_scale_min", fmt(c.dataset.scale_min)},
      {"data_scale_max", fmt(c.dataset.scale_max)},
      {"data_identity_map", c.dataset.identity_map ? "1" : "0"},
      {"data_seed", std::to_string(c.dataset.seed)},
  };
}

// Parses `key = value` lines; '#' starts a comment, blank lines are skipped.
inline TrainConfig parse_config(std::istream& in, const std::string& where) {
  TrainConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw MalformedFile(where + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    try {
      detail_config::set_key(c, key, value, where + ":" + std::to_string(lineno));
    } catch (const std::invalid_argument&) {
      throw MalformedFile(where + ":" + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
  return c;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedFile(path + ": cannot open");
  return parse_config(in, path);
}

inline void write_config(const TrainConfig& c, std::ostream& out) {
  for (const auto& [k, v] : config_entries(c)) out << k << " = " << v << "\n";
}

// Report format, line-delimited and machine-parsable:
//   config <key> = <value>
//   step <k> <critic> <gp> <rmse> <sgw> <adv> <total>     (tab separated)
//   snapshot <step> <sgw_to_target> <class_sep> <overall_class_gw> [label=gw ...]
//   summary <key> = <value>
inline void write_report(const TrainReport& r, std::ostream& out) {
  using detail_config::fmt;
  out << "# sgw train report v1\n";
  for (const auto& [k, v] : config_entries(r.config)) out << "config " << k << " = " << v << "\n";
  for (const auto& rec : r.history) {
    out << "step " << rec.step << '\t' << fmt(rec.breakdown.critic_loss) << '\t'
        << fmt(rec.breakdown.gp_term) << '\t' << fmt(rec.breakdown.rmse_term) << '\t'
        << fmt(rec.breakdown.sgw_term) << '\t' << fmt(rec.breakdown.adv_term) << '\t'
        << fmt(rec.breakdown.total_generator) << "\n";
  }
  for (const auto& s : r.snapshots) {
    out << "snapshot " << s.step << '\t' << fmt(s.sgw_to_target) << '\t' << fmt(s.class_sep)
        << '\t' << fmt(s.overall_class_gw);
    for (const auto& [label, value] : s.per_class_gw) out << '\t' << label << '=' << fmt(value);
    out << "\n";
  }
  out << "summary baseline_sgw = " << fmt(r.baseline_sgw) << "\n";
  out << "summary final_sgw = " << fmt(r.final_sgw) << "\n";
  out << "summary eval_basis_seed = " << r.eval_basis_seed << "\n";
  out << "summary eval_subsample_seed = " << r.eval_subsample_seed << "\n";
  out << "summary checkpoint = " << (r.checkpoint_path.empty() ? "-" : r.checkpoint_path) << "\n";
}

inline void save_report(const TrainReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MalformedFile(path + ": cannot open for writing");
  write_report(r, out);
}

// Minimal parse used by plot-data export: step records and summary entries.
struct ParsedReport {
  std::vector<std::array<double, 7>> steps;  // step, critic, gp, rmse, sgw, adv, total
  std::map<std::string, std::string> summary;
};

inline ParsedReport parse_report(std::istream& in, const std::string& where) {
  ParsedReport p;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("step ", 0) == 0) {
      std::istringstream is(line.substr(5));
      std::array<double, 7> row{};
      for (auto& v : row)
        if (!(is >> v))
          throw MalformedFile(where + ":" + std::to_string(lineno) + ": short step record");
      p.steps.push_back(row);
    } else if (line.rfind("summary ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(8, eq - 8);
      while (!key.empty() && key.back() == ' ') key.pop_back();
      std::string value = line.substr(eq + 1);
      const auto a = value.find_first_not_of(' ');
      p.summary[key] = a == std::string::npos ? "" : value.substr(a);
    }
  }
  return p;
}

}  // namespace sgw::trainer
