// sgwcli: sliced Gromov-Wasserstein toolkit command line.
//
// Subcommands: sgw, gw, eval-relational, train, metrics, export-plotdata.
// Every command echoes its resolved configuration before results; output is
// deterministic for fixed seeds so runs can be diffed byte for byte.
// Exit codes: 0 success, 1 computation failure, 2 usage or input errors.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sgw/sgw.hpp"

namespace {

using nlohmann::json;
using sgw::EmbeddingSet;
using sgw::Matrix;
using sgw::SeededRng;

std::string fmt(double v) { return sgw::detail::format_double(v); }

// Equalize supports by subsampling the larger set; cap both if requested.
struct PairedSets {
  EmbeddingSet x;
  EmbeddingSet y;
  bool subsampled = false;
};

PairedSets equalize(const EmbeddingSet& a, const EmbeddingSet& b, std::size_t cap,
                    SeededRng& rng) {
  std::size_t target = std::min(a.size(), b.size());
  if (cap > 0) target = std::min(target, cap);
  SeededRng ra = rng.child("subsample/x");
  SeededRng rb = rng.child("subsample/y");
  PairedSets out{sgw::subsample(a, target, ra), sgw::subsample(b, target, rb),
                 target < a.size() || target < b.size()};
  return out;
}

int cmd_sgw(const std::string& file_x, const std::string& file_y, std::size_t projections,
            std::uint64_t seed, std::size_t cap, bool as_json) {
  const EmbeddingSet a = sgw::load_embeddings_auto(file_x);
  const EmbeddingSet b = sgw::load_embeddings_auto(file_y);
  SeededRng rng(seed);
  const PairedSets pair = equalize(a, b, cap, rng);
  SeededRng basis_rng = rng.child("basis");
  const auto basis = sgw::sample_basis(basis_rng, projections, pair.x.dim());
  const auto res = sgw::sgw(pair.x, pair.y, basis);
  if (as_json) {
    json out{{"command", "sgw"},
             {"file_x", file_x},
             {"file_y", file_y},
             {"projections", projections},
             {"seed", seed},
             {"subsample", cap},
             {"n", pair.x.size()},
             {"dim", pair.x.dim()},
             {"subsampled", pair.subsampled},
             {"basis_seed", basis.seed()},
             {"sgw2", res.value},
             {"per_slice_mean", res.value},
             {"per_slice_sd", res.slice_sd()}};
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  std::cout << "config file_x = " << file_x << "\n"
            << "config file_y = " << file_y << "\n"
            << "config projections = " << projections << "\n"
            << "config seed = " << seed << "\n"
            << "config subsample = " << cap << "\n"
            << "config n = " << pair.x.size() << "\n"
            << "config dim = " << pair.x.dim() << "\n"
            << "config subsampled = " << (pair.subsampled ? 1 : 0) << "\n"
            << "config basis_seed = " << basis.seed() << "\n"
            << "sgw2 = " << fmt(res.value) << "\n"
            << "per_slice_mean = " << fmt(res.value) << "\n"
            << "per_slice_sd = " << fmt(res.slice_sd()) << "\n";
  return 0;
}

int cmd_gw(const std::string& file_x, const std::string& file_y, double epsilon,
           std::size_t max_iter, double tol, bool brute_force, std::uint64_t seed,
           std::size_t cap, bool as_json) {
  const EmbeddingSet a = sgw::load_embeddings_auto(file_x);
  const EmbeddingSet b = sgw::load_embeddings_auto(file_y);
  SeededRng rng(seed);
  const PairedSets pair =
      brute_force ? PairedSets{a, b, false} : equalize(a, b, cap, rng);

  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double eps_used = 0.0;
  if (brute_force) {
    const auto res = sgw::gw_bruteforce(pair.x, pair.y);
    value = res.value;
    iterations = res.iterations;
    converged = res.converged;
  } else {
    eps_used = epsilon > 0.0
                   ? epsilon
                   : sgw::default_entropic_epsilon(sgw::pairwise_distances(pair.x));
    const auto res = sgw::gw_entropic(pair.x, pair.y, eps_used, max_iter, tol);
    value = res.value;
    iterations = res.iterations;
    converged = res.converged;
  }
  if (as_json) {
    json out{{"command", "gw"},
             {"file_x", file_x},
             {"file_y", file_y},
             {"mode", brute_force ? "brute-force" : "entropic"},
             {"epsilon", eps_used},
             {"max_iter", max_iter},
             {"tol", tol},
             {"seed", seed},
             {"subsample", cap},
             {"n_x", pair.x.size()},
             {"n_y", pair.y.size()},
             {"gw2", value},
             {"iterations", iterations},
             {"converged", converged}};
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  std::cout << "config file_x = " << file_x << "\n"
            << "config file_y = " << file_y << "\n"
            << "config mode = " << (brute_force ? "brute-force" : "entropic") << "\n"
            << "config epsilon = " << fmt(eps_used) << "\n"
            << "config max_iter = " << max_iter << "\n"
            << "config tol = " << fmt(tol) << "\n"
            << "config seed = " << seed << "\n"
            << "config subsample = " << cap << "\n"
            << "config n_x = " << pair.x.size() << "\n"
            << "config n_y = " << pair.y.size() << "\n"
            << "gw2 = " << fmt(value) << "\n"
            << "iterations = " << iterations << "\n"
            << "converged = " << (converged ? 1 : 0) << "\n";
  return 0;
}

int cmd_eval_relational(const std::string& file_x, const std::string& file_y, double epsilon,
                        std::size_t per_class_cap, std::uint64_t seed, bool as_json) {
  const EmbeddingSet a = sgw::load_embeddings_auto(file_x);
  const EmbeddingSet b = sgw::load_embeddings_auto(file_y);
  const auto groups_a = sgw::split_by_label(a);
  const auto groups_b = sgw::split_by_label(b);

  SeededRng rng(seed);
  struct Row {
    std::string label;
    std::size_t n_a = 0, n_b = 0;
    bool both = false;
    double value = 0.0;
    bool converged = false;
  };
  std::vector<Row> rows;
  double weighted = 0.0;
  std::size_t total = 0;
  for (const auto& [label, set_a] : groups_a) {
    Row row;
    row.label = label;
    row.n_a = set_a.size();
    const auto hit = groups_b.find(label);
    if (hit == groups_b.end()) {
      rows.push_back(row);
      continue;
    }
    row.n_b = hit->second.size();
    row.both = true;
    SeededRng ra = rng.child(label + "/x");
    SeededRng rb = rng.child(label + "/y");
    const EmbeddingSet sub_a = sgw::subsample(set_a, per_class_cap, ra);
    const EmbeddingSet sub_b = sgw::subsample(hit->second, per_class_cap, rb);
    const double eps = epsilon > 0.0
                           ? epsilon
                           : sgw::default_entropic_epsilon(sgw::pairwise_distances(sub_a));
    const auto res = sgw::gw_entropic(sub_a, sub_b, eps);
    row.value = res.value;
    row.converged = res.converged;
    rows.push_back(row);
    weighted += res.value * static_cast<double>(set_a.size());
    total += set_a.size();
  }
  for (const auto& [label, set_b] : groups_b) {
    if (groups_a.find(label) == groups_a.end())
      rows.push_back(Row{label, 0, set_b.size(), false, 0.0, false});
  }
  const double overall = total ? weighted / static_cast<double>(total) : 0.0;

  if (as_json) {
    json jrows = json::array();
    for (const auto& r : rows) {
      json jr{{"label", r.label}, {"n_x", r.n_a}, {"n_y", r.n_b}};
      if (r.both) {
        jr["gw2"] = r.value;
        jr["converged"] = r.converged;
      } else {
        jr["warning"] = "label present in one file only";
      }
      jrows.push_back(jr);
    }
    json out{{"command", "eval-relational"}, {"file_x", file_x},   {"file_y", file_y},
             {"epsilon", epsilon},           {"subsample_per_class", per_class_cap},
             {"seed", seed},                 {"classes", jrows},
             {"overall", overall}};
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  std::cout << "config file_x = " << file_x << "\n"
            << "config file_y = " << file_y << "\n"
            << "config epsilon = " << fmt(epsilon) << "\n"
            << "config subsample_per_class = " << per_class_cap << "\n"
            << "config seed = " << seed << "\n";
  std::cout << "label\tn_x\tn_y\tgw2\tconverged\n";
  for (const auto& r : rows) {
    if (r.both)
      std::cout << r.label << '\t' << r.n_a << '\t' << r.n_b << '\t' << fmt(r.value) << '\t'
                << (r.converged ? 1 : 0) << "\n";
    else
      std::cout << r.label << '\t' << r.n_a << '\t' << r.n_b << "\t-\t-\n";
  }
  std::cout << "overall = " << fmt(overall) << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& preset, bool ablate_sgw,
              const std::string& out_dir, bool as_json) {
  sgw::trainer::TrainConfig cfg =
      preset == "paper" ? sgw::trainer::paper_preset() : sgw::trainer::desk_preset();
  if (!config_path.empty()) cfg = sgw::trainer::load_config(config_path);
  if (ablate_sgw) cfg.weights.lambda_sgw = 0.0;
  cfg.validate();

  const auto data = sgw::trainer::make_synthetic(cfg.dataset);
  std::filesystem::create_directories(out_dir);
  const auto ckpt_path = std::filesystem::path(out_dir) / "generator.ckpt";
  const auto report_path = std::filesystem::path(out_dir) / "train_report.txt";

  auto result = sgw::trainer::train(
      cfg, data, [&](std::size_t step, const sgw::nn::DenseNet& net) {
        const auto periodic =
            std::filesystem::path(out_dir) / ("generator_step" + std::to_string(step) + ".ckpt");
        sgw::nn::save_checkpoint(net, periodic.string());
      });
  sgw::nn::save_checkpoint(result.generator, ckpt_path.string());
  // The report records the checkpoint by file name so identical runs into
  // different directories stay byte-identical.
  result.report.checkpoint_path = ckpt_path.filename().string();
  sgw::trainer::save_report(result.report, report_path.string());

  if (as_json) {
    json out{{"command", "train"},
             {"report", report_path.string()},
             {"checkpoint", ckpt_path.string()},
             {"steps", result.report.history.size()},
             {"baseline_sgw", result.report.baseline_sgw},
             {"final_sgw", result.report.final_sgw}};
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  for (const auto& [k, v] : sgw::trainer::config_entries(cfg))
    std::cout << "config " << k << " = " << v << "\n";
  std::cout << "report = " << report_path.string() << "\n"
            << "checkpoint = " << ckpt_path.string() << "\n"
            << "steps = " << result.report.history.size() << "\n"
            << "baseline_sgw = " << fmt(result.report.baseline_sgw) << "\n"
            << "final_sgw = " << fmt(result.report.final_sgw) << "\n";
  return 0;
}

int cmd_metrics(const std::string& file_a, const std::string& file_b, bool as_json) {
  const auto a = sgw::metrics::load_image_pnm(file_a);
  const auto b = sgw::metrics::load_image_pnm(file_b);
  const double psnr = sgw::metrics::psnr(a, b);
  const double ssim = sgw::metrics::ssim(a, b);
  const std::string psnr_text = std::isinf(psnr) ? "inf" : fmt(psnr);
  if (as_json) {
    json out{{"command", "metrics"},
             {"file_a", file_a},
             {"file_b", file_b},
             {"width", a.width()},
             {"height", a.height()},
             {"channels", a.channels()},
             {"psnr_db", std::isinf(psnr) ? json("inf") : json(psnr)},
             {"ssim", ssim}};
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  std::cout << "config file_a = " << file_a << "\n"
            << "config file_b = " << file_b << "\n"
            << "config width = " << a.width() << "\n"
            << "config height = " << a.height() << "\n"
            << "config channels = " << a.channels() << "\n"
            << "psnr_db = " << psnr_text << "\n"
            << "ssim = " << fmt(ssim) << "\n";
  return 0;
}

int cmd_export_plotdata(const std::string& report_path, const std::string& out_path,
                        const std::string& series_x, const std::string& series_y,
                        const std::vector<std::size_t>& l_values, std::size_t reps,
                        std::uint64_t seed, bool as_json) {
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw sgw::MalformedFile(out_path + ": cannot open for writing");
    os = &file;
  }

  // Mode 2: SGW estimator spread vs number of projections.
  if (!series_x.empty()) {
    const EmbeddingSet a = sgw::load_embeddings_auto(series_x);
    const EmbeddingSet b = sgw::load_embeddings_auto(series_y);
    SeededRng rng(seed);
    const PairedSets pair = equalize(a, b, 0, rng);
    json rows = json::array();
    if (!as_json) (*os) << "projections,mean,sd\n";
    for (const std::size_t L : l_values) {
      std::vector<double> vals;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        SeededRng brng = rng.child("series", L * 10000 + rep);
        vals.push_back(sgw::sgw(pair.x, pair.y, sgw::sample_basis(brng, L, pair.x.dim())).value);
      }
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double s = 0.0;
      for (double v : vals) s += (v - mean) * (v - mean);
      const double sd = vals.size() > 1 ? std::sqrt(s / static_cast<double>(vals.size() - 1)) : 0.0;
      if (as_json)
        rows.push_back({{"projections", L}, {"mean", mean}, {"sd", sd}});
      else
        (*os) << L << ',' << fmt(mean) << ',' << fmt(sd) << "\n";
    }
    if (as_json) {
      json out{{"command", "export-plotdata"}, {"mode", "sgw-series"},
               {"file_x", series_x},           {"file_y", series_y},
               {"reps", reps},                 {"seed", seed},
               {"series", rows}};
      (*os) << out.dump(2) << "\n";
    }
    return 0;
  }

  // Mode 1: loss curves from a training report.
  std::ifstream in(report_path);
  if (!in) throw sgw::MalformedFile(report_path + ": cannot open");
  const auto parsed = sgw::trainer::parse_report(in, report_path);
  if (as_json) {
    json rows = json::array();
    for (const auto& s : parsed.steps)
      rows.push_back({{"step", s[0]}, {"rmse", s[3]}, {"sgw", s[4]}, {"adv", s[5]},
                      {"total", s[6]}});
    json out{{"command", "export-plotdata"}, {"mode", "loss-curves"},
             {"report", report_path},        {"series", rows}};
    (*os) << out.dump(2) << "\n";
    return 0;
  }
  (*os) << "step,rmse,sgw,adv,total\n";
  for (const auto& s : parsed.steps)
    (*os) << fmt(s[0]) << ',' << fmt(s[3]) << ',' << fmt(s[4]) << ',' << fmt(s[5]) << ','
          << fmt(s[6]) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sliced Gromov-Wasserstein toolkit"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "emit results as a single JSON object");

  // sgw
  std::string sgw_x, sgw_y;
  std::size_t sgw_projections = 256;
  std::uint64_t sgw_seed = 42;
  std::size_t sgw_cap = 0;
  auto* sub_sgw = app.add_subcommand("sgw", "sliced GW^2 between two embedding files");
  sub_sgw->add_option("file_x", sgw_x, "first embedding file (csv or raw)")->required();
  sub_sgw->add_option("file_y", sgw_y, "second embedding file (csv or raw)")->required();
  sub_sgw->add_option("--projections", sgw_projections, "number of random directions L")
      ->check(CLI::PositiveNumber);
  sub_sgw->add_option("--seed", sgw_seed, "rng seed");
  sub_sgw->add_option("--subsample", sgw_cap, "cap both sets at this size (0 = no cap)");

  // gw
  std::string gw_x, gw_y;
  double gw_epsilon = 0.0;
  std::size_t gw_max_iter = 500;
  double gw_tol = 1e-7;
  bool gw_brute = false;
  std::uint64_t gw_seed = 42;
  std::size_t gw_cap = 0;
  auto* sub_gw = app.add_subcommand("gw", "full GW^2 (entropic, or brute force for n <= 9)");
  sub_gw->add_option("file_x", gw_x)->required();
  sub_gw->add_option("file_y", gw_y)->required();
  sub_gw->add_option("--epsilon", gw_epsilon,
                     "entropic regularization (0 = 1e-2 x median squared distance)");
  sub_gw->add_option("--max-iter", gw_max_iter, "outer iteration cap");
  sub_gw->add_option("--tol", gw_tol, "plan-change convergence tolerance");
  sub_gw->add_flag("--brute-force", gw_brute, "exact permutation search (n <= 9)");
  sub_gw->add_option("--seed", gw_seed, "rng seed (subsampling)");
  sub_gw->add_option("--subsample", gw_cap, "cap both sets at this size (0 = no cap)");

  // eval-relational
  std::string rel_x, rel_y;
  double rel_epsilon = 0.0;
  std::size_t rel_cap = 64;
  std::uint64_t rel_seed = 17;
  auto* sub_rel = app.add_subcommand("eval-relational",
                                     "per-label entropic GW between two labeled files");
  sub_rel->add_option("file_x", rel_x)->required();
  sub_rel->add_option("file_y", rel_y)->required();
  sub_rel->add_option("--epsilon", rel_epsilon, "entropic epsilon (0 = scale-adaptive)");
  sub_rel->add_option("--subsample-per-class", rel_cap, "per-class point cap")
      ->check(CLI::PositiveNumber);
  sub_rel->add_option("--seed", rel_seed, "subsample seed");

  // train
  std::string train_config, train_preset = "desk", train_out = ".";
  bool train_ablate = false;
  auto* sub_train = app.add_subcommand("train", "desk-scale SGW-GAN training run");
  sub_train->add_option("--config", train_config, "flat key = value config file");
  sub_train->add_option("--preset", train_preset, "desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  sub_train->add_flag("--ablate-sgw", train_ablate, "set lambda_sgw = 0 (w/o SGW ablation)");
  sub_train->add_option("--out-dir", train_out, "directory for report and checkpoints");

  // metrics
  std::string met_a, met_b;
  auto* sub_met = app.add_subcommand("metrics", "PSNR and SSIM between two PGM/PPM images");
  sub_met->add_option("file_a", met_a)->required();
  sub_met->add_option("file_b", met_b)->required();

  // export-plotdata
  std::string plot_report, plot_out, plot_sx, plot_sy;
  std::vector<std::size_t> plot_l{8, 16, 32, 64, 128, 256};
  std::size_t plot_reps = 30;
  std::uint64_t plot_seed = 42;
  auto* sub_plot = app.add_subcommand(
      "export-plotdata", "loss curves from a report, or SGW spread vs L, as CSV");
  sub_plot->add_option("report", plot_report, "train_report.txt from a training run");
  sub_plot->add_option("--out", plot_out, "output CSV path (default: stdout)");
  auto* opt_sx = sub_plot->add_option("--series-x", plot_sx,
                                      "embedding file: emit SGW mean/sd per projection count");
  sub_plot->add_option("--series-y", plot_sy, "second embedding file for --series-x")
      ->needs(opt_sx);
  sub_plot->add_option("--l-values", plot_l, "projection counts for the series");
  sub_plot->add_option("--reps", plot_reps, "independent bases per projection count");
  sub_plot->add_option("--seed", plot_seed, "series seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (sub_sgw->parsed())
      return cmd_sgw(sgw_x, sgw_y, sgw_projections, sgw_seed, sgw_cap, as_json);
    if (sub_gw->parsed())
      return cmd_gw(gw_x, gw_y, gw_epsilon, gw_max_iter, gw_tol, gw_brute, gw_seed, gw_cap,
                    as_json);
    if (sub_rel->parsed())
      return cmd_eval_relational(rel_x, rel_y, rel_epsilon, rel_cap, rel_seed, as_json);
    if (sub_train->parsed())
      return cmd_train(train_config, train_preset, train_ablate, train_out, as_json);
    if (sub_met->parsed()) return cmd_metrics(met_a, met_b, as_json);
    if (sub_plot->parsed()) {
      if (plot_sx.empty() && plot_report.empty())
        throw sgw::InvalidArgument("export-plotdata: give a report or --series-x/--series-y");
      if (!plot_sx.empty() && plot_sy.empty())
        throw sgw::InvalidArgument("export-plotdata: --series-x needs --series-y");
      return cmd_export_plotdata(plot_report, plot_out, plot_sx, plot_sy, plot_l, plot_reps,
                                 plot_seed, as_json);
    }
  } catch (const sgw::NonFiniteLoss& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const sgw::NumericalOverflow& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const sgw::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
