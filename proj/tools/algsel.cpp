// algsel: command-line driver for the phase-transition lab, the SGD schedule
// lab and single solves. Every experiment writes into <out>/<name>-<hash>,
// where the hash covers the resolved configuration.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "algsel/greedy.hpp"
#include "algsel/io.hpp"
#include "algsel/mlp.hpp"
#include "algsel/phase_lab.hpp"
#include "algsel/sgd_lab.hpp"

#ifndef ALGSEL_VERSION
#define ALGSEL_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace algsel;

namespace {

struct Common {
  std::string out = "runs";
  std::string scale = "desk";
  std::uint64_t seed = 1;
  int jobs = 0;
};

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

fs::path run_dir(const Common& c, const std::string& name, const json& resolved) {
  return fs::path(c.out) / (name + "-" + hex64(fnv1a64(resolved.dump())));
}

/// Creates the run directory and writes the config snapshot into it.
fs::path start_run(const Common& c, const std::string& name, json resolved) {
  resolved["experiment"] = name;
  const auto dir = run_dir(c, name, resolved);
  fs::create_directories(dir);
  json snapshot = {{"tool", "algsel"}, {"version", ALGSEL_VERSION}, {"config", resolved}};
  write_file_atomic(dir / "config.json", snapshot.dump(2) + "\n");
  return dir;
}

void done(const fs::path& dir) { std::cout << dir.string() << "\n"; }

std::string default_mnist_path() {
  const char* dir = std::getenv("ALGSEL_MNIST_DIR");
  return (fs::path(dir ? dir : "data/mnist") / "train-images-idx3-ubyte").string();
}

std::string model_text(const MlpModel& m) { return to_json(m).dump(1) + "\n"; }

std::string history_text(const std::vector<EpochRecord>& h) {
  std::ostringstream os;
  write_history_csv(os, h);
  return os.str();
}

TrainConfig train_config(int epochs, int batch, double lr, const std::string& optimizer, double fraction,
                         std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.learning_rate = lr;
  if (optimizer == "adam")
    cfg.optimizer = Optimizer::Adam;
  else if (optimizer == "sgd")
    cfg.optimizer = Optimizer::Sgd;
  else
    throw ValidationError("--optimizer must be adam or sgd");
  cfg.train_fraction = fraction;
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

void check_scale(const Common& c) {
  if (c.scale != "desk" && c.scale != "paper") throw ValidationError("--scale must be desk or paper");
}

// ---------------------------------------------------------------------------
// cs-dataset

struct CsDatasetArgs {
  std::optional<int> n, trials, rho_steps;
  std::string grid_file;
  std::vector<std::string> algos{"htp", "niht", "csmpsp"};
  std::vector<std::string> ensembles{"gaussian", "sparse", "dct"};
};

int run_cs_dataset(const Common& c, const CsDatasetArgs& a) {
  check_scale(c);
  const bool paper = c.scale == "paper";
  CsDatasetConfig cfg;
  cfg.n = a.n.value_or(paper ? 4096 : 1024);
  cfg.trials = a.trials.value_or(paper ? 100 : 20);
  const int steps = a.rho_steps.value_or(paper ? kPaperRhoSteps : kDeskRhoSteps);
  cfg.grid = a.grid_file.empty() ? default_grid(steps) : read_grid_csv(a.grid_file);
  cfg.algorithms.clear();
  for (const auto& s : a.algos) cfg.algorithms.push_back(algorithm_from_string(s));
  cfg.ensembles.clear();
  for (const auto& s : a.ensembles) cfg.ensembles.push_back(ensemble_from_string(s));
  cfg.seed = c.seed;
  cfg.jobs = c.jobs;
  cfg.validate();

  json resolved = {{"scale", c.scale}, {"n", cfg.n},       {"trials", cfg.trials}, {"seed", cfg.seed},
                   {"algorithms", a.algos}, {"ensembles", a.ensembles}, {"grid_points", cfg.grid.size()},
                   {"grid_fingerprint", cfg.fingerprint()}};
  if (a.grid_file.empty()) resolved["rho_steps"] = steps;
  const auto dir = start_run(c, "cs-dataset", resolved);
  build_cs_dataset(cfg, dir, [](const CsProgress& p) {
    if (p.done % 25 == 0 || p.done == p.total) std::cerr << "cells " << p.done << "/" << p.total << "\n";
  });
  done(dir);
  return 0;
}

// ---------------------------------------------------------------------------
// cs-train / cs-predict-plane

struct TrainArgs {
  std::string dataset;
  std::optional<int> epochs;
  int batch = 32;
  double lr = 1e-3;
  std::string optimizer = "adam";
  std::optional<double> train_frac;
};

int run_cs_train(const Common& c, const TrainArgs& a) {
  const auto cfg = train_config(a.epochs.value_or(500), a.batch, a.lr, a.optimizer, a.train_frac.value_or(0.9), c.seed);
  const auto rows = read_cs_dataset_csv(a.dataset);
  const auto dir = start_run(c, "cs-train",
                             {{"dataset", fs::path(a.dataset).filename().string()},
                              {"dataset_hash", hex64(fnv1a64(read_file(a.dataset)))},
                              {"train", cfg.to_json()}});
  const auto clf = train_cs_classifier(rows, cfg);
  write_file_atomic(dir / "model.json", model_text(clf.model));
  write_file_atomic(dir / "history.csv", history_text(clf.history));
  const json report = {{"rows", rows.size()},
                       {"train_rows", clf.train_rows.size()},
                       {"validation_rows", clf.validation_rows.size()},
                       {"validation_accuracy", clf.validation_accuracy}};
  write_file_atomic(dir / "report.json", report.dump(2) + "\n");
  std::cerr << "validation accuracy " << clf.validation_accuracy << "\n";
  done(dir);
  return 0;
}

struct PlaneArgs {
  std::string model;
  std::vector<std::string> ensembles{"gaussian", "sparse", "dct"};
  std::optional<int> n;
  int side = 100;
  std::string grid_file;
};

int run_cs_predict_plane(const Common& c, const PlaneArgs& a) {
  check_scale(c);
  const int n = a.n.value_or(c.scale == "paper" ? 4096 : 1024);
  const auto grid = a.grid_file.empty() ? uniform_grid(a.side) : read_grid_csv(a.grid_file);
  std::vector<EnsembleKind> kinds;
  for (const auto& s : a.ensembles) kinds.push_back(ensemble_from_string(s));
  const auto model = load_model(a.model);
  const auto dir = start_run(c, "cs-predict-plane",
                             {{"model_hash", hex64(fnv1a64(read_file(a.model)))},
                              {"ensembles", a.ensembles},
                              {"n", n},
                              {"grid_points", grid.size()},
                              {"grid_side", a.grid_file.empty() ? json(a.side) : json(nullptr)}});
  for (auto k : kinds)
    write_file_atomic(dir / ("plane_" + std::string(to_string(k)) + ".csv"), write_plane_csv(predict_plane(model, grid, k, n)));
  done(dir);
  return 0;
}

// ---------------------------------------------------------------------------
// SGD lab

struct SgdArgs {
  std::string kind = "synthetic";
  std::optional<int> count;
  std::optional<long> steps;
  std::string mnist;
  std::optional<double> pixel;
};

SgdDatasetConfig sgd_config(const Common& c, const SgdArgs& a) {
  check_scale(c);
  auto cfg = sgd_kind_from_string(a.kind) == SgdKind::Ct
                 ? SgdDatasetConfig::ct(a.mnist.empty() ? default_mnist_path() : a.mnist)
                 : SgdDatasetConfig::synthetic();
  if (a.count) cfg.count = *a.count;
  if (a.steps) cfg.steps = *a.steps;
  if (a.pixel) cfg.tomo_pixel = *a.pixel;
  cfg.seed = c.seed;
  cfg.jobs = c.jobs;
  cfg.validate();
  return cfg;
}

json sgd_resolved(const SgdDatasetConfig& cfg) {
  json j = cfg.to_json();
  if (cfg.kind == SgdKind::Ct) j["mnist_hash"] = hex64(fnv1a64(read_file(cfg.mnist_path)));
  return j;
}

void write_sgd_files(const fs::path& dir, const SgdDataset& d) {
  write_file_atomic(dir / "sgd_dataset.csv", write_sgd_dataset_csv(d));
  write_file_atomic(dir / "sgd_outcomes.csv", write_sgd_outcomes_csv(d));
  write_file_atomic(dir / "sgd_dataset.json", sgd_dataset_sidecar(d).dump(2) + "\n");
  for (const auto& msg : d.diagnostics) std::cerr << msg << "\n";
}

int run_sgd_dataset(const Common& c, const SgdArgs& a) {
  const auto cfg = sgd_config(c, a);
  if (cfg.kind == SgdKind::Ct && !fs::exists(cfg.mnist_path))
    throw std::runtime_error("MNIST image file not found: " + cfg.mnist_path + " (set ALGSEL_MNIST_DIR or --mnist)");
  const auto dir = start_run(c, "sgd-dataset", sgd_resolved(cfg));
  write_sgd_files(dir, build_sgd_dataset(cfg));
  done(dir);
  return 0;
}

/// Loads a dataset written by sgd-dataset, or builds one in memory.
SgdDataset sgd_input(const Common& c, const SgdArgs& a, const std::string& dataset_dir, json& resolved) {
  if (!dataset_dir.empty()) {
    const fs::path d(dataset_dir);
    auto data = read_sgd_dataset(d / "sgd_dataset.csv", d / "sgd_outcomes.csv");
    resolved["dataset_hash"] = hex64(fnv1a64(read_file(d / "sgd_dataset.csv") + read_file(d / "sgd_outcomes.csv")));
    return data;
  }
  const auto cfg = sgd_config(c, a);
  if (cfg.kind == SgdKind::Ct && !fs::exists(cfg.mnist_path))
    throw std::runtime_error("MNIST image file not found: " + cfg.mnist_path + " (set ALGSEL_MNIST_DIR or --mnist)");
  resolved["dataset"] = sgd_resolved(cfg);
  return build_sgd_dataset(cfg);
}

int run_sgd_train(const Common& c, const SgdArgs& a, const std::string& dataset_dir, const TrainArgs& t) {
  const auto cfg = train_config(t.epochs.value_or(100), t.batch, t.lr, t.optimizer, t.train_frac.value_or(0.75), c.seed);
  json resolved = {{"train", cfg.to_json()}};
  const auto data = sgd_input(c, a, dataset_dir, resolved);
  const auto [train_rows, test_rows] = selector_split(data.records.size(), cfg.train_fraction, cfg.seed, 0);
  const int m = static_cast<int>(data.records.front().system.y.size());
  const auto dir = start_run(c, "sgd-train", resolved);
  const auto res = train(mlp_init({m, kSgdHiddenNodes, 1}, cfg.seed), sgd_labeled_data(data, train_rows), cfg);
  const double accuracy = evaluate(res.model, sgd_labeled_data(data, test_rows));
  write_file_atomic(dir / "model.json", model_text(res.model));
  write_file_atomic(dir / "history.csv", history_text(res.history));
  const json report = {{"train_rows", train_rows.size()}, {"test_rows", test_rows.size()}, {"test_accuracy", accuracy}};
  write_file_atomic(dir / "report.json", report.dump(2) + "\n");
  std::cerr << "test accuracy " << accuracy << "\n";
  done(dir);
  return 0;
}

int run_sgd_evaluate(const Common& c, const SgdArgs& a, const std::string& dataset_dir, const TrainArgs& t,
                     std::vector<double> fractions, int trials) {
  if (fractions.empty()) fractions = {0.75, 0.5, 0.25};
  if (trials < 1) throw ValidationError("--trials must be >= 1");
  const auto cfg = train_config(t.epochs.value_or(100), t.batch, t.lr, t.optimizer, 0.5, c.seed);
  for (double f : fractions)
    if (!(f > 0 && f < 1)) throw ValidationError("--train-frac values must lie in (0, 1)");
  json resolved = {{"train", cfg.to_json()}, {"train_fractions", fractions}, {"trials", trials}};
  resolved["train"].erase("train_fraction");
  const auto data = sgd_input(c, a, dataset_dir, resolved);
  const auto dir = start_run(c, "sgd-evaluate", resolved);
  if (dataset_dir.empty()) write_sgd_files(dir, data);
  std::string table = selector_report_header();
  json report = json::array();
  for (double f : fractions) {
    const auto rep = evaluate_selector(data, f, trials, cfg);
    table += selector_report_line(rep);
    json per = json::array();
    for (const auto& tr : rep.per_trial)
      per.push_back({{"accuracy", tr.accuracy},
                     {"recovery", {tr.recovery[0], tr.recovery[1], tr.recovery[2]}},
                     {"residual", {tr.residual[0], tr.residual[1], tr.residual[2]}}});
    report.push_back({{"train_fraction", f}, {"accuracy", rep.accuracy}, {"trials", per}});
    std::cerr << "train fraction " << f << ": accuracy " << rep.accuracy << "\n";
  }
  write_file_atomic(dir / "table.csv", table);
  write_file_atomic(dir / "report.json", report.dump(2) + "\n");
  done(dir);
  return 0;
}

// ---------------------------------------------------------------------------
// mixture-curve

int run_mixture(const Common& c, const std::vector<double>& errors, double accuracy, int points) {
  if (errors.size() != 4) throw ValidationError("--errors takes four values");
  const ClassErrors e{errors[0], errors[1], errors[2], errors[3]};
  const auto curve = mixture_curve(e, accuracy, unit_grid(points));
  const auto dir = start_run(c, "mixture-curve", {{"errors", errors}, {"accuracy", accuracy}, {"points", points}});
  write_file_atomic(dir / "mixture.csv", write_mixture_csv(curve));
  json report = {{"advantage_interval", nullptr}};
  if (const auto iv = selector_advantage_interval(e, accuracy)) report["advantage_interval"] = {iv->first, iv->second};
  write_file_atomic(dir / "report.json", report.dump(2) + "\n");
  done(dir);
  return 0;
}

// ---------------------------------------------------------------------------
// solve-one

struct SolveArgs {
  std::string algo = "htp";
  std::string ensemble = "gaussian";
  int n = 1024;
  double delta = 0.5;
  double rho = 0.05;
};

int run_solve_one(const Common& c, const SolveArgs& a) {
  const auto algo = algorithm_from_string(a.algo);
  const auto ens = ensemble_from_string(a.ensemble);
  if (ens != EnsembleKind::Gaussian && ens != EnsembleKind::SparseCol && ens != EnsembleKind::SubDCT)
    throw ValidationError("--ensemble must be gaussian, sparse or dct");
  const PlanePoint p{a.n, a.delta, a.rho};
  const auto size = params_from_plane(p);
  const auto prob = make_problem(ens, p, c.seed);
  const auto res = solve(algo, prob.a, prob.y, prob.s, StoppingConfig::for_algorithm(algo));
  json j = to_json(res, &prob.x);
  j["algorithm"] = a.algo;
  j["ensemble"] = a.ensemble;
  j["n"] = a.n;
  j["m"] = size.m;
  j["s"] = size.s;
  j["delta"] = a.delta;
  j["rho"] = a.rho;
  j["seed"] = c.seed;
  std::cout << j.dump(2) << "\n";
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool runs = true) {
  sub->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  if (!runs) return;
  sub->add_option("--out", c.out, "Parent directory for run directories")->capture_default_str();
  sub->add_option("--scale", c.scale, "Preset: desk or paper")->check(CLI::IsMember({"desk", "paper"}))->capture_default_str();
  sub->add_option("--jobs", c.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
}

void add_train(CLI::App* sub, TrainArgs& t) {
  sub->add_option("--epochs", t.epochs, "Training epochs")->check(CLI::PositiveNumber);
  sub->add_option("--batch", t.batch, "Minibatch size")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--lr", t.lr, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--optimizer", t.optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
}

void add_sgd(CLI::App* sub, SgdArgs& s) {
  sub->add_option("--kind", s.kind, "synthetic or ct")->check(CLI::IsMember({"synthetic", "ct"}))->capture_default_str();
  sub->add_option("--count", s.count, "Number of systems (even)");
  sub->add_option("--M", s.steps, "SGD iterations per run");
  sub->add_option("--mnist", s.mnist, "MNIST IDX image file (default $ALGSEL_MNIST_DIR/train-images-idx3-ubyte)");
  sub->add_option("--pixel", s.pixel, "Tomography pixel edge length (ct)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Algorithm selection experiments: greedy sparse recovery and SGD step-size schedules"};
  app.set_version_flag("--version", std::string(ALGSEL_VERSION));
  app.set_config("--config", "", "TOML/INI file with option values; unknown keys are rejected");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  Common common;
  CsDatasetArgs csd;
  TrainArgs train_args;
  PlaneArgs plane;
  SgdArgs sgd;
  std::string dataset_dir;
  std::vector<double> fractions;
  int trials = 10;
  std::vector<double> errors{0.00278, 0.01117, 0.00555, 0.00899};
  double accuracy = 0.8;
  int points = 101;
  SolveArgs solve_args;

  auto* cs_dataset = app.add_subcommand("cs-dataset", "Label the (delta, rho) grid for each solver and ensemble");
  add_common(cs_dataset, common);
  cs_dataset->add_option("--n", csd.n, "Signal length");
  cs_dataset->add_option("--trials", csd.trials, "Problems per cell");
  cs_dataset->add_option("--rho-steps", csd.rho_steps, "rho points per delta column");
  cs_dataset->add_option("--grid", csd.grid_file, "CSV of delta,rho points (replaces the default grid)")->check(CLI::ExistingFile);
  cs_dataset->add_option("--algos", csd.algos, "Solvers")->delimiter(',')->capture_default_str();
  cs_dataset->add_option("--ensembles", csd.ensembles, "Ensembles")->delimiter(',')->capture_default_str();

  auto* cs_train = app.add_subcommand("cs-train", "Train the 6-3-9-1 success classifier on one dataset CSV");
  add_common(cs_train, common);
  add_train(cs_train, train_args);
  cs_train->add_option("--dataset", train_args.dataset, "cs_dataset_<algo>.csv")->required()->check(CLI::ExistingFile);
  cs_train->add_option("--train-frac", train_args.train_frac, "Training fraction (default 0.9)");

  auto* cs_plane = app.add_subcommand("cs-predict-plane", "Predicted success probability over a (delta, rho) grid");
  add_common(cs_plane, common);
  cs_plane->add_option("--model", plane.model, "model.json from cs-train")->required()->check(CLI::ExistingFile);
  cs_plane->add_option("--ensembles", plane.ensembles, "Ensembles")->delimiter(',')->capture_default_str();
  cs_plane->add_option("--n", plane.n, "Signal length");
  cs_plane->add_option("--side", plane.side, "Uniform grid points per axis")->check(CLI::PositiveNumber)->capture_default_str();
  cs_plane->add_option("--grid", plane.grid_file, "CSV of delta,rho points")->check(CLI::ExistingFile);

  auto* sgd_dataset = app.add_subcommand("sgd-dataset", "Generate labeled least-squares systems");
  add_common(sgd_dataset, common);
  add_sgd(sgd_dataset, sgd);

  auto* sgd_train = app.add_subcommand("sgd-train", "Train one schedule selector (m-30-1)");
  add_common(sgd_train, common);
  add_sgd(sgd_train, sgd);
  add_train(sgd_train, train_args);
  sgd_train->add_option("--dataset-dir", dataset_dir, "Run directory of sgd-dataset")->check(CLI::ExistingDirectory);
  sgd_train->add_option("--train-frac", train_args.train_frac, "Training fraction (default 0.75)");

  auto* sgd_eval = app.add_subcommand("sgd-evaluate", "Selector accuracy and error table over random splits");
  add_common(sgd_eval, common);
  add_sgd(sgd_eval, sgd);
  add_train(sgd_eval, train_args);
  sgd_eval->add_option("--dataset-dir", dataset_dir, "Run directory of sgd-dataset")->check(CLI::ExistingDirectory);
  sgd_eval->add_option("--train-frac", fractions, "Training fractions (default 0.75,0.5,0.25)")->delimiter(',');
  sgd_eval->add_option("--trials", trials, "Random splits per fraction")->capture_default_str();

  auto* mixture = app.add_subcommand("mixture-curve", "Average error against the inconsistent fraction");
  add_common(mixture, common);
  mixture->add_option("--errors", errors,
                      "const-on-consistent, const-on-inconsistent, epoch-on-consistent, epoch-on-inconsistent")
      ->delimiter(',')
      ->expected(4)
      ->capture_default_str();
  mixture->add_option("--accuracy", accuracy, "Selector accuracy")->capture_default_str();
  mixture->add_option("--points", points, "Points on [0, 1]")->capture_default_str();

  auto* solve_one = app.add_subcommand("solve-one", "Run one solver on one random problem and print JSON");
  add_common(solve_one, common, false);
  solve_one->add_option("--algo", solve_args.algo, "htp, niht or csmpsp")->capture_default_str();
  solve_one->add_option("--ensemble", solve_args.ensemble, "gaussian, sparse or dct")->capture_default_str();
  solve_one->add_option("--n", solve_args.n, "Signal length")->capture_default_str();
  solve_one->add_option("--delta", solve_args.delta, "m / n")->capture_default_str();
  solve_one->add_option("--rho", solve_args.rho, "s / m")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*cs_dataset) return run_cs_dataset(common, csd);
    if (*cs_train) return run_cs_train(common, train_args);
    if (*cs_plane) return run_cs_predict_plane(common, plane);
    if (*sgd_dataset) return run_sgd_dataset(common, sgd);
    if (*sgd_train) return run_sgd_train(common, sgd, dataset_dir, train_args);
    if (*sgd_eval) return run_sgd_evaluate(common, sgd, dataset_dir, train_args, fractions, trials);
    if (*mixture) return run_mixture(common, errors, accuracy, points);
    if (*solve_one) return run_solve_one(common, solve_args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"level", "error"}, {"experiment", app.get_subcommands().front()->get_name()}, {"message", e.what()}}.dump()
              << "\n";
    return 1;
  }
  return 1;
}
