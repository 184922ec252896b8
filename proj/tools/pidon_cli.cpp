#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "pidon/pidon.hpp"

using namespace pidon;

namespace {

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  in.imbue(std::locale::classic());
  std::string item;
  while (std::getline(in, item, ',')) {
    std::istringstream v(item);
    v.imbue(std::locale::classic());
    double x;
    if (!(v >> x) || !(v >> std::ws).eof()) throw ConfigError("not a number list: '" + s + "'");
    out.push_back(x);
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

/// Initial condition from a command-line spec.
TestCase parse_ic(const ProblemSpec& p, const std::string& spec, const std::string& forcing) {
  TestCase c;
  const auto sensors = p.sensor_grid().points;
  if (starts_with(spec, "random:")) return make_test_set(p, 1, std::stoull(spec.substr(7)))[0];
  if (starts_with(spec, "file:") || fs::exists(spec)) {
    std::string path = starts_with(spec, "file:") ? spec.substr(5) : spec;
    std::size_t index = 0;
    if (const auto hash = path.find('#'); hash != std::string::npos) {
      index = std::stoul(path.substr(hash + 1));
      path = path.substr(0, hash);
    }
    if (!fs::exists(path)) throw FormatError("initial-condition file not found: " + path);
    const auto cases = load_test_set(path);
    if (index >= cases.size()) throw ConfigError("test set " + path + " has no case " + std::to_string(index));
    return cases[index];
  }
  if (spec == "sin") {
    if (!p.spatial()) throw ConfigError("'sin' initial conditions need a spatial problem");
    c.u.resize(static_cast<Eigen::Index>(sensors.size()));
    for (std::size_t i = 0; i < sensors.size(); ++i) c.u(static_cast<Eigen::Index>(i)) = taper(*p.space, sensors[i]);
    return c;
  }
  if (starts_with(spec, "grf:")) {
    if (p.input.kind != InputKind::kGrf) throw ConfigError("'grf:' initial conditions need a GRF problem");
    auto rng = derived_stream(std::stoull(spec.substr(4)), 0, 0x69637331u);
    const auto draw = grf_draw(grf_factor(sensors, p.input.length_scale), rng);
    c.u.resize(static_cast<Eigen::Index>(sensors.size()));
    for (std::size_t i = 0; i < sensors.size(); ++i)
      c.u(static_cast<Eigen::Index>(i)) = draw[i] * (p.input.taper ? taper(*p.space, sensors[i]) : 1.0);
    return c;
  }
  if (starts_with(spec, "soliton:")) {
    const auto ac = parse_list(spec.substr(8));
    if (ac.size() != 2) throw ConfigError("soliton needs a,c");
    c.descriptor = ac;
    c.u.resize(static_cast<Eigen::Index>(sensors.size()));
    for (std::size_t i = 0; i < sensors.size(); ++i)
      c.u(static_cast<Eigen::Index>(i)) = kdv_soliton(ac[0], ac[1], sensors[i], 0.0);
    return c;
  }
  const auto v = parse_list(spec);
  if (p.two_branch()) {
    if (v.size() != 1) throw ShapeError("forced problem takes a scalar initial value");
    c.u0 = v[0];
    const std::uint64_t seed = starts_with(forcing, "fourier:") ? std::stoull(forcing.substr(8)) : 0;
    c.forcing = fourier_forcing(p.input.length_scale, 200, seed);
    return c;
  }
  if (static_cast<int>(v.size()) != p.branch_dim())
    throw ShapeError("initial state needs " + std::to_string(p.branch_dim()) + " values");
  c.u = to_vec(v);
  return c;
}

/// ODE trajectories go to <name>.csv; fields also get a binary export and a
/// CSV of slices at t = 0, T/2, T.
void write_trajectory(const fs::path& dir, const std::string& name, const ProblemSpec* p, const std::vector<double>& t,
                      const Mat& values, FieldMeta meta) {
  if (!p || !p->spatial()) {
    std::vector<std::string> header{"t"};
    for (Eigen::Index k = 0; k < values.cols(); ++k) header.push_back("s" + std::to_string(k + 1));
    CsvWriter w(header);
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::vector<double> row{t[i]};
      for (Eigen::Index k = 0; k < values.cols(); ++k) row.push_back(values(static_cast<Eigen::Index>(i), k));
      w.row(row);
    }
    w.save(dir / (name + ".csv"));
    return;
  }
  const auto x = p->sensor_grid().points;
  meta.columns = {"x"};
  save_field(dir / name, meta, t, x, values);
  const double T = t.back();
  std::vector<Eigen::Index> rows;
  std::vector<std::string> header{"x"};
  for (double target : {0.0, 0.5 * T, T}) {
    Eigen::Index best = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (std::abs(t[i] - target) < std::abs(t[static_cast<std::size_t>(best)] - target)) best = static_cast<Eigen::Index>(i);
    rows.push_back(best);
    std::ostringstream h;
    h.imbue(std::locale::classic());
    h << "t=" << t[static_cast<std::size_t>(best)];
    header.push_back(h.str());
  }
  CsvWriter w(header);
  for (std::size_t j = 0; j < x.size(); ++j) {
    std::vector<double> row{x[j]};
    for (auto r : rows) row.push_back(values(r, static_cast<Eigen::Index>(j)));
    w.row(row);
  }
  w.save(dir / (name + "_slices.csv"));
}

int steps_for(double T, double dt) {
  const double w = T / dt;
  if (!(T > 0.0) || std::abs(w - std::round(w)) > 1e-9 * std::max(1.0, w))
    throw ConfigError("T must be a positive multiple of the window length " + std::to_string(dt));
  return static_cast<int>(std::lround(w));
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long> iters;
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  RunConfig c = load_run_config(a.config);
  if (a.seed) c.set_seed(*a.seed);
  if (a.iters) c.train.iters = *a.iters;
  if (!a.out.empty()) c.out = a.out;
  const fs::path dir = c.out;
  const auto m = train_from_config(c, [](const TrainRecord& r) {
    std::fprintf(stderr, "iter %ld  loss %.6e  lr %.3e\n", r.iteration, r.loss.total, r.lr);
  });
  save_checkpoint(dir / "model", to_checkpoint(m));
  std::ostringstream log;
  m.state.log.write_csv(log);
  write_file_atomic(dir / "train_log.csv", log.str());
  write_file_atomic(dir / "config.json", dump_json(to_json(c)));
  write_run_manifest(dir, "train", to_json(c), to_checkpoint(m).seeds,
                     {{"checkpoint", "model.ckpt.json"}, {"checkpoint_hash", checkpoint_hash(dir / "model")}});
  std::cout << (dir / "model.ckpt.json").string() << "\n";
  return 0;
}

struct RolloutArgs {
  std::string checkpoint;
  std::string ic;
  std::string forcing;
  double T = 0.0;
  int dt_grid = 11;
  double dt = 1.0;  // exact:decay only
  std::string out = "runs/rollout";
};

int cmd_rollout(const RolloutArgs& a) {
  const fs::path dir = a.out;
  if (a.checkpoint == "exact:decay") {
    const Vec u0 = to_vec(parse_list(a.ic));
    const auto r = rollout(decay_propagator(), u0, {steps_for(a.T, a.dt), a.dt, a.dt_grid});
    write_trajectory(dir, "rollout", nullptr, r.t, r.values, {});
    write_run_manifest(dir, "rollout", {{"checkpoint", a.checkpoint}, {"ic", a.ic}, {"T", a.T}, {"dt", a.dt},
                                        {"dt_grid", a.dt_grid}},
                       json::object());
    return 0;
  }
  const auto ck = load_checkpoint(a.checkpoint);
  const auto& p = ck.problem;
  const TestCase c = parse_ic(p, a.ic, a.forcing);
  const auto roll = net_rollout(p, ck.net);
  const auto r = roll(c, steps_for(a.T, p.dt), a.dt_grid);
  const auto hash = checkpoint_hash(a.checkpoint);
  write_trajectory(dir, "rollout", &p, r.t, r.values, {problem_name(p.id), p.dt, steps_for(a.T, p.dt), a.dt_grid, hash, {}});
  save_test_set(dir / "ic.json", p, {c});
  write_run_manifest(dir, "rollout",
                     {{"checkpoint", a.checkpoint}, {"ic", a.ic}, {"forcing", a.forcing}, {"T", a.T}, {"dt_grid", a.dt_grid}},
                     ck.seeds, {{"checkpoint_hash", hash}});
  return 0;
}

struct ReferenceArgs {
  std::string problem;
  std::string ic;
  std::string forcing;
  double T = 0.0;
  std::optional<double> dt;
  int dt_grid = 11;
  std::string out = "runs/reference";
};

int cmd_reference(const ReferenceArgs& a) {
  auto p = make_problem(parse_problem(a.problem));
  if (a.dt) p.dt = *a.dt;
  const fs::path dir = a.out;
  const TestCase c = parse_ic(p, a.ic, a.forcing);
  const auto tw = RolloutPlan{steps_for(a.T, p.dt), p.dt, a.dt_grid}.window_times();
  std::vector<double> t;
  for (int k = 0; k < steps_for(a.T, p.dt); ++k)
    for (std::size_t j = k == 0 ? 0 : 1; j < tw.size(); ++j) t.push_back(k * p.dt + tw[j]);
  const Mat ref = reference_solution(p, c, t);
  write_trajectory(dir, "reference", &p, t, ref, {problem_name(p.id), p.dt, steps_for(a.T, p.dt), a.dt_grid, "", {}});
  save_test_set(dir / "ic.json", p, {c});
  write_run_manifest(dir, "reference", {{"problem", to_json(p)}, {"ic", a.ic}, {"T", a.T}, {"dt_grid", a.dt_grid}},
                     json::object());
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string problem;  // exact:reference only
  std::string testset;
  std::string horizons;
  int dt_grid = 11;
  int workers = 0;
  std::string out = "runs/eval";
};

int cmd_eval(const EvalArgs& a) {
  ProblemSpec p;
  CaseRollout roll;
  json seeds = json::object();
  std::string hash;
  if (a.checkpoint == "exact:reference") {
    if (a.problem.empty()) throw ConfigError("exact:reference needs --problem");
    p = make_problem(parse_problem(a.problem));
    roll = [p](const TestCase& c, int steps, int points) {
      RolloutResult r;
      const auto tw = RolloutPlan{steps, p.dt, points}.window_times();
      for (int k = 0; k < steps; ++k)
        for (std::size_t j = k == 0 ? 0 : 1; j < tw.size(); ++j) r.t.push_back(k * p.dt + tw[j]);
      r.values = reference_solution(p, c, r.t);
      return r;
    };
  } else {
    const auto ck = load_checkpoint(a.checkpoint);
    p = ck.problem;
    roll = net_rollout(p, ck.net);
    seeds = ck.seeds;
    hash = checkpoint_hash(a.checkpoint);
  }
  std::vector<TestCase> cases;
  if (starts_with(a.testset, "random:")) {
    const auto rest = a.testset.substr(7);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw ConfigError("random test sets are written random:N:SEED");
    cases = make_test_set(p, std::stoi(rest.substr(0, colon)), std::stoull(rest.substr(colon + 1)));
  } else {
    if (!fs::exists(a.testset)) throw FormatError("test set not found: " + a.testset);
    cases = load_test_set(a.testset);
  }
  const auto Ts = parse_list(a.horizons);
  const int workers = a.workers > 0 ? a.workers : env_workers();
  const auto rows = error_vs_horizon(p, roll, problem_reference(p), cases, Ts, a.dt_grid, workers);
  const fs::path dir = a.out;
  write_file_atomic(dir / "error_vs_horizon.csv", horizon_csv(rows));
  write_run_manifest(dir, "eval",
                     {{"checkpoint", a.checkpoint}, {"problem", to_json(p)}, {"testset", a.testset}, {"T", Ts},
                      {"dt_grid", a.dt_grid}, {"cases", cases.size()}},
                     seeds, {{"checkpoint_hash", hash}});
  std::cout << horizon_csv(rows);
  return 0;
}

struct SweepArgs {
  std::string problem = "diffusion-reaction";
  std::string config;
  std::string dts = "0.5,1,2";
  double T = 10.0;
  std::optional<long> iters;
  std::optional<int> N;
  int n_test = 10;
  std::uint64_t seed = 1;
  std::string out = "runs/sweep-dt";
};

int cmd_sweep(const SweepArgs& a) {
  RunConfig c = a.config.empty() ? run_config_from_json(json{{"problem", a.problem}}) : load_run_config(a.config);
  if (c.problem.id != parse_problem(a.problem)) throw ConfigError("config problem differs from --problem");
  if (a.iters) c.train.iters = *a.iters;
  if (a.N) c.N = *a.N;
  c.set_seed(a.seed);
  const auto rows = sweep_dt(c, parse_list(a.dts), a.T, a.n_test, a.seed + 1, env_workers(),
                             [](double dt, const TrainRecord& r) {
                               std::fprintf(stderr, "dt %g  iter %ld  loss %.6e\n", dt, r.iteration, r.loss.total);
                             });
  CsvWriter w({"dt", "mean_rel_l2", "diverged", "final_loss"});
  for (const auto& r : rows) w.row(r.dt, r.error, r.diverged, r.final_loss);
  const fs::path dir = a.out;
  w.save(dir / "sweep.csv");
  write_run_manifest(dir, "sweep-dt", {{"base", to_json(c)}, {"dts", a.dts}, {"T", a.T}, {"n_test", a.n_test}},
                     {{"seed", a.seed}});
  std::cout << w.str();
  return 0;
}

struct PinnArgs {
  double T = 20.0;
  long iters = 20000;
  int depth = 4;
  int width = 64;
  int collocation = 256;
  std::string u0 = "1,1";
  std::uint64_t seed = 1;
  std::string out = "runs/baseline-pinn";
};

int cmd_pinn(const PinnArgs& a) {
  PinnOptions o;
  o.T = a.T;
  o.depth = a.depth;
  o.width = a.width;
  o.collocation = a.collocation;
  o.u0 = parse_list(a.u0);
  o.seed = a.seed;
  o.train.iters = a.iters;
  o.train.seed = a.seed;
  o.train.log_every = 1000;
  o.train.on_log = [](const TrainRecord& r) { std::fprintf(stderr, "iter %ld  loss %.6e\n", r.iteration, r.loss.total); };
  const auto r = pinn_baseline(make_problem(ProblemId::kPendulum), o);
  const fs::path dir = a.out;
  CsvWriter w({"t", "pred_s1", "pred_s2", "ref_s1", "ref_s2"});
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    w.row(r.t[i], r.prediction(k, 0), r.prediction(k, 1), r.reference(k, 0), r.reference(k, 1));
  }
  w.save(dir / "pinn.csv");
  std::ostringstream log;
  r.log.write_csv(log);
  write_file_atomic(dir / "train_log.csv", log.str());
  const auto half = static_cast<Eigen::Index>(r.t.size() / 2);
  const double early = rel_l2(Mat(r.prediction.topRows(half + 1)), Mat(r.reference.topRows(half + 1)));
  const double late = rel_l2(Mat(r.prediction.bottomRows(r.prediction.rows() - half)),
                             Mat(r.reference.bottomRows(r.reference.rows() - half)));
  const json summary = {{"error_first_half", early}, {"error_second_half", late}, {"ratio", late / early}};
  write_file_atomic(dir / "summary.json", dump_json(summary));
  write_run_manifest(dir, "baseline-pinn",
                     {{"T", a.T}, {"iters", a.iters}, {"depth", a.depth}, {"width", a.width},
                      {"collocation", a.collocation}, {"u0", o.u0}},
                     {{"seed", a.seed}});
  std::cout << summary.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed DeepONet long-time integration"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train an operator net from a JSON run configuration");
  train->add_option("--config", ta.config, "run configuration")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", ta.seed, "override all seeds");
  train->add_option("--iters", ta.iters, "override the iteration count");
  train->add_option("--out", ta.out, "output directory (default: config 'out')");

  RolloutArgs ra;
  auto* roll = app.add_subcommand("rollout", "iterate a trained operator to a long horizon");
  roll->add_option("--checkpoint", ra.checkpoint, "checkpoint path or exact:decay")->required();
  roll->add_option("--ic", ra.ic, "initial condition: numbers, sin, grf:SEED, soliton:a,c, random:SEED, file[#i]")
      ->required();
  roll->add_option("--forcing", ra.forcing, "forcing for the forced ODE: fourier:SEED");
  roll->add_option("--T", ra.T, "final time")->required();
  roll->add_option("--dt-grid", ra.dt_grid, "evaluation points per window, both ends included");
  roll->add_option("--dt", ra.dt, "window length for exact:decay");
  roll->add_option("--out", ra.out, "output directory");

  ReferenceArgs fa;
  auto* ref = app.add_subcommand("reference", "classical reference solution");
  ref->add_option("--problem", fa.problem, "problem id")->required();
  ref->add_option("--ic", fa.ic, "initial condition (as for rollout)")->required();
  ref->add_option("--forcing", fa.forcing, "forcing for the forced ODE: fourier:SEED");
  ref->add_option("--T", fa.T, "final time")->required();
  ref->add_option("--dt", fa.dt, "window length of the output grid");
  ref->add_option("--dt-grid", fa.dt_grid, "output points per window");
  ref->add_option("--out", fa.out, "output directory");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "mean relative L2 error against horizon");
  eval->add_option("--checkpoint", ea.checkpoint, "checkpoint path or exact:reference")->required();
  eval->add_option("--problem", ea.problem, "problem id for exact:reference");
  eval->add_option("--testset", ea.testset, "test-set JSON or random:N:SEED")->required();
  eval->add_option("--T", ea.horizons, "comma-separated horizons")->required();
  eval->add_option("--dt-grid", ea.dt_grid, "evaluation points per window");
  eval->add_option("--workers", ea.workers, "worker threads (default PIDON_WORKERS or 1)");
  eval->add_option("--out", ea.out, "output directory");

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep-dt", "train one model per window length and compare rollouts");
  sweep->add_option("--problem", sa.problem, "problem id");
  sweep->add_option("--config", sa.config, "base run configuration")->check(CLI::ExistingFile);
  sweep->add_option("--dts", sa.dts, "comma-separated window lengths");
  sweep->add_option("--T", sa.T, "evaluation horizon");
  sweep->add_option("--iters", sa.iters, "iterations per model");
  sweep->add_option("--N", sa.N, "training samples per model");
  sweep->add_option("--n-test", sa.n_test, "test cases");
  sweep->add_option("--seed", sa.seed, "seed");
  sweep->add_option("--out", sa.out, "output directory");

  PinnArgs pa;
  auto* pinn = app.add_subcommand("baseline-pinn", "space-time PINN for the pendulum over [0, T]");
  pinn->add_option("--T", pa.T, "horizon");
  pinn->add_option("--iters", pa.iters, "iterations");
  pinn->add_option("--depth", pa.depth, "hidden layers");
  pinn->add_option("--width", pa.width, "hidden width");
  pinn->add_option("--collocation", pa.collocation, "collocation points per iteration");
  pinn->add_option("--u0", pa.u0, "initial state");
  pinn->add_option("--seed", pa.seed, "seed");
  pinn->add_option("--out", pa.out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(ta);
    if (*roll) return cmd_rollout(ra);
    if (*ref) return cmd_reference(fa);
    if (*eval) return cmd_eval(ea);
    if (*sweep) return cmd_sweep(sa);
    if (*pinn) return cmd_pinn(pa);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
