// Command line front end: data generation, training, evaluation, benchmark grid,
// noise sensitivity, tableau checks and plain integration.
#include "mii/experiments.hpp"
#include "mii/integrators.hpp"
#include "mii/noise.hpp"
#include "mii/random.hpp"
#include "mii/systems.hpp"
#include "mii/tableau.hpp"
#include "mii/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace mii;

namespace {

std::vector<double> parse_csv_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

std::ostream& open_or_stdout(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot write '" + path + "'");
  return file;
}

int cmd_tableau(const std::string& what, bool as_json) {
  CatalogEntry entry;
  if (std::filesystem::exists(what)) {
    entry = load_tableau_json(what);
  } else {
    entry = find_tableau(what);
  }
  TableauPropertyReport r = analyze_tableau(entry.rk);
  r.name = entry.display_name.empty() ? r.name : entry.display_name;
  if (entry.mirk) r.alpha = alpha(*entry.mirk);
  // orders above four only show up numerically
  if (r.order_verified >= 4) {
    const auto sys = henon_heiles();
    const Eigen::VectorXd y0 = (Eigen::VectorXd(4) << 0.2, -0.1, 0.15, 0.3).finished();
    const Tableau t = entry.rk;
    const VectorField f = hamiltonian_field(sys);
    Stepper st = [t, f](const Eigen::VectorXd& y, double h) { return rk_step(t, f, y, h); };
    r.empirical_order = empirical_order(st, sys, y0, {0.4, 0.2, 0.1}).order;
  }
  if (as_json)
    std::cout << report_to_json(r) << '\n';
  else
    std::cout << report_to_table(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean inverse integrator toolkit"};
  app.require_subcommand(1);
  // --h is a step size, so help stays long-form only
  app.set_help_flag("--help", "Print this help message and exit");

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a noisy trajectory data set");
  DataSpec gspec;
  std::string gen_out = "data.json", gen_config;
  gen->add_option("--config", gen_config, "JSON config (data section)");
  gen->add_option("--system", gspec.system);
  gen->add_option("--N2", gspec.N2, "number of trajectories");
  gen->add_option("--N1", gspec.N1, "steps per trajectory");
  gen->add_option("--h", gspec.h);
  gen->add_option("--sigma", gspec.sigma);
  gen->add_option("--r-min", gspec.r_min);
  gen->add_option("--r-max", gspec.r_max);
  gen->add_option("--seed", gspec.seed);
  gen->add_option("-o,--out", gen_out);

  // train
  auto* tr = app.add_subcommand("train", "Train a Hamiltonian model from a config");
  std::string train_config, train_out = "model.ckpt", train_loss = "loss.csv", train_data;
  tr->add_option("--config", train_config)->required();
  tr->add_option("--data", train_data, "existing data set (otherwise generated from the config)");
  tr->add_option("-o,--out", train_out, "checkpoint path");
  tr->add_option("--loss-csv", train_loss);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Flow error of a trained model");
  std::string ev_model, ev_system, ev_rollout_csv;
  int ev_points = 10, ev_rollout = 0;
  double ev_h = 0;
  std::uint64_t ev_seed = 0;
  bool ev_seed_set = false;
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--system", ev_system)->required();
  ev->add_option("--test-points", ev_points);
  ev->add_option("--h", ev_h, "defaults to the training step");
  ev->add_option("--seed", ev_seed)->each([&](const std::string&) { ev_seed_set = true; });
  ev->add_option("--rollout-steps", ev_rollout, "also roll the learned field out from the first test point");
  ev->add_option("--rollout-csv", ev_rollout_csv);

  // benchmark
  auto* bm = app.add_subcommand("benchmark", "Run the learning benchmark grid");
  std::string bm_config, bm_out = "benchmark.csv", bm_plot;
  bm->add_option("--config", bm_config);
  bm->add_option("-o,--out", bm_out);
  bm->add_option("--plot-script", bm_plot, "write a matplotlib script for the CSV");

  // sensitivity
  auto* se = app.add_subcommand("sensitivity", "Noise sensitivity of OS and MII targets");
  SensitivityConfig scfg;
  std::string se_hlist = "0.3,0.15,0.075", se_out;
  se->add_option("--system", scfg.system);
  se->add_option("--T", scfg.T);
  se->add_option("--sigma2", scfg.sigma2);
  se->add_option("--samples", scfg.samples);
  se->add_option("--h-list", se_hlist);
  se->add_option("--trajectories", scfg.trajectories);
  se->add_option("--seed", scfg.seed);
  se->add_option("-o,--out", se_out);

  // tableau check
  auto* tb = app.add_subcommand("tableau", "Butcher tableau utilities");
  auto* tbc = tb->add_subcommand("check", "Report order, symplecticity, symmetry");
  tb->require_subcommand(1);
  std::string tb_name;
  bool tb_json = false;
  tbc->add_option("name", tb_name, "catalog name or JSON file")->required();
  tbc->add_flag("--json", tb_json);

  // integrate
  auto* in = app.add_subcommand("integrate", "Integrate a Hamiltonian system");
  std::string in_system, in_method, in_y0, in_out;
  double in_h = 0.1;
  int in_steps = 100;
  in->add_option("--system", in_system)->required();
  in->add_option("--method", in_method)->required();
  in->add_option("--h", in_h);
  in->add_option("--steps", in_steps);
  in->add_option("--y0", in_y0)->required();
  in->add_option("-o,--out", in_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      if (!gen_config.empty()) {
        const auto cfg = load_config(gen_config);
        gspec = cfg.data;
      }
      const DataSet d = generate_dataset(gspec);
      save_dataset(d, gen_out);
      std::cerr << "wrote " << d.trajectories() << " trajectories to " << gen_out << '\n';
    } else if (*tr) {
      const ExperimentConfig cfg = load_config(train_config);
      const DataSet data = train_data.empty() ? generate_dataset(cfg.data) : load_dataset(train_data);
      const HamiltonianSystem sys = system_by_name(data.system);
      TrainConfig tc = cfg.train;
      tc.architecture = resolve_architecture(cfg, sys);
      const TrainResult res = train(tc, data);
      std::ofstream loss(train_loss);
      loss << "epoch,phase,loss,wall_time,iterations,stop_reason\n";
      for (const auto& e : res.history)
        loss << e.epoch << ',' << e.phase << ',' << std::setprecision(12) << e.loss << ',' << e.wall_seconds << ','
             << e.iterations << ',' << e.stop_reason << '\n';
      nlohmann::json meta{{"system", data.system},   {"method", tc.method.label()}, {"h", data.h},
                          {"N1", data.N1},           {"sigma", data.sigma},         {"seed", data.seed},
                          {"train_seconds", res.train_seconds},
                          {"r_min", cfg.data.r_min}, {"r_max", cfg.data.r_max}};
      res.model.save(train_out, meta.dump());
      std::cerr << "trained " << tc.method.label() << " in " << res.train_seconds << " s, final loss "
                << (res.history.empty() ? 0.0 : res.history.back().loss) << '\n';
    } else if (*ev) {
      std::string meta_text;
      const ScalarFieldModel model = ScalarFieldModel::load(ev_model, &meta_text);
      const auto meta = nlohmann::json::parse(meta_text.empty() ? "{}" : meta_text);
      const HamiltonianSystem sys = system_by_name(ev_system);
      if (sys.dim() != model.dim()) throw std::invalid_argument("model dimension does not match the system");
      const double h = ev_h > 0 ? ev_h : meta.value("h", 0.1);
      const std::uint64_t seed = ev_seed_set ? ev_seed : meta.value("seed", std::uint64_t{0});
      const auto pts = sample_shell(ev_points, sys.dim(), meta.value("r_min", 0.3), meta.value("r_max", 0.6),
                                    derive_seed(seed, Stream::test_points));
      const auto rep = flow_error(model.as_vector_field(), sys, pts, h);
      BenchmarkRow row;
      row.system = ev_system;
      row.method = meta.value("method", std::string("?"));
      row.h = h;
      row.N1 = meta.value("N1", 0);
      row.sigma = meta.value("sigma", 0.0);
      row.seed = seed;
      row.flow_error = rep.e;
      row.train_seconds = meta.value("train_seconds", 0.0);
      std::cout << benchmark_csv_header() << '\n' << to_csv(row) << '\n';
      if (ev_rollout > 0) {
        const Trajectory learned = rollout(model.as_vector_field(), pts.front(), h, ev_rollout);
        const Trajectory truth = reference_solve(sys, pts.front(), h, ev_rollout);
        std::ofstream file;
        std::ostream& os = open_or_stdout(ev_rollout_csv, file);
        os << "t";
        for (int i = 0; i < sys.dim(); ++i) os << ",y" << i + 1;
        for (int i = 0; i < sys.dim(); ++i) os << ",ref" << i + 1;
        os << '\n' << std::setprecision(12);
        for (int n = 0; n <= ev_rollout; ++n) {
          os << n * h;
          for (int i = 0; i < sys.dim(); ++i) os << ',' << learned.points(n, i);
          for (int i = 0; i < sys.dim(); ++i) os << ',' << truth.points(n, i);
          os << '\n';
        }
      }
    } else if (*bm) {
      ExperimentConfig cfg = bm_config.empty() ? ExperimentConfig{} : load_config(bm_config);
      const auto rows = run_benchmark(cfg, bm_out, [](const BenchmarkRow& r) {
        std::cerr << r.system << ' ' << r.method << " h=" << r.h << " seed=" << r.seed << " e=" << r.flow_error
                  << ' ' << r.status << '\n';
      });
      if (!bm_plot.empty()) {
        std::ofstream(bm_plot) << benchmark_plot_script(bm_out);
      }
      std::cerr << rows.size() << " cells written to " << bm_out << '\n';
    } else if (*se) {
      scfg.h_list = parse_csv_doubles(se_hlist);
      const auto rows = run_sensitivity(scfg);
      std::ofstream file;
      std::ostream& os = open_or_stdout(se_out, file);
      os << "h,N,mode,method,rho_mc_mean,rho_mc_std,rho_analytic\n" << std::setprecision(10);
      for (const auto& r : rows)
        os << r.h << ',' << r.N << ',' << r.mode << ',' << r.method << ',' << r.rho_mc_mean << ','
           << r.rho_mc_std << ',' << r.rho_analytic << '\n';
    } else if (*tb) {
      return cmd_tableau(tb_name, tb_json);
    } else if (*in) {
      const HamiltonianSystem sys = system_by_name(in_system);
      const auto y0v = parse_csv_doubles(in_y0);
      if (static_cast<int>(y0v.size()) != sys.dim())
        throw std::invalid_argument("--y0 needs " + std::to_string(sys.dim()) + " values");
      const Eigen::VectorXd y0 = Eigen::Map<const Eigen::VectorXd>(y0v.data(), sys.dim());
      const Trajectory t = integrate(make_stepper(in_method, sys), y0, in_h, in_steps);
      std::ofstream file;
      std::ostream& os = open_or_stdout(in_out, file);
      os << "t";
      for (int i = 0; i < sys.dim(); ++i) os << ",y" << i + 1;
      os << ",H\n" << std::setprecision(15);
      for (int n = 0; n <= in_steps; ++n) {
        os << n * in_h;
        for (int i = 0; i < sys.dim(); ++i) os << ',' << t.points(n, i);
        os << ',' << sys.H(t.point(n)) << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
