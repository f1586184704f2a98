#include "mii/experiments.hpp"

#include "mii/parallel.hpp"
#include "mii/random.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace mii {

using nlohmann::json;

std::vector<Eigen::VectorXd> sample_shell(int count, int dim, double r_min, double r_max, std::uint64_t seed) {
  if (!(0 <= r_min && r_min < r_max)) throw std::invalid_argument("sample_shell: need 0 <= r_min < r_max");
  Rng rng(seed);
  std::vector<Eigen::VectorXd> out;
  long attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 1000000) throw std::runtime_error("sample_shell: rejection sampling exceeded 1e6 attempts");
    Eigen::VectorXd y = rng.uniform_vector(dim, -r_max, r_max);
    const double r = y.norm();
    if (r <= r_max && r >= r_min) out.push_back(std::move(y));
  }
  return out;
}

DataSet generate_dataset(const DataSpec& spec) {
  if (!(0 < spec.r_min && spec.r_min < spec.r_max)) throw std::invalid_argument("DataSpec: need 0 < r_min < r_max");
  if (spec.N1 < 1 || spec.N2 < 1) throw std::invalid_argument("DataSpec: N1 and N2 must be >= 1");
  if (spec.sigma < 0) throw std::invalid_argument("DataSpec: sigma must be >= 0");
  const HamiltonianSystem sys = system_by_name(spec.system);
  const auto y0s = sample_shell(spec.N2, sys.dim(), spec.r_min, spec.r_max,
                                derive_seed(spec.seed, Stream::data_initial_values));
  DataSet data;
  data.system = spec.system;
  data.h = spec.h;
  data.N1 = spec.N1;
  data.sigma = spec.sigma;
  data.seed = spec.seed;
  data.clean.resize(y0s.size());
  parallel_for(y0s.size(), [&](std::size_t k) { data.clean[k] = reference_solve(sys, y0s[k], spec.h, spec.N1); });
  Rng noise(derive_seed(spec.seed, Stream::noise));
  for (const auto& tr : data.clean) {
    Trajectory t = tr;
    t.exact = spec.sigma == 0;
    if (spec.sigma > 0)
      for (Eigen::Index r = 0; r < t.points.rows(); ++r)
        for (Eigen::Index c = 0; c < t.points.cols(); ++c) t.points(r, c) += noise.normal(0.0, spec.sigma);
    data.noisy.push_back(std::move(t));
  }
  return data;
}

namespace {

json matrix_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd json_matrix(const json& j) {
  const auto R = static_cast<Eigen::Index>(j.size());
  const auto C = R ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd M(R, C);
  for (Eigen::Index r = 0; r < R; ++r) {
    if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(r)].size()) != C)
      throw std::runtime_error("data set: ragged matrix");
    for (Eigen::Index c = 0; c < C; ++c) M(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  return M;
}

}  // namespace

void save_dataset(const DataSet& data, const std::string& path) {
  json j;
  j["format"] = "mii-dataset";
  j["system"] = data.system;
  j["h"] = data.h;
  j["N1"] = data.N1;
  j["sigma"] = data.sigma;
  j["seed"] = data.seed;
  j["noisy"] = json::array();
  j["clean"] = json::array();
  for (const auto& t : data.noisy) j["noisy"].push_back(matrix_json(t.points));
  for (const auto& t : data.clean) j["clean"].push_back(matrix_json(t.points));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write data set '" + path + "'");
  out << std::setprecision(17) << j.dump() << '\n';
}

DataSet load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data set '" + path + "'");
  const json j = json::parse(in);
  if (j.value("format", "") != "mii-dataset") throw std::runtime_error("'" + path + "' is not a data set");
  DataSet d;
  d.system = j.at("system").get<std::string>();
  d.h = j.at("h").get<double>();
  d.N1 = j.at("N1").get<int>();
  d.sigma = j.at("sigma").get<double>();
  d.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& m : j.at("noisy")) {
    Trajectory t;
    t.h = d.h;
    t.points = json_matrix(m);
    t.exact = d.sigma == 0;
    d.noisy.push_back(std::move(t));
  }
  for (const auto& m : j.at("clean")) {
    Trajectory t;
    t.h = d.h;
    t.points = json_matrix(m);
    d.clean.push_back(std::move(t));
  }
  return d;
}

ModelArchitecture default_architecture(const HamiltonianSystem& sys, std::vector<int> hidden) {
  ModelArchitecture a;
  a.variant = sys.separable ? ModelVariant::separable : ModelVariant::dense;
  a.state_dim = sys.dim();
  a.hidden = std::move(hidden);
  return a;
}

ModelArchitecture resolve_architecture(const ExperimentConfig& cfg, const HamiltonianSystem& sys) {
  if (cfg.model_variant == "auto") return default_architecture(sys, cfg.hidden);
  ModelArchitecture a;
  a.variant = model_variant_from_string(cfg.model_variant);
  a.state_dim = sys.dim();
  a.hidden = cfg.hidden;
  return a;
}

ExperimentConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig c;
  c.seed = j.value("seed", std::uint64_t{0});
  c.data.seed = c.seed;
  c.train.seed = c.seed;
  if (j.contains("data")) {
    const auto& d = j["data"];
    c.data.system = d.value("system", c.data.system);
    c.data.N2 = d.value("N2", c.data.N2);
    c.data.r_min = d.value("r_min", c.data.r_min);
    c.data.r_max = d.value("r_max", c.data.r_max);
    c.data.h = d.value("h", c.data.h);
    c.data.N1 = d.value("N1", c.data.N1);
    c.data.sigma = d.value("sigma", c.data.sigma);
    c.test_points = d.value("test_points", c.test_points);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    c.model_variant = m.value("variant", c.model_variant);
    if (m.contains("hidden")) c.hidden = m["hidden"].get<std::vector<int>>();
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    if (t.contains("method")) c.train.method = parse_method(t["method"].get<std::string>());
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.pretrain_epochs = t.value("pretrain_epochs", c.train.pretrain_epochs);
    c.train.optimizer = t.value("optimizer", c.train.optimizer);
    c.train.lbfgs.max_iterations = t.value("max_iterations", c.train.lbfgs.max_iterations);
    c.train.lbfgs.history = t.value("history", c.train.lbfgs.history);
    c.train.lbfgs.grad_tolerance = t.value("grad_tolerance", c.train.lbfgs.grad_tolerance);
    c.train.lbfgs.change_tolerance = t.value("change_tolerance", c.train.lbfgs.change_tolerance);
    c.train.adam.learning_rate = t.value("adam_learning_rate", c.train.adam.learning_rate);
    c.train.adam.iterations = t.value("adam_iterations", c.train.adam.iterations);
    c.train.iso.max_iterations = t.value("iso_max_iterations", c.train.iso.max_iterations);
    c.train.iso.grad_tolerance = t.value("iso_grad_tolerance", c.train.iso.grad_tolerance);
  }
  if (c.train.optimizer != "lbfgs" && c.train.optimizer != "adam")
    throw std::invalid_argument("train.optimizer must be 'lbfgs' or 'adam'");
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (g.contains("systems")) c.grid.systems = g["systems"].get<std::vector<std::string>>();
    if (g.contains("methods")) c.grid.methods = g["methods"].get<std::vector<std::string>>();
    if (g.contains("steps")) {
      c.grid.steps.clear();
      for (const auto& s : g["steps"]) c.grid.steps.emplace_back(s.at(0).get<double>(), s.at(1).get<int>());
    }
    if (g.contains("sigmas")) c.grid.sigmas = g["sigmas"].get<std::vector<double>>();
    c.grid.repeats = g.value("repeats", c.grid.repeats);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string benchmark_csv_header() { return "system,method,h,N1,sigma,seed,flow_error,train_seconds,status"; }

std::string to_csv(const BenchmarkRow& r) {
  std::ostringstream os;
  os << r.system << ',' << r.method << ',' << r.h << ',' << r.N1 << ',' << r.sigma << ',' << r.seed << ','
     << std::setprecision(10) << r.flow_error << ',' << std::setprecision(6) << r.train_seconds << ',';
  std::string status = r.status;
  for (auto& ch : status)
    if (ch == ',' || ch == '\n') ch = ';';
  os << status;
  return os.str();
}

std::uint64_t repeat_seed(std::uint64_t root, int repeat) {
  return derive_seed(root, 0, static_cast<std::uint64_t>(repeat));
}

BenchmarkRow run_cell(const ExperimentConfig& cfg, const std::string& system, const std::string& method, double h,
                      int N1, double sigma, int repeat) {
  BenchmarkRow row;
  row.system = system;
  row.method = method;
  row.h = h;
  row.N1 = N1;
  row.sigma = sigma;
  row.seed = repeat_seed(cfg.seed, repeat);
  try {
    const HamiltonianSystem sys = system_by_name(system);
    TrainConfig tc = cfg.train;
    tc.method = parse_method(method);
    tc.seed = row.seed;
    row.method = tc.method.label();
    if (tc.method.integrator == "stormer_verlet" && !sys.separable)
      throw std::invalid_argument("Stormer-Verlet requires separability (system '" + system + "')");
    DataSpec ds = cfg.data;
    ds.system = system;
    ds.h = h;
    ds.N1 = N1;
    ds.sigma = sigma;
    ds.seed = row.seed;
    const DataSet data = generate_dataset(ds);
    tc.architecture = resolve_architecture(cfg, sys);
    const TrainResult tr = train(tc, data);
    const auto pts = sample_shell(cfg.test_points, sys.dim(), ds.r_min, ds.r_max,
                                  derive_seed(row.seed, Stream::test_points));
    row.flow_error = flow_error(tr.model.as_vector_field(), sys, pts, h).e;
    row.train_seconds = tr.train_seconds;
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
    row.flow_error = std::nan("");
  }
  return row;
}

std::vector<BenchmarkRow> run_benchmark(const ExperimentConfig& cfg, const std::string& csv_path,
                                        const std::function<void(const BenchmarkRow&)>& progress) {
  struct Cell {
    std::string system, method;
    double h;
    int N1;
    double sigma;
    int repeat;
  };
  std::vector<Cell> cells;
  for (const auto& s : cfg.grid.systems)
    for (const auto& [h, N1] : cfg.grid.steps)
      for (double sigma : cfg.grid.sigmas)
        for (const auto& m : cfg.grid.methods)
          for (int r = 0; r < cfg.grid.repeats; ++r) cells.push_back({s, m, h, N1, sigma, r});

  std::mutex writer;
  if (!csv_path.empty()) {
    std::ifstream probe(csv_path);
    const bool fresh = !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
    if (fresh) {
      std::ofstream out(csv_path, std::ios::app);
      out << benchmark_csv_header() << '\n';
    }
  }
  std::vector<BenchmarkRow> rows(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    const auto& c = cells[i];
    rows[i] = run_cell(cfg, c.system, c.method, c.h, c.N1, c.sigma, c.repeat);
    std::lock_guard<std::mutex> g(writer);
    if (!csv_path.empty()) {
      std::ofstream out(csv_path, std::ios::app);
      out << to_csv(rows[i]) << '\n';
      out.flush();
    }
    if (progress) progress(rows[i]);
  });
  return rows;
}

std::string benchmark_plot_script(const std::string& csv_path) {
  std::ostringstream os;
  os << "# Plots flow error against step size for each system and method.\n"
        "# Usage: python3 plot_benchmark.py [results.csv]\n"
        "import sys\n"
        "import pandas as pd\n"
        "import matplotlib.pyplot as plt\n\n"
        "path = sys.argv[1] if len(sys.argv) > 1 else '"
     << csv_path
     << "'\n"
        "df = pd.read_csv(path)\n"
        "df = df[df.status == 'ok']\n"
        "for (system, sigma), part in df.groupby(['system', 'sigma']):\n"
        "    fig, ax = plt.subplots(figsize=(5, 4))\n"
        "    for method, m in part.groupby('method'):\n"
        "        stats = m.groupby('h').flow_error.agg(['mean', 'std']).reset_index()\n"
        "        ax.errorbar(stats.h, stats['mean'], yerr=stats['std'], marker='o', capsize=3, label=method)\n"
        "    ax.set_xscale('log')\n"
        "    ax.set_yscale('log')\n"
        "    ax.set_xlabel('h')\n"
        "    ax.set_ylabel('flow error')\n"
        "    ax.set_title(f'{system}, sigma={sigma}')\n"
        "    ax.legend()\n"
        "    fig.tight_layout()\n"
        "    fig.savefig(f'flow_error_{system}_sigma{sigma}.pdf')\n";
  return os.str();
}

Trajectory rollout(const VectorField& f, const Eigen::VectorXd& y0, double h, int steps) {
  return reference_solve(f, y0, h, steps);
}

}  // namespace mii
