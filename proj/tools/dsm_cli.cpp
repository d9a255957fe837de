// dsm: experiment runner. Every subcommand reads a config file (plus --set
// overrides), writes CSV/JSON named by the hash of the resolved config, and
// embeds that config as '#' comment lines at the top of each CSV.
//
// Exit codes: 0 success, 1 a non-vacuous bound check failed, 2 usage or
// config error, 3 runtime failure (including divergence of a single run).

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dsm/config.hpp"
#include "dsm/experiments.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dsm;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
};

Config load_config(const Common& c) {
  Config cfg = c.config_path.empty() ? Config::from_string("") : Config::load(c.config_path);
  for (const auto& o : c.overrides) cfg.set(o);
  return cfg;
}

/// CSV writer: config header, column names, then rows at full precision.
class Csv {
 public:
  Csv(const fs::path& path, const Config& cfg, const std::vector<std::string>& columns) : out_(path), path_(path) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out_ << cfg.header_comment();
    for (std::size_t k = 0; k < columns.size(); ++k) out_ << (k ? "," : "") << columns[k];
    out_ << '\n' << std::setprecision(17);
  }
  template <class... T>
  void row(const T&... v) {
    std::size_t k = 0;
    ((out_ << (k++ ? "," : "") << v), ...);
    out_ << '\n';
  }
  const fs::path& path() const { return path_; }

 private:
  std::ofstream out_;
  fs::path path_;
};

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path out_file(const Common& c, const Config& cfg, const std::string& cmd, const std::string& suffix) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / (cmd + "_" + cfg.run_hash() + suffix);
}

// --- shared config readers -------------------------------------------------

Dataset read_dataset(Config& cfg) {
  const auto path = cfg.get_string("data.path", "");
  const auto n = cfg.get_uint("data.n", 20);
  const auto sd = cfg.get_double("data.std", 1.0);
  const auto seed = cfg.get_uint("data.seed", 0);
  return path.empty() ? gaussian_dataset(n, sd, seed) : load_dataset(path);
}

Samples read_samples(Config& cfg, std::size_t def_n, std::size_t def_dim, double def_std) {
  const auto path = cfg.get_string("data.path", "");
  const auto n = cfg.get_uint("data.n", def_n);
  const auto dim = cfg.get_uint("data.dim", def_dim);
  const auto sd = cfg.get_double("data.std", def_std);
  const auto seed = cfg.get_uint("data.seed", 0);
  return path.empty() ? sample_gaussian(n, dim, sd, seed) : read_samples_csv(path);
}

NoiseLevel read_noise(Config& cfg) {
  const double t = cfg.get_double("noise.t", 0.0);
  const double mu = cfg.get_double("noise.mu", 0.81);
  const double sigma = cfg.get_double("noise.sigma", 0.57);
  return t > 0.0 ? NoiseLevel::from_time(t) : NoiseLevel::from_pair(mu, sigma);
}

TrainConfig read_train(Config& cfg, double eta, std::size_t epochs, std::size_t batch, bool scale_by_width) {
  TrainConfig tc;
  tc.eta = cfg.get_double("train.eta", eta);
  tc.epochs = cfg.get_uint("train.epochs", epochs);
  tc.batch_size = cfg.get_uint("train.batch", batch);
  tc.seed = cfg.get_uint("train.seed", 0);
  tc.mode = train_mode_from_string(cfg.get_string("train.mode", "sgd"));
  tc.reduction = reduction_from_string(cfg.get_string("train.reduction", "mean"));
  tc.log_every = cfg.get_uint("train.log_every", 0);
  tc.scale_by_width = cfg.get_bool("train.scale_by_width", scale_by_width);
  return tc;
}

SamplerConfig read_sampler(Config& cfg) {
  SamplerConfig sc;
  sc.T = cfg.get_double("sampler.T", 1.0);
  sc.delta = cfg.get_double("sampler.delta", 0.01);
  sc.steps = cfg.get_uint("sampler.steps", 100);
  sc.n_samples = cfg.get_uint("sampler.samples", 1000);
  sc.seed = cfg.get_uint("sampler.seed", 0);
  sc.validate();
  return sc;
}

void write_samples(const fs::path& path, const Config& cfg, const Samples& s) {
  std::vector<std::string> cols;
  for (Eigen::Index c = 0; c < s.cols(); ++c) cols.push_back("x" + std::to_string(c + 1));
  Csv csv(path, cfg, cols);
  std::ostringstream line;
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    line.str({});
    line << std::setprecision(17);
    for (Eigen::Index c = 0; c < s.cols(); ++c) line << (c ? "," : "") << s(r, c);
    csv.row(line.str());
  }
}

// Wallclock goes to its own file, and only on request, so the main outputs stay reproducible.
void optional_timing(bool enabled, const Common& c, const Config& cfg, const std::string& cmd,
                     const std::vector<std::pair<std::size_t, double>>& rows) {
  if (!enabled) return;
  std::ofstream out(out_file(c, cfg, cmd, "_timing.csv"));
  out << "step,wallclock\n" << std::setprecision(6);
  for (const auto& [s, w] : rows) out << s << ',' << w << '\n';
}

// --- subcommands -----------------------------------------------------------

int cmd_score_eval(const Common& c) {
  Config cfg = load_config(c);
  const auto ds = read_dataset(cfg);
  const auto nl = read_noise(cfg);
  const double lo = cfg.get_double("score.y_min", nl.mu * ds.front() - 1.0);
  const double hi = cfg.get_double("score.y_max", nl.mu * ds.back() + 1.0);
  const auto points = cfg.get_uint("score.points", 401);
  cfg.reject_unknown();
  require(points >= 2 && hi > lo, ErrorCode::ConfigError, "score grid needs points >= 2 and y_max > y_min");
  const PiEvaluator pi(ds, nl, 0);
  Csv csv(out_file(c, cfg, "score_eval", ".csv"), cfg, {"y", "s_star", "s_star_d1", "s_star_d2", "pi"});
  for (std::size_t k = 0; k < points; ++k) {
    const double y = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    csv.row(y, s_star(ds, nl, y), s_star_d1(ds, nl, y), s_star_d2(ds, nl, y), pi.pi(y));
  }
  std::cout << csv.path().string() << '\n';
  return 0;
}

int cmd_train(const Common& c) {
  Config cfg = load_config(c);
  const auto ds = read_dataset(cfg);
  const auto nl = read_noise(cfg);
  const auto m = cfg.get_uint("net.m", 1000);
  double clip = cfg.get_double("net.clip", 0.0);
  const auto net_seed = cfg.get_uint("net.seed", 0);
  const auto tc = read_train(cfg, 0.1, 5000, 50, true);
  const bool want_timing = cfg.get_bool("output.timing", false);
  cfg.reject_unknown();
  if (clip <= 0.0) clip = default_clip_bound(ds, nl);
  const auto res = train(TwoLayerNet::init(m, clip, net_seed), ds, nl, tc);
  Csv csv(out_file(c, cfg, "train", ".csv"), cfg, {"step", "eta", "risk", "excess_risk", "max_abs_w2"});
  std::vector<std::pair<std::size_t, double>> timing;
  for (const auto& r : res.log) {
    csv.row(r.step, r.eta, r.risk, r.excess_risk, r.max_abs_w2);
    timing.emplace_back(r.step, r.wallclock);
  }
  optional_timing(want_timing, c, cfg, "train", timing);
  res.net.save(out_file(c, cfg, "train", "_net.csv").string(), "run_hash = " + cfg.run_hash());
  std::cout << csv.path().string() << '\n';
  if (res.status == TrainStatus::Diverged)
    throw Error(ErrorCode::DivergenceDetected, "training diverged at step " + std::to_string(res.steps_done));
  return 0;
}

int cmd_sweep_lr(const Common& c) {
  Config cfg = load_config(c);
  const auto n = cfg.get_uint("data.n", 20);
  const auto sd = cfg.get_double("data.std", 1.0);
  const auto data_seed = cfg.get_uint("data.seed", 0);
  const bool fresh_data = cfg.get_bool("sweep.fresh_data_per_seed", true);
  const auto nl = read_noise(cfg);
  const auto etas = cfg.get_doubles("sweep.etas", {0.5, 0.1, 0.05});
  auto epochs = cfg.get_uints("sweep.epochs", {});
  const double epoch_scale = cfg.get_double("sweep.epoch_scale", 2500.0);
  const auto seeds = cfg.get_uint("sweep.seeds", 30);
  SweepCellConfig sc;
  sc.m = cfg.get_uint("net.m", 1000);
  sc.clip = cfg.get_double("net.clip", 0.0);
  sc.batch = cfg.get_uint("train.batch", 50);
  sc.mode = train_mode_from_string(cfg.get_string("train.mode", "sgd"));
  sc.reduction = reduction_from_string(cfg.get_string("train.reduction", "mean"));
  sc.measure_sharpness = cfg.get_bool("sweep.sharpness", true);
  sc.power.tol = cfg.get_double("hessian.tol", 1e-6);
  const double y_pad = cfg.get_double("sweep.y_pad", 1.0);
  const auto y_points = cfg.get_uint("sweep.y_points", 201);
  cfg.reject_unknown();
  if (epochs.empty())
    for (double e : etas) epochs.push_back(inverse_epochs(epoch_scale, e));
  require(epochs.size() == etas.size(), ErrorCode::ConfigError, "sweep.epochs must list one count per eta");
  require(seeds >= 1 && y_points >= 2, ErrorCode::ConfigError, "sweep needs seeds >= 1 and y_points >= 2");

  Csv cells(out_file(c, cfg, "sweep_lr", ".csv"), cfg,
            {"eta", "seed", "epochs", "status", "steps", "risk", "excess_risk", "lambda_max", "stability_bound"});
  Csv graphs(out_file(c, cfg, "sweep_lr", "_scores.csv"), cfg, {"eta", "seed", "y", "s_theta", "s_star"});
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const auto ds = gaussian_dataset(n, sd, fresh_data ? data_seed + s : data_seed);
    for (std::size_t k = 0; k < etas.size(); ++k) {
      const auto cell = run_sweep_cell(ds, nl, etas[k], epochs[k], s, sc);
      cells.row(cell.eta, s, cell.epochs, to_string(cell.status), cell.steps_done, cell.risk, cell.excess_risk,
                cell.lambda_max, cell.stability_bound);
      if (s == 0 && cell.status == TrainStatus::Converged) {
        const double lo = nl.mu * ds.front() - y_pad, hi = nl.mu * ds.back() + y_pad;
        for (std::size_t j = 0; j < y_points; ++j) {
          const double y = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(y_points - 1);
          graphs.row(cell.eta, s, y, cell.net.forward(y), s_star(ds, nl, y));
        }
      }
    }
  }
  std::cout << cells.path().string() << '\n';
  return 0;
}

int cmd_hessian_report(const Common& c) {
  Config cfg = load_config(c);
  const auto ds = read_dataset(cfg);
  const auto nl = read_noise(cfg);
  const auto net_path = cfg.get_string("net.path", "");
  const auto m = cfg.get_uint("net.m", 100);
  const double clip = cfg.get_double("net.clip", 0.0);
  const auto net_seed = cfg.get_uint("net.seed", 0);
  const double eta = cfg.get_double("hessian.eta", 0.1);
  PowerOptions po;
  po.tol = cfg.get_double("hessian.tol", 1e-6);
  cfg.reject_unknown();
  const TwoLayerNet net = net_path.empty() ? TwoLayerNet::init(m, clip > 0.0 ? clip : default_clip_bound(ds, nl), net_seed)
                                           : TwoLayerNet::load(net_path);
  auto j = to_json(stability_report(net, ds, nl, eta, po));
  j["run_hash"] = cfg.run_hash();
  j["config"] = cfg.resolved();
  const auto path = out_file(c, cfg, "hessian_report", ".json");
  write_json(path, j);
  std::cout << path.string() << '\n';
  return 0;
}

int cmd_verify_bounds(const Common& c) {
  Config cfg = load_config(c);
  BoundBatchConfig bc;
  bc.instances = cfg.get_uint("verify.instances", 50);
  bc.seed = cfg.get_uint("verify.seed", 0);
  bc.ratio_min = cfg.get_double("verify.ratio_min", 0.01);
  bc.ratio_max = cfg.get_double("verify.ratio_max", 2.0);
  bc.n_min = cfg.get_uint("verify.n_min", 10);
  bc.n_max = cfg.get_uint("verify.n_max", 20);
  bc.m = cfg.get_uint("verify.m", 16);
  bc.mc = cfg.get_uint("verify.mc", 2000);
  cfg.reject_unknown();
  const auto reports = run_bound_batch(bc);
  nlohmann::json j = nlohmann::json::array();
  Csv csv(out_file(c, cfg, "verify_bounds", ".csv"), cfg, {"index", "name", "verdict", "instance"});
  for (std::size_t k = 0; k < reports.size(); ++k) {
    j.push_back(to_json(reports[k]));
    csv.row(k, reports[k].name, to_string(reports[k].verdict()), "\"" + reports[k].instance + "\"");
  }
  const auto path = out_file(c, cfg, "verify_bounds", ".json");
  write_json(path, {{"run_hash", cfg.run_hash()}, {"config", cfg.resolved()}, {"reports", j}});
  const auto s = summarize(reports);
  std::cout << path.string() << '\n'
            << "holds " << s.holds << ", holds-within-error " << s.holds_within_error << ", vacuous " << s.vacuous
            << ", fails " << s.fails << '\n';
  return s.fails > 0 ? 1 : 0;
}

int cmd_diffuse(const Common& c) {
  Config cfg = load_config(c);
  const Samples data = read_samples(cfg, 10, 2, 2.0);
  const auto score = cfg.get_string("diffuse.score", "net");
  const auto sc = read_sampler(cfg);
  if (score == "sstar" || score == "gaussian-fit") {
    cfg.reject_unknown();
    const Samples s = score == "sstar" ? sample_backward(AnalyticEmpirical(data), sc)
                                       : sample_backward(GaussianScore::fit(data), sc);
    const auto path = out_file(c, cfg, "diffuse", "_samples.csv");
    write_samples(path, cfg, s);
    std::cout << path.string() << '\n';
    return 0;
  }
  require(score == "net", ErrorCode::ConfigError, "diffuse.score must be net, sstar or gaussian-fit");
  const auto m = cfg.get_uint("net.m", 1000);
  const auto net_seed = cfg.get_uint("net.seed", 0);
  auto tc = read_train(cfg, 0.05, 100000, 5000, true);
  tc.coordinate_mean = cfg.get_bool("train.coordinate_mean", true);
  const bool want_timing = cfg.get_bool("output.timing", false);
  cfg.reject_unknown();
  const auto run = train_and_sample(data, m, net_seed, tc, sc);
  Csv log(out_file(c, cfg, "diffuse", "_train.csv"), cfg, {"step", "loss"});
  std::vector<std::pair<std::size_t, double>> timing;
  for (const auto& r : run.trained.log) {
    log.row(r.step, r.loss);
    timing.emplace_back(r.step, r.wallclock);
  }
  optional_timing(want_timing, c, cfg, "diffuse", timing);
  if (run.trained.status == TrainStatus::Diverged)
    throw Error(ErrorCode::DivergenceDetected, "training diverged at step " + std::to_string(run.trained.steps_done));
  run.trained.net.save(out_file(c, cfg, "diffuse", "_net.csv").string());
  const auto path = out_file(c, cfg, "diffuse", "_samples.csv");
  write_samples(path, cfg, run.samples);
  std::cout << path.string() << '\n';
  return 0;
}

int cmd_mmd(const Common& c) {
  Config cfg = load_config(c);
  const auto xp = cfg.get_string("mmd.x", "");
  const auto yp = cfg.get_string("mmd.y", "");
  const auto train_path = cfg.get_string("mmd.train", "");
  const double bw = cfg.get_double("mmd.bandwidth", 1.0);
  cfg.reject_unknown();
  require(!xp.empty() && !yp.empty(), ErrorCode::ConfigError, "mmd needs mmd.x and mmd.y sample files");
  const Samples X = read_samples_csv(xp), Y = read_samples_csv(yp);
  const auto r = mmd_gaussian(X, Y, bw);
  nlohmann::json j{{"run_hash", cfg.run_hash()}, {"config", cfg.resolved()}, {"mmd", r.mmd}, {"mmd2", r.mmd2},
                   {"floored", r.floored}, {"bandwidth", bw}};
  if (!train_path.empty()) {
    const Samples T = read_samples_csv(train_path);
    j["nearest_train_mean_x"] = nearest_train_distance(X, T).mean;
    j["nearest_train_mean_y"] = nearest_train_distance(Y, T).mean;
    if (T.rows() >= 2) j["train_mean_pairwise"] = mean_pairwise_distance(T);
  }
  const auto path = out_file(c, cfg, "mmd", ".json");
  write_json(path, j);
  std::cout << path.string() << '\n';
  return 0;
}

int cmd_dim_sweep(const Common& c) {
  Config cfg = load_config(c);
  const auto dims = cfg.get_uints("dim.dims", {2, 5, 10, 50, 80, 100, 200, 400, 1000});
  const auto sims = cfg.get_uint("dim.sims", 3);
  const auto n = cfg.get_uint("data.n", 10);
  const auto sd = cfg.get_double("data.std", 2.0);
  const auto data_seed = cfg.get_uint("data.seed", 0);
  const auto sets = cfg.get_uint("dim.sample_sets", 5);
  const auto m = cfg.get_uint("net.m", 1000);
  auto tc = read_train(cfg, 0.5, 50000, 5000, true);
  tc.coordinate_mean = cfg.get_bool("train.coordinate_mean", true);
  auto sc = read_sampler(cfg);
  cfg.reject_unknown();
  require(sets >= 1 && sims >= 1, ErrorCode::ConfigError, "dim sweep needs sims >= 1 and sample_sets >= 1");
  Csv csv(out_file(c, cfg, "dim_sweep", ".csv"), cfg,
          {"dim", "sim", "set", "status", "mmd_net_sstar", "mmd_net_gaussian_fit", "nearest_train_mean", "train_mean_pairwise"});
  for (std::uint64_t d : dims)
    for (std::uint64_t s = 0; s < sims; ++s) {
      const Samples data = sample_gaussian(n, d, sd, data_seed + 1000 * d + s);
      tc.seed = s;
      const auto trained = train_time_conditioned(TimeNet::init(m, d, s), data, reverse_time_grid(sc), tc);
      const auto fit = gaussian_fit(data);
      for (std::uint64_t k = 0; k < sets; ++k) {
        if (trained.status == TrainStatus::Diverged) {
          csv.row(d, s, k, "diverged", "nan", "nan", "nan", "nan");
          continue;
        }
        SamplerConfig sk = sc;
        sk.seed = sc.seed + k;
        const Samples X = sample_backward(trained.net, sk);
        const Samples star = sample_backward(AnalyticEmpirical(data), sk);
        const Samples gauss = fit.sample(sk.n_samples, sk.seed + 77);
        csv.row(d, s, k, "ok", mmd_gaussian(X, star).mmd, mmd_gaussian(X, gauss).mmd, nearest_train_distance(X, data).mean,
                mean_pairwise_distance(data));
      }
    }
  std::cout << csv.path().string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-matching memorization experiments"};
  app.require_subcommand(1);
  Common common;
  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const Common&);
  };
  const std::vector<Entry> entries = {
      {"score-eval", "tabulate s*, its derivatives and pi on a grid", cmd_score_eval},
      {"train", "train one 1-D two-layer net by SGD", cmd_train},
      {"sweep-lr", "learning-rate sweep: excess risk, sharpness and learned scores", cmd_sweep_lr},
      {"hessian-report", "largest Hessian eigenvalue and the stability condition", cmd_hessian_report},
      {"verify-bounds", "randomized bound verification batch", cmd_verify_bounds},
      {"diffuse", "train a time-conditioned net (or use s*) and sample the reverse diffusion", cmd_diffuse},
      {"mmd", "MMD between two sample files", cmd_mmd},
      {"dim-sweep", "memorization against data dimension", cmd_dim_sweep},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("-c,--config", common.config_path, "config file (key = value, [section] headers)");
    sub->add_option("-s,--set", common.overrides, "override, e.g. --set train.eta=0.5 (repeatable)");
    sub->add_option("-o,--out", common.out_dir, "output directory");
    subs.emplace_back(sub, &e);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    for (const auto& [sub, e] : subs)
      if (sub->parsed()) return e->run(common);
  } catch (const Error& e) {
    std::cerr << "dsm: " << e.what() << '\n';
    return e.code() == ErrorCode::ConfigError ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "dsm: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
