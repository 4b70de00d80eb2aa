#include "tvae/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "tvae/config.hpp"
#include "tvae/data.hpp"
#include "tvae/distributions.hpp"
#include "tvae/errors.hpp"
#include "tvae/kernels.hpp"

namespace tvae {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw FormatError("write to '" + p.string() + "' failed");
}

std::set<std::string> every_block(const ParamSet& params) {
  std::set<std::string> s;
  for (const auto& [name, _] : params) s.insert(name);
  return s;
}

// Generative samples decoded to observations.
std::string sample_csv(const Checkpoint& ckpt, std::size_t count, Rng& rng) {
  const ModelDims dims = ckpt.dims();
  const std::size_t d = dims.latent_dim;
  const std::size_t l = dims.observed_dim;
  std::ostringstream out;
  out << "cluster,u";
  for (std::size_t i = 0; i < d; ++i) out << ",x" << i;
  for (std::size_t i = 0; i < l; ++i) out << ",o" << i;
  out << '\n';
  if (count == 0) return out.str();
  const SmmParams smm = materialize_params(ckpt.mixture());
  const GenerativeSample gen = sample_generative(rng, smm, count);
  const LeafMap leaves = make_leaves(ckpt.params, every_block(ckpt.params));
  const DecoderStats dec =
      decoder_forward(Tensor::constant({count, d}, gen.latents), 1, leaves, dims.decoder, ckpt.config.log_std_clamp);
  for (std::size_t n = 0; n < count; ++n) {
    out << gen.labels[n] << ',' << fmt17(gen.scales[n]);
    for (std::size_t i = 0; i < d; ++i) out << ',' << fmt17(gen.latents[n * d + i]);
    for (std::size_t i = 0; i < l; ++i) {
      const double o = dec.mu_o.at(n, i) + std::exp(dec.log_std_o.at(n, i)) * rng.normal();
      out << ',' << fmt17(o);
    }
    out << '\n';
  }
  return out.str();
}

// Encoder means, responsibilities and hard assignments of every row.
std::string latent_csv(const Checkpoint& ckpt, const Dataset& data) {
  const ModelDims dims = ckpt.dims();
  const std::size_t d = dims.latent_dim;
  const std::size_t k = dims.components;
  const LeafMap leaves = make_leaves(ckpt.params, every_block(ckpt.params));
  const auto enc = encoder_forward(Tensor::constant({data.rows, data.cols}, data.observations), leaves,
                                   dims.encoder, ckpt.config.log_std_clamp);
  const auto gamma = predict_responsibilities(ckpt, data);
  std::ostringstream out;
  for (std::size_t i = 0; i < d; ++i) out << (i ? "," : "") << "mu" << i;
  for (std::size_t i = 0; i < k; ++i) out << ",gamma" << i;
  out << ",cluster";
  if (data.has_labels()) out << ",label";
  out << '\n';
  for (std::size_t n = 0; n < data.rows; ++n) {
    for (std::size_t i = 0; i < d; ++i) out << (i ? "," : "") << fmt17(enc.mu_x.at(n, i));
    std::size_t best = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const double g = gamma[n * k + i];
      if (g > gamma[n * k + best]) best = i;
      out << ',' << fmt17(g);
    }
    out << ',' << best;
    if (data.has_labels()) out << ',' << data.labels[n];
    out << '\n';
  }
  return out.str();
}

void write_manifest(const fs::path& dir, const json& manifest) { write_file(dir / "manifest.json", manifest.dump(2) + "\n"); }

}  // namespace

fs::path output_root() {
  const char* env = std::getenv("TVAE_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path cmd_train(const TrainCommand& cmd) {
  TrainConfig cfg = load_config(cmd.config);
  cfg.seed = cmd.seed;
  if (cmd.baseline) cfg.baseline = *cmd.baseline;
  if (cmd.epochs) cfg.epochs = *cmd.epochs;
  cfg.validate();
  const Dataset data = load_csv(cmd.data);
  const std::string config_text = config_to_json(cfg).dump(2) + "\n";
  const std::string hash = git_blob_sha1(config_text);
  const fs::path dir = cmd.out ? *cmd.out : output_root() / ("train-" + hash.substr(0, 12));
  fs::create_directories(dir);
  write_file(dir / "config.json", config_text);
  write_manifest(dir, {{"command", "train"},
                       {"config_path", cmd.config.string()},
                       {"config_hash", hash},
                       {"seed", cfg.seed},
                       {"inputs", {{"data", cmd.data.string()}, {"data_hash", git_blob_sha1(read_file(cmd.data))}}},
                       {"outputs",
                        {"config.json", "checkpoint.json", "metrics.csv", "timing.csv", "latent.csv", "samples.csv"}}});

  std::ofstream metrics(dir / "metrics.csv");
  std::ofstream timing(dir / "timing.csv");
  if (!metrics || !timing) throw FormatError("cannot write metrics in '" + dir.string() + "'");
  metrics << "epoch,loss,error_rate,median_nu\n";
  timing << "epoch,seconds\n";
  Trainer trainer(data, cfg);
  while (!trainer.finished()) {
    const EpochMetrics m = trainer.run_epoch();
    metrics << m.epoch << ',' << fmt17(m.loss) << ',' << (std::isnan(m.error_rate) ? "" : fmt17(m.error_rate)) << ','
            << fmt17(m.median_nu) << '\n';
    metrics.flush();
    timing << m.epoch << ',' << fmt17(m.seconds) << '\n';
    std::cout << "epoch " << m.epoch << " loss " << m.loss;
    if (!std::isnan(m.error_rate)) std::cout << " error " << m.error_rate;
    std::cout << " median_nu " << m.median_nu << '\n';
  }
  const Checkpoint& ckpt = trainer.state();
  save_checkpoint(ckpt, dir / "checkpoint.json");
  write_file(dir / "latent.csv", latent_csv(ckpt, data));
  Rng rng = Rng(cfg.seed).split(3);
  write_file(dir / "samples.csv", sample_csv(ckpt, cmd.plot_samples, rng));
  std::cout << "run directory: " << dir.string() << '\n';
  return dir;
}

void cmd_sample(const SampleCommand& cmd) {
  const Checkpoint ckpt = load_checkpoint(cmd.checkpoint);
  Rng rng(cmd.seed);
  write_file(cmd.out, sample_csv(ckpt, cmd.count, rng));
}

double GradcheckResult::worst() const {
  double w = 0.0;
  for (const auto& [_, e] : max_rel_error) w = std::max(w, e);
  return w;
}

namespace {

std::string grad_group(const std::string& name) {
  if (name.rfind("enc.", 0) == 0) return "encoder";
  if (name.rfind("dec.", 0) == 0) return "decoder";
  if (name == kMixLogits) return "m";
  if (name == kMixDof) return "n";
  if (name == kMixMean) return "mu";
  return "C";
}

}  // namespace

GradcheckResult run_gradcheck(const GradcheckOptions& o) {
  if (o.rows * o.observed_dim > 10000) throw ContractError("gradcheck: N*L must not exceed 10^4");
  if (o.observed_dim == 0 || o.hidden == 0 || o.latent_dim == 0 || o.components == 0 || o.rows == 0 ||
      o.samples == 0) {
    throw ContractError("gradcheck: all dimensions must be positive");
  }
  if (o.corrupt_group && std::find(kGradGroups.begin(), kGradGroups.end(), *o.corrupt_group) == kGradGroups.end()) {
    throw ContractError("gradcheck: unknown group '" + *o.corrupt_group + "'");
  }
  Rng rng(o.seed);
  ModelDims dims;
  dims.encoder = {{o.observed_dim, o.hidden, o.latent_dim}, Activation::tanh};
  dims.decoder = {{o.latent_dim, o.hidden, o.observed_dim}, Activation::tanh};
  dims.components = o.components;
  dims.latent_dim = o.latent_dim;
  dims.observed_dim = o.observed_dim;
  ParamSet params;
  init_mlp(params, "enc", dims.encoder, rng);
  init_mlp(params, "dec", dims.decoder, rng);
  for (auto& [_, b] : params)
    for (auto& v : b.values) v += 0.1 * rng.normal();
  SmmRawParams raw;
  raw.components = o.components;
  raw.dim = o.latent_dim;
  raw.sigma_jitter_sq = 0.1;
  for (std::size_t k = 0; k < o.components; ++k) {
    raw.m.push_back(0.5 * rng.normal());
    raw.n.push_back(3.0 + 0.5 * rng.normal());
    for (std::size_t i = 0; i < o.latent_dim; ++i) {
      raw.mu.push_back(rng.normal());
      raw.c_logdiag.push_back(-0.5 + 0.2 * rng.normal());
      for (std::size_t j = 0; j < i; ++j) raw.c_lower.push_back(0.3 * rng.normal());
    }
  }
  raw.store(params);
  std::vector<double> obs(o.rows * o.observed_dim);
  for (auto& v : obs) v = rng.normal();
  const Tensor batch = Tensor::constant({o.rows, o.observed_dim}, obs);
  const Tensor eps = sample_standard_normal(rng, {o.samples, o.rows, o.latent_dim});
  std::vector<int> labels(o.rows);
  for (std::size_t n = 0; n < o.rows; ++n) labels[n] = static_cast<int>(n % o.components);
  LossOptions lopts;
  lopts.mode = o.mode;
  lopts.l1_coeff = o.l1_coeff;
  lopts.sigma_jitter_sq = raw.sigma_jitter_sq;
  const std::vector<int>* lab = o.mode == TrainingMode::unsupervised ? nullptr : &labels;

  auto loss_value = [&](const ParamSet& p) {
    const LeafMap leaves = make_leaves(p, every_block(p));
    return loss_batch(batch, leaves, dims, lopts, eps, lab).loss.item();
  };
  const GradResult analytic = evaluate_and_grad(loss_batch(batch, make_leaves(params), dims, lopts, eps, lab).loss);

  GradcheckResult result;
  for (const auto& g : kGradGroups) result.max_rel_error[g] = 0.0;
  std::set<std::string> corrupted;
  for (const auto& [name, block] : params) {
    const std::string group = grad_group(name);
    std::vector<double> a = analytic.grads.at(name).to_vector();
    if (o.corrupt_group && *o.corrupt_group == group && corrupted.insert(group).second) a[0] = a[0] * 1.01 + 1e-3;
    for (std::size_t i = 0; i < block.values.size(); ++i) {
      ParamSet p = params;
      p[name].values[i] += o.step;
      const double up = loss_value(p);
      p[name].values[i] = block.values[i] - o.step;
      const double down = loss_value(p);
      const double fd = (up - down) / (2.0 * o.step);
      const double rel = std::fabs(a[i] - fd) / std::max({std::fabs(a[i]), std::fabs(fd), 1e-6});
      result.max_rel_error[group] = std::max(result.max_rel_error[group], rel);
      ++result.entries;
    }
  }
  return result;
}

namespace {

struct FoldResult {
  double dev_error = 0.0;
  double test_error = 0.0;
};

std::vector<json> grid_cells(const json& grid) {
  if (!grid.is_object() || grid.empty()) throw ContractError("grid: expected a nonempty object of value lists");
  std::vector<json> cells{json::object()};
  for (const auto& [key, values] : grid.items()) {
    if (!values.is_array() || values.empty()) throw ContractError("grid: '" + key + "' must be a nonempty list");
    std::vector<json> next;
    for (const auto& c : cells)
      for (const auto& v : values) {
        json cell = c;
        cell[key] = v;
        next.push_back(cell);
      }
    cells = std::move(next);
  }
  return cells;
}

}  // namespace

std::vector<GridCell> cmd_gridsearch(const GridCommand& cmd) {
  if (cmd.folds == 0) throw ContractError("gridsearch: folds must be positive");
  const json base = config_to_json(load_config(cmd.template_config));
  json grid;
  try {
    grid = json::parse(read_file(cmd.grid));
  } catch (const json::parse_error& e) {
    throw FormatError(cmd.grid.string() + ": " + e.what());
  }
  const auto cells = grid_cells(grid);
  std::vector<TrainConfig> configs;
  for (const auto& cell : cells) {
    json merged = base;
    merged.update(cell);
    configs.push_back(config_from_json(merged));
  }
  const Dataset data = load_csv(cmd.data);
  if (!data.has_labels()) throw ContractError("gridsearch: data needs a label column");
  Rng split_rng(cmd.seed);
  const SplitPlan plan = kfold_split(data, cmd.folds, cmd.label_fraction, split_rng);
  const Dataset dev = data.subset(plan.dev);
  const Dataset test = data.subset(plan.test);
  fs::create_directories(cmd.out);
  write_manifest(cmd.out, {{"command", "gridsearch"},
                           {"template", cmd.template_config.string()},
                           {"template_hash", git_blob_sha1(read_file(cmd.template_config))},
                           {"grid", grid},
                           {"data", cmd.data.string()},
                           {"folds", cmd.folds},
                           {"label_fraction", cmd.label_fraction},
                           {"seed", cmd.seed}});

  const std::size_t tasks = cells.size() * cmd.folds;
  std::vector<FoldResult> results(tasks);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr error;
  std::mutex log_mu;
  auto worker = [&] {
    kernels::set_thread_limit(cmd.jobs > 1 ? 1 : 0);
    while (true) {
      const std::size_t t = next++;
      if (t >= tasks) return;
      {
        std::lock_guard lock(err_mu);
        if (error) return;
      }
      try {
        const std::size_t c = t / cmd.folds;
        const std::size_t f = t % cmd.folds;
        char name[64];
        std::snprintf(name, sizeof name, "cell_%03zu/fold_%zu", c, f);
        const fs::path dir = cmd.out / name;
        const fs::path done = dir / "result.json";
        const std::string overrides = cells[c].dump();
        if (fs::exists(done)) {
          const json r = json::parse(read_file(done));
          if (r.at("overrides").get<std::string>() == overrides) {
            results[t] = {r.at("dev_error").get<double>(), r.at("test_error").get<double>()};
            continue;
          }
        }
        fs::create_directories(dir);
        TrainConfig cfg = configs[c];
        cfg.seed = configs[c].seed + f;
        const auto idx = plan.train_indices(f);
        Dataset train_set = apply_label_drop(data, plan, idx);
        if (cfg.mode == TrainingMode::supervised) {
          std::vector<std::size_t> kept;
          for (std::size_t i = 0; i < train_set.rows; ++i)
            if (train_set.labels[i] != kUnlabeled) kept.push_back(i);
          train_set = train_set.subset(kept);
        }
        const std::string cfg_text = config_to_json(cfg).dump(2) + "\n";
        write_file(dir / "config.json", cfg_text);
        write_manifest(dir, {{"command", "gridsearch-run"},
                             {"config_hash", git_blob_sha1(cfg_text)},
                             {"seed", cfg.seed},
                             {"fold", f},
                             {"overrides", cells[c]}});
        const TrainResult tr = train(train_set, cfg);
        const FoldResult fr{evaluate(tr.checkpoint, dev).error_rate, evaluate(tr.checkpoint, test).error_rate};
        save_checkpoint(tr.checkpoint, dir / "checkpoint.json");
        write_file(done, json{{"overrides", overrides},
                              {"fold", f},
                              {"dev_error", fr.dev_error},
                              {"test_error", fr.test_error}}
                             .dump(2) + "\n");
        results[t] = fr;
        std::lock_guard lock(log_mu);
        std::cout << name << " " << overrides << " dev " << fr.dev_error << " test " << fr.test_error << '\n';
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(cmd.jobs, tasks));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<GridCell> table;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    GridCell g;
    g.index = c;
    g.overrides = cells[c].dump();
    double dev = 0.0;
    double mean = 0.0;
    for (std::size_t f = 0; f < cmd.folds; ++f) {
      dev += results[c * cmd.folds + f].dev_error;
      mean += results[c * cmd.folds + f].test_error;
    }
    g.dev_error = dev / static_cast<double>(cmd.folds);
    g.test_mean = mean / static_cast<double>(cmd.folds);
    double ss = 0.0;
    for (std::size_t f = 0; f < cmd.folds; ++f) {
      const double e = results[c * cmd.folds + f].test_error - g.test_mean;
      ss += e * e;
    }
    g.test_std = cmd.folds > 1 ? std::sqrt(ss / static_cast<double>(cmd.folds - 1)) : 0.0;
    table.push_back(g);
  }
  std::stable_sort(table.begin(), table.end(),
                   [](const GridCell& a, const GridCell& b) { return a.dev_error < b.dev_error; });
  std::ostringstream csv;
  csv << "rank,cell,dev_error,test_mean,test_std,overrides\n";
  for (std::size_t r = 0; r < table.size(); ++r) {
    std::string quoted = table[r].overrides;
    std::string escaped;
    for (char ch : quoted) escaped += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    csv << r + 1 << ',' << table[r].index << ',' << fmt17(table[r].dev_error) << ',' << fmt17(table[r].test_mean)
        << ',' << fmt17(table[r].test_std) << ",\"" << escaped << "\"\n";
  }
  write_file(cmd.out / "results.csv", csv.str());
  return table;
}

namespace {

int guarded(const std::function<void()>& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const NumericFault& e) {
    std::cerr << "tvae: numeric fault: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "tvae: error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Variational autoencoder with a Student-t mixture latent prior"};
  app.require_subcommand(1);
  std::function<void()> action;

  auto* pw = app.add_subcommand("pinwheel", "Generate the pinwheel dataset as CSV");
  PinwheelOptions pw_opts;
  std::uint64_t pw_seed = 0;
  fs::path pw_out;
  pw->add_option("--arms", pw_opts.arms, "Number of arms")->check(CLI::Range(2, 1000000));
  pw->add_option("--points", pw_opts.points_per_arm, "Points per arm");
  pw->add_option("--radial-std", pw_opts.radial_std, "Radial noise");
  pw->add_option("--tangential-std", pw_opts.tangential_std, "Tangential noise");
  pw->add_option("--rate", pw_opts.rate, "Warp rate");
  pw->add_option("--seed", pw_seed, "Random seed")->required();
  pw->add_option("--out", pw_out, "Output CSV")->required();
  pw->callback([&] {
    action = [&] {
      Rng rng(pw_seed);
      save_csv(gen_pinwheel(rng, pw_opts), pw_out);
    };
  });

  auto* sg = app.add_subcommand("surrogate", "Generate the heavy-tailed surrogate attribution dataset as CSV");
  SurrogateOptions sg_opts;
  std::uint64_t sg_seed = 0;
  fs::path sg_out;
  std::optional<double> sg_nu;
  sg->add_option("--classes", sg_opts.classes, "Number of classes");
  sg->add_option("--dim", sg_opts.observed_dim, "Observation dimension");
  sg->add_option("--latent-dim", sg_opts.latent_dim, "Generating latent dimension");
  sg->add_option("--min-per-class", sg_opts.min_per_class, "Smallest class size");
  sg->add_option("--max-per-class", sg_opts.max_per_class, "Largest class size");
  sg->add_option("--nu-min", sg_opts.nu_min, "Smallest class dof");
  sg->add_option("--nu-max", sg_opts.nu_max, "Largest class dof");
  sg->add_option("--nu", sg_nu, "Fix every class dof");
  sg->add_option("--separation", sg_opts.separation, "Spread of class means");
  sg->add_option("--nonlinearity", sg_opts.nonlinearity, "Weight of the tanh map");
  sg->add_option("--noise", sg_opts.noise_std, "Observation noise");
  sg->add_option("--seed", sg_seed, "Random seed")->required();
  sg->add_option("--out", sg_out, "Output CSV")->required();
  sg->callback([&] {
    action = [&] {
      if (sg_nu) sg_opts.nu_min = sg_opts.nu_max = *sg_nu;
      Rng rng(sg_seed);
      save_csv(gen_surrogate_attribution(rng, sg_opts), sg_out);
    };
  });

  auto* tr = app.add_subcommand("train", "Train a model");
  TrainCommand tc;
  std::string tr_baseline;
  std::string tr_out;
  std::size_t tr_epochs = 0;
  tr->add_option("--config", tc.config, "JSON config")->required();
  tr->add_option("--data", tc.data, "Training CSV")->required();
  tr->add_option("--seed", tc.seed, "Random seed (overrides the config)")->required();
  tr->add_option("--out", tr_out, "Run directory (default: $TVAE_OUTPUT_ROOT/train-<hash>)");
  tr->add_option("--baseline", tr_baseline, "student or gaussian (dof frozen at 1e6)");
  tr->add_option("--epochs", tr_epochs, "Override the epoch count");
  tr->add_option("--plot-samples", tc.plot_samples, "Rows of samples.csv");
  tr->callback([&] {
    action = [&] {
      if (!tr_out.empty()) tc.out = tr_out;
      if (!tr_baseline.empty()) tc.baseline = parse_baseline(tr_baseline);
      if (tr->count("--epochs")) tc.epochs = tr_epochs;
      cmd_train(tc);
    };
  });

  auto* ev = app.add_subcommand("eval", "Error rate and confusion of a checkpoint on labelled data");
  fs::path ev_ckpt;
  fs::path ev_data;
  std::string ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint.json")->required();
  ev->add_option("--data", ev_data, "Labelled CSV")->required();
  ev->add_option("--out", ev_out, "Optional JSON report");
  ev->callback([&] {
    action = [&] {
      const Checkpoint ckpt = load_checkpoint(ev_ckpt);
      const Dataset data = load_csv(ev_data);
      const EvalResult r = evaluate(ckpt, data);
      std::cout << "error_rate " << fmt17(r.error_rate) << '\n' << "confusion (rows: predicted, cols: label)\n";
      for (const auto& row : r.confusion) {
        for (std::size_t j = 0; j < row.size(); ++j) std::cout << (j ? " " : "") << row[j];
        std::cout << '\n';
      }
      if (!ev_out.empty()) {
        write_file(ev_out, json{{"error_rate", r.error_rate}, {"confusion", r.confusion}, {"matched", r.matched}}
                               .dump(2) + "\n");
      }
    };
  });

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full loss gradient");
  GradcheckOptions gc_opts;
  std::string gc_corrupt;
  std::string gc_mode = "unsupervised";
  gc->add_option("--L", gc_opts.observed_dim, "Observation dimension");
  gc->add_option("--H", gc_opts.hidden, "Hidden width");
  gc->add_option("--D", gc_opts.latent_dim, "Latent dimension");
  gc->add_option("--K", gc_opts.components, "Components");
  gc->add_option("--N", gc_opts.rows, "Rows");
  gc->add_option("--T", gc_opts.samples, "Samples per row");
  gc->add_option("--mode", gc_mode, "unsupervised, supervised or semi_supervised");
  gc->add_option("--seed", gc_opts.seed, "Random seed")->required();
  gc->add_option("--corrupt", gc_corrupt, "Test hook: perturb the analytic gradient of one group");
  bool gc_failed = false;
  gc->callback([&] {
    action = [&] {
      gc_opts.mode = parse_training_mode(gc_mode);
      if (!gc_corrupt.empty()) gc_opts.corrupt_group = gc_corrupt;
      const GradcheckResult r = run_gradcheck(gc_opts);
      for (const auto& g : kGradGroups) {
        const double e = r.max_rel_error.at(g);
        std::cout << g << " max_rel_error " << e << (e < 1e-4 ? " ok" : " FAIL") << '\n';
      }
      gc_failed = r.worst() >= 1e-4;
      std::cout << (gc_failed ? "gradcheck FAILED" : "gradcheck passed") << " (" << r.entries << " entries)\n";
    };
  });

  auto* gs = app.add_subcommand("gridsearch", "Cross-validated grid search");
  GridCommand gs_cmd;
  gs->add_option("--config", gs_cmd.template_config, "Template JSON config")->required();
  gs->add_option("--grid", gs_cmd.grid, "JSON object: key -> list of values")->required();
  gs->add_option("--data", gs_cmd.data, "Labelled CSV")->required();
  gs->add_option("--out", gs_cmd.out, "Output directory")->required();
  gs->add_option("--folds", gs_cmd.folds, "Cross-validation folds");
  gs->add_option("--label-fraction", gs_cmd.label_fraction, "Share of training labels kept");
  gs->add_option("--jobs", gs_cmd.jobs, "Concurrent runs");
  gs->add_option("--seed", gs_cmd.seed, "Split seed")->required();
  gs->callback([&] {
    action = [&] {
      const auto table = cmd_gridsearch(gs_cmd);
      std::cout << "rank dev_error test_error overrides\n";
      for (std::size_t r = 0; r < table.size(); ++r) {
        std::cout << r + 1 << ' ' << table[r].dev_error << ' ' << table[r].test_mean << " +- " << table[r].test_std
                  << ' ' << table[r].overrides << '\n';
      }
      std::cout << "best test error " << table.front().test_mean << " +- " << table.front().test_std << '\n';
    };
  });

  auto* sm = app.add_subcommand("sample", "Draw generative samples from a checkpoint");
  SampleCommand sc;
  sm->add_option("--checkpoint", sc.checkpoint, "checkpoint.json")->required();
  sm->add_option("--count", sc.count, "Number of samples")->required();
  sm->add_option("--seed", sc.seed, "Random seed")->required();
  sm->add_option("--out", sc.out, "Output CSV")->required();
  sm->callback([&] { action = [&] { cmd_sample(sc); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }
  const int code = guarded(action);
  if (code == kExitOk && gc_failed) return kExitInvalid;
  return code;
}

}  // namespace tvae
