#include "disvae/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "disvae/checkpoint.hpp"
#include "disvae/config.hpp"
#include "disvae/data.hpp"
#include "disvae/eval.hpp"
#include "disvae/training.hpp"

namespace disvae {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::string> mode;
  std::optional<std::string> checkpoint;
  std::optional<std::string> data;
  std::string out;
  std::size_t per_class = 1000;

  // gen-data
  double noise = 0.15;
  double angle_lo = 0.0;
  double angle_hi = std::numbers::pi;
  bool unlabeled = false;
  std::string geometry = "right-arcs";

  // train
  std::size_t checkpoint_every = 10;
  std::vector<std::size_t> snapshots;

  // traverse
  int cls = 0;
  std::size_t steps = 9;
  std::size_t dim = 0;
  std::string traversal_mode = "vary-z_s";

  // inpaint
  std::vector<double> mask;

  // plot
  std::string title;
};

TrainConfig effective_config(const Options& o) {
  TrainConfig c = o.config_path ? load_config(*o.config_path) : TrainConfig{};
  if (o.seed) c.rng_seed = *o.seed;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.mode) c.mode = parse_train_mode(*o.mode);
  c.validate();
  return c;
}

Dataset training_data(const Options& o, const TrainConfig& c) {
  if (o.data) return load_dataset(*o.data, c.num_classes);
  ToyOptions toy;
  toy.n_per_class = o.per_class;
  toy.num_classes = c.num_classes;
  return generate_toy_dataset(toy, c.rng_seed);
}

std::string epoch_tag(std::size_t epoch) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << epoch;
  return os.str();
}

Dataset generated_points(const TrainState& s, std::size_t per_class, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x67656eULL));
  if (s.config.mode == TrainMode::kBaselineCvaeGan) return generate_baseline(s.baseline, per_class, rng);
  return generate(s.params, per_class, rng);
}

void write_run_outputs(const TrainState& s, const fs::path& out, const Options& o) {
  write_file_atomic((out / "history.csv").string(), history_csv(s.history));
  const bool periodic = o.checkpoint_every > 0 && s.epoch % o.checkpoint_every == 0;
  if (periodic) save_checkpoint((out / ("epoch_" + epoch_tag(s.epoch) + ".ckpt")).string(), s);
  if (std::find(o.snapshots.begin(), o.snapshots.end(), s.epoch) != o.snapshots.end() &&
      s.config.data_dim == 2) {
    const Dataset pts = generated_points(s, 300, s.config.rng_seed);
    write_file_atomic((out / ("generated_epoch_" + epoch_tag(s.epoch) + ".svg")).string(),
                      scatter_svg(pts, "epoch " + std::to_string(s.epoch)));
  }
}

void finish_run(const TrainState& s, const fs::path& out) {
  save_checkpoint((out / "final.ckpt").string(), s);
  write_file_atomic((out / "history.csv").string(), history_csv(s.history));
  write_file_atomic((out / "config.ini").string(), format_config(s.config));
  std::cout << "trained " << s.epoch << " epochs; wrote " << (out / "final.ckpt").string() << '\n';
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Options& o) {
  ToyOptions toy;
  toy.n_per_class = o.per_class;
  toy.noise_std = o.noise;
  toy.angle_lo = o.angle_lo;
  toy.angle_hi = o.angle_hi;
  toy.geometry = parse_toy_geometry(o.geometry);
  Dataset ds = generate_toy_dataset(toy, o.seed.value_or(0));
  if (o.unlabeled) std::fill(ds.labels.begin(), ds.labels.end(), kUnlabeled);
  save_dataset(ds, o.out);
  std::cout << "wrote " << ds.size() << " rows to " << o.out << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  const fs::path out(o.out);
  TrainState s;
  Dataset data;
  if (o.checkpoint) {
    s = load_checkpoint(*o.checkpoint);
    if (o.epochs) s.config.epochs = *o.epochs;
    data = training_data(o, s.config);
  } else {
    const TrainConfig c = effective_config(o);
    if (c.mode == TrainMode::kSemisupervisedFinetune) {
      throw std::invalid_argument("use the finetune subcommand for semisupervised-finetune");
    }
    s = init_training(c);
    data = training_data(o, c);
  }
  fs::create_directories(out);
  run_epochs(s, data, 0, [&](const TrainState& st) { write_run_outputs(st, out, o); });
  finish_run(s, out);
  return 0;
}

int cmd_finetune(const Options& o) {
  if (!o.checkpoint) throw std::invalid_argument("finetune needs --checkpoint");
  if (!o.data) throw std::invalid_argument("finetune needs --data");
  const TrainState pre = load_checkpoint(*o.checkpoint);
  if (pre.config.mode == TrainMode::kBaselineCvaeGan) {
    throw std::invalid_argument("finetune needs a checkpoint of the disentangling model");
  }
  TrainConfig c = o.config_path ? load_config(*o.config_path) : pre.config;
  if (o.seed) c.rng_seed = *o.seed;
  if (o.epochs) c.epochs = *o.epochs;
  c.mode = TrainMode::kSemisupervisedFinetune;
  c.validate();
  Dataset data = load_dataset(*o.data, c.num_classes);
  std::fill(data.labels.begin(), data.labels.end(), kUnlabeled);

  TrainState s{c, pre.params, {}, {}, Rng(c.rng_seed), 0, {}};
  begin_finetune(s, c);
  const fs::path out(o.out);
  fs::create_directories(out);
  run_epochs(s, data, 0, [&](const TrainState& st) { write_run_outputs(st, out, o); });
  finish_run(s, out);
  return 0;
}

int cmd_eval(const Options& o) {
  if (!o.checkpoint) throw std::invalid_argument("eval needs --checkpoint");
  const TrainState s = load_checkpoint(*o.checkpoint);
  const std::uint64_t seed = o.seed.value_or(s.config.rng_seed);
  Dataset real = o.data ? load_dataset(*o.data, s.config.num_classes)
                        : generate_toy_dataset(ToyOptions{o.per_class, s.config.num_classes}, seed);

  OracleOptions oo;
  oo.seed = seed;
  const OracleClassifier oracle = OracleClassifier::train(real, oo);
  const Dataset gen = generated_points(s, o.per_class, seed);

  std::vector<MetricRow> rows;
  rows.push_back({"oracle_heldout_accuracy", "all", oracle.heldout_accuracy()});
  rows.push_back({"classifier_score", "all", classifier_score(gen.x, oracle)});
  double div_sum = 0.0;
  for (std::size_t c = 0; c < real.num_classes; ++c) {
    const int label = static_cast<int>(c);
    const double h = median_pairwise_distance(real.only_class(label).x);
    const double d = intra_class_diversity(gen.only_class(label).x, rbf_kernel(h));
    div_sum += d;
    rows.push_back({"diversity", std::to_string(c), d});
  }
  rows.push_back({"diversity", "all", div_sum / static_cast<double>(real.num_classes)});
  const auto nn = nearest_neighbor_report(gen, real);
  for (std::size_t c = 0; c < nn.ratio.size(); ++c) rows.push_back({"nn_ratio", std::to_string(c), nn.ratio[c]});
  if (s.config.mode != TrainMode::kBaselineCvaeGan) {
    rows.push_back({"reconstruction_loss", "all", rec_loss(real.x, reconstruct(s.params, real.x))});
    bool labeled = std::none_of(real.labels.begin(), real.labels.end(), [](int y) { return y == kUnlabeled; });
    if (labeled) {
      Rng rng(seed);
      const auto elbo = elbo_report(real.x, s.params, real.labels, rng, 8, s.config.lambda_lkd);
      rows.push_back({"elbo_estimate", "all", elbo.elbo_estimate});
      rows.push_back({"l_kl", "all", elbo.l_kl});
      rows.push_back({"l_lkd", "all", elbo.l_lkd});
    }
  }
  const std::string csv = metrics_csv(rows);
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    write_file_atomic(o.out, csv);
  }
  return 0;
}

int cmd_traverse(const Options& o) {
  if (!o.checkpoint) throw std::invalid_argument("traverse needs --checkpoint");
  const TrainState s = load_checkpoint(*o.checkpoint);
  if (s.config.mode == TrainMode::kBaselineCvaeGan) throw std::invalid_argument("traverse needs a disentangling model");
  if (o.steps < 2) throw std::invalid_argument("--steps must be >= 2");
  const TraversalMode mode = parse_traversal_mode(o.traversal_mode);
  std::vector<double> grid(o.steps);
  for (std::size_t i = 0; i < o.steps; ++i) {
    const double a = static_cast<double>(i) / static_cast<double>(o.steps - 1);
    grid[i] = mode == TraversalMode::kVaryZuDim ? -3.0 + 6.0 * a : a;
  }
  Rng rng(o.seed.value_or(s.config.rng_seed));
  const Traversal t = latent_traversal(s.params, o.cls, grid, mode, rng, o.dim);
  std::ostringstream os;
  os << std::setprecision(17) << "alpha";
  for (std::size_t j = 0; j < t.z_s.cols(); ++j) os << ",z_s" << j;
  for (std::size_t j = 0; j < t.z_u.cols(); ++j) os << ",z_u" << j;
  for (std::size_t j = 0; j < t.x.cols(); ++j) os << ",x" << j;
  os << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    os << grid[i];
    for (double v : t.z_s.row_span(i)) os << ',' << v;
    for (double v : t.z_u.row_span(i)) os << ',' << v;
    for (double v : t.x.row_span(i)) os << ',' << v;
    os << '\n';
  }
  write_file_atomic(o.out, os.str());
  return 0;
}

int cmd_inpaint(const Options& o) {
  if (!o.checkpoint || !o.data) throw std::invalid_argument("inpaint needs --checkpoint and --data");
  const TrainState s = load_checkpoint(*o.checkpoint);
  if (s.config.mode == TrainMode::kBaselineCvaeGan) throw std::invalid_argument("inpaint needs a disentangling model");
  const Dataset ds = load_dataset(*o.data, s.config.num_classes);
  if (o.mask.size() != ds.dim()) {
    throw std::invalid_argument("--mask needs " + std::to_string(ds.dim()) + " entries");
  }
  Tensor mask(ds.x.shape());
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.dim(); ++j) mask.at(i, j) = o.mask[j];
  Dataset out{inpaint(s.params, ds.x, mask), ds.labels, ds.num_classes};
  save_dataset(out, o.out);
  return 0;
}

int cmd_plot(const Options& o) {
  Dataset pts;
  std::string title = o.title;
  if (o.checkpoint) {
    const TrainState s = load_checkpoint(*o.checkpoint);
    pts = generated_points(s, o.per_class, o.seed.value_or(s.config.rng_seed));
    if (title.empty()) title = "generated, epoch " + std::to_string(s.epoch);
  } else if (o.data) {
    pts = load_dataset(*o.data);
    if (title.empty()) title = fs::path(*o.data).filename().string();
  } else {
    throw std::invalid_argument("plot needs --data or --checkpoint");
  }
  write_file_atomic(o.out, scatter_svg(pts, title));
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"Disentangled VAE with a Gaussian-mixture label code: training, evaluation and latent tools"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "INI config file");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--epochs", o.epochs, "number of epochs");
  };

  auto* gen = app.add_subcommand("gen-data", "write the toy dataset as CSV");
  gen->add_option("--per-class", o.per_class, "points per class")->check(CLI::PositiveNumber);
  gen->add_option("--seed", o.seed, "random seed");
  gen->add_option("--noise", o.noise, "noise standard deviation")->check(CLI::NonNegativeNumber);
  gen->add_option("--angle-lo", o.angle_lo, "lower end of the arc angle range");
  gen->add_option("--angle-hi", o.angle_hi, "upper end of the arc angle range");
  gen->add_option("--geometry", o.geometry, "right-arcs | moons");
  gen->add_flag("--unlabeled", o.unlabeled, "write label -1 for every row");
  gen->add_option("--out", o.out, "output CSV")->required();

  auto* train = app.add_subcommand("train", "train the model or the baseline");
  add_config(train);
  train->add_option("--mode", o.mode, "full | baseline-cvaegan");
  train->add_option("--data", o.data, "labeled CSV (default: generated toy data)");
  train->add_option("--per-class", o.per_class, "toy points per class when --data is absent");
  train->add_option("--checkpoint", o.checkpoint, "resume from this checkpoint");
  train->add_option("--checkpoint-every", o.checkpoint_every, "periodic checkpoint interval in epochs (0: off)");
  train->add_option("--snapshots", o.snapshots, "epochs at which to plot generated points")->delimiter(',');
  train->add_option("--out", o.out, "output directory")->required();

  auto* fine = app.add_subcommand("finetune", "semi-supervised finetuning on unlabeled data");
  add_config(fine);
  fine->add_option("--checkpoint", o.checkpoint, "pretrained checkpoint")->required();
  fine->add_option("--data", o.data, "CSV of unlabeled points")->required();
  fine->add_option("--checkpoint-every", o.checkpoint_every, "periodic checkpoint interval in epochs (0: off)");
  fine->add_option("--snapshots", o.snapshots, "epochs at which to plot generated points")->delimiter(',');
  fine->add_option("--out", o.out, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "classifier score, diversity and coverage metrics");
  ev->add_option("--checkpoint", o.checkpoint, "trained checkpoint")->required();
  ev->add_option("--data", o.data, "real labeled CSV (default: generated toy data)");
  ev->add_option("--per-class", o.per_class, "generated points per class")->check(CLI::PositiveNumber);
  ev->add_option("--seed", o.seed, "random seed");
  ev->add_option("--out", o.out, "metrics CSV (default: stdout)");

  auto* trav = app.add_subcommand("traverse", "decode a latent traversal");
  trav->add_option("--checkpoint", o.checkpoint, "trained checkpoint")->required();
  trav->add_option("--class", o.cls, "class index");
  trav->add_option("--mode", o.traversal_mode, "vary-z_s | vary-z_u | vary-z_u-dim");
  trav->add_option("--steps", o.steps, "grid size");
  trav->add_option("--dim", o.dim, "z_u coordinate for vary-z_u-dim");
  trav->add_option("--seed", o.seed, "random seed");
  trav->add_option("--out", o.out, "output CSV")->required();

  auto* inp = app.add_subcommand("inpaint", "fill masked coordinates from the model");
  inp->add_option("--checkpoint", o.checkpoint, "trained checkpoint")->required();
  inp->add_option("--data", o.data, "input CSV")->required();
  inp->add_option("--mask", o.mask, "per-coordinate 0/1 mask, e.g. 1,0")->delimiter(',')->required();
  inp->add_option("--out", o.out, "output CSV")->required();

  auto* plot = app.add_subcommand("plot", "SVG scatter of a dataset or of generated points");
  plot->add_option("--data", o.data, "CSV to plot");
  plot->add_option("--checkpoint", o.checkpoint, "plot points generated by this checkpoint");
  plot->add_option("--per-class", o.per_class, "generated points per class")->check(CLI::PositiveNumber);
  plot->add_option("--seed", o.seed, "random seed");
  plot->add_option("--title", o.title, "plot title");
  plot->add_option("--out", o.out, "output SVG")->required();

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help("", CLI::AppFormatMode::All);
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(o);
    if (*train) return cmd_train(o);
    if (*fine) return cmd_finetune(o);
    if (*ev) return cmd_eval(o);
    if (*trav) return cmd_traverse(o);
    if (*inp) return cmd_inpaint(o);
    if (*plot) return cmd_plot(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int cli_main(int argc, const char* const* argv) { return cli_main(std::vector<std::string>(argv, argv + argc)); }

}  // namespace disvae
