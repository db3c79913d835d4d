// gdc: command-line front end.
//
//   gdc evaluate      run N-way K-shot episodes and write a JSON result
//   gdc tune          hyperparameter search with median pruning and a resumable trial log
//   gdc gen-synth     write a synthetic Gaussian world (features, manifest, ground truth)
//   gdc stats         compute base class statistics and write the stats cache
//   gdc dump-samples  write the augmented support set of one task
//
// Exit codes: 0 success, 1 invalid input or arguments, 2 pipeline failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gdc/gdc.hpp"

namespace {

namespace fs = std::filesystem;

struct DataArgs {
  std::string features;
  std::string manifest;
  std::string format = "binary";
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--features", a.features, "Feature file")->required();
  cmd->add_option("--manifest", a.manifest, "Split manifest (JSON)")->required();
  cmd->add_option("--format", a.format, "Feature file format: binary or csv");
}

gdc::FeatureDataset load(const DataArgs& a) {
  for (const auto& p : {a.features, a.manifest}) {
    if (!fs::exists(p)) throw gdc::ValidationError("no such file: " + p);
  }
  return gdc::load_features(a.features, gdc::parse_format(a.format), fs::path(a.manifest));
}

struct ConfigArgs {
  double beta = 1.0;
  double m = 1.0;
  std::size_t k = 2;
  double alpha1 = 0.0;
  std::optional<double> alpha2;
  std::optional<double> alpha2_mult;
  std::size_t n = 0;
  std::string metric = "squared_euclidean";
  double delta = 1.0;
  std::string cov_mode = "weighted_average";
};

void add_config_options(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("--beta", a.beta, "Power transform exponent");
  cmd->add_option("--m", a.m, "Weight decay exponent");
  cmd->add_option("--k", a.k, "Number of nearest base classes");
  cmd->add_option("--alpha1", a.alpha1, "Diagonal shrinkage strength");
  auto* abs = cmd->add_option("--alpha2", a.alpha2, "Off-diagonal shrinkage strength");
  auto* mult = cmd->add_option("--alpha2-mult", a.alpha2_mult, "alpha2 as a multiple of alpha1");
  abs->excludes(mult);
  cmd->add_option("--n", a.n, "Samples drawn per support point");
  cmd->add_option("--metric", a.metric, "squared_euclidean, mahalanobis_log or squared_delta");
  cmd->add_option("--delta", a.delta, "delta for squared_delta");
  cmd->add_option("--cov-mode", a.cov_mode, "weighted_average or independent_sum");
}

gdc::GdcConfig make_config(const ConfigArgs& a, std::uint64_t seed) {
  gdc::GdcConfig c;
  c.beta = a.beta;
  c.m = a.m;
  c.k = a.k;
  c.alpha1 = a.alpha1;
  c.alpha2 = a.alpha2 ? *a.alpha2 : a.alpha2_mult ? *a.alpha2_mult * a.alpha1 : 0.0;
  c.n_samples = a.n;
  c.metric.kind = gdc::parse_metric(a.metric);
  c.metric.delta = a.delta;
  c.cov_mode = gdc::parse_cov_mode(a.cov_mode);
  c.seed = seed;
  return c;
}

struct EpisodeArgs {
  std::size_t way = 5;
  std::size_t shot = 1;
  std::size_t queries = 15;
  std::size_t epochs = 200;
  std::size_t batch_size = 1024;
  double learning_rate = 0.08;
  std::size_t workers = 0;
};

void add_episode_options(CLI::App* cmd, EpisodeArgs& a) {
  cmd->add_option("--way", a.way, "Classes per task");
  cmd->add_option("--shot", a.shot, "Support points per class");
  cmd->add_option("--queries", a.queries, "Query points per class");
  cmd->add_option("--epochs", a.epochs, "Classifier epochs");
  cmd->add_option("--batch-size", a.batch_size, "Classifier batch size");
  cmd->add_option("--lr", a.learning_rate, "Classifier learning rate");
  cmd->add_option("--workers", a.workers, "Worker threads (0 = all cores; GDC_WORKERS overrides)");
}

std::size_t resolve_workers(std::size_t requested) {
  if (const char* env = std::getenv("GDC_WORKERS"); env != nullptr && *env != '\0') {
    try {
      return static_cast<std::size_t>(std::stoul(env));
    } catch (const std::exception&) {
      throw gdc::ValidationError(std::string("GDC_WORKERS is not a number: ") + env);
    }
  }
  return requested;
}

gdc::TrainRecipe make_recipe(const EpisodeArgs& a) {
  gdc::TrainRecipe r;
  r.epochs = a.epochs;
  r.batch_size = a.batch_size;
  r.learning_rate = a.learning_rate;
  return r;
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw gdc::ValidationError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw gdc::ValidationError("write to '" + path + "' failed");
}

std::string percent(double mean, double ci) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << 100.0 * mean << " +- " << 100.0 * ci;
  return s.str();
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw gdc::ValidationError("bad number '" + item + "' in list '" + text + "'");
    }
  }
  if (out.empty()) throw gdc::ValidationError("empty value list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution calibration for few-shot classification over feature embeddings"};
  app.require_subcommand(1);

  // evaluate
  DataArgs eval_data;
  ConfigArgs eval_cfg;
  EpisodeArgs eval_ep;
  std::string eval_split = "novel";
  std::size_t eval_tasks = 1000;
  std::uint64_t eval_seed = 0;
  std::string eval_output = "result.json";
  bool eval_per_task = false;
  bool eval_shuffle_labels = false;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate N-way K-shot episodes");
  add_data_options(evaluate, eval_data);
  add_config_options(evaluate, eval_cfg);
  add_episode_options(evaluate, eval_ep);
  evaluate->add_option("--split", eval_split, "base, validation or novel");
  evaluate->add_option("--tasks", eval_tasks, "Number of tasks");
  evaluate->add_option("--seed", eval_seed, "Master seed");
  evaluate->add_option("--output", eval_output, "Result JSON path");
  evaluate->add_flag("--per-task", eval_per_task, "Include per-task accuracies");
  evaluate->add_flag("--shuffle-query-labels", eval_shuffle_labels,
                     "Permute query labels within each task (chance-level control)");

  // tune
  DataArgs tune_data;
  EpisodeArgs tune_ep;
  std::size_t tune_trials = 100;
  std::size_t tune_tasks = 200;
  std::size_t tune_checkpoint = 100;
  std::string tune_preset = "wide";
  std::uint64_t tune_seed = 0;
  std::string tune_log = "trials.jsonl";
  std::size_t tune_top = 3;
  std::size_t tune_novel_tasks = 5000;
  std::string tune_output = "tune.json";
  std::string tune_cov_mode = "weighted_average";
  std::string beta_values, m_values, k_values, n_values, alpha1_values, alpha2_values;
  bool alpha2_absolute = false;
  auto* tune = app.add_subcommand("tune", "Hyperparameter search on the validation split");
  add_data_options(tune, tune_data);
  add_episode_options(tune, tune_ep);
  tune->add_option("--trials", tune_trials, "Total trials (including logged ones)");
  tune->add_option("--tasks-per-trial", tune_tasks, "Validation tasks per trial");
  tune->add_option("--checkpoint", tune_checkpoint, "Tasks before the pruning decision");
  tune->add_option("--preset", tune_preset, "Search space preset: wide or narrow");
  tune->add_option("--seed", tune_seed, "Master seed");
  tune->add_option("--log", tune_log, "Trial log (JSON lines); resumed if present");
  tune->add_option("--top", tune_top, "Trials confirmed on the novel split");
  tune->add_option("--novel-tasks", tune_novel_tasks, "Novel tasks per confirmed trial");
  tune->add_option("--output", tune_output, "Summary JSON path");
  tune->add_option("--cov-mode", tune_cov_mode, "weighted_average or independent_sum");
  tune->add_option("--beta-values", beta_values, "Comma list overriding the beta axis");
  tune->add_option("--m-values", m_values, "Comma list overriding the m axis");
  tune->add_option("--k-values", k_values, "Comma list overriding the k axis");
  tune->add_option("--n-values", n_values, "Comma list overriding the n axis");
  tune->add_option("--alpha1-values", alpha1_values, "Comma list overriding the alpha1 axis");
  tune->add_option("--alpha2-values", alpha2_values, "Comma list overriding the alpha2 axis");
  tune->add_flag("--alpha2-absolute", alpha2_absolute, "alpha2 axis holds absolute values");

  // gen-synth
  gdc::SynthSpec synth;
  std::string synth_family = "spherical";
  std::string synth_features = "synth.gdcf";
  std::string synth_manifest = "synth_manifest.json";
  std::string synth_truth = "synth_truth.json";
  std::string synth_format = "binary";
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic Gaussian world");
  gen->add_option("--dim", synth.dim, "Feature dimension");
  gen->add_option("--base", synth.num_base, "Base classes");
  gen->add_option("--validation", synth.num_validation, "Validation classes");
  gen->add_option("--novel", synth.num_novel, "Novel classes");
  gen->add_option("--points", synth.points_per_class, "Points per class");
  gen->add_option("--offset", synth.novel_offset_scale, "Held-out offset from parent, noise units");
  gen->add_option("--family", synth_family, "spherical, diagonal or random_spd");
  gen->add_option("--noise-scale", synth.noise_scale, "Per-coordinate class noise");
  gen->add_option("--mean-spread", synth.mean_spread, "Per-coordinate spread of base means");
  gen->add_option("--seed", synth.seed, "Seed");
  gen->add_option("--features", synth_features, "Output feature file");
  gen->add_option("--format", synth_format, "binary or csv");
  gen->add_option("--manifest", synth_manifest, "Output manifest");
  gen->add_option("--truth", synth_truth, "Output ground-truth JSON");

  // stats
  DataArgs stats_data;
  double stats_beta = 1.0;
  std::string stats_output = "stats.gdcs";
  auto* stats = app.add_subcommand("stats", "Compute base class statistics");
  add_data_options(stats, stats_data);
  stats->add_option("--beta", stats_beta, "Power transform exponent");
  stats->add_option("--output", stats_output, "Stats cache path");

  // dump-samples
  DataArgs dump_data;
  ConfigArgs dump_cfg;
  EpisodeArgs dump_ep;
  std::string dump_split = "novel";
  std::uint64_t dump_seed = 0;
  std::size_t dump_task = 0;
  std::string dump_output = "samples.gdca";
  auto* dump = app.add_subcommand("dump-samples", "Write the augmented support set of one task");
  add_data_options(dump, dump_data);
  add_config_options(dump, dump_cfg);
  add_episode_options(dump, dump_ep);
  dump->add_option("--split", dump_split, "base, validation or novel");
  dump->add_option("--seed", dump_seed, "Master seed");
  dump->add_option("--task-index", dump_task, "Task index in the seeded sequence");
  dump->add_option("--output", dump_output, "Output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*evaluate) {
      const auto ds = load(eval_data);
      const auto config = make_config(eval_cfg, eval_seed);
      gdc::EvalOptions opts;
      opts.episode = {eval_ep.way, eval_ep.shot, eval_ep.queries, eval_shuffle_labels};
      opts.recipe = make_recipe(eval_ep);
      opts.num_tasks = eval_tasks;
      opts.base_seed = eval_seed;
      opts.workers = resolve_workers(eval_ep.workers);
      const auto result = gdc::evaluate(ds, gdc::parse_split(eval_split), config, opts);
      write_json(gdc::result_to_json(result, config, eval_per_task), eval_output);
      std::cout << eval_ep.way << "way-" << eval_ep.shot << "shot " << eval_split << " over "
                << eval_tasks << " tasks: " << percent(result.mean, result.ci95) << '\n';
    } else if (*tune) {
      const auto ds = load(tune_data);
      gdc::TuneOptions opts;
      opts.space = gdc::SearchSpace::preset(gdc::parse_preset(tune_preset),
                                            ds.manifest().base.size());
      opts.space.cov_mode = gdc::parse_cov_mode(tune_cov_mode);
      if (!beta_values.empty()) opts.space.beta = gdc::Axis::set(parse_list(beta_values));
      if (!m_values.empty()) opts.space.m = gdc::Axis::set(parse_list(m_values));
      if (!k_values.empty()) opts.space.k = gdc::Axis::set(parse_list(k_values));
      if (!n_values.empty()) opts.space.n_samples = gdc::Axis::set(parse_list(n_values));
      if (!alpha1_values.empty()) opts.space.alpha1 = gdc::Axis::set(parse_list(alpha1_values));
      if (!alpha2_values.empty()) opts.space.alpha2 = gdc::Axis::set(parse_list(alpha2_values));
      opts.space.alpha2_is_multiplier = !alpha2_absolute;
      opts.trials = tune_trials;
      opts.tasks_per_trial = tune_tasks;
      opts.checkpoint = tune_checkpoint;
      opts.seed = tune_seed;
      opts.episode = {tune_ep.way, tune_ep.shot, tune_ep.queries, false};
      opts.recipe = make_recipe(tune_ep);
      opts.workers = resolve_workers(tune_ep.workers);
      gdc::BaseCache cache(ds);
      const auto trials = gdc::run_search(ds, opts, fs::path(tune_log), &cache);
      std::size_t pruned = 0;
      for (const auto& t : trials) pruned += t.status == gdc::TrialStatus::Pruned;
      std::cout << trials.size() << " trials, " << pruned << " pruned\n";
      const auto confirmed = gdc::confirm_top(ds, trials, tune_top, tune_novel_tasks, opts, &cache);
      nlohmann::json out = {{"trials", trials.size()}, {"pruned", pruned}};
      out["confirmed"] = nlohmann::json::array();
      for (const auto& c : confirmed) {
        out["confirmed"].push_back({{"trial", c.trial_index},
                                    {"validation_mean", c.validation_mean},
                                    {"novel", gdc::result_to_json(c.novel, c.config, false)}});
        std::cout << "trial " << c.trial_index << ": novel "
                  << percent(c.novel.mean, c.novel.ci95) << " (validation mean "
                  << 100.0 * c.validation_mean << ")\n";
      }
      write_json(out, tune_output);
    } else if (*gen) {
      synth.covariance_family = gdc::parse_covariance_family(synth_family);
      const auto world = gdc::generate(synth);
      gdc::write_features(world.dataset, synth_features, gdc::parse_format(synth_format));
      gdc::write_manifest(world.dataset.manifest(), synth_manifest);
      nlohmann::json truth = {{"classes", gdc::truth_to_json(world.truth)}};
      nlohmann::json parents = nlohmann::json::object();
      for (const auto& [id, p] : world.parent) parents[std::to_string(id)] = p;
      truth["parents"] = parents;
      write_json(truth, synth_truth);
      std::cout << "wrote " << world.dataset.size() << " points to " << synth_features << '\n';
    } else if (*stats) {
      const auto ds = load(stats_data);
      const auto base = gdc::prepare_base(ds, stats_beta);
      gdc::write_stats_cache(base.stats, ds.dim(), stats_output);
      std::cout << "transform " << gdc::to_string(base.transform.kind) << " beta " << stats_beta
                << '\n';
      for (const auto& s : base.stats) {
        std::cout << "class " << s.class_id << ": count " << s.count << ", |mu| " << s.mu.norm()
                  << ", trace " << s.sigma.trace() << '\n';
      }
    } else if (*dump) {
      const auto ds = load(dump_data);
      const auto config = make_config(dump_cfg, dump_seed);
      const auto base = gdc::prepare_base(ds, config.beta);
      config.validate(base.stats.size());
      gdc::EpisodeSpec spec{dump_ep.way, dump_ep.shot, dump_ep.queries, false};
      const auto task = gdc::sample_task(ds.partition(gdc::parse_split(dump_split)), spec,
                                         gdc::task_seed_for(dump_seed, dump_task));
      const gdc::Matrix support = gdc::apply_transform_rows(task.support, base.transform);
      const auto set = gdc::augment_task(support, task.support_labels, base.stats, config,
                                         task.task_seed, resolve_workers(dump_ep.workers));
      gdc::write_augmented(set, dump_output);
      std::cout << "wrote " << set.size() << " points to " << dump_output << '\n';
    }
  } catch (const gdc::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
