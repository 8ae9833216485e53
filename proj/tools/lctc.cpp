// lctc: run lifelong CTC experiments and merge their reports.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lctc/config.hpp"
#include "lctc/errors.hpp"
#include "lctc/experiment.hpp"
#include "lctc/io.hpp"

namespace fs = std::filesystem;
using namespace lctc;

namespace {

// Command-line overrides; unset options leave the config value alone.
struct Overrides {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::optional<std::string> method, policy, decode, optimizer;
  std::optional<double> memory_fraction, lr, lambda, kd_weight, kd_temperature, lm_weight;
  std::optional<std::size_t> epochs, batch_size, eval_every, beam_width;

  void attach(CLI::App* app, bool with_method) {
    app->add_option("-c,--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "root seed")->required();
    app->add_option("--out-dir", out_dir, "output directory")->required();
    if (with_method) {
      app->add_option("--method", method, "finetune|ewc|online_ewc|si|kd|gem");
      app->add_option("--policy", policy, "gem memory selection: random|min_perplexity|median_length");
      app->add_option("--memory-fraction", memory_fraction, "memory budget / mean task frames");
    }
    app->add_option("--epochs", epochs);
    app->add_option("--batch-size", batch_size);
    app->add_option("--eval-every", eval_every, "batches between learning-curve points");
    app->add_option("--optimizer", optimizer, "sgd|sgd_momentum|adam");
    app->add_option("--lr", lr);
    app->add_option("--lambda", lambda, "EWC/SI penalty scale");
    app->add_option("--kd-weight", kd_weight);
    app->add_option("--kd-temperature", kd_temperature);
    app->add_option("--decode", decode, "greedy|beam_lm");
    app->add_option("--beam-width", beam_width);
    app->add_option("--lm-weight", lm_weight);
  }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    c.seed = seed;
    if (method) c.method = parse_method(*method);
    if (policy) c.policy = parse_selection_policy(*policy);
    if (memory_fraction) c.memory_fraction = *memory_fraction;
    if (epochs) c.train.epochs = *epochs;
    if (batch_size) c.train.batch_size = *batch_size;
    if (eval_every) c.train.eval_every = *eval_every;
    if (optimizer) c.train.optimizer.method = parse_optimizer_method(*optimizer);
    if (lr) c.train.optimizer.lr = *lr;
    if (lambda) c.train.regularizer.lambda = *lambda;
    if (kd_weight) c.train.regularizer.kd_weight = *kd_weight;
    if (kd_temperature) c.train.regularizer.kd_temperature = *kd_temperature;
    if (decode) c.train.decode = parse_decode_mode(*decode);
    if (beam_width) c.train.beam_width = *beam_width;
    if (lm_weight) c.train.lm_weight = *lm_weight;
    c.validate();
    return c;
  }
};

void save_config(const fs::path& dir, const RunConfig& c) {
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << dump_run_config(c);
}

void print_summary(const std::string& label, const RunReport& r) {
  std::printf("%-28s averaged_wer=%.4f", label.c_str(), r.averaged_wer);
  for (std::size_t t = 0; t < r.task_ids.size(); ++t)
    std::printf("  task%d=%.4f", r.task_ids[t], r.final_matrix.back()[t]);
  std::printf("\n");
}

int cmd_run(const Overrides& o, bool save_checkpoint_file) {
  const RunConfig c = o.resolve();
  const fs::path dir = o.out_dir;
  save_config(dir, c);
  RunReport r = run_sequential(c);
  write_report(dir, r);
  if (save_checkpoint_file) {
    ModelConfig mc = c.model;
    mc.seed = r.seed;
    save_checkpoint(dir / "model.ckpt", {mc, r.final_parameters});
  }
  print_summary(r.method + (r.policy == "none" ? "" : "+" + r.policy), r);
  return 0;
}

int cmd_baseline(const Overrides& o) {
  RunConfig c = o.resolve();
  c.method = Method::finetune;
  c.policy.reset();
  const fs::path dir = o.out_dir;
  save_config(dir, c);
  RunReport ft = run_sequential(c);
  RunReport mt = run_multitask(c);
  mt.relative_reduction_vs_baseline = relative_wer_reduction(ft, mt);
  ft.relative_reduction_vs_baseline = 0.0;
  write_report(dir / "finetune", ft);
  write_report(dir / "multitask", mt);
  print_summary("finetune", ft);
  print_summary("multitask", mt);
  return 0;
}

int cmd_sweep(const Overrides& o, const std::vector<double>& budgets) {
  RunConfig c = o.resolve();
  c.method = Method::gem;
  c.policy.reset();
  const fs::path dir = o.out_dir;
  save_config(dir, c);
  RunConfig base = c;
  base.method = Method::finetune;
  RunReport ft = run_sequential(base);
  ft.relative_reduction_vs_baseline = 0.0;
  write_report(dir / "finetune", ft);
  print_summary("finetune", ft);
  std::ofstream table(dir / "sweep.csv");
  table << "policy,budget,capacity_frames,averaged_wer,relative_reduction";
  for (int t : ft.task_ids) table << ",task" << t;
  table << '\n';
  for (auto& p : run_memory_sweep(c, budgets)) {
    p.report.relative_reduction_vs_baseline = relative_wer_reduction(ft, p.report);
    write_report(dir / (to_string(p.policy) + "_" + format_real(p.budget)), p.report);
    table << to_string(p.policy) << ',' << format_real(p.budget) << ',' << p.report.capacity_frames << ','
          << format_real(p.report.averaged_wer) << ',' << format_real(p.report.relative_reduction_vs_baseline);
    for (double w : p.report.final_matrix.back()) table << ',' << format_real(w);
    table << '\n';
    print_summary("gem+" + to_string(p.policy) + "@" + format_real(p.budget), p.report);
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out, bool normalize) {
  std::vector<CsvTable> tables;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    tables.push_back(read_csv(in));
  }
  CsvTable merged = merge_tables(tables);
  if (normalize) merged = normalize_stage_width(merged);
  if (out.empty() || out == "-") {
    write_csv(std::cout, merged);
  } else {
    std::ofstream f(out);
    write_csv(f, merged);
  }
  return 0;
}

int cmd_data(std::uint64_t seed, const std::string& config_path, const std::string& out_dir) {
  RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  c.seed = seed;
  fs::create_directories(out_dir);
  for (const auto& spec : c.resolved_domains()) {
    const DomainData d = generate_domain(spec);
    save_dataset(fs::path(out_dir) / ("task" + std::to_string(spec.task_id) + "_train.txt"), d.train);
    save_dataset(fs::path(out_dir) / ("task" + std::to_string(spec.task_id) + "_eval.txt"), d.eval);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifelong CTC sequence recognition experiments"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, base_o;
  bool checkpoint = false;
  auto* run = app.add_subcommand("run", "one sequential run");
  run_o.attach(run, true);
  run->add_flag("--checkpoint", checkpoint, "also write model.ckpt");

  std::vector<double> budgets{0.0, 0.03, 0.1, 0.3};
  auto* sweep = app.add_subcommand("sweep", "GEM memory-size sweep, random vs median_length");
  sweep_o.attach(sweep, false);
  sweep->add_option("--budgets", budgets, "memory fractions")->delimiter(',');

  auto* baseline = app.add_subcommand("baseline", "finetune and multitask reference runs");
  base_o.attach(baseline, false);

  std::vector<std::string> inputs;
  std::string report_out;
  bool normalize = false;
  auto* report = app.add_subcommand("report", "merge CSV reports");
  report->add_option("inputs", inputs, "CSV files with identical headers")->required()->check(CLI::ExistingFile);
  report->add_option("-o,--output", report_out, "output file (default stdout)");
  report->add_flag("--normalize-stages", normalize, "add a per-stage normalized progress column to curves");

  std::uint64_t data_seed = 0;
  std::string data_config, data_out;
  auto* data = app.add_subcommand("data", "write the generated datasets in the text format");
  data->add_option("--seed", data_seed)->required();
  data->add_option("-c,--config", data_config)->check(CLI::ExistingFile);
  data->add_option("--out-dir", data_out)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_o, checkpoint);
    if (*sweep) return cmd_sweep(sweep_o, budgets);
    if (*baseline) return cmd_baseline(base_o);
    if (*report) return cmd_report(inputs, report_out, normalize);
    if (*data) return cmd_data(data_seed, data_config, data_out);
  } catch (const lctc::Error& e) {
    std::cerr << "lctc: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
