#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cvxorder/config.hpp"
#include "cvxorder/runner.hpp"

namespace {

int run(const std::string& id, const std::string& config_path, const cvxorder::RunOptions& opts) {
  nlohmann::json cfg = config_path.empty() ? nlohmann::json::object() : cvxorder::config::load_file(config_path);
  if (!cfg.is_object()) cvxorder::fail(cvxorder::ErrorCode::config_error, config_path + ": config must be an object");
  if (!id.empty()) {
    if (cfg.contains("experiment") && cfg["experiment"] != id)
      cvxorder::fail(cvxorder::ErrorCode::config_error,
                     config_path + ": /experiment is '" + cfg["experiment"].dump() + "' but the subcommand is " + id);
    cfg["experiment"] = id;
  }
  const auto out = cvxorder::run_experiment(cfg, opts);
  std::cout << "verdict: " << out.report["verdict"].get<std::string>() << "\n";
  if (const auto& r = out.report["results"]; r.contains("expected_outcome"))
    std::cout << "expected_outcome: " << (r["expected_outcome"].get<bool>() ? "true" : "false") << "\n";
  for (const auto& f : out.files) std::cout << "wrote " << f.string() << "\n";
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cvxorder: convex-order comparisons for martingale dynamics"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed, paths;
  std::optional<unsigned> threads;
  std::string out_dir = "out";
  bool trace = false;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Random seed (overrides the config)");
  app.add_option("--paths", paths, "Monte-Carlo path count (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "Worker threads")->envname("CVXORDER_THREADS")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory for report.json and CSV tables");
  app.add_flag("--trace", trace, "Also dump recursion traces as CSV");

  std::string selected;
  auto* run_cmd = app.add_subcommand("run", "Run the experiment named by the config's \"experiment\" field");
  run_cmd->fallthrough();
  run_cmd->callback([&] { selected = ""; });
  for (const auto& id : cvxorder::experiment_ids()) {
    auto* sub = app.add_subcommand(id, "Run the " + id + " experiment");
    sub->fallthrough();
    sub->callback([&selected, id] { selected = id; });
  }
  app.add_subcommand("list", "List experiment ids")->callback([] {
    for (const auto& id : cvxorder::experiment_ids()) std::cout << id << "\n";
  });

  CLI11_PARSE(app, argc, argv);
  if (app.got_subcommand("list")) return 0;
  if (app.got_subcommand("run") && config_path.empty()) {
    std::cerr << "run: --config is required\n";
    return 1;
  }

  cvxorder::RunOptions opts;
  opts.out_dir = out_dir;
  opts.seed = seed;
  opts.paths = paths;
  opts.threads = threads;
  opts.trace = trace;
  try {
    return run(selected, config_path, opts);
  } catch (const cvxorder::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
