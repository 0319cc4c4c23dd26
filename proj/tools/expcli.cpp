#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "imol/experiment.hpp"

namespace {

std::filesystem::path output_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("IMOL_OUT_ROOT")) return env;
  return "runs";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imol experiment runner"};
  app.require_subcommand(1);

  std::string config_path, out_flag, compare_out = "comparison.csv";
  std::vector<std::string> run_dirs;

  auto* run = app.add_subcommand("run", "run a learner experiment");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_flag, "output root (default $IMOL_OUT_ROOT or ./runs)");

  auto* star = app.add_subcommand("star-run", "run the maze engine (star or flat)");
  star->add_option("config", config_path, "star config (JSON)")->required();
  star->add_option("--out", out_flag, "output root (default $IMOL_OUT_ROOT or ./runs)");

  auto* validate = app.add_subcommand("validate", "validate a config file");
  validate->add_option("config", config_path, "config (JSON)")->required();

  auto* compare = app.add_subcommand("compare", "compare finished runs");
  compare->add_option("dirs", run_dirs, "run directories")->required()->expected(-2);
  compare->add_option("--out", compare_out, "comparison table file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto cfg = imol::load_experiment_config(config_path);
      const auto out = imol::run_experiment(cfg, output_root(out_flag));
      std::cout << "run written to " << out.dir.string() << "\n";
      if (!out.eval_curve.empty()) {
        std::cout << "final evaluation errors:\n";
        for (const auto& [sid, err] : out.eval_curve.back().second)
          std::cout << "  " << cfg.hierarchy.space(sid).name << ": " << err << "\n";
      }
    } else if (star->parsed()) {
      const auto cfg = imol::load_star_config(config_path);
      const auto out = imol::run_star(cfg, output_root(out_flag));
      int succ = 0, tail = 0;
      const int window = std::min<int>(200, static_cast<int>(out.episodes.size()));
      for (int i = static_cast<int>(out.episodes.size()) - window;
           i < static_cast<int>(out.episodes.size()); ++i) {
        ++tail;
        succ += out.episodes[i].success ? 1 : 0;
      }
      std::cout << "run written to " << out.dir.string() << "\n"
                << "success rate over last " << tail << " episodes: "
                << (tail ? static_cast<double>(succ) / tail : 0.0) << "\n"
                << "final regions: " << out.abstraction.size()
                << ", shortest path: " << out.shortest_path << "\n";
    } else if (validate->parsed()) {
      if (imol::is_star_config_file(config_path)) {
        imol::load_star_config(config_path);
        std::cout << "valid star config\n";
      } else {
        imol::load_experiment_config(config_path);
        std::cout << "valid experiment config\n";
      }
    } else if (compare->parsed()) {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
      std::cout << imol::compare_runs(dirs, compare_out);
      std::cout << "table written to " << compare_out << "\n";
    }
  } catch (const imol::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
