#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "umsim/umsim.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string preset;
  std::string out_csv;
  std::string seed_override;
  int trials_override = -1;
  int workers_override = -1;
};

umsim::SimConfig resolve_config(const CliOptions& cli, umsim::TaskKind expected) {
  if (cli.config_path.empty() && cli.preset.empty())
    throw umsim::LoadError("give --config <path> or --preset <name>");
  if (!cli.config_path.empty() && !cli.preset.empty())
    throw umsim::LoadError("--config and --preset are mutually exclusive");

  umsim::SimConfig cfg = cli.config_path.empty()
                             ? umsim::load_config_from_string(std::string(umsim::preset_text(cli.preset)))
                             : umsim::load_config(cli.config_path);
  if (cfg.task != expected)
    throw umsim::LoadError("config task \"" + umsim::task_to_string(cfg.task) +
                           "\" does not match the chosen subcommand");
  if (!cli.seed_override.empty()) cfg.seed = std::stoull(cli.seed_override);
  if (cli.trials_override > 0) cfg.trials = cli.trials_override;
  if (cli.workers_override > 0) {
    cfg.workers = cli.workers_override;
  } else if (const char* env = std::getenv("UMSIM_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) cfg.workers = w;
  }
  return cfg;
}

int run_geometry(const umsim::SimConfig& cfg) {
  const umsim::ArrayGeometry g = cfg.geometry.build();
  std::cout << "elements: " << g.element_count() << "\n";
  std::cout << "aperture_m: " << umsim::detail::format_real(umsim::aperture(g))
            << "  (diagonal convention: max pairwise element distance)\n";
  std::cout << "rayleigh_distance_m: "
            << umsim::detail::format_real(umsim::rayleigh_distance(g)) << "\n";
  if (cfg.geometry.sa_grid.x == cfg.geometry.sa_grid.y &&
      cfg.geometry.ae_grid.x == cfg.geometry.ae_grid.y &&
      cfg.geometry.sa_grid.x == cfg.geometry.ae_grid.x) {
    const double cf = umsim::rayleigh_distance_square_closed_form(
        cfg.geometry.sa_grid.x, cfg.geometry.w, g.carrier_wavelength_m);
    std::cout << "rayleigh_closed_form_m: " << umsim::detail::format_real(cf)
              << "  (square-AoSA literature formula; different aperture convention)\n";
  }
  return 0;
}

int run_task(const umsim::SimConfig& cfg, const std::string& out_csv) {
  std::cout << "effective config:\n" << cfg.to_json().dump(2) << "\n";
  const umsim::RunResult result = umsim::run_trials(cfg);

  std::cout << "records: " << result.records.size() << "\n";
  if (!result.errors.empty()) {
    std::cout << "failed trials: " << result.errors.size() << "\n";
    for (const auto& e : result.errors) std::cerr << "trial failure: " << e << "\n";
  }
  std::cout << "per-sweep means:\n";
  for (const auto& [key, mean] : umsim::aggregate_means(result.records)) {
    if (key.metric == "iterations" || key.metric == "runtime_s") continue;
    std::cout << "  " << key.algorithm << " @ " << umsim::detail::format_real(key.sweep_value)
              << "  " << key.metric << " = " << umsim::detail::format_real(mean) << "\n";
  }
  if (!out_csv.empty()) {
    umsim::write_csv(result.records, out_csv);
    std::cout << "wrote " << out_csv << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"umsim: THz ultra-massive MIMO physical-layer simulations"};
  app.require_subcommand(1);

  CliOptions cli;
  umsim::TaskKind task = umsim::TaskKind::geometry;
  for (const auto& [name, kind] :
       {std::pair<std::string, umsim::TaskKind>{"geometry", umsim::TaskKind::geometry},
        {"chest", umsim::TaskKind::chest},
        {"detect", umsim::TaskKind::detect},
        {"beamform", umsim::TaskKind::beamform}}) {
    CLI::App* sub = app.add_subcommand(name, name + " task");
    sub->add_option("--config", cli.config_path, "JSON config file");
    sub->add_option("--preset", cli.preset, "named built-in preset");
    sub->add_option("--out", cli.out_csv, "CSV output path");
    sub->add_option("--seed", cli.seed_override, "seed override (u64)");
    sub->add_option("--trials", cli.trials_override, "trial count override");
    sub->add_option("--workers", cli.workers_override,
                    "concurrent workers (default: env UMSIM_WORKERS or config)");
    sub->callback([&task, kind] { task = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const umsim::SimConfig cfg = resolve_config(cli, task);
    if (task == umsim::TaskKind::geometry) return run_geometry(cfg);
    return run_task(cfg, cli.out_csv);
  } catch (const umsim::LoadError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
