#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "umsim/common.hpp"
#include "umsim/detection.hpp"
#include "umsim/geometry.hpp"
#include "umsim/measurement.hpp"
#include "umsim/prior.hpp"

namespace umsim {

using nlohmann::json;

enum class TaskKind { chest, detect, beamform, geometry };

inline TaskKind task_from_string(const std::string& s) {
  if (s == "chest") return TaskKind::chest;
  if (s == "detect") return TaskKind::detect;
  if (s == "beamform") return TaskKind::beamform;
  if (s == "geometry") return TaskKind::geometry;
  throw LoadError("config: unknown task \"" + s + "\"");
}

inline std::string task_to_string(TaskKind t) {
  switch (t) {
    case TaskKind::chest: return "chest";
    case TaskKind::detect: return "detect";
    case TaskKind::beamform: return "beamform";
    case TaskKind::geometry: return "geometry";
  }
  return "?";
}

struct GeometryConfig {
  double carrier_ghz = 300.0;
  double d_a_over_lambda = 0.5;
  double w = 4.0;
  GridShape sa_grid{4, 4};
  GridShape ae_grid{4, 4};

  double wavelength_m() const { return speed_of_light_m_s / (carrier_ghz * 1e9); }
  ArrayGeometry build() const {
    const double lambda = wavelength_m();
    return build_aosa(lambda, d_a_over_lambda * lambda, w, sa_grid, ae_grid);
  }
};

struct ChannelConfig {
  int paths = 5;
  double k_factor_db = 10.0;
  double near_fraction = 0.5;
  double distance_min_m = 1.0;
  double distance_max_m = 30.0;
  int subcarrier_count = 1;
  double bandwidth_ghz = 0.0;
  std::string absorption_table;  // optional whitespace-separated amplitude file
};

struct PriorConfig {
  std::string family = "gaussian";  // gaussian | bernoulli_gaussian | gaussian_mixture
  double variance = 1.0;            // gaussian / bernoulli_gaussian slab
  double rho = 0.1;                 // bernoulli_gaussian
  std::vector<double> weights{0.75, 0.25};    // gaussian_mixture (zero-mean components)
  std::vector<double> variances{0.15, 3.55};  // gaussian_mixture

  Prior build(int dim) const {
    if (family == "gaussian") return Prior::gaussian_iid(dim, variance);
    if (family == "bernoulli_gaussian") return Prior::bernoulli_gaussian(dim, rho, variance);
    if (family == "gaussian_mixture") {
      std::vector<cplx> means(weights.size(), cplx(0.0, 0.0));
      return Prior::gaussian_mixture(dim, weights, means, variances);
    }
    throw LoadError("config: unknown prior family \"" + family + "\"");
  }
};

struct ChestConfig {
  std::vector<std::string> algorithms{"ls", "lmmse", "oamp-gaussian"};
  PriorConfig prior;
  double ratio = 0.3;
  std::string structure = "phase_shifter";
  std::vector<double> snr_grid_db{0.0, 5.0, 10.0, 15.0, 20.0};
  std::string source = "prior";  // prior | physical
  std::string sidecar;           // optional raw-estimate dump path
};

struct DetectConfig {
  std::vector<std::string> detectors{"zf", "lmmse", "amp", "oamp", "ep"};
  std::string constellation = "qpsk";
  int rx = 32;
  int tx = 24;
  std::vector<double> snr_grid_db{2.0, 4.0, 6.0, 8.0, 10.0, 12.0};
};

struct BeamformConfig {
  std::vector<std::string> schemes{"mrt", "zf", "wmmse"};
  std::vector<int> k_users{8, 16, 32};
  std::string placement = "near";  // near | far | hybrid
  double power_dbm = 10.0;
  double noise_dbm = -60.0;
  double distance_over_rayleigh_min = 0.05;
  double distance_over_rayleigh_max = 0.5;
  int wmmse_max_iter = 200;
  double wmmse_tol = 1e-6;
  int wmmse_restarts = 3;
};

struct SimConfig {
  std::string scenario_id = "default";
  TaskKind task = TaskKind::chest;
  uint64_t seed = 0;
  int trials = 10;
  int workers = 1;
  bool record_runtime = false;
  std::string notes;
  GeometryConfig geometry;
  ChannelConfig channel;
  ChestConfig chest;
  DetectConfig detect;
  BeamformConfig beamform;

  json to_json() const;
};

namespace detail {

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw LoadError("config: unknown key \"" + it.key() + "\" in " + context);
}

template <typename T>
T get_or(const json& obj, const std::string& key, const T& fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw LoadError("config: bad value for key \"" + key + "\"");
  }
}

inline GridShape get_grid(const json& obj, const std::string& key, GridShape fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
    throw LoadError("config: key \"" + key + "\" must be a pair of integers");
  return GridShape{v[0].get<int>(), v[1].get<int>()};
}

inline void check_positive(double v, const std::string& key) {
  if (!(v > 0.0)) throw LoadError("config: key \"" + key + "\" must be positive");
}

}  // namespace detail

inline SimConfig parse_config(const json& root) {
  if (!root.is_object()) throw LoadError("config: top level must be a JSON object");
  detail::check_keys(root,
                     {"scenario_id", "task", "seed", "trials", "workers", "record_runtime",
                      "notes", "geometry", "channel", "chest", "detect", "beamform"},
                     "top level");
  if (!root.contains("task")) throw LoadError("config: missing required key \"task\"");
  if (!root.contains("seed")) throw LoadError("config: missing required key \"seed\"");

  SimConfig cfg;
  cfg.task = task_from_string(detail::get_or<std::string>(root, "task", "chest"));
  cfg.seed = detail::get_or<uint64_t>(root, "seed", 0);
  cfg.scenario_id = detail::get_or<std::string>(root, "scenario_id", "default");
  for (char ch : cfg.scenario_id)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.'))
      throw LoadError("config: scenario_id may contain only [A-Za-z0-9_.-]");
  cfg.trials = detail::get_or<int>(root, "trials", cfg.trials);
  if (cfg.trials < 1) throw LoadError("config: key \"trials\" must be >= 1");
  cfg.workers = detail::get_or<int>(root, "workers", cfg.workers);
  if (cfg.workers < 1) throw LoadError("config: key \"workers\" must be >= 1");
  cfg.record_runtime = detail::get_or<bool>(root, "record_runtime", false);
  cfg.notes = detail::get_or<std::string>(root, "notes", "");

  if (root.contains("geometry")) {
    const json& g = root.at("geometry");
    detail::check_keys(g, {"carrier_ghz", "lambda_m", "d_a_over_lambda", "d_a_m", "w", "sa_grid",
                           "ae_grid"},
                       "geometry");
    if (g.contains("carrier_ghz") && g.contains("lambda_m"))
      throw LoadError("config: give exactly one of \"carrier_ghz\" or \"lambda_m\"");
    if (g.contains("lambda_m")) {
      const double lambda = detail::get_or<double>(g, "lambda_m", 0.0);
      detail::check_positive(lambda, "lambda_m");
      cfg.geometry.carrier_ghz = speed_of_light_m_s / lambda / 1e9;
    } else {
      cfg.geometry.carrier_ghz = detail::get_or<double>(g, "carrier_ghz", cfg.geometry.carrier_ghz);
      detail::check_positive(cfg.geometry.carrier_ghz, "carrier_ghz");
    }
    if (g.contains("d_a_m") && g.contains("d_a_over_lambda"))
      throw LoadError("config: give exactly one of \"d_a_m\" or \"d_a_over_lambda\"");
    if (g.contains("d_a_m")) {
      const double d = detail::get_or<double>(g, "d_a_m", 0.0);
      detail::check_positive(d, "d_a_m");
      cfg.geometry.d_a_over_lambda = d / cfg.geometry.wavelength_m();
    } else {
      cfg.geometry.d_a_over_lambda =
          detail::get_or<double>(g, "d_a_over_lambda", cfg.geometry.d_a_over_lambda);
      detail::check_positive(cfg.geometry.d_a_over_lambda, "d_a_over_lambda");
    }
    cfg.geometry.w = detail::get_or<double>(g, "w", cfg.geometry.w);
    if (cfg.geometry.w < 1.0) throw LoadError("config: key \"w\" must be >= 1");
    cfg.geometry.sa_grid = detail::get_grid(g, "sa_grid", cfg.geometry.sa_grid);
    cfg.geometry.ae_grid = detail::get_grid(g, "ae_grid", cfg.geometry.ae_grid);
    if (cfg.geometry.sa_grid.x < 1 || cfg.geometry.sa_grid.y < 1 || cfg.geometry.ae_grid.x < 1 ||
        cfg.geometry.ae_grid.y < 1)
      throw LoadError("config: grid counts must be >= 1");
  }

  if (root.contains("channel")) {
    const json& c = root.at("channel");
    detail::check_keys(c,
                       {"paths", "k_factor_db", "near_fraction", "distance_range_m", "subcarriers",
                        "absorption_table"},
                       "channel");
    cfg.channel.paths = detail::get_or<int>(c, "paths", cfg.channel.paths);
    if (cfg.channel.paths < 1) throw LoadError("config: key \"paths\" must be >= 1");
    cfg.channel.k_factor_db = detail::get_or<double>(c, "k_factor_db", cfg.channel.k_factor_db);
    cfg.channel.near_fraction = detail::get_or<double>(c, "near_fraction", cfg.channel.near_fraction);
    if (cfg.channel.near_fraction < 0.0 || cfg.channel.near_fraction > 1.0)
      throw LoadError("config: key \"near_fraction\" must lie in [0, 1]");
    if (c.contains("distance_range_m")) {
      const auto& r = c.at("distance_range_m");
      if (!r.is_array() || r.size() != 2)
        throw LoadError("config: key \"distance_range_m\" must be [min, max]");
      cfg.channel.distance_min_m = r[0].get<double>();
      cfg.channel.distance_max_m = r[1].get<double>();
      if (!(cfg.channel.distance_min_m > 0.0 &&
            cfg.channel.distance_min_m < cfg.channel.distance_max_m))
        throw LoadError("config: key \"distance_range_m\" must be positive and ordered");
    }
    if (c.contains("subcarriers")) {
      const json& s = c.at("subcarriers");
      detail::check_keys(s, {"count", "bandwidth_ghz"}, "channel.subcarriers");
      cfg.channel.subcarrier_count = detail::get_or<int>(s, "count", 1);
      if (cfg.channel.subcarrier_count < 1)
        throw LoadError("config: key \"count\" must be >= 1");
      cfg.channel.bandwidth_ghz = detail::get_or<double>(s, "bandwidth_ghz", 0.0);
    }
    cfg.channel.absorption_table = detail::get_or<std::string>(c, "absorption_table", "");
  }

  if (root.contains("chest")) {
    const json& t = root.at("chest");
    detail::check_keys(
        t, {"algorithms", "prior", "ratio", "structure", "snr_grid_db", "source", "sidecar"},
        "chest");
    cfg.chest.algorithms =
        detail::get_or<std::vector<std::string>>(t, "algorithms", cfg.chest.algorithms);
    cfg.chest.ratio = detail::get_or<double>(t, "ratio", cfg.chest.ratio);
    if (!(cfg.chest.ratio > 0.0 && cfg.chest.ratio <= 1.0))
      throw LoadError("config: key \"ratio\" must lie in (0, 1]");
    cfg.chest.structure = detail::get_or<std::string>(t, "structure", cfg.chest.structure);
    pilot_structure_from_string(cfg.chest.structure);  // validates
    cfg.chest.snr_grid_db =
        detail::get_or<std::vector<double>>(t, "snr_grid_db", cfg.chest.snr_grid_db);
    if (cfg.chest.snr_grid_db.empty()) throw LoadError("config: key \"snr_grid_db\" must be non-empty");
    cfg.chest.source = detail::get_or<std::string>(t, "source", cfg.chest.source);
    if (cfg.chest.source != "prior" && cfg.chest.source != "physical")
      throw LoadError("config: key \"source\" must be \"prior\" or \"physical\"");
    cfg.chest.sidecar = detail::get_or<std::string>(t, "sidecar", "");
    if (t.contains("prior")) {
      const json& p = t.at("prior");
      detail::check_keys(p, {"family", "variance", "rho", "weights", "variances"}, "chest.prior");
      cfg.chest.prior.family = detail::get_or<std::string>(p, "family", "gaussian");
      cfg.chest.prior.variance = detail::get_or<double>(p, "variance", 1.0);
      cfg.chest.prior.rho = detail::get_or<double>(p, "rho", 0.1);
      cfg.chest.prior.weights =
          detail::get_or<std::vector<double>>(p, "weights", cfg.chest.prior.weights);
      cfg.chest.prior.variances =
          detail::get_or<std::vector<double>>(p, "variances", cfg.chest.prior.variances);
    }
    cfg.chest.prior.build(1);  // validates parameters
    for (const auto& a : cfg.chest.algorithms) {
      if (a == "ls" || a == "lmmse") continue;
      if (a == "oamp-gaussian" || a == "oamp-bg" || a == "oamp-gm") {
        const std::string need = a == "oamp-gaussian" ? "gaussian"
                                 : a == "oamp-bg"     ? "bernoulli_gaussian"
                                                      : "gaussian_mixture";
        if (cfg.chest.prior.family != need)
          throw LoadError("config: algorithm \"" + a + "\" requires prior family \"" + need + "\"");
        continue;
      }
      throw LoadError("config: unknown chest algorithm \"" + a + "\"");
    }
  }

  if (root.contains("detect")) {
    const json& t = root.at("detect");
    detail::check_keys(t, {"detectors", "constellation", "rx", "tx", "snr_grid_db"}, "detect");
    cfg.detect.detectors =
        detail::get_or<std::vector<std::string>>(t, "detectors", cfg.detect.detectors);
    for (const auto& d : cfg.detect.detectors)
      if (d != "zf" && d != "lmmse" && d != "amp" && d != "oamp" && d != "ep" && d != "ml")
        throw LoadError("config: unknown detector \"" + d + "\"");
    cfg.detect.constellation =
        detail::get_or<std::string>(t, "constellation", cfg.detect.constellation);
    constellation_kind_from_string(cfg.detect.constellation);  // validates
    cfg.detect.rx = detail::get_or<int>(t, "rx", cfg.detect.rx);
    cfg.detect.tx = detail::get_or<int>(t, "tx", cfg.detect.tx);
    if (cfg.detect.rx < 1 || cfg.detect.tx < 1)
      throw LoadError("config: detect dimensions must be >= 1");
    cfg.detect.snr_grid_db =
        detail::get_or<std::vector<double>>(t, "snr_grid_db", cfg.detect.snr_grid_db);
    if (cfg.detect.snr_grid_db.empty())
      throw LoadError("config: key \"snr_grid_db\" must be non-empty");
  }

  if (root.contains("beamform")) {
    const json& t = root.at("beamform");
    detail::check_keys(t,
                       {"schemes", "k_users", "placement", "power_dbm", "noise_dbm",
                        "distance_over_rayleigh", "wmmse"},
                       "beamform");
    cfg.beamform.schemes =
        detail::get_or<std::vector<std::string>>(t, "schemes", cfg.beamform.schemes);
    for (const auto& s : cfg.beamform.schemes)
      if (s != "mrt" && s != "zf" && s != "wmmse")
        throw LoadError("config: unknown beamforming scheme \"" + s + "\"");
    cfg.beamform.k_users = detail::get_or<std::vector<int>>(t, "k_users", cfg.beamform.k_users);
    if (cfg.beamform.k_users.empty()) throw LoadError("config: key \"k_users\" must be non-empty");
    for (int k : cfg.beamform.k_users)
      if (k < 1) throw LoadError("config: all \"k_users\" entries must be >= 1");
    cfg.beamform.placement = detail::get_or<std::string>(t, "placement", cfg.beamform.placement);
    if (cfg.beamform.placement != "near" && cfg.beamform.placement != "far" &&
        cfg.beamform.placement != "hybrid")
      throw LoadError("config: key \"placement\" must be near, far or hybrid");
    cfg.beamform.power_dbm = detail::get_or<double>(t, "power_dbm", cfg.beamform.power_dbm);
    cfg.beamform.noise_dbm = detail::get_or<double>(t, "noise_dbm", cfg.beamform.noise_dbm);
    if (t.contains("distance_over_rayleigh")) {
      const auto& r = t.at("distance_over_rayleigh");
      if (!r.is_array() || r.size() != 2)
        throw LoadError("config: key \"distance_over_rayleigh\" must be [min, max]");
      cfg.beamform.distance_over_rayleigh_min = r[0].get<double>();
      cfg.beamform.distance_over_rayleigh_max = r[1].get<double>();
      if (!(cfg.beamform.distance_over_rayleigh_min > 0.0 &&
            cfg.beamform.distance_over_rayleigh_min < cfg.beamform.distance_over_rayleigh_max))
        throw LoadError("config: key \"distance_over_rayleigh\" must be positive and ordered");
    }
    if (t.contains("wmmse")) {
      const json& w = t.at("wmmse");
      detail::check_keys(w, {"max_iter", "tol", "restarts"}, "beamform.wmmse");
      cfg.beamform.wmmse_max_iter = detail::get_or<int>(w, "max_iter", cfg.beamform.wmmse_max_iter);
      cfg.beamform.wmmse_tol = detail::get_or<double>(w, "tol", cfg.beamform.wmmse_tol);
      cfg.beamform.wmmse_restarts = detail::get_or<int>(w, "restarts", cfg.beamform.wmmse_restarts);
      if (cfg.beamform.wmmse_max_iter < 1 || cfg.beamform.wmmse_restarts < 1 ||
          !(cfg.beamform.wmmse_tol > 0.0))
        throw LoadError("config: bad beamform.wmmse options");
    }
  }

  return cfg;
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("config: cannot open \"" + path + "\"");
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw LoadError("config: parse error in \"" + path + "\": " + e.what());
  }
  return parse_config(root);
}

inline SimConfig load_config_from_string(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw LoadError(std::string("config: parse error: ") + e.what());
  }
  return parse_config(root);
}

// Effective config with all defaults materialized; echoed for provenance.
inline json SimConfig::to_json() const {
  json g{{"carrier_ghz", geometry.carrier_ghz},
         {"d_a_over_lambda", geometry.d_a_over_lambda},
         {"w", geometry.w},
         {"sa_grid", {geometry.sa_grid.x, geometry.sa_grid.y}},
         {"ae_grid", {geometry.ae_grid.x, geometry.ae_grid.y}}};
  json c{{"paths", channel.paths},
         {"k_factor_db", channel.k_factor_db},
         {"near_fraction", channel.near_fraction},
         {"distance_range_m", {channel.distance_min_m, channel.distance_max_m}},
         {"subcarriers", {{"count", channel.subcarrier_count}, {"bandwidth_ghz", channel.bandwidth_ghz}}},
         {"absorption_table", channel.absorption_table}};
  json pr{{"family", chest.prior.family},
          {"variance", chest.prior.variance},
          {"rho", chest.prior.rho},
          {"weights", chest.prior.weights},
          {"variances", chest.prior.variances}};
  json ch{{"algorithms", chest.algorithms}, {"prior", pr},
          {"ratio", chest.ratio},           {"structure", chest.structure},
          {"snr_grid_db", chest.snr_grid_db}, {"source", chest.source},
          {"sidecar", chest.sidecar}};
  json dt{{"detectors", detect.detectors},
          {"constellation", detect.constellation},
          {"rx", detect.rx},
          {"tx", detect.tx},
          {"snr_grid_db", detect.snr_grid_db}};
  json bf{{"schemes", beamform.schemes},
          {"k_users", beamform.k_users},
          {"placement", beamform.placement},
          {"power_dbm", beamform.power_dbm},
          {"noise_dbm", beamform.noise_dbm},
          {"distance_over_rayleigh",
           {beamform.distance_over_rayleigh_min, beamform.distance_over_rayleigh_max}},
          {"wmmse",
           {{"max_iter", beamform.wmmse_max_iter},
            {"tol", beamform.wmmse_tol},
            {"restarts", beamform.wmmse_restarts}}}};
  return json{{"scenario_id", scenario_id},
              {"task", task_to_string(task)},
              {"seed", seed},
              {"trials", trials},
              {"workers", workers},
              {"record_runtime", record_runtime},
              {"notes", notes},
              {"geometry", g},
              {"channel", c},
              {"chest", ch},
              {"detect", dt},
              {"beamform", bf}};
}

}  // namespace umsim
