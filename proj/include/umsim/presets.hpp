#pragma once

#include <map>
#include <string>
#include <string_view>

#include "umsim/common.hpp"

namespace umsim {

// Shipped scenario presets. The same JSON files live under presets/ in the
// repository; the embedded copies make `--preset <name>` independent of the
// working directory (a test keeps the two in sync).
inline const std::map<std::string, std::string_view>& preset_table() {
  static const std::map<std::string, std::string_view> table = {
      {"fig6_beamform", R"JSON({
  "scenario_id": "fig6_beamform",
  "task": "beamform",
  "seed": 61001,
  "trials": 50,
  "notes": "1024-element array, 10 dB transmit power read as dBm, -60 dBm noise; user counts are the 75-200 sweep scaled down by 1/6.25",
  "geometry": { "carrier_ghz": 300.0, "d_a_over_lambda": 0.5, "w": 4.0, "sa_grid": [4, 4], "ae_grid": [8, 8] },
  "beamform": {
    "schemes": ["mrt", "zf", "wmmse"],
    "k_users": [12, 16, 24, 32],
    "placement": "near",
    "power_dbm": 10.0,
    "noise_dbm": -60.0,
    "distance_over_rayleigh": [0.05, 0.5],
    "wmmse": { "max_iter": 200, "tol": 1e-6, "restarts": 3 }
  }
})JSON"},
      {"fig6_beamform_desk", R"JSON({
  "scenario_id": "fig6_beamform_desk",
  "task": "beamform",
  "seed": 61002,
  "trials": 10,
  "notes": "reduced variant: 128-element array, user counts 8/16/32",
  "geometry": { "carrier_ghz": 300.0, "d_a_over_lambda": 0.5, "w": 4.0, "sa_grid": [4, 4], "ae_grid": [2, 4] },
  "beamform": {
    "schemes": ["mrt", "zf", "wmmse"],
    "k_users": [8, 16, 32],
    "placement": "near",
    "power_dbm": 10.0,
    "noise_dbm": -60.0,
    "distance_over_rayleigh": [0.05, 0.5],
    "wmmse": { "max_iter": 200, "tol": 1e-6, "restarts": 3 }
  }
})JSON"},
      {"fig7_detect", R"JSON({
  "scenario_id": "fig7_detect",
  "task": "detect",
  "seed": 71001,
  "trials": 4167,
  "notes": "32x24 QPSK, about 1e5 symbols per SNR point",
  "detect": {
    "detectors": ["zf", "lmmse", "amp", "oamp", "ep"],
    "constellation": "qpsk",
    "rx": 32,
    "tx": 24,
    "snr_grid_db": [2, 4, 6, 8, 10, 12]
  }
})JSON"},
      {"fig7_detect_desk", R"JSON({
  "scenario_id": "fig7_detect_desk",
  "task": "detect",
  "seed": 71002,
  "trials": 150,
  "notes": "reduced variant of fig7_detect",
  "detect": {
    "detectors": ["zf", "lmmse", "amp", "oamp", "ep"],
    "constellation": "qpsk",
    "rx": 32,
    "tx": 24,
    "snr_grid_db": [6, 10]
  }
})JSON"},
      {"fig8_chest", R"JSON({
  "scenario_id": "fig8_chest",
  "task": "chest",
  "seed": 81001,
  "trials": 200,
  "notes": "1024-antenna array, undersampling ratio 0.3, gaussian-mixture channel prior",
  "geometry": { "carrier_ghz": 300.0, "d_a_over_lambda": 0.5, "w": 4.0, "sa_grid": [4, 4], "ae_grid": [8, 8] },
  "chest": {
    "algorithms": ["ls", "lmmse", "oamp-gm"],
    "prior": { "family": "gaussian_mixture", "weights": [0.75, 0.25], "variances": [0.15, 3.55] },
    "ratio": 0.3,
    "structure": "phase_shifter",
    "snr_grid_db": [0, 5, 10, 15, 20],
    "source": "prior"
  }
})JSON"},
      {"fig8_chest_desk", R"JSON({
  "scenario_id": "fig8_chest_desk",
  "task": "chest",
  "seed": 81002,
  "trials": 100,
  "notes": "reduced variant: 256-antenna array",
  "geometry": { "carrier_ghz": 300.0, "d_a_over_lambda": 0.5, "w": 4.0, "sa_grid": [4, 4], "ae_grid": [4, 4] },
  "chest": {
    "algorithms": ["ls", "lmmse", "oamp-gm"],
    "prior": { "family": "gaussian_mixture", "weights": [0.75, 0.25], "variances": [0.15, 3.55] },
    "ratio": 0.3,
    "structure": "phase_shifter",
    "snr_grid_db": [0, 5, 10, 15, 20],
    "source": "prior"
  }
})JSON"}};
  return table;
}

inline std::string_view preset_text(const std::string& name) {
  const auto& table = preset_table();
  auto it = table.find(name);
  if (it == table.end()) throw LoadError("unknown preset \"" + name + "\"");
  return it->second;
}

}  // namespace umsim
