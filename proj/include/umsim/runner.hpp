#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "umsim/beamforming.hpp"
#include "umsim/channel.hpp"
#include "umsim/config.hpp"
#include "umsim/detection.hpp"
#include "umsim/estimation.hpp"
#include "umsim/measurement.hpp"
#include "umsim/prior.hpp"
#include "umsim/rng.hpp"

namespace umsim {

struct TrialRecord {
  std::string scenario_id;
  std::string algorithm;
  std::string sweep_name;
  double sweep_value = 0.0;
  int trial_index = 0;
  std::string metric_name;  // nmse_db | ser | sum_rate_bps_hz | iterations | runtime_s
  double value = 0.0;
  uint64_t seed = 0;
  uint64_t stream_id = 0;
};

struct RunResult {
  std::vector<TrialRecord> records;
  std::vector<std::string> errors;  // per-trial failures; the run continues
};

namespace detail {

inline std::string format_real(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct RecordSink {
  std::vector<TrialRecord>& out;
  const SimConfig& cfg;
  std::string sweep_name;
  double sweep_value;
  int trial_index;
  uint64_t stream_id;

  void add(const std::string& algorithm, const std::string& metric, double value) const {
    out.push_back(TrialRecord{cfg.scenario_id, algorithm, sweep_name, sweep_value, trial_index,
                              metric, value, cfg.seed, stream_id});
  }
};

inline std::vector<double> load_absorption_table(const std::string& path, int count) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw IoError("cannot open absorption table \"" + path + "\"");
  std::vector<double> t;
  double v;
  while (in >> v) t.push_back(v);
  if (static_cast<int>(t.size()) != count)
    throw LoadError("absorption table \"" + path + "\" must list one amplitude per subcarrier");
  return t;
}

inline cvec draw_chest_channel(const SimConfig& cfg, const ArrayGeometry& geom, const Prior& prior,
                               RngStream& rng) {
  if (cfg.chest.source == "prior") return prior.sample(rng);
  ChannelScenario sc;
  sc.num_paths = cfg.channel.paths;
  sc.k_factor_db = cfg.channel.k_factor_db;
  sc.near_fraction = cfg.channel.near_fraction;
  sc.distance_min_m = cfg.channel.distance_min_m;
  sc.distance_max_m = cfg.channel.distance_max_m;
  const auto paths = sample_paths(geom, sc, rng);
  SubcarrierPlan plan{cfg.geometry.carrier_ghz * 1e9, cfg.channel.bandwidth_ghz * 1e9,
                      cfg.channel.subcarrier_count};
  const auto absorption =
      load_absorption_table(cfg.channel.absorption_table, cfg.channel.subcarrier_count);
  return assemble_channel(geom, paths, plan, absorption).per_subcarrier_channel.front();
}

inline void run_chest_trial(const SimConfig& cfg, const ArrayGeometry& geom, const Prior& prior,
                            double snr_db, RngStream& rng, const RecordSink& sink,
                            cmat* estimate_dump) {
  const int n = geom.element_count();
  MeasurementOperator op = build_pilot_operator(
      n, cfg.chest.ratio, pilot_structure_from_string(cfg.chest.structure), rng);
  const cvec h = draw_chest_channel(cfg, geom, prior, rng);
  op.noise_variance = noise_variance_for_snr(op, h, snr_db);
  const cvec y = observe(op, h, rng);

  int dump_col = 0;
  for (const auto& alg : cfg.chest.algorithms) {
    const auto t0 = std::chrono::steady_clock::now();
    cvec est;
    int iterations = 1;
    if (alg == "ls") {
      est = ls_estimate(op, y);
    } else if (alg == "lmmse") {
      est = lmmse_estimate(op.matrix, y, prior.covariance(), op.noise_variance);
    } else {  // oamp-*
      OampOptions opts;
      opts.probe_rng = &rng;
      EstimatorReport rep = oamp_estimate(op, y, prior.denoiser(), opts);
      est = rep.estimate;
      iterations = rep.iterations_used;
    }
    sink.add(alg, "nmse_db", nmse_db(est, h));
    sink.add(alg, "iterations", static_cast<double>(iterations));
    if (cfg.record_runtime) {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      sink.add(alg, "runtime_s", dt.count());
    }
    if (estimate_dump) estimate_dump->col(dump_col++) = est;
  }
}

inline void run_detect_trial(const SimConfig& cfg, const Constellation& constellation,
                             double snr_db, RngStream& rng, const RecordSink& sink) {
  const int rx = cfg.detect.rx;
  const int tx = cfg.detect.tx;
  cmat h(rx, tx);
  for (int r = 0; r < rx; ++r)
    for (int c = 0; c < tx; ++c) h(r, c) = rng.cnormal(1.0 / rx);
  cvec x(tx);
  for (int i = 0; i < tx; ++i)
    x[i] = constellation.points[rng.next_below(static_cast<uint64_t>(constellation.size()))];
  // Ensemble received-SNR convention: snr = E||Hx||^2 / (rx sigma2) = tx / (rx sigma2).
  const double sigma2 = static_cast<double>(tx) / (rx * std::pow(10.0, snr_db / 10.0));
  cvec y = h * x;
  for (int r = 0; r < rx; ++r) y[r] += rng.cnormal(sigma2);

  for (const auto& name : cfg.detect.detectors) {
    const auto t0 = std::chrono::steady_clock::now();
    DetectionResult res;
    if (name == "zf")
      res = linear_detect(LinearDetector::zf, h, y, sigma2, constellation);
    else if (name == "lmmse")
      res = linear_detect(LinearDetector::lmmse, h, y, sigma2, constellation);
    else if (name == "amp")
      res = detect_amp(h, y, sigma2, constellation);
    else if (name == "oamp")
      res = detect_oamp(h, y, sigma2, constellation);
    else if (name == "ep")
      res = detect_ep(h, y, sigma2, constellation);
    else
      res = detect_ml(h, y, constellation);
    sink.add(name, "ser", ser(res.hard_symbols, x));
    sink.add(name, "iterations", static_cast<double>(res.iterations_used));
    if (cfg.record_runtime) {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      sink.add(name, "runtime_s", dt.count());
    }
  }
}

inline cmat draw_beamform_users(const SimConfig& cfg, const ArrayGeometry& geom, int k_users,
                                RngStream& rng) {
  const double rayleigh = rayleigh_distance(geom);
  const int n = geom.element_count();
  cmat h(n, k_users);
  for (int k = 0; k < k_users; ++k) {
    bool near = cfg.beamform.placement == "near" ||
                (cfg.beamform.placement == "hybrid" && rng.uniform01() < 0.5);
    SourceSpec src;
    const double az = rng.uniform(-pi / 2.0, pi / 2.0);
    const double el = rng.uniform(-pi / 4.0, pi / 4.0);
    if (near) {
      const double d = rayleigh * std::exp(rng.uniform(std::log(cfg.beamform.distance_over_rayleigh_min),
                                                       std::log(cfg.beamform.distance_over_rayleigh_max)));
      src.kind = FieldKind::near;
      src.position_m = d * far_field_direction(az, el);
    } else {
      src.kind = FieldKind::far;
      src.azimuth_rad = az;
      src.elevation_rad = el;
    }
    h.col(k) = array_response(geom, src, geom.carrier_wavelength_m);
  }
  return h;
}

inline void run_beamform_trial(const SimConfig& cfg, const ArrayGeometry& geom, int k_users,
                               RngStream& rng, const RecordSink& sink) {
  const cmat h = draw_beamform_users(cfg, geom, k_users, rng);
  const double power = std::pow(10.0, cfg.beamform.power_dbm / 10.0);  // mW
  const double noise = std::pow(10.0, cfg.beamform.noise_dbm / 10.0);  // mW

  for (const auto& scheme : cfg.beamform.schemes) {
    const auto t0 = std::chrono::steady_clock::now();
    BeamformerSet set;
    int iterations = 1;
    if (scheme == "mrt") {
      set = mrt(h, power);
    } else if (scheme == "zf") {
      set = zf_beamform(h, power);
    } else {
      WmmseOptions opts;
      opts.max_iter = cfg.beamform.wmmse_max_iter;
      opts.tol = cfg.beamform.wmmse_tol;
      opts.restarts = cfg.beamform.wmmse_restarts;
      set = wmmse(h, power, noise, rng, opts);
      iterations = static_cast<int>(set.objective_trajectory.size());
    }
    sink.add(scheme, "sum_rate_bps_hz", sum_rate(h, set, noise));
    sink.add(scheme, "iterations", static_cast<double>(iterations));
    if (cfg.record_runtime) {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      sink.add(scheme, "runtime_s", dt.count());
    }
  }
}

}  // namespace detail

// Sweep axis of a task: SNR grid for chest/detect, user counts for beamform.
inline std::vector<std::pair<std::string, double>> sweep_points(const SimConfig& cfg) {
  std::vector<std::pair<std::string, double>> pts;
  switch (cfg.task) {
    case TaskKind::chest:
      for (double s : cfg.chest.snr_grid_db) pts.emplace_back("snr_db", s);
      break;
    case TaskKind::detect:
      for (double s : cfg.detect.snr_grid_db) pts.emplace_back("snr_db", s);
      break;
    case TaskKind::beamform:
      for (int k : cfg.beamform.k_users) pts.emplace_back("k_users", static_cast<double>(k));
      break;
    case TaskKind::geometry:
      break;
  }
  return pts;
}

inline void write_complex_sidecar(std::ostream& out, const cmat& m);

// Executes trials x sweep points with one independent stream per job, derived
// from (seed, scenario_id, sweep index, trial index). Output is deterministic
// for a fixed seed regardless of the worker count: jobs write into
// preallocated slots and records are merged by sorting, not arrival order.
inline RunResult run_trials(const SimConfig& cfg) {
  RunResult result;
  const auto points = sweep_points(cfg);
  if (points.empty()) return result;

  ArrayGeometry geom;
  Prior prior = Prior::gaussian_iid(1, 1.0);
  Constellation constellation;
  if (cfg.task == TaskKind::chest) {
    geom = cfg.geometry.build();
    prior = cfg.chest.prior.build(geom.element_count());
  } else if (cfg.task == TaskKind::detect) {
    constellation = make_constellation(constellation_kind_from_string(cfg.detect.constellation));
  } else if (cfg.task == TaskKind::beamform) {
    geom = cfg.geometry.build();
  }

  cmat estimate_dump;
  const bool want_dump = cfg.task == TaskKind::chest && !cfg.chest.sidecar.empty();
  if (want_dump)
    estimate_dump.resize(geom.element_count(),
                         static_cast<Eigen::Index>(cfg.chest.algorithms.size()) * cfg.trials);

  struct Job {
    size_t sweep_index;
    int trial;
  };
  std::vector<Job> jobs;
  for (size_t s = 0; s < points.size(); ++s)
    for (int t = 0; t < cfg.trials; ++t) jobs.push_back({s, t});

  std::vector<std::vector<TrialRecord>> slots(jobs.size());
  std::vector<std::string> errors(jobs.size());

  auto run_job = [&](size_t j) {
    const Job& job = jobs[j];
    const auto& [sweep_name, sweep_value] = points[job.sweep_index];
    const uint64_t key = derive_stream_key(cfg.seed, cfg.scenario_id, job.sweep_index,
                                           static_cast<uint64_t>(job.trial));
    RngStream rng(key);
    detail::RecordSink sink{slots[j], cfg, sweep_name, sweep_value, job.trial, key};
    try {
      switch (cfg.task) {
        case TaskKind::chest: {
          cmat* dump = nullptr;
          cmat local;
          if (want_dump && job.sweep_index == 0) {
            local.resize(geom.element_count(),
                         static_cast<Eigen::Index>(cfg.chest.algorithms.size()));
            dump = &local;
          }
          detail::run_chest_trial(cfg, geom, prior, sweep_value, rng, sink, dump);
          if (dump)
            estimate_dump.middleCols(
                static_cast<Eigen::Index>(job.trial) *
                    static_cast<Eigen::Index>(cfg.chest.algorithms.size()),
                static_cast<Eigen::Index>(cfg.chest.algorithms.size())) = local;
          break;
        }
        case TaskKind::detect:
          detail::run_detect_trial(cfg, constellation, sweep_value, rng, sink);
          break;
        case TaskKind::beamform:
          detail::run_beamform_trial(cfg, geom, static_cast<int>(sweep_value), rng, sink);
          break;
        case TaskKind::geometry:
          break;
      }
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << sweep_name << "=" << sweep_value << " trial=" << job.trial << ": " << e.what();
      errors[j] = os.str();
      slots[j].clear();
    }
  };

  const int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    for (size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) run_job(j);
      });
    for (auto& th : pool) th.join();
  }

  for (size_t j = 0; j < jobs.size(); ++j) {
    for (auto& r : slots[j]) result.records.push_back(std::move(r));
    if (!errors[j].empty()) result.errors.push_back(std::move(errors[j]));
  }
  std::sort(result.records.begin(), result.records.end(),
            [](const TrialRecord& a, const TrialRecord& b) {
              return std::tie(a.algorithm, a.sweep_value, a.trial_index, a.metric_name) <
                     std::tie(b.algorithm, b.sweep_value, b.trial_index, b.metric_name);
            });

  if (want_dump && cfg.trials > 0) {
    // Sidecar holds the raw estimates at the first sweep point, one column per
    // (trial, algorithm) in trial-major order.
    std::ofstream out(cfg.chest.sidecar, std::ios::binary);
    if (!out) throw IoError("cannot open sidecar \"" + cfg.chest.sidecar + "\"");
    write_complex_sidecar(out, estimate_dump);
  }
  return result;
}

// Little-endian complex matrix dump: magic "UMSIMCPX", two uint32 dims,
// then column-major interleaved re/im 64-bit floats.
inline void write_complex_sidecar(std::ostream& out, const cmat& m) {
  out.write("UMSIMCPX", 8);
  const uint32_t rows = static_cast<uint32_t>(m.rows());
  const uint32_t cols = static_cast<uint32_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double re = m(r, c).real();
      const double im = m(r, c).imag();
      out.write(reinterpret_cast<const char*>(&re), 8);
      out.write(reinterpret_cast<const char*>(&im), 8);
    }
}

inline cmat read_complex_sidecar(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "UMSIMCPX") throw IoError("sidecar: bad magic");
  uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  cmat m(rows, cols);
  for (uint32_t c = 0; c < cols; ++c)
    for (uint32_t r = 0; r < rows; ++r) {
      double re = 0.0, im = 0.0;
      in.read(reinterpret_cast<char*>(&re), 8);
      in.read(reinterpret_cast<char*>(&im), 8);
      m(r, c) = cplx(re, im);
    }
  if (!in) throw IoError("sidecar: truncated payload");
  return m;
}

inline void write_csv(const std::vector<TrialRecord>& records, const std::string& path) {
  std::vector<const TrialRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const TrialRecord* a, const TrialRecord* b) {
    return std::tie(a->algorithm, a->sweep_value, a->trial_index, a->metric_name) <
           std::tie(b->algorithm, b->sweep_value, b->trial_index, b->metric_name);
  });
  std::ofstream out(path, std::ios::binary);  // binary: byte-identical across platforms
  if (!out) throw IoError("cannot open \"" + path + "\" for writing");
  out << "scenario_id,algorithm,sweep_name,sweep_value,trial_index,metric_name,value,seed,stream_id\n";
  for (const TrialRecord* r : sorted) {
    out << r->scenario_id << ',' << r->algorithm << ',' << r->sweep_name << ','
        << detail::format_real(r->sweep_value) << ',' << r->trial_index << ',' << r->metric_name
        << ',' << detail::format_real(r->value) << ',' << r->seed << ',' << r->stream_id << '\n';
  }
  if (!out) throw IoError("write failure on \"" + path + "\"");
}

// Per-(algorithm, sweep point, metric) arithmetic means, for the CLI summary.
struct AggregateKey {
  std::string algorithm;
  double sweep_value;
  std::string metric;
  bool operator<(const AggregateKey& o) const {
    return std::tie(algorithm, sweep_value, metric) <
           std::tie(o.algorithm, o.sweep_value, o.metric);
  }
};

inline std::map<AggregateKey, double> aggregate_means(const std::vector<TrialRecord>& records) {
  std::map<AggregateKey, std::pair<double, int>> acc;
  for (const auto& r : records) {
    auto& slot = acc[AggregateKey{r.algorithm, r.sweep_value, r.metric_name}];
    slot.first += r.value;
    slot.second += 1;
  }
  std::map<AggregateKey, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / v.second;
  return out;
}

}  // namespace umsim
