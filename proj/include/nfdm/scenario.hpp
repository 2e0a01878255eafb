#pragma once

// Experiment harness: scenario configuration (JSON, schema "nfdm-scenario/1"),
// B2B OSNR sweeps, distance sweeps and noiseless self-tests, and CSV/JSON
// reporting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfdm/channel.hpp"
#include "nfdm/core.hpp"
#include "nfdm/parallel.hpp"
#include "nfdm/transceiver.hpp"

namespace nfdm {

inline constexpr const char* kScenarioSchema = "nfdm-scenario/1";

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument("config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class Mode { BackToBack, Transmission, RoundTripSelfTest };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::BackToBack: return "b2b";
    case Mode::Transmission: return "transmission";
    case Mode::RoundTripSelfTest: return "roundtrip";
  }
  return "?";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "b2b") return Mode::BackToBack;
  if (s == "transmission") return Mode::Transmission;
  if (s == "roundtrip") return Mode::RoundTripSelfTest;
  throw ConfigError("mode", "unknown mode '" + s + "' (expected b2b, transmission or roundtrip)");
}

struct ScenarioConfig {
  Mode mode = Mode::BackToBack;
  FiberParams fiber{};
  std::vector<double> sweep{};  // OSNR in dB (b2b) or span counts (transmission)
  std::size_t n_symbols = 10000;
  std::uint64_t seed = 1;
  std::string output_dir{};
  int n_blocks = 5;
  double t0_s = 47e-12;
  bool lpa = true;
  SymbolDesign design{};
  double symbol_slot_s = 1e-9;
  std::size_t samples_per_slot = 64;
  std::size_t n_training = 64;
  std::uint64_t training_seed = 0x5eed;
  int steps_per_span = 100;
  bool ase = true;
  double ref_bandwidth_hz = 12.5e9;
  std::optional<double> rx_osnr_db{};  // transceiver noise loaded before the receiver
  bool filter = true;
  bool phase_search = true;
  int bps_test_phases = 32;
  int bps_window = 64;
  ErasurePolicy erasure = ErasurePolicy::Half;
  std::size_t nft_oversample = 4;
  std::size_t dump_points = 2000;  // constellation points kept per sweep value

  bool operator==(const ScenarioConfig&) const = default;

  void validate() const {
    try {
      fiber.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("fiber", e.what());
    }
    try {
      design.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("design", e.what());
    }
    if (mode != Mode::RoundTripSelfTest && sweep.empty()) throw ConfigError("sweep", "must be non-empty");
    if (n_symbols < 1) throw ConfigError("n_symbols", "must be >= 1");
    if (n_blocks < 1) throw ConfigError("n_blocks", "must be >= 1");
    if (static_cast<std::size_t>(n_blocks) > n_symbols) throw ConfigError("n_blocks", "exceeds n_symbols");
    if (!(t0_s > 0.0)) throw ConfigError("t0_s", "must be > 0");
    if (!(symbol_slot_s > 0.0)) throw ConfigError("symbol_slot_s", "must be > 0");
    if (samples_per_slot < 8) throw ConfigError("samples_per_slot", "must be >= 8");
    if (steps_per_span < 1) throw ConfigError("steps_per_span", "must be >= 1");
    if (!(ref_bandwidth_hz > 0.0)) throw ConfigError("ref_bandwidth_hz", "must be > 0");
    if (rx_osnr_db && *rx_osnr_db < -10.0) throw ConfigError("rx_osnr_db", "must be >= -10 dB");
    if (bps_test_phases < 1) throw ConfigError("bps_test_phases", "must be >= 1");
    if (bps_window < 1) throw ConfigError("bps_window", "must be >= 1");
    if (nft_oversample < 1) throw ConfigError("nft_oversample", "must be >= 1");
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      const std::string f = "sweep[" + std::to_string(i) + "]";
      if (!std::isfinite(sweep[i])) throw ConfigError(f, "must be finite");
      if (mode == Mode::BackToBack && sweep[i] < -10.0) throw ConfigError(f, "OSNR must be >= -10 dB");
      if (mode == Mode::Transmission && (sweep[i] < 1.0 || sweep[i] != std::floor(sweep[i])))
        throw ConfigError(f, "span count must be a positive integer");
    }
  }
};

// ---- JSON -------------------------------------------------------------------

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& prefix) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(prefix + key, std::string("wrong type: ") + e.what());
  }
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError(prefix + k, "unknown field");
}

inline nlohmann::json complex_to_json(cd z) { return nlohmann::json::array({z.real(), z.imag()}); }

inline cd complex_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(field, "expected [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline nlohmann::json to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["schema"] = kScenarioSchema;
  j["mode"] = to_string(c.mode);
  j["fiber"] = {{"dispersion_ps_nm_km", c.fiber.dispersion_ps_nm_km},
                {"gamma_per_w_km", c.fiber.gamma_per_w_km},
                {"alpha_db_per_km", c.fiber.alpha_db_per_km},
                {"span_length_km", c.fiber.span_length_km},
                {"n_spans", c.fiber.n_spans},
                {"carrier_wavelength_nm", c.fiber.carrier_wavelength_nm},
                {"noise_figure_db", c.fiber.noise_figure_db}};
  j["sweep"] = c.sweep;
  j["n_symbols"] = c.n_symbols;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["n_blocks"] = c.n_blocks;
  j["t0_s"] = c.t0_s;
  j["lpa"] = c.lpa;
  nlohmann::json design = nlohmann::json::array();
  for (std::size_t k = 0; k < 2; ++k)
    design.push_back({{"eigenvalue", detail::complex_to_json(c.design.eigenvalues[k])},
                      {"radius", c.design.rings[k].radius},
                      {"phase_offset", c.design.rings[k].phase_offset}});
  j["design"] = design;
  j["symbol_slot_s"] = c.symbol_slot_s;
  j["samples_per_slot"] = c.samples_per_slot;
  j["n_training"] = c.n_training;
  j["training_seed"] = c.training_seed;
  j["steps_per_span"] = c.steps_per_span;
  j["ase"] = c.ase;
  j["ref_bandwidth_hz"] = c.ref_bandwidth_hz;
  j["rx_osnr_db"] = c.rx_osnr_db ? nlohmann::json(*c.rx_osnr_db) : nlohmann::json(nullptr);
  j["filter"] = c.filter;
  j["phase_search"] = c.phase_search;
  j["bps_test_phases"] = c.bps_test_phases;
  j["bps_window"] = c.bps_window;
  j["erasure"] = to_string(c.erasure);
  j["nft_oversample"] = c.nft_oversample;
  j["dump_points"] = c.dump_points;
  return j;
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j,
                         {"schema", "mode", "fiber", "sweep", "n_symbols", "seed", "output_dir", "n_blocks", "t0_s",
                          "lpa", "design", "symbol_slot_s", "samples_per_slot", "n_training", "training_seed",
                          "steps_per_span", "ase", "ref_bandwidth_hz", "rx_osnr_db", "filter", "phase_search",
                          "bps_test_phases", "bps_window", "erasure", "nft_oversample", "dump_points"},
                         "");
  if (!j.contains("schema") || !j["schema"].is_string() || j["schema"].get<std::string>() != kScenarioSchema)
    throw ConfigError("schema", std::string("expected \"") + kScenarioSchema + "\"");
  ScenarioConfig c;
  if (j.contains("mode")) {
    if (!j["mode"].is_string()) throw ConfigError("mode", "expected a string");
    c.mode = mode_from_string(j["mode"].get<std::string>());
  }
  if (j.contains("fiber")) {
    const auto& f = j["fiber"];
    detail::reject_unknown(f,
                           {"dispersion_ps_nm_km", "gamma_per_w_km", "alpha_db_per_km", "span_length_km", "n_spans",
                            "carrier_wavelength_nm", "noise_figure_db"},
                           "fiber.");
    detail::read_field(f, "dispersion_ps_nm_km", c.fiber.dispersion_ps_nm_km, "fiber.");
    detail::read_field(f, "gamma_per_w_km", c.fiber.gamma_per_w_km, "fiber.");
    detail::read_field(f, "alpha_db_per_km", c.fiber.alpha_db_per_km, "fiber.");
    detail::read_field(f, "span_length_km", c.fiber.span_length_km, "fiber.");
    detail::read_field(f, "n_spans", c.fiber.n_spans, "fiber.");
    detail::read_field(f, "carrier_wavelength_nm", c.fiber.carrier_wavelength_nm, "fiber.");
    detail::read_field(f, "noise_figure_db", c.fiber.noise_figure_db, "fiber.");
  }
  detail::read_field(j, "sweep", c.sweep, "");
  detail::read_field(j, "n_symbols", c.n_symbols, "");
  detail::read_field(j, "seed", c.seed, "");
  detail::read_field(j, "output_dir", c.output_dir, "");
  detail::read_field(j, "n_blocks", c.n_blocks, "");
  detail::read_field(j, "t0_s", c.t0_s, "");
  detail::read_field(j, "lpa", c.lpa, "");
  if (j.contains("design")) {
    const auto& d = j["design"];
    if (!d.is_array() || d.size() != 2) throw ConfigError("design", "expected two eigenvalue entries");
    for (std::size_t k = 0; k < 2; ++k) {
      const std::string p = "design[" + std::to_string(k) + "].";
      detail::reject_unknown(d[k], {"eigenvalue", "radius", "phase_offset"}, p);
      if (d[k].contains("eigenvalue")) c.design.eigenvalues[k] = detail::complex_from_json(d[k]["eigenvalue"], p + "eigenvalue");
      detail::read_field(d[k], "radius", c.design.rings[k].radius, p);
      detail::read_field(d[k], "phase_offset", c.design.rings[k].phase_offset, p);
    }
  }
  detail::read_field(j, "symbol_slot_s", c.symbol_slot_s, "");
  detail::read_field(j, "samples_per_slot", c.samples_per_slot, "");
  detail::read_field(j, "n_training", c.n_training, "");
  detail::read_field(j, "training_seed", c.training_seed, "");
  detail::read_field(j, "steps_per_span", c.steps_per_span, "");
  detail::read_field(j, "ase", c.ase, "");
  detail::read_field(j, "ref_bandwidth_hz", c.ref_bandwidth_hz, "");
  if (j.contains("rx_osnr_db") && !j["rx_osnr_db"].is_null()) {
    if (!j["rx_osnr_db"].is_number()) throw ConfigError("rx_osnr_db", "expected a number or null");
    c.rx_osnr_db = j["rx_osnr_db"].get<double>();
  }
  detail::read_field(j, "filter", c.filter, "");
  detail::read_field(j, "phase_search", c.phase_search, "");
  detail::read_field(j, "bps_test_phases", c.bps_test_phases, "");
  detail::read_field(j, "bps_window", c.bps_window, "");
  if (j.contains("erasure")) {
    const auto e = j["erasure"].is_string() ? j["erasure"].get<std::string>() : std::string();
    if (e == "half") c.erasure = ErasurePolicy::Half;
    else if (e == "pessimistic") c.erasure = ErasurePolicy::Pessimistic;
    else throw ConfigError("erasure", "expected \"half\" or \"pessimistic\"");
  }
  detail::read_field(j, "nft_oversample", c.nft_oversample, "");
  detail::read_field(j, "dump_points", c.dump_points, "");
  c.validate();
  return c;
}

inline std::string emit_config(const ScenarioConfig& c) { return to_json(c).dump(2) + "\n"; }

inline ScenarioConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<root>", std::string("JSON parse error: ") + e.what());
  }
  return scenario_from_json(j);
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---- running ----------------------------------------------------------------

struct SweepResult {
  double sweep_value = 0.0;
  double ber_avg = 0.0;
  std::array<double, 4> ber{};  // l1 p1, l1 p2, l2 p1, l2 p2
  double stddev = 0.0;          // of the per-block average BER
  double papr_db = 0.0;
  double bw99_hz = 0.0;
  double pwr_dbm = 0.0;
  std::size_t n_symbols = 0;
  std::size_t erasures = 0;
  double max_rel_point_error = 0.0;  // detected points against the sent ones, before phase search
  std::vector<double> block_ber;
  std::array<double, 4> errors{};
  std::array<std::size_t, 4> bits{};
  std::vector<std::array<std::optional<cd>, 4>> constellation;  // first block, up to dump_points
};

struct RunReport {
  ScenarioConfig config;
  std::vector<SweepResult> points;
};

namespace detail {

// Stream identifiers; the high bits keep the noise sources apart.
inline std::uint64_t payload_stream(int block) { return (1ULL << 40) + static_cast<std::uint64_t>(block); }
inline std::uint64_t osnr_stream(std::size_t point, int block) {
  return (2ULL << 40) + (static_cast<std::uint64_t>(point) << 20) + static_cast<std::uint64_t>(block);
}
inline std::uint64_t ase_seed(std::uint64_t seed, int block) {
  return stream_key(seed, (3ULL << 40) + static_cast<std::uint64_t>(block));
}
inline std::uint64_t rx_stream(std::size_t point, int block) {
  return (4ULL << 40) + (static_cast<std::uint64_t>(point) << 20) + static_cast<std::uint64_t>(block);
}

struct BlockOutcome {
  ErrorCount errors;
  std::size_t erasures = 0;
  double max_rel = 0.0;
  std::vector<std::array<std::optional<cd>, 4>> points;
};

inline BlockOutcome summarize(const ReceivedFrame& r, const std::vector<NfdmSymbol>& sent, std::size_t keep) {
  BlockOutcome o;
  o.errors = r.errors;
  for (std::size_t k = 0; k < sent.size(); ++k) {
    const auto& d = r.detections[k];
    o.erasures += d.erased[0] + d.erased[1];
    for (std::size_t c = 0; c < 4; ++c)
      if (!d.erased[c / 2])
        o.max_rel = std::max(o.max_rel, std::abs(d.points[c] - sent[k].points[c]) / std::abs(sent[k].points[c]));
  }
  const std::size_t n = std::min(keep, r.points.size());
  o.points.assign(r.points.begin(), r.points.begin() + static_cast<long>(n));
  return o;
}

inline std::size_t block_size(const ScenarioConfig& c, int b) {
  const std::size_t nb = static_cast<std::size_t>(c.n_blocks);
  return c.n_symbols / nb + (static_cast<std::size_t>(b) < c.n_symbols % nb ? 1 : 0);
}

}  // namespace detail

struct FrameContext {
  NormalizationParams np;
  FrameLayout layout;
  std::vector<NfdmSymbol> payload;
  DualPolSignal frame;
};

inline FrameContext make_block_frame(const ScenarioConfig& c, int block) {
  FrameContext f;
  f.np = normalization_from_link(c.t0_s, c.fiber, c.lpa);
  f.layout.symbol_slot_s = c.symbol_slot_s;
  f.layout.samples_per_slot = c.samples_per_slot;
  f.layout.n_training = c.n_training;
  f.layout.training_seed = c.training_seed;
  f.layout.n_payload = detail::block_size(c, block);
  f.payload = random_symbols(f.layout.n_payload, c.seed, detail::payload_stream(block), c.design);
  FrameOptions fo;
  fo.threads = 1;
  f.frame = build_frame(f.payload, f.layout, f.np, c.design, fo);
  return f;
}

inline ReceiverConfig receiver_config(const ScenarioConfig& c, const DualPolSignal& tx_frame, double z) {
  ReceiverConfig rc;
  rc.z_normalized = z;
  // no band limit in the self-test
  rc.filter_bandwidth_hz = c.filter && c.mode != Mode::RoundTripSelfTest ? bandwidth_99(tx_frame) : 0.0;
  rc.nft_oversample = c.nft_oversample;
  rc.phase_search = c.phase_search;
  rc.bps.n_test_phases = c.bps_test_phases;
  rc.bps.window = c.bps_window;
  rc.erasure = c.erasure;
  rc.threads = 1;
  return rc;
}

// Runs every (sweep point, block) pair, in parallel across `threads` workers.
// Results depend only on the configuration.
inline RunReport run_scenario(const ScenarioConfig& cfg_in, std::size_t threads = 0) {
  ScenarioConfig cfg = cfg_in;
  if (cfg.mode == Mode::RoundTripSelfTest && cfg.sweep.empty()) cfg.sweep = {0.0};
  cfg.validate();
  const std::size_t n_points = cfg.sweep.size();
  const int nb = cfg.n_blocks;
  std::vector<detail::BlockOutcome> outcome(n_points * static_cast<std::size_t>(nb));

  // transmitted frames are shared by all sweep points of a block
  std::vector<FrameContext> frames(static_cast<std::size_t>(nb));
  parallel_for(static_cast<std::size_t>(nb), [&](std::size_t b) { frames[b] = make_block_frame(cfg, static_cast<int>(b)); },
               threads);

  auto receive = [&](const DualPolSignal& rx, const FrameContext& f, double z, std::size_t p, int b) {
    DualPolSignal in = rx;
    if (cfg.rx_osnr_db) in = add_noise_for_osnr(in, *cfg.rx_osnr_db, cfg.ref_bandwidth_hz, cfg.seed, detail::rx_stream(p, b));
    const auto r = receive_frame(in, f.payload, f.layout, f.np, f.frame.mean_power(), receiver_config(cfg, f.frame, z),
                                 cfg.design);
    return detail::summarize(r, f.payload, b == 0 ? cfg.dump_points : 0);
  };

  if (cfg.mode == Mode::Transmission) {
    int max_spans = 0;
    for (double s : cfg.sweep) max_spans = std::max(max_spans, static_cast<int>(s));
    parallel_for(
        static_cast<std::size_t>(nb),
        [&](std::size_t bi) {
          const int b = static_cast<int>(bi);
          const auto& f = frames[bi];
          FiberParams fiber = cfg.fiber;
          fiber.n_spans = max_spans;
          SsfmConfig ss;
          ss.steps_per_span = cfg.steps_per_span;
          ss.ase_enabled = cfg.ase;
          ss.rng_seed = detail::ase_seed(cfg.seed, b);
          propagate_link(f.frame, fiber, ss, [&](int span, const DualPolSignal& sig) {
            for (std::size_t p = 0; p < n_points; ++p) {
              if (static_cast<int>(cfg.sweep[p]) != span + 1) continue;
              const double z = f.np.z_from_distance(cfg.fiber.span_length_km * 1e3 * (span + 1));
              outcome[p * nb + bi] = receive(sig, f, z, p, b);
            }
          });
        },
        threads);
  } else {
    parallel_for(
        n_points * static_cast<std::size_t>(nb),
        [&](std::size_t task) {
          const std::size_t p = task / static_cast<std::size_t>(nb);
          const int b = static_cast<int>(task % static_cast<std::size_t>(nb));
          const auto& f = frames[static_cast<std::size_t>(b)];
          const DualPolSignal rx = cfg.mode == Mode::BackToBack
                                       ? add_noise_for_osnr(f.frame, cfg.sweep[p], cfg.ref_bandwidth_hz, cfg.seed,
                                                            detail::osnr_stream(p, b))
                                       : f.frame;
          outcome[task] = receive(rx, f, 0.0, p, b);
        },
        threads);
  }

  RunReport report;
  report.config = cfg;
  const auto& tx0 = frames.front().frame;
  const double papr = papr_db(tx0), bw = bandwidth_99(tx0), pwr = watts_to_dbm(tx0.mean_power());
  for (std::size_t p = 0; p < n_points; ++p) {
    SweepResult s;
    s.sweep_value = cfg.sweep[p];
    s.papr_db = papr;
    s.bw99_hz = bw;
    s.pwr_dbm = pwr;
    ErrorCount total;
    for (int b = 0; b < nb; ++b) {
      const auto& o = outcome[p * nb + static_cast<std::size_t>(b)];
      total += o.errors;
      s.block_ber.push_back(o.errors.ber());
      s.erasures += o.erasures;
      s.max_rel_point_error = std::max(s.max_rel_point_error, o.max_rel);
      s.n_symbols += frames[static_cast<std::size_t>(b)].payload.size();
      if (b == 0) s.constellation = o.points;
    }
    s.ber_avg = total.ber();
    for (std::size_t k = 0; k < 4; ++k) s.ber[k] = total.ber(k), s.errors[k] = total.errors[k], s.bits[k] = total.bits[k];
    if (nb > 1) {
      double mean = 0.0, var = 0.0;
      for (double v : s.block_ber) mean += v;
      mean /= nb;
      for (double v : s.block_ber) var += (v - mean) * (v - mean);
      s.stddev = std::sqrt(var / (nb - 1));
    }
    report.points.push_back(std::move(s));
  }
  return report;
}

// ---- reporting --------------------------------------------------------------

enum class ReportFormat { CSV, JSON };

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string report_csv(const RunReport& r) {
  std::string out = "sweep_value,ber_avg,ber_l1_p1,ber_l1_p2,ber_l2_p1,ber_l2_p2,stddev,papr_db,bw99_hz,pwr_dbm\n";
  for (const auto& p : r.points) {
    const double row[] = {p.sweep_value, p.ber_avg, p.ber[0], p.ber[1], p.ber[2], p.ber[3],
                          p.stddev,      p.papr_db, p.bw99_hz, p.pwr_dbm};
    for (std::size_t i = 0; i < std::size(row); ++i) out += (i ? "," : "") + format_double(row[i]);
    out += "\n";
  }
  return out;
}

inline nlohmann::json report_json(const RunReport& r) {
  nlohmann::json j;
  j["schema"] = "nfdm-report/1";
  j["config"] = to_json(r.config);
  j["points"] = nlohmann::json::array();
  for (const auto& p : r.points) {
    j["points"].push_back({{"sweep_value", p.sweep_value},
                           {"ber_avg", p.ber_avg},
                           {"ber_l1_p1", p.ber[0]},
                           {"ber_l1_p2", p.ber[1]},
                           {"ber_l2_p1", p.ber[2]},
                           {"ber_l2_p2", p.ber[3]},
                           {"stddev", p.stddev},
                           {"papr_db", p.papr_db},
                           {"bw99_hz", p.bw99_hz},
                           {"pwr_dbm", p.pwr_dbm},
                           {"n_symbols", p.n_symbols},
                           {"erasures", p.erasures},
                           {"block_ber", p.block_ber},
                           {"max_rel_point_error", p.max_rel_point_error}});
  }
  return j;
}

// One line per kept symbol and constellation: symbol,constellation,re,im
// (erased points are written as nan).
inline std::string constellation_csv(const SweepResult& p) {
  std::string out = "symbol,constellation,re,im\n";
  for (std::size_t k = 0; k < p.constellation.size(); ++k)
    for (std::size_t c = 0; c < 4; ++c) {
      const auto& x = p.constellation[k][c];
      out += std::to_string(k) + "," + std::to_string(c) + "," + (x ? format_double(x->real()) : "nan") + "," +
             (x ? format_double(x->imag()) : "nan") + "\n";
    }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

// Writes report.csv or report.json plus constellation_<i>.csv per sweep value
// into `dir`; returns the paths written.
inline std::vector<std::filesystem::path> emit_report(const RunReport& r, ReportFormat fmt,
                                                      const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  const auto main = dir / (fmt == ReportFormat::CSV ? "report.csv" : "report.json");
  write_file(main, fmt == ReportFormat::CSV ? report_csv(r) : report_json(r).dump(2) + "\n");
  written.push_back(main);
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto path = dir / ("constellation_" + std::to_string(i) + ".csv");
    write_file(path, constellation_csv(r.points[i]));
    written.push_back(path);
  }
  return written;
}

}  // namespace nfdm
