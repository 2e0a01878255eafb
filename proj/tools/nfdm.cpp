#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "nfdm/nfdm.hpp"
#include "nfdm/selftest.hpp"

using namespace nfdm;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::size_t> symbols;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
  std::size_t threads = 0;
  bool print_config = false;
};

void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("--config", a.config, "base scenario file (JSON, schema nfdm-scenario/1)")->check(CLI::ExistingFile);
  app->add_option("--symbols", a.symbols, "payload symbols per sweep point")->check(CLI::PositiveNumber);
  app->add_option("--seed", a.seed, "master seed");
  app->add_option("--out", a.out, "output directory for the report and constellation dumps");
  app->add_option("--format", a.format, "report format")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--threads", a.threads, "worker threads (default: NFDM_THREADS or hardware concurrency)");
  app->add_flag("--print-config", a.print_config, "print the resolved scenario and exit");
}

ScenarioConfig base_config(const CommonArgs& a, Mode mode) {
  ScenarioConfig c = a.config.empty() ? ScenarioConfig{} : load_config(a.config);
  c.mode = mode;
  if (a.symbols) c.n_symbols = *a.symbols;
  if (a.seed) c.seed = *a.seed;
  if (!a.out.empty()) c.output_dir = a.out;
  return c;
}

int execute(ScenarioConfig c, const CommonArgs& a) {
  c.validate();
  if (a.print_config) {
    std::cout << emit_config(c);
    return 0;
  }
  const auto report = run_scenario(c, a.threads);
  const auto fmt = a.format == "json" ? ReportFormat::JSON : ReportFormat::CSV;
  if (fmt == ReportFormat::JSON)
    std::cout << report_json(report).dump(2) << "\n";
  else
    std::cout << report_csv(report);
  if (!c.output_dir.empty()) {
    for (const auto& f : emit_report(report, fmt, c.output_dir)) std::cerr << "wrote " << f.string() << "\n";
    write_file(std::filesystem::path(c.output_dir) / "scenario.json", emit_config(c));
  }
  return 0;
}

std::vector<double> default_spans(double span_km) {
  std::vector<double> s;
  const int n = span_km > 60.0 ? 4 : 9;
  for (int i = 1; i <= n; ++i) s.push_back(i);
  return s;
}

int genframe(const std::string& out, std::size_t n, std::uint64_t seed, double span_km, bool predistort,
             const std::string& bits_out) {
  const SymbolDesign design;
  FiberParams fiber;
  fiber.span_length_km = span_km;
  const auto np = normalization_from_link(47e-12, fiber, true);
  FrameLayout layout;
  layout.n_payload = n;
  const auto payload = random_symbols(n, seed, detail::payload_stream(0), design);
  FrameOptions opt;
  opt.predistort = predistort;
  const auto frame = build_frame(payload, layout, np, design, opt);

  std::ofstream f(out);
  if (!f) throw std::runtime_error("genframe: cannot open '" + out + "' for writing");
  f << "t_s,q1_re,q1_im,q2_re,q2_im\n";
  for (std::size_t i = 0; i < frame.size(); ++i)
    f << format_double(frame.grid.time(i)) << ',' << format_double(frame.q1[i].real()) << ','
      << format_double(frame.q1[i].imag()) << ',' << format_double(frame.q2[i].real()) << ','
      << format_double(frame.q2[i].imag()) << '\n';
  if (!f) throw std::runtime_error("genframe: write to '" + out + "' failed");

  if (!bits_out.empty()) {
    std::ofstream b(bits_out);
    if (!b) throw std::runtime_error("genframe: cannot open '" + bits_out + "' for writing");
    b << "symbol,bits\n";
    for (std::size_t k = 0; k < payload.size(); ++k) {
      b << k << ',';
      for (bool x : payload[k].bits) b << (x ? '1' : '0');
      b << '\n';
    }
  }

  std::printf("samples %zu (%zu training + %zu payload slots, %zu samples/slot, %.6g GS/s)\n", frame.size(),
              layout.n_training, n, layout.samples_per_slot, frame.grid.sample_rate() / 1e9);
  std::printf("mean power %.4f dBm, PAPR %.3f dB, 99%% bandwidth %.4f GHz\n", watts_to_dbm(frame.mean_power()),
              papr_db(frame), bandwidth_99(frame) / 1e9);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-polarization NFDM link simulator"};
  app.require_subcommand(1);

  bool quick = false;
  std::size_t st_threads = 0;
  auto* selftest = app.add_subcommand("selftest", "run the acceptance checks; nonzero exit on any failure");
  selftest->add_flag("--quick", quick, "reduced symbol counts");
  selftest->add_option("--threads", st_threads, "worker threads");

  CommonArgs b2b_args;
  std::vector<double> osnr_list{8, 10, 12, 14, 16};
  auto* b2b = app.add_subcommand("b2b", "back-to-back OSNR sweep");
  b2b->add_option("--osnr-list", osnr_list, "OSNR points in dB (0.1 nm reference)")->delimiter(',');
  add_common(b2b, b2b_args);

  CommonArgs tx_args;
  std::vector<double> spans;
  double span_km = 41.5;
  std::optional<double> rx_osnr;
  bool no_ase = false;
  auto* transmit = app.add_subcommand("transmit", "multi-span transmission sweep over span counts");
  transmit->add_option("--spans", spans, "span counts to simulate")->delimiter(',');
  transmit->add_option("--span-km", span_km, "span length")->check(CLI::IsMember({"41.5", "83"}));
  transmit->add_option("--rx-osnr", rx_osnr, "extra white noise at the receiver, OSNR in dB");
  transmit->add_flag("--no-ase", no_ase, "disable amplifier noise");
  add_common(transmit, tx_args);

  CommonArgs run_args;
  auto* run = app.add_subcommand("run", "run a scenario file as is");
  run->add_option("config", run_args.config, "scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_args.out, "output directory");
  run->add_option("--format", run_args.format, "report format")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--threads", run_args.threads, "worker threads");

  std::string gf_out, gf_bits;
  std::size_t gf_symbols = 64;
  std::uint64_t gf_seed = 1;
  double gf_span = 41.5;
  bool gf_predistort = false;
  auto* gen = app.add_subcommand("genframe", "write one transmit frame as CSV samples");
  gen->add_option("--out", gf_out, "output CSV path")->required();
  gen->add_option("--symbols", gf_symbols, "payload symbols")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gf_seed, "payload seed");
  gen->add_option("--span-km", gf_span, "span length setting the launch power")->check(CLI::IsMember({"41.5", "83"}));
  gen->add_flag("--predistort", gf_predistort, "apply arcsine modulator predistortion");
  gen->add_option("--bits-out", gf_bits, "also write the payload bits as CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*selftest) {
      auto opt = quick ? SelftestOptions::quick() : SelftestOptions{};
      opt.threads = st_threads;
      const bool ok = run_selftest(opt, std::cout);
      std::cout << (ok ? "ALL PASS" : "SOME CRITERIA FAILED") << std::endl;
      return ok ? 0 : 1;
    }
    if (*b2b) {
      auto c = base_config(b2b_args, Mode::BackToBack);
      if (b2b->count("--osnr-list") || b2b_args.config.empty()) c.sweep = osnr_list;
      return execute(c, b2b_args);
    }
    if (*transmit) {
      auto c = base_config(tx_args, Mode::Transmission);
      if (transmit->count("--span-km") || tx_args.config.empty()) c.fiber.span_length_km = span_km;
      if (!spans.empty())
        c.sweep = spans;
      else if (tx_args.config.empty())
        c.sweep = default_spans(c.fiber.span_length_km);
      if (rx_osnr) c.rx_osnr_db = *rx_osnr;
      if (no_ase) c.ase = false;
      return execute(c, tx_args);
    }
    if (*run) {
      auto c = load_config(run_args.config);
      if (!run_args.out.empty()) c.output_dir = run_args.out;
      return execute(c, run_args);
    }
    if (*gen) return genframe(gf_out, gf_symbols, gf_seed, gf_span, gf_predistort, gf_bits);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error [" << e.field() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
