#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "doa/geometry_io.hpp"
#include "doa/resolver.hpp"
#include "doa/sim.hpp"
#include "doa/tde.hpp"
#include "doa/triangulation.hpp"

namespace doa::cli {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound:
      return kFileNotFound;
    case ErrorCode::MalformedWav:
    case ErrorCode::MalformedInput:
      return kMalformedInput;
    case ErrorCode::ChannelMismatch:
      return kChannelMismatch;
    case ErrorCode::DegenerateGeometry:
    case ErrorCode::DegenerateSystem:
    case ErrorCode::AllDegenerate:
      return kDegenerate;
    default:
      return kInvalidConfig;
  }
}

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Writes to --output when given, stdout otherwise. Files are opened binary so
// line endings stay LF on every platform.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*file_) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
    out_ = file_.get();
  }
  std::ostream& stream() { return *out_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_;
};

Format parse_format(const std::string& s) { return s == "csv" ? Format::Csv : Format::JsonLines; }

ArrayGeometry geometry_or_default(const std::string& path) {
  if (path.empty()) return ArrayGeometry::circular(6, 0.2, 343.0);
  return load_geometry(path);
}

ArrayGeometry with_speed(const ArrayGeometry& g, std::optional<double> v) {
  if (!v) return g;
  return ArrayGeometry(g.mics(), *v);
}

// ---------------------------------------------------------------------------
// estimate

FrameRecord process_frame(const MultichannelFrame& frame, const ArrayGeometry& geometry,
                          const std::vector<MicPair>& pairs, const KdeParams& params) {
  FrameRecord rec;
  rec.start_time = frame.start_time;
  const double v = geometry.speed_of_sound();
  FrameCorrelator correlator(frame, max_lag_samples(geometry, frame.sample_rate));
  std::vector<AmbiguousBearing> bearings;
  std::map<std::string, int> dropped;
  for (const MicPair& pair : pairs) {
    try {
      const double tau = correlator.estimate(pair, v).tau;
      const double alpha = pair_doa_from_tde(tau, pair.baseline, v);
      bearings.push_back(to_polar_candidates(alpha, pair));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OutOfRange && e.code() != ErrorCode::DegenerateSignal) throw;
      ++dropped[to_string(e.code())];
    }
  }
  rec.pairs_used = bearings.size();
  if (bearings.size() < 2) {
    rec.reason = "fewer than 2 usable pairs";
    for (const auto& [code, count] : dropped)
      rec.reason += "; " + std::to_string(count) + " " + code;
    return rec;
  }
  const DoaEstimate est = resolve(bearings, params);
  rec.ok = true;
  rec.phi_hat_deg = rad_to_deg(est.phi_hat);
  rec.phi_err_deg = rad_to_deg(est.error);
  rec.winner = est.winner;
  return rec;
}

int cmd_estimate(const std::string& wav_path, const std::string& geometry_path,
                 const EstimateOptions& options, Format format, const std::string& output,
                 std::ostream& out) {
  const ArrayGeometry geometry =
      with_speed(geometry_or_default(geometry_path), options.speed_of_sound);
  const WavData wav = read_wav(wav_path);
  const auto records = estimate_frames(wav, geometry, options);
  Sink sink(output, out);
  write_frames(sink.stream(), records, format);
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate

void write_sim_records(std::ostream& out, const std::vector<SimRecord>& records, Format format) {
  if (format == Format::Csv)
    out << "true_doa_deg,sigma_deg,kappa,phi_hat_deg,output_error_deg,winner_index,"
           "source_range_m,ok\n";
  for (const SimRecord& r : records) {
    if (format == Format::Csv) {
      out << fixed(rad_to_deg(r.true_doa)) << ',' << fixed(rad_to_deg(r.sigma)) << ','
          << fixed(r.kappa) << ',';
      if (r.ok)
        out << fixed(rad_to_deg(r.estimate.phi_hat)) << ',' << fixed(rad_to_deg(r.output_error))
            << ',' << r.estimate.winner;
      else
        out << ",,";
      out << ',' << fixed(r.source_range, 3) << ',' << (r.ok ? 1 : 0) << '\n';
    } else {
      nlohmann::json j{{"true_doa_deg", rad_to_deg(r.true_doa)},
                       {"sigma_deg", rad_to_deg(r.sigma)},
                       {"kappa", r.kappa},
                       {"source_range_m", r.source_range},
                       {"ok", r.ok}};
      if (r.ok) {
        j["phi_hat_deg"] = rad_to_deg(r.estimate.phi_hat);
        j["output_error_deg"] = rad_to_deg(r.output_error);
        j["winner_index"] = r.estimate.winner;
      } else {
        j["failure"] = r.failure;
      }
      out << j.dump() << '\n';
    }
  }
}

nlohmann::json sim_summary(const SimConfig& config, const std::vector<SimRecord>& records) {
  std::size_t failed = 0, nonconverged = 0;
  for (const auto& r : records) {
    failed += r.ok ? 0 : 1;
    nonconverged += r.ok && !r.estimate.converged ? 1 : 0;
  }
  nlohmann::json s{{"iterations", records.size()},
                   {"failed", failed},
                   {"nonconverged_winners", nonconverged},
                   {"seed", config.seed},
                   {"r_min_m", config.r_min},
                   {"r_max_m", config.r_max},
                   {"sigma_max_deg", rad_to_deg(config.sigma_max)},
                   {"kappa_min", config.kappa_low},
                   {"kappa_max", config.kappa_high},
                   {"bins", config.bins}};
  try {
    const NoiseRatioFit fit = analyze_noise_ratio(records);
    const IndependenceReport ind = analyze_independence(records);
    s["noise_ratio"] = {{"slope", fit.slope},
                        {"slope_ci95", fit.slope_ci95},
                        {"intercept_deg", rad_to_deg(fit.intercept)},
                        {"intercept_ci95_deg", rad_to_deg(fit.intercept_ci95)},
                        {"samples", fit.samples}};
    s["correlation"] = {{"source_range", ind.corr_range},
                        {"true_doa", ind.corr_true_doa},
                        {"kappa", ind.corr_kappa}};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientData) throw;
    s["noise_ratio"] = nullptr;
    s["correlation"] = nullptr;
    s["analysis_skipped"] = e.what();
  }
  return s;
}

int cmd_simulate(const SimConfig& config, Format format, const std::string& output,
                 const std::string& summary_path, std::ostream& out, std::ostream& err) {
  config.validate();
  const auto records = run_simulation(config);
  {
    Sink sink(output, out);
    write_sim_records(sink.stream(), records, format);
  }
  const std::string summary = sim_summary(config, records).dump(2) + "\n";
  if (summary_path.empty()) {
    err << summary;
  } else {
    Sink sink(summary_path, out);
    sink.stream() << summary;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// triangulate

std::vector<std::vector<double>> read_numeric_csv(const std::string& path, std::size_t columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::FileNotFound, path);
    throw Error(ErrorCode::MalformedInput, "cannot open " + path);
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw Error(ErrorCode::MalformedInput, path + ":" + std::to_string(line_no) + ": not numeric");
    }
    if (row.size() != columns)
      throw Error(ErrorCode::MalformedInput, path + ":" + std::to_string(line_no) + ": expected " +
                                                 std::to_string(columns) + " columns");
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_triangulate(const std::string& path, bool ambiguous, Format format,
                    const std::string& output, std::ostream& out) {
  SourceLocation loc;
  std::optional<std::uint64_t> mask;
  if (ambiguous) {
    std::vector<AmbiguousNode> nodes;
    for (const auto& r : read_numeric_csv(path, 4))
      nodes.push_back({{r[0], r[1]}, deg_to_rad(r[2]), deg_to_rad(r[3])});
    const OttoyResult res = ottoy_resolve(nodes);
    loc = res.location;
    mask = res.mask;
  } else {
    std::vector<Bearing> bearings;
    for (const auto& r : read_numeric_csv(path, 3))
      bearings.push_back({{r[0], r[1]}, deg_to_rad(r[2])});
    loc = triangulate(bearings);
  }
  Sink sink(output, out);
  auto& s = sink.stream();
  if (format == Format::Csv) {
    s << "x_m,y_m,residual_norm_m,condition_number" << (mask ? ",mask" : "") << '\n';
    s << fixed(loc.position.x, 9) << ',' << fixed(loc.position.y, 9) << ','
      << fixed(loc.residual_norm, 12) << ',' << fixed(loc.condition_number, 6);
    if (mask) s << ',' << *mask;
    s << '\n';
  } else {
    nlohmann::json j{{"x_m", loc.position.x},
                     {"y_m", loc.position.y},
                     {"residual_norm_m", loc.residual_norm},
                     {"condition_number", loc.condition_number}};
    if (mask) j["mask"] = *mask;
    s << j.dump() << '\n';
  }
  return kOk;
}

}  // namespace

std::vector<FrameRecord> estimate_frames(const WavData& wav, const ArrayGeometry& geometry,
                                         const EstimateOptions& options) {
  if (wav.channels.size() != geometry.size())
    throw Error(ErrorCode::ChannelMismatch,
                "WAV has " + std::to_string(wav.channels.size()) + " channels, geometry has " +
                    std::to_string(geometry.size()) + " microphones");
  KdeParams params;
  params.kappa = options.kappa;
  params.bins = options.bins;
  params.validate();
  const auto frames = frame_stream(wav.channels, static_cast<double>(wav.sample_rate),
                                   options.frame_len, options.hop);
  const auto pairs = enumerate_pairs(geometry);
  std::vector<FrameRecord> records(frames.size());
  parallel_for(frames.size(), resolve_thread_count(options.threads),
               [&](std::size_t i, unsigned) {
                 records[i] = process_frame(frames[i], geometry, pairs, params);
               });
  return records;
}

void write_frames(std::ostream& out, const std::vector<FrameRecord>& records, Format format) {
  if (format == Format::Csv)
    out << "start_time_s,phi_hat_deg,phi_err_deg,winner_index,n_pairs_used,status\n";
  for (const FrameRecord& r : records) {
    if (format == Format::Csv) {
      out << fixed(r.start_time) << ',';
      if (r.ok)
        out << fixed(r.phi_hat_deg) << ',' << fixed(r.phi_err_deg) << ',' << r.winner;
      else
        out << ",,";
      out << ',' << r.pairs_used << ',' << (r.ok ? "ok" : "skip") << '\n';
    } else {
      nlohmann::json j{{"start_time_s", r.start_time},
                       {"n_pairs_used", r.pairs_used},
                       {"status", r.ok ? "ok" : "skip"}};
      if (r.ok) {
        j["phi_hat_deg"] = r.phi_hat_deg;
        j["phi_err_deg"] = r.phi_err_deg;
        j["winner_index"] = r.winner;
      } else {
        j["phi_hat_deg"] = nullptr;
        j["phi_err_deg"] = nullptr;
        j["winner_index"] = nullptr;
        j["reason"] = r.reason;
      }
      out << j.dump() << '\n';
    }
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Direction-of-arrival estimation with a single microphone array"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "doa 1.0.0");

  std::string format_name = "csv", output, geometry_path;
  unsigned threads = 1;
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--format", format_name, "Output format")
        ->check(CLI::IsMember({"csv", "jsonl"}))
        ->capture_default_str();
    cmd->add_option("--output,-o", output, "Output file (default: stdout)");
    cmd->add_option("--threads", threads, "Worker threads, 0 = all cores")->capture_default_str();
  };

  // estimate
  auto* est = app.add_subcommand("estimate", "Per-frame DOA from a multichannel WAV file");
  std::string wav_path;
  EstimateOptions eopt;
  double est_speed = 0.0;
  est->add_option("wav", wav_path, "Multichannel PCM WAV")->required();
  est->add_option("--geometry", geometry_path,
                  "Array geometry JSON (default: 6 mics on a 0.2 m circle)");
  est->add_option("--frame-len", eopt.frame_len, "Frame length, seconds")->capture_default_str();
  est->add_option("--hop", eopt.hop, "Frame hop, seconds")->capture_default_str();
  est->add_option("--kappa", eopt.kappa, "Kernel concentration")->capture_default_str();
  est->add_option("--bins", eopt.bins, "Histogram bins (power of two)")->capture_default_str();
  auto* est_speed_opt =
      est->add_option("--speed-of-sound", est_speed, "Overrides the geometry file, m/s");
  add_common(est);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo noise study");
  SimConfig sc;
  double sigma_max_deg = 45.0;
  std::string summary_path;
  sim->add_option("--geometry", geometry_path, "Array geometry JSON");
  sim->add_option("--iterations", sc.iterations)->capture_default_str();
  sim->add_option("--seed", sc.seed)->capture_default_str();
  sim->add_option("--r-min", sc.r_min, "Annulus inner radius, m")->capture_default_str();
  sim->add_option("--r-max", sc.r_max, "Annulus outer radius, m")->capture_default_str();
  sim->add_option("--sigma-max-deg", sigma_max_deg)->capture_default_str();
  sim->add_option("--kappa-min", sc.kappa_low)->capture_default_str();
  sim->add_option("--kappa-max", sc.kappa_high)->capture_default_str();
  sim->add_option("--bins", sc.bins)->capture_default_str();
  double sim_speed = 0.0;
  auto* sim_speed_opt = sim->add_option("--speed-of-sound", sim_speed, "m/s");
  sim->add_option("--summary", summary_path, "Summary JSON file (default: stderr)");
  add_common(sim);

  // triangulate
  auto* tri = app.add_subcommand("triangulate", "Source location from bearings CSV");
  std::string bearings_path;
  bool ambiguous = false;
  tri->add_option("bearings", bearings_path,
                  "CSV rows: position_x,position_y,angle_degrees")
      ->required();
  tri->add_flag("--ambiguous", ambiguous,
                "Rows carry two candidates (x,y,phi1_deg,phi2_deg); resolve exhaustively");
  add_common(tri);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const Format format = parse_format(format_name);
    if (*est) {
      eopt.threads = threads;
      if (*est_speed_opt) eopt.speed_of_sound = est_speed;
      return cmd_estimate(wav_path, geometry_path, eopt, format, output, out);
    }
    if (*sim) {
      sc.geometry = geometry_or_default(geometry_path);
      if (*sim_speed_opt) sc.geometry = with_speed(sc.geometry, sim_speed);
      sc.sigma_max = deg_to_rad(sigma_max_deg);
      sc.threads = threads;
      return cmd_simulate(sc, format, output, summary_path, out, err);
    }
    return cmd_triangulate(bearings_path, ambiguous, format, output, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  }
}

}  // namespace doa::cli
