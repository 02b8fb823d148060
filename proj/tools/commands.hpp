#pragma once

// Subcommands of the `doa` command-line tool, kept out of main() so tests can
// drive them with in-memory streams.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "doa/errors.hpp"
#include "doa/geometry.hpp"
#include "doa/wav.hpp"

namespace doa::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kFileNotFound = 2,
  kMalformedInput = 3,
  kChannelMismatch = 4,
  kDegenerate = 5,
  kInvalidConfig = 6,
};

int exit_code_for(ErrorCode code);

enum class Format { Csv, JsonLines };

struct EstimateOptions {
  double frame_len = 1.0;  // seconds
  double hop = 0.2;        // seconds
  double kappa = 10.0;
  std::size_t bins = 512;
  std::optional<double> speed_of_sound;  // overrides the geometry file
  unsigned threads = 1;
};

struct FrameRecord {
  double start_time = 0.0;  // seconds
  bool ok = false;
  double phi_hat_deg = 0.0;
  double phi_err_deg = 0.0;
  std::uint64_t winner = 0;
  std::size_t pairs_used = 0;
  std::string reason;  // why the frame was skipped
};

/// One record per frame, in frame order. Throws ChannelMismatch when the
/// channel count differs from the microphone count.
std::vector<FrameRecord> estimate_frames(const WavData& wav, const ArrayGeometry& geometry,
                                         const EstimateOptions& options);

void write_frames(std::ostream& out, const std::vector<FrameRecord>& records, Format format);

/// Parses argv and runs a subcommand. Returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace doa::cli
