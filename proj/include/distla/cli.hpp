#pragma once

// Launcher and driver subcommands behind the `distla` executable.
//
//   distla [--ranks N] [--grid RxC|auto] [--backend local|tcp] [--seed S]
//          [--repeat K] <command> ...
//
// The local backend runs ranks as threads of this process.  The tcp backend
// re-executes this binary once per rank with --worker, --worker-key and
// --rendezvous, serves the rendezvous itself and aggregates exit codes.

#include "distla/table_io.hpp"
#include "distla/transport.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace distla::cli {

struct CommandOptions {
  std::string name;  // "bench gemm", "bench solve", "bench pca", "eigen", "pca", "print", "overhead"
  std::int64_t n = 0;
  std::int64_t panel = 32;
  std::int64_t nrhs = 1;
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::int64_t calls = 100000;
  std::string file;
  TableFormat format;
  bool center = true;
  bool scale = false;
  bool exact = false;  // shortest round-trip digits instead of %.6g
};

struct RunConfig {
  int ranks = 1;
  std::string grid = "auto";
  std::string backend = "local";
  std::uint64_t seed = 42;
  int repeat = 1;
  std::string rendezvous;  // host:port
  bool worker = false;
  std::uint64_t worker_key = 0;
  CommandOptions command;
};

/// Thrown by parse_command_line for --help; carries the usage text.
struct HelpRequested {
  std::string text;
};

/// Throws UsageError for invalid combinations (e.g. --grid 2x2 with
/// --ranks 3).  CLI11 parse errors are thrown as CLI::ParseError.
RunConfig parse_command_line(const std::vector<std::string>& args);

/// One rank's share of a command.  World rank 0 writes the report to `out`.
void run_command(const RunConfig& config, const Communicator& world, std::ostream& out);

/// Runs the configured command on all ranks and returns the process exit
/// status: 0 when every rank succeeded.  `args` are the original arguments
/// (without the program name), reused when spawning tcp workers.
int launch(const RunConfig& config, const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

/// Parses argv and launches; the body of main().
int run_cli(int argc, char** argv);

inline constexpr const char* kBenchHeader = "op,n,ranks,grid,seconds,check";
inline constexpr const char* kOverheadHeader =
    "op,calls,ranks,grid,seconds_per_call,direct_seconds_per_call,rss_mb,reference_ms_per_call,reference_mb_per_process";

} // namespace distla::cli
