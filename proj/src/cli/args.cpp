#include "distla/cli.hpp"

#include "distla/process_grid.hpp"

#include <CLI11.hpp>

namespace distla::cli {

namespace {

void add_table_options(CLI::App* cmd, CommandOptions& c, std::string& delimiter, std::string& tag) {
  cmd->add_option("--file", c.file, "numeric text table")->required()->check(CLI::ExistingFile);
  cmd->add_option("--delimiter", delimiter, "whitespace or comma")
      ->check(CLI::IsMember({"whitespace", "comma"}));
  cmd->add_flag("--header", c.format.header, "skip the first line");
  cmd->add_option("--tag", tag, "datatype tag")->check(CLI::IsMember({"d", "i"}));
}

} // namespace

RunConfig parse_command_line(const std::vector<std::string>& args) {
  RunConfig config;
  CommandOptions& c = config.command;
  std::string delimiter = "whitespace";
  std::string tag = "d";

  CLI::App app{"distributed dense linear algebra driver", "distla"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--ranks", config.ranks, "number of ranks")->check(CLI::PositiveNumber);
  app.add_option("--grid", config.grid, "process grid RxC or auto");
  app.add_option("--backend", config.backend, "local or tcp")->check(CLI::IsMember({"local", "tcp"}));
  app.add_option("--seed", config.seed, "seed for generated inputs");
  app.add_option("--repeat", config.repeat, "run timed kernels K times and report the minimum")
      ->check(CLI::PositiveNumber);
  app.add_option("--rendezvous", config.rendezvous, "HOST:PORT of the tcp rendezvous");
  auto* worker = app.add_flag("--worker", config.worker, "internal: run as a spawned tcp rank");
  worker->group("");
  app.add_option("--worker-key", config.worker_key, "internal: rank key")->group("");

  auto* bench = app.add_subcommand("bench", "timed kernels on seeded inputs, CSV output");
  bench->require_subcommand(1);
  auto* gemm = bench->add_subcommand("gemm", "C = A * B with n x n inputs");
  gemm->add_option("--n", c.n)->required()->check(CLI::NonNegativeNumber);
  gemm->add_option("--nb", c.panel, "panel width")->check(CLI::PositiveNumber);
  auto* solve = bench->add_subcommand("solve", "LU factorization and solve");
  solve->add_option("--n", c.n)->required()->check(CLI::PositiveNumber);
  solve->add_option("--nrhs", c.nrhs)->check(CLI::PositiveNumber);
  auto* bpca = bench->add_subcommand("pca", "principal components of a rows x cols matrix");
  auto* rows = bpca->add_option("--rows", c.rows)->check(CLI::PositiveNumber);
  auto* cols = bpca->add_option("--cols", c.cols)->check(CLI::PositiveNumber);
  auto* bfile = bpca->add_option("--file", c.file)->check(CLI::ExistingFile);
  rows->needs(cols);
  cols->needs(rows);
  bfile->excludes(rows)->excludes(cols);

  auto* eigen = app.add_subcommand("eigen", "eigendecomposition of a symmetric table (lower triangle read)");
  add_table_options(eigen, c, delimiter, tag);
  eigen->add_flag("--exact", c.exact, "round-trip digits");
  auto* pca = app.add_subcommand("pca", "principal components of a table");
  add_table_options(pca, c, delimiter, tag);
  pca->add_flag("--exact", c.exact, "round-trip digits");
  pca->add_flag("!--no-center", c.center, "do not center columns");
  pca->add_flag("--scale", c.scale, "scale columns to unit variance");
  auto* print = app.add_subcommand("print", "print a table");
  add_table_options(print, c, delimiter, tag);
  auto* overhead = app.add_subcommand("overhead", "per-call cost of the flat handle interface");
  overhead->add_option("--calls", c.calls)->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  }

  if (gemm->parsed()) c.name = "bench gemm";
  if (solve->parsed()) c.name = "bench solve";
  if (bpca->parsed()) {
    c.name = "bench pca";
    if (c.file.empty() && c.rows == 0) throw CLI::RequiredError("bench pca needs --rows and --cols, or --file");
  }
  if (eigen->parsed()) c.name = "eigen";
  if (pca->parsed()) c.name = "pca";
  if (print->parsed()) c.name = "print";
  if (overhead->parsed()) c.name = "overhead";
  c.format.delimiter = delimiter == "comma" ? Delimiter::Comma : Delimiter::Whitespace;
  c.format.tag = parse_datatype(tag);

  if (auto shape = parse_grid_spec(config.grid); shape && shape->first * shape->second != config.ranks)
    throw UsageError("grid " + config.grid + " has " + std::to_string(shape->first * shape->second) +
                     " ranks but --ranks is " + std::to_string(config.ranks));
  if (config.worker && config.rendezvous.empty()) throw UsageError("--worker needs --rendezvous");
  return config;
}

} // namespace distla::cli
