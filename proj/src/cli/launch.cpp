#include "distla/cli.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <csignal>
#include <iostream>
#include <thread>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace distla::cli {

namespace {

constexpr auto kFailureGrace = std::chrono::seconds(10);

/// Splits the machine's cores between the ranks sharing it.
void share_cores(int ranks) { omp_set_num_threads(std::max(1, omp_get_num_procs() / std::max(1, ranks))); }

int run_local(const RunConfig& config, std::ostream& out, std::ostream& err) {
  auto failures = run_in_process(config.ranks, [&](Communicator& world) {
    share_cores(config.ranks);
    run_command(config, world, out);
  });
  for (const auto& f : failures) err << "distla: rank " << f.rank << ": " << f.message << '\n';
  return failures.empty() ? 0 : 1;
}

int run_worker(const RunConfig& config, std::ostream& out, std::ostream& err) {
  int rank = -1;
  try {
    Communicator world = connect_world(config.rendezvous, config.worker_key);
    rank = world.rank();
    share_cores(world.size());
    run_command(config, world, out);
    return 0;
  } catch (const std::exception& e) {
    err << "distla: rank " << (rank < 0 ? std::to_string(config.worker_key) + " (unassigned)" : std::to_string(rank))
        << ": " << e.what() << '\n';
    return 1;
  }
}

std::pair<std::string, int> split_address(const std::string& address) {
  auto colon = address.rfind(':');
  if (colon == std::string::npos) throw UsageError("rendezvous address must be HOST:PORT, got '" + address + "'");
  try {
    return {address.substr(0, colon), std::stoi(address.substr(colon + 1))};
  } catch (const std::exception&) {
    throw UsageError("bad port in rendezvous address '" + address + "'");
  }
}

pid_t spawn_worker(const std::vector<std::string>& args, int key, const std::string& address) {
  std::vector<std::string> argv = {"/proc/self/exe",      "--worker", "--worker-key", std::to_string(key),
                                   "--rendezvous", address};
  argv.insert(argv.end(), args.begin(), args.end());
  std::vector<char*> raw;
  for (auto& a : argv) raw.push_back(a.data());
  raw.push_back(nullptr);
  pid_t pid = 0;
  int rc = posix_spawn(&pid, "/proc/self/exe", nullptr, nullptr, raw.data(), environ);
  if (rc != 0) throw Error("cannot spawn worker " + std::to_string(key) + ": " + std::strerror(rc));
  return pid;
}

int run_tcp(const RunConfig& config, const std::vector<std::string>& args, std::ostream& err) {
  std::string host = "127.0.0.1";
  int port = 0;
  if (!config.rendezvous.empty()) std::tie(host, port) = split_address(config.rendezvous);
  RendezvousServer server(host, port, config.ranks);
  const std::string address = server.address();

  // Arguments naming the rendezvous are replaced by the server's address.
  std::vector<std::string> forwarded;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--rendezvous") {
      ++k;
      continue;
    }
    if (args[k].rfind("--rendezvous=", 0) == 0) continue;
    forwarded.push_back(args[k]);
  }

  std::vector<pid_t> pids;
  std::string serve_error;
  std::thread serving([&] {
    try {
      server.serve();
    } catch (const std::exception& e) {
      serve_error = e.what();
    }
  });
  try {
    for (int k = 0; k < config.ranks; ++k) pids.push_back(spawn_worker(forwarded, k, address));
  } catch (...) {
    for (pid_t p : pids) kill(p, SIGKILL);
    for (pid_t p : pids) waitpid(p, nullptr, 0);
    serving.join();
    throw;
  }

  std::vector<int> status(pids.size(), -1);
  std::size_t running = pids.size();
  std::optional<std::chrono::steady_clock::time_point> deadline;
  while (running > 0) {
    for (std::size_t k = 0; k < pids.size(); ++k) {
      if (status[k] >= 0) continue;
      int ws = 0;
      if (waitpid(pids[k], &ws, WNOHANG) != pids[k]) continue;
      status[k] = WIFEXITED(ws) ? WEXITSTATUS(ws) : 128 + (WIFSIGNALED(ws) ? WTERMSIG(ws) : 0);
      --running;
      if (status[k] != 0 && !deadline) deadline = std::chrono::steady_clock::now() + kFailureGrace;
    }
    if (running > 0 && deadline && std::chrono::steady_clock::now() > *deadline) {
      for (std::size_t k = 0; k < pids.size(); ++k)
        if (status[k] < 0) kill(pids[k], SIGKILL);
      deadline = std::chrono::steady_clock::time_point::max();
    }
    if (running > 0) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  serving.join();

  int failed = 0;
  for (std::size_t k = 0; k < status.size(); ++k)
    if (status[k] != 0) {
      err << "distla: rank " << k << " exited with status " << status[k] << '\n';
      ++failed;
    }
  if (!serve_error.empty() && failed == 0) {
    err << "distla: rendezvous failed: " << serve_error << '\n';
    return 1;
  }
  return failed == 0 ? 0 : 1;
}

} // namespace

int launch(const RunConfig& config, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    if (config.worker) return run_worker(config, out, err);
    if (config.backend == "tcp") return run_tcp(config, args, err);
    return run_local(config, out, err);
  } catch (const std::exception& e) {
    err << "distla: " << e.what() << '\n';
    return 1;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  RunConfig config;
  try {
    config = parse_command_line(args);
  } catch (const HelpRequested& help) {
    std::cout << help.text;
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "distla: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "distla: " << e.what() << '\n';
    return 2;
  }
  return launch(config, args, std::cout, std::cerr);
}

} // namespace distla::cli
