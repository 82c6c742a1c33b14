#pragma once

// Message-passing substrate: ranks, point-to-point messages and
// deterministic collectives.  Two backends share one Communicator type:
//
//   * in-process: one thread per rank, queue-based channels;
//   * socket: one OS process per rank, full TCP mesh built through a
//     rendezvous server.
//
// Every collective is routed through rank 0 of the communicator (gather,
// combine in rank order, fan out).  This fixes the reduction order, so
// results are bitwise reproducible for a given size and identical across
// backends, and it makes every collective a barrier.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace distla {

using Bytes = std::vector<std::byte>;

enum class Backend { InProcess, Socket };

enum class ReduceOp { Sum, Max, Min };

/// Element of a max-abs-with-location reduction.  The reduced value is
/// |value|; ties go to the smallest index.
struct MaxLoc {
  double value = 0.0;
  std::int64_t index = -1;
};

/// Self-sends and sends to peers never block: channels are unbounded
/// queues on both backends, so any payload size can be sent to oneself
/// before the matching recv.
inline constexpr std::size_t kSelfSendBufferLimit = static_cast<std::size_t>(-1);

namespace detail {
class Endpoint;
}

class Communicator;
Communicator make_communicator(std::shared_ptr<detail::Endpoint> endpoint);

class Communicator {
public:
  Communicator() = default;

  int rank() const { return rank_; }
  int size() const { return static_cast<int>(members_.size()); }
  Backend backend() const;
  std::uint64_t group_id() const { return group_; }
  bool valid() const { return endpoint_ != nullptr; }

  /// Tags must be non-negative; negative tags are reserved for collectives.
  void send(int dest, int tag, std::span<const std::byte> payload) const;
  Bytes recv(int src, int tag) const;

  void barrier() const;
  Bytes broadcast(int root, std::span<const std::byte> payload) const;
  std::vector<double> allreduce(ReduceOp op, std::span<const double> values) const;
  std::vector<MaxLoc> allreduce_maxloc(std::span<const MaxLoc> values) const;
  /// Concatenation of every rank's bytes in rank order.
  Bytes allgatherv(std::span<const std::byte> local) const;
  /// Same exchange, but keeps the per-rank boundaries.
  std::vector<Bytes> allgather_parts(std::span<const std::byte> local) const;

  /// Collective.  Ranks with equal color form a new communicator, ordered
  /// by key and then by rank in this communicator.
  Communicator split(int color, int key) const;

private:
  friend Communicator make_communicator(std::shared_ptr<detail::Endpoint>);

  using Combine = std::function<Bytes(std::vector<Bytes>&)>;
  Bytes exchange_via_root(std::span<const std::byte> local, const Combine& combine) const;
  int world_rank_of(int r) const { return members_[static_cast<std::size_t>(r)]; }

  std::shared_ptr<detail::Endpoint> endpoint_;
  std::vector<int> members_;  // world rank of each member
  int rank_ = 0;
  std::uint64_t group_ = 0;
  std::shared_ptr<std::uint64_t> split_count_;
};

// ---------------------------------------------------------------------------
// Little-endian value encoding used for every typed payload.

namespace wire {

void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
void put_f64(Bytes& out, double v);
std::uint32_t get_u32(std::span<const std::byte> in, std::size_t offset);
std::uint64_t get_u64(std::span<const std::byte> in, std::size_t offset);
double get_f64(std::span<const std::byte> in, std::size_t offset);

Bytes encode(std::span<const double> values);
Bytes encode(std::span<const std::int64_t> values);
std::vector<double> decode_f64(std::span<const std::byte> bytes);
std::vector<std::int64_t> decode_i64(std::span<const std::byte> bytes);

} // namespace wire

/// Typed allgatherv for doubles or 64-bit integers.
template <typename T>
std::vector<T> allgatherv_values(const Communicator& comm, std::span<const T> local) {
  Bytes all = comm.allgatherv(wire::encode(local));
  if constexpr (std::is_same_v<T, double>)
    return wire::decode_f64(all);
  else
    return wire::decode_i64(all);
}

template <typename T>
std::vector<T> broadcast_values(const Communicator& comm, int root, std::span<const T> values) {
  Bytes bytes = comm.broadcast(root, wire::encode(values));
  if constexpr (std::is_same_v<T, double>)
    return wire::decode_f64(bytes);
  else
    return wire::decode_i64(bytes);
}

// ---------------------------------------------------------------------------
// World creation.

struct RankFailure {
  int rank = 0;
  std::string message;
};

/// Runs `body` on `nranks` threads, each with its own world Communicator,
/// and joins them.  An exception on one rank aborts the world so blocked
/// peers fail instead of hanging.  Returns the failures of ranks whose
/// error was not caused by another rank's abort (empty on success).
std::vector<RankFailure> run_in_process(int nranks,
                                        const std::function<void(Communicator&)>& body);

/// As run_in_process, but throws the first failure as an Error.
void run_in_process_or_throw(int nranks, const std::function<void(Communicator&)>& body);

/// Accepts `nranks` workers, assigns ranks sorted by each worker's key
/// (ties by connection order) and hands every worker the address table.
class RendezvousServer {
public:
  /// Port 0 binds an ephemeral port.
  RendezvousServer(const std::string& host, int port, int nranks);
  ~RendezvousServer();
  RendezvousServer(const RendezvousServer&) = delete;
  RendezvousServer& operator=(const RendezvousServer&) = delete;

  std::string address() const;
  /// Blocks until all workers are assigned.  Throws TransportError on timeout.
  void serve(std::chrono::milliseconds timeout = std::chrono::seconds(60));

private:
  int listen_fd_ = -1;
  std::string host_;
  int port_ = 0;
  int nranks_ = 0;
};

/// Joins a socket world through the rendezvous server at `address`
/// ("host:port").  Returns after the world-wide barrier.
Communicator connect_world(const std::string& address, std::uint64_t key,
                           std::chrono::milliseconds timeout = std::chrono::seconds(60));

/// Single-rank in-process world, usable without spawning threads.
Communicator self_world();

} // namespace distla
