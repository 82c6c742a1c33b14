#include "distla/transport.hpp"

#include "distla/error.hpp"
#include "distla/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>
#include <tuple>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace distla {

// ---------------------------------------------------------------------------
// wire

namespace wire {

void put_u32(Bytes& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::byte>((v >> (8 * b)) & 0xFF));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::byte>((v >> (8 * b)) & 0xFF));
}

void put_f64(Bytes& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t get_u32(std::span<const std::byte> in, std::size_t offset) {
  if (offset + 4 > in.size()) throw TransportError("truncated payload");
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b)
    v |= static_cast<std::uint32_t>(std::to_integer<std::uint8_t>(in[offset + b])) << (8 * b);
  return v;
}

std::uint64_t get_u64(std::span<const std::byte> in, std::size_t offset) {
  if (offset + 8 > in.size()) throw TransportError("truncated payload");
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b)
    v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(in[offset + b])) << (8 * b);
  return v;
}

double get_f64(std::span<const std::byte> in, std::size_t offset) {
  return std::bit_cast<double>(get_u64(in, offset));
}

Bytes encode(std::span<const double> values) {
  Bytes out;
  out.reserve(values.size() * 8);
  for (double v : values) put_f64(out, v);
  return out;
}

Bytes encode(std::span<const std::int64_t> values) {
  Bytes out;
  out.reserve(values.size() * 8);
  for (auto v : values) put_u64(out, static_cast<std::uint64_t>(v));
  return out;
}

std::vector<double> decode_f64(std::span<const std::byte> bytes) {
  if (bytes.size() % 8 != 0) throw TransportError("payload is not a sequence of 64-bit values");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = get_f64(bytes, 8 * k);
  return out;
}

std::vector<std::int64_t> decode_i64(std::span<const std::byte> bytes) {
  if (bytes.size() % 8 != 0) throw TransportError("payload is not a sequence of 64-bit values");
  std::vector<std::int64_t> out(bytes.size() / 8);
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = static_cast<std::int64_t>(get_u64(bytes, 8 * k));
  return out;
}

} // namespace wire

// ---------------------------------------------------------------------------
// Endpoints

namespace detail {

namespace {

constexpr int kTagToRoot = -1;
constexpr int kTagFromRoot = -2;

class WorldAborted : public TransportError {
public:
  using TransportError::TransportError;
};

/// Per-rank receive queues, one FIFO per (source world rank, group, tag).
class Mailbox {
public:
  using Key = std::tuple<int, std::uint64_t, int>;

  explicit Mailbox(int world_size) : disconnected_(static_cast<std::size_t>(world_size), false) {}

  void push(const Key& key, Bytes payload) {
    {
      std::lock_guard lock(mutex_);
      queues_[key].push_back(std::move(payload));
    }
    ready_.notify_all();
  }

  Bytes pop(const Key& key) {
    std::unique_lock lock(mutex_);
    for (;;) {
      auto it = queues_.find(key);
      if (it != queues_.end() && !it->second.empty()) {
        Bytes out = std::move(it->second.front());
        it->second.pop_front();
        if (it->second.empty()) queues_.erase(it);
        return out;
      }
      if (aborted_) throw WorldAborted(abort_reason_);
      if (disconnected_[static_cast<std::size_t>(std::get<0>(key))])
        throw TransportError("peer " + std::to_string(std::get<0>(key)) + " disconnected");
      ready_.wait(lock);
    }
  }

  void abort(const std::string& reason) {
    {
      std::lock_guard lock(mutex_);
      if (!aborted_) abort_reason_ = reason;
      aborted_ = true;
    }
    ready_.notify_all();
  }

  void disconnect(int src) {
    {
      std::lock_guard lock(mutex_);
      disconnected_[static_cast<std::size_t>(src)] = true;
    }
    ready_.notify_all();
  }

private:
  std::mutex mutex_;
  std::condition_variable ready_;
  std::map<Key, std::deque<Bytes>> queues_;
  std::vector<bool> disconnected_;
  bool aborted_ = false;
  std::string abort_reason_;
};

} // namespace

class Endpoint {
public:
  virtual ~Endpoint() = default;
  virtual int world_rank() const = 0;
  virtual int world_size() const = 0;
  virtual Backend backend() const = 0;
  virtual void post(int dest, std::uint64_t group, int tag, std::span<const std::byte> payload) = 0;
  virtual Bytes take(int src, std::uint64_t group, int tag) = 0;
};

namespace {

struct InProcessWorld {
  explicit InProcessWorld(int n) {
    for (int r = 0; r < n; ++r) boxes.push_back(std::make_unique<Mailbox>(n));
  }
  void abort(const std::string& reason) {
    for (auto& b : boxes) b->abort(reason);
  }
  std::vector<std::unique_ptr<Mailbox>> boxes;
};

class InProcessEndpoint final : public Endpoint {
public:
  InProcessEndpoint(std::shared_ptr<InProcessWorld> world, int rank)
      : world_(std::move(world)), rank_(rank) {}

  int world_rank() const override { return rank_; }
  int world_size() const override { return static_cast<int>(world_->boxes.size()); }
  Backend backend() const override { return Backend::InProcess; }

  void post(int dest, std::uint64_t group, int tag, std::span<const std::byte> payload) override {
    world_->boxes[static_cast<std::size_t>(dest)]->push({rank_, group, tag},
                                                        Bytes(payload.begin(), payload.end()));
  }

  Bytes take(int src, std::uint64_t group, int tag) override {
    return world_->boxes[static_cast<std::size_t>(rank_)]->pop({src, group, tag});
  }

private:
  std::shared_ptr<InProcessWorld> world_;
  int rank_;
};

// ---------------------------------------------------------------------------
// Sockets.  Frame: [u32 LE length][i32 LE tag][payload]; mesh payloads
// start with the u64 LE group id of the sending communicator.

constexpr int kTagHello = -100;
constexpr int kTagAssign = -101;
constexpr int kTagMeshHello = -102;

void write_all(int fd, const std::byte* data, std::size_t n) {
  while (n > 0) {
    ssize_t k = ::send(fd, data, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("socket write failed: ") + std::strerror(errno));
    }
    data += k;
    n -= static_cast<std::size_t>(k);
  }
}

/// False on orderly EOF before the first byte.
bool read_all(int fd, std::byte* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    ssize_t k = ::recv(fd, data + got, n - got, 0);
    if (k == 0) {
      if (got == 0) return false;
      throw TransportError("connection closed mid-frame");
    }
    if (k < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("socket read failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(k);
  }
  return true;
}

void write_frame(int fd, int tag, std::span<const std::byte> payload) {
  if (payload.size() > 0xFFFFFFFFu) throw TransportError("payload exceeds 4 GiB frame limit");
  Bytes header;
  wire::put_u32(header, static_cast<std::uint32_t>(payload.size()));
  wire::put_u32(header, static_cast<std::uint32_t>(tag));
  write_all(fd, header.data(), header.size());
  if (!payload.empty()) write_all(fd, payload.data(), payload.size());
}

struct Frame {
  int tag = 0;
  Bytes payload;
};

std::optional<Frame> read_frame(int fd) {
  std::byte header[8];
  if (!read_all(fd, header, 8)) return std::nullopt;
  Frame f;
  auto len = wire::get_u32(std::span(header, 8), 0);
  f.tag = static_cast<int>(wire::get_u32(std::span(header, 8), 4));
  f.payload.resize(len);
  if (len > 0 && !read_all(fd, f.payload.data(), len))
    throw TransportError("connection closed mid-frame");
  return f;
}

Frame expect_frame(int fd, int tag) {
  auto f = read_frame(fd);
  if (!f) throw TransportError("connection closed during handshake");
  if (f->tag != tag) throw TransportError("unexpected handshake frame");
  return std::move(*f);
}

std::pair<std::string, int> parse_address(const std::string& address) {
  auto colon = address.rfind(':');
  if (colon == std::string::npos) throw UsageError("rendezvous address must be HOST:PORT: " + address);
  std::string host = address.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(address.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("bad port in rendezvous address: " + address);
  }
  if (port < 0 || port > 65535) throw UsageError("bad port in rendezvous address: " + address);
  if (host.empty()) host = "127.0.0.1";
  return {host, port};
}

sockaddr_in resolve(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
    throw TransportError("cannot resolve host " + host);
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  ::freeaddrinfo(res);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  return addr;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

int listen_on(const sockaddr_in& addr) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError("socket() failed");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(fd, 128) != 0) {
    ::close(fd);
    throw TransportError(std::string("cannot listen: ") + std::strerror(errno));
  }
  return fd;
}

int bound_port(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

using Clock = std::chrono::steady_clock;

int accept_before(int listen_fd, Clock::time_point deadline) {
  for (;;) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) throw TransportError("connection timeout");
    pollfd p{listen_fd, POLLIN, 0};
    int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (rc < 0 && errno != EINTR) throw TransportError("poll failed");
    if (rc > 0) {
      int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd >= 0) {
        set_nodelay(fd);
        return fd;
      }
    }
  }
}

int connect_before(const sockaddr_in& addr, Clock::time_point deadline) {
  for (;;) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("socket() failed");
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
      set_nodelay(fd);
      return fd;
    }
    ::close(fd);
    if (Clock::now() >= deadline) throw TransportError("connection timeout");
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

class SocketEndpoint final : public Endpoint {
public:
  SocketEndpoint(int rank, std::vector<int> fds)
      : rank_(rank), box_(static_cast<int>(fds.size())), fds_(std::move(fds)) {
    for (std::size_t p = 0; p < fds_.size(); ++p) write_mutex_.push_back(std::make_unique<std::mutex>());
    for (int p = 0; p < world_size(); ++p) {
      if (p == rank_) continue;
      readers_.emplace_back([this, p] { read_loop(p); });
    }
  }

  ~SocketEndpoint() override {
    // Graceful close: announce EOF, then wait for every peer to do the same
    // so no rank tears down a socket that still holds unread data.
    for (int p = 0; p < world_size(); ++p)
      if (p != rank_) ::shutdown(fds_[static_cast<std::size_t>(p)], SHUT_WR);
    {
      std::unique_lock lock(done_mutex_);
      done_cv_.wait_for(lock, std::chrono::seconds(30),
                        [this] { return finished_ == world_size() - 1; });
    }
    for (int p = 0; p < world_size(); ++p)
      if (p != rank_) ::shutdown(fds_[static_cast<std::size_t>(p)], SHUT_RDWR);
    for (auto& t : readers_) t.join();
    for (int p = 0; p < world_size(); ++p)
      if (p != rank_) ::close(fds_[static_cast<std::size_t>(p)]);
  }

  int world_rank() const override { return rank_; }
  int world_size() const override { return static_cast<int>(fds_.size()); }
  Backend backend() const override { return Backend::Socket; }

  void post(int dest, std::uint64_t group, int tag, std::span<const std::byte> payload) override {
    if (dest == rank_) {
      box_.push({rank_, group, tag}, Bytes(payload.begin(), payload.end()));
      return;
    }
    Bytes body;
    body.reserve(8 + payload.size());
    wire::put_u64(body, group);
    body.insert(body.end(), payload.begin(), payload.end());
    std::lock_guard lock(*write_mutex_[static_cast<std::size_t>(dest)]);
    write_frame(fds_[static_cast<std::size_t>(dest)], tag, body);
  }

  Bytes take(int src, std::uint64_t group, int tag) override { return box_.pop({src, group, tag}); }

private:
  void read_loop(int peer) {
    try {
      while (auto frame = read_frame(fds_[static_cast<std::size_t>(peer)])) {
        std::uint64_t group = wire::get_u64(frame->payload, 0);
        box_.push({peer, group, frame->tag}, Bytes(frame->payload.begin() + 8, frame->payload.end()));
      }
    } catch (const std::exception&) {
    }
    box_.disconnect(peer);
    {
      std::lock_guard lock(done_mutex_);
      ++finished_;
    }
    done_cv_.notify_all();
  }

  int rank_;
  Mailbox box_;
  std::vector<int> fds_;
  std::vector<std::unique_ptr<std::mutex>> write_mutex_;
  std::vector<std::thread> readers_;
  std::mutex done_mutex_;
  std::condition_variable done_cv_;
  int finished_ = 0;
};

} // namespace
} // namespace detail

// ---------------------------------------------------------------------------
// Communicator

Communicator make_communicator(std::shared_ptr<detail::Endpoint> endpoint) {
  Communicator c;
  c.members_.resize(static_cast<std::size_t>(endpoint->world_size()));
  std::iota(c.members_.begin(), c.members_.end(), 0);
  c.rank_ = endpoint->world_rank();
  c.group_ = 1;
  c.split_count_ = std::make_shared<std::uint64_t>(0);
  c.endpoint_ = std::move(endpoint);
  return c;
}

Backend Communicator::backend() const { return endpoint_->backend(); }

void Communicator::send(int dest, int tag, std::span<const std::byte> payload) const {
  if (dest < 0 || dest >= size()) throw UsageError("send: destination rank out of range");
  if (tag < 0) throw UsageError("send: negative tags are reserved");
  endpoint_->post(world_rank_of(dest), group_, tag, payload);
}

Bytes Communicator::recv(int src, int tag) const {
  if (src < 0 || src >= size()) throw UsageError("recv: source rank out of range");
  if (tag < 0) throw UsageError("recv: negative tags are reserved");
  return endpoint_->take(world_rank_of(src), group_, tag);
}

// Result framing: one status byte (0 ok, 1 error) followed by the
// combined payload or the error message.
Bytes Communicator::exchange_via_root(std::span<const std::byte> local, const Combine& combine) const {
  auto run_combine = [&](std::vector<Bytes>& parts) {
    Bytes out{std::byte{0}};
    try {
      Bytes combined = combine(parts);
      out.insert(out.end(), combined.begin(), combined.end());
    } catch (const UsageError& e) {
      out.assign(1, std::byte{1});
      std::string msg = e.what();
      for (char ch : msg) out.push_back(static_cast<std::byte>(ch));
    }
    return out;
  };

  Bytes result;
  if (size() == 1) {
    std::vector<Bytes> parts{Bytes(local.begin(), local.end())};
    result = run_combine(parts);
  } else if (rank_ == 0) {
    std::vector<Bytes> parts(static_cast<std::size_t>(size()));
    parts[0].assign(local.begin(), local.end());
    for (int r = 1; r < size(); ++r)
      parts[static_cast<std::size_t>(r)] = endpoint_->take(world_rank_of(r), group_, detail::kTagToRoot);
    result = run_combine(parts);
    for (int r = 1; r < size(); ++r) endpoint_->post(world_rank_of(r), group_, detail::kTagFromRoot, result);
  } else {
    endpoint_->post(world_rank_of(0), group_, detail::kTagToRoot, local);
    result = endpoint_->take(world_rank_of(0), group_, detail::kTagFromRoot);
  }

  if (result.empty()) throw TransportError("empty collective result");
  if (result[0] != std::byte{0}) {
    std::string msg;
    for (std::size_t k = 1; k < result.size(); ++k) msg.push_back(static_cast<char>(result[k]));
    throw UsageError(msg);
  }
  result.erase(result.begin());
  return result;
}

void Communicator::barrier() const {
  exchange_via_root({}, [](std::vector<Bytes>&) { return Bytes{}; });
}

Bytes Communicator::broadcast(int root, std::span<const std::byte> payload) const {
  if (root < 0 || root >= size()) throw UsageError("broadcast: root out of range");
  std::span<const std::byte> mine = rank_ == root ? payload : std::span<const std::byte>{};
  return exchange_via_root(mine, [root](std::vector<Bytes>& parts) {
    return std::move(parts[static_cast<std::size_t>(root)]);
  });
}

std::vector<double> Communicator::allreduce(ReduceOp op, std::span<const double> values) const {
  Bytes out = exchange_via_root(wire::encode(values), [op](std::vector<Bytes>& parts) {
    std::vector<double> acc = wire::decode_f64(parts[0]);
    for (std::size_t r = 1; r < parts.size(); ++r) {
      std::vector<double> v = wire::decode_f64(parts[r]);
      if (v.size() != acc.size()) throw UsageError("allreduce: length mismatch across ranks");
      for (std::size_t k = 0; k < acc.size(); ++k) {
        switch (op) {
        case ReduceOp::Sum: acc[k] += v[k]; break;
        case ReduceOp::Max: acc[k] = std::max(acc[k], v[k]); break;
        case ReduceOp::Min: acc[k] = std::min(acc[k], v[k]); break;
        }
      }
    }
    return wire::encode(acc);
  });
  return wire::decode_f64(out);
}

std::vector<MaxLoc> Communicator::allreduce_maxloc(std::span<const MaxLoc> values) const {
  Bytes mine;
  for (const auto& v : values) {
    wire::put_f64(mine, std::fabs(v.value));
    wire::put_u64(mine, static_cast<std::uint64_t>(v.index));
  }
  Bytes out = exchange_via_root(mine, [](std::vector<Bytes>& parts) {
    const std::size_t n = parts[0].size();
    for (const auto& p : parts)
      if (p.size() != n) throw UsageError("allreduce: length mismatch across ranks");
    Bytes acc = parts[0];
    for (std::size_t r = 1; r < parts.size(); ++r) {
      for (std::size_t off = 0; off < n; off += 16) {
        double best = wire::get_f64(acc, off);
        auto best_idx = static_cast<std::int64_t>(wire::get_u64(acc, off + 8));
        double cand = wire::get_f64(parts[r], off);
        auto cand_idx = static_cast<std::int64_t>(wire::get_u64(parts[r], off + 8));
        // Empty slots (index < 0) lose to any candidate; ties go to the
        // smaller global index.
        bool take = false;
        if (cand_idx >= 0) {
          if (best_idx < 0 || cand > best)
            take = true;
          else if (cand == best && cand_idx < best_idx)
            take = true;
        }
        if (take) std::copy(parts[r].begin() + off, parts[r].begin() + off + 16, acc.begin() + off);
      }
    }
    return acc;
  });
  std::vector<MaxLoc> result(values.size());
  for (std::size_t k = 0; k < result.size(); ++k) {
    result[k].value = wire::get_f64(out, 16 * k);
    result[k].index = static_cast<std::int64_t>(wire::get_u64(out, 16 * k + 8));
  }
  return result;
}

Bytes Communicator::allgatherv(std::span<const std::byte> local) const {
  return exchange_via_root(local, [](std::vector<Bytes>& parts) {
    Bytes all;
    for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    return all;
  });
}

std::vector<Bytes> Communicator::allgather_parts(std::span<const std::byte> local) const {
  Bytes packed = exchange_via_root(local, [](std::vector<Bytes>& parts) {
    Bytes all;
    for (auto& p : parts) {
      wire::put_u64(all, p.size());
      all.insert(all.end(), p.begin(), p.end());
    }
    return all;
  });
  std::vector<Bytes> parts;
  std::size_t off = 0;
  for (int r = 0; r < size(); ++r) {
    auto n = static_cast<std::size_t>(wire::get_u64(packed, off));
    off += 8;
    parts.emplace_back(packed.begin() + static_cast<std::ptrdiff_t>(off),
                       packed.begin() + static_cast<std::ptrdiff_t>(off + n));
    off += n;
  }
  return parts;
}

Communicator Communicator::split(int color, int key) const {
  Bytes mine;
  wire::put_u64(mine, static_cast<std::uint64_t>(static_cast<std::int64_t>(color)));
  wire::put_u64(mine, static_cast<std::uint64_t>(static_cast<std::int64_t>(key)));
  Bytes all = allgatherv(mine);

  struct Entry {
    std::int64_t key;
    int rank;
  };
  std::vector<Entry> same;
  for (int r = 0; r < size(); ++r) {
    auto c = static_cast<std::int64_t>(wire::get_u64(all, 16 * static_cast<std::size_t>(r)));
    auto k = static_cast<std::int64_t>(wire::get_u64(all, 16 * static_cast<std::size_t>(r) + 8));
    if (c == color) same.push_back({k, r});
  }
  std::stable_sort(same.begin(), same.end(),
                   [](const Entry& a, const Entry& b) { return a.key < b.key; });

  const std::uint64_t seq = (*split_count_)++;
  Communicator sub;
  sub.endpoint_ = endpoint_;
  sub.split_count_ = std::make_shared<std::uint64_t>(0);
  sub.group_ = SplitMix64::mix(group_ ^ SplitMix64::mix(seq + 0x51ED270B27ULL) ^
                               SplitMix64::mix(static_cast<std::uint64_t>(color) + 0xA24BAED4963EE407ULL));
  for (std::size_t p = 0; p < same.size(); ++p) {
    sub.members_.push_back(world_rank_of(same[p].rank));
    if (same[p].rank == rank_) sub.rank_ = static_cast<int>(p);
  }
  return sub;
}

// ---------------------------------------------------------------------------
// Worlds

std::vector<RankFailure> run_in_process(int nranks, const std::function<void(Communicator&)>& body) {
  if (nranks < 1) throw UsageError("nranks must be at least 1");
  auto world = std::make_shared<detail::InProcessWorld>(nranks);
  std::mutex failures_mutex;
  std::vector<RankFailure> failures;

  auto run_rank = [&](int r) {
    try {
      Communicator comm = make_communicator(std::make_shared<detail::InProcessEndpoint>(world, r));
      body(comm);
    } catch (const detail::WorldAborted&) {
    } catch (const std::exception& e) {
      {
        std::lock_guard lock(failures_mutex);
        failures.push_back({r, e.what()});
      }
      world->abort("rank " + std::to_string(r) + " failed: " + e.what());
    } catch (...) {
      {
        std::lock_guard lock(failures_mutex);
        failures.push_back({r, "unknown exception"});
      }
      world->abort("rank " + std::to_string(r) + " failed");
    }
  };

  std::vector<std::thread> threads;
  for (int r = 1; r < nranks; ++r) threads.emplace_back(run_rank, r);
  run_rank(0);
  for (auto& t : threads) t.join();
  std::sort(failures.begin(), failures.end(),
            [](const RankFailure& a, const RankFailure& b) { return a.rank < b.rank; });
  return failures;
}

void run_in_process_or_throw(int nranks, const std::function<void(Communicator&)>& body) {
  auto failures = run_in_process(nranks, body);
  if (!failures.empty())
    throw Error("rank " + std::to_string(failures.front().rank) + ": " + failures.front().message);
}

Communicator self_world() {
  auto world = std::make_shared<detail::InProcessWorld>(1);
  return make_communicator(std::make_shared<detail::InProcessEndpoint>(world, 0));
}

RendezvousServer::RendezvousServer(const std::string& host, int port, int nranks)
    : host_(host), nranks_(nranks) {
  if (nranks < 1) throw UsageError("nranks must be at least 1");
  listen_fd_ = detail::listen_on(detail::resolve(host, port));
  port_ = detail::bound_port(listen_fd_);
}

RendezvousServer::~RendezvousServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

std::string RendezvousServer::address() const { return host_ + ":" + std::to_string(port_); }

void RendezvousServer::serve(std::chrono::milliseconds timeout) {
  struct Worker {
    int fd;
    std::uint64_t key;
    std::uint32_t port;
    std::string host;
  };
  auto deadline = detail::Clock::now() + timeout;
  std::vector<Worker> workers;
  try {
    while (static_cast<int>(workers.size()) < nranks_) {
      int fd = detail::accept_before(listen_fd_, deadline);
      workers.push_back({fd, 0, 0, {}});
      auto hello = detail::expect_frame(fd, detail::kTagHello);
      workers.back().key = wire::get_u64(hello.payload, 0);
      workers.back().port = wire::get_u32(hello.payload, 8);
      for (std::size_t k = 12; k < hello.payload.size(); ++k)
        workers.back().host.push_back(static_cast<char>(hello.payload[k]));
    }
  } catch (...) {
    for (auto& w : workers) ::close(w.fd);
    throw;
  }
  std::stable_sort(workers.begin(), workers.end(),
                   [](const Worker& a, const Worker& b) { return a.key < b.key; });

  Bytes table;
  for (const auto& w : workers) {
    wire::put_u32(table, w.port);
    wire::put_u32(table, static_cast<std::uint32_t>(w.host.size()));
    for (char ch : w.host) table.push_back(static_cast<std::byte>(ch));
  }
  for (std::size_t r = 0; r < workers.size(); ++r) {
    Bytes msg;
    wire::put_u32(msg, static_cast<std::uint32_t>(r));
    wire::put_u32(msg, static_cast<std::uint32_t>(workers.size()));
    msg.insert(msg.end(), table.begin(), table.end());
    detail::write_frame(workers[r].fd, detail::kTagAssign, msg);
  }
  for (auto& w : workers) ::close(w.fd);
}

Communicator connect_world(const std::string& address, std::uint64_t key,
                           std::chrono::milliseconds timeout) {
  using namespace detail;
  auto deadline = Clock::now() + timeout;
  auto [host, port] = parse_address(address);

  sockaddr_in any{};
  any.sin_family = AF_INET;
  any.sin_addr.s_addr = htonl(INADDR_ANY);
  any.sin_port = 0;
  int listen_fd = listen_on(any);
  std::vector<int> fds;
  int rank = 0;
  try {
    int server = connect_before(resolve(host, port), deadline);
    sockaddr_in local{};
    socklen_t len = sizeof(local);
    ::getsockname(server, reinterpret_cast<sockaddr*>(&local), &len);
    char buf[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &local.sin_addr, buf, sizeof(buf));
    std::string my_host = buf;

    Bytes hello;
    wire::put_u64(hello, key);
    wire::put_u32(hello, static_cast<std::uint32_t>(bound_port(listen_fd)));
    for (char ch : my_host) hello.push_back(static_cast<std::byte>(ch));
    write_frame(server, kTagHello, hello);
    Frame assign = expect_frame(server, kTagAssign);
    ::close(server);

    rank = static_cast<int>(wire::get_u32(assign.payload, 0));
    int size = static_cast<int>(wire::get_u32(assign.payload, 4));
    std::vector<std::pair<std::string, int>> peers;
    std::size_t off = 8;
    for (int r = 0; r < size; ++r) {
      int p = static_cast<int>(wire::get_u32(assign.payload, off));
      auto hl = wire::get_u32(assign.payload, off + 4);
      off += 8;
      std::string h;
      for (std::uint32_t k = 0; k < hl; ++k) h.push_back(static_cast<char>(assign.payload[off + k]));
      off += hl;
      peers.emplace_back(h, p);
    }

    fds.assign(static_cast<std::size_t>(size), -1);
    for (int r = 0; r < rank; ++r) {
      int fd = connect_before(resolve(peers[r].first, peers[r].second), deadline);
      fds[static_cast<std::size_t>(r)] = fd;
      Bytes me;
      wire::put_u32(me, static_cast<std::uint32_t>(rank));
      write_frame(fd, kTagMeshHello, me);
    }
    for (int n = rank + 1; n < size; ++n) {
      int fd = accept_before(listen_fd, deadline);
      Frame who = expect_frame(fd, kTagMeshHello);
      auto r = static_cast<int>(wire::get_u32(who.payload, 0));
      if (r <= rank || r >= size || fds[static_cast<std::size_t>(r)] != -1) {
        ::close(fd);
        throw TransportError("mesh handshake from unexpected rank");
      }
      fds[static_cast<std::size_t>(r)] = fd;
    }
  } catch (...) {
    ::close(listen_fd);
    for (int fd : fds)
      if (fd >= 0) ::close(fd);
    throw;
  }
  ::close(listen_fd);

  Communicator world = make_communicator(std::make_shared<SocketEndpoint>(rank, std::move(fds)));
  world.barrier();
  return world;
}

} // namespace distla
