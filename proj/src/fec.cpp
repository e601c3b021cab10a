#include "covercall/fec.hpp"

#include <algorithm>
#include <cassert>

namespace covercall::fec {

std::vector<std::uint8_t> serialize_block(const Block& b) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + b.payload.size());
  out.push_back(static_cast<std::uint8_t>(b.seq >> 8));
  out.push_back(static_cast<std::uint8_t>(b.seq & 0xff));
  out.push_back(b.task);
  out.push_back(b.size);
  out.insert(out.end(), b.payload.begin(), b.payload.end());
  return out;
}

std::optional<Block> parse_block(std::span<const std::uint8_t> bytes,
                                 std::size_t capacity) {
  if (bytes.size() != 4 + capacity) return std::nullopt;
  Block b;
  b.seq = static_cast<std::uint16_t>((bytes[0] << 8) | bytes[1]);
  b.task = bytes[2];
  b.size = bytes[3];
  b.payload.assign(bytes.begin() + 4, bytes.end());
  return b;
}

Mux::Mux(std::size_t capacity, unsigned group_size, std::uint64_t start_seq,
         std::uint64_t filler_seed)
    : capacity_(capacity),
      group_size_(group_size),
      next_seq_(start_seq),
      group_payload_xor_(capacity, 0),
      filler_rng_(filler_seed) {
  if (capacity_ == 0 || capacity_ > 255)
    throw std::invalid_argument("block capacity must be in 1..255");
  if (group_size_ == 0) throw std::invalid_argument("group size must be >= 1");
}

void Mux::enqueue(std::uint8_t task, std::span<const std::uint8_t> data) {
  if (task == kReservedTask) throw ReservedTask();
  auto& queue = pending_[task];
  if (data.empty()) {
    queue.push_back(Chunk{0, std::vector<std::uint8_t>(capacity_, 0)});
    return;
  }
  for (std::size_t off = 0; off < data.size(); off += capacity_) {
    const std::size_t n = std::min(capacity_, data.size() - off);
    Chunk c{static_cast<std::uint8_t>(n),
            std::vector<std::uint8_t>(capacity_, 0)};
    std::copy_n(data.begin() + off, n, c.bytes.begin());
    queue.push_back(std::move(c));
  }
}

bool Mux::has_pending(std::uint8_t task) const {
  auto it = pending_.find(task);
  return it != pending_.end() && !it->second.empty();
}

bool Mux::idle() const {
  for (const auto& [task, queue] : pending_)
    if (!queue.empty()) return false;
  return true;
}

std::vector<std::uint8_t> Mux::pending_tasks() const {
  std::vector<std::uint8_t> out;
  for (const auto& [task, queue] : pending_)
    if (!queue.empty()) out.push_back(task);
  return out;
}

Block Mux::next_block() {
  const unsigned pos =
      static_cast<unsigned>(next_seq_ % (group_size_ + 1));
  if (pos == group_size_) {
    // Close the group: the parity block's header fields are themselves the
    // XOR of the members' headers.
    Block parity;
    parity.seq = wire_seq();
    parity.task = group_task_xor_;
    parity.size = group_size_xor_;
    parity.payload = group_payload_xor_;
    group_task_xor_ = 0;
    group_size_xor_ = 0;
    std::fill(group_payload_xor_.begin(), group_payload_xor_.end(), 0);
    ++next_seq_;
    return parity;
  }

  // Pick the next pending task after the cursor, wrapping. pending_ is a
  // std::map, so iteration is already in ascending task order.
  bool found = false;
  std::uint8_t task = 0;
  for (const auto& [t, queue] : pending_) {
    if (!queue.empty() && t > rr_cursor_) {
      task = t;
      found = true;
      break;
    }
  }
  if (!found) {
    for (const auto& [t, queue] : pending_) {
      if (!queue.empty()) {
        task = t;
        found = true;
        break;
      }
    }
  }

  if (!found) {
    Block filler;
    filler.seq = kFillerSeq;
    filler.task = kReservedTask;
    filler.size = static_cast<std::uint8_t>(capacity_);
    filler.payload.resize(capacity_);
    for (auto& byte : filler.payload)
      byte = static_cast<std::uint8_t>(filler_rng_());
    return filler;
  }

  auto& queue = pending_[task];
  Chunk chunk = std::move(queue.front());
  queue.pop_front();
  rr_cursor_ = task;

  Block b;
  b.seq = wire_seq();
  b.task = task;
  b.size = chunk.size;
  b.payload = std::move(chunk.bytes);

  group_task_xor_ ^= b.task;
  group_size_xor_ ^= b.size;
  for (std::size_t i = 0; i < capacity_; ++i)
    group_payload_xor_[i] ^= b.payload[i];

  ++next_seq_;
  return b;
}

Demux::Demux(std::size_t capacity, unsigned group_size, unsigned window_groups,
             std::uint64_t start_seq)
    : capacity_(capacity),
      group_size_(group_size),
      window_groups_(window_groups),
      anchor_(start_seq),
      next_deliver_(start_seq) {
  if (capacity_ == 0 || capacity_ > 255)
    throw std::invalid_argument("block capacity must be in 1..255");
  if (group_size_ == 0) throw std::invalid_argument("group size must be >= 1");
}

std::uint64_t Demux::to_logical(std::uint16_t wire) {
  const std::uint32_t base_wire =
      static_cast<std::uint32_t>(anchor_ % kSeqSpace);
  const std::uint32_t delta =
      (static_cast<std::uint32_t>(wire) + kSeqSpace - base_wire) % kSeqSpace;
  std::uint64_t logical;
  if (delta < kSeqSpace / 2) {
    logical = anchor_ + delta;
  } else {
    const std::uint64_t back = kSeqSpace - delta;
    logical = anchor_ >= back ? anchor_ - back : anchor_ + delta;
  }
  anchor_ = std::max(anchor_, logical + 1);
  return logical;
}

Demux::Group& Demux::group_at(std::uint64_t index) {
  auto [it, inserted] = groups_.try_emplace(index);
  if (inserted) it->second.slots.resize(group_size_ + 1);
  return it->second;
}

void Demux::expect_task(std::uint8_t task) { streams_.try_emplace(task); }

bool Demux::mark_complete(std::uint8_t task) {
  auto& s = streams_[task];
  if (s.gap) return false;
  s.complete = true;
  return true;
}

const TaskStream* Demux::stream(std::uint8_t task) const {
  auto it = streams_.find(task);
  return it == streams_.end() ? nullptr : &it->second;
}

void Demux::deliver_block(const Block& b, std::vector<Delivery>& out) {
  auto& s = streams_[b.task];
  const std::size_t n = std::min<std::size_t>(b.size, b.payload.size());
  s.bytes.insert(s.bytes.end(), b.payload.begin(), b.payload.begin() + n);
  out.push_back(Delivery{
      b.task, std::vector<std::uint8_t>(b.payload.begin(),
                                        b.payload.begin() + n)});
}

void Demux::try_recover(std::uint64_t group_index) {
  auto it = groups_.find(group_index);
  if (it == groups_.end()) return;
  Group& g = it->second;
  if (g.abandoned || g.filled != group_size_) return;

  std::size_t missing = group_size_ + 1;
  for (std::size_t i = 0; i <= group_size_; ++i) {
    if (!g.slots[i]) {
      missing = i;
      break;
    }
  }
  if (missing > group_size_) return;  // nothing absent after all

  Block rebuilt;
  rebuilt.seq = static_cast<std::uint16_t>(
      (group_index * (group_size_ + 1) + missing) % kSeqSpace);
  rebuilt.payload.assign(capacity_, 0);
  for (const auto& slot : g.slots) {
    if (!slot) continue;
    rebuilt.task ^= slot->task;
    rebuilt.size ^= slot->size;
    for (std::size_t i = 0; i < capacity_ && i < slot->payload.size(); ++i)
      rebuilt.payload[i] ^= slot->payload[i];
  }
  if (missing < group_size_) ++recovered_blocks_;
  g.slots[missing] = std::move(rebuilt);
  g.filled++;
}

void Demux::abandon_stale() {
  if (groups_.empty()) return;
  const std::uint64_t max_group = groups_.rbegin()->first;
  if (max_group <= window_groups_) return;
  const std::uint64_t cutoff = max_group - window_groups_;
  for (std::uint64_t idx = next_deliver_ / (group_size_ + 1); idx < cutoff;
       ++idx) {
    Group& g = group_at(idx);
    if (g.abandoned || g.filled == group_size_ + 1) continue;
    g.abandoned = true;
    ++unrecoverable_groups_;
    // Missing members cannot be attributed; flag every stream still open.
    for (auto& [task, s] : streams_) {
      if (!s.complete) s.gap = true;
    }
  }
}

void Demux::drain(std::vector<Delivery>& out) {
  while (true) {
    const std::uint64_t idx = next_deliver_ / (group_size_ + 1);
    const std::size_t slot = next_deliver_ % (group_size_ + 1);
    auto it = groups_.find(idx);
    if (it == groups_.end()) break;
    Group& g = it->second;
    if (g.slots[slot]) {
      if (slot < group_size_) deliver_block(*g.slots[slot], out);
      ++next_deliver_;
    } else if (g.abandoned) {
      ++next_deliver_;
    } else {
      break;
    }
    if (next_deliver_ % (group_size_ + 1) == 0) {
      groups_.erase(groups_.begin(), groups_.upper_bound(idx));
    }
  }
}

std::vector<Delivery> Demux::ingest(const Block& b) {
  std::vector<Delivery> out;
  if (b.is_filler()) {
    ++filler_discarded_;
    return out;
  }
  const std::uint64_t logical = to_logical(b.seq);
  if (logical < next_deliver_) {
    ++duplicates_;  // position already delivered or written off
    return out;
  }
  const std::uint64_t group_index = logical / (group_size_ + 1);
  const std::size_t slot = logical % (group_size_ + 1);
  Group& g = group_at(group_index);
  if (g.slots[slot]) {
    ++duplicates_;
    return out;
  }
  Block stored = b;
  stored.payload.resize(capacity_, 0);
  g.slots[slot] = std::move(stored);
  g.filled++;

  try_recover(group_index);
  abandon_stale();
  drain(out);
  return out;
}

}  // namespace covercall::fec
