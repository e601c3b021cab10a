#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace covercall::fec {

// Wire sequence space. Non-filler blocks count 0..65534 and wrap; 0xFFFF is
// the filler sentinel and never appears in the FEC stream.
constexpr std::uint16_t kFillerSeq = 0xFFFF;
constexpr std::uint32_t kSeqSpace = 0xFFFF;  // modulus for non-filler seqs
constexpr std::uint8_t kReservedTask = 0;

struct ReservedTask : std::runtime_error {
  ReservedTask() : std::runtime_error("task 0 is reserved") {}
};

// One unit of the multiplexed downstream stream. payload always holds the
// full block capacity; bytes past `size` are zero (filler excepted, whose
// payload is random end to end).
struct Block {
  std::uint16_t seq = 0;
  std::uint8_t task = 0;
  std::uint8_t size = 0;
  std::vector<std::uint8_t> payload;

  bool is_filler() const { return seq == kFillerSeq; }
  bool operator==(const Block&) const = default;
};

// Wire layout: seq big-endian (2), task (1), size (1), payload (capacity).
std::vector<std::uint8_t> serialize_block(const Block& b);
std::optional<Block> parse_block(std::span<const std::uint8_t> bytes,
                                 std::size_t capacity);

// Transmit side: splits per-task byte streams into capacity-sized blocks,
// serves tasks round-robin by task number, closes every group of
// `group_size` data blocks with one XOR parity block, and emits random
// filler whenever nothing is pending. Parity occupies the slot
// seq % (group_size+1) == group_size; its task/size/payload fields carry the
// XOR of the group's data fields so a lost member is recoverable headers and
// all. Filler does not consume sequence numbers, so groups keep their
// positions no matter how much idle time passes.
class Mux {
 public:
  Mux(std::size_t capacity, unsigned group_size, std::uint64_t start_seq = 0,
      std::uint64_t filler_seed = 0);

  void enqueue(std::uint8_t task, std::span<const std::uint8_t> data);
  Block next_block();

  bool has_pending(std::uint8_t task) const;
  bool idle() const;  // no data queued anywhere
  std::vector<std::uint8_t> pending_tasks() const;
  std::size_t capacity() const { return capacity_; }
  unsigned group_size() const { return group_size_; }

 private:
  struct Chunk {
    std::uint8_t size;
    std::vector<std::uint8_t> bytes;  // padded to capacity
  };

  std::uint16_t wire_seq() const {
    return static_cast<std::uint16_t>(next_seq_ % kSeqSpace);
  }

  std::size_t capacity_;
  unsigned group_size_;
  std::uint64_t next_seq_;  // logical, never wraps
  std::map<std::uint8_t, std::deque<Chunk>> pending_;
  std::uint8_t rr_cursor_ = 0;  // last task served
  // XOR accumulator over the open group's data members
  std::uint8_t group_task_xor_ = 0;
  std::uint8_t group_size_xor_ = 0;
  std::vector<std::uint8_t> group_payload_xor_;
  std::mt19937_64 filler_rng_;
};

// Reassembled byte stream of one task. `complete` is owned by the framing
// layer above (it knows where the end marker sits); `gap` is set here when a
// group covering this task could not be recovered.
struct TaskStream {
  std::vector<std::uint8_t> bytes;
  bool complete = false;
  bool gap = false;
};

struct Delivery {
  std::uint8_t task;
  std::vector<std::uint8_t> bytes;
};

// Receive side. Blocks are slotted into groups by sequence number; once a
// group holds group_size of its group_size+1 members the missing one is
// rebuilt by XOR. Data is released strictly in sequence order, so arrival
// order never changes what the task streams see. Groups left incomplete
// after `window_groups` newer groups have appeared are abandoned: their
// missing positions are skipped and every open task is flagged `gap`.
class Demux {
 public:
  Demux(std::size_t capacity, unsigned group_size, unsigned window_groups = 4,
        std::uint64_t start_seq = 0);

  std::vector<Delivery> ingest(const Block& b);

  // Framing layer hooks: announce a task before its blocks arrive, and mark
  // it finished once its end marker has been parsed. mark_complete refuses
  // (returns false) if the stream already took an unrecoverable loss.
  void expect_task(std::uint8_t task);
  bool mark_complete(std::uint8_t task);

  const TaskStream* stream(std::uint8_t task) const;
  const std::map<std::uint8_t, TaskStream>& streams() const { return streams_; }

  std::uint64_t filler_discarded() const { return filler_discarded_; }
  std::uint64_t duplicates() const { return duplicates_; }
  std::uint64_t recovered_blocks() const { return recovered_blocks_; }
  std::uint64_t unrecoverable_groups() const { return unrecoverable_groups_; }

 private:
  struct Group {
    std::vector<std::optional<Block>> slots;
    unsigned filled = 0;
    bool abandoned = false;
  };

  std::uint64_t to_logical(std::uint16_t wire);
  Group& group_at(std::uint64_t index);
  void try_recover(std::uint64_t group_index);
  void abandon_stale();
  void drain(std::vector<Delivery>& out);
  void deliver_block(const Block& b, std::vector<Delivery>& out);

  std::size_t capacity_;
  unsigned group_size_;
  unsigned window_groups_;
  std::uint64_t anchor_;        // highest logical seq seen + 1 (wire mapping)
  std::uint64_t next_deliver_;  // logical seq of the next in-order release
  std::map<std::uint64_t, Group> groups_;
  std::map<std::uint8_t, TaskStream> streams_;
  std::uint64_t filler_discarded_ = 0;
  std::uint64_t duplicates_ = 0;
  std::uint64_t recovered_blocks_ = 0;
  std::uint64_t unrecoverable_groups_ = 0;
};

}  // namespace covercall::fec
