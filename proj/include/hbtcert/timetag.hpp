#pragma once

#include "hbtcert/common.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace hbt {

using Timestamp = std::uint64_t;  // absolute picoseconds

enum class Channel { a = 0, b = 1 };

// Two-channel detector record. Immutable; channels are shared between copies
// and transforms that leave them untouched.
class TimeTagStream {
 public:
  TimeTagStream(std::uint32_t resolution_ps, std::uint64_t duration_ps,
                std::vector<Timestamp> a = {}, std::vector<Timestamp> b = {});

  // sorts each channel if needed; number of out-of-order records is kept
  static TimeTagStream from_unsorted(std::uint32_t resolution_ps, std::uint64_t duration_ps,
                                     std::vector<Timestamp> a, std::vector<Timestamp> b);

  std::uint32_t resolution_ps() const { return resolution_; }
  std::uint64_t duration_ps() const { return duration_; }
  std::span<const Timestamp> channel(Channel c) const {
    return c == Channel::a ? std::span<const Timestamp>(*a_) : std::span<const Timestamp>(*b_);
  }
  std::span<const Timestamp> channel_a() const { return *a_; }
  std::span<const Timestamp> channel_b() const { return *b_; }
  std::size_t size() const { return a_->size() + b_->size(); }
  bool empty() const { return size() == 0; }

  // records that were out of order on load (0 for sorted input)
  std::size_t unsorted_records() const { return unsorted_; }

  // the other channel is shared, not copied
  TimeTagStream with_channel(Channel c, std::vector<Timestamp> tags) const;
  TimeTagStream swapped() const;

  friend bool operator==(const TimeTagStream& x, const TimeTagStream& y);

 private:
  TimeTagStream() = default;
  void validate() const;

  std::uint32_t resolution_ = 1;
  std::uint64_t duration_ = 1;
  std::shared_ptr<const std::vector<Timestamp>> a_;
  std::shared_ptr<const std::vector<Timestamp>> b_;
  std::size_t unsorted_ = 0;
};

struct StreamSummary {
  std::uint64_t count_a = 0;
  std::uint64_t count_b = 0;
  double rate_a = 0;  // Hz
  double rate_b = 0;
  double duration_s = 0;
};

enum class StreamFormat { csv, binary };

StreamFormat format_from_path(const std::filesystem::path& path);

// csv: `channel,timestamp_ps` rows plus a `<stem>.meta.json` sidecar holding
// resolution_ps and duration_ps.  binary: "PTAG" header, 9-byte records, u64
// duration trailer.
TimeTagStream load_stream(const std::filesystem::path& path, StreamFormat format);
void save_stream(const TimeTagStream& s, const std::filesystem::path& path, StreamFormat format);
std::filesystem::path csv_sidecar_path(const std::filesystem::path& csv_path);

TimeTagStream merge_streams(std::span<const TimeTagStream> streams);
TimeTagStream thin_stream(const TimeTagStream& s, double survival, std::uint64_t seed);
TimeTagStream thin_channel(const TimeTagStream& s, Channel c, double survival, std::uint64_t seed);
TimeTagStream inject_poisson(const TimeTagStream& s, double rate_hz, std::uint64_t seed);
TimeTagStream shift_channel(const TimeTagStream& s, Channel c, std::int64_t delay_ps);
StreamSummary stream_stats(const TimeTagStream& s);

// homogeneous Poisson tags at `rate_hz` on [0, duration_ps), snapped down to
// the resolution grid
std::vector<Timestamp> poisson_tags(double rate_hz, std::uint64_t duration_ps,
                                    std::uint32_t resolution_ps, std::uint64_t seed);

}  // namespace hbt
