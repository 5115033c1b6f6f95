#include "hbtcert/timetag.hpp"

#include "hbtcert/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hbt {

namespace fs = std::filesystem;

TimeTagStream::TimeTagStream(std::uint32_t resolution_ps, std::uint64_t duration_ps,
                             std::vector<Timestamp> a, std::vector<Timestamp> b)
    : resolution_(resolution_ps),
      duration_(duration_ps),
      a_(std::make_shared<const std::vector<Timestamp>>(std::move(a))),
      b_(std::make_shared<const std::vector<Timestamp>>(std::move(b))) {
  validate();
}

void TimeTagStream::validate() const {
  if (resolution_ == 0) throw ValidationError("resolution_ps must be positive");
  if (duration_ == 0) throw ValidationError("duration_ps must be positive");
  for (const auto* ch : {a_.get(), b_.get()}) {
    if (!std::is_sorted(ch->begin(), ch->end()))
      throw ValidationError("channel timestamps must be non-decreasing");
    if (!ch->empty() && ch->back() >= duration_)
      throw ValidationError("timestamp " + std::to_string(ch->back()) + " ps >= duration " +
                            std::to_string(duration_) + " ps");
  }
}

static std::size_t count_descents(const std::vector<Timestamp>& v) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < v.size(); ++i) n += v[i] < v[i - 1];
  return n;
}

TimeTagStream TimeTagStream::from_unsorted(std::uint32_t resolution_ps, std::uint64_t duration_ps,
                                           std::vector<Timestamp> a, std::vector<Timestamp> b) {
  std::size_t bad = count_descents(a) + count_descents(b);
  if (bad) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
  }
  TimeTagStream s(resolution_ps, duration_ps, std::move(a), std::move(b));
  s.unsorted_ = bad;
  return s;
}

TimeTagStream TimeTagStream::with_channel(Channel c, std::vector<Timestamp> tags) const {
  TimeTagStream s;
  s.resolution_ = resolution_;
  s.duration_ = duration_;
  auto p = std::make_shared<const std::vector<Timestamp>>(std::move(tags));
  s.a_ = c == Channel::a ? p : a_;
  s.b_ = c == Channel::b ? p : b_;
  s.validate();
  return s;
}

TimeTagStream TimeTagStream::swapped() const {
  TimeTagStream s = *this;
  std::swap(s.a_, s.b_);
  return s;
}

bool operator==(const TimeTagStream& x, const TimeTagStream& y) {
  return x.resolution_ == y.resolution_ && x.duration_ == y.duration_ && *x.a_ == *y.a_ &&
         *x.b_ == *y.b_;
}

// ---------------------------------------------------------------- file io

StreamFormat format_from_path(const fs::path& path) {
  auto ext = path.extension().string();
  if (ext == ".csv") return StreamFormat::csv;
  if (ext == ".ptag" || ext == ".bin") return StreamFormat::binary;
  throw ValidationError("cannot infer stream format from extension '" + ext +
                        "' (use .csv, .ptag or .bin)");
}

fs::path csv_sidecar_path(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

static std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

static TimeTagStream load_csv(const fs::path& path) {
  auto meta_path = csv_sidecar_path(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(slurp(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_path.string() + ": " + e.what(), 0);
  }
  if (!meta.contains("resolution_ps") || !meta.contains("duration_ps") ||
      !meta["resolution_ps"].is_number_unsigned() || !meta["duration_ps"].is_number_unsigned())
    throw ValidationError(meta_path.string() +
                          ": needs unsigned integer resolution_ps and duration_ps");
  auto res = meta["resolution_ps"].get<std::uint64_t>();
  auto dur = meta["duration_ps"].get<std::uint64_t>();
  if (res == 0 || res > UINT32_MAX) throw ValidationError("resolution_ps out of range");

  std::string text = slurp(path);
  std::vector<Timestamp> ch[2];
  std::size_t line = 0;
  std::size_t pos = 0;
  bool header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view row(text.data() + pos, end - pos);
    pos = end + 1;
    ++line;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (!header) {
      if (row != "channel,timestamp_ps")
        throw ParseError(path.string() + ": expected header 'channel,timestamp_ps'", line);
      header = true;
      continue;
    }
    if (row.empty()) continue;
    auto comma = row.find(',');
    if (comma != 1 || (row[0] != '0' && row[0] != '1'))
      throw ParseError(path.string() + ": bad record '" + std::string(row) + "'", line);
    Timestamp t = 0;
    auto first = row.data() + 2, last = row.data() + row.size();
    auto [p, ec] = std::from_chars(first, last, t);
    if (ec != std::errc() || p != last || first == last)
      throw ParseError(path.string() + ": bad timestamp '" + std::string(row) + "'", line);
    if (t >= dur)
      throw ValidationError(path.string() + ": timestamp " + std::to_string(t) +
                            " >= duration at line " + std::to_string(line));
    ch[row[0] - '0'].push_back(t);
  }
  if (!header) throw ParseError(path.string() + ": missing header", 1);
  return TimeTagStream::from_unsorted(static_cast<std::uint32_t>(res), dur, std::move(ch[0]),
                                      std::move(ch[1]));
}

namespace {
constexpr char kMagic[4] = {'P', 'T', 'A', 'G'};
constexpr std::size_t kHeader = 16;
constexpr std::size_t kRecord = 9;

template <class T>
T read_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}
template <class T>
void write_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
}  // namespace

static TimeTagStream load_binary(const fs::path& path) {
  std::string raw = slurp(path);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < kHeader + 8) throw ParseError(path.string() + ": truncated header", raw.size());
  if (std::memcmp(p, kMagic, 4) != 0) throw ParseError(path.string() + ": bad magic", 0);
  if (read_le<std::uint32_t>(p + 4) != 1) throw ParseError(path.string() + ": unsupported version", 4);
  auto res = read_le<std::uint32_t>(p + 8);
  std::size_t body = raw.size() - kHeader - 8;
  if (body % kRecord != 0)
    throw ParseError(path.string() + ": trailing partial record", kHeader + body / kRecord * kRecord);
  auto dur = read_le<std::uint64_t>(p + raw.size() - 8);
  std::size_t n = body / kRecord;
  std::vector<Timestamp> ch[2];
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t off = kHeader + i * kRecord;
    unsigned c = p[off];
    if (c > 1) throw ParseError(path.string() + ": channel byte must be 0 or 1", off);
    auto t = read_le<std::uint64_t>(p + off + 1);
    if (t >= dur)
      throw ValidationError(path.string() + ": timestamp " + std::to_string(t) +
                            " >= duration at offset " + std::to_string(off));
    ch[c].push_back(t);
  }
  return TimeTagStream::from_unsorted(res, dur, std::move(ch[0]), std::move(ch[1]));
}

TimeTagStream load_stream(const fs::path& path, StreamFormat format) {
  return format == StreamFormat::csv ? load_csv(path) : load_binary(path);
}

// records in time order; ties go to channel a first
template <class Emit>
static void for_each_time_ordered(const TimeTagStream& s, Emit emit) {
  auto a = s.channel_a();
  auto b = s.channel_b();
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i] <= b[j]))
      emit(0, a[i++]);
    else
      emit(1, b[j++]);
  }
}

static void write_file(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("write failed for " + path.string());
}

void save_stream(const TimeTagStream& s, const fs::path& path, StreamFormat format) {
  std::string out;
  if (format == StreamFormat::csv) {
    out.reserve(s.size() * 16 + 32);
    out += "channel,timestamp_ps\n";
    char buf[32];
    for_each_time_ordered(s, [&](int c, Timestamp t) {
      out.push_back(static_cast<char>('0' + c));
      out.push_back(',');
      auto r = std::to_chars(buf, buf + sizeof buf, t);
      out.append(buf, r.ptr);
      out.push_back('\n');
    });
    write_file(path, out);
    nlohmann::ordered_json meta;
    meta["resolution_ps"] = s.resolution_ps();
    meta["duration_ps"] = s.duration_ps();
    write_file(csv_sidecar_path(path), meta.dump(2) + "\n");
  } else {
    out.reserve(kHeader + s.size() * kRecord + 8);
    out.append(kMagic, 4);
    write_le<std::uint32_t>(out, 1);
    write_le<std::uint32_t>(out, s.resolution_ps());
    write_le<std::uint32_t>(out, 0);
    for_each_time_ordered(s, [&](int c, Timestamp t) {
      out.push_back(static_cast<char>(c));
      write_le<std::uint64_t>(out, t);
    });
    write_le<std::uint64_t>(out, s.duration_ps());
    write_file(path, out);
  }
}

// ---------------------------------------------------------------- transforms

TimeTagStream merge_streams(std::span<const TimeTagStream> streams) {
  if (streams.empty()) throw ValidationError("merge_streams: empty list");
  const auto res = streams[0].resolution_ps();
  std::uint64_t dur = streams[0].duration_ps();
  for (const auto& s : streams) {
    if (s.resolution_ps() != res) throw ValidationError("merge_streams: resolution mismatch");
    dur = std::min(dur, s.duration_ps());
  }
  std::vector<Timestamp> out[2];
  for (int c = 0; c < 2; ++c) {
    for (const auto& s : streams) {
      auto in = s.channel(static_cast<Channel>(c));
      auto end = std::lower_bound(in.begin(), in.end(), dur);
      std::vector<Timestamp> next;
      next.reserve(out[c].size() + static_cast<std::size_t>(end - in.begin()));
      std::merge(out[c].begin(), out[c].end(), in.begin(), end, std::back_inserter(next));
      out[c].swap(next);
    }
  }
  return TimeTagStream(res, dur, std::move(out[0]), std::move(out[1]));
}

static std::vector<Timestamp> thin_tags(std::span<const Timestamp> in, double survival, Rng& g) {
  std::vector<Timestamp> out;
  out.reserve(static_cast<std::size_t>(static_cast<double>(in.size()) * survival * 1.01) + 16);
  for (auto t : in)
    if (uniform01(g) < survival) out.push_back(t);
  return out;
}

TimeTagStream thin_channel(const TimeTagStream& s, Channel c, double survival, std::uint64_t seed) {
  if (!(survival > 0.0 && survival <= 1.0))
    throw ValidationError("survival must lie in (0, 1]");
  if (survival == 1.0) return s;
  auto g = make_rng(seed, Purpose::thin, static_cast<std::uint64_t>(c));
  return s.with_channel(c, thin_tags(s.channel(c), survival, g));
}

TimeTagStream thin_stream(const TimeTagStream& s, double survival, std::uint64_t seed) {
  auto t = thin_channel(s, Channel::a, survival, seed);
  return thin_channel(t, Channel::b, survival, seed);
}

std::vector<Timestamp> poisson_tags(double rate_hz, std::uint64_t duration_ps,
                                    std::uint32_t resolution_ps, std::uint64_t seed) {
  if (!(rate_hz > 0)) throw ValidationError("rate_hz must be positive");
  auto g = make_rng(seed, Purpose::inject);
  std::exponential_distribution<double> gap(rate_hz * 1e-12);  // per ps
  std::vector<Timestamp> out;
  out.reserve(static_cast<std::size_t>(rate_hz * 1e-12 * static_cast<double>(duration_ps) * 1.05) + 16);
  // integer ps plus fractional carry keeps precision over long records
  std::uint64_t t = 0;
  double frac = 0;
  for (;;) {
    double step = frac + gap(g);
    if (step >= static_cast<double>(duration_ps - t)) break;
    double whole = std::floor(step);
    t += static_cast<std::uint64_t>(whole);
    frac = step - whole;
    out.push_back(t - t % resolution_ps);
  }
  return out;
}

TimeTagStream inject_poisson(const TimeTagStream& s, double rate_hz, std::uint64_t seed) {
  if (!(rate_hz > 0)) throw ValidationError("inject_poisson: rate_hz must be positive");
  std::vector<Timestamp> out[2];
  for (int c = 0; c < 2; ++c) {
    auto noise = poisson_tags(rate_hz / 2, s.duration_ps(), s.resolution_ps(),
                              derive_seed(seed, Purpose::inject, static_cast<std::uint64_t>(c)));
    auto in = s.channel(static_cast<Channel>(c));
    out[c].reserve(in.size() + noise.size());
    std::merge(in.begin(), in.end(), noise.begin(), noise.end(), std::back_inserter(out[c]));
  }
  return TimeTagStream(s.resolution_ps(), s.duration_ps(), std::move(out[0]), std::move(out[1]));
}

TimeTagStream shift_channel(const TimeTagStream& s, Channel c, std::int64_t delay_ps) {
  if (delay_ps == 0) return s;
  auto in = s.channel(c);
  const auto dur = s.duration_ps();
  std::vector<Timestamp> out;
  out.reserve(in.size());
  if (delay_ps > 0) {
    auto d = static_cast<std::uint64_t>(delay_ps);
    for (auto t : in) {
      if (d >= dur || t >= dur - d) break;
      out.push_back(t + d);
    }
  } else {
    auto d = static_cast<std::uint64_t>(-delay_ps);
    for (auto t : in)
      if (t >= d) out.push_back(t - d);
  }
  return s.with_channel(c, std::move(out));
}

StreamSummary stream_stats(const TimeTagStream& s) {
  StreamSummary r;
  r.count_a = s.channel_a().size();
  r.count_b = s.channel_b().size();
  r.duration_s = static_cast<double>(s.duration_ps()) * 1e-12;
  r.rate_a = static_cast<double>(r.count_a) / r.duration_s;
  r.rate_b = static_cast<double>(r.count_b) / r.duration_s;
  return r;
}

}  // namespace hbt
