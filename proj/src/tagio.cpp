#include "qtele/tagio.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "qtele/errors.hpp"

namespace qtele {

namespace {

constexpr std::array<char, 4> kMagic{'Q', 'T', 'T', '1'};
constexpr std::size_t kRecordBytes = 9;

template <typename T>
void put_le(char* out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
}

template <typename T>
T get_le(const char* in) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(in[i])) << (8 * i);
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

void write_qtt(std::ostream& os, const std::vector<TimeTag>& tags,
               std::uint32_t tag_resolution_ps) {
  char header[8];
  std::copy(kMagic.begin(), kMagic.end(), header);
  put_le<std::uint32_t>(header + 4, tag_resolution_ps);
  os.write(header, sizeof header);

  std::vector<char> buf;
  buf.reserve(kRecordBytes * 4096);
  char rec[kRecordBytes];
  for (const auto& t : tags) {
    if (t.time_ps < 0) throw ValidationError("write_qtt: negative time stamp");
    rec[0] = static_cast<char>(index(t.detector));
    put_le<std::uint64_t>(rec + 1, static_cast<std::uint64_t>(t.time_ps));
    buf.insert(buf.end(), rec, rec + kRecordBytes);
    if (buf.size() >= kRecordBytes * 4096) {
      os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw std::runtime_error("write_qtt: stream write failed");
}

TagFile read_qtt(std::istream& is) {
  char header[8];
  if (!is.read(header, sizeof header) ||
      !std::equal(kMagic.begin(), kMagic.end(), header)) {
    throw ValidationError("read_qtt: missing QTT1 header");
  }
  TagFile out;
  out.tag_resolution_ps = get_le<std::uint32_t>(header + 4);
  char rec[kRecordBytes];
  for (;;) {
    is.read(rec, kRecordBytes);
    const auto got = is.gcount();
    if (got == 0) break;
    if (got != static_cast<std::streamsize>(kRecordBytes)) {
      throw ValidationError("read_qtt: truncated record");
    }
    const auto id = static_cast<unsigned char>(rec[0]);
    if (id >= kDetectorCount) throw ValidationError("read_qtt: bad detector id");
    const auto t = get_le<std::uint64_t>(rec + 1);
    if (t > static_cast<std::uint64_t>(INT64_MAX)) {
      throw ValidationError("read_qtt: time stamp overflows");
    }
    out.tags.push_back({static_cast<DetectorId>(id), static_cast<std::int64_t>(t)});
  }
  return out;
}

void write_tag_csv(std::ostream& os, const std::vector<TimeTag>& tags) {
  os << "detector,time_ps\n";
  for (const auto& t : tags) {
    os << detector_name(t.detector) << ',' << t.time_ps << '\n';
  }
  if (!os) throw std::runtime_error("write_tag_csv: stream write failed");
}

TagFile read_tag_csv(std::istream& is) {
  TagFile out;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    if (!header_seen) {
      if (s != "detector,time_ps") {
        throw ValidationError("read_tag_csv: expected header detector,time_ps");
      }
      header_seen = true;
      continue;
    }
    const auto comma = s.find(',');
    auto bad = [&] {
      return ValidationError("read_tag_csv: malformed line " +
                             std::to_string(line_no));
    };
    if (comma == std::string_view::npos) throw bad();
    const auto det = parse_detector(trim(s.substr(0, comma)));
    const std::string_view ts = trim(s.substr(comma + 1));
    std::int64_t t = 0;
    const auto [p, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), t);
    if (!det || ec != std::errc{} || p != ts.data() + ts.size() || t < 0) {
      throw bad();
    }
    out.tags.push_back({*det, t});
  }
  if (!header_seen) throw ValidationError("read_tag_csv: empty input");
  return out;
}

TagFile read_tags(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open tag file " + path.string());
  char head[4] = {};
  in.read(head, 4);
  const bool binary = in.gcount() == 4 && std::equal(kMagic.begin(), kMagic.end(), head);
  in.clear();
  in.seekg(0);
  return binary ? read_qtt(in) : read_tag_csv(in);
}

}  // namespace qtele
