#pragma once

// Tag stream files.
//
// Binary (little-endian): "QTT1", u32 tag_resolution_ps, then packed records
// {u8 detector_id, u64 time_ps} until end of file.
// CSV: header `detector,time_ps`, detector written as D1..D6 / TRIG. Lines
// starting with '#' are ignored on input.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "qtele/experiment.hpp"

namespace qtele {

struct TagFile {
  std::uint32_t tag_resolution_ps = 0;  ///< 0 when unknown (CSV input)
  std::vector<TimeTag> tags;
};

void write_qtt(std::ostream& os, const std::vector<TimeTag>& tags,
               std::uint32_t tag_resolution_ps);
TagFile read_qtt(std::istream& is);

void write_tag_csv(std::ostream& os, const std::vector<TimeTag>& tags);
TagFile read_tag_csv(std::istream& is);

/// Dispatches on the first four bytes: "QTT1" means binary, anything else CSV.
TagFile read_tags(const std::filesystem::path& path);

}  // namespace qtele
