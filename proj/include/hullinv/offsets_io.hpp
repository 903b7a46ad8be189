#pragma once

// Plain-text section files.
//
//   # comment
//   units mm            (optional, "m" or "mm"; metres are converted on read)
//   section 0 50
//   1234.5 0
//   ...
//
// Control-polygon files use the header keyword `controls` instead of
// `section`. Values are always written in millimetres.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "hullinv/hullgeom.hpp"

namespace hullinv::io {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, int line, const std::string& what);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

std::vector<hullgeom::SectionOffsets> read_offsets(std::istream& in,
                                                   const std::string& source = "<stream>");
std::vector<hullgeom::SectionOffsets> read_offsets_file(const std::filesystem::path& path);
void write_offsets(std::ostream& out, const std::vector<hullgeom::SectionOffsets>& sections);
void write_offsets_file(const std::filesystem::path& path,
                        const std::vector<hullgeom::SectionOffsets>& sections);

std::vector<hullgeom::ControlPolygon> read_controls(std::istream& in,
                                                    const std::string& source = "<stream>");
std::vector<hullgeom::ControlPolygon> read_controls_file(const std::filesystem::path& path);
void write_controls(std::ostream& out, const std::vector<hullgeom::ControlPolygon>& polygons);
void write_controls_file(const std::filesystem::path& path,
                         const std::vector<hullgeom::ControlPolygon>& polygons);

}  // namespace hullinv::io
