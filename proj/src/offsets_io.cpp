#include "hullinv/offsets_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace hullinv::io {

using hullgeom::ControlPolygon;
using hullgeom::Point;
using hullgeom::SectionOffsets;

ParseError::ParseError(const std::string& source, int line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

struct Block {
  int index = 0;
  std::vector<Point> points;
};

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, const std::string& source, int line) {
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError(source, line, "expected a number, got '" + tok + "'");
  }
  return v;
}

int parse_int(const std::string& tok, const std::string& source, int line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError(source, line, "expected an integer, got '" + tok + "'");
  }
  return v;
}

std::vector<Block> read_blocks(std::istream& in, const std::string& source,
                               const std::string& keyword) {
  std::vector<Block> blocks;
  double scale = 1.0;
  bool seen_header = false;
  int remaining = 0;
  int header_line = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "units") {
      if (seen_header) throw ParseError(source, lineno, "'units' must precede the first block");
      if (tokens.size() != 2 || (tokens[1] != "m" && tokens[1] != "mm")) {
        throw ParseError(source, lineno, "expected 'units m' or 'units mm'");
      }
      scale = tokens[1] == "m" ? 1000.0 : 1.0;
      continue;
    }
    if (remaining == 0) {
      if (tokens[0] != keyword || tokens.size() != 3) {
        throw ParseError(source, lineno,
                         "expected header '" + keyword + " <index> <point-count>'");
      }
      const int index = parse_int(tokens[1], source, lineno);
      const int count = parse_int(tokens[2], source, lineno);
      if (count <= 0) throw ParseError(source, lineno, "point count must be positive");
      blocks.push_back(Block{index, {}});
      blocks.back().points.reserve(static_cast<std::size_t>(count));
      remaining = count;
      header_line = lineno;
      seen_header = true;
      continue;
    }
    if (tokens.size() != 2) {
      throw ParseError(source, lineno, "expected a 'y z' pair");
    }
    blocks.back().points.push_back(Point{parse_double(tokens[0], source, lineno) * scale,
                                         parse_double(tokens[1], source, lineno) * scale});
    --remaining;
  }
  if (remaining != 0) {
    throw ParseError(source, header_line,
                     "block ends early; " + std::to_string(remaining) + " points missing");
  }
  return blocks;
}

void write_block(std::ostream& out, const std::string& keyword, int index,
                 const std::vector<Point>& points) {
  out << keyword << ' ' << index << ' ' << points.size() << '\n';
  char buf[64];
  for (const Point& p : points) {
    // Shortest representation that round-trips exactly.
    auto r1 = std::to_chars(buf, buf + sizeof(buf), p.y);
    *r1.ptr++ = ' ';
    auto r2 = std::to_chars(r1.ptr, buf + sizeof(buf), p.z);
    out.write(buf, r2.ptr - buf);
    out << '\n';
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<SectionOffsets> read_offsets(std::istream& in, const std::string& source) {
  std::vector<SectionOffsets> out;
  for (auto& b : read_blocks(in, source, "section")) {
    out.push_back(SectionOffsets{b.index, std::move(b.points)});
  }
  return out;
}

std::vector<SectionOffsets> read_offsets_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_offsets(in, path.string());
}

void write_offsets(std::ostream& out, const std::vector<SectionOffsets>& sections) {
  for (const auto& s : sections) write_block(out, "section", s.section_index, s.points);
}

void write_offsets_file(const std::filesystem::path& path,
                        const std::vector<SectionOffsets>& sections) {
  auto out = open_out(path);
  write_offsets(out, sections);
}

std::vector<ControlPolygon> read_controls(std::istream& in, const std::string& source) {
  std::vector<ControlPolygon> out;
  for (auto& b : read_blocks(in, source, "controls")) {
    out.push_back(ControlPolygon{b.index, std::move(b.points)});
  }
  return out;
}

std::vector<ControlPolygon> read_controls_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_controls(in, path.string());
}

void write_controls(std::ostream& out, const std::vector<ControlPolygon>& polygons) {
  for (const auto& q : polygons) write_block(out, "controls", q.section_index, q.controls);
}

void write_controls_file(const std::filesystem::path& path,
                         const std::vector<ControlPolygon>& polygons) {
  auto out = open_out(path);
  write_controls(out, polygons);
}

}  // namespace hullinv::io
