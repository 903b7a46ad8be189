#include "hullinv/config.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace hullinv::config {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

void KeyValues::set(const std::string& key, const std::string& value) {
  const auto it = index_.find(key);
  if (it != index_.end()) {
    items_[it->second].second = value;
  } else {
    index_[key] = items_.size();
    items_.emplace_back(key, value);
  }
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return items_[it->second].second;
}

const std::string& KeyValues::at(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) throw std::out_of_range("missing key '" + key + "'");
  return items_[it->second].second;
}

double KeyValues::get_double(const std::string& key) const {
  const std::string& v = at(key);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw std::invalid_argument("key '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

long long KeyValues::get_int(const std::string& key) const {
  const std::string& v = at(key);
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw std::invalid_argument("key '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t KeyValues::get_u64(const std::string& key) const {
  const std::string& v = at(key);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw std::invalid_argument("key '" + key + "' expects an unsigned integer, got '" + v + "'");
  }
  return out;
}

KeyValues parse(std::istream& in, const std::string& source) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(source + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw std::runtime_error(source + ":" + std::to_string(lineno) + ": empty key");
    }
    kv.set(key, trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse(in, path.string());
}

void write(std::ostream& out, const KeyValues& kv) {
  for (const auto& [k, v] : kv.items()) out << k << " = " << v << '\n';
}

void write_file(const std::filesystem::path& path, const KeyValues& kv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write(out, kv);
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace hullinv::config
