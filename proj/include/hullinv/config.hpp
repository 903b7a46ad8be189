#pragma once

// key = value text files. '#' starts a comment; blank lines are ignored.
// Keys keep their insertion order when written back.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hullinv::config {

class KeyValues {
 public:
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return index_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  const std::string& at(const std::string& key) const;

  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
  std::map<std::string, std::size_t> index_;
};

// Throws std::runtime_error naming source and line on malformed input.
KeyValues parse(std::istream& in, const std::string& source = "<stream>");
KeyValues read_file(const std::filesystem::path& path);
void write(std::ostream& out, const KeyValues& kv);
void write_file(const std::filesystem::path& path, const KeyValues& kv);

// Formats a double so that parsing it back yields the same value.
std::string format_double(double v);

}  // namespace hullinv::config
