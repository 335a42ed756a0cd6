#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "elegance/common.hpp"

namespace elegance::cli {

struct KeySpec {
  std::string name;
  std::string default_value;
  std::string doc;
};

// Every key a run can use; unknown keys are rejected wherever they appear.
const std::vector<KeySpec>& config_keys();

class RunConfig {
 public:
  RunConfig();  // defaults only

  static RunConfig from_file(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);  // rejects unknown keys
  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  uint64_t get_seed() const;
  bool get_flag(const std::string& key) const;  // on/off, true/false, 1/0
  std::filesystem::path out_dir() const;        // honors ELEGANCE_OUT_ROOT

  // Sorted key = value lines; the diffable fingerprint input.
  std::string resolved_text() const;
  void write_resolved(const std::filesystem::path& dir) const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& csv);
std::vector<int> parse_hidden(const std::string& csv);

std::string hash_hex(uint64_t h);
uint64_t hash_file(const std::filesystem::path& path);

}  // namespace elegance::cli
