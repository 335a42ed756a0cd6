#include "elegance/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace elegance::cli {

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"benchmark", "", "path to a benchmark manifest (benchmark.txt)"},
      {"out", "out", "output directory (relative to ELEGANCE_OUT_ROOT when set)"},
      {"seed", "0", "root seed; all randomness derives from it"},
      {"threads", "0", "worker threads; 0 = all cores, 1 = serial"},
      {"episodes_per_task", "40", "demonstration episodes generated per task"},
      {"k_chunk", "10", "action chunk length K"},
      {"gamma", "0.98", "discount over chunk transitions"},
      {"reward_mode", "task_specific", "task_specific | binary_terminal | both (gen-data)"},
      {"policy_steps", "6000", "flow-matching training steps"},
      {"policy_batch", "64", "flow-matching batch size"},
      {"policy_lr", "0.001", "flow-matching learning rate"},
      {"policy_hidden", "64,64", "policy hidden layer widths"},
      {"critic_steps", "4000", "critic training steps"},
      {"critic_batch", "32", "critic batch size"},
      {"critic_lr", "0.001", "critic learning rate"},
      {"critic_hidden", "64,64", "critic hidden layer widths"},
      {"lambda_cal", "5", "calibration regularizer weight"},
      {"rho", "0.005", "soft target update rate"},
      {"m_policy_samples", "4", "policy samples for expectations and the backup max"},
      {"weight_decay", "0.0001", "AdamW weight decay"},
      {"euler_steps", "10", "flow sampler integration steps"},
      {"tau_jiti", "auto:p80", "intervention threshold, a number or auto:pNN"},
      {"window_k", "5", "fluctuation history window"},
      {"n_candidates", "8", "candidates scored per intervention"},
      {"n_rollouts", "50", "evaluation rollouts per task and mode"},
      {"calib_rollouts", "10", "base-policy rollouts per task for threshold calibration"},
      {"modes", "base,full,jiti", "guidance modes to evaluate"},
      {"dataset", "", "dataset file (train commands)"},
      {"policy", "", "policy checkpoint path"},
      {"critic", "", "critic checkpoint path"},
      {"critic_b", "", "second critic checkpoint (ablation, binary_terminal arm)"},
      {"train_tasks", "all", "critic training task filter: all | seen | comma-separated ids"},
      {"episodes", "", "episode log file or directory (replay)"},
      {"split_eval", "off", "evaluate the seen/unseen generalization split"},
      {"save_episodes", "off", "write rollout episode logs during eval"},
      {"log_interval", "50", "training log row spacing"},
  };
  return keys;
}

namespace {

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  size_t b = s.find_last_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected 'key = value' at " + path.string() + ":" +
                        std::to_string(line_no));
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw ConfigError("unknown config key: " + key);
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  try {
    size_t used;
    int v = std::stoi(get(key), &used);
    if (used != get(key).size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not an integer: '" + get(key) + "'");
  }
}

double RunConfig::get_double(const std::string& key) const {
  try {
    size_t used;
    double v = std::stod(get(key), &used);
    if (used != get(key).size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not a number: '" + get(key) + "'");
  }
}

uint64_t RunConfig::get_seed() const {
  try {
    return std::stoull(get("seed"));
  } catch (const std::exception&) {
    throw ConfigError("config key seed is not an unsigned integer: '" + get("seed") + "'");
  }
}

bool RunConfig::get_flag(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("config key " + key + " must be on/off: '" + v + "'");
}

std::filesystem::path RunConfig::out_dir() const {
  std::filesystem::path out = get("out");
  if (out.is_relative()) {
    if (const char* root = std::getenv("ELEGANCE_OUT_ROOT")) out = std::filesystem::path(root) / out;
  }
  return out;
}

std::string RunConfig::resolved_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::write_resolved(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "resolved.cfg", std::ios::binary);
  if (!out) throw ConfigError("cannot write resolved config under " + dir.string());
  out << resolved_text();
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_hidden(const std::string& csv) {
  std::vector<int> out;
  for (const std::string& s : split_list(csv)) {
    try {
      out.push_back(std::stoi(s));
    } catch (const std::exception&) {
      throw ConfigError("bad hidden layer width: '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("hidden layer list is empty");
  return out;
}

std::string hash_hex(uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot hash missing file: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

}  // namespace elegance::cli
