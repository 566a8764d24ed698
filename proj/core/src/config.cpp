#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "deepsvm/errors.hpp"
#include "deepsvm/format.hpp"
#include "deepsvm/training.hpp"

namespace deepsvm {

namespace {

struct Field {
  const char* name;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

std::size_t parse_count(const std::string& v, const char* key) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(out);
  } catch (const std::exception&) {
    throw ConfigError(std::string("config: ") + key + " expects a non-negative integer, got '" + v + "'");
  }
}

double parse_real(const std::string& v, const char* key) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(std::string("config: ") + key + " expects a number, got '" + v + "'");
  }
}

#define COUNT_FIELD(n)                                                                   \
  Field {                                                                                \
    #n, [](TrainConfig& c, const std::string& v) { c.n = parse_count(v, #n); },         \
        [](const TrainConfig& c) { return std::to_string(c.n); }                         \
  }
#define REAL_FIELD(n)                                                                    \
  Field {                                                                                \
    #n, [](TrainConfig& c, const std::string& v) { c.n = parse_real(v, #n); },          \
        [](const TrainConfig& c) { return format_double(c.n); }                          \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      COUNT_FIELD(hidden_width),     COUNT_FIELD(hidden_depth),    COUNT_FIELD(embedding_width),
      COUNT_FIELD(adam_steps),       REAL_FIELD(learning_rate),    REAL_FIELD(decay_factor),
      COUNT_FIELD(decay_interval),   REAL_FIELD(adam_beta1),       REAL_FIELD(adam_beta2),
      REAL_FIELD(adam_epsilon),      COUNT_FIELD(batch_size),      COUNT_FIELD(rar_interval),
      COUNT_FIELD(interior_size),    COUNT_FIELD(rar_candidates),  COUNT_FIELD(rar_top_k),
      COUNT_FIELD(atm_count),        COUNT_FIELD(boundary_count),  COUNT_FIELD(boundary_augment),
      COUNT_FIELD(lbfgs_memory),     COUNT_FIELD(lbfgs_iterations), REAL_FIELD(lbfgs_tolerance),
      REAL_FIELD(lambda_bound),      REAL_FIELD(lambda_atm),       REAL_FIELD(lambda_max),
      REAL_FIELD(alpha_x),           COUNT_FIELD(seed),            COUNT_FIELD(chunk_size),
      COUNT_FIELD(checkpoint_interval),
  };
  return table;
}

#undef COUNT_FIELD
#undef REAL_FIELD

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig parse_train_config(std::istream& is) {
  std::map<std::string, const Field*> by_name;
  for (const auto& f : fields()) by_name[f.name] = &f;

  TrainConfig config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = by_name.find(key);
    if (it == by_name.end()) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    it->second->set(config, value);
  }
  config.validate();
  return config;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open config file '" + path + "'");
  return parse_train_config(is);
}

void write_train_config(std::ostream& os, const TrainConfig& config) {
  for (const auto& f : fields()) os << f.name << " = " << f.get(config) << '\n';
}

std::string config_hash(const TrainConfig& config) {
  std::ostringstream os;
  write_train_config(os, config);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream hex;
  hex << std::hex;
  hex.width(16);
  hex.fill('0');
  hex << h;
  return hex.str();
}

}  // namespace deepsvm
