#include "srdrm/train_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "srdrm/errors.hpp"

namespace srdrm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename V>
V parse_number(const std::string& key, const std::string& value) {
  V out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(fmt::format("config: '{}' has invalid value '{}'", key, value));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(fmt::format("config: '{}' expects true or false, got '{}'", key, value));
}

}  // namespace

std::string mode_name(TrainMode mode) { return mode == TrainMode::gen ? "gen" : "gan"; }

TrainMode parse_mode(const std::string& name) {
  if (name == "gen") return TrainMode::gen;
  if (name == "gan") return TrainMode::gan;
  throw ConfigError(fmt::format("unknown training mode '{}' (expected gen or gan)", name));
}

int TrainConfig::scale_exp() const {
  switch (scale) {
    case 2: return 1;
    case 4: return 2;
    case 8: return 3;
    default: throw ConfigError(fmt::format("scale {} not in {{2, 4, 8}}", scale));
  }
}

void TrainConfig::validate() const {
  scale_exp();
  if (epochs < 1) throw ConfigError(fmt::format("epochs must be >= 1, got {}", epochs));
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(adam.learning_rate > 0.0) || !std::isfinite(adam.learning_rate)) {
    throw ConfigError(fmt::format("learning_rate must be > 0, got {}", adam.learning_rate));
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError(fmt::format("adam betas must be in [0, 1), got {} and {}", adam.beta1,
                                  adam.beta2));
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("adam_epsilon must be > 0");
  if (checkpoint_every < 1) {
    throw ConfigError(fmt::format("checkpoint_every must be >= 1, got {}", checkpoint_every));
  }
  if (max_steps && *max_steps == 0) throw ConfigError("max_steps must be >= 1");
  try {
    weights.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
}

TrainConfig parse_train_config(const std::string& text, const std::filesystem::path& base_dir) {
  TrainConfig c;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("config line {}: expected 'key = value'", lineno));
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw ConfigError(fmt::format("config line {}: duplicate key '{}'", lineno, key));
    }
    if (key == "mode") {
      c.mode = parse_mode(value);
    } else if (key == "scale") {
      c.scale = parse_number<int>(key, value);
    } else if (key == "epochs") {
      c.epochs = parse_number<int>(key, value);
    } else if (key == "batch_size") {
      c.batch_size = parse_number<std::size_t>(key, value);
    } else if (key == "learning_rate") {
      c.adam.learning_rate = parse_number<double>(key, value);
    } else if (key == "adam_beta1") {
      c.adam.beta1 = parse_number<double>(key, value);
    } else if (key == "adam_beta2") {
      c.adam.beta2 = parse_number<double>(key, value);
    } else if (key == "adam_epsilon") {
      c.adam.epsilon = parse_number<double>(key, value);
    } else if (key == "weight_content") {
      c.weights.content = parse_number<double>(key, value);
    } else if (key == "weight_perceptual") {
      c.weights.perceptual = parse_number<double>(key, value);
    } else if (key == "weight_l2") {
      c.weights.l2 = parse_number<double>(key, value);
    } else if (key == "weight_adversarial") {
      c.weights.adversarial = parse_number<double>(key, value);
    } else if (key == "seed") {
      c.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "checkpoint_every") {
      c.checkpoint_every = parse_number<int>(key, value);
    } else if (key == "tiny_profile") {
      c.tiny_profile = parse_bool(key, value);
    } else if (key == "max_steps") {
      if (value != "none") c.max_steps = parse_number<std::size_t>(key, value);
    } else if (key == "freeze_discriminator") {
      c.freeze_discriminator = parse_bool(key, value);
    } else if (key == "feature_extractor") {
      if (value != "default") {
        std::filesystem::path p(value);
        c.feature_extractor = p.is_absolute() ? p : base_dir / p;
      }
    } else {
      throw ConfigError(fmt::format("config line {}: unknown key '{}'", lineno, key));
    }
  }
  c.validate();
  return c;
}

TrainConfig read_train_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(fmt::format("cannot read config '{}'", path.string()));
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_train_config(ss.str(), path.parent_path());
}

std::string format_train_config(const TrainConfig& c) {
  std::string out;
  out += fmt::format("mode = {}\n", mode_name(c.mode));
  out += fmt::format("scale = {}\n", c.scale);
  out += fmt::format("epochs = {}\n", c.epochs);
  out += fmt::format("batch_size = {}\n", c.batch_size);
  out += fmt::format("learning_rate = {}\n", c.adam.learning_rate);
  out += fmt::format("adam_beta1 = {}\n", c.adam.beta1);
  out += fmt::format("adam_beta2 = {}\n", c.adam.beta2);
  out += fmt::format("adam_epsilon = {}\n", c.adam.epsilon);
  out += fmt::format("weight_content = {}\n", c.weights.content);
  out += fmt::format("weight_perceptual = {}\n", c.weights.perceptual);
  out += fmt::format("weight_l2 = {}\n", c.weights.l2);
  out += fmt::format("weight_adversarial = {}\n", c.weights.adversarial);
  out += fmt::format("seed = {}\n", c.seed);
  out += fmt::format("checkpoint_every = {}\n", c.checkpoint_every);
  out += fmt::format("tiny_profile = {}\n", c.tiny_profile);
  out += fmt::format("max_steps = {}\n", c.max_steps ? fmt::format("{}", *c.max_steps) : "none");
  out += fmt::format("freeze_discriminator = {}\n", c.freeze_discriminator);
  out += fmt::format("feature_extractor = {}\n",
                     c.feature_extractor ? c.feature_extractor->string() : "default");
  return out;
}

}  // namespace srdrm
