#include "mmhash/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mmhash/binio.hpp"
#include "mmhash/errors.hpp"

namespace mmhash {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::concat_only: return "concat_only";
    case Variant::vision_only: return "vision_only";
    case Variant::text_only: return "text_only";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  std::string t = s;
  for (char& c : t)
    if (c == '-') c = '_';
  if (t == "full") return Variant::full;
  if (t == "concat_only") return Variant::concat_only;
  if (t == "vision_only") return Variant::vision_only;
  if (t == "text_only") return Variant::text_only;
  raise(Err::ConfigSyntax, "unknown variant '" + s + "'");
}

size_t pair_window(double lambda, size_t batch_size) {
  const double exact = lambda * static_cast<double>(batch_size);
  const double rounded = std::round(exact);
  if (rounded < 1.0 || std::abs(exact - rounded) >= 1e-9)
    raise(Err::NonIntegralWindow,
          "lambda*b = " + std::to_string(exact) + " is not a whole number >= 1");
  return static_cast<size_t>(rounded);
}

int TrainConfig::window_size() const {
  return static_cast<int>(pair_window(lambda, static_cast<size_t>(batch_size)));
}

void validate(const TrainConfig& cfg) {
  const auto fail = [](const std::string& field, const std::string& why) {
    raise(Err::ConfigInvalid, field + " " + why);
  };
  if (cfg.code_bits < 8 || cfg.code_bits > 256 || cfg.code_bits % 8 != 0)
    fail("code_bits", "must be a multiple of 8 in [8, 256]");
  if (cfg.batch_size < 1) fail("batch_size", "must be >= 1");
  if (!(cfg.lambda > 0.0) || cfg.lambda > 1.0) fail("lambda", "must be in (0, 1]");
  {
    const double exact = cfg.lambda * cfg.batch_size;
    const double rounded = std::round(exact);
    if (rounded < 1.0 || std::abs(exact - rounded) >= 1e-9)
      fail("lambda", "lambda*batch_size = " + std::to_string(exact) +
                         " must be a whole number >= 1");
  }
  if (cfg.delta < 0.0) fail("delta", "must be >= 0");
  if (cfg.mu < 0.0) fail("mu", "must be >= 0");
  if (!(cfg.learning_rate > 0.0)) fail("learning_rate", "must be > 0");
  if (cfg.epochs < 1) fail("epochs", "must be >= 1");
  if (cfg.vision_dim < 1) fail("vision_dim", "must be >= 1");
  if (cfg.text_dim < 1) fail("text_dim", "must be >= 1");
}

namespace {

// strip whitespace and trailing '#' comment
std::string clean_line(const std::string& raw) {
  std::string s = raw;
  const size_t hash = s.find('#');
  if (hash != std::string::npos) s.erase(hash);
  const size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& value, const std::string& key, int line) {
  std::istringstream ss(value);
  T out{};
  ss >> out;
  char rest;
  if (ss.fail() || (ss >> rest))
    raise(Err::ConfigSyntax, "line " + std::to_string(line) + ": bad value '" +
                                 value + "' for key '" + key + "'");
  return out;
}

void apply_key(TrainConfig& cfg, const std::string& key, const std::string& value, int line) {
  if (key == "code_bits") cfg.code_bits = parse_number<int>(value, key, line);
  else if (key == "batch_size") cfg.batch_size = parse_number<int>(value, key, line);
  else if (key == "lambda") cfg.lambda = parse_number<double>(value, key, line);
  else if (key == "delta") cfg.delta = parse_number<double>(value, key, line);
  else if (key == "mu") cfg.mu = parse_number<double>(value, key, line);
  else if (key == "learning_rate") cfg.learning_rate = parse_number<double>(value, key, line);
  else if (key == "epochs") cfg.epochs = parse_number<int>(value, key, line);
  else if (key == "seed") cfg.seed = parse_number<uint64_t>(value, key, line);
  else if (key == "vision_dim") cfg.vision_dim = parse_number<int>(value, key, line);
  else if (key == "text_dim") cfg.text_dim = parse_number<int>(value, key, line);
  else if (key == "variant") cfg.variant = variant_from_string(value);
  else
    raise(Err::ConfigSyntax, "line " + std::to_string(line) + ": unknown key '" + key + "'");
}

}  // namespace

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) raise(Err::IoFailure, "cannot open config " + path.string());

  TrainConfig cfg;
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string s = clean_line(raw);
    if (s.empty()) continue;
    const size_t eq = s.find('=');
    if (eq == std::string::npos)
      raise(Err::ConfigSyntax, "line " + std::to_string(line) + ": expected key = value");
    const std::string key = clean_line(s.substr(0, eq));
    const std::string value = clean_line(s.substr(eq + 1));
    if (key.empty() || value.empty())
      raise(Err::ConfigSyntax, "line " + std::to_string(line) + ": expected key = value");
    apply_key(cfg, key, value, line);
  }
  validate(cfg);
  return cfg;
}

void write_config(const TrainConfig& cfg, const std::filesystem::path& path) {
  atomic_write_file(path, [&](std::ostream& os) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "code_bits = " << cfg.code_bits << "\n"
       << "batch_size = " << cfg.batch_size << "\n"
       << "lambda = " << cfg.lambda << "\n"
       << "delta = " << cfg.delta << "\n"
       << "mu = " << cfg.mu << "\n"
       << "learning_rate = " << cfg.learning_rate << "\n"
       << "epochs = " << cfg.epochs << "\n"
       << "seed = " << cfg.seed << "\n"
       << "vision_dim = " << cfg.vision_dim << "\n"
       << "text_dim = " << cfg.text_dim << "\n"
       << "variant = " << variant_name(cfg.variant) << "\n";
    os << ss.str();
  });
}

}  // namespace mmhash
