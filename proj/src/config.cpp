#include "rseg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace rseg {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[64];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return {buf, end};
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ContractError("'" + v + "' is not a number");
  return out;
}

std::uint64_t to_uint(const std::string& v) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    if (!v.empty() && v[0] != '-') out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) {
    throw ContractError("'" + v + "' is not a non-negative integer");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ContractError("'" + v + "' is not a boolean");
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    auto size = [](std::size_t& (*ref)(RunConfig&)) {
      return Field{[ref](RunConfig& c, const std::string& v) { ref(c) = to_uint(v); },
                   [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
    };
    auto real = [](double& (*ref)(RunConfig&)) {
      return Field{[ref](RunConfig& c, const std::string& v) { ref(c) = to_double(v); },
                   [ref](const RunConfig& c) { return fmt(ref(const_cast<RunConfig&>(c))); }};
    };
    t["image_width"] = size([](RunConfig& c) -> std::size_t& { return c.model.image_width; });
    t["image_height"] = size([](RunConfig& c) -> std::size_t& { return c.model.image_height; });
    t["d_embed"] = size([](RunConfig& c) -> std::size_t& { return c.model.encoder.d_embed; });
    t["d_text"] = size([](RunConfig& c) -> std::size_t& { return c.model.encoder.d_text; });
    t["d_cls"] = size([](RunConfig& c) -> std::size_t& { return c.model.d_cls; });
    t["init_range"] = real([](RunConfig& c) -> double& { return c.model.encoder.init_range; });
    t["forget_bias"] = real([](RunConfig& c) -> double& { return c.model.encoder.forget_bias; });
    t["normalize_eps"] = real([](RunConfig& c) -> double& { return c.model.normalize_eps; });
    t["lr_low"] = real([](RunConfig& c) -> double& { return c.lr_low; });
    t["lr_high"] = real([](RunConfig& c) -> double& { return c.lr_high; });
    t["momentum"] = real([](RunConfig& c) -> double& { return c.momentum; });
    t["iterations_low"] = size([](RunConfig& c) -> std::size_t& { return c.iterations_low; });
    t["iterations_high"] = size([](RunConfig& c) -> std::size_t& { return c.iterations_high; });
    t["batch_size"] = size([](RunConfig& c) -> std::size_t& { return c.batch_size; });
    t["log_every"] = size([](RunConfig& c) -> std::size_t& { return c.log_every; });
    t["alpha_f"] = real([](RunConfig& c) -> double& { return c.weights.alpha_f; });
    t["alpha_b"] = real([](RunConfig& c) -> double& { return c.weights.alpha_b; });
    t["perword_iterations"] = size([](RunConfig& c) -> std::size_t& { return c.perword_iterations; });
    t["perword_lr"] = real([](RunConfig& c) -> double& { return c.perword_lr; });
    t["perword_max_words"] = size([](RunConfig& c) -> std::size_t& { return c.perword_max_words; });
    t["seed"] = {[](RunConfig& c, const std::string& v) { c.seed = to_uint(v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    t["backbone"] = {[](RunConfig& c, const std::string& v) { c.model.backbone = BackboneConfig::parse(v); },
                     [](const RunConfig& c) { return c.model.backbone.to_string(); }};
    t["use_coordinates"] = {[](RunConfig& c, const std::string& v) { c.model.use_coordinates = to_bool(v); },
                            [](const RunConfig& c) { return std::string(c.model.use_coordinates ? "true" : "false"); }};
    t["perword_stopwords"] = {[](RunConfig& c, const std::string& v) { c.perword_stopwords = v; },
                              [](const RunConfig& c) { return c.perword_stopwords; }};
    return t;
  }();
  return table;
}

}  // namespace

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& values) {
  RunConfig config;
  for (const auto& [key, value] : values) {
    auto it = fields().find(key);
    if (it == fields().end()) throw ContractError("unknown config key '" + key + "'");
    try {
      it->second.set(config, value);
    } catch (const ContractError& e) {
      throw ContractError("config key '" + key + "': " + e.what());
    }
  }
  return config;
}

std::map<std::string, std::string> RunConfig::read_entries(const std::string& text) {
  std::map<std::string, std::string> values;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ContractError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return values;
}

std::map<std::string, std::string> RunConfig::read_entries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return read_entries(buf.str());
}

RunConfig RunConfig::parse(const std::string& text) { return from_map(read_entries(text)); }

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_map(read_entries(path)); }

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields()) out[key] = field.get(*this);
  return out;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [key, value] : to_map()) os << key << " = " << value << '\n';
  return os.str();
}

TrainConfig RunConfig::stage_config(Stage stage) const {
  TrainConfig t;
  t.stage = stage;
  t.lr = stage == Stage::kLow ? lr_low : lr_high;
  t.iterations = stage == Stage::kLow ? iterations_low : iterations_high;
  t.momentum = momentum;
  t.batch_size = batch_size;
  t.seed = seed;
  t.log_every = log_every;
  t.weights = weights;
  return t;
}

}  // namespace rseg
