#include "spanopt/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include "spanopt/error.hpp"

namespace spanopt {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw Error(Errc::ConfigError, key + " = '" + value + "' is not " + want);
}

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const char* first = value.data();
  if (!value.empty() && value.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(v)) {
    bad_value(key, value, "a number");
  }
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
  KeyValueConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw Error(Errc::ConfigError, "line " + std::to_string(line_no) + ": empty key");
    if (cfg.values_.count(key)) {
      throw Error(Errc::ConfigError, "line " + std::to_string(line_no) + ": duplicate key " + key);
    }
    cfg.values_[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigError, "cannot open config " + path.string());
  return parse(in);
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) != 0; }

void KeyValueConfig::set(const std::string& key, std::string value) { values_[key] = std::move(value); }

const std::string* KeyValueConfig::lookup(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

std::optional<std::string> KeyValueConfig::get_string(const std::string& key) const {
  if (const auto* v = lookup(key)) return *v;
  return std::nullopt;
}

std::optional<double> KeyValueConfig::get_double(const std::string& key) const {
  if (const auto* v = lookup(key)) return to_double(key, *v);
  return std::nullopt;
}

std::optional<std::uint64_t> KeyValueConfig::get_u64(const std::string& key) const {
  const auto* v = lookup(key);
  if (!v) return std::nullopt;
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size() || v->empty()) {
    bad_value(key, *v, "a non-negative integer");
  }
  return out;
}

std::optional<std::size_t> KeyValueConfig::get_size(const std::string& key) const {
  const auto v = get_u64(key);
  if (!v) return std::nullopt;
  return static_cast<std::size_t>(*v);
}

std::optional<bool> KeyValueConfig::get_bool(const std::string& key) const {
  const auto* v = lookup(key);
  if (!v) return std::nullopt;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  bad_value(key, *v, "a boolean");
}

std::optional<std::vector<std::string>> KeyValueConfig::get_list(const std::string& key) const {
  const auto* v = lookup(key);
  if (!v) return std::nullopt;
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v->size() && !v->empty()) {
    const auto comma = v->find(',', start);
    const std::string item =
        trim(std::string_view(*v).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (item.empty()) bad_value(key, *v, "a comma-separated list");
    out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<std::vector<double>> KeyValueConfig::get_double_list(const std::string& key) const {
  const auto items = get_list(key);
  if (!items) return std::nullopt;
  std::vector<double> out;
  for (const auto& s : *items) out.push_back(to_double(key, s));
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

}  // namespace spanopt
