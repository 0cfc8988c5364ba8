/*
 * Copyright 2026 The MO-CTranS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "moctrans/cli/run_config.hpp"

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "moctrans/error.hpp"
#include "moctrans/synthdata/generate.hpp"

namespace moct::cli {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool bare_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

[[noreturn]] void fail(int line, const std::string& msg) { throw ConfigError("config line " + std::to_string(line) + ": " + msg); }

// Value text with any trailing comment removed; strings are parsed here.
TomlValue parse_value(std::string_view v, int line) {
  if (v.empty()) fail(line, "missing value");
  if (v.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < v.size() && v[i] != '"'; ++i) {
      if (v[i] != '\\') {
        out += v[i];
        continue;
      }
      if (++i == v.size()) break;
      switch (v[i]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(line, std::string("unsupported escape \\") + v[i]);
      }
    }
    if (i >= v.size()) fail(line, "unterminated string");
    const std::string_view rest = trim(v.substr(i + 1));
    if (!rest.empty() && rest.front() != '#') fail(line, "unexpected text after string");
    return out;
  }
  if (auto hash = v.find('#'); hash != std::string_view::npos) v = trim(v.substr(0, hash));
  if (v == "true") return true;
  if (v == "false") return false;
  std::string digits;
  for (char c : v)
    if (c != '_') digits += c;
  const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
  if (!is_float) {
    std::int64_t i = 0;
    const char* b = digits.data() + (!digits.empty() && digits[0] == '+' ? 1 : 0);
    auto [p, ec] = std::from_chars(b, digits.data() + digits.size(), i);
    if (ec == std::errc() && p == digits.data() + digits.size()) return i;
    fail(line, "cannot parse value '" + std::string(v) + "'");
  }
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(digits, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != digits.size() || digits.empty()) fail(line, "cannot parse value '" + std::string(v) + "'");
  return d;
}

class Reader {
 public:
  explicit Reader(const TomlDocument& doc) : doc_(doc) {}

  const TomlValue* find(const std::string& section, const std::string& key) {
    used_[section].insert(key);
    auto s = doc_.sections.find(section);
    if (s == doc_.sections.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  void get(const std::string& section, const std::string& key, std::string& out) {
    if (const TomlValue* v = find(section, key)) {
      if (!std::holds_alternative<std::string>(*v)) bad(section, key, "a string");
      out = std::get<std::string>(*v);
    }
  }
  void get(const std::string& section, const std::string& key, int& out) {
    if (const TomlValue* v = find(section, key)) {
      if (!std::holds_alternative<std::int64_t>(*v)) bad(section, key, "an integer");
      out = static_cast<int>(std::get<std::int64_t>(*v));
    }
  }
  void get(const std::string& section, const std::string& key, std::uint64_t& out) {
    if (const TomlValue* v = find(section, key)) {
      if (!std::holds_alternative<std::int64_t>(*v) || std::get<std::int64_t>(*v) < 0) bad(section, key, "a non-negative integer");
      out = static_cast<std::uint64_t>(std::get<std::int64_t>(*v));
    }
  }
  void get(const std::string& section, const std::string& key, double& out) {
    if (const TomlValue* v = find(section, key)) {
      if (std::holds_alternative<std::int64_t>(*v)) out = static_cast<double>(std::get<std::int64_t>(*v));
      else if (std::holds_alternative<double>(*v)) out = std::get<double>(*v);
      else bad(section, key, "a number");
    }
  }

  // Rejects anything present in the document that was never asked for.
  void check_unused() const {
    for (const auto& [section, keys] : doc_.sections) {
      auto u = used_.find(section);
      for (const auto& [key, value] : keys)
        if (u == used_.end() || u->second.count(key) == 0)
          throw ConfigError("unknown config key '" + (section.empty() ? key : section + "." + key) + "'");
    }
  }

  void mark(const std::string& section, const std::string& key) { used_[section].insert(key); }

 private:
  [[noreturn]] static void bad(const std::string& section, const std::string& key, const char* what) {
    throw ConfigError("config key '" + (section.empty() ? key : section + "." + key) + "' must be " + what);
  }

  const TomlDocument& doc_;
  std::map<std::string, std::set<std::string>> used_;
};

std::string resolve(const std::string& base_dir, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

TomlDocument parse_toml(std::string_view text) {
  TomlDocument doc;
  std::string section;
  doc.sections[section];
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      const std::size_t close = line.find(']');
      if (close == std::string_view::npos) fail(line_no, "unterminated section header");
      const std::string_view rest = trim(line.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') fail(line_no, "unexpected text after section header");
      section = std::string(trim(line.substr(1, close - 1)));
      std::string_view check = section;
      while (!check.empty()) {
        const std::size_t dot = check.find('.');
        if (!bare_key(check.substr(0, dot))) fail(line_no, "invalid section name '" + section + "'");
        if (dot == std::string_view::npos) break;
        check.remove_prefix(dot + 1);
      }
      if (section.empty()) fail(line_no, "empty section name");
      if (doc.sections.count(section) && !doc.sections[section].empty()) fail(line_no, "section [" + section + "] defined twice");
      doc.sections[section];
    } else {
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) fail(line_no, "expected key = value");
      std::string key(trim(line.substr(0, eq)));
      if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
      else if (!bare_key(key)) fail(line_no, "invalid key '" + key + "'");
      if (!doc.sections[section].emplace(key, parse_value(trim(line.substr(eq + 1)), line_no)).second)
        fail(line_no, "duplicate key '" + key + "'");
    }
    if (end == text.size()) break;
  }
  return doc;
}

RunConfig parse_run_config(std::string_view text, const std::string& base_dir) {
  const TomlDocument doc = parse_toml(text);
  Reader r(doc);
  RunConfig c;
  r.get("", "seed", c.seed);
  r.get("", "variant", c.variant);
  r.get("", "dataset", c.dataset);
  r.get("", "output", c.output);
  r.get("data", "root", c.data_root);
  r.get("data", "scale", c.scale);
  (void)data::parse_scale(c.scale);

  r.get("model", "c_base", c.model.c_base);
  r.get("model", "m", c.model.m);
  r.get("model", "levels", c.model.levels);
  r.get("model", "heads", c.model.heads);
  r.get("model", "ffn_expansion", c.model.ffn_expansion);
  r.get("model", "blocks_per_level", c.model.blocks_per_level);
  r.get("model", "image_hw", c.model.image_hw);
  r.get("model", "in_channels", c.model.in_channels);

  c.train.seed = c.seed;
  r.get("train", "lr", c.train.lr);
  r.get("train", "epochs", c.train.epochs);
  r.get("train", "batch_size", c.train.batch_size);
  r.get("train", "seed", c.train.seed);
  r.get("train", "smoothing", c.train.smoothing);
  r.get("train", "max_steps", c.train.max_steps);
  std::string weights = "auto";
  r.get("train", "weights", weights);
  if (weights != "auto") throw ConfigError("train.weights must be \"auto\" or given as a [train.weights] table");
  if (auto it = doc.sections.find("train.weights"); it != doc.sections.end()) {
    for (const auto& [name, v] : it->second) {
      double w = 0;
      r.get("train.weights", name, w);
      c.train.weights[name] = w;
    }
  }
  r.check_unused();

  const train::Method method = c.method();
  if (method == train::Method::BaseSingle && c.dataset.empty()) throw ConfigError("variant base_single needs 'dataset'");
  c.model.variant = method == train::Method::MoCtrans ? model::Variant::MoCtrans : model::Variant::Base;
  c.model.n_classes = method == train::Method::BaseMulti ? 5 : 2;
  c.model.class_tasks.clear();
  if (method != train::Method::BaseSingle) {
    if (method == train::Method::BaseMulti) c.model.class_tasks = {0, 1, 2, 3, 4};
    c.model.validate();
  }
  c.train.validate();
  c.data_root = resolve(base_dir, c.data_root);
  c.output = resolve(base_dir, c.output);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  return parse_run_config(ss.str(), parent.empty() ? "." : parent.string());
}

}  // namespace moct::cli
