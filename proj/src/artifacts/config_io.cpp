/*
 * Copyright (c) 2026 The georoute Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "georoute/artifacts.hpp"

namespace georoute {

namespace {

using Json = nlohmann::ordered_json;

struct Field {
  const char* key;
  std::function<Json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const Json&)> set;
};

std::size_t as_size(const char* key, const Json& v) {
  if (!v.is_number_unsigned()) {
    if (v.is_number_integer()) throw ConfigError(key, "must be nonnegative");
    throw ConfigError(key, "expected a nonnegative integer");
  }
  return v.get<std::size_t>();
}

double as_real(const char* key, const Json& v) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

std::string as_string(const char* key, const Json& v) {
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

template <class Fn>
auto parse_enum(const char* key, Fn&& fn) {
  try {
    return fn();
  } catch (const PreconditionError& e) {
    throw ConfigError(key, e.what());
  }
}

#define GEOROUTE_SIZE_FIELD(name) \
  Field{#name, [](const ExperimentConfig& c) { return Json(c.name); }, \
        [](ExperimentConfig& c, const Json& v) { c.name = as_size(#name, v); }}
#define GEOROUTE_REAL_FIELD(name) \
  Field{#name, [](const ExperimentConfig& c) { return Json(c.name); }, \
        [](ExperimentConfig& c, const Json& v) { c.name = as_real(#name, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"seed", [](const ExperimentConfig& c) { return Json(c.seed); },
            [](ExperimentConfig& c, const Json& v) { c.seed = as_size("seed", v); }},
      GEOROUTE_SIZE_FIELD(total_depth),
      GEOROUTE_SIZE_FIELD(num_tokens),
      GEOROUTE_SIZE_FIELD(raw_width),
      GEOROUTE_SIZE_FIELD(width),
      GEOROUTE_SIZE_FIELD(num_tasks),
      Field{"planted_layers", [](const ExperimentConfig& c) { return Json(c.planted_layers); },
            [](ExperimentConfig& c, const Json& v) {
              if (!v.is_array()) throw ConfigError("planted_layers", "expected an array of layer indices");
              c.planted_layers.clear();
              for (const auto& e : v) c.planted_layers.push_back(as_size("planted_layers", e));
            }},
      GEOROUTE_REAL_FIELD(attenuation_tau),
      GEOROUTE_REAL_FIELD(noise_sigma),
      GEOROUTE_REAL_FIELD(distractor_scale),
      Field{"variant", [](const ExperimentConfig& c) { return Json(std::string(to_string(c.variant))); },
            [](ExperimentConfig& c, const Json& v) {
              const std::string s = as_string("variant", v);
              c.variant = parse_enum("variant", [&] { return parse_variant(s); });
            }},
      GEOROUTE_SIZE_FIELD(m),
      GEOROUTE_SIZE_FIELD(k),
      Field{"selection", [](const ExperimentConfig& c) { return Json(std::string(to_string(c.selection))); },
            [](ExperimentConfig& c, const Json& v) {
              const std::string s = as_string("selection", v);
              c.selection = parse_enum("selection", [&] { return parse_selection(s); });
            }},
      GEOROUTE_SIZE_FIELD(single_layer),
      GEOROUTE_SIZE_FIELD(backbone_blocks),
      GEOROUTE_SIZE_FIELD(backbone_hidden),
      GEOROUTE_SIZE_FIELD(injection_index),
      GEOROUTE_SIZE_FIELD(steps),
      GEOROUTE_SIZE_FIELD(epochs),
      GEOROUTE_SIZE_FIELD(batch_size),
      GEOROUTE_REAL_FIELD(warmup_fraction),
      GEOROUTE_REAL_FIELD(lr_peak),
      GEOROUTE_REAL_FIELD(lr_end),
      GEOROUTE_REAL_FIELD(weight_decay),
      GEOROUTE_REAL_FIELD(beta1),
      GEOROUTE_REAL_FIELD(beta2),
      GEOROUTE_REAL_FIELD(adam_eps),
      GEOROUTE_REAL_FIELD(max_grad_norm),
      GEOROUTE_REAL_FIELD(router_noise),
      GEOROUTE_SIZE_FIELD(eval_batches),
      Field{"grid",
            [](const ExperimentConfig& c) {
              Json out = Json::array();
              for (Variant v : c.grid) out.push_back(std::string(to_string(v)));
              return out;
            },
            [](ExperimentConfig& c, const Json& v) {
              if (!v.is_array()) throw ConfigError("grid", "expected an array of variant names");
              c.grid.clear();
              for (const auto& e : v) {
                const std::string s = as_string("grid", e);
                c.grid.push_back(parse_enum("grid", [&] { return parse_variant(s); }));
              }
            }},
  };
  return table;
}

#undef GEOROUTE_SIZE_FIELD
#undef GEOROUTE_REAL_FIELD

}  // namespace

ExperimentConfig load_config(std::string_view document) {
  Json doc;
  try {
    doc = Json::parse(document.begin(), document.end(), nullptr, true, /*ignore_comments=*/false);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<document>", std::string("malformed JSON: ") + e.what());
  }
  if (doc.is_null()) doc = Json::object();
  if (!doc.is_object()) throw ConfigError("<document>", "top level must be a JSON object");

  ExperimentConfig config;
  const auto& table = fields();
  for (const auto& [key, value] : doc.items()) {
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
    if (it == table.end()) throw ConfigError(key, "unknown key");
    it->set(config, value);
  }
  config.validate();
  return config;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open config");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_config(buffer.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  Json doc = Json::object();
  for (const auto& f : fields()) doc[f.key] = f.get(config);
  return doc.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

}  // namespace georoute
