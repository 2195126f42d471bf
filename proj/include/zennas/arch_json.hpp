// Copyright 2026 The zennas Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Architecture JSON, schema "zennas.arch" version 1.
//
//   {
//     "format": "zennas.arch",
//     "version": 1,
//     "name": "ResNet-18",            optional
//     "input_resolution": 224,
//     "num_classes": 1000,            optional, default 0
//     "blocks": [
//       {"block": "Conv", "kernel": 7, "in": 3, "out": 64, "stride": 2, "layers": 1, "pool": true},
//       {"block": "Res", "kernel": 3, "in": 64, "out": 64, "stride": 1, "bottleneck": 64, "layers": 2},
//       {"block": "MB", "kernel": 7, "in": 16, "out": 40, "stride": 2, "bottleneck": 40,
//        "expansion": 1, "layers": 1, "se": true}
//     ]
//   }
//
// Block fields follow the appendix table columns. "bottleneck" is required on
// Res/Btn/MB and rejected on Conv, "expansion" exists only on MB, "pool" only
// on Conv. Unknown keys are errors. Comments are accepted.

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "zennas/arch.hpp"

namespace zennas {

inline constexpr const char* kArchFormat = "zennas.arch";
inline constexpr int kArchVersion = 1;

namespace detail {

using ojson = nlohmann::ordered_json;

inline std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline ojson parse_json_text(const std::string& text) {
  try {
    return ojson::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_col(text, e.byte == 0 ? 0 : e.byte - 1));
  }
}

inline void reject_unknown(const ojson& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ParseError("unknown field '" + it.key() + "'", where + "." + it.key());
  }
}

inline int get_int(const ojson& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(std::string("missing field '") + key + "'", where);
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ParseError(std::string("field '") + key + "' must be an integer", where + "." + key);
  return v.get<int>();
}

inline bool get_bool(const ojson& obj, const char* key, const std::string& where, bool def) {
  if (!obj.contains(key)) return def;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) throw ParseError(std::string("field '") + key + "' must be a boolean", where + "." + key);
  return v.get<bool>();
}

}  // namespace detail

inline nlohmann::ordered_json block_to_json(const BlockDescriptor& b) {
  detail::ojson j;
  j["block"] = to_string(b.type);
  j["kernel"] = b.kernel;
  j["in"] = b.in_ch;
  j["out"] = b.out_ch;
  j["stride"] = b.stride;
  if (b.bottleneck) j["bottleneck"] = *b.bottleneck;
  if (b.expansion) j["expansion"] = *b.expansion;
  j["layers"] = b.layers;
  if (b.se) j["se"] = true;
  if (b.pool) j["pool"] = true;
  return j;
}

inline nlohmann::ordered_json to_json(const Architecture& a) {
  detail::ojson j;
  j["format"] = kArchFormat;
  j["version"] = kArchVersion;
  if (!a.name.empty()) j["name"] = a.name;
  j["input_resolution"] = a.input_resolution;
  if (a.num_classes > 0) j["num_classes"] = a.num_classes;
  j["blocks"] = detail::ojson::array();
  for (const auto& b : a.blocks) j["blocks"].push_back(block_to_json(b));
  return j;
}

inline std::string serialize(const Architecture& a) { return to_json(a).dump(2) + "\n"; }

inline BlockDescriptor block_from_json(const nlohmann::ordered_json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError("block must be an object", where);
  detail::reject_unknown(j, {"block", "kernel", "in", "out", "stride", "bottleneck", "expansion", "layers", "se", "pool"},
                         where);
  BlockDescriptor b;
  if (!j.contains("block") || !j.at("block").is_string()) throw ParseError("missing or non-string 'block'", where);
  const auto t = block_type_from_string(j.at("block").get<std::string>());
  if (!t) throw ParseError("unknown block type '" + j.at("block").get<std::string>() + "'", where + ".block");
  b.type = *t;
  b.kernel = detail::get_int(j, "kernel", where);
  b.in_ch = detail::get_int(j, "in", where);
  b.out_ch = detail::get_int(j, "out", where);
  b.stride = detail::get_int(j, "stride", where);
  b.layers = j.contains("layers") ? detail::get_int(j, "layers", where) : 1;
  if (j.contains("bottleneck")) {
    if (b.type == BlockType::Conv) throw ParseError("Conv blocks carry no bottleneck", where + ".bottleneck");
    b.bottleneck = detail::get_int(j, "bottleneck", where);
  } else if (b.type != BlockType::Conv) {
    throw ParseError(to_string(b.type) + " block needs 'bottleneck'", where);
  }
  if (j.contains("expansion")) {
    if (b.type != BlockType::MB) throw ParseError("'expansion' is only valid on MB blocks", where + ".expansion");
    b.expansion = detail::get_int(j, "expansion", where);
  } else if (b.type == BlockType::MB) {
    throw ParseError("MB block needs 'expansion'", where);
  }
  b.se = detail::get_bool(j, "se", where, false);
  b.pool = detail::get_bool(j, "pool", where, false);
  if (b.pool && b.type != BlockType::Conv) throw ParseError("'pool' is only valid on Conv blocks", where + ".pool");
  return b;
}

inline Architecture from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw ParseError("architecture must be a JSON object", "$");
  detail::reject_unknown(j, {"format", "version", "name", "input_resolution", "num_classes", "blocks"}, "$");
  if (!j.contains("format") || j.at("format") != kArchFormat)
    throw ParseError(std::string("expected \"format\": \"") + kArchFormat + "\"", "$.format");
  const int version = detail::get_int(j, "version", "$");
  if (version != kArchVersion)
    throw ParseError("unsupported schema version " + std::to_string(version), "$.version");
  Architecture a;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) throw ParseError("'name' must be a string", "$.name");
    a.name = j.at("name").get<std::string>();
  }
  a.input_resolution = detail::get_int(j, "input_resolution", "$");
  a.num_classes = j.contains("num_classes") ? detail::get_int(j, "num_classes", "$") : 0;
  if (!j.contains("blocks") || !j.at("blocks").is_array()) throw ParseError("missing 'blocks' array", "$.blocks");
  std::size_t i = 0;
  for (const auto& bj : j.at("blocks")) {
    a.blocks.push_back(block_from_json(bj, "$.blocks[" + std::to_string(i) + "]"));
    ++i;
  }
  return a;
}

// Parses and checks the space-independent invariants.
inline Architecture parse_architecture(const std::string& text) {
  Architecture a = from_json(detail::parse_json_text(text));
  const ValidationReport r = validate_structure(a);
  if (!r.ok()) throw ParseError("invalid architecture: " + r.violations.front().message, r.violations.front().field);
  return a;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline Architecture load_architecture(const std::string& path) {
  return parse_architecture(read_text_file(path));
}

}  // namespace zennas
