#pragma once

#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "selrev/errors.hpp"

namespace selrev {

/// Reads a line-delimited JSON file and invokes `handler(line_number, object)`
/// for every non-blank line. Line numbers are 1-based and quoted in every
/// error so a bad record can be located directly.
inline void for_each_jsonl_record(
    const std::string& path,
    const std::function<void(std::size_t, const nlohmann::json&)>& handler) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path);
  }
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(line_number) +
                      ": malformed record: " + e.what());
    }
    if (!record.is_object()) {
      throw DataError(path + ":" + std::to_string(line_number) +
                      ": record is not a JSON object");
    }
    handler(line_number, record);
  }
}

/// Fetches a required field, reporting the file position on absence or a
/// type mismatch. Unknown fields in the record are ignored by design.
template <typename T>
T require_field(const nlohmann::json& record, const char* name,
                const std::string& path, std::size_t line_number) {
  auto it = record.find(name);
  if (it == record.end()) {
    throw DataError(path + ":" + std::to_string(line_number) +
                    ": missing field '" + name + "'");
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::type_error&) {
    throw DataError(path + ":" + std::to_string(line_number) +
                    ": field '" + name + "' has the wrong type");
  }
}

}  // namespace selrev
