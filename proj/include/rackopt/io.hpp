// Copyright 2026 The rackopt Authors
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

#include "rackopt/core_model.hpp"
#include "rackopt/instgen.hpp"
#include "rackopt/objective.hpp"
#include "rackopt/ordering.hpp"
#include "rackopt/policy.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace rackopt::io {

inline constexpr int kSchemaVersion = 1;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// schema_version absent or different from kSchemaVersion.
class SchemaVersionError : public IoError {
 public:
  using IoError::IoError;
};

/// Unreadable file, malformed JSON, or missing/mistyped field.
class ParseError : public IoError {
 public:
  using IoError::IoError;
};

/// Arrays whose lengths disagree with the declared dimensions.
class DimensionError : public IoError {
 public:
  using IoError::IoError;
};

/// Well-formed file describing an invalid instance.
class ValidationError : public IoError {
 public:
  using IoError::IoError;
};

using Json = nlohmann::json;

// Instances: matrices are row-major nested arrays, scope membership is one
// position list per scope, the prior mapping is a list of [position, type].
Json instance_to_json(const ProblemInstance& instance);
ProblemInstance instance_from_json(const Json& j);

// Binary assignments store [position, type] pairs; relaxed ones store dense
// rows.
Json assignment_to_json(const Assignment& assignment);
Assignment assignment_from_json(const Json& j);

/// Every field is optional on input; missing ones keep the value of the
/// preset named by "preset" ("default", "tiny", "scalability").
Json config_to_json(const GeneratorConfig& config);
GeneratorConfig config_from_json(const Json& j);

Json breakdown_to_json(const ObjectiveBreakdown& breakdown);
ObjectiveBreakdown breakdown_from_json(const Json& j);

/// Parses text, mapping syntax errors to ParseError.
Json parse_json(const std::string& text, const std::string& what = "input");
Json read_json(const std::filesystem::path& path);
/// Two-space indented, trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

ProblemInstance load_instance(const std::filesystem::path& path);
void save_instance(const std::filesystem::path& path, const ProblemInstance& instance);
Assignment load_assignment(const std::filesystem::path& path);
void save_assignment(const std::filesystem::path& path, const Assignment& assignment);

/// scope,resource,usage,limit,penalty rows.
std::string penalty_cells_csv(const ProblemInstance& instance, const Assignment& assignment,
                              const ObjectiveOptions& options = {});

/// epoch,mean_reward,loss rows.
std::string curve_csv(const std::vector<CurveRecord>& curve);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

// Policy checkpoint layout: 8-byte magic "RKPOLICY", u32 schema version,
// u32 header length, JSON header (hyperparameters, tensor names and shapes),
// then every tensor's entries row-major as little-endian float32.
void save_checkpoint(const std::filesystem::path& path, const PolicyParams<float>& params);
PolicyParams<float> load_checkpoint(const std::filesystem::path& path);
std::string encode_checkpoint(const PolicyParams<float>& params);
PolicyParams<float> decode_checkpoint(const std::string& bytes);

}  // namespace rackopt::io
