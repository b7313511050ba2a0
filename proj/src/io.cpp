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

#include "rackopt/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rackopt::io {

namespace {

constexpr char kMagic[8] = {'R', 'K', 'P', 'O', 'L', 'I', 'C', 'Y'};

void check_version(const Json& j, const std::string& what) {
  if (!j.is_object()) throw ParseError(what + ": expected a JSON object");
  if (!j.contains("schema_version")) throw SchemaVersionError(what + ": missing schema_version");
  const Json& v = j.at("schema_version");
  if (!v.is_number_integer() || v.get<long long>() != kSchemaVersion) {
    throw SchemaVersionError(what + ": unsupported schema_version " + v.dump() + " (expected " +
                             std::to_string(kSchemaVersion) + ")");
  }
}

template <typename T>
T field(const Json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("field '") + name + "': " + e.what());
  }
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const char* name, Index rows, Index cols) {
  const auto nested = field<std::vector<std::vector<double>>>(j, name);
  if (static_cast<Index>(nested.size()) != rows) {
    throw DimensionError(std::string(name) + ": expected " + std::to_string(rows) + " rows, got " +
                         std::to_string(nested.size()));
  }
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (static_cast<Index>(nested[i].size()) != cols) {
      throw DimensionError(std::string(name) + " row " + std::to_string(i) + ": expected " +
                           std::to_string(cols) + " columns, got " + std::to_string(nested[i].size()));
    }
    for (Index c = 0; c < cols; ++c) m(i, c) = nested[i][c];
  }
  return m;
}

template <typename Vec>
Json vector_to_json(const Vec& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vector_from_json(const Json& j, const char* name, Index n) {
  const auto values = field<std::vector<Scalar>>(j, name);
  if (static_cast<Index>(values.size()) != n) {
    throw DimensionError(std::string(name) + ": expected " + std::to_string(n) + " entries, got " +
                         std::to_string(values.size()));
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(n);
  for (Index i = 0; i < n; ++i) v[i] = values[i];
  return v;
}

void check_pair(Index p, Index k, Index positions, Index types, const char* name) {
  if (p < 0 || p >= positions || k < 0 || k >= types) {
    throw DimensionError(std::string(name) + ": pair [" + std::to_string(p) + ", " + std::to_string(k) +
                         "] outside " + std::to_string(positions) + " x " + std::to_string(types));
  }
}

Json placements_to_json(const Assignment& a) {
  Json pairs = Json::array();
  for (Index p = 0; p < a.num_positions(); ++p) {
    for (Index k = 0; k < a.num_types(); ++k) {
      if (a(p, k) != 0.0) pairs.push_back(Json::array({p, k}));
    }
  }
  return pairs;
}

Assignment placements_from_json(const Json& j, const char* name, Index positions, Index types) {
  Assignment a = Assignment::empty(positions, types);
  for (const auto& pair : field<std::vector<std::array<Index, 2>>>(j, name)) {
    check_pair(pair[0], pair[1], positions, types, name);
    a.place(pair[0], pair[1]);
  }
  return a;
}

template <typename T>
void maybe(const Json& j, const char* name, T& out) {
  if (j.contains(name)) out = field<T>(j, name);
}

template <typename T>
void maybe_range(const Json& j, const char* name, Range<T>& out) {
  if (!j.contains(name)) return;
  const auto v = field<std::vector<T>>(j, name);
  if (v.size() != 2) throw DimensionError(std::string(name) + ": expected [lo, hi]");
  out = {v[0], v[1]};
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

Json instance_to_json(const ProblemInstance& in) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["num_positions"] = in.num_positions;
  j["num_rack_types"] = in.num_rack_types;
  j["num_resources"] = in.num_resources;
  j["num_scopes"] = in.num_scopes();
  j["resource_matrix"] = matrix_to_json(in.resource_matrix);
  Json scopes = Json::array();
  for (Index s = 0; s < in.num_scopes(); ++s) {
    Json members = Json::array();
    for (Index p = 0; p < in.num_positions; ++p) {
      if (in.scope_membership(p, s)) members.push_back(p);
    }
    scopes.push_back(std::move(members));
  }
  j["scope_positions"] = std::move(scopes);
  j["scope_limits"] = matrix_to_json(in.scope_limits);
  j["demands"] = vector_to_json(in.demands);
  j["placement_limit"] = in.placement_limit;
  j["movement_weights"] = vector_to_json(in.movement_weights);
  Json reqs = Json::array();
  for (const SpreadRequirement& r : in.spread_requirements) {
    reqs.push_back({{"resource", r.resource}, {"rack_group", r.rack_group}, {"scope_group", r.scope_group}});
  }
  j["spread_requirements"] = std::move(reqs);
  j["prior_assignment"] = placements_to_json(in.prior_assignment);
  j["beta_spread"] = in.beta_spread;
  j["beta_limit"] = in.beta_limit;
  j["gamma_placement"] = in.gamma_placement;
  j["seed"] = in.seed ? Json(*in.seed) : Json(nullptr);
  return j;
}

ProblemInstance instance_from_json(const Json& j) {
  check_version(j, "instance");
  ProblemInstance in;
  in.num_positions = field<Index>(j, "num_positions");
  in.num_rack_types = field<Index>(j, "num_rack_types");
  in.num_resources = field<Index>(j, "num_resources");
  const Index scopes = field<Index>(j, "num_scopes");
  if (in.num_positions < 0 || in.num_rack_types < 0 || in.num_resources < 0 || scopes < 0) {
    throw DimensionError("instance: negative dimension");
  }
  in.resource_matrix = matrix_from_json(j, "resource_matrix", in.num_rack_types, in.num_resources);
  const auto members = field<std::vector<std::vector<Index>>>(j, "scope_positions");
  if (static_cast<Index>(members.size()) != scopes) {
    throw DimensionError("scope_positions: expected " + std::to_string(scopes) + " scopes, got " +
                         std::to_string(members.size()));
  }
  in.scope_membership = BoolMatrix::Zero(in.num_positions, scopes);
  for (Index s = 0; s < scopes; ++s) {
    for (Index p : members[s]) {
      check_pair(p, s, in.num_positions, scopes, "scope_positions");
      in.scope_membership(p, s) = true;
    }
  }
  in.scope_limits = matrix_from_json(j, "scope_limits", scopes, in.num_resources);
  in.demands = vector_from_json<int>(j, "demands", in.num_rack_types);
  in.placement_limit = field<int>(j, "placement_limit");
  in.movement_weights = vector_from_json<double>(j, "movement_weights", in.num_rack_types);
  for (const Json& r : field<Json>(j, "spread_requirements")) {
    in.spread_requirements.push_back({field<Index>(r, "resource"),
                                      field<std::vector<Index>>(r, "rack_group"),
                                      field<std::vector<Index>>(r, "scope_group")});
  }
  in.prior_assignment =
      placements_from_json(j, "prior_assignment", in.num_positions, in.num_rack_types);
  in.beta_spread = field<double>(j, "beta_spread");
  in.beta_limit = field<double>(j, "beta_limit");
  in.gamma_placement = field<double>(j, "gamma_placement");
  if (j.contains("seed") && !j.at("seed").is_null()) in.seed = field<std::uint64_t>(j, "seed");

  const auto problems = validate_instance(in);
  if (!problems.empty()) {
    std::string msg = "invalid instance:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  return in;
}

Json assignment_to_json(const Assignment& a) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["num_positions"] = a.num_positions();
  j["num_rack_types"] = a.num_types();
  if (a.is_binary()) {
    j["mode"] = "binary";
    j["placements"] = placements_to_json(a);
  } else {
    j["mode"] = "relaxed";
    j["entries"] = matrix_to_json(a.entries());
  }
  return j;
}

Assignment assignment_from_json(const Json& j) {
  check_version(j, "assignment");
  const Index positions = field<Index>(j, "num_positions");
  const Index types = field<Index>(j, "num_rack_types");
  if (positions < 0 || types < 0) throw DimensionError("assignment: negative dimension");
  const std::string mode = field<std::string>(j, "mode");
  if (mode == "binary") return placements_from_json(j, "placements", positions, types);
  if (mode == "relaxed") {
    return {matrix_from_json(j, "entries", positions, types), AssignmentMode::kRelaxed};
  }
  throw ParseError("assignment: unknown mode '" + mode + "'");
}

Json config_to_json(const GeneratorConfig& c) {
  auto range = [](const auto& r) { return Json::array({r.lo, r.hi}); };
  Json limits = Json::array();
  for (const auto& r : c.limit_ranges) limits.push_back(range(r));
  Json templates = Json::array();
  for (const SpreadTemplate& t : c.spread_templates) {
    templates.push_back({{"resource", t.resource}, {"rack_group", t.rack_group}, {"level", t.level}});
  }
  return {{"schema_version", kSchemaVersion},
          {"num_positions", c.num_positions},
          {"num_rack_types", c.num_rack_types},
          {"num_resources", c.num_resources},
          {"scope_counts", c.scope_counts},
          {"demand_range", range(c.demand_range)},
          {"placement_limit_range", range(c.placement_limit_range)},
          {"limit_ranges", std::move(limits)},
          {"prior_probabilities", c.prior_probabilities},
          {"resource_matrix", matrix_to_json(c.resource_matrix)},
          {"movement_weights", vector_to_json(c.movement_weights)},
          {"beta_spread", c.beta_spread},
          {"beta_limit", c.beta_limit},
          {"gamma_placement", c.gamma_placement},
          {"spread_templates", std::move(templates)},
          {"seed", c.seed}};
}

GeneratorConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("config: expected a JSON object");
  if (j.contains("schema_version")) check_version(j, "config");
  const std::string preset = j.contains("preset") ? field<std::string>(j, "preset") : "default";
  GeneratorConfig c;
  if (preset == "default") {
    c = default_config();
  } else if (preset == "tiny") {
    c = tiny_config();
  } else if (preset == "scalability") {
    c = scalability_config();
  } else {
    throw ParseError("config: unknown preset '" + preset + "'");
  }
  maybe(j, "num_positions", c.num_positions);
  maybe(j, "num_rack_types", c.num_rack_types);
  maybe(j, "num_resources", c.num_resources);
  maybe(j, "scope_counts", c.scope_counts);
  maybe_range(j, "demand_range", c.demand_range);
  maybe_range(j, "placement_limit_range", c.placement_limit_range);
  if (j.contains("limit_ranges")) {
    c.limit_ranges.clear();
    for (const auto& r : field<std::vector<std::vector<double>>>(j, "limit_ranges")) {
      if (r.size() != 2) throw DimensionError("limit_ranges: expected [lo, hi] pairs");
      c.limit_ranges.push_back({r[0], r[1]});
    }
  }
  maybe(j, "prior_probabilities", c.prior_probabilities);
  if (j.contains("resource_matrix")) {
    c.resource_matrix = matrix_from_json(j, "resource_matrix", c.num_rack_types, c.num_resources);
  }
  if (j.contains("movement_weights")) {
    c.movement_weights = vector_from_json<double>(j, "movement_weights", c.num_rack_types);
  }
  maybe(j, "beta_spread", c.beta_spread);
  maybe(j, "beta_limit", c.beta_limit);
  maybe(j, "gamma_placement", c.gamma_placement);
  if (j.contains("spread_templates")) {
    c.spread_templates.clear();
    for (const Json& t : field<Json>(j, "spread_templates")) {
      c.spread_templates.push_back({field<Index>(t, "resource"), field<std::vector<Index>>(t, "rack_group"),
                                    field<Index>(t, "level")});
    }
  }
  maybe(j, "seed", c.seed);
  const auto problems = validate_config(c);
  if (!problems.empty()) {
    std::string msg = "invalid generator config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  return c;
}

Json breakdown_to_json(const ObjectiveBreakdown& b) {
  return {{"movement", b.movement},
          {"spread", b.spread},
          {"limit_penalty", b.limit_penalty},
          {"placement_excess", b.placement_excess},
          {"utility", b.utility},
          {"augmented", b.augmented}};
}

ObjectiveBreakdown breakdown_from_json(const Json& j) {
  return {field<double>(j, "movement"),         field<double>(j, "spread"),
          field<double>(j, "limit_penalty"),    field<double>(j, "placement_excess"),
          field<double>(j, "utility"),          field<double>(j, "augmented")};
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

Json read_json(const std::filesystem::path& path) { return parse_json(read_text(path), path.string()); }

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

ProblemInstance load_instance(const std::filesystem::path& path) {
  return instance_from_json(read_json(path));
}

void save_instance(const std::filesystem::path& path, const ProblemInstance& instance) {
  write_json(path, instance_to_json(instance));
}

Assignment load_assignment(const std::filesystem::path& path) {
  return assignment_from_json(read_json(path));
}

void save_assignment(const std::filesystem::path& path, const Assignment& assignment) {
  write_json(path, assignment_to_json(assignment));
}

std::string penalty_cells_csv(const ProblemInstance& instance, const Assignment& assignment,
                              const ObjectiveOptions& options) {
  const Eigen::MatrixXd usage = scope_usage(instance, assignment);
  const LimitPenaltyResult penalty = limit_penalty(instance, assignment, options);
  std::string out = "scope,resource,usage,limit,penalty\n";
  for (Index s = 0; s < usage.rows(); ++s) {
    for (Index r = 0; r < usage.cols(); ++r) {
      out += std::to_string(s) + "," + std::to_string(r) + "," + format_double(usage(s, r)) + "," +
             format_double(instance.scope_limits(s, r)) + "," + format_double(penalty.cells(s, r)) + "\n";
    }
  }
  return out;
}

std::string curve_csv(const std::vector<CurveRecord>& curve) {
  std::string out = "epoch,mean_reward,loss\n";
  for (const CurveRecord& r : curve) {
    out += std::to_string(r.epoch) + "," + format_double(r.mean_reward) + "," + format_double(r.loss) + "\n";
  }
  return out;
}

std::string encode_checkpoint(const PolicyParams<float>& params) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian");
  Json header;
  header["schema_version"] = kSchemaVersion;
  const auto& h = params.hyper;
  header["hyper"] = {{"d_model", h.d_model}, {"heads", h.heads},           {"layers", h.layers},
                     {"ff_width", h.ff_width}, {"logit_clip", h.logit_clip}, {"norm_epsilon", h.norm_epsilon}};
  Json tensors = Json::array();
  const auto names = params.weights.names();
  const auto ts = params.weights.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    tensors.push_back({{"name", names[i]}, {"rows", ts[i]->rows()}, {"cols", ts[i]->cols()}});
  }
  header["tensors"] = std::move(tensors);
  const std::string head = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  auto put_u32 = [&out](std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
  };
  put_u32(static_cast<std::uint32_t>(kSchemaVersion));
  put_u32(static_cast<std::uint32_t>(head.size()));
  out += head;
  for (const auto* t : ts) {
    for (Index r = 0; r < t->rows(); ++r) {
      for (Index c = 0; c < t->cols(); ++c) {
        const float v = (*t)(r, c);
        char b[4];
        std::memcpy(b, &v, 4);
        out.append(b, 4);
      }
    }
  }
  return out;
}

PolicyParams<float> decode_checkpoint(const std::string& bytes) {
  std::size_t at = 0;
  auto need = [&](std::size_t n) {
    if (bytes.size() - at < n) throw ParseError("checkpoint truncated at byte " + std::to_string(at));
  };
  auto get_u32 = [&] {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + at, 4);
    at += 4;
    return v;
  };
  need(sizeof(kMagic));
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw ParseError("not a policy checkpoint");
  at += sizeof(kMagic);
  const std::uint32_t version = get_u32();
  if (version != static_cast<std::uint32_t>(kSchemaVersion)) {
    throw SchemaVersionError("checkpoint: unsupported schema_version " + std::to_string(version));
  }
  const std::uint32_t head_len = get_u32();
  need(head_len);
  const Json header = parse_json(bytes.substr(at, head_len), "checkpoint header");
  at += head_len;
  check_version(header, "checkpoint header");

  PolicyHyperparams h;
  const Json& hj = field<Json>(header, "hyper");
  h.d_model = field<int>(hj, "d_model");
  h.heads = field<int>(hj, "heads");
  h.layers = field<int>(hj, "layers");
  h.ff_width = field<int>(hj, "ff_width");
  h.logit_clip = field<double>(hj, "logit_clip");
  h.norm_epsilon = field<double>(hj, "norm_epsilon");
  if (h.d_model <= 0 || h.heads <= 0 || h.layers < 0 || h.ff_width <= 0 || h.d_model % h.heads != 0) {
    throw DimensionError("checkpoint: inconsistent hyperparameters");
  }

  // The expected layout comes from the hyperparameters; the header must match it.
  PolicyParams<float> params = init_policy<float>(h, 0);
  const auto names = params.weights.names();
  auto ts = params.weights.tensors();
  const Json& listed = field<Json>(header, "tensors");
  if (listed.size() != ts.size()) {
    throw DimensionError("checkpoint: expected " + std::to_string(ts.size()) + " tensors, header lists " +
                         std::to_string(listed.size()));
  }
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const Json& t = listed[i];
    if (field<std::string>(t, "name") != names[i] || field<Index>(t, "rows") != ts[i]->rows() ||
        field<Index>(t, "cols") != ts[i]->cols()) {
      throw DimensionError("checkpoint: tensor " + std::to_string(i) + " does not match " + names[i] + " " +
                           std::to_string(ts[i]->rows()) + "x" + std::to_string(ts[i]->cols()));
    }
    need(static_cast<std::size_t>(ts[i]->size()) * 4);
    for (Index r = 0; r < ts[i]->rows(); ++r) {
      for (Index c = 0; c < ts[i]->cols(); ++c) {
        float v;
        std::memcpy(&v, bytes.data() + at, 4);
        at += 4;
        (*ts[i])(r, c) = v;
      }
    }
  }
  if (at != bytes.size()) throw DimensionError("checkpoint: trailing bytes after tensor data");
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const PolicyParams<float>& params) {
  write_text(path, encode_checkpoint(params));
}

PolicyParams<float> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_text(path));
}

}  // namespace rackopt::io
