#pragma once

// File formats. Cell and subset conventions follow VarSet: the first listed
// variable is bit 0. Parse errors throw DomainError naming the line or field.
//
//   table    {"variables": ["1","2"], "p": [p00, p10, p01, p11]}
//   spec     text, one margin per line: "123: 13 123" (single-char names,
//            variables sorted by name, '#' starts a comment), or JSON
//            {"variables": [...], "pairs": [{"margin": [...], "effect": [...]}]}
//   lambda   {"spec": <spec JSON>, "values": [...]}
//   chain    {"variables": [...], "blocks": [[...], ...],
//             "conditionals": [{"target": [...], "given": [...], "values": [...]}]}
//            or {"table": <table JSON>, "blocks": [[...], ...]}
//   ci       text, one statement per line: "1 _||_ 2 | 3" with an optional
//            "variables: 1 2 3 4" line, or JSON {"variables": [...],
//            "statements": [{"a": [...], "b": [...], "c": [...]}],
//            "embedding": <spec JSON>}

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mll/cimodels.hpp"
#include "mll/classify.hpp"
#include "mll/marginal.hpp"
#include "mll/solvers.hpp"
#include "mll/tables.hpp"

namespace mll::io {

using nlohmann::json;

std::string read_file(const std::string& path);
json parse_json(std::string_view text, const std::string& what);

json to_json(const VarSet& vars, Subset s);
json to_json(const JointTable& t);
json to_json(const MLLSpec& spec);
json to_json(const MLLVector& v);
json to_json(const SolveResult& r, bool trace);
json to_json(const ClassificationReport& r, const VarSet& vars);
json to_json(const CIStatement& s, const VarSet& vars);

VarSet parse_variables(const json& j, const std::string& field);
Subset parse_subset(const json& j, const VarSet& vars, const std::string& field);
JointTable parse_table(const json& j);
MLLSpec parse_spec(const json& j);
MLLVector parse_lambda(const json& j);
CycleChainSpec parse_chain(const json& j);

MLLSpec parse_spec_text(std::string_view text);
std::string spec_to_text(const MLLSpec& spec);
/// JSON if the first non-blank character is '{', else the text format.
MLLSpec parse_spec_any(std::string_view content);

struct CIModelInput {
  VarSet vars;
  std::vector<CIStatement> statements;
  std::optional<MLLSpec> embedding;
};

CIModelInput parse_ci_text(std::string_view text);
CIModelInput parse_ci(const json& j);
CIModelInput parse_ci_any(std::string_view content);

/// A bare array or {"free_values": [...]}.
std::vector<double> parse_values(const json& j, const std::string& field);

}  // namespace mll::io
