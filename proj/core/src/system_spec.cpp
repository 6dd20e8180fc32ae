#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bmech/sysdsl.hpp"

namespace bmech {

namespace {

using nlohmann::json;

constexpr int kMaxDim = 16;

Expr parse_field(const std::string& field, const std::string& text, const SymbolTable& symbols,
                 const ParamTable& params) {
  try {
    return parse_expression(text, symbols, params);
  } catch (ParseError& e) {
    e.set_field(field);
    throw;
  }
}

const json& require(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw SpecError(std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& v, const std::string& field) {
  if (!v.is_string()) throw SpecError("field '" + field + "' must be a string");
  return v.get<std::string>();
}

bool valid_param_name(const std::string& s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!alpha(s[0])) return false;
  for (char c : s)
    if (!alpha(c) && !(c >= '0' && c <= '9')) return false;
  return true;
}

}  // namespace

SystemSpec parse_system_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SpecError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SpecError("system description must be a JSON object");

  SystemSpec spec;
  if (auto it = doc.find("name"); it != doc.end()) spec.name = require_string(*it, "name");

  const json& dim = require(doc, "dim");
  if (!dim.is_number_integer() || dim.get<long long>() < 1 || dim.get<long long>() > kMaxDim)
    throw SpecError("field 'dim' must be an integer in 1.." + std::to_string(kMaxDim));
  spec.dim = dim.get<int>();

  if (auto it = doc.find("parameters"); it != doc.end()) {
    if (!it->is_object()) throw SpecError("field 'parameters' must be an object");
    const SymbolTable vars = SymbolTable::lagrangian(spec.dim);
    for (const auto& [name, value] : it->items()) {
      if (!valid_param_name(name)) throw SpecError("invalid parameter name '" + name + "'");
      if (!value.is_number()) throw SpecError("parameter '" + name + "' must be a number");
      bool clash = name == "pi" || name == "sin" || name == "cos" || name == "exp" ||
                   name == "log" || name == "sqrt" || name == "abs";
      try {
        clash = clash || vars.lookup(name, 1, 1).has_value();
      } catch (const DimensionMismatch&) {
        clash = true;
      }
      if (clash) throw SpecError("parameter '" + name + "' shadows a reserved name");
      spec.parameters.set(name, value.get<double>());
    }
  }

  spec.lagrangian = parse_field("lagrangian", require_string(require(doc, "lagrangian"), "lagrangian"),
                                SymbolTable::lagrangian(spec.dim), spec.parameters);

  const SymbolTable config = SymbolTable::configuration(spec.dim);
  if (auto it = doc.find("metric"); it != doc.end() && !it->is_null()) {
    if (!it->is_array() || static_cast<int>(it->size()) != spec.dim)
      throw SpecError("field 'metric' must be a " + std::to_string(spec.dim) + "x" +
                      std::to_string(spec.dim) + " array of strings");
    std::vector<std::vector<Expr>> g(spec.dim);
    for (int a = 0; a < spec.dim; ++a) {
      const json& row = (*it)[a];
      if (!row.is_array() || static_cast<int>(row.size()) != spec.dim)
        throw SpecError("metric row " + std::to_string(a + 1) + " must have " +
                        std::to_string(spec.dim) + " entries");
      for (int b = 0; b < spec.dim; ++b) {
        const std::string field = "metric[" + std::to_string(a + 1) + "][" + std::to_string(b + 1) + "]";
        g[a].push_back(parse_field(field, require_string(row[b], field), config, spec.parameters));
      }
    }
    for (int a = 0; a < spec.dim; ++a)
      for (int b = a + 1; b < spec.dim; ++b)
        if (print(g[a][b]) != print(g[b][a]))
          throw SpecError("metric is not symmetric: entries (" + std::to_string(a + 1) + "," +
                          std::to_string(b + 1) + ") and (" + std::to_string(b + 1) + "," +
                          std::to_string(a + 1) + ") differ");
    spec.metric = std::move(g);
  }

  if (auto it = doc.find("potential"); it != doc.end() && !it->is_null())
    spec.potential = parse_field("potential", require_string(*it, "potential"), config,
                                 spec.parameters);

  const json& domain = require(doc, "domain");
  if (!domain.is_array() || static_cast<int>(domain.size()) != spec.dim)
    throw SpecError("field 'domain' must list one interval per coordinate (" +
                    std::to_string(spec.dim) + ")");
  for (int a = 0; a < spec.dim; ++a) {
    const json& d = domain[a];
    if (!d.is_object()) throw SpecError("domain entry " + std::to_string(a + 1) + " must be an object");
    DomainInterval iv;
    const json& lo = require(d, "min");
    const json& hi = require(d, "max");
    if (!lo.is_number() || !hi.is_number())
      throw SpecError("domain entry " + std::to_string(a + 1) + " needs numeric min and max");
    iv.min = lo.get<double>();
    iv.max = hi.get<double>();
    if (!(iv.min < iv.max))
      throw SpecError("domain entry " + std::to_string(a + 1) + " has min >= max");
    if (auto p = d.find("periodic"); p != d.end()) {
      if (!p->is_boolean()) throw SpecError("domain 'periodic' must be a boolean");
      iv.periodic = p->get<bool>();
    }
    spec.domain.push_back(iv);
  }
  return spec;
}

SystemSpec load_system_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot open spec file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_system_spec(ss.str());
}

std::string format_diagnostic(const ParseError& err) {
  std::string out;
  if (!err.field().empty()) out = err.field() + ":";
  out += std::to_string(err.line()) + ":" + std::to_string(err.col()) + ": " + err.detail();
  return out;
}

}  // namespace bmech
