#include "indiff/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "indiff/errors.hpp"
#include "indiff/numeric.hpp"
#include "tomlplusplus/toml.hpp"

namespace indiff::io {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

double as_double(const Json& j, const std::string& what, const std::string& source) {
  if (!j.is_number()) throw ConfigError(what + " must be a number", source);
  return j.get<double>();
}

std::vector<double> as_vector(const Json& j, const std::string& what, const std::string& source) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) throw ConfigError(what + " must be a number or an array of numbers", source);
  std::vector<double> out;
  for (const auto& x : j) out.push_back(as_double(x, what, source));
  return out;
}

toml::table parse_toml(const std::string& path) {
  const auto text = read_file(path);
  try {
    return toml::parse(text, path);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string(e.description()), path, static_cast<int>(e.source().begin.line));
  }
}

int toml_line(const toml::node* n) { return n ? static_cast<int>(n->source().begin.line) : 0; }

double toml_number(const toml::table& t, const std::string& key, const std::string& path,
                   std::optional<double> fallback = {}) {
  const toml::node* n = t.get(key);
  if (!n) {
    if (fallback) return *fallback;
    throw ConfigError("missing key '" + key + "'", path, toml_line(&t));
  }
  if (auto v = n->value<double>()) return *v;
  throw ConfigError("'" + key + "' must be a number", path, toml_line(n));
}

std::vector<JumpAtom> toml_jumps(const toml::table& t, const std::string& path) {
  std::vector<JumpAtom> out;
  const toml::node* n = t.get("jumps");
  if (!n) return out;
  const auto* arr = n->as_array();
  if (!arr) throw ConfigError("'jumps' must be an array of [x, mass] pairs", path, toml_line(n));
  for (const auto& e : *arr) {
    const auto* pair = e.as_array();
    if (!pair || pair->size() != 2) throw ConfigError("each jump must be [x, mass]", path, toml_line(&e));
    const auto x = (*pair)[0].value<double>();
    const auto mass = (*pair)[1].value<double>();
    if (!x || !mass) throw ConfigError("jump entries must be numbers", path, toml_line(&e));
    out.push_back({*x, *mass});
  }
  return out;
}

// TOML document as JSON, so one panel reader serves both formats.
Json toml_to_json(const toml::node& n) {
  if (const auto* t = n.as_table()) {
    Json out = Json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = n.as_array()) {
    Json out = Json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (auto v = n.value<double>()) return *v;
  if (auto v = n.value<std::string>()) return *v;
  if (auto v = n.value<bool>()) return *v;
  return nullptr;
}

MarketMakerPanel panel_from_json(const Json& j, const std::string& path, const toml::table* toml_root) {
  auto line_for_maker = [&](std::size_t i) {
    if (!toml_root) return 0;
    if (const auto* arr = toml_root->get_as<toml::array>("maker"); arr && i < arr->size())
      return toml_line(arr->get(i));
    return 0;
  };
  if (!j.is_object() || !j.contains("maker") || !j["maker"].is_array() || j["maker"].empty())
    throw ConfigError("panel needs at least one [[maker]] entry", path);
  MarketMakerPanel panel;
  std::size_t i = 0;
  for (const auto& m : j["maker"]) {
    const int line = line_for_maker(i++);
    const std::string kind = m.value("kind", std::string("exponential"));
    try {
      if (kind == "exponential") {
        if (!m.contains("alpha")) throw ConfigError("exponential maker needs 'alpha'", path, line);
        panel.makers.push_back(UtilitySpec::exponential(as_double(m["alpha"], "alpha", path)));
      } else if (kind == "mixture") {
        if (!m.contains("atoms") || !m["atoms"].is_array())
          throw ConfigError("mixture maker needs 'atoms' = [[risk_aversion, weight], ...]", path, line);
        std::vector<ExponentialAtom> atoms;
        for (const auto& a : m["atoms"]) {
          if (!a.is_array() || a.size() != 2) throw ConfigError("mixture atoms are [risk_aversion, weight]", path, line);
          atoms.push_back({as_double(a[0], "risk_aversion", path), as_double(a[1], "weight", path)});
        }
        panel.makers.push_back(UtilitySpec::mixture(std::move(atoms)));
      } else {
        throw ConfigError("unknown maker kind '" + kind + "'", path, line);
      }
    } catch (const InvalidUtility& e) {
      throw ConfigError(e.what(), path, line);
    }
    panel.initial_allocation.push_back(m.contains("initial_wealth") ? as_double(m["initial_wealth"], "initial_wealth", path) : 0.0);
  }
  if (j.contains("endowment_base")) panel.endowment_base = as_double(j["endowment_base"], "endowment_base", path);
  if (j.contains("endowment_position"))
    panel.endowment_position = as_vector(j["endowment_position"], "endowment_position", path);
  try {
    panel.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what(), path);
  }
  return panel;
}

}  // namespace

Json read_json(const std::string& path) {
  const auto text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("invalid JSON", path, line_of(text, e.byte == 0 ? 0 : e.byte - 1));
  }
}

ScenarioTree tree_from_json(const Json& j, const std::string& source) {
  if (!j.is_object() || !j.contains("root")) throw ConfigError("tree needs a 'root' object", source);
  const int J = j.contains("securities") ? static_cast<int>(as_double(j["securities"], "securities", source)) : 1;
  TreeBuilder b(J);
  std::function<void(const Json&, TreeBuilder::Handle)> grow = [&](const Json& node, TreeBuilder::Handle h) {
    if (node.contains("payoff")) {
      b.set_payoff(h, as_vector(node["payoff"], "payoff", source));
      return;
    }
    if (!node.contains("children") || !node["children"].is_array())
      throw ConfigError("node '" + node.value("id", std::string("?")) + "' needs 'children' or 'payoff'", source);
    for (const auto& c : node["children"]) {
      if (!c.is_object() || !c.contains("prob")) throw ConfigError("child nodes need 'prob'", source);
      grow(c, b.add_child(h, as_double(c["prob"], "prob", source), c.value("id", std::string())));
    }
  };
  const auto& root = j["root"];
  grow(root, b.add_root(root.value("id", std::string("root"))));
  try {
    return b.build();
  } catch (const InvalidTree& e) {
    throw ConfigError(e.what(), source);
  }
}

ScenarioTree load_tree(const std::string& path) { return tree_from_json(read_json(path), path); }

Json tree_to_json(const ScenarioTree& tree) {
  std::function<Json(NodeIndex)> emit = [&](NodeIndex n) {
    const auto& nd = tree.node(n);
    Json out{{"id", nd.id}};
    if (nd.parent) out["prob"] = nd.prob;
    if (nd.is_leaf()) {
      const auto psi = tree.payoff(nd.leaf_begin);
      out["payoff"] = std::vector<double>(psi.begin(), psi.end());
    } else {
      out["children"] = Json::array();
      for (NodeIndex c : nd.children) out["children"].push_back(emit(c));
    }
    return out;
  };
  return {{"securities", tree.securities()}, {"root", emit(tree.root())}};
}

MarketMakerPanel load_panel(const std::string& path) {
  if (ends_with(path, ".json")) return panel_from_json(read_json(path), path, nullptr);
  const auto t = parse_toml(path);
  return panel_from_json(toml_to_json(t), path, &t);
}

ModelFile load_model(const std::string& path) {
  const auto j = read_json(path);
  ModelFile out{tree_from_json(j, path), {}};
  if (!j.contains("alpha")) throw ConfigError("model needs 'alpha'", path);
  out.panel.makers.push_back(UtilitySpec::exponential(as_double(j["alpha"], "alpha", path)));
  out.panel.initial_allocation = {0.0};
  if (j.contains("endowment")) {
    const auto& e = j["endowment"];
    if (e.contains("base")) out.panel.endowment_base = as_double(e["base"], "endowment.base", path);
    if (e.contains("position")) out.panel.endowment_position = as_vector(e["position"], "endowment.position", path);
  }
  try {
    out.panel.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what(), path);
  }
  return out;
}

std::vector<double> load_claim(const std::string& path, const ScenarioTree& tree) {
  const auto j = read_json(path);
  if (!j.contains("values") || !j["values"].is_object()) throw ConfigError("claim needs a 'values' object", path);
  const auto& v = j["values"];
  std::vector<double> out(tree.leaf_count());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& id = tree.node(tree.leaf_node(k)).id;
    if (!v.contains(id)) throw ConfigError("claim has no value for leaf '" + id + "'", path);
    out[k] = as_double(v[id], "claim value", path);
  }
  for (const auto& [id, _] : v.items()) {
    const auto n = tree.find(id);
    if (!n || !tree.node(*n).is_leaf()) throw ConfigError("claim names unknown leaf '" + id + "'", path);
  }
  return out;
}

Strategy load_strategy(const std::string& path, const ScenarioTree& tree) {
  const auto j = read_json(path);
  if (!j.contains("positions") || !j["positions"].is_object())
    throw ConfigError("strategy needs a 'positions' object", path);
  Strategy s(tree);
  for (const auto& [id, q] : j["positions"].items()) {
    const auto n = tree.find(id);
    if (!n || tree.node(*n).is_leaf()) throw ConfigError("strategy names unknown or leaf node '" + id + "'", path);
    const auto v = as_vector(q, "position", path);
    if (v.size() != s.securities()) throw ConfigError("position at '" + id + "' has the wrong dimension", path);
    std::copy(v.begin(), v.end(), s.at(*n).begin());
  }
  return s;
}

LevyTriplet load_levy(const std::string& path) {
  const auto t = parse_toml(path);
  LevyTriplet out{toml_number(t, "b", path, 0.0), toml_number(t, "c", path, 0.0), toml_jumps(t, path)};
  try {
    out.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what(), path);
  }
  return out;
}

BNSFile load_bns(const std::string& path) {
  const auto t = parse_toml(path);
  BNSFile out;
  auto& p = out.params;
  p.m = toml_number(t, "m", path, 0.0);
  p.beta = toml_number(t, "beta", path, 0.0);
  p.lambda = toml_number(t, "lambda", path);
  p.rho = toml_number(t, "rho", path);
  p.sigma0_sq = toml_number(t, "sigma0_sq", path);
  p.subordinator.jumps = toml_jumps(t, path);
  if (const auto* check = t.get_as<toml::table>("check")) {
    out.t = toml_number(*check, "t", path, out.t);
    out.h = toml_number(*check, "h", path, out.h);
    out.T = toml_number(*check, "T", path, out.T);
    const double paths = toml_number(*check, "paths", path, static_cast<double>(out.paths));
    if (!(paths >= 1.0)) throw ConfigError("'paths' must be at least 1", path, toml_line(check));
    out.paths = static_cast<std::size_t>(paths);
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what(), path);
  }
  return out;
}

std::vector<double> load_samples(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto cell = line.substr(0, line.find(','));
    if (cell.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      if (lineno == 1) continue;
      throw ConfigError("not a number: '" + cell + "'", path, lineno);
    }
  }
  if (out.empty()) throw ConfigError("no samples", path);
  return out;
}

Json number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

Json canonical(const Json& j) {
  if (j.is_object()) {
    Json out = Json::object();
    for (const auto& [k, v] : j.items()) out[k] = canonical(v);
    return out;
  }
  if (j.is_array()) {
    Json out = Json::array();
    for (const auto& v : j) out.push_back(canonical(v));
    return out;
  }
  if (j.is_number_float()) {
    const double x = j.get<double>();
    return std::isfinite(x) ? Json(numeric::round_significant(x, 15)) : number(x);
  }
  return j;
}

namespace {

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  std::string s = buf;
  // Keep floats recognizable as such, matching the usual JSON rendering.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void emit(std::string& out, const Json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  const std::string close(static_cast<std::size_t>(indent), ' ');
  if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    bool first = true;
    for (const auto& [k, v] : j.items()) {
      if (!first) out += ",\n";
      first = false;
      out += pad + Json(k).dump() + ": ";
      emit(out, v, indent + 2);
    }
    out += "\n" + close + "}";
  } else if (j.is_array()) {
    if (j.empty()) {
      out += "[]";
      return;
    }
    out += "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out += ",\n";
      out += pad;
      emit(out, j[i], indent + 2);
    }
    out += "\n" + close + "]";
  } else if (j.is_number_float()) {
    out += format_number(j.get<double>());
  } else {
    out += j.dump();
  }
}

}  // namespace

std::string dump(const Json& j) {
  std::string out;
  emit(out, canonical(j), 0);
  return out + "\n";
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file", path);
  out << dump(j);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<Json>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file", path);
  auto cell = [](const Json& v) -> std::string {
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (!std::isfinite(x)) return number(x).get<std::string>();
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.15g", x);
      return buf;
    }
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  };
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << cell(row[i]);
    out << "\n";
  }
}

}  // namespace indiff::io
