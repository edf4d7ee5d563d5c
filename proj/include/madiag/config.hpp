#pragma once

#include <json.hpp>

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "madiag/instance.hpp"
#include "madiag/torus2d.hpp"
#include "madiag/transport1d.hpp"

namespace madiag {

/// Resolves an inline instance name. Accepted spellings:
///   quadratic_id[N], orthant[N], sine1d[:a], gauss_pair:SIGMA,
///   perturbed_gauss:EPS, manufactured[N][:SEED], transport:SRC:TGT
///   (TGT may itself be gauss:VAR), file:PATH (exported torus instance).
inline PotentialInstance make_instance(const std::string& name);

namespace config_detail {

inline int trailing_int(const std::string& s, const std::string& prefix, int dflt) {
  if (s.size() == prefix.size()) return dflt;
  return std::stoi(s.substr(prefix.size()));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace config_detail

/// Exports a solved torus instance: flat binary of the periodic correction u
/// (row-major doubles) plus a JSON header.
inline void export_torus_instance(const Torus2dImpl& impl, const std::string& vpert,
                                  const std::string& wpert, double residual, int newton_steps,
                                  const std::string& path_base) {
  {
    std::ofstream bin(path_base + ".bin", std::ios::binary);
    const auto& u = impl.u_grid();
    bin.write(reinterpret_cast<const char*>(u.data()),
              static_cast<std::streamsize>(u.size() * sizeof(double)));
  }
  nlohmann::ordered_json h;
  h["kind"] = "torus2d";
  h["n"] = 2;
  h["grid"] = {impl.grid_n(), impl.grid_n()};
  h["box"] = {{0.0, 0.0}, {2.0 * M_PI, 2.0 * M_PI}};
  h["data"] = "u";
  h["layout"] = "row-major float64";
  h["vpert"] = vpert;
  h["wpert"] = wpert;
  h["mean_shift"] = impl.mean_shift();
  h["residual"] = residual;
  h["newton_steps"] = newton_steps;
  std::ofstream hdr(path_base + ".json");
  hdr << h.dump(2) << "\n";
}

/// Exports a 1D transport instance as sampled derivative columns.
inline void export_transport_instance(const PotentialInstance& inst, const std::string& source,
                                      const std::string& target, const std::string& path_base,
                                      int samples = 512) {
  Box box = inst.sample_box();
  std::vector<double> rows;
  rows.reserve(static_cast<std::size_t>(samples) * 6);
  for (int k = 0; k < samples; ++k) {
    const double x = box.lo[0] + (box.hi[0] - box.lo[0]) * k / (samples - 1);
    rows.push_back(x);
    for (int m = 1; m <= 5; ++m) rows.push_back(inst.phi(m, {x})[0]);
  }
  {
    std::ofstream bin(path_base + ".bin", std::ios::binary);
    bin.write(reinterpret_cast<const char*>(rows.data()),
              static_cast<std::streamsize>(rows.size() * sizeof(double)));
  }
  nlohmann::ordered_json h;
  h["kind"] = "transport1d";
  h["n"] = 1;
  h["grid"] = {samples, 6};
  h["box"] = {{box.lo[0]}, {box.hi[0]}};
  h["data"] = "x, dPhi, d2Phi, d3Phi, d4Phi, d5Phi";
  h["layout"] = "row-major float64";
  h["source"] = source;
  h["target"] = target;
  std::ofstream hdr(path_base + ".json");
  hdr << h.dump(2) << "\n";
}

/// Loads an exported torus instance back (header + binary grid).
inline PotentialInstance load_instance_file(const std::string& header_path) {
  std::ifstream in(header_path);
  if (!in) throw EvalError("cannot open instance header " + header_path);
  nlohmann::json h = nlohmann::json::parse(in);
  if (h.value("kind", "") != "torus2d")
    throw EvalError("only torus2d instance files can be re-loaded");
  const int n = h["grid"][0].get<int>();
  std::string base = header_path;
  if (base.size() > 5 && base.substr(base.size() - 5) == ".json") base.resize(base.size() - 5);
  std::ifstream bin(base + ".bin", std::ios::binary);
  if (!bin) throw EvalError("cannot open instance data " + base + ".bin");
  std::vector<double> u(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  bin.read(reinterpret_cast<char*>(u.data()),
           static_cast<std::streamsize>(u.size() * sizeof(double)));
  if (!bin) throw EvalError("instance data truncated in " + base + ".bin");
  return PotentialInstance(std::make_shared<Torus2dImpl>(
      TrigPoly::parse(h.value("vpert", "0")), TrigPoly::parse(h.value("wpert", "0")), n,
      std::move(u), h.value("mean_shift", 0.0)));
}

inline PotentialInstance make_instance(const std::string& name) {
  using config_detail::split;
  using config_detail::trailing_int;
  if (name.rfind("quadratic_id", 0) == 0)
    return make_quadratic_id(trailing_int(name, "quadratic_id", 2));
  if (name.rfind("orthant", 0) == 0) return make_orthant(trailing_int(name, "orthant", 2));
  if (name.rfind("sine1d", 0) == 0) {
    auto parts = split(name, ':');
    return make_sine1d(parts.size() > 1 ? std::stod(parts[1]) : 1.0);
  }
  if (name.rfind("gauss_pair", 0) == 0) {
    auto parts = split(name, ':');
    return make_gauss_pair_1d(parts.size() > 1 ? std::stod(parts[1]) : 1.0);
  }
  if (name.rfind("perturbed_gauss", 0) == 0) {
    auto parts = split(name, ':');
    return make_perturbed_gauss_1d(parts.size() > 1 ? std::stod(parts[1]) : 0.2);
  }
  if (name.rfind("manufactured", 0) == 0) {
    auto parts = split(name, ':');
    const int n = trailing_int(parts[0], "manufactured", 2);
    const std::uint64_t seed = parts.size() > 1 ? std::stoull(parts[1]) : 42;
    return make_manufactured(n, seed);
  }
  if (name.rfind("transport:", 0) == 0) {
    auto parts = split(name.substr(10), ':');
    if (parts.empty() || parts.size() > 3)
      throw EvalError("transport instance name needs transport:SRC:TGT");
    const std::string src = parts[0];
    std::string tgt = parts.size() > 1 ? parts[1] : "gauss";
    if (parts.size() == 3) tgt += ":" + parts[2];
    return solve_transport_1d(src, tgt);
  }
  if (name.rfind("file:", 0) == 0) return load_instance_file(name.substr(5));
  throw EvalError("unknown instance name '" + name + "'");
}

// ---------------------------------------------------------------------------
// TOML subset reader (flat tables, strings, numbers, booleans, arrays) used
// for instance/suite config files; JSON configs pass through nlohmann.
// ---------------------------------------------------------------------------

namespace config_detail {

inline nlohmann::json toml_value(const std::string& raw) {
  std::string s = raw;
  auto trim = [](std::string& t) {
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
  };
  trim(s);
  if (s.empty()) return nullptr;
  if (s.front() == '"' && s.back() == '"' && s.size() >= 2)
    return s.substr(1, s.size() - 2);
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '[') {
    if (s.back() != ']') throw EvalError("toml: unterminated array");
    nlohmann::json arr = nlohmann::json::array();
    std::string body = s.substr(1, s.size() - 2);
    int depth = 0;
    std::string cur;
    for (char c : body) {
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == ',' && depth == 0) {
        arr.push_back(toml_value(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    trim(cur);
    if (!cur.empty()) arr.push_back(toml_value(cur));
    return arr;
  }
  try {
    if (s.find_first_of(".eE") != std::string::npos) return std::stod(s);
    return static_cast<std::int64_t>(std::stoll(s));
  } catch (...) {
    throw EvalError("toml: cannot parse value '" + s + "'");
  }
}

}  // namespace config_detail

/// Reads a config file as JSON when it starts with '{', otherwise as the
/// TOML subset (key = value lines and [section] tables).
inline nlohmann::json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EvalError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return nlohmann::json::parse(text);

  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    std::size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    if (line.front() == '[') {
      if (line.back() != ']') throw EvalError("toml: malformed section header");
      std::string sec = line.substr(1, line.size() - 2);
      table = &root[sec];
      if (table->is_null()) *table = nlohmann::json::object();
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw EvalError("toml: expected key = value");
    std::string key = line.substr(0, eq);
    while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
    (*table)[key] = config_detail::toml_value(line.substr(eq + 1));
  }
  return root;
}

/// Builds an instance from a config spec {name, params...} (JSON or the TOML
/// subset's root table).
inline PotentialInstance instance_from_spec(const nlohmann::json& spec) {
  if (spec.is_string()) return make_instance(spec.get<std::string>());
  const std::string name = spec.value("name", "");
  if (name.empty()) throw EvalError("instance spec needs a 'name'");
  if (name == "transport1d")
    return solve_transport_1d(spec.value("source", "gauss"), spec.value("target", "gauss"));
  if (name == "torus2d") {
    return solve_ma_torus_2d(spec.value("vpert", "0"), spec.value("wpert", "0"),
                             spec.value("grid", 64));
  }
  std::string inline_name = name;
  if (spec.contains("params")) {
    for (const auto& p : spec["params"]) {
      std::ostringstream os;
      if (p.is_string()) os << ":" << p.get<std::string>();
      else os << ":" << p.dump();
      inline_name += os.str();
    }
  }
  return make_instance(inline_name);
}

}  // namespace madiag
