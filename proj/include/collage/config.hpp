#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "collage/cost.hpp"
#include "collage/graph_io.hpp"
#include "collage/pattern.hpp"
#include "collage/pattern_gen.hpp"
#include "collage/registry.hpp"

namespace collage {

inline constexpr std::string_view kBackendsFormat = "collage-backends/1";
inline constexpr std::string_view kRegistryFormat = "collage-registry/1";

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct BackendConfig {
  BackendDescriptor descriptor;
  SimProfile profile;
  std::vector<Pattern> patterns;
  std::vector<PatternRule> rules;
};

struct BackendsConfig {
  std::optional<double> epsilon_ms;
  std::vector<BackendConfig> backends;
};

namespace detail {

// Either an inline JSON object or a path (relative to `base`) to a JSON file.
inline Json inline_or_file(const Json& j, const std::filesystem::path& base, const std::string& where) {
  if (j.is_object()) return j;
  if (!j.is_string()) throw Error(ErrorCode::kParse, where + " must be an object or a file path");
  return parse_json(read_file(base / j.get<std::string>()));
}

}  // namespace detail

/// Parses a backend config. Relative file references resolve against `base`.
/// Each profile is bound to its backend id regardless of the id in the file.
inline BackendsConfig config_from_json(const Json& doc, const std::filesystem::path& base) {
  using detail::require;
  detail::reject_unknown_fields(doc, {"version", "epsilon_ms", "backends"}, "backend config");
  detail::require_version(doc, kBackendsFormat);
  BackendsConfig cfg;
  if (doc.contains("epsilon_ms")) {
    if (!doc.at("epsilon_ms").is_number()) throw Error(ErrorCode::kParse, "epsilon_ms must be a number");
    cfg.epsilon_ms = doc.at("epsilon_ms").get<double>();
  }
  for (const auto& b : require(doc, "backends", "backend config")) {
    detail::reject_unknown_fields(b, {"id", "kind", "cost_profile", "patterns", "rules"}, "backend entry");
    BackendConfig bc;
    bc.descriptor.id = require(b, "id", "backend entry").get<std::string>();
    const std::string where = "backend '" + bc.descriptor.id + "'";
    bc.descriptor.kind = backend_kind_from_string(require(b, "kind", where).get<std::string>());
    const auto& prof = require(b, "cost_profile", where);
    bc.descriptor.cost_profile = prof.is_string() ? prof.get<std::string>() : bc.descriptor.id;
    bc.profile = profile_from_json(detail::inline_or_file(prof, base, where + " cost_profile"));
    bc.profile.backend = bc.descriptor.id;
    if (b.contains("patterns"))
      for (const auto& p : b.at("patterns")) {
        if (!p.is_string()) throw Error(ErrorCode::kParse, where + " patterns must be DSL strings");
        bc.patterns.push_back(parse_pattern(p.get<std::string>()));
      }
    if (b.contains("rules"))
      for (const auto& r : b.at("rules")) {
        auto rule = rule_from_json(detail::inline_or_file(r, base, where + " rule"));
        rule.backend = bc.descriptor.id;
        bc.rules.push_back(std::move(rule));
      }
    cfg.backends.push_back(std::move(bc));
  }
  return cfg;
}

inline BackendsConfig load_config(const std::filesystem::path& path) {
  return config_from_json(detail::parse_json(read_file(path)), path.parent_path());
}

/// Registry, measurer and epsilon ready for one graph.
struct Setup {
  PatternRegistry registry;
  SimMeasurer measurer;
  Epsilon epsilon;
  std::vector<std::string> warnings;
};

/// Registers every backend in config order: explicit patterns first, then
/// each rule's patterns generated on `g`. Warns about op kinds of `g` that no
/// backend can cover.
inline Setup build_setup(const BackendsConfig& cfg, const ComputationGraph& g,
                         std::optional<double> epsilon_override = std::nullopt) {
  Setup s{{}, {}, Epsilon(epsilon_override.value_or(cfg.epsilon_ms.value_or(Epsilon::kDefaultMs))), {}};
  for (const auto& b : cfg.backends) {
    s.registry.add_backend(b.descriptor);
    s.measurer.add_profile(b.profile);
    for (const auto& p : b.patterns) s.registry.add_pattern(b.descriptor.id, p);
    for (const auto& r : b.rules) s.registry.add_pattern_rule(b.descriptor.id, r, g);
  }
  for (const auto& op : s.registry.uncovered_op_kinds(g))
    s.warnings.push_back("op kind '" + op + "' has no candidate backend");
  return s;
}

// ---------------------------------------------------------------------------
// Registry snapshots ("collage-registry/1")

inline Json registry_to_json(const PatternRegistry& reg) {
  Json doc;
  doc["version"] = kRegistryFormat;
  doc["backends"] = Json::array();
  for (const auto& b : reg.backends())
    doc["backends"].push_back({{"id", b.id}, {"kind", to_string(b.kind)}, {"cost_profile", b.cost_profile}});
  doc["patterns"] = Json::array();
  for (const auto& p : reg.patterns())
    doc["patterns"].push_back({{"backend", p.backend},
                               {"pattern", p.pattern.text()},
                               {"source", p.source == PatternSource::kExplicit ? "explicit" : "generated"}});
  return doc;
}

inline PatternRegistry registry_from_json(const Json& doc) {
  using detail::require;
  detail::reject_unknown_fields(doc, {"version", "backends", "patterns"}, "registry");
  detail::require_version(doc, kRegistryFormat);
  PatternRegistry reg;
  for (const auto& b : require(doc, "backends", "registry")) {
    detail::reject_unknown_fields(b, {"id", "kind", "cost_profile"}, "registry backend");
    reg.add_backend({require(b, "id", "registry backend").get<std::string>(),
                     backend_kind_from_string(require(b, "kind", "registry backend").get<std::string>()),
                     b.value("cost_profile", std::string())});
  }
  for (const auto& p : require(doc, "patterns", "registry")) {
    detail::reject_unknown_fields(p, {"backend", "pattern", "source"}, "registry pattern");
    const auto source = p.value("source", std::string("explicit"));
    if (source != "explicit" && source != "generated")
      throw Error(ErrorCode::kParse, "unknown pattern source '" + source + "'");
    reg.add_pattern(require(p, "backend", "registry pattern").get<std::string>(),
                    parse_pattern(require(p, "pattern", "registry pattern").get<std::string>()),
                    source == "explicit" ? PatternSource::kExplicit : PatternSource::kGenerated);
  }
  return reg;
}

}  // namespace collage
