#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <compare>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "collage/graph.hpp"
#include "collage/graph_io.hpp"
#include "collage/pattern.hpp"

namespace collage {

/// Execution cost in fixed point (1 tick = 1e-9 ms). Kernel costs are rounded
/// once when they enter an optimizer; every later sum is exact, so totals do
/// not depend on summation order.
class Cost {
 public:
  static constexpr double kTicksPerMs = 1e9;

  constexpr Cost() = default;

  static Cost from_ms(double ms) {
    if (!std::isfinite(ms) || ms < 0)
      throw Error(ErrorCode::kMeasure, "cost must be finite and non-negative, got " + std::to_string(ms));
    return Cost(std::llround(ms * kTicksPerMs));
  }
  static constexpr Cost from_ticks(std::int64_t ticks) { return Cost(ticks); }
  static constexpr Cost infinity() { return Cost(std::numeric_limits<std::int64_t>::max()); }

  constexpr bool is_infinite() const { return ticks_ == std::numeric_limits<std::int64_t>::max(); }
  constexpr std::int64_t ticks() const { return ticks_; }
  double ms() const {
    return is_infinite() ? std::numeric_limits<double>::infinity() : static_cast<double>(ticks_) / kTicksPerMs;
  }

  Cost scaled(double factor) const {
    if (is_infinite()) return *this;
    return Cost(std::llround(static_cast<double>(ticks_) * factor));
  }

  friend constexpr Cost operator+(Cost a, Cost b) {
    if (a.is_infinite() || b.is_infinite()) return infinity();
    return Cost(a.ticks_ + b.ticks_);
  }
  Cost& operator+=(Cost other) { return *this = *this + other; }
  constexpr auto operator<=>(const Cost&) const = default;

 private:
  constexpr explicit Cost(std::int64_t ticks) : ticks_(ticks) {}
  std::int64_t ticks_ = 0;
};

/// Per-kernel context-switch cost.
class Epsilon {
 public:
  static constexpr double kDefaultMs = 0.01;

  constexpr Epsilon() = default;
  explicit Epsilon(double ms) : ms_(ms) {
    if (!std::isfinite(ms) || ms < 0) throw Error(ErrorCode::kValidation, "epsilon must be >= 0");
  }
  double ms() const { return ms_; }
  Cost cost() const { return Cost::from_ms(ms_); }

 private:
  double ms_ = kDefaultMs;
};

struct OpCostModel {
  double coeff_ms_per_elem = 0.0;
  double overhead_ms = 0.0;
};

/// Cross-kernel discount applied by graph inference libraries to a contiguous
/// region of n kernels: r(n) = max(min_factor, 1 - alpha * (n - 1)).
/// alpha == 0 disables regions entirely (kernels are charged additively).
struct RegionModel {
  double alpha = 0.05;
  double min_factor = 0.7;

  bool enabled() const { return alpha > 0; }
  double factor(std::size_t n) const {
    return std::max(min_factor, 1.0 - alpha * static_cast<double>(n > 0 ? n - 1 : 0));
  }
};

/// Deterministic stand-in for profiling one backend.
struct SimProfile {
  std::string backend;
  std::map<std::string, OpCostModel> ops;
  double fusion_discount = 1.0;
  RegionModel region;

  void validate() const {
    if (backend.empty()) throw Error(ErrorCode::kValidation, "cost profile without backend id");
    for (const auto& [op, m] : ops)
      if (!(m.coeff_ms_per_elem >= 0) || !(m.overhead_ms >= 0) || !std::isfinite(m.coeff_ms_per_elem) ||
          !std::isfinite(m.overhead_ms))
        throw Error(ErrorCode::kValidation, "cost profile '" + backend + "': coefficients for '" + op + "' must be >= 0");
    if (!(fusion_discount > 0 && fusion_discount <= 1))
      throw Error(ErrorCode::kValidation, "cost profile '" + backend + "': fusion_discount must be in (0, 1]");
    if (!(region.alpha >= 0) || !(region.min_factor > 0 && region.min_factor <= 1))
      throw Error(ErrorCode::kValidation, "cost profile '" + backend + "': bad region model");
  }
};

/// Canonical, position-independent description of the subgraph `nodes`:
/// op kinds, attributes, shapes and internal edges, walked from each exit in
/// input order. Isomorphic subgraphs with equal attrs/shapes get equal strings.
inline std::string kernel_fingerprint(const ComputationGraph& g, const NodeSet& nodes) {
  auto describe = [&](NodeId exit) {
    std::map<NodeId, int> seen;
    std::string out;
    std::function<void(NodeId)> walk = [&](NodeId v) {
      if (auto it = seen.find(v); it != seen.end()) {
        out += "@" + std::to_string(it->second);
        return;
      }
      const int label = static_cast<int>(seen.size());
      seen.emplace(v, label);
      const auto& node = g.node(v);
      out += node.op;
      if (!node.attrs.empty()) {
        out += "{";
        bool first = true;
        for (const auto& [k, val] : node.attrs) {
          if (!first) out += ",";
          first = false;
          out += k + "=" + detail::attr_to_json(val).dump();
        }
        out += "}";
      }
      out += "<";
      for (std::size_t i = 0; i < node.shape.size(); ++i) out += (i ? "x" : "") + std::to_string(node.shape[i]);
      out += ">(";
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        if (i) out += ",";
        const auto& in = node.inputs[i];
        if (in.is_node() && contains(nodes, in.node()))
          walk(in.node());
        else
          out += "_";
      }
      out += ")";
    };
    walk(exit);
    return out;
  };

  std::vector<std::string> parts;
  for (auto v : nodes) {
    bool inner = false;
    for (auto c : g.consumers(v)) inner = inner || contains(nodes, c);
    if (!inner) parts.push_back(describe(v));
  }
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "|" : "") + parts[i];
  return out;
}

struct KernelKey {
  std::string backend;
  std::string fingerprint;

  auto operator<=>(const KernelKey&) const = default;
};

struct KernelKeyHash {
  std::size_t operator()(const KernelKey& k) const {
    return std::hash<std::string>{}(k.backend) * 31 + std::hash<std::string>{}(k.fingerprint);
  }
};

struct CostRecord {
  KernelKey key;
  double cost_ms = 0.0;

  bool operator==(const CostRecord&) const = default;
};

/// Thread-safe kernel-cost log. Persisted as JSONL
/// (`{"key":{"backend":..,"fingerprint":..},"cost_ms":..}` per line);
/// saving appends only records not yet written or loaded.
class CostCache {
 public:
  CostCache() = default;
  CostCache(const CostCache& other) {
    std::lock_guard lock(other.mu_);
    entries_ = other.entries_;
    order_ = other.order_;
  }

  std::optional<double> lookup(const KernelKey& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second.cost_ms;
  }

  void insert(const KernelKey& key, double cost_ms, bool persisted = false) {
    if (!std::isfinite(cost_ms) || cost_ms < 0)
      throw Error(ErrorCode::kValidation, "cached cost must be finite and non-negative");
    std::lock_guard lock(mu_);
    auto [it, fresh] = entries_.try_emplace(key, Entry{cost_ms, persisted});
    if (fresh) {
      order_.push_back(key);
    } else {
      it->second.cost_ms = cost_ms;
      it->second.persisted = persisted;
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

  std::vector<CostRecord> records() const {
    std::lock_guard lock(mu_);
    std::vector<CostRecord> out;
    for (const auto& k : order_) out.push_back({k, entries_.at(k).cost_ms});
    return out;
  }

  static std::string to_line(const CostRecord& r) {
    Json j;
    j["key"] = {{"backend", r.key.backend}, {"fingerprint", r.key.fingerprint}};
    j["cost_ms"] = r.cost_ms;
    return j.dump();
  }

  /// Loads records (last one wins on duplicate keys). Corrupt lines are
  /// skipped and reported as "line N: reason".
  std::vector<std::string> load(std::istream& in) {
    std::vector<std::string> warnings;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        auto j = Json::parse(line);
        const auto& key = j.at("key");
        KernelKey k{key.at("backend").get<std::string>(), key.at("fingerprint").get<std::string>()};
        const auto& c = j.at("cost_ms");
        if (!c.is_number()) throw std::runtime_error("cost_ms is not a number");
        insert(k, c.get<double>(), true);
      } catch (const std::exception& e) {
        warnings.push_back("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return warnings;
  }

  std::vector<std::string> load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) return {};
    return load(in);
  }

  /// Appends every record not yet persisted.
  void append_to(std::ostream& out) {
    std::lock_guard lock(mu_);
    for (const auto& k : order_) {
      auto& e = entries_.at(k);
      if (e.persisted) continue;
      out << to_line({k, e.cost_ms}) << "\n";
      e.persisted = true;
    }
  }

  void save_file(const std::string& path) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error(ErrorCode::kNotFound, "cannot open cost cache '" + path + "' for writing");
    append_to(out);
  }

 private:
  struct Entry {
    double cost_ms;
    bool persisted;
  };
  mutable std::mutex mu_;
  std::unordered_map<KernelKey, Entry, KernelKeyHash> entries_;
  std::vector<KernelKey> order_;
};

struct MeasurerCounters {
  std::size_t calls = 0;
  std::size_t cache_hits = 0;
  std::size_t computations = 0;
};

/// Cost oracle for single kernels. Implementations must be safe for
/// concurrent `measure_kernel` calls.
class Measurer {
 public:
  virtual ~Measurer() = default;

  /// Cost in ms of running `nodes` as one kernel on `backend`.
  virtual double measure_kernel(const ComputationGraph& g, const std::string& backend, const NodeSet& nodes) = 0;

  /// Cross-kernel behaviour of a graph inference backend. Default: none.
  virtual RegionModel region_model(const std::string& /*backend*/) const { return {0.0, 1.0}; }

  virtual MeasurerCounters counters() const { return {}; }
};

/// Measurer backed by SimProfiles and a CostCache:
///   cost = (sum over nodes of coeff * volume(shape) + overhead) * discount^(n-1)
class SimMeasurer : public Measurer {
 public:
  SimMeasurer() = default;
  SimMeasurer(const SimMeasurer& o)
      : profiles_(o.profiles_),
        cache_(o.cache_),
        calls_(o.calls_.load()),
        hits_(o.hits_.load()),
        computations_(o.computations_.load()) {}
  explicit SimMeasurer(std::vector<SimProfile> profiles) {
    for (auto& p : profiles) add_profile(std::move(p));
  }

  void add_profile(SimProfile profile) {
    profile.validate();
    auto id = profile.backend;
    profiles_[id] = std::move(profile);
  }

  bool has_profile(const std::string& backend) const { return profiles_.count(backend) != 0; }
  const SimProfile& profile(const std::string& backend) const {
    auto it = profiles_.find(backend);
    if (it == profiles_.end()) throw Error(ErrorCode::kMeasure, "no cost profile for backend '" + backend + "'");
    return it->second;
  }

  CostCache& cache() { return cache_; }
  const CostCache& cache() const { return cache_; }

  double measure_kernel(const ComputationGraph& g, const std::string& backend, const NodeSet& nodes) override {
    ++calls_;
    KernelKey key{backend, kernel_fingerprint(g, nodes)};
    if (auto hit = cache_.lookup(key)) {
      ++hits_;
      return *hit;
    }
    const double cost = compute(g, backend, nodes);
    ++computations_;
    cache_.insert(key, cost);
    return cost;
  }

  /// Profile arithmetic without touching the cache or counters.
  double compute(const ComputationGraph& g, const std::string& backend, const NodeSet& nodes) const {
    const auto& prof = profile(backend);
    if (nodes.empty()) throw Error(ErrorCode::kMeasure, "cannot measure an empty kernel");
    std::vector<double> terms;
    for (auto v : nodes) {
      const auto& node = g.node(v);
      auto it = prof.ops.find(node.op);
      if (it == prof.ops.end())
        throw Error(ErrorCode::kMeasure, "backend '" + backend + "' has no cost entry for op '" + node.op + "'", {v});
      terms.push_back(it->second.coeff_ms_per_elem * static_cast<double>(volume(node.shape)) + it->second.overhead_ms);
    }
    // Sorted summation keeps the value independent of node numbering.
    std::sort(terms.begin(), terms.end());
    double sum = 0.0;
    for (auto t : terms) sum += t;
    return sum * std::pow(prof.fusion_discount, static_cast<double>(nodes.size() - 1));
  }

  RegionModel region_model(const std::string& backend) const override {
    auto it = profiles_.find(backend);
    return it == profiles_.end() ? RegionModel{0.0, 1.0} : it->second.region;
  }

  MeasurerCounters counters() const override { return {calls_.load(), hits_.load(), computations_.load()}; }

  void reset_counters() {
    calls_ = 0;
    hits_ = 0;
    computations_ = 0;
  }

 private:
  std::map<std::string, SimProfile> profiles_;
  CostCache cache_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> computations_{0};
};

// ---------------------------------------------------------------------------
// Profile files ("collage-costs/1")

inline constexpr std::string_view kCostsFormat = "collage-costs/1";

inline SimProfile profile_from_json(const Json& doc) {
  using detail::require;
  detail::reject_unknown_fields(doc, {"version", "backend", "ops", "fusion_discount", "region"}, "cost profile");
  detail::require_version(doc, kCostsFormat);
  SimProfile p;
  p.backend = require(doc, "backend", "cost profile").get<std::string>();
  for (const auto& [op, m] : require(doc, "ops", "cost profile").items()) {
    detail::reject_unknown_fields(m, {"coeff", "overhead"}, "cost entry '" + op + "'");
    OpCostModel model;
    if (m.contains("coeff")) model.coeff_ms_per_elem = m.at("coeff").get<double>();
    if (m.contains("overhead")) model.overhead_ms = m.at("overhead").get<double>();
    p.ops.emplace(op, model);
  }
  if (doc.contains("fusion_discount")) p.fusion_discount = doc.at("fusion_discount").get<double>();
  if (doc.contains("region")) {
    const auto& r = doc.at("region");
    detail::reject_unknown_fields(r, {"alpha", "min"}, "region model");
    if (r.contains("alpha")) p.region.alpha = r.at("alpha").get<double>();
    if (r.contains("min")) p.region.min_factor = r.at("min").get<double>();
  }
  p.validate();
  return p;
}

inline SimProfile load_profile(std::string_view text) { return profile_from_json(detail::parse_json(text)); }

inline Json profile_to_json(const SimProfile& p) {
  Json doc;
  doc["version"] = kCostsFormat;
  doc["backend"] = p.backend;
  doc["ops"] = Json::object();
  for (const auto& [op, m] : p.ops) doc["ops"][op] = {{"coeff", m.coeff_ms_per_elem}, {"overhead", m.overhead_ms}};
  doc["fusion_discount"] = p.fusion_discount;
  doc["region"] = {{"alpha", p.region.alpha}, {"min", p.region.min_factor}};
  return doc;
}

}  // namespace collage
