#include "epm/scenario.hpp"
#include "epm/wire.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace epm
{

namespace
{

constexpr double kKmPerDegreeLat = std::numbers::pi * kEarthRadiusKm / 180.0;
constexpr std::size_t kLatticeColumns = 200;

// Distributions are written out by hand so that streams are identical
// across standard library implementations.
double uniform01(std::mt19937_64 & rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64 & rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::size_t pick(std::mt19937_64 & rng, std::size_t n)
{
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

double exponential(std::mt19937_64 & rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

std::string zero_pad(std::size_t n, int width)
{
  std::string s = std::to_string(n);
  if (static_cast<int>(s.size()) < width) {
    s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  }
  return s;
}

MicroEventType type_for(const Attributes & attrs)
{
  const bool behaviour = attrs.contains("personBehaviour");
  const bool object = attrs.contains("object");
  if (behaviour && object) {
    return MicroEventType::PeopleWithObjectRecognition;
  }
  if (attrs.contains("anomaly")) {
    return MicroEventType::AnomalyDetection;
  }
  if (behaviour) {
    return MicroEventType::SuspiciousHumanBehaviour;
  }
  if (attrs.contains("audio")) {
    return MicroEventType::SuspiciousSpeechRecognition;
  }
  if (attrs.contains("people")) {
    return MicroEventType::PeopleDetection;
  }
  if (object) {
    return MicroEventType::ObjectRecognition;
  }
  return MicroEventType::TrendDetection;
}

std::string describe(const Attributes & attrs)
{
  std::string text;
  for (const auto & [k, v] : attrs) {
    if (!text.empty()) {
      text += ", ";
    }
    text += k + " ";
    if (const auto * s = std::get_if<std::string>(&v)) {
      text += *s;
    } else {
      text += std::to_string(std::get<std::int64_t>(v));
    }
  }
  return text;
}

// Every consistent DNF witness of each binding predicate.
std::vector<Attributes> witnesses(const Predicate & predicate)
{
  const auto dnf = to_dnf(predicate);
  std::vector<Attributes> out;
  if (!dnf) {
    return out;
  }
  for (const auto & conjunct : *dnf) {
    if (auto w = witness(conjunct)) {
      out.push_back(std::move(*w));
    }
  }
  return out;
}

GeoPoint offset_position(const GeoPoint & anchor, double distance_km, double bearing)
{
  const double dlat = distance_km * std::cos(bearing) / kKmPerDegreeLat;
  const double dlon =
    distance_km * std::sin(bearing) / (kKmPerDegreeLat * std::cos(anchor.lat() * std::numbers::pi / 180.0));
  return GeoPoint(std::clamp(anchor.lat() + dlat, -90.0, 90.0), std::clamp(anchor.lon() + dlon, -180.0, 180.0));
}

struct DisjointPool
{
  std::string key;
  std::vector<AttributeValue> values;
};

const std::vector<DisjointPool> & disjoint_pool()
{
  static const std::vector<DisjointPool> pool = {
    {"object", {std::string("umbrella"), std::string("camera"), std::string("bicycle"), std::string("stroller"),
                std::string("map"), std::string("bottle")}},
    {"anomaly", {std::string("litter"), std::string("puddle"), std::string("scaffolding")}},
    {"audio", {std::string("music"), std::string("traffic"), std::string("chatter"), std::string("bells")}},
    {"personBehaviour", {std::string("walking"), std::string("sitting"), std::string("queueing")}},
    {"people", {std::int64_t{0}, std::int64_t{2}, std::int64_t{3}, std::int64_t{5}, std::int64_t{8},
                std::int64_t{10}}},
    {"vehicle", {std::string("taxi"), std::string("bus"), std::string("scooter")}},
  };
  return pool;
}

constexpr std::array<std::string_view, 6> kNoiseTexts = {
  "tourists near the tower", "guided tour passing", "street vendor",
  "selfie at the baptistery", "queue at the entrance", "cyclists crossing",
};

bool satisfies_any(const Attributes & attrs, std::span<const Rule> rules)
{
  for (const auto & rule : rules) {
    for (const auto & b : rule.bindings) {
      if (evaluate(*b.predicate, attrs)) {
        return true;
      }
    }
  }
  return false;
}

class NoiseSource
{
public:
  NoiseSource(const ScenarioSpec & spec, std::span<const Rule> rules, const UnitScale & units)
      : spec_(spec), rules_(rules), rng_(spec.noise.seed.value_or(spec.seed ^ 0x9e3779b97f4a7c15ULL))
  {
    if (spec.noise.vocabulary == NoiseVocabulary::Adversarial) {
      double widest = 0.0;
      for (const auto & rule : rules) {
        std::vector<std::vector<Attributes>> per_binding;
        for (const auto & b : rule.bindings) {
          per_binding.push_back(witnesses(*b.predicate));
        }
        decoys_.push_back(std::move(per_binding));
        for (const auto & c : rule.post_filter.constraints) {
          if (c.metric == PairMetric::DistanceGps) {
            widest = std::max(widest, c.threshold * units.km_per_distance_unit);
          }
        }
      }
      spacing_km_ = std::max(1.0, 1.5 * widest) * 1.01;
      lattice_lat0_ = std::min(spec.noise.region.lat_max + 0.05, 80.0);
      lattice_lon0_ = std::max(spec.noise.region.lon_min - 0.5, -179.0);
    }
  }

  std::vector<MicroEvent> generate()
  {
    std::vector<MicroEvent> out;
    const double rate = spec_.noise.rate_per_s;
    if (!(rate > 0.0)) {
      return out;
    }
    double t = exponential(rng_, rate);
    while (t < spec_.duration_s) {
      out.push_back(make(out.size(), t));
      t += exponential(rng_, rate);
    }
    return out;
  }

private:
  MicroEvent make(std::size_t index, double t)
  {
    MicroEvent e;
    e.id = "n" + zero_pad(index, 7);
    e.timestamp_ms = spec_.base_time_ms + static_cast<std::int64_t>(std::floor(t * 1000.0));
    e.source_id = "noise-" + zero_pad(pick(rng_, 64), 2);
    e.text = std::string(kNoiseTexts[pick(rng_, kNoiseTexts.size())]);

    if (spec_.noise.vocabulary == NoiseVocabulary::Adversarial && !decoys_.empty()) {
      const auto & rule = decoys_[pick(rng_, decoys_.size())];
      const auto & options = rule[pick(rng_, rule.size())];
      if (!options.empty()) {
        e.attributes = options[pick(rng_, options.size())];
      }
      e.position = lattice_cell(decoy_count_++);
      e.type = type_for(e.attributes);
      return e;
    }

    const auto & region = spec_.noise.region;
    e.position = GeoPoint(uniform(rng_, region.lat_min, region.lat_max), uniform(rng_, region.lon_min, region.lon_max));
    e.type = all_micro_event_types()[pick(rng_, kMicroEventTypeCount)];
    for (int attempt = 0; attempt < 8; ++attempt) {
      Attributes attrs;
      const std::size_t n = 1 + pick(rng_, 2);
      for (std::size_t i = 0; i < n; ++i) {
        const auto & slot = disjoint_pool()[pick(rng_, disjoint_pool().size())];
        attrs.insert_or_assign(slot.key, slot.values[pick(rng_, slot.values.size())]);
      }
      if (!satisfies_any(attrs, rules_)) {
        e.attributes = std::move(attrs);
        break;
      }
    }
    return e;
  }

  GeoPoint lattice_cell(std::size_t j) const
  {
    const double dlat = spacing_km_ / kKmPerDegreeLat;
    const auto rows = static_cast<std::size_t>(std::max(1.0, (85.0 - lattice_lat0_) / dlat));
    const std::size_t row = (j / kLatticeColumns) % rows;
    const std::size_t col = j % kLatticeColumns;
    const double lat = lattice_lat0_ + static_cast<double>(row) * dlat;
    const double dlon = spacing_km_ / (kKmPerDegreeLat * std::cos(lat * std::numbers::pi / 180.0));
    double lon = lattice_lon0_ + static_cast<double>(col) * dlon;
    if (lon > 180.0) {
      lon -= 360.0;
    }
    return GeoPoint(lat, lon);
  }

  const ScenarioSpec & spec_;
  std::span<const Rule> rules_;
  std::mt19937_64 rng_;
  std::vector<std::vector<std::vector<Attributes>>> decoys_;  // rule -> binding -> witnesses
  double spacing_km_{1.0};
  double lattice_lat0_{0.0};
  double lattice_lon0_{0.0};
  std::size_t decoy_count_{0};
};

std::string_view trim(std::string_view s)
{
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_words(std::string_view s)
{
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) {
    out.push_back(w);
  }
  return out;
}

double require_double(const std::string & text, const std::string & key)
{
  const auto v = parse_double(text);
  if (!v || !std::isfinite(*v)) {
    throw ScenarioError("'" + key + "' expects a number, got '" + text + "'");
  }
  return *v;
}

std::uint64_t require_u64(const std::string & text, const std::string & key)
{
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ScenarioError("'" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return v;
}

}  // namespace

GeoBox miracles_square_region() { return GeoBox{43.7210, 43.7250, 10.3930, 10.4000}; }

std::string_view to_string(NoiseVocabulary vocabulary)
{
  return vocabulary == NoiseVocabulary::Disjoint ? "disjoint" : "adversarial";
}

std::optional<NoiseVocabulary> parse_noise_vocabulary(std::string_view name)
{
  if (name == "disjoint") {
    return NoiseVocabulary::Disjoint;
  }
  if (name == "adversarial") {
    return NoiseVocabulary::Adversarial;
  }
  return std::nullopt;
}

ScenarioSpec parse_scenario_spec(std::istream & in)
{
  ScenarioSpec spec;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const std::string_view body = trim(line);
    if (body.empty()) {
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ScenarioError("scenario line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    const auto words = split_words(value);
    try {
      if (key == "seed") {
        spec.seed = require_u64(value, key);
      } else if (key == "duration_s") {
        spec.duration_s = require_double(value, key);
      } else if (key == "base_time_ms") {
        spec.base_time_ms = static_cast<std::int64_t>(require_u64(value, key));
      } else if (key == "noise_rate") {
        spec.noise.rate_per_s = require_double(value, key);
      } else if (key == "noise_vocabulary") {
        const auto v = parse_noise_vocabulary(value);
        if (!v) {
          throw ScenarioError("unknown noise vocabulary '" + value + "'");
        }
        spec.noise.vocabulary = *v;
      } else if (key == "noise_seed") {
        spec.noise.seed = require_u64(value, key);
      } else if (key == "region") {
        if (words.size() != 4) {
          throw ScenarioError("'region' expects lat_min lat_max lon_min lon_max");
        }
        spec.noise.region = GeoBox{require_double(words[0], key), require_double(words[1], key),
                                   require_double(words[2], key), require_double(words[3], key)};
      } else if (key == "group") {
        if (words.size() != 2 && words.size() != 4) {
          throw ScenarioError("'group' expects rule_id anchor_s [lat lon]");
        }
        GroupPlan plan{words[0], require_double(words[1], key), std::nullopt};
        if (words.size() == 4) {
          plan.anchor_position = GeoPoint(require_double(words[2], key), require_double(words[3], key));
        }
        spec.groups.push_back(std::move(plan));
      } else if (key == "round_robin_groups") {
        spec.round_robin_groups = require_u64(value, key);
      } else if (key == "rules") {
        spec.rules_path = value;
      } else {
        throw ScenarioError("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument & err) {
      throw ScenarioError("scenario line " + std::to_string(line_no) + ": " + err.what());
    } catch (const ScenarioError & err) {
      throw ScenarioError("scenario line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  if (!(spec.duration_s > 0.0)) {
    throw ScenarioError("duration_s must be positive");
  }
  if (!(spec.noise.rate_per_s >= 0.0)) {
    throw ScenarioError("noise_rate must be non-negative");
  }
  const auto & r = spec.noise.region;
  try {
    (void)GeoPoint(r.lat_min, r.lon_min);
    (void)GeoPoint(r.lat_max, r.lon_max);
  } catch (const std::invalid_argument & err) {
    throw ScenarioError(std::string("region: ") + err.what());
  }
  if (r.lat_min > r.lat_max || r.lon_min > r.lon_max) {
    throw ScenarioError("region bounds are inverted");
  }
  return spec;
}

ScenarioSpec load_scenario_spec(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw ScenarioError("cannot open scenario '" + path + "'");
  }
  return parse_scenario_spec(in);
}

std::string format_scenario_spec(const ScenarioSpec & spec)
{
  std::ostringstream out;
  out << "seed = " << spec.seed << '\n';
  out << "duration_s = " << format_double(spec.duration_s) << '\n';
  out << "base_time_ms = " << spec.base_time_ms << '\n';
  out << "noise_rate = " << format_double(spec.noise.rate_per_s) << '\n';
  out << "noise_vocabulary = " << to_string(spec.noise.vocabulary) << '\n';
  if (spec.noise.seed) {
    out << "noise_seed = " << *spec.noise.seed << '\n';
  }
  const auto & r = spec.noise.region;
  out << "region = " << format_double(r.lat_min) << ' ' << format_double(r.lat_max) << ' '
      << format_double(r.lon_min) << ' ' << format_double(r.lon_max) << '\n';
  if (spec.round_robin_groups != 0) {
    out << "round_robin_groups = " << spec.round_robin_groups << '\n';
  }
  for (const auto & g : spec.groups) {
    out << "group = " << g.rule_id << ' ' << format_double(g.anchor_s);
    if (g.anchor_position) {
      out << ' ' << format_double(g.anchor_position->lat()) << ' ' << format_double(g.anchor_position->lon());
    }
    out << '\n';
  }
  if (spec.rules_path) {
    out << "rules = " << *spec.rules_path << '\n';
  }
  return out.str();
}

void write_manifest(std::ostream & out, const Manifest & manifest)
{
  for (const auto & entry : manifest) {
    out << entry.rule_id << '\t' << fingerprint_key(entry.fingerprint) << '\n';
  }
}

Manifest read_manifest(std::istream & in)
{
  Manifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw ScenarioError("manifest line " + std::to_string(line_no) + ": expected 'rule_id<TAB>ids'");
    }
    ManifestEntry entry{line.substr(0, tab), {}};
    std::string_view ids(line);
    ids.remove_prefix(tab + 1);
    std::size_t pos = 0;
    while (pos <= ids.size()) {
      auto comma = ids.find(',', pos);
      if (comma == std::string_view::npos) {
        comma = ids.size();
      }
      entry.fingerprint.emplace_back(ids.substr(pos, comma - pos));
      pos = comma + 1;
    }
    std::sort(entry.fingerprint.begin(), entry.fingerprint.end());
    manifest.push_back(std::move(entry));
  }
  return normalize(std::move(manifest));
}

Manifest normalize(Manifest manifest)
{
  std::sort(manifest.begin(), manifest.end());
  manifest.erase(std::unique(manifest.begin(), manifest.end()), manifest.end());
  return manifest;
}

Manifest oracle_manifest(std::span<const MicroEvent> events, std::span<const Rule> rules, const UnitScale & units)
{
  Manifest manifest;
  for (const auto & rule : rules) {
    for (auto & match : brute_force_matches(events, rule, units)) {
      manifest.push_back({rule.rule_id, std::move(match.fingerprint)});
    }
  }
  return normalize(std::move(manifest));
}

PlantedGroup plant_group_for(const Rule & rule, std::int64_t anchor_time_ms, const GeoPoint & anchor_position,
                             std::mt19937_64 & rng, const std::string & id_prefix, const UnitScale & units)
{
  double tightest_ms = static_cast<double>(rule.window_ms());
  double tightest_km = 0.2;
  bool has_distance = false;
  for (const auto & c : rule.post_filter.constraints) {
    if (c.metric == PairMetric::TimeDiff) {
      tightest_ms = std::min(tightest_ms, c.threshold * units.ms_per_time_unit);
    } else {
      const double km = c.threshold * units.km_per_distance_unit;
      tightest_km = has_distance ? std::min(tightest_km, km) : km;
      has_distance = true;
    }
  }
  // Offsets stay strictly below half of the tightest bound, so every
  // pairwise difference is strictly below the bound itself.
  const auto max_offset_ms = static_cast<std::int64_t>(std::max(0.0, std::ceil(0.5 * tightest_ms) - 1.0));
  const double radius_km = 0.45 * tightest_km;

  PlantedGroup group;
  group.target_rule_id = rule.rule_id;
  group.anchor_time_ms = anchor_time_ms;
  for (std::size_t i = 0; i < rule.bindings.size(); ++i) {
    const auto & binding = rule.bindings[i];
    const auto options = witnesses(*binding.predicate);
    if (options.empty()) {
      throw ScenarioError("rule '" + rule.rule_id + "': predicate of binding '" + binding.name +
                          "' cannot be satisfied");
    }
    MicroEvent e;
    e.id = id_prefix + "-" + binding.name;
    e.attributes = options[pick(rng, options.size())];
    e.type = type_for(e.attributes);
    e.timestamp_ms = anchor_time_ms + static_cast<std::int64_t>(pick(rng, static_cast<std::size_t>(max_offset_ms) + 1));
    e.position = offset_position(anchor_position, radius_km * std::sqrt(uniform01(rng)),
                                 uniform(rng, 0.0, 2.0 * std::numbers::pi));
    e.source_id = "src-" + id_prefix + "-" + std::to_string(i);
    e.text = rule.complex_type + ": " + describe(e.attributes);
    group.events.push_back(std::move(e));
  }
  return group;
}

Scenario generate(const ScenarioSpec & spec, std::span<const Rule> rules, const UnitScale & units)
{
  if (!(spec.duration_s > 0.0)) {
    throw ScenarioError("duration_s must be positive");
  }
  std::map<std::string, const Rule *, std::less<>> by_id;
  for (const auto & r : rules) {
    by_id.emplace(r.rule_id, &r);
  }

  std::vector<GroupPlan> plans = spec.groups;
  if (spec.round_robin_groups > 0) {
    if (rules.empty()) {
      throw ScenarioError("round_robin_groups requires at least one rule");
    }
    const double step = spec.duration_s / static_cast<double>(spec.round_robin_groups);
    for (std::size_t i = 0; i < spec.round_robin_groups; ++i) {
      plans.push_back({rules[i % rules.size()].rule_id, (static_cast<double>(i) + 0.5) * step, std::nullopt});
    }
  }

  Scenario scenario;
  std::mt19937_64 rng(spec.seed);
  const auto & region = spec.noise.region;
  for (std::size_t g = 0; g < plans.size(); ++g) {
    const auto & plan = plans[g];
    const auto it = by_id.find(plan.rule_id);
    if (it == by_id.end()) {
      throw ScenarioError("scenario references unknown rule '" + plan.rule_id + "'");
    }
    const Rule & rule = *it->second;
    const GeoPoint anchor = plan.anchor_position.value_or(
      GeoPoint(uniform(rng, region.lat_min, region.lat_max), uniform(rng, region.lon_min, region.lon_max)));
    const auto anchor_ms = spec.base_time_ms + static_cast<std::int64_t>(std::floor(plan.anchor_s * 1000.0));
    auto group = plant_group_for(rule, anchor_ms, anchor, rng, "p" + zero_pad(g, 4), units);
    if (brute_force_matches(group.events, rule, units).empty()) {
      throw ScenarioError("planted group for rule '" + rule.rule_id + "' does not satisfy it");
    }
    scenario.events.insert(scenario.events.end(), group.events.begin(), group.events.end());
    scenario.groups.push_back(std::move(group));
  }

  NoiseSource noise(spec, rules, units);
  auto noise_events = noise.generate();
  scenario.noise_events = noise_events.size();
  scenario.events.insert(scenario.events.end(), std::make_move_iterator(noise_events.begin()),
                         std::make_move_iterator(noise_events.end()));
  std::stable_sort(scenario.events.begin(), scenario.events.end(), [](const MicroEvent & a, const MicroEvent & b) {
    return a.timestamp_ms != b.timestamp_ms ? a.timestamp_ms < b.timestamp_ms : a.id < b.id;
  });

  scenario.manifest = oracle_manifest(scenario.events, rules, units);
  return scenario;
}

bool noise_is_pure(std::span<const MicroEvent> events, std::span<const Rule> rules)
{
  for (const auto & e : events) {
    if (satisfies_any(e.attributes, rules)) {
      return false;
    }
  }
  return true;
}

}  // namespace epm
