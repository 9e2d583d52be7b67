#ifndef EPM_EVENT_HPP_
#define EPM_EVENT_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace epm
{

/// Micro-event taxonomy used by the surveillance scenario.
enum class MicroEventType
{
  ObjectRecognition,
  PeopleRecognition,
  PeopleDetection,
  PeopleWithObjectRecognition,
  LogoRecognition,
  TrendDetection,
  SuspiciousSpeechRecognition,
  AnomalyDetection,
  SuspiciousHumanBehaviour,
  SuspiciousCrowdBehaviour,
};

inline constexpr std::size_t kMicroEventTypeCount = 10;

std::string_view to_string(MicroEventType type);
std::optional<MicroEventType> parse_micro_event_type(std::string_view name);
std::span<const MicroEventType> all_micro_event_types();

/// WGS84 position on a spherical Earth. Construction rejects non-finite or
/// out-of-range coordinates with std::invalid_argument.
class GeoPoint
{
public:
  GeoPoint() = default;
  GeoPoint(double lat, double lon);

  double lat() const { return lat_; }
  double lon() const { return lon_; }

  friend bool operator==(const GeoPoint &, const GeoPoint &) = default;

private:
  double lat_{0.0};
  double lon_{0.0};
};

using AttributeValue = std::variant<std::string, std::int64_t>;
using Attributes = std::map<std::string, AttributeValue, std::less<>>;

struct MicroEvent
{
  std::string id;
  MicroEventType type{MicroEventType::ObjectRecognition};
  std::int64_t timestamp_ms{0};  // event time, producer assigned, UTC
  GeoPoint position;
  std::string source_id;
  Attributes attributes;
  std::string text;
  int priority{0};

  friend bool operator==(const MicroEvent &, const MicroEvent &) = default;
};

using EventPtr = std::shared_ptr<const MicroEvent>;

/// Scale factors that give rule thresholds their units. Defaults: timeDiff
/// thresholds in seconds, distanceGPS thresholds in kilometres.
struct UnitScale
{
  double ms_per_time_unit{1000.0};
  double km_per_distance_unit{1.0};
};

inline constexpr double kEarthRadiusKm = 6371.0088;

/// |a.ts - b.ts| in seconds.
double time_diff(const MicroEvent & a, const MicroEvent & b);

/// Haversine great-circle distance in kilometres.
double haversine_km(const GeoPoint & a, const GeoPoint & b);
double distance_gps(const MicroEvent & a, const MicroEvent & b);

/// Arithmetic mean of latitudes and longitudes. No antimeridian handling;
/// scenarios live inside a few square kilometres.
GeoPoint centroid(std::span<const MicroEvent> events);
GeoPoint centroid(std::span<const EventPtr> events);

struct TimeSpan
{
  std::int64_t min_ms{0};
  std::int64_t max_ms{0};

  std::int64_t width_ms() const { return max_ms - min_ms; }
  friend bool operator==(const TimeSpan &, const TimeSpan &) = default;
};

TimeSpan time_span(std::span<const EventPtr> events);

/// Aggregation of the micro-events matched by one rule.
struct ComplexEvent
{
  std::string complex_type;
  std::string rule_id;
  std::vector<std::string> binding_names;  // parallel to constituents
  std::vector<EventPtr> constituents;      // binding order
  std::int64_t detection_time_ms{0};       // wall clock at emission
  TimeSpan event_time_span;
  GeoPoint centroid;
  int priority{0};

  std::vector<std::string> constituent_ids() const;
  std::vector<std::string> distinct_sources() const;
};

struct SourceWeight
{
  std::string source_id;
  double weight{0.0};

  friend bool operator==(const SourceWeight &, const SourceWeight &) = default;
};

/// A complex event that passed trust analysis.
struct SecureEvent
{
  ComplexEvent inner;
  double trust{0.0};
  std::vector<SourceWeight> source_trace;
};

}  // namespace epm

#endif  // EPM_EVENT_HPP_
