#include "epm/event.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace epm
{

namespace
{

constexpr std::array<MicroEventType, kMicroEventTypeCount> kAllTypes = {
  MicroEventType::ObjectRecognition,
  MicroEventType::PeopleRecognition,
  MicroEventType::PeopleDetection,
  MicroEventType::PeopleWithObjectRecognition,
  MicroEventType::LogoRecognition,
  MicroEventType::TrendDetection,
  MicroEventType::SuspiciousSpeechRecognition,
  MicroEventType::AnomalyDetection,
  MicroEventType::SuspiciousHumanBehaviour,
  MicroEventType::SuspiciousCrowdBehaviour,
};

constexpr std::array<std::string_view, kMicroEventTypeCount> kTypeNames = {
  "ObjectRecognition",
  "PeopleRecognition",
  "PeopleDetection",
  "PeopleWithObjectRecognition",
  "LogoRecognition",
  "TrendDetection",
  "SuspiciousSpeechRecognition",
  "AnomalyDetection",
  "SuspiciousHumanBehaviour",
  "SuspiciousCrowdBehaviour",
};

double to_radians(double deg) { return deg * std::numbers::pi / 180.0; }

template<typename Get>
GeoPoint mean_position(std::size_t n, Get get)
{
  if (n == 0) {
    throw std::invalid_argument("empty constituent set");
  }
  double lat = 0.0;
  double lon = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lat += get(i).lat();
    lon += get(i).lon();
  }
  return GeoPoint(lat / static_cast<double>(n), lon / static_cast<double>(n));
}

}  // namespace

std::string_view to_string(MicroEventType type)
{
  return kTypeNames[static_cast<std::size_t>(type)];
}

std::optional<MicroEventType> parse_micro_event_type(std::string_view name)
{
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == name) {
      return kAllTypes[i];
    }
  }
  return std::nullopt;
}

std::span<const MicroEventType> all_micro_event_types() { return kAllTypes; }

GeoPoint::GeoPoint(double lat, double lon) : lat_(lat), lon_(lon)
{
  if (!std::isfinite(lat) || lat < -90.0 || lat > 90.0) {
    throw std::invalid_argument("lat out of range");
  }
  if (!std::isfinite(lon) || lon < -180.0 || lon > 180.0) {
    throw std::invalid_argument("lon out of range");
  }
}

double time_diff(const MicroEvent & a, const MicroEvent & b)
{
  const std::int64_t d = a.timestamp_ms > b.timestamp_ms ? a.timestamp_ms - b.timestamp_ms
                                                         : b.timestamp_ms - a.timestamp_ms;
  return static_cast<double>(d) / 1000.0;
}

double haversine_km(const GeoPoint & a, const GeoPoint & b)
{
  const double phi1 = to_radians(a.lat());
  const double phi2 = to_radians(b.lat());
  const double dphi = phi2 - phi1;
  const double dlambda = to_radians(b.lon() - a.lon());
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

double distance_gps(const MicroEvent & a, const MicroEvent & b)
{
  return haversine_km(a.position, b.position);
}

GeoPoint centroid(std::span<const MicroEvent> events)
{
  return mean_position(events.size(), [&](std::size_t i) { return events[i].position; });
}

GeoPoint centroid(std::span<const EventPtr> events)
{
  return mean_position(events.size(), [&](std::size_t i) { return events[i]->position; });
}

TimeSpan time_span(std::span<const EventPtr> events)
{
  if (events.empty()) {
    throw std::invalid_argument("empty constituent set");
  }
  TimeSpan span{events.front()->timestamp_ms, events.front()->timestamp_ms};
  for (const auto & e : events) {
    span.min_ms = std::min(span.min_ms, e->timestamp_ms);
    span.max_ms = std::max(span.max_ms, e->timestamp_ms);
  }
  return span;
}

std::vector<std::string> ComplexEvent::constituent_ids() const
{
  std::vector<std::string> ids;
  ids.reserve(constituents.size());
  for (const auto & e : constituents) {
    ids.push_back(e->id);
  }
  return ids;
}

std::vector<std::string> ComplexEvent::distinct_sources() const
{
  std::set<std::string> seen;
  for (const auto & e : constituents) {
    seen.insert(e->source_id);
  }
  return {seen.begin(), seen.end()};
}

}  // namespace epm
