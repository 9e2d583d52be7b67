#include "epm/event.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

namespace
{

using epm::GeoPoint;
using epm::MicroEvent;

MicroEvent at(std::int64_t ts, double lat, double lon)
{
  MicroEvent e;
  e.timestamp_ms = ts;
  e.position = GeoPoint(lat, lon);
  return e;
}

void expect_rel(double actual, double expected, double rel)
{
  EXPECT_LE(std::abs(actual - expected), rel * std::abs(expected)) << actual << " vs " << expected;
}

}  // namespace

// Reference values computed with 40-digit arithmetic.
TEST(Haversine, OneDegreeOfLongitudeOnTheEquator)
{
  expect_rel(epm::haversine_km(GeoPoint(0, 0), GeoPoint(0, 1)), 111.1950802335329128, 1e-9);
}

TEST(Haversine, PisaPairs)
{
  expect_rel(epm::haversine_km(GeoPoint(43.7230, 10.3966), GeoPoint(43.7231, 10.3944)), 0.17714019414074706, 1e-9);
  expect_rel(epm::haversine_km(GeoPoint(43.7230, 10.3966), GeoPoint(43.7233, 10.3966)), 0.033358524070059874, 1e-9);
}

TEST(Haversine, ZeroAndSymmetric)
{
  const GeoPoint a(43.7230, 10.3966);
  const GeoPoint b(-33.9, 151.2);
  EXPECT_EQ(epm::haversine_km(a, a), 0.0);
  EXPECT_EQ(epm::haversine_km(a, b), epm::haversine_km(b, a));
}

TEST(Haversine, AntipodesAreHalfACircumference)
{
  expect_rel(epm::haversine_km(GeoPoint(0, 0), GeoPoint(0, 180)), std::acos(-1.0) * epm::kEarthRadiusKm, 1e-12);
  expect_rel(epm::haversine_km(GeoPoint(90, 0), GeoPoint(-90, 0)), std::acos(-1.0) * epm::kEarthRadiusKm, 1e-12);
}

TEST(Haversine, MatchesChordOracleOnRandomPairs)
{
  std::mt19937_64 rng(20140201);
  for (int i = 0; i < 1000; ++i) {
    const double lat1 = epm::test::uniform(rng, -90, 90);
    const double lon1 = epm::test::uniform(rng, -180, 180);
    // Half the pairs are global, half a few hundred metres apart.
    const bool local = i % 2 == 1;
    const double lat2 = local ? std::clamp(lat1 + epm::test::uniform(rng, -0.01, 0.01), -90.0, 90.0)
                              : epm::test::uniform(rng, -90, 90);
    const double lon2 = local ? std::clamp(lon1 + epm::test::uniform(rng, -0.01, 0.01), -180.0, 180.0)
                              : epm::test::uniform(rng, -180, 180);
    const double got = epm::distance_gps(at(0, lat1, lon1), at(0, lat2, lon2));
    const double want = epm::test::chord_distance_km(lat1, lon1, lat2, lon2);
    expect_rel(got, want, 1e-9);
  }
}

TEST(TimeDiff, SecondsSymmetricExact)
{
  EXPECT_EQ(epm::time_diff(at(1'000, 0, 0), at(31'000, 0, 0)), 30.0);
  EXPECT_EQ(epm::time_diff(at(31'000, 0, 0), at(1'000, 0, 0)), 30.0);
  EXPECT_EQ(epm::time_diff(at(5, 0, 0), at(5, 0, 0)), 0.0);
  EXPECT_EQ(epm::time_diff(at(1'700'000'000'000, 0, 0), at(1'700'000'000'250, 0, 0)), 0.25);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto a = static_cast<std::int64_t>(rng() % 4'000'000'000'000ULL);
    const auto b = static_cast<std::int64_t>(rng() % 4'000'000'000'000ULL);
    const double d = epm::time_diff(at(a, 0, 0), at(b, 0, 0));
    EXPECT_EQ(d, epm::time_diff(at(b, 0, 0), at(a, 0, 0)));
    EXPECT_EQ(d, static_cast<double>(a > b ? a - b : b - a) / 1000.0);
  }
}

TEST(GeoPoint, RejectsOutOfRange)
{
  EXPECT_THROW(GeoPoint(123, 0), std::invalid_argument);
  EXPECT_THROW(GeoPoint(-90.5, 0), std::invalid_argument);
  EXPECT_THROW(GeoPoint(0, 181), std::invalid_argument);
  EXPECT_THROW(GeoPoint(std::numeric_limits<double>::quiet_NaN(), 0), std::invalid_argument);
  EXPECT_THROW(GeoPoint(0, std::numeric_limits<double>::infinity()), std::invalid_argument);
  EXPECT_NO_THROW(GeoPoint(90, -180));
}

TEST(Centroid, MeanOfCoordinates)
{
  const std::vector<MicroEvent> events = {at(0, 43.0, 10.0), at(0, 44.0, 11.0)};
  const auto c = epm::centroid(events);
  EXPECT_DOUBLE_EQ(c.lat(), 43.5);
  EXPECT_DOUBLE_EQ(c.lon(), 10.5);
  EXPECT_THROW(epm::centroid(std::span<const MicroEvent>{}), std::invalid_argument);
}

TEST(TimeSpan, MinAndMax)
{
  std::vector<epm::EventPtr> events = {std::make_shared<MicroEvent>(at(50, 0, 0)),
                                       std::make_shared<MicroEvent>(at(10, 0, 0)),
                                       std::make_shared<MicroEvent>(at(30, 0, 0))};
  const auto span = epm::time_span(events);
  EXPECT_EQ(span.min_ms, 10);
  EXPECT_EQ(span.max_ms, 50);
  EXPECT_EQ(span.width_ms(), 40);
  EXPECT_THROW(epm::time_span({}), std::invalid_argument);
}

TEST(MicroEventType, NamesRoundTrip)
{
  EXPECT_EQ(epm::all_micro_event_types().size(), epm::kMicroEventTypeCount);
  for (const auto t : epm::all_micro_event_types()) {
    EXPECT_EQ(epm::parse_micro_event_type(epm::to_string(t)), t);
  }
  EXPECT_FALSE(epm::parse_micro_event_type("Telepathy"));
}

TEST(ComplexEvent, DistinctSourcesAreSortedAndUnique)
{
  epm::ComplexEvent ce;
  for (const char * src : {"cam-2", "cam-1", "cam-2"}) {
    auto e = std::make_shared<MicroEvent>();
    e->source_id = src;
    ce.constituents.push_back(e);
  }
  EXPECT_EQ(ce.distinct_sources(), (std::vector<std::string>{"cam-1", "cam-2"}));
}
