#include "epm/wire.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

namespace epm
{

namespace
{

bool is_key_char(char c, bool first)
{
  const bool alpha = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
  if (first) {
    return alpha;
  }
  return alpha || (c >= '0' && c <= '9') || c == '_';
}

bool valid_key(std::string_view key)
{
  if (key.empty() || !is_key_char(key.front(), true)) {
    return false;
  }
  for (char c : key.substr(1)) {
    if (!is_key_char(c, false)) {
      return false;
    }
  }
  return true;
}

std::string quote_attribute(std::string_view value)
{
  std::string out = "\"";
  for (char c : value) {
    if (c == '"' || c == '\\') {
      out.push_back('\\');
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

RawRecord::RawRecord(std::vector<Field> fields) : fields_(std::move(fields)) {}

std::optional<std::string_view> RawRecord::get(std::string_view key) const
{
  for (const auto & [k, v] : fields_) {
    if (k == key) {
      return std::string_view(v);
    }
  }
  return std::nullopt;
}

void RawRecord::set(std::string key, std::string value)
{
  for (auto & [k, v] : fields_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  fields_.emplace_back(std::move(key), std::move(value));
}

std::string escape_field(std::string_view value)
{
  std::string out;
  out.reserve(value.size());
  for (char c : value) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_field(std::string_view value)
{
  std::string out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    const char c = value[i];
    if (c != '\\') {
      out.push_back(c);
      continue;
    }
    if (i + 1 >= value.size()) {
      throw WireError("dangling escape at end of field");
    }
    switch (value[++i]) {
      case '\\': out.push_back('\\'); break;
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      default: throw WireError(std::string("unknown escape \\") + value[i]);
    }
  }
  return out;
}

RawRecord decode_record(std::string_view line)
{
  if (!line.empty() && line.back() == '\r') {
    line.remove_suffix(1);
  }
  std::vector<RawRecord::Field> fields;
  std::set<std::string, std::less<>> seen;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      tab = line.size();
    }
    const std::string_view field = line.substr(pos, tab - pos);
    if (!field.empty()) {
      const std::size_t eq = field.find('=');
      if (eq == std::string_view::npos) {
        throw WireError("field without '=' at column " + std::to_string(pos));
      }
      std::string key(field.substr(0, eq));
      if (!valid_key(key)) {
        throw WireError("invalid field name '" + key + "'");
      }
      if (seen.contains(key)) {
        throw WireError("duplicate field '" + key + "'");
      }
      seen.insert(key);
      fields.emplace_back(std::move(key), unescape_field(field.substr(eq + 1)));
    }
    pos = tab + 1;
  }
  return RawRecord(std::move(fields));
}

std::string encode_record(const RawRecord & record)
{
  std::string out;
  bool first = true;
  for (const auto & [k, v] : record.fields()) {
    if (!first) {
      out.push_back('\t');
    }
    first = false;
    out += k;
    out.push_back('=');
    out += escape_field(v);
  }
  return out;
}

Attributes decode_attributes(std::string_view text)
{
  Attributes attrs;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t eq = text.find('=', i);
    if (eq == std::string_view::npos) {
      throw WireError("attribute without '='");
    }
    std::string key(text.substr(i, eq - i));
    if (!valid_key(key)) {
      throw WireError("invalid attribute name '" + key + "'");
    }
    if (attrs.contains(key)) {
      throw WireError("duplicate attribute '" + key + "'");
    }
    i = eq + 1;
    if (i < text.size() && text[i] == '"') {
      std::string value;
      ++i;
      bool closed = false;
      while (i < text.size()) {
        const char c = text[i++];
        if (c == '\\') {
          if (i >= text.size()) {
            throw WireError("dangling escape in attribute '" + key + "'");
          }
          value.push_back(text[i++]);
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          value.push_back(c);
        }
      }
      if (!closed) {
        throw WireError("unterminated string in attribute '" + key + "'");
      }
      attrs.emplace(std::move(key), std::move(value));
    } else {
      std::size_t end = text.find(';', i);
      if (end == std::string_view::npos) {
        end = text.size();
      }
      const auto number = parse_int(text.substr(i, end - i));
      if (!number) {
        throw WireError("attribute '" + key + "' is neither a quoted string nor an integer");
      }
      attrs.emplace(std::move(key), *number);
      i = end;
    }
    if (i < text.size()) {
      if (text[i] != ';') {
        throw WireError("expected ';' between attributes");
      }
      ++i;
      if (i == text.size()) {
        throw WireError("trailing ';' in attributes");
      }
    }
  }
  return attrs;
}

std::string encode_attributes(const Attributes & attrs)
{
  std::string out;
  for (const auto & [k, v] : attrs) {
    if (!out.empty()) {
      out.push_back(';');
    }
    out += k;
    out.push_back('=');
    if (const auto * s = std::get_if<std::string>(&v)) {
      out += quote_attribute(*s);
    } else {
      out += std::to_string(std::get<std::int64_t>(v));
    }
  }
  return out;
}

std::string format_double(double value)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view text)
{
  if (!text.empty() && text.front() == '+') {
    text.remove_prefix(1);
  }
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    return std::nullopt;
  }
  return value;
}

std::optional<std::int64_t> parse_int(std::string_view text)
{
  std::int64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    return std::nullopt;
  }
  return value;
}

RawRecord to_record(const MicroEvent & event)
{
  RawRecord r;
  r.set("id", event.id);
  r.set("type", std::string(to_string(event.type)));
  r.set("ts_ms", std::to_string(event.timestamp_ms));
  r.set("lat", format_double(event.position.lat()));
  r.set("lon", format_double(event.position.lon()));
  r.set("source", event.source_id);
  if (event.priority != 0) {
    r.set("prio", std::to_string(event.priority));
  }
  r.set("attrs", encode_attributes(event.attributes));
  r.set("text", event.text);
  return r;
}

std::variant<MicroEvent, FieldError> to_micro_event(const RawRecord & record)
{
  constexpr std::string_view kRequired[] = {"id", "type", "ts_ms", "lat", "lon", "source", "attrs", "text"};
  for (const auto key : kRequired) {
    if (!record.get(key)) {
      return FieldError{std::string(key), "missing field " + std::string(key)};
    }
  }

  MicroEvent e;
  e.id = std::string(*record.get("id"));

  const auto type = parse_micro_event_type(*record.get("type"));
  if (!type) {
    return FieldError{"type", "unknown type '" + std::string(*record.get("type")) + "'"};
  }
  e.type = *type;

  const auto ts = parse_int(*record.get("ts_ms"));
  if (!ts) {
    return FieldError{"ts_ms", "ts_ms is not an integer"};
  }
  e.timestamp_ms = *ts;

  const auto lat = parse_double(*record.get("lat"));
  if (!lat) {
    return FieldError{"lat", "lat is not a number"};
  }
  const auto lon = parse_double(*record.get("lon"));
  if (!lon) {
    return FieldError{"lon", "lon is not a number"};
  }
  if (!std::isfinite(*lat) || *lat < -90.0 || *lat > 90.0) {
    return FieldError{"lat", "lat out of range"};
  }
  if (!std::isfinite(*lon) || *lon < -180.0 || *lon > 180.0) {
    return FieldError{"lon", "lon out of range"};
  }
  e.position = GeoPoint(*lat, *lon);

  e.source_id = std::string(*record.get("source"));

  if (const auto prio = record.get("prio")) {
    const auto p = parse_int(*prio);
    if (!p || *p < 0 || *p > 1'000'000) {
      return FieldError{"prio", "prio is not a small non-negative integer"};
    }
    e.priority = static_cast<int>(*p);
  }

  try {
    e.attributes = decode_attributes(*record.get("attrs"));
  } catch (const WireError & err) {
    return FieldError{"attrs", err.what()};
  }
  e.text = std::string(*record.get("text"));
  return e;
}

std::string encode_micro_event(const MicroEvent & event)
{
  return encode_record(to_record(event));
}

MicroEvent decode_micro_event(std::string_view line)
{
  auto converted = to_micro_event(decode_record(line));
  if (auto * err = std::get_if<FieldError>(&converted)) {
    throw WireError(err->reason);
  }
  return std::get<MicroEvent>(std::move(converted));
}

std::vector<MicroEvent> read_micro_events(std::istream & in)
{
  std::vector<MicroEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') {
      continue;
    }
    try {
      events.push_back(decode_micro_event(line));
    } catch (const WireError & err) {
      throw WireError("line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return events;
}

void write_micro_events(std::ostream & out, std::span<const MicroEvent> events)
{
  for (const auto & e : events) {
    out << encode_micro_event(e) << '\n';
  }
}

std::string encode_secure_event(const SecureEvent & event)
{
  const ComplexEvent & ce = event.inner;
  RawRecord r;
  r.set("kind", "secure");
  r.set("rule", ce.rule_id);
  r.set("type", ce.complex_type);
  r.set("detected_ms", std::to_string(ce.detection_time_ms));
  r.set("span_min_ms", std::to_string(ce.event_time_span.min_ms));
  r.set("span_max_ms", std::to_string(ce.event_time_span.max_ms));
  r.set("lat", format_double(ce.centroid.lat()));
  r.set("lon", format_double(ce.centroid.lon()));
  r.set("prio", std::to_string(ce.priority));
  r.set("trust", format_double(event.trust));

  std::string ids;
  for (const auto & e : ce.constituents) {
    if (!ids.empty()) {
      ids.push_back(',');
    }
    ids += e->id;
  }
  r.set("constituents", ids);

  std::string sources;
  for (const auto & sw : event.source_trace) {
    if (!sources.empty()) {
      sources.push_back(';');
    }
    sources += sw.source_id + "=" + format_double(sw.weight);
  }
  r.set("sources", sources);
  return encode_record(r);
}

}  // namespace epm
