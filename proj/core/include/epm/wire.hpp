#ifndef EPM_WIRE_HPP_
#define EPM_WIRE_HPP_

#include "epm/event.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace epm
{

/*
 * Line-oriented record format shared by micro-event streams and the
 * secure-event output. One record per line; fields are TAB separated
 * `key=value` pairs. Inside a value, backslash, TAB, LF and CR are written
 * as \\, \t, \n and \r.
 *
 * Micro-event fields, in emission order:
 *   id  type  ts_ms  lat  lon  source  [prio]  attrs  text
 *
 * `attrs` is `name=value` pairs joined by `;`. A string value is double
 * quoted (\" and \\ escape inside the quotes); an integer value is bare:
 *   attrs=object="gun";people=12
 *
 * Doubles are written in shortest round-trip form.
 */

class WireError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A structurally parsed record whose fields have not yet been validated.
class RawRecord
{
public:
  using Field = std::pair<std::string, std::string>;

  RawRecord() = default;
  explicit RawRecord(std::vector<Field> fields);

  const std::vector<Field> & fields() const { return fields_; }
  std::optional<std::string_view> get(std::string_view key) const;
  void set(std::string key, std::string value);

private:
  std::vector<Field> fields_;
};

RawRecord decode_record(std::string_view line);
std::string encode_record(const RawRecord & record);

std::string escape_field(std::string_view value);
std::string unescape_field(std::string_view value);

Attributes decode_attributes(std::string_view text);
std::string encode_attributes(const Attributes & attrs);

/// Field-level problem found while converting a raw record.
struct FieldError
{
  std::string field;
  std::string reason;
};

RawRecord to_record(const MicroEvent & event);

/// Converts a raw record into a micro-event. Missing fields, unparsable
/// numbers, unknown types and out-of-range coordinates yield a FieldError.
std::variant<MicroEvent, FieldError> to_micro_event(const RawRecord & record);

std::string encode_micro_event(const MicroEvent & event);
/// Throws WireError on any structural or field error.
MicroEvent decode_micro_event(std::string_view line);

std::vector<MicroEvent> read_micro_events(std::istream & in);
void write_micro_events(std::ostream & out, std::span<const MicroEvent> events);

std::string encode_secure_event(const SecureEvent & event);

std::string format_double(double value);
std::optional<double> parse_double(std::string_view text);
std::optional<std::int64_t> parse_int(std::string_view text);

}  // namespace epm

#endif  // EPM_WIRE_HPP_
