#include "heliofarm/farm/messages.hpp"

#include <fmt/format.h>

namespace heliofarm {

std::string describe_payload(const SensorReading& r) {
  return fmt::format("{} {} {} {}", r.farm, r.sensor, format_datetime(r.at),
                     r.ghi ? fmt::format("{}", *r.ghi) : std::string("null"));
}

}  // namespace heliofarm

namespace heliofarm::farm {

std::string describe_payload(const SensorControl& c) {
  return c.active ? fmt::format("activate {}{}", c.dataset, c.data ? "" : " (unresolved)") : "passivate";
}

std::string describe_payload(const SensorFault& f) { return fmt::format("{} fault: {}", f.sensor, f.reason); }

std::string describe_payload(const DailyPacket& p) {
  return fmt::format("{} {} packet of {} readings", p.farm, format_date(p.day), p.readings.size());
}

std::string describe_payload(const EstimatedPacket& p) {
  return fmt::format("{} {} rows for table {}", p.farm, p.rows.size(), p.table);
}

std::string describe_payload(const ErrorReport& r) {
  return fmt::format("{} {} mae={}", r.farm, format_date(r.date), r.mae ? fmt::format("{}", *r.mae) : "n/a");
}

std::string describe_payload(const ModelUpdate& m) { return fmt::format("{} model {}", m.farm, m.id); }

}  // namespace heliofarm::farm
