#pragma once

#include <vector>

#include "tcpconf/exchange.hpp"

namespace tcpconf {

// Fields whose modification on the path attributes a test's outcome to a middlebox.
std::vector<Field> relevant_fields(TestId t);
// Carriers used for the fan on the test's first segment; the test's own
// manipulated fields are excluded.
CarrierSet fan_carriers(TestId t);

// Decodes every ICMP quote of the exchange's fanned stages. nullopt when no
// stage was fanned.
std::optional<PathDiagnosis> path_diagnosis(const ProbeExchange& ex, TestId t);

// Pure function of the exchange; throws InvalidSpec for an unknown test name.
Verdict classify(const ProbeExchange& ex);

}  // namespace tcpconf
