#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "regemu/core.hpp"

namespace regemu {

/// Line-delimited trace: a header record, one record per event (step, kind,
/// actor, op, payload), and a footer. Keys are emitted in sorted order so the
/// bytes depend only on the history.
std::string write_trace(const History& h);
void write_trace(std::ostream& out, const History& h);

/// Throws std::invalid_argument with the offending line number.
History parse_trace(std::string_view text);
History read_trace_file(const std::string& path);

std::string event_to_line(const Event& e);

}  // namespace regemu
