#pragma once

// Per-round metrics as CSV (vectors expanded into numbered columns) or JSON
// lines. Column layout is documented in docs/schema.md.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "iovfl/sim_harness.hpp"

namespace iovfl::sim {

enum class MetricsFormat { csv, jsonl };

MetricsFormat format_from_string(const std::string& s);

std::vector<std::string> csv_header(int num_selected, int num_types);

void write_metrics(std::ostream& out, std::span<const RoundMetrics> metrics, int num_selected, int num_types,
                   MetricsFormat format);

/// Throws std::runtime_error when the file cannot be written.
void emit_metrics(std::span<const RoundMetrics> metrics, const std::filesystem::path& path, int num_selected,
                  int num_types, MetricsFormat format);

std::vector<RoundMetrics> read_metrics_csv(std::istream& in);

}  // namespace iovfl::sim
