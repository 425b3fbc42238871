#pragma once

// CSV output shared by the command-line tool: '.' decimals regardless of
// locale, 17 significant digits, and a '#'-prefixed metadata block.

#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "treewave/sampler.hpp"
#include "treewave/tree.hpp"
#include "treewave/version.hpp"

namespace treewave::io {

inline std::string format_double(double value) {
  if (value == 0.0) value = 0.0;  // print -0 as 0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Metadata common to every output: tool, version, d, lambda, seed.
inline Metadata run_metadata(int d, double lambda, std::uint64_t seed) {
  return {{"tool", "treewave"},
          {"version", kVersion},
          {"d", std::to_string(d)},
          {"lambda", format_double(lambda)},
          {"seed", std::to_string(seed)}};
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const Metadata& meta, std::vector<std::string> columns) : out_(out) {
    for (const auto& [key, value] : meta) out_ << "# " << key << '=' << value << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
  }

  CsvWriter& cell(std::string_view text) {
    sep();
    out_ << text;
    return *this;
  }
  CsvWriter& cell(double value) { return cell(format_double(value)); }
  CsvWriter& cell(int value) { return cell(std::to_string(value)); }
  CsvWriter& cell(std::int64_t value) { return cell(std::to_string(value)); }
  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ostream& out_;
  bool first_ = true;
};

/// Ball or path realisation: vertex (slash address), depth, value.
inline void write_sample_csv(std::ostream& out, Metadata meta, const std::vector<VertexId>& vertices,
                             const std::vector<double>& values) {
  CsvWriter csv(out, meta, {"vertex", "depth", "value"});
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    csv.cell(vertices[i].to_string()).cell(vertices[i].depth()).cell(values[i]);
    csv.end_row();
  }
}

inline void write_ball_csv(std::ostream& out, Metadata meta, const BallSample& sample) {
  write_sample_csv(out, std::move(meta), sample.ball->vertices, sample.values);
}

}  // namespace treewave::io
