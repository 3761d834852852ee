#pragma once

#include <cstdio>
#include <sstream>
#include <string>

#include "figs/certify.hpp"
#include "figs/io.hpp"
#include "figs/rng.hpp"

// Gain-table serialization: versioned structured text, every value as a
// 17-significant-digit decimal so round trips are bit-exact. P is stored as
// its 105 lower-triangle entries (row-major over rows, columns 0..i).

namespace figs {

inline constexpr const char* kTableFormatTag = "figs_gain_table v1";

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

inline std::string serialize_gain_table(const GainTable& table) {
  std::ostringstream out;
  out << kTableFormatTag << "\n";
  out << "snap_bound " << format_double(table.snap_bound) << "\n";
  out << "translational_levels " << table.translational_levels.size() << "\n";
  for (const auto& l : table.translational_levels) {
    out << "level " << format_double(l[0]) << " " << format_double(l[1]) << " "
        << format_double(l[2]) << " " << format_double(l[3]) << "\n";
  }
  out << "yaw_levels " << table.yaw_levels.size() << "\n";
  for (const auto& l : table.yaw_levels) {
    out << "level " << format_double(l[0]) << " " << format_double(l[1])
        << "\n";
  }
  out << "actions " << table.size() << "\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    const Certificate& c = table.certificates[i];
    out << "action " << i << "\n";
    out << "k";
    for (int j = 0; j < 14; ++j) {
      out << " " << format_double(table.gains[i].k(j));
    }
    out << "\n";
    out << "cert " << format_double(c.alpha) << " " << format_double(c.beta)
        << " " << format_double(c.rho) << " " << format_double(c.lyap_residual)
        << " " << format_double(c.snap_bound_used) << "\n";
    out << "P\n";
    for (int r = 0; r < 14; ++r) {
      for (int col = 0; col <= r; ++col) {
        out << (col ? " " : "") << format_double(c.P(r, col));
      }
      out << "\n";
    }
  }
  out << "end\n";
  return out.str();
}

inline GainTable parse_gain_table(const std::string& body) {
  TokenReader r(body, "gain table");
  std::string tag, ver;
  tag = r.word("format tag");
  ver = r.word("format version");
  if (tag + " " + ver != kTableFormatTag) {
    throw IoError("gain table: unknown format tag '" + tag + " " + ver + "'");
  }
  GainTable table;
  r.expect("snap_bound");
  table.snap_bound = r.number("snap_bound");
  r.expect("translational_levels");
  table.translational_levels.resize(r.count("translational level count"));
  for (auto& l : table.translational_levels) {
    r.expect("level");
    for (double& v : l) v = r.number("translational level entry");
  }
  r.expect("yaw_levels");
  table.yaw_levels.resize(r.count("yaw level count"));
  for (auto& l : table.yaw_levels) {
    r.expect("level");
    for (double& v : l) v = r.number("yaw level entry");
  }
  r.expect("actions");
  const std::size_t n = r.count("action count");
  table.gains.resize(n);
  table.certificates.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.expect("action");
    if (r.count("action index") != i) {
      throw IoError("gain table: action indices out of order");
    }
    r.expect("k");
    for (int j = 0; j < 14; ++j) {
      table.gains[i].k(j) = r.number("gain entry");
    }
    Certificate& c = table.certificates[i];
    r.expect("cert");
    c.alpha = r.number("alpha");
    c.beta = r.number("beta");
    c.rho = r.number("rho");
    c.lyap_residual = r.number("residual");
    c.snap_bound_used = r.number("snap_bound_used");
    r.expect("P");
    for (int row = 0; row < 14; ++row) {
      for (int col = 0; col <= row; ++col) {
        const double v = r.number("P entry");
        c.P(row, col) = v;
        c.P(col, row) = v;
      }
    }
  }
  r.expect("end");
  if (table.gains.empty()) throw EmptyTable("gain table: zero actions");
  return table;
}

inline void save_gain_table(GainTable& table, const std::string& path) {
  const std::string body = serialize_gain_table(table);
  table.content_hash = hash_hex(fnv1a64(body));
  write_text_file(path, body);
}

inline GainTable load_gain_table(const std::string& path) {
  const std::string body = read_text_file(path);
  GainTable table = parse_gain_table(body);
  table.content_hash = hash_hex(fnv1a64(body));
  return table;
}

}  // namespace figs
