#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "figs/errors.hpp"

namespace figs {

// Shortest exact decimal for a double under round-trip: 17 significant
// digits always survive strtod. Used everywhere a number hits a file so
// reruns are byte-identical and re-reads are bit-identical.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& tok, const char* where) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') {
    throw IoError(std::string(where) + ": bad numeric token '" + tok + "'");
  }
  return v;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << body;
  if (!out) throw IoError("write failed: " + path);
}

// Whitespace-token reader for the structured text formats (gain table,
// checkpoint). Everything throws IoError with the caller-supplied context.
struct TokenReader {
  std::istringstream in;
  std::string scope;
  explicit TokenReader(const std::string& body, std::string scope_name)
      : in(body), scope(std::move(scope_name)) {}

  std::string word(const char* what) {
    std::string tok;
    if (!(in >> tok)) throw IoError(scope + ": missing " + what);
    return tok;
  }

  void expect(const char* literal) {
    const std::string tok = word(literal);
    if (tok != literal) {
      throw IoError(scope + ": expected '" + literal + "', got '" + tok + "'");
    }
  }

  double number(const char* what) {
    return parse_double(word(what), what);
  }

  std::size_t count(const char* what) {
    const double v = number(what);
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw IoError(scope + ": bad count for " + what);
    }
    return static_cast<std::size_t>(v);
  }
};

}  // namespace figs
