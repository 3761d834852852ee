#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "figs/errors.hpp"
#include "figs/io.hpp"

// Evaluation policy identifiers, shared by the config validator and the
// evaluation protocol.

namespace figs {

struct PolicyKind {
  enum class Type { Greedy, EpsGreedy, RandomSafe };
  Type type = Type::Greedy;
  double epsilon = 0.0;

  static PolicyKind greedy() { return {Type::Greedy, 0.0}; }
  static PolicyKind eps_greedy(double eps) {
    if (!(eps > 0.0 && eps < 1.0)) {
      throw std::domain_error("PolicyKind: epsilon must lie in (0,1)");
    }
    return {Type::EpsGreedy, eps};
  }
  static PolicyKind random_safe() { return {Type::RandomSafe, 0.0}; }

  bool needs_network() const { return type != Type::RandomSafe; }

  std::string name() const {
    switch (type) {
      case Type::Greedy: return "greedy";
      case Type::RandomSafe: return "random-safe";
      case Type::EpsGreedy: {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "eps-greedy-%.2f", epsilon);
        return buf;
      }
    }
    return "unknown";
  }

  std::string file_tag() const {
    switch (type) {
      case Type::Greedy: return "greedy";
      case Type::RandomSafe: return "random_safe";
      case Type::EpsGreedy: {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "eps_greedy_%02d",
                      static_cast<int>(std::lround(epsilon * 100.0)));
        return buf;
      }
    }
    return "unknown";
  }
};

inline PolicyKind parse_policy(const std::string& token) {
  if (token == "greedy") return PolicyKind::greedy();
  if (token == "random-safe" || token == "random_safe") {
    return PolicyKind::random_safe();
  }
  for (const std::string prefix : {"eps-greedy-", "eps:"}) {
    if (token.rfind(prefix, 0) == 0) {
      return PolicyKind::eps_greedy(
          parse_double(token.substr(prefix.size()), "policy epsilon"));
    }
  }
  throw ConfigError("unknown policy '" + token +
                    "' (expected greedy | eps-greedy-<x> | random-safe)");
}

}  // namespace figs
