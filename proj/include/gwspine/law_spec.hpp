#pragma once

// Text form of offspring laws:
//   deterministic:k=2   finite:0.5,0.5   geometric:p=0.5   dyadic:m=2.0

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "gwspine/offspring.hpp"

namespace gwspine {

class LawSpecError : public std::invalid_argument {
public:
  LawSpecError(const std::string& token, const std::string& why)
      : std::invalid_argument("bad law spec token '" + token + "': " + why), token_(token) {}
  [[nodiscard]] const std::string& token() const { return token_; }

private:
  std::string token_;
};

namespace detail {

inline double parse_real(std::string_view token) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || token.empty()) {
    throw LawSpecError(std::string(token), "not a number");
  }
  return v;
}

inline std::uint64_t parse_count(std::string_view token) {
  std::uint64_t v = 0;
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), last, v);
  if (ec != std::errc{} || ptr != last || token.empty()) {
    throw LawSpecError(std::string(token), "not a nonnegative integer");
  }
  return v;
}

/// Parses "key=value" requiring the given key.
inline std::string_view keyed_value(std::string_view token, std::string_view key) {
  const auto eq = token.find('=');
  if (eq == std::string_view::npos || token.substr(0, eq) != key) {
    throw LawSpecError(std::string(token), "expected '" + std::string(key) + "=<value>'");
  }
  return token.substr(eq + 1);
}

}  // namespace detail

inline OffspringLaw parse_law(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw LawSpecError(std::string(text), "expected '<family>:<parameters>'");
  }
  const std::string_view family = text.substr(0, colon);
  const std::string_view params = text.substr(colon + 1);

  auto rethrow_as_spec = [&](auto&& build) -> OffspringLaw {
    try {
      return build();
    } catch (const LawSpecError&) {
      throw;
    } catch (const std::exception& e) {
      throw LawSpecError(std::string(params), e.what());
    }
  };

  if (family == "deterministic") {
    const auto k = detail::parse_count(detail::keyed_value(params, "k"));
    return rethrow_as_spec([&] { return OffspringLaw::deterministic(k); });
  }
  if (family == "geometric") {
    const double p = detail::parse_real(detail::keyed_value(params, "p"));
    return rethrow_as_spec([&] { return OffspringLaw::geometric(p); });
  }
  if (family == "dyadic") {
    const double m = detail::parse_real(detail::keyed_value(params, "m"));
    return rethrow_as_spec([&] { return OffspringLaw::dyadic(m); });
  }
  if (family == "finite") {
    std::vector<double> masses;
    std::size_t start = 0;
    while (start <= params.size()) {
      const auto comma = params.find(',', start);
      const auto end = comma == std::string_view::npos ? params.size() : comma;
      masses.push_back(detail::parse_real(params.substr(start, end - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return rethrow_as_spec([&] { return OffspringLaw::finite(std::move(masses)); });
  }
  throw LawSpecError(std::string(family), "unknown family");
}

}  // namespace gwspine
