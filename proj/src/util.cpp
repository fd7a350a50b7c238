#include "agentloom/util.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace agentloom {

std::string hex16(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return std::string(buf, 16);
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      out.emplace_back(text.substr(pos));
      break;
    }
    out.emplace_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (!out.empty() && out.back().empty() && !text.empty() &&
      text.back() == '\n') {
    out.pop_back();
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

bool contains(std::string_view s, std::string_view needle) {
  return s.find(needle) != std::string_view::npos;
}

std::string replace_all(std::string text, std::string_view from,
                        std::string_view to) {
  if (from.empty()) return text;
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_ws = true;  // leading whitespace dropped
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_ws) out.push_back(' ');
      in_ws = true;
    } else {
      out.push_back(c);
      in_ws = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string virtual_timestamp(std::uint64_t ticks) {
  // Fixed epoch 2026-01-01T00:00:00Z; ticks are seconds.
  static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30,
                                                31, 31, 30, 31, 30, 31};
  std::uint64_t days = ticks / 86400;
  std::uint64_t rem = ticks % 86400;
  int year = 2026;
  auto leap = [](int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  };
  while (true) {
    std::uint64_t in_year = leap(year) ? 366u : 365u;
    if (days < in_year) break;
    days -= in_year;
    ++year;
  }
  int month = 0;
  while (true) {
    std::uint64_t in_month =
        static_cast<std::uint64_t>(kDays[month]) + (month == 1 && leap(year));
    if (days < in_month) break;
    days -= in_month;
    ++month;
  }
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02llu:%02llu:%02lluZ", year,
                month + 1, static_cast<int>(days) + 1,
                static_cast<unsigned long long>(rem / 3600),
                static_cast<unsigned long long>((rem / 60) % 60),
                static_cast<unsigned long long>(rem % 60));
  return buf;
}

NanoUsd parse_usd(std::string_view text) {
  std::string s = trim(text);
  if (s.empty()) throw PreconditionViolation("empty money literal");
  bool neg = false;
  std::size_t i = 0;
  if (s[0] == '-') {
    neg = true;
    i = 1;
  } else if (s[0] == '+') {
    i = 1;
  }
  if (s[i] == '$') ++i;
  NanoUsd whole = 0;
  bool any = false;
  for (; i < s.size() && s[i] != '.'; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i])))
      throw PreconditionViolation("bad money literal: " + s);
    whole = whole * 10 + (s[i] - '0');
    any = true;
  }
  NanoUsd frac = 0;
  int frac_digits = 0;
  if (i < s.size() && s[i] == '.') {
    ++i;
    for (; i < s.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(s[i])))
        throw PreconditionViolation("bad money literal: " + s);
      if (frac_digits < 9) {
        frac = frac * 10 + (s[i] - '0');
        ++frac_digits;
      }
      any = true;
    }
  }
  if (!any) throw PreconditionViolation("bad money literal: " + s);
  while (frac_digits < 9) {
    frac *= 10;
    ++frac_digits;
  }
  NanoUsd total = whole * 1000000000ll + frac;
  return neg ? -total : total;
}

std::string format_usd(NanoUsd value) {
  bool neg = value < 0;
  std::uint64_t v = neg ? static_cast<std::uint64_t>(-value)
                        : static_cast<std::uint64_t>(value);
  std::uint64_t whole = v / 1000000000ull;
  std::uint64_t frac = v % 1000000000ull;
  std::ostringstream os;
  if (neg) os << '-';
  os << whole;
  if (frac != 0) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%09llu",
                  static_cast<unsigned long long>(frac));
    std::string f(buf);
    while (!f.empty() && f.back() == '0') f.pop_back();
    os << '.' << f;
  }
  return os.str();
}

double usd_to_double(NanoUsd value) {
  return static_cast<double>(value) / 1e9;
}

}  // namespace agentloom
