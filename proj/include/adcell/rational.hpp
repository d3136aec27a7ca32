#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace adcell {

// All money, probabilities and LP values are exact rationals. Tightness
// checks downstream compare with == on these, so nothing in the solver or
// rounding path is ever allowed to pass through a double.
using Rat = mpq_class;

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Rat rat(long num, long den = 1) {
  Rat r(num, den);
  r.canonicalize();
  return r;
}

inline double to_double(const Rat& r) { return r.get_d(); }

inline bool is_integer(const Rat& r) { return r.get_den() == 1; }

// Parses "p/q", "p", or a plain decimal like "0.25" / "-3.5".
inline Rat parse_rational(const std::string& text) {
  if (text.empty()) throw ParseError("empty rational literal");
  const auto slash = text.find('/');
  const auto dot = text.find('.');
  try {
    if (slash != std::string::npos) {
      mpz_class num(text.substr(0, slash), 10);
      mpz_class den(text.substr(slash + 1), 10);
      if (den == 0) throw ParseError("zero denominator in '" + text + "'");
      Rat r(num, den);
      r.canonicalize();
      return r;
    }
    if (dot != std::string::npos) {
      std::string digits = text.substr(0, dot) + text.substr(dot + 1);
      const size_t frac_len = text.size() - dot - 1;
      if (digits.empty() || digits == "-" || digits == "+")
        throw ParseError("bad decimal '" + text + "'");
      mpz_class num(digits, 10);
      mpz_class den;
      mpz_ui_pow_ui(den.get_mpz_t(), 10, frac_len);
      Rat r(num, den);
      r.canonicalize();
      return r;
    }
    return Rat(mpz_class(text, 10));
  } catch (const std::invalid_argument&) {
    throw ParseError("cannot parse rational '" + text + "'");
  }
}

// "p" when the denominator is 1, otherwise "p/q".
inline std::string rational_to_string(const Rat& r) {
  if (r.get_den() == 1) return r.get_num().get_str();
  return r.get_num().get_str() + "/" + r.get_den().get_str();
}

}  // namespace adcell
