#pragma once

// QAPLIB text formats and seeded instance generators.
//
//   .dat   n, then A row-major (n^2 integers), then B (n^2 integers)
//   .sln   n opt, then optionally n 1-based locations

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pdca/errors.hpp"
#include "pdca/extract.hpp"
#include "pdca/model.hpp"

namespace pdca {

struct InstanceFile {
  std::string name;
  int n = 0;
  MatrixXd flow;
  MatrixXd distance;
  std::string source_path;
};

struct SolutionFile {
  int n = 0;
  long long opt_value = 0;
  std::optional<Permutation> permutation;  // 0-based
};

namespace detail {

struct Token {
  long long value = 0;
  int line = 0;
  int col = 0;
};

inline std::string where(int line, int col) {
  return std::to_string(line) + ":" + std::to_string(col);
}

inline std::vector<Token> tokenize_integers(std::string_view text, const char* what) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
      ++col;
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    const std::string_view tok = text.substr(i, j - i);
    const char* first = tok.data();
    if (!tok.empty() && tok.front() == '+') ++first;
    Token t{0, line, col};
    const auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), t.value);
    if (ec == std::errc::result_out_of_range) {
      throw ParseError(std::string(what) + ": integer out of range '" + std::string(tok) + "' at " +
                       where(line, col));
    }
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError(std::string(what) + ": expected an integer, found '" + std::string(tok) +
                       "' at " + where(line, col));
    }
    out.push_back(t);
    col += static_cast<int>(j - i);
    i = j;
  }
  return out;
}

inline int read_dimension(const std::vector<Token>& toks, const char* what) {
  if (toks.empty()) throw ParseError(std::string(what) + ": empty input, expected n at 1:1");
  const detail::Token& t = toks.front();
  if (t.value <= 0 || t.value > 100000) {
    throw ParseError(std::string(what) + ": n must be a positive integer, found " +
                     std::to_string(t.value) + " at " + where(t.line, t.col));
  }
  return static_cast<int>(t.value);
}

}  // namespace detail

inline InstanceFile parse_instance(std::string_view text, std::string name = {}) {
  const auto toks = detail::tokenize_integers(text, "parse_instance");
  const int n = detail::read_dimension(toks, "parse_instance");
  const std::size_t need = 1 + 2 * static_cast<std::size_t>(n) * n;
  if (toks.size() < need) {
    const detail::Token& last = toks.back();
    throw ParseError("parse_instance: expected " + std::to_string(need - 1) +
                     " matrix entries after n, found " + std::to_string(toks.size() - 1) +
                     " (input ends after " + detail::where(last.line, last.col) + ")");
  }
  if (toks.size() > need) {
    const detail::Token& extra = toks[need];
    throw ParseError("parse_instance: unexpected token after the second matrix at " +
                     detail::where(extra.line, extra.col));
  }
  InstanceFile f;
  f.name = std::move(name);
  f.n = n;
  f.flow.resize(n, n);
  f.distance.resize(n, n);
  std::size_t k = 1;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) f.flow(i, j) = static_cast<double>(toks[k++].value);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) f.distance(i, j) = static_cast<double>(toks[k++].value);
  }
  return f;
}

inline SolutionFile parse_solution(std::string_view text) {
  const auto toks = detail::tokenize_integers(text, "parse_solution");
  const int n = detail::read_dimension(toks, "parse_solution");
  if (toks.size() < 2) {
    throw ParseError("parse_solution: missing objective value after n at " +
                     detail::where(toks[0].line, toks[0].col));
  }
  SolutionFile s;
  s.n = n;
  s.opt_value = toks[1].value;
  if (toks.size() == 2) return s;
  if (toks.size() != 2 + static_cast<std::size_t>(n)) {
    const detail::Token& last = toks.back();
    throw ParseError("parse_solution: expected " + std::to_string(n) + " permutation entries, found " +
                     std::to_string(toks.size() - 2) + " (last at " +
                     detail::where(last.line, last.col) + ")");
  }
  Permutation p(n);
  std::vector<char> seen(n, 0);
  for (int i = 0; i < n; ++i) {
    const detail::Token& t = toks[2 + i];
    if (t.value < 1 || t.value > n || seen[t.value - 1]) {
      throw ParseError("parse_solution: invalid permutation entry " + std::to_string(t.value) +
                       " at " + detail::where(t.line, t.col));
    }
    seen[t.value - 1] = 1;
    p[i] = static_cast<int>(t.value - 1);
  }
  s.permutation = std::move(p);
  return s;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string stem_of(const std::string& path) {
  const std::size_t slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  const std::size_t dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

inline InstanceFile load_instance(const std::string& path) {
  try {
    InstanceFile f = parse_instance(read_text_file(path), stem_of(path));
    f.source_path = path;
    return f;
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline SolutionFile load_solution(const std::string& path) {
  try {
    return parse_solution(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// QapInstance with C = 0. Asymmetric or negative data is rejected.
inline QapInstance to_qap(const InstanceFile& f) {
  for (int i = 0; i < f.n; ++i) {
    for (int j = i + 1; j < f.n; ++j) {
      if (f.flow(i, j) != f.flow(j, i) || f.distance(i, j) != f.distance(j, i)) {
        throw ModelError("instance '" + f.name + "' is asymmetric at (" + std::to_string(i) + ", " +
                         std::to_string(j) + "); only symmetric QAPLIB instances are supported");
      }
    }
  }
  QapInstance q;
  q.n = f.n;
  q.flow = f.flow;
  q.distance = f.distance;
  q.linear = MatrixXd::Zero(f.n, f.n);
  q.name = f.name;
  validate(q);
  return q;
}

/// Checks that the stated optimum matches the stated permutation.
inline void check_solution(const QapInstance& inst, const SolutionFile& s) {
  if (s.n != inst.n) {
    throw ModelError("solution has n = " + std::to_string(s.n) + " but the instance has n = " +
                     std::to_string(inst.n));
  }
  if (s.permutation) {
    const double v = qap_objective(inst, *s.permutation);
    if (v != static_cast<double>(s.opt_value)) {
      throw ModelError("solution file states " + std::to_string(s.opt_value) +
                       " but its permutation evaluates to " + std::to_string(v));
    }
  }
}

inline std::string serialize_instance(const InstanceFile& f) {
  std::ostringstream os;
  os << f.n << "\n\n";
  auto put = [&](const MatrixXd& m) {
    for (int i = 0; i < f.n; ++i) {
      for (int j = 0; j < f.n; ++j) {
        os << static_cast<long long>(m(i, j)) << (j + 1 < f.n ? " " : "\n");
      }
    }
  };
  put(f.flow);
  os << "\n";
  put(f.distance);
  return os.str();
}

inline std::string serialize_solution(const SolutionFile& s) {
  std::ostringstream os;
  os << s.n << " " << s.opt_value << "\n";
  if (s.permutation) {
    for (int i = 0; i < s.n; ++i) os << ((*s.permutation)[i] + 1) << (i + 1 < s.n ? " " : "\n");
  }
  return os.str();
}

inline InstanceFile to_file(const QapInstance& q) {
  InstanceFile f;
  f.name = q.name;
  f.n = q.n;
  f.flow = q.flow;
  f.distance = q.distance;
  return f;
}

/// Whole seconds as hh:mm:ss; hours grow past two digits when needed.
inline std::string format_hms(double seconds) {
  if (!(seconds >= 0.0)) seconds = 0.0;
  const long long total = static_cast<long long>(seconds + 0.5);
  const long long h = total / 3600, m = (total / 60) % 60, s = total % 60;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", h, m, s);
  return buf;
}

// ---------------------------------------------------------------------------
// Generators. All draw from std::mt19937_64 seeded with `seed`.

namespace detail {

inline MatrixXd random_symmetric_int(std::mt19937_64& rng, int n, int lo, int hi, bool zero_diag) {
  std::uniform_int_distribution<int> d(lo, hi);
  MatrixXd m = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = zero_diag ? i + 1 : i; j < n; ++j) m(i, j) = m(j, i) = d(rng);
  }
  return m;
}

}  // namespace detail

/// Symmetric integer A, B with entries in [0, max_entry] and zero diagonal.
inline QapInstance generate_random(int n, std::uint64_t seed, int max_entry = 9) {
  if (n < 1) throw std::invalid_argument("generate_random: n must be >= 1");
  if (max_entry < 0) throw std::invalid_argument("generate_random: max_entry must be >= 0");
  std::mt19937_64 rng(seed);
  QapInstance q;
  q.n = n;
  q.flow = detail::random_symmetric_int(rng, n, 0, max_entry, true);
  q.distance = detail::random_symmetric_int(rng, n, 0, max_entry, true);
  q.linear = MatrixXd::Zero(n, n);
  q.name = "rand" + std::to_string(n) + "_" + std::to_string(seed);
  return q;
}

/// Symmetric integer Q with entries in [1, max_entry].
inline StqpInstance generate_random_stqp(int n, std::uint64_t seed, int max_entry = 9) {
  if (n < 1) throw std::invalid_argument("generate_random_stqp: n must be >= 1");
  if (max_entry < 1) throw std::invalid_argument("generate_random_stqp: max_entry must be >= 1");
  std::mt19937_64 rng(seed);
  StqpInstance s;
  s.n = n;
  s.q_matrix = detail::random_symmetric_int(rng, n, 1, max_entry, false);
  return s;
}

/// Integer edge weights in [0, max_entry], zero diagonal, and group sizes
/// drawn uniformly among compositions of n into three positive parts.
inline TriPartInstance generate_random_tripartition(int n, std::uint64_t seed, int max_entry = 9) {
  if (n < 3) throw std::invalid_argument("generate_random_tripartition: n must be >= 3");
  if (max_entry < 0) throw std::invalid_argument("generate_random_tripartition: max_entry must be >= 0");
  std::mt19937_64 rng(seed);
  TriPartInstance t;
  t.n = n;
  t.adjacency = detail::random_symmetric_int(rng, n, 0, max_entry, true);
  std::uniform_int_distribution<int> cut(1, n - 1);
  int a = 0, b = 0;
  do {
    a = cut(rng);
    b = cut(rng);
  } while (a == b);
  if (a > b) std::swap(a, b);
  t.sizes = {a, b - a, n - b};
  return t;
}

}  // namespace pdca
