#pragma once

#include <Eigen/Dense>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace condisim::io {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf.data(), end);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double x = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return x;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Numeric table with a header row.
struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd rows;  // rows x columns, as in the file
};

inline void write_csv(std::ostream& out, const std::vector<std::string>& header, const Eigen::MatrixXd& rows) {
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) out << (c ? "," : "") << format_double(rows(r, c));
    out << '\n';
  }
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(out, header, rows);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV file " + path.string());
  for (auto& h : split(line, ',')) t.header.push_back(trim(h));
  std::vector<std::vector<double>> data;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != t.header.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(t.header.size()) + " columns");
    std::vector<double> row;
    for (auto& c : cells) {
      try {
        row.push_back(parse_double(c));
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    data.push_back(std::move(row));
  }
  t.rows.resize(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t r = 0; r < data.size(); ++r)
    for (std::size_t c = 0; c < data[r].size(); ++c)
      t.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = data[r][c];
  return t;
}

/// "key: value" lines, in insertion order.
inline void write_report(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [k, v] : kv) out << k << ": " << v << '\n';
}

// ------------------------------------------------------------------ base64

inline std::string base64_encode(const std::uint8_t* data, std::size_t n) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (std::size_t i = 0; i < n; i += 3) {
    std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
    if (i + 1 < n) v |= static_cast<std::uint32_t>(data[i + 1]) << 8;
    if (i + 2 < n) v |= data[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < n ? kAlphabet[(v >> 6) & 63] : '=';
    out += i + 2 < n ? kAlphabet[v & 63] : '=';
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view s) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (s.size() % 4 != 0) throw std::invalid_argument("base64: length not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      if (s[i + k] == '=') {
        if (i + 4 != s.size() || k < 2) throw std::invalid_argument("base64: misplaced padding");
        v[k] = 0;
        ++pad;
      } else {
        if (pad) throw std::invalid_argument("base64: data after padding");
        v[k] = value(s[i + k]);
        if (v[k] < 0) throw std::invalid_argument("base64: invalid character");
      }
    }
    const std::uint32_t w = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(w >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(w >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(w));
  }
  return out;
}

/// Doubles as little-endian IEEE-754 bytes, base64 encoded.
inline std::string encode_doubles(const double* x, std::size_t n) {
  std::vector<std::uint8_t> bytes(n * 8);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &x[i], 8);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return base64_encode(bytes.data(), bytes.size());
}

inline std::vector<double> decode_doubles(std::string_view s) {
  const auto bytes = base64_decode(s);
  if (bytes.size() % 8 != 0) throw std::invalid_argument("encoded doubles: byte count not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    std::memcpy(&out[i], &bits, 8);
  }
  return out;
}

// ---------------------------------------------------------- key=value text

/// Flat `key = value` config text; '#' starts a comment. Duplicate keys: last wins.
inline std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source = "<config>") {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": empty key");
    out[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace condisim::io
