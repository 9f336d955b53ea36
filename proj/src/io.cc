#include "rsstitch/io.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rsstitch {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void Fail(const std::string& source, int line, const std::string& msg) {
  throw Error(ErrorCode::kParse, source + ":" + std::to_string(line) + ": " + msg);
}

bool ToDouble(const std::string& s, double& out) {
  const std::string t = Trim(s);
  if (t.empty()) return false;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

CorrespondenceFile ParseCorrespondences(const std::string& text, const std::string& source) {
  CorrespondenceFile f;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = Trim(raw);
    if (s.empty()) continue;
    if (s[0] == '#') {
      if (header) continue;
      std::istringstream kv(s.substr(1));
      std::string tok;
      bool any = false;
      while (kv >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        double d = 0.0;
        if (key == "pair") {
          f.pair = val;
        } else if (key == "width" || key == "height" || key == "gamma") {
          if (!ToDouble(val, d)) Fail(source, line, "bad header value for " + key);
          if (key == "gamma") {
            if (d < 0.0 || d > 1.0) Fail(source, line, "gamma must lie in [0, 1]");
            f.gamma = d;
          } else {
            if (d < 1.0 || d != std::floor(d)) Fail(source, line, key + " must be a positive integer");
            (key == "width" ? f.width : f.height) = static_cast<int>(d);
          }
        } else {
          Fail(source, line, "unknown header key '" + key + "'");
        }
        any = true;
      }
      header = any;
      continue;
    }
    if (!header) Fail(source, line, "data before the '# width=.. height=..' header");
    if (f.width <= 0 || f.height <= 0) Fail(source, line, "header lacks width or height");
    double v[4];
    std::istringstream row(s);
    std::string field;
    int n = 0;
    while (std::getline(row, field, ',')) {
      if (n == 4) Fail(source, line, "expected 4 fields x1,y1,x2,y2");
      if (!ToDouble(field, v[n])) Fail(source, line, "not a number: '" + Trim(field) + "'");
      ++n;
    }
    if (n != 4) Fail(source, line, "expected 4 fields x1,y1,x2,y2");
    const double mx = 0.1 * f.width, my = 0.1 * f.height;
    for (int i = 0; i < 4; i += 2) {
      if (v[i] < -mx || v[i] > f.width - 1 + mx || v[i + 1] < -my || v[i + 1] > f.height - 1 + my) {
        Fail(source, line, "coordinate outside the image plus 10% margin");
      }
    }
    f.corrs.push_back(Correspondence::FromPoints(Pixel(v[0], v[1]), Pixel(v[2], v[3])));
  }
  if (!header) Fail(source, line, "missing '# width=.. height=..' header");
  if (f.width <= 0 || f.height <= 0) Fail(source, line, "header lacks width or height");
  return f;
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

CorrespondenceFile ReadCorrespondenceFile(const std::string& path) {
  return ParseCorrespondences(ReadTextFile(path), path);
}

std::string FormatCorrespondences(const CorrespondenceFile& f) {
  std::string out = "# width=" + std::to_string(f.width) + " height=" + std::to_string(f.height);
  char buf[128];
  std::snprintf(buf, sizeof buf, " gamma=%.17g", f.gamma);
  out += buf;
  if (!f.pair.empty()) out += " pair=" + f.pair;
  out += "\n";
  for (const Correspondence& c : f.corrs) {
    const Pixel q = c.p2();
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", c.p1.x(), c.p1.y(), q.x(), q.y());
    out += buf;
  }
  return out;
}

}  // namespace rsstitch
