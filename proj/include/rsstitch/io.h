#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rsstitch/core.h"

namespace rsstitch {

// Text format:
//   # width=1280 height=720 gamma=1 pair=some-id
//   x1,y1,x2,y2
//   ...
// Blank lines and further '#' lines are ignored. gamma defaults to 1.
struct CorrespondenceFile {
  int width = 0;
  int height = 0;
  double gamma = 1.0;
  std::string pair;
  std::vector<Correspondence> corrs;

  RsParams Rs() const { return {gamma, static_cast<double>(height)}; }
};

// Errors carry kParse and name the offending line ("<source>:<line>: ...").
// Coordinates must lie within the declared size plus a 10% margin.
CorrespondenceFile ParseCorrespondences(const std::string& text,
                                        const std::string& source = "<input>");
CorrespondenceFile ReadCorrespondenceFile(const std::string& path);
std::string FormatCorrespondences(const CorrespondenceFile& file);
void WriteTextFile(const std::string& path, const std::string& text);
std::string ReadTextFile(const std::string& path);

}  // namespace rsstitch
