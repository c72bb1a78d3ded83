#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tenstream/btd.hpp"
#include "tenstream/cp.hpp"
#include "tenstream/parafac2.hpp"

namespace tenstream::cli {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

// Factor matrices as written by `decompose` and `stream`: a directory with
// manifest.txt and one CSV per matrix.
struct SavedModel {
  std::string model;  // cp | parafac2 | btd
  KruskalFactors cp;
  Parafac2Factors pf2;
  BtdFactors btd;
};

void save_model(const SavedModel& m, const std::string& dir);
SavedModel load_model(const std::string& dir);

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tenstream::cli
