#pragma once

#include <iosfwd>
#include <string>

#include "tenstream/parafac2.hpp"
#include "tenstream/tensor.hpp"

namespace tenstream {

// Shortest decimal that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

// Coordinate text: optional `# shape: I J K` header, then `i j k value` per
// line with 1-based indices. Other `#` lines are comments. Explicit zeros are
// dropped; duplicate coordinates and indices outside the shape are errors.
// Without a header the shape is the largest index seen per mode.
SparseTensor read_coordinate(std::istream& in, const std::string& name = "<stream>");
void write_coordinate(std::ostream& out, const SparseTensor& t);
SparseTensor load_tensor(const std::string& path);
void save_tensor(const SparseTensor& t, const std::string& path);

// Irregular text: `k i j value` per line. `# slices: I_1 ... I_K` fixes the
// slice count and heights, `# cols: J` fixes J; otherwise they are the
// largest indices seen and every slice from 1 to K must have an entry.
IrregularTensor read_irregular(std::istream& in, const std::string& name = "<stream>");
void write_irregular(std::ostream& out, const IrregularTensor& t);
IrregularTensor load_irregular(const std::string& path);
void save_irregular(const IrregularTensor& t, const std::string& path);

Matrix read_csv(std::istream& in, const std::string& name = "<stream>");
void write_csv(std::ostream& out, const Matrix& m);
Matrix load_csv(const std::string& path);
void save_csv(const Matrix& m, const std::string& path);

}  // namespace tenstream
