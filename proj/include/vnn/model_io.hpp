#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "vnn/network.hpp"

namespace vnn {

// Text model format:
//
//   vnn-model v1
//   layers <N>
//   layer <k> in <in_dim> out <out_dim> act <relu|identity>
//   <out_dim lines of in_dim weights, row-major>
//   bias <out_dim values>
//   ...
//   end
//
// Reals are written in shortest round-trip form, so save/load is bit-exact.
void write_network(std::ostream& out, const Network& net);
Network read_network(std::istream& in, const std::string& source = "<stream>");

// Writes via a temporary file and rename; a failed save leaves no partial file.
void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

// Shortest decimal string that parses back to exactly `value`.
std::string format_real(double value);

}  // namespace vnn
