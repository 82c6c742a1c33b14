#pragma once

// Numeric text tables: one matrix row per line.

#include "distla/dist_matrix.hpp"

#include <string>

namespace distla {

enum class Delimiter { Whitespace, Comma };

struct TableFormat {
  Delimiter delimiter = Delimiter::Whitespace;
  bool header = false;  // the first line is skipped, never parsed
  DataType tag = DataType::Double;
};

/// Collective.  Every rank reads the whole file and keeps the elements it
/// owns under [MC,MR].  Blank lines are ignored; the width is the token
/// count of the first data line and every other data line must match.
/// Empty input gives a 0 x 0 matrix.  Throws ParseError (1-based line and
/// field) for ragged rows and bad tokens, Error when the file cannot be
/// opened.
AnyDistMatrix read_table_dist(const std::string& path, GridPtr grid, const TableFormat& format = {});

/// Collective.  World rank 0 writes the gathered matrix using shortest
/// round-trip formatting, so read_table_dist restores it bitwise.  The
/// header line, when requested, is "V1 V2 ...".
void write_table(const AnyDistMatrix& a, const std::string& path, const TableFormat& format = {});

template <typename T>
void write_table(const DistMatrix<T>& a, const std::string& path, const TableFormat& format = {});

} // namespace distla
