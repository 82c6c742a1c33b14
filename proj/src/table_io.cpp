#include "distla/table_io.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

namespace distla {

namespace {

struct Field {
  std::string_view text;
  int number;  // 1-based
};

std::vector<Field> split(std::string_view line, Delimiter delimiter, int line_no) {
  std::vector<Field> fields;
  auto is_space = [](char ch) { return ch == ' ' || ch == '\t' || ch == '\r' || ch == '\v' || ch == '\f'; };
  if (delimiter == Delimiter::Whitespace) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && is_space(line[i])) ++i;
      std::size_t start = i;
      while (i < line.size() && !is_space(line[i])) ++i;
      if (i > start) fields.push_back({line.substr(start, i - start), static_cast<int>(fields.size()) + 1});
    }
    return fields;
  }
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(',', start);
    std::string_view tok = line.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    while (!tok.empty() && is_space(tok.front())) tok.remove_prefix(1);
    while (!tok.empty() && is_space(tok.back())) tok.remove_suffix(1);
    const int number = static_cast<int>(fields.size()) + 1;
    if (tok.empty()) throw ParseError("empty field " + std::to_string(number) + " on line " + std::to_string(line_no), line_no, number);
    fields.push_back({tok, number});
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return fields;
}

template <typename T>
T parse_token(const Field& f, int line_no) {
  std::string_view text = f.text;
  if (text.size() > 1 && text.front() == '+') text.remove_prefix(1);
  T value{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size())
    throw ParseError("cannot parse '" + std::string(f.text) + "' as " +
                         (std::is_same_v<T, double> ? "a number" : "an integer") + " at line " +
                         std::to_string(line_no) + ", field " + std::to_string(f.number),
                     line_no, f.number);
  return value;
}

template <typename T>
struct ParsedTable {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<T> values;  // row-major
};

template <typename T>
ParsedTable<T> parse_file(const std::string& path, const TableFormat& format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  ParsedTable<T> table;
  std::string line;
  int line_no = 0;
  bool first_data = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && format.header) continue;
    if (line.find_first_not_of(" \t\r\v\f") == std::string::npos) continue;
    auto fields = split(line, format.delimiter, line_no);
    if (first_data) {
      table.width = static_cast<std::int64_t>(fields.size());
      first_data = false;
    } else if (static_cast<std::int64_t>(fields.size()) != table.width) {
      throw ParseError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                           " fields, expected " + std::to_string(table.width),
                       line_no);
    }
    for (const auto& f : fields) table.values.push_back(parse_token<T>(f, line_no));
    ++table.height;
  }
  return table;
}

template <typename T>
DistMatrix<T> read_typed(const std::string& path, GridPtr grid, const TableFormat& format) {
  const Communicator& world = grid->world();
  std::optional<ParsedTable<T>> table;
  std::exception_ptr failure;
  try {
    table = parse_file<T>(path, format);
  } catch (...) {
    failure = std::current_exception();
  }
  // Ranks agree on success and shape before anyone allocates.
  std::vector<double> mine = {failure ? 1.0 : 0.0, table ? static_cast<double>(table->height) : 0.0,
                              table ? static_cast<double>(table->width) : 0.0};
  auto hi = world.allreduce(ReduceOp::Max, mine);
  if (hi[0] > 0.0) {
    if (failure) std::rethrow_exception(failure);
    throw Error("reading '" + path + "' failed on another rank");
  }
  auto lo = world.allreduce(ReduceOp::Min, mine);
  if (lo[1] != hi[1] || lo[2] != hi[2]) throw UsageError("ranks disagree on the shape of '" + path + "'");

  const std::int64_t h = table->height;
  const std::int64_t w = h == 0 ? 0 : table->width;
  DistMatrix<T> a(std::move(grid), h, w);
  auto loc = a.local();
  for (std::int64_t jl = 0; jl < loc.width(); ++jl) {
    const std::int64_t j = a.global_col(jl);
    for (std::int64_t il = 0; il < loc.height(); ++il)
      loc(il, jl) = table->values[static_cast<std::size_t>(a.global_row(il) * w + j)];
  }
  return a;
}

} // namespace

AnyDistMatrix read_table_dist(const std::string& path, GridPtr grid, const TableFormat& format) {
  if (format.tag == DataType::Double) return read_typed<double>(path, std::move(grid), format);
  return read_typed<std::int64_t>(path, std::move(grid), format);
}

template <typename T>
void write_table(const DistMatrix<T>& a, const std::string& path, const TableFormat& format) {
  LocalMatrix<T> full = gather(a);
  const Communicator& world = a.grid().world();
  std::string status;
  if (world.rank() == 0) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    const char sep = format.delimiter == Delimiter::Comma ? ',' : ' ';
    if (out && format.header) {
      for (std::int64_t j = 0; j < full.width(); ++j) out << (j ? std::string(1, sep) : "") << 'V' << j + 1;
      out << '\n';
    }
    for (std::int64_t i = 0; out && i < full.height(); ++i) {
      std::string row;
      for (std::int64_t j = 0; j < full.width(); ++j) {
        if (j) row += sep;
        row += format_roundtrip(full(i, j));
      }
      out << row << '\n';
    }
    out.flush();
    if (!out) status = "cannot write '" + path + "'";
  }
  Bytes reply = world.broadcast(0, std::as_bytes(std::span(status.data(), status.size())));
  if (!reply.empty()) throw Error(std::string(reinterpret_cast<const char*>(reply.data()), reply.size()));
}

void write_table(const AnyDistMatrix& a, const std::string& path, const TableFormat& format) {
  std::visit([&](const auto& m) { write_table(m, path, format); }, a.variant());
}

template void write_table<double>(const DistMatrix<double>&, const std::string&, const TableFormat&);
template void write_table<std::int64_t>(const DistMatrix<std::int64_t>&, const std::string&, const TableFormat&);

} // namespace distla
