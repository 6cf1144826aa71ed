#include <fstream>
#include <map>
#include <sstream>

#include "mmdt/data.hpp"

namespace mmdt::data {

// Layout (UTF-8, LF):
//   format_version 1
//   mode pure|identity
//   bias 0|1
//   D <n>  Dt <n>  m <n>  K <n>      (one key per line)
//   generators  + m rows of D values
//   betas       + m rows of Dt values
//   classifiers + K rows of D values
//   categories  + K names, one per line

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string next(const char* expecting) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return line;
    }
    throw FormatError(std::string("model file truncated: expected ") + expecting, line_ + 1);
  }

  bool at_end() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return false;
    }
    return true;
  }

  std::size_t line() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::vector<std::string> words(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string w; ss >> w;) out.push_back(w);
  return out;
}

std::size_t parse_count(const std::string& text, std::size_t line) {
  std::size_t v = 0;
  std::size_t used = 0;
  try {
    v = std::stoul(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty() || text.front() == '-')
    throw FormatError("expected a non-negative integer, got '" + text + "'", line);
  return v;
}

DenseMatrix read_rows(LineReader& reader, const char* section, std::size_t rows, std::size_t cols) {
  const std::string header = reader.next(section);
  if (header != section)
    throw FormatError(std::string("expected section '") + section + "', got '" + header + "'",
                      reader.line());
  DenseMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto w = words(reader.next(section));
    if (w.size() != cols)
      throw FormatError(std::string(section) + " row " + std::to_string(r) + " has " +
                            std::to_string(w.size()) + " values, expected " + std::to_string(cols),
                        reader.line());
    for (std::size_t c = 0; c < cols; ++c) {
      try {
        m(r, c) = parse_double(w[c]);
      } catch (const FormatError& e) {
        throw FormatError(e.what(), reader.line());
      }
    }
  }
  return m;
}

void write_rows(std::ostream& out, const char* section, const DenseMatrix& m) {
  out << section << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << format_double(row[c]);
    out << '\n';
  }
}

}  // namespace

void format_model(std::ostream& out, const MmdtModel& model) {
  const auto& w = model.transform();
  out << "format_version " << kModelFormatVersion << '\n';
  out << "mode " << (w.mode() == Regularizer::identity_plus ? "identity" : "pure") << '\n';
  out << "bias " << (model.augment_bias() ? 1 : 0) << '\n';
  out << "D " << w.source_dim() << '\n';
  out << "Dt " << w.target_dim() << '\n';
  out << "m " << w.generator_count() << '\n';
  out << "K " << model.category_count() << '\n';
  write_rows(out, "generators", w.generators().matrix());
  write_rows(out, "betas", w.betas());
  write_rows(out, "classifiers", model.classifiers().matrix());
  out << "categories\n";
  for (const auto& n : model.category_names()) out << n << '\n';
}

MmdtModel parse_model(std::istream& in) {
  LineReader reader(in);
  std::map<std::string, std::string> header;
  const char* required[] = {"format_version", "mode", "D", "Dt", "m", "K"};

  {
    const auto w = words(reader.next("format_version"));
    if (w.size() != 2 || w[0] != "format_version")
      throw FormatError("model file must start with 'format_version'", reader.line());
    const std::size_t version = parse_count(w[1], reader.line());
    if (version != static_cast<std::size_t>(kModelFormatVersion))
      throw FormatError("unsupported model format_version " + w[1] + " (expected " +
                            std::to_string(kModelFormatVersion) + ")",
                        reader.line());
    header["format_version"] = w[1];
  }
  while (true) {
    const auto line = reader.next("header or 'generators'");
    const auto w = words(line);
    if (w.size() == 1 && w[0] == "generators") break;
    if (w.size() != 2) throw FormatError("malformed header line '" + line + "'", reader.line());
    if (w[0] != "mode" && w[0] != "bias" && w[0] != "D" && w[0] != "Dt" && w[0] != "m" && w[0] != "K")
      throw FormatError("unknown header key '" + w[0] + "'", reader.line());
    if (!header.emplace(w[0], w[1]).second)
      throw FormatError("duplicate header key '" + w[0] + "'", reader.line());
  }
  for (const char* key : required)
    if (!header.count(key)) throw FormatError(std::string("model header lacks '") + key + "'");

  Regularizer mode;
  if (header["mode"] == "pure") {
    mode = Regularizer::pure;
  } else if (header["mode"] == "identity") {
    mode = Regularizer::identity_plus;
  } else {
    throw FormatError("unknown mode '" + header["mode"] + "' (expected pure or identity)");
  }
  bool bias = false;
  if (auto it = header.find("bias"); it != header.end()) {
    if (it->second != "0" && it->second != "1") throw FormatError("bias must be 0 or 1");
    bias = it->second == "1";
  }
  const std::size_t d = parse_count(header["D"], 0);
  const std::size_t dt = parse_count(header["Dt"], 0);
  const std::size_t m = parse_count(header["m"], 0);
  const std::size_t k = parse_count(header["K"], 0);
  if (mode == Regularizer::identity_plus && d != dt)
    throw FormatError("identity mode needs D == Dt, got D=" + header["D"] + " Dt=" + header["Dt"]);
  if (bias && (d == 0 || dt == 0)) throw FormatError("bias-augmented model needs positive dimensions");

  // The 'generators' label was consumed by the header loop.
  DenseMatrix v(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    const auto w = words(reader.next("generators"));
    if (w.size() != d)
      throw FormatError("generators row " + std::to_string(r) + " has " + std::to_string(w.size()) +
                            " values, expected " + std::to_string(d),
                        reader.line());
    for (std::size_t c = 0; c < d; ++c) {
      try {
        v(r, c) = parse_double(w[c]);
      } catch (const FormatError& e) {
        throw FormatError(e.what(), reader.line());
      }
    }
  }
  DenseMatrix betas = read_rows(reader, "betas", m, dt);
  DenseMatrix theta = read_rows(reader, "classifiers", k, d);

  const std::string cat_header = reader.next("categories");
  if (cat_header != "categories")
    throw FormatError("expected section 'categories', got '" + cat_header + "'", reader.line());
  std::vector<std::string> names;
  for (std::size_t c = 0; c < k; ++c) {
    auto w = words(reader.next("category name"));
    if (w.size() != 1) throw FormatError("category names must be single tokens", reader.line());
    names.push_back(w[0]);
  }
  if (!reader.at_end()) throw FormatError("trailing content after categories", reader.line());

  LowRankTransform transform(HyperplaneSet(std::move(v)), std::move(betas), mode);
  return MmdtModel(std::move(transform), HyperplaneSet(std::move(theta)), std::move(names), bias);
}

void save_model(const MmdtModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  format_model(out, model);
  if (!out) throw DataError("write failed for " + path.string());
}

MmdtModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return parse_model(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace mmdt::data
