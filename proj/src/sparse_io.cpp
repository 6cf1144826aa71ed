#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

#include "mmdt/data.hpp"

namespace mmdt::data {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t p = 0;
  while (p < s.size()) {
    while (p < s.size() && is_space(s[p])) ++p;
    std::size_t q = p;
    while (q < s.size() && !is_space(s[q])) ++q;
    if (q > p) out.push_back(s.substr(p, q - p));
    p = q;
  }
  return out;
}

template <class T>
bool parse_integer(std::string_view text, T& out) {
  const auto* first = text.data();
  const auto* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

// "# dimension N" declares the dimension; other comments are ignored.
std::optional<std::size_t> dimension_directive(std::string_view comment, std::size_t line) {
  auto words = split_ws(comment.substr(1));
  if (words.size() != 2 || words[0] != "dimension") return std::nullopt;
  std::size_t d = 0;
  if (!parse_integer(words[1], d)) throw FormatError("bad dimension declaration", line);
  return d;
}

}  // namespace

CategoryVocabulary::CategoryVocabulary(std::vector<std::string> names) {
  for (auto& n : names) intern(n);
}

int CategoryVocabulary::intern(const std::string& name) {
  auto it = ids_.find(name);
  if (it != ids_.end()) return it->second;
  const int id = static_cast<int>(names_.size());
  names_.push_back(name);
  ids_.emplace(name, id);
  return id;
}

std::optional<int> CategoryVocabulary::find(const std::string& name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("cannot format floating-point value");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = first + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last)
    throw FormatError("not a number: '" + std::string(text) + "'");
  if (!std::isfinite(v)) throw FormatError("non-finite value '" + std::string(text) + "'");
  return v;
}

Dataset parse_sparse_dataset(std::istream& in, CategoryVocabulary& vocabulary,
                             const ReadOptions& options) {
  struct Row {
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    int label;
  };
  std::vector<Row> rows;
  std::optional<std::size_t> declared;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      if (rows.empty() && !declared)
        if (auto d = dimension_directive(text, line_no)) declared = d;
      continue;
    }
    if (auto hash = text.find('#'); hash != std::string_view::npos) text = trim(text.substr(0, hash));

    auto tokens = split_ws(text);
    Row row;
    const std::string label(tokens[0]);
    if (label.find(':') != std::string::npos) throw FormatError("missing label", line_no);
    if (options.allow_new_labels) {
      row.label = vocabulary.intern(label);
    } else {
      auto id = vocabulary.find(label);
      if (!id) throw FormatError("unknown category '" + label + "'", line_no);
      row.label = *id;
    }

    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto tok = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == tok.size())
        throw FormatError("expected index:value, got '" + std::string(tok) + "'", line_no);
      std::size_t index = 0;
      if (!parse_integer(tok.substr(0, colon), index) || index == 0)
        throw FormatError("bad feature index '" + std::string(tok.substr(0, colon)) + "'", line_no);
      if (index > std::numeric_limits<std::uint32_t>::max())
        throw FormatError("feature index too large", line_no);
      double value = 0.0;
      try {
        value = parse_double(tok.substr(colon + 1));
      } catch (const FormatError& e) {
        throw FormatError(e.what(), line_no);
      }
      if (!row.idx.empty() && index - 1 <= row.idx.back())
        throw FormatError("feature indices must be strictly increasing", line_no);
      row.idx.push_back(static_cast<std::uint32_t>(index - 1));
      row.val.push_back(value);
      max_index = std::max(max_index, index);
    }
    rows.push_back(std::move(row));
  }

  if (rows.empty()) throw DataError("dataset has no examples");

  std::size_t dimension = max_index;
  if (options.dimension) {
    dimension = *options.dimension;
  } else if (declared) {
    dimension = *declared;
  }
  if (max_index > dimension)
    throw DimensionError("feature index " + std::to_string(max_index) + " exceeds declared dimension " +
                         std::to_string(dimension));

  std::vector<Example> examples;
  examples.reserve(rows.size());
  for (auto& r : rows)
    examples.push_back({FeatureVector::sparse(dimension, std::move(r.idx), std::move(r.val)), r.label});
  return Dataset(std::move(examples), dimension, vocabulary.size(), options.domain);
}

Dataset read_sparse_dataset(const std::filesystem::path& path, CategoryVocabulary& vocabulary,
                            const ReadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return parse_sparse_dataset(in, vocabulary, options);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void format_sparse_dataset(std::ostream& out, const Dataset& data, const CategoryVocabulary& vocabulary) {
  out << "# dimension " << data.dimension() << '\n';
  for (const auto& e : data.examples()) {
    out << vocabulary.name(e.label);
    e.x.for_each_nonzero([&](std::size_t k, double v) {
      if (v != 0.0 || e.x.is_sparse()) out << ' ' << (k + 1) << ':' << format_double(v);
    });
    out << '\n';
  }
}

void write_sparse_dataset(const std::filesystem::path& path, const Dataset& data,
                          const CategoryVocabulary& vocabulary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  format_sparse_dataset(out, data, vocabulary);
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace mmdt::data
