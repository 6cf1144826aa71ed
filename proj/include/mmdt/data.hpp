#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmdt/core.hpp"
#include "mmdt/mmdt.hpp"

namespace mmdt::data {

/** String labels <-> dense category ids, in first-seen order. */
class CategoryVocabulary {
 public:
  CategoryVocabulary() = default;
  explicit CategoryVocabulary(std::vector<std::string> names);

  /// Id of `name`, adding it when unseen.
  int intern(const std::string& name);
  std::optional<int> find(const std::string& name) const;
  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> ids_;
};

struct ReadOptions {
  Domain domain = Domain::source;
  /// Overrides both the inferred dimension and any "# dimension N" header line.
  std::optional<std::size_t> dimension;
  /// When false, labels missing from the vocabulary are errors.
  bool allow_new_labels = true;
};

/**
 * `<label> <idx>:<val> ...` with 1-based increasing indices, one example per line.
 * Blank lines and `#` comments are skipped; a leading `# dimension N` line declares
 * the dimension. The resulting category count is the vocabulary size after reading.
 */
Dataset parse_sparse_dataset(std::istream& in, CategoryVocabulary& vocabulary,
                             const ReadOptions& options = {});
Dataset read_sparse_dataset(const std::filesystem::path& path, CategoryVocabulary& vocabulary,
                            const ReadOptions& options = {});

void format_sparse_dataset(std::ostream& out, const Dataset& data, const CategoryVocabulary& vocabulary);
void write_sparse_dataset(const std::filesystem::path& path, const Dataset& data,
                          const CategoryVocabulary& vocabulary);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);
double parse_double(std::string_view text);

inline constexpr int kModelFormatVersion = 1;

void format_model(std::ostream& out, const MmdtModel& model);
MmdtModel parse_model(std::istream& in);
void save_model(const MmdtModel& model, const std::filesystem::path& path);
MmdtModel load_model(const std::filesystem::path& path);

enum class ShiftKind { rotation, random_linear, linear_plus_bias, dimension_change };

struct SynthConfig {
  std::size_t source_per_class = 20;
  std::size_t target_per_class = 5;
  std::size_t test_per_class = 50;
  std::size_t pool_per_class = 0;  ///< extra labeled target examples ("abundant target")
  std::size_t source_dim = 50;
  std::size_t target_dim = 50;
  std::size_t categories = 10;
  double center_spread = 1.0;
  double noise = 0.3;
  double target_noise = 0.0;
  ShiftKind shift = ShiftKind::rotation;
  /// Weight of the identity in A = (1 - mix) G + mix I for the random linear shifts (needs D == Dt).
  double identity_mix = 0.0;
  std::vector<int> heldout;  ///< categories without labeled target training data
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticPair {
  Dataset source;
  Dataset target;       ///< labeled target training data (held-out categories absent)
  Dataset target_test;  ///< all categories
  Dataset target_pool;  ///< abundant labeled target data; empty unless pool_per_class > 0
  DenseMatrix shift;    ///< A, with target = A source_latent + offset (+ noise)
  std::vector<double> offset;
  std::vector<int> heldout;
};

/// Named fixtures: rotation, linear, bias, dimchange.
SynthConfig synth_preset(std::string_view name);

SyntheticPair make_shifted_pair(const SynthConfig& config);

/// Keep only the listed categories, renumbered 0..keep.size()-1 in list order.
Dataset restrict_categories(const Dataset& data, const std::vector<int>& keep);
/// Examples of one category, as raw feature vectors.
std::vector<FeatureVector> category_examples(const Dataset& data, int category);

}  // namespace mmdt::data
