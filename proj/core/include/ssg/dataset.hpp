#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssg/types.hpp"

namespace ssg {

/// One input paired with its unordered target set.
struct SetSample {
  Input x;
  TargetSet y;
};

/// One (input, single target element) record; the unit of base-model training.
struct FlatPair {
  Input x;
  Element y;
  std::size_t group_id = 0;
};

/// Digits 0-9 are the only input symbols for sequence-input tasks.
inline constexpr std::size_t kDigitVocab = 10;

/// Immutable collection of samples over one declared universe.
///
/// For label tasks `universe` is |S| and `input_dim` the feature dimension.
/// For sequence tasks `universe` is the output vocabulary V including the end
/// token (always id V-1), `max_len` bounds complete sequences (end token
/// included) and `input_dim` is the input vocabulary. Label targets must be
/// non-empty; sequence targets may be empty.
class Dataset {
 public:
  Dataset(TaskKind kind, std::size_t universe, std::size_t max_len, std::size_t input_dim,
          std::vector<SetSample> samples);

  [[nodiscard]] TaskKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::size_t universe() const noexcept { return universe_; }
  [[nodiscard]] std::size_t max_len() const noexcept { return max_len_; }
  [[nodiscard]] std::size_t input_dim() const noexcept { return input_dim_; }
  [[nodiscard]] Token end_token() const noexcept { return static_cast<Token>(universe_ - 1); }
  [[nodiscard]] const std::vector<SetSample>& samples() const noexcept { return samples_; }
  [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
  [[nodiscard]] bool empty() const noexcept { return samples_.empty(); }

  /// Same header, subset of samples in the given order.
  [[nodiscard]] Dataset subset(const std::vector<std::size_t>& indices) const;

 private:
  TaskKind kind_;
  std::size_t universe_;
  std::size_t max_len_;
  std::size_t input_dim_;
  std::vector<SetSample> samples_;
};

/// Positive set of one group; `negatives` is the universe complement for
/// label tasks and left empty for sequence tasks (negatives there are
/// per-position, see position_candidates).
struct GroupTargets {
  TargetSet positives;
  LabelSet negatives;
};

[[nodiscard]] std::vector<FlatPair> flatten(const Dataset& dataset);

[[nodiscard]] std::map<std::size_t, GroupTargets> group_by_input(const std::vector<FlatPair>& flat,
                                                                 std::size_t universe);

/// Sorts and checks a target set; duplicates are rejected.
[[nodiscard]] LabelSet make_label_set(std::vector<Label> labels);
[[nodiscard]] SequenceSet make_sequence_set(std::vector<TokenSeq> seqs);

[[nodiscard]] std::size_t target_size(const TargetSet& y);

// Token text: '0'-'9' map to 0-9, 'a'-'z' to 10-35, '#' is the end token.

/// Parses a token string; `append_end` terminates it with the end token.
[[nodiscard]] TokenSeq parse_tokens(std::string_view text, std::size_t vocab, bool append_end);
/// Prints tokens; a trailing end token is dropped when `strip_end`.
[[nodiscard]] std::string format_tokens(const TokenSeq& seq, std::size_t vocab, bool strip_end = true);
/// Content of a complete sequence with the end token removed.
[[nodiscard]] TokenSeq strip_end(const TokenSeq& seq, Token end_token);

/// JSONL: header line then one sample per line.
void write_jsonl(std::ostream& out, const Dataset& dataset);
[[nodiscard]] Dataset read_jsonl(std::istream& in);
void save_dataset(const std::string& path, const Dataset& dataset);
[[nodiscard]] Dataset load_dataset(const std::string& path);

/// Seeded permutation split; returns (train indices, test indices).
[[nodiscard]] std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed);

}  // namespace ssg
