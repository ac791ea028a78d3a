#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "ssg/dataset.hpp"

namespace ssg {

enum class TaskTag { threshold, task1, task2, multilabel_file };

[[nodiscard]] std::string_view to_string(TaskTag t);
[[nodiscard]] TaskTag task_tag_from_string(std::string_view s);

inline constexpr std::size_t kTask2InputLength = 20;
/// Digits plus the end token.
inline constexpr std::size_t kDigitOutputVocab = kDigitVocab + 1;

struct TaskSpec {
  TaskTag task = TaskTag::task1;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  // task1 input length range, inclusive; lengths shorter than the leading digit are raised to it
  std::size_t task1_min_len = 2;
  std::size_t task1_max_len = 10;
  std::string path;  // multilabel_file

  void validate() const;
};

struct ThresholdTruth {
  LabelSet labels;
  bool out_of_range = false;  // x >= 10
};

/// {integer y : y > x, y <= 10}.
[[nodiscard]] ThresholdTruth threshold_truth(double x);
/// Distinct digits among the first m, m being the leading digit.
[[nodiscard]] LabelSet task1_truth(std::string_view x);
/// Distinct non-empty a[s,e) for the five (s,e) pairs of the first ten digits,
/// a being the last ten; each element is terminated by the end token.
[[nodiscard]] SequenceSet task2_truth(std::string_view x);

/// threshold: labels over {0..10}, one feature.
/// task1: digit-string input, targets are one-digit sequences (digit, end).
/// task2: 20-digit input, targets are digit sequences of length <= 10 plus end.
[[nodiscard]] Dataset generate(const TaskSpec& spec);

/// Recomputes every target from its input; throws on the first mismatch.
void verify_truths(const Dataset& dataset, TaskTag task);

/// Sparse multi-label text: "l1,l2 i:v i:v ...", one sample per line. An
/// optional first line "samples features labels" fixes the dimensions;
/// otherwise they are inferred from the largest indices seen.
[[nodiscard]] Dataset load_multilabel(std::istream& in, std::optional<std::size_t> features = {},
                                      std::optional<std::size_t> labels = {});
[[nodiscard]] Dataset load_multilabel(const std::string& path,
                                      std::optional<std::size_t> features = {},
                                      std::optional<std::size_t> labels = {});

/// Input digits as text.
[[nodiscard]] std::string digits_of(const Input& x);

/// Position-major one-hot encoding of a digit string, zero padded to `max_len`.
[[nodiscard]] Features digit_one_hot(const TokenSeq& digits, std::size_t max_len);

/// Task-1 data viewed as a label task over digits {0..9} with one-hot inputs,
/// used by the multi-label baseline.
[[nodiscard]] Dataset task1_label_view(const Dataset& dataset, std::size_t max_len);

/// One-token sequence targets (digit, end) mapped back to digit labels.
[[nodiscard]] LabelSet digit_labels(const SequenceSet& seqs, Token end_token);
[[nodiscard]] SequenceSet digit_sequences(const LabelSet& labels, Token end_token);

}  // namespace ssg
