#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ssg {

/// Raised for malformed inputs: bad files, inconsistent datasets, dimension
/// mismatches. Messages carry a "[module]" prefix.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when optimisation diverges or a training set is degenerate.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Token = std::int32_t;

/// Index into a finite label universe.
struct Label {
  std::uint32_t id = 0;
  friend constexpr auto operator<=>(const Label&, const Label&) = default;
};

/// Ordered token list. A complete sequence ends with exactly one end token;
/// prefixes (decoder conditioning) never contain it.
struct TokenSeq {
  std::vector<Token> tokens;

  [[nodiscard]] std::size_t size() const noexcept { return tokens.size(); }
  [[nodiscard]] bool empty() const noexcept { return tokens.empty(); }
  friend auto operator<=>(const TokenSeq&, const TokenSeq&) = default;
  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

using Features = std::vector<double>;

/// Model input: a dense feature vector (label tasks) or a digit sequence.
using Input = std::variant<Features, TokenSeq>;

using LabelSet = std::vector<Label>;     // sorted, duplicate-free
using SequenceSet = std::vector<TokenSeq>;  // sorted, duplicate-free
using TargetSet = std::variant<LabelSet, SequenceSet>;
using Element = std::variant<Label, TokenSeq>;

enum class TaskKind { labels, sequences };

[[nodiscard]] std::string_view to_string(TaskKind kind);
[[nodiscard]] TaskKind task_kind_from_string(std::string_view s);

}  // namespace ssg
