#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ssg/label_model.hpp"
#include "ssg/multilabel_baseline.hpp"
#include "ssg/nn.hpp"
#include "ssg/sequence_model.hpp"

namespace ssg {

/// Checkpoints are single JSON documents: {"format_version", "family",
/// "arch", "params": [{"name","rows","cols","values"}...], ...} with values
/// in row-major order.
inline constexpr int kCheckpointVersion = 1;

[[nodiscard]] std::string sha256_hex(std::string_view bytes);
/// Hash of the compact serialisation.
[[nodiscard]] std::string json_hash(const nlohmann::json& doc);

[[nodiscard]] nlohmann::json params_to_json(const nn::ParamSet& ps);
/// Copies values into `ps`; block names and shapes must match exactly.
void params_from_json(const nlohmann::json& arr, nn::ParamSet& ps);
/// Rejects documents of another family or format version.
void check_header(const nlohmann::json& doc, std::string_view family);

[[nodiscard]] nlohmann::json to_json(const LabelModel& m);
[[nodiscard]] LabelModel label_model_from_json(const nlohmann::json& doc);

[[nodiscard]] nlohmann::json to_json(const SequenceModel& m);
[[nodiscard]] SequenceModel sequence_model_from_json(const nlohmann::json& doc);

[[nodiscard]] nlohmann::json to_json(const MultiLabelBaseline& m);
[[nodiscard]] MultiLabelBaseline multilabel_baseline_from_json(const nlohmann::json& doc);

/// Writes `doc` (compact when indent < 0); refuses to replace an existing file.
void write_json_file(const std::string& path, const nlohmann::json& doc, int indent = -1);
[[nodiscard]] nlohmann::json read_json_file(const std::string& path);

}  // namespace ssg
