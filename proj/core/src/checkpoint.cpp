#include "ssg/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

namespace ssg {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("[models] sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

std::string json_hash(const nlohmann::json& doc) { return sha256_hex(doc.dump()); }

nlohmann::json params_to_json(const nn::ParamSet& ps) {
  auto arr = nlohmann::json::array();
  const auto values = ps.values();
  for (const nn::ParamBlock& b : ps.blocks()) {
    arr.push_back({{"name", b.name},
                   {"rows", b.rows},
                   {"cols", b.cols},
                   {"values", std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                                  values.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size()))}});
  }
  return arr;
}

void params_from_json(const nlohmann::json& arr, nn::ParamSet& ps) {
  const auto& blocks = ps.blocks();
  if (!arr.is_array() || arr.size() != blocks.size()) {
    throw ValidationError("[models] checkpoint parameter blocks do not match the architecture");
  }
  auto values = ps.values();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& j = arr[i];
    const nn::ParamBlock& b = blocks[i];
    if (j.at("name").get<std::string>() != b.name || j.at("rows").get<std::size_t>() != b.rows ||
        j.at("cols").get<std::size_t>() != b.cols) {
      throw ValidationError("[models] checkpoint block '" + b.name + "' has a mismatched shape");
    }
    const auto v = j.at("values").get<std::vector<double>>();
    if (v.size() != b.size()) {
      throw ValidationError("[models] checkpoint block '" + b.name + "' has the wrong size");
    }
    std::copy(v.begin(), v.end(), values.begin() + static_cast<std::ptrdiff_t>(b.offset));
  }
}

void check_header(const nlohmann::json& doc, std::string_view family) {
  if (!doc.contains("format_version") || doc.at("format_version").get<int>() != kCheckpointVersion) {
    throw ValidationError("[models] unsupported checkpoint format version");
  }
  if (doc.value("family", std::string{}) != family) {
    throw ValidationError("[models] checkpoint family is not '" + std::string(family) + "'");
  }
}

nlohmann::json to_json(const LabelModel& m) {
  nlohmann::json doc;
  doc["format_version"] = kCheckpointVersion;
  doc["family"] = "label_model";
  doc["arch"] = {{"input_dim", m.input_dim()}, {"hidden", m.hidden()}, {"universe", m.universe()}};
  doc["input_shift"] = m.input_shift();
  doc["input_scale"] = m.input_scale();
  doc["trained"] = m.trained();
  doc["params"] = params_to_json(m.params());
  return doc;
}

LabelModel label_model_from_json(const nlohmann::json& doc) {
  check_header(doc, "label_model");
  try {
    const auto& a = doc.at("arch");
    LabelModel m(a.at("input_dim").get<std::size_t>(), a.at("hidden").get<std::vector<std::size_t>>(),
                 a.at("universe").get<std::size_t>());
    m.input_shift() = doc.at("input_shift").get<std::vector<double>>();
    m.input_scale() = doc.at("input_scale").get<std::vector<double>>();
    if (m.input_shift().size() != m.input_dim() || m.input_scale().size() != m.input_dim()) {
      throw ValidationError("[models] checkpoint standardisation has the wrong size");
    }
    m.set_trained(doc.at("trained").get<bool>());
    params_from_json(doc.at("params"), m.params());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("[models] malformed checkpoint: ") + e.what());
  }
}

nlohmann::json to_json(const SequenceModel& m) {
  nlohmann::json doc;
  doc["format_version"] = kCheckpointVersion;
  doc["family"] = "sequence_model";
  const auto& s = m.shape();
  doc["arch"] = {{"input_vocab", s.input_vocab},
                 {"vocab", s.vocab},
                 {"max_len", s.max_len},
                 {"embedding", m.embedding()},
                 {"encoder_hidden", m.encoder_hidden()},
                 {"decoder_hidden", m.decoder_hidden()}};
  doc["trained"] = m.trained();
  doc["params"] = params_to_json(m.params());
  return doc;
}

SequenceModel sequence_model_from_json(const nlohmann::json& doc) {
  check_header(doc, "sequence_model");
  try {
    const auto& a = doc.at("arch");
    SequenceShape shape{a.at("input_vocab").get<std::size_t>(), a.at("vocab").get<std::size_t>(),
                        a.at("max_len").get<std::size_t>()};
    SequenceModel m(shape, a.at("embedding").get<std::size_t>(),
                    a.at("encoder_hidden").get<std::size_t>(),
                    a.at("decoder_hidden").get<std::size_t>());
    m.set_trained(doc.at("trained").get<bool>());
    params_from_json(doc.at("params"), m.params());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("[models] malformed checkpoint: ") + e.what());
  }
}

nlohmann::json to_json(const MultiLabelBaseline& m) {
  nlohmann::json doc;
  doc["format_version"] = kCheckpointVersion;
  doc["family"] = "multilabel_baseline";
  doc["arch"] = {{"input_dim", m.input_dim()}, {"hidden", m.hidden()}, {"universe", m.universe()}};
  doc["threshold"] = m.threshold();
  doc["input_shift"] = m.input_shift();
  doc["input_scale"] = m.input_scale();
  doc["params"] = params_to_json(m.params());
  return doc;
}

MultiLabelBaseline multilabel_baseline_from_json(const nlohmann::json& doc) {
  check_header(doc, "multilabel_baseline");
  try {
    const auto& a = doc.at("arch");
    MultiLabelBaseline m(a.at("input_dim").get<std::size_t>(),
                         a.at("hidden").get<std::vector<std::size_t>>(),
                         a.at("universe").get<std::size_t>(), doc.at("threshold").get<double>());
    m.input_shift() = doc.at("input_shift").get<std::vector<double>>();
    m.input_scale() = doc.at("input_scale").get<std::vector<double>>();
    if (m.input_shift().size() != m.input_dim() || m.input_scale().size() != m.input_dim()) {
      throw ValidationError("[models] checkpoint standardisation has the wrong size");
    }
    params_from_json(doc.at("params"), m.params());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("[models] malformed checkpoint: ") + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& doc, int indent) {
  if (std::filesystem::exists(path)) {
    throw ValidationError("[cli] refusing to overwrite existing file " + path);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("[cli] cannot write " + path);
  out << doc.dump(indent) << '\n';
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("[cli] cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("[cli] malformed JSON in " + path + ": " + e.what());
  }
}

}  // namespace ssg
