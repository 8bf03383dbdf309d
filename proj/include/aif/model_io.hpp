#pragma once

#include <filesystem>

#include <json.hpp>

#include "aif/model.hpp"

namespace aif {

/// Builds a model from its JSON document form. Tensors are either nested
/// arrays or {"shape": [...], "data": [...]} objects with row-major data.
/// Throws ModelError listing every violation found.
GenerativeModel model_from_json(const nlohmann::json& doc);
GenerativeModel load_model(const std::filesystem::path& path);

nlohmann::json model_to_json(const GenerativeModel& m);

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& doc);

}  // namespace aif
