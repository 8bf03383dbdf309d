#include "aif/model_io.hpp"

#include <cmath>
#include <fstream>

namespace aif {

using nlohmann::json;

namespace {

void infer_shape(const json& node, std::vector<std::size_t>& shape, std::size_t depth) {
  if (!node.is_array()) return;
  if (depth == shape.size()) shape.push_back(node.size());
  else if (shape[depth] != node.size()) throw Error(Errc::ShapeMismatch, "ragged nested array");
  for (const auto& child : node) infer_shape(child, shape, depth + 1);
}

void flatten(const json& node, std::vector<double>& out) {
  if (node.is_array()) {
    for (const auto& child : node) flatten(child, out);
  } else if (node.is_number()) {
    out.push_back(node.get<double>());
  } else {
    throw Error(Errc::ShapeMismatch, "tensor entries must be numbers");
  }
}

std::vector<double> as_vector(const json& node) {
  if (!node.is_array()) throw Error(Errc::ShapeMismatch, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : node) {
    if (!x.is_number()) throw Error(Errc::ShapeMismatch, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<std::size_t> as_dims(const json& node) {
  if (!node.is_array()) throw Error(Errc::ShapeMismatch, "expected an array of integers");
  std::vector<std::size_t> out;
  for (const auto& x : node) {
    if (!x.is_number_integer() || x.get<long long>() < 0) throw Error(Errc::ShapeMismatch, "expected an array of non-negative integers");
    out.push_back(x.get<std::size_t>());
  }
  return out;
}

/// Reads a probability vector, recording a violation instead of throwing when it is not normalized.
Categorical read_categorical(const json& node, const std::string& path, std::vector<Violation>& violations) {
  auto raw = as_vector(node);
  try {
    return Categorical(std::move(raw));
  } catch (const Error& e) {
    violations.push_back({path, e.what()});
    return Categorical();
  }
}

}  // namespace

Tensor tensor_from_json(const json& doc) {
  if (doc.is_object()) {
    if (!doc.contains("shape") || !doc.contains("data")) throw Error(Errc::ShapeMismatch, "tensor object needs shape and data");
    return Tensor(as_dims(doc.at("shape")), as_vector(doc.at("data")));
  }
  std::vector<std::size_t> shape;
  infer_shape(doc, shape, 0);
  std::vector<double> data;
  flatten(doc, data);
  return Tensor(std::move(shape), std::move(data));
}

json tensor_to_json(const Tensor& t) {
  return json{{"shape", t.shape()}, {"data", std::vector<double>(t.data().begin(), t.data().end())}};
}

GenerativeModel model_from_json(const json& doc) {
  static const char* const kKeys[] = {"factor_dims", "modality_dims", "A", "B", "C", "D", "E", "policies"};
  std::vector<Violation> violations;
  if (!doc.is_object()) throw ModelError(std::vector<Violation>{{"", "model document must be an object"}});
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const char* k : kKeys) known = known || key == k;
    if (!known) violations.push_back({key, "unknown key"});
  }
  for (const char* k : kKeys) {
    if (std::string(k) == "E" || std::string(k) == "policies") continue;
    if (!doc.contains(k)) violations.push_back({k, "missing"});
  }
  if (!violations.empty()) throw ModelError(std::move(violations));

  GenerativeModel m;
  try {
    m.factor_dims = as_dims(doc.at("factor_dims"));
    m.modality_dims = as_dims(doc.at("modality_dims"));
    for (const auto& a : doc.at("A")) m.A.push_back(tensor_from_json(a));
    for (const auto& b : doc.at("B")) m.B.push_back(tensor_from_json(b));
    for (const auto& c : doc.at("C")) m.C.push_back(as_vector(c));
    std::size_t f = 0;
    for (const auto& d : doc.at("D")) m.D.push_back(read_categorical(d, "D[" + std::to_string(f++) + "]", violations));
    if (doc.contains("policies")) {
      for (const auto& p : doc.at("policies")) {
        Policy pol;
        for (const auto& step : p) pol.controls.push_back(as_dims(step));
        m.policies.push_back(std::move(pol));
      }
    }
    if (doc.contains("E")) {
      m.E = read_categorical(doc.at("E"), "E", violations);
    } else if (!m.policies.empty()) {
      m.E = Categorical::uniform(m.policies.size());
    }
  } catch (const ModelError&) {
    throw;
  } catch (const Error& e) {
    violations.push_back({"", e.what()});
    throw ModelError(std::move(violations));
  } catch (const json::exception& e) {
    violations.push_back({"", e.what()});
    throw ModelError(std::move(violations));
  }

  auto structural = validate_model(m);
  violations.insert(violations.end(), structural.begin(), structural.end());
  if (!violations.empty()) throw ModelError(std::move(violations));
  return m;
}

GenerativeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open model file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ModelError(std::vector<Violation>{{path.string(), e.what()}});
  }
  return model_from_json(doc);
}

json model_to_json(const GenerativeModel& m) {
  json doc;
  doc["factor_dims"] = m.factor_dims;
  doc["modality_dims"] = m.modality_dims;
  doc["A"] = json::array();
  for (const auto& a : m.A) doc["A"].push_back(tensor_to_json(a));
  doc["B"] = json::array();
  for (const auto& b : m.B) doc["B"].push_back(tensor_to_json(b));
  doc["C"] = m.C;
  doc["D"] = json::array();
  for (const auto& d : m.D) doc["D"].push_back(d.vec());
  if (!m.policies.empty()) {
    doc["E"] = m.E.vec();
    doc["policies"] = json::array();
    for (const auto& p : m.policies) doc["policies"].push_back(p.controls);
  }
  return doc;
}

}  // namespace aif
