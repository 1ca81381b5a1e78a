#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "dcgnn/dc_layer.hpp"
#include "dcgnn/model.hpp"
#include "dcgnn/tensor.hpp"

// JSON round trips for hyperparameters, run manifests, and small CSV matrix
// helpers shared by the command line tool and the tests.

namespace dcgnn::config {

using ad::Mat;

std::string activation_to_name(dc::Activation a);
std::string aggregation_to_name(dc::Aggregation a);
// Throw IoError on unknown names.
dc::Activation activation_from_name(const std::string& s);
dc::Aggregation aggregation_from_name(const std::string& s);

// Field names match the struct members; the layer block nests under "layer".
nlohmann::json hyperparams_to_json(const model::Hyperparams& hp);

// Applies the keys present in j on top of base. Unknown keys raise IoError so
// typos in config files fail loudly instead of silently using defaults.
model::Hyperparams hyperparams_from_json(const nlohmann::json& j,
                                         model::Hyperparams base = {});

nlohmann::json load_json_file(const std::string& path);
void save_json_file(const nlohmann::json& j, const std::string& path);

// Comma-separated numeric grid, one row per line, full double precision.
Mat load_matrix_csv(const std::string& path);
void save_matrix_csv(const Mat& m, const std::string& path);

// Run manifest: every command writes one echoing its resolved arguments, and
// can be re-run from it via --config.
nlohmann::json make_manifest(const std::string& command, const nlohmann::json& args);
// Accepts either a manifest (reads its "args") or a bare argument object.
nlohmann::json manifest_args(const nlohmann::json& j);

}  // namespace dcgnn::config
