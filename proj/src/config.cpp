#include "dcgnn/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "dcgnn/errors.hpp"

namespace dcgnn::config {

using json = nlohmann::json;

std::string activation_to_name(dc::Activation a) {
  return a == dc::Activation::kTanh ? "tanh" : "none";
}

dc::Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return dc::Activation::kTanh;
  if (s == "none") return dc::Activation::kNone;
  throw IoError("unknown activation \"" + s + "\" (expected none or tanh)");
}

std::string aggregation_to_name(dc::Aggregation a) {
  return a == dc::Aggregation::kSum ? "sum" : "weighted";
}

dc::Aggregation aggregation_from_name(const std::string& s) {
  if (s == "sum") return dc::Aggregation::kSum;
  if (s == "weighted") return dc::Aggregation::kWeighted;
  throw IoError("unknown aggregation \"" + s + "\" (expected weighted or sum)");
}

namespace {

json layer_to_json(const dc::LayerConfig& l) {
  json j;
  j["alpha"] = l.alpha;
  j["beta"] = l.beta;
  j["lambda"] = l.lambda;
  j["t_global"] = l.t_global;
  j["t_local"] = l.t_local;
  j["use_message_transform"] = l.use_message_transform;
  j["activation"] = activation_to_name(l.activation);
  j["aggregation"] = aggregation_to_name(l.aggregation);
  j["stabilize_costs"] = l.stabilize_costs;
  j["grad_through_assignments"] = l.grad_through_assignments;
  j["run_to_convergence"] = l.run_to_convergence;
  j["convergence_tol"] = l.convergence_tol;
  j["min_entry"] = l.min_entry;
  j["message_dropout"] = l.message_dropout;
  j["layer_norm"] = l.layer_norm;
  return j;
}

template <typename T>
void pick(const json& j, const char* key, T& into, std::set<std::string>& seen) {
  if (j.contains(key)) {
    seen.insert(key);
    try {
      into = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw IoError(std::string("config key \"") + key + "\" has the wrong type");
    }
  }
}

void reject_unknown(const json& j, const std::set<std::string>& seen, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!seen.count(it.key()))
      throw IoError("unknown " + where + " key \"" + it.key() + "\"");
}

dc::LayerConfig layer_from_json(const json& j, dc::LayerConfig base) {
  if (!j.is_object()) throw IoError("layer config must be a JSON object");
  std::set<std::string> seen;
  pick(j, "alpha", base.alpha, seen);
  pick(j, "beta", base.beta, seen);
  pick(j, "lambda", base.lambda, seen);
  pick(j, "t_global", base.t_global, seen);
  pick(j, "t_local", base.t_local, seen);
  pick(j, "use_message_transform", base.use_message_transform, seen);
  if (j.contains("activation")) {
    seen.insert("activation");
    base.activation = activation_from_name(j.at("activation").get<std::string>());
  }
  if (j.contains("aggregation")) {
    seen.insert("aggregation");
    base.aggregation = aggregation_from_name(j.at("aggregation").get<std::string>());
  }
  pick(j, "stabilize_costs", base.stabilize_costs, seen);
  pick(j, "grad_through_assignments", base.grad_through_assignments, seen);
  pick(j, "run_to_convergence", base.run_to_convergence, seen);
  pick(j, "convergence_tol", base.convergence_tol, seen);
  pick(j, "min_entry", base.min_entry, seen);
  pick(j, "message_dropout", base.message_dropout, seen);
  pick(j, "layer_norm", base.layer_norm, seen);
  reject_unknown(j, seen, "layer config");
  return base;
}

}  // namespace

json hyperparams_to_json(const model::Hyperparams& hp) {
  json j;
  j["layers"] = hp.layers;
  j["hidden_channels"] = hp.hidden_channels;
  j["n_global"] = hp.n_global;
  j["n_local"] = hp.n_local;
  j["encoder_depth"] = hp.encoder_depth;
  j["lr"] = hp.lr;
  j["weight_decay"] = hp.weight_decay;
  j["epochs"] = hp.epochs;
  j["dropout"] = hp.dropout;
  j["omega1"] = hp.omega1;
  j["omega2"] = hp.omega2;
  j["seed"] = hp.seed;
  j["layer"] = layer_to_json(hp.layer);
  return j;
}

model::Hyperparams hyperparams_from_json(const json& j, model::Hyperparams base) {
  if (!j.is_object()) throw IoError("hyperparameters must be a JSON object");
  std::set<std::string> seen;
  pick(j, "layers", base.layers, seen);
  pick(j, "hidden_channels", base.hidden_channels, seen);
  pick(j, "n_global", base.n_global, seen);
  pick(j, "n_local", base.n_local, seen);
  pick(j, "encoder_depth", base.encoder_depth, seen);
  pick(j, "lr", base.lr, seen);
  pick(j, "weight_decay", base.weight_decay, seen);
  pick(j, "epochs", base.epochs, seen);
  pick(j, "dropout", base.dropout, seen);
  pick(j, "omega1", base.omega1, seen);
  pick(j, "omega2", base.omega2, seen);
  pick(j, "seed", base.seed, seen);
  if (j.contains("layer")) {
    seen.insert("layer");
    base.layer = layer_from_json(j.at("layer"), base.layer);
  }
  reject_unknown(j, seen, "hyperparameter");
  return base;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw IoError(path + " is not valid JSON: " + e.what());
  }
  return j;
}

void save_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed while writing: " + path);
}

Mat load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(lineno) + ": not a number: \"" + cell + "\"");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path + ":" + std::to_string(lineno) + ": ragged row (expected " +
                    std::to_string(rows.front().size()) + " columns, found " +
                    std::to_string(row.size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path + ": empty matrix");
  Mat m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  return m;
}

void save_matrix_csv(const Mat& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out.precision(17);
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed while writing: " + path);
}

json make_manifest(const std::string& command, const json& args) {
  json j;
  j["format"] = "dcgnn-manifest";
  j["version"] = 1;
  j["command"] = command;
  j["args"] = args;
  return j;
}

json manifest_args(const json& j) {
  if (j.is_object() && j.contains("args") && j.value("format", "") == "dcgnn-manifest")
    return j.at("args");
  if (j.is_object()) return j;
  throw IoError("config must be a JSON object or a run manifest");
}

}  // namespace dcgnn::config
