#pragma once

// JSON system configuration:
//
//   {
//     "d": 2, "m": 1,
//     "dynamics":    {"kind": "lti", "A": [[...], ...]}  | {"kind": "ltv", "A_seq": [A_1, A_2, ...]},
//     "observation": {"kind": "lti", "H": [[...]]}       | {"kind": "ltv", "H_seq": [H_0, H_1, ...]},
//     "noise":       {"kind": "isotropic", "sigma2": 1e-6} | {"kind": "per_step", "R_seq": [R_0, ...]}
//   }
//
// Matrices are arrays of rows. Every error carries the JSON pointer of the
// offending field.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "isokal/error.hpp"
#include "isokal/linalg.hpp"
#include "isokal/model.hpp"

namespace isokal {

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(path + "/" + key, "missing required key");
  return *it;
}

inline Matrix<double> parse_matrix(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  Matrix<double> out;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    const std::string row_path = path + "/" + std::to_string(r);
    if (!row.is_array() || row.empty()) throw ConfigError(row_path, "expected a non-empty row");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      out.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(row_path, "ragged matrix: expected " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) {
        throw ConfigError(row_path + "/" + std::to_string(c), "expected a number");
      }
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw ConfigError(row_path + "/" + std::to_string(c), "not finite");
      out(r, c) = x;
    }
  }
  return out;
}

inline std::vector<Matrix<double>> parse_matrix_seq(const nlohmann::json& j,
                                                    const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of matrices");
  std::vector<Matrix<double>> seq;
  seq.reserve(j.size());
  for (std::size_t t = 0; t < j.size(); ++t) {
    seq.push_back(parse_matrix(j[t], path + "/" + std::to_string(t)));
  }
  return seq;
}

inline std::string parse_kind(const nlohmann::json& obj, const std::string& path) {
  const auto& kind = require(obj, "kind", path);
  if (!kind.is_string()) throw ConfigError(path + "/kind", "expected a string");
  return kind.get<std::string>();
}

inline void check_shape(const Matrix<double>& m, Eigen::Index rows, Eigen::Index cols,
                        const std::string& path) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ConfigError(path, "dimension mismatch: expected " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", got " + std::to_string(m.rows()) +
                                "x" + std::to_string(m.cols()));
  }
}

}  // namespace detail

/// Builds a validated model from a parsed configuration document.
inline SystemModel<double> load_model(const nlohmann::json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw ConfigError("", "configuration must be a JSON object");

  auto positive_int = [&](const char* key) {
    const auto& v = require(doc, key, "");
    if (!v.is_number_integer() || v.get<long long>() <= 0) {
      throw ConfigError(std::string("/") + key, "expected a positive integer");
    }
    return static_cast<Eigen::Index>(v.get<long long>());
  };
  const Eigen::Index d = positive_int("d");
  const Eigen::Index m = positive_int("m");
  if (m > d) {
    throw ConfigError("/m", "observation dimension m=" + std::to_string(m) +
                                " exceeds state dimension d=" + std::to_string(d));
  }

  const auto& dyn = require(doc, "dynamics", "");
  Dynamics<double> dynamics;
  if (const auto kind = parse_kind(dyn, "/dynamics"); kind == "lti") {
    auto a = parse_matrix(require(dyn, "A", "/dynamics"), "/dynamics/A");
    check_shape(a, d, d, "/dynamics/A");
    dynamics = Dynamics<double>::lti(std::move(a));
  } else if (kind == "ltv") {
    auto seq = parse_matrix_seq(require(dyn, "A_seq", "/dynamics"), "/dynamics/A_seq");
    for (std::size_t t = 0; t < seq.size(); ++t) {
      check_shape(seq[t], d, d, "/dynamics/A_seq/" + std::to_string(t));
    }
    dynamics = Dynamics<double>::ltv(std::move(seq));
  } else {
    throw ConfigError("/dynamics/kind", "expected \"lti\" or \"ltv\", got \"" + kind + "\"");
  }

  const auto& obs = require(doc, "observation", "");
  Observation<double> observation;
  if (const auto kind = parse_kind(obs, "/observation"); kind == "lti") {
    auto h = parse_matrix(require(obs, "H", "/observation"), "/observation/H");
    check_shape(h, m, d, "/observation/H");
    observation = Observation<double>::lti(std::move(h));
  } else if (kind == "ltv") {
    auto seq = parse_matrix_seq(require(obs, "H_seq", "/observation"), "/observation/H_seq");
    for (std::size_t t = 0; t < seq.size(); ++t) {
      check_shape(seq[t], m, d, "/observation/H_seq/" + std::to_string(t));
    }
    observation = Observation<double>::ltv(std::move(seq));
  } else {
    throw ConfigError("/observation/kind", "expected \"lti\" or \"ltv\", got \"" + kind + "\"");
  }

  const auto& nz = require(doc, "noise", "");
  Noise<double> noise;
  if (const auto kind = parse_kind(nz, "/noise"); kind == "isotropic") {
    const auto& s2 = require(nz, "sigma2", "/noise");
    if (!s2.is_number()) throw ConfigError("/noise/sigma2", "expected a number");
    noise = Noise<double>::isotropic(s2.get<double>());
  } else if (kind == "per_step") {
    auto seq = parse_matrix_seq(require(nz, "R_seq", "/noise"), "/noise/R_seq");
    for (std::size_t t = 0; t < seq.size(); ++t) {
      check_shape(seq[t], m, m, "/noise/R_seq/" + std::to_string(t));
    }
    noise = Noise<double>::per_step(std::move(seq));
  } else {
    throw ConfigError("/noise/kind", "expected \"isotropic\" or \"per_step\", got \"" + kind + "\"");
  }

  return SystemModel<double>(std::move(dynamics), std::move(observation), std::move(noise));
}

inline SystemModel<double> load_model_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return load_model(doc);
}

/// Reads and validates a configuration file. Unreadable files raise
/// `IoError`; malformed or invalid content raises `ConfigError`.
inline SystemModel<double> load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_model_text(buf.str());
}

/// Serializes a model back into the configuration schema.
template <class S>
nlohmann::json to_json(const SystemModel<S>& model) {
  auto mat = [](const Matrix<S>& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(to_double(m(r, c)));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto seq = [&](const std::vector<Matrix<S>>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& m : v) out.push_back(mat(m));
    return out;
  };
  nlohmann::json doc;
  doc["d"] = model.d();
  doc["m"] = model.m();
  const auto& dyn = model.dynamics_spec();
  doc["dynamics"] = dyn.time_varying
                        ? nlohmann::json{{"kind", "ltv"}, {"A_seq", seq(dyn.matrices)}}
                        : nlohmann::json{{"kind", "lti"}, {"A", mat(dyn.matrices.front())}};
  const auto& obs = model.observation_spec();
  doc["observation"] = obs.time_varying
                           ? nlohmann::json{{"kind", "ltv"}, {"H_seq", seq(obs.matrices)}}
                           : nlohmann::json{{"kind", "lti"}, {"H", mat(obs.matrices.front())}};
  const auto& nz = model.noise_spec();
  doc["noise"] = nz.sigma2
                     ? nlohmann::json{{"kind", "isotropic"}, {"sigma2", to_double(*nz.sigma2)}}
                     : nlohmann::json{{"kind", "per_step"}, {"R_seq", seq(nz.covariances)}};
  return doc;
}

}  // namespace isokal
