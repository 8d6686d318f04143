#include "mlstab/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mlstab {

namespace {

using nlohmann::json;

[[nodiscard]] json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

[[nodiscard]] Eigen::MatrixXd matrix_from_json(const json& rows,
                                               const std::string& what) {
  if (!rows.is_array()) {
    throw std::runtime_error("model file: '" + what + "' must be an array");
  }
  const auto n_rows = rows.size();
  std::size_t n_cols = 0;
  if (n_rows > 0) {
    if (!rows[0].is_array()) {
      throw std::runtime_error("model file: '" + what +
                               "' must be an array of rows");
    }
    n_cols = rows[0].size();
  }
  Eigen::MatrixXd m(n_rows, n_cols);
  for (std::size_t i = 0; i < n_rows; ++i) {
    if (!rows[i].is_array() || rows[i].size() != n_cols) {
      throw std::runtime_error("model file: ragged rows in '" + what + "'");
    }
    for (std::size_t j = 0; j < n_cols; ++j) {
      if (!rows[i][j].is_number()) {
        throw std::runtime_error("model file: non-numeric entry in '" + what +
                                 "'");
      }
      const double x = rows[i][j].get<double>();
      if (!std::isfinite(x)) {
        throw std::runtime_error("model file: non-finite entry in '" + what +
                                 "'");
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x;
    }
  }
  return m;
}

[[nodiscard]] json parse(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw std::runtime_error(what + ": malformed JSON");
  }
  return j;
}

}  // namespace

std::string model_to_json(const Cpn1Model& model) {
  const auto& part = model.partition();
  json j;
  j["partition"] = {{"n", part.n},
                    {"m", part.m},
                    {"p", part.p},
                    {"q", part.q},
                    {"names", part.names}};
  j["phi"] = matrix_to_json(model.phi());
  j["s"] = matrix_to_json(model.s_struct());
  json meta;
  if (!model.lifts().empty()) {
    json lifts = json::array();
    for (const auto& lift : model.lifts()) {
      lifts.push_back({{"cos", part.names[lift.cos_index]},
                       {"sin", part.names[lift.sin_index]}});
    }
    meta["lifts"] = std::move(lifts);
  }
  if (!model.equation_names().empty()) {
    meta["equation_names"] = model.equation_names();
  }
  if (!meta.is_null()) j["meta"] = std::move(meta);
  return j.dump(2) + "\n";
}

Cpn1Model model_from_json(const std::string& text) {
  const json j = parse(text, "model file");
  if (!j.contains("partition") || !j.contains("phi") || !j.contains("s")) {
    throw std::runtime_error(
        "model file: requires fields 'partition', 'phi', 's'");
  }
  const json& pj = j["partition"];
  SignalPartition part;
  part.n = pj.value("n", -1);
  part.m = pj.value("m", -1);
  part.p = pj.value("p", -1);
  part.q = pj.value("q", -1);
  if (part.n < 0 || part.m < 0 || part.p < 0 || part.q < 0) {
    throw std::runtime_error("model file: partition counts missing");
  }
  if (!pj.contains("names") || !pj["names"].is_array()) {
    throw std::runtime_error("model file: partition.names missing");
  }
  for (const auto& name : pj["names"]) {
    part.names.push_back(name.get<std::string>());
  }

  Eigen::MatrixXd phi = matrix_from_json(j["phi"], "phi");
  Eigen::MatrixXd s = matrix_from_json(j["s"], "s");

  std::vector<LiftPair> lifts;
  std::vector<std::string> equation_names;
  if (j.contains("meta")) {
    const json& meta = j["meta"];
    if (meta.contains("lifts")) {
      for (const auto& lj : meta["lifts"]) {
        SignalPartition probe = part;  // index lookup needs a validated cache
        lifts.push_back({probe.index_of(lj.at("cos").get<std::string>()),
                         probe.index_of(lj.at("sin").get<std::string>())});
      }
    }
    if (meta.contains("equation_names")) {
      for (const auto& name : meta["equation_names"]) {
        equation_names.push_back(name.get<std::string>());
      }
    }
  }
  return Cpn1Model(std::move(part), std::move(phi), std::move(s),
                   std::move(lifts), std::move(equation_names));
}

void save_model(const Cpn1Model& model, const std::string& path) {
  write_text_file(path, model_to_json(model));
}

Cpn1Model load_model(const std::string& path) {
  return model_from_json(read_text_file(path));
}

std::string point_to_json(const SignalVector& v) {
  json signals = json::object();
  for (std::size_t i = 0; i < v.partition->names.size(); ++i) {
    signals[v.partition->names[i]] = v.values[static_cast<Eigen::Index>(i)];
  }
  json j;
  j["signals"] = std::move(signals);
  return j.dump(2) + "\n";
}

void save_point(const SignalVector& v, const std::string& path) {
  write_text_file(path, point_to_json(v));
}

SignalVector point_from_json(const Cpn1Model& model, const std::string& text) {
  const json j = parse(text, "point file");
  if (!j.contains("signals") || !j["signals"].is_object()) {
    throw std::runtime_error("point file: requires object field 'signals'");
  }
  SignalVector v = model.make_vector();
  for (const auto& [name, value] : j["signals"].items()) {
    if (!value.is_number()) {
      throw std::runtime_error("point file: signal '" + name +
                               "' is not a number");
    }
    const double x = value.get<double>();
    if (!std::isfinite(x)) {
      throw std::runtime_error("point file: signal '" + name +
                               "' is not finite");
    }
    v.values[model.partition().index_of(name)] = x;
  }
  return v;
}

SignalVector load_point(const Cpn1Model& model, const std::string& path) {
  return point_from_json(model, read_text_file(path));
}

std::vector<InputEvent> schedule_from_json(const std::string& text) {
  const json j = parse(text, "schedule file");
  if (!j.is_array()) {
    throw std::runtime_error("schedule file: expected a JSON array");
  }
  std::vector<InputEvent> events;
  for (const auto& ej : j) {
    InputEvent event;
    event.t = ej.at("t").get<double>();
    event.signal = ej.at("signal").get<std::string>();
    event.value = ej.at("value").get<double>();
    if (!std::isfinite(event.t) || !std::isfinite(event.value)) {
      throw std::runtime_error("schedule file: non-finite event");
    }
    events.push_back(std::move(event));
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const InputEvent& a, const InputEvent& b) {
                     return a.t < b.t;
                   });
  return events;
}

std::vector<InputEvent> load_schedule(const std::string& path) {
  return schedule_from_json(read_text_file(path));
}

std::string schedule_to_json(const std::vector<InputEvent>& events) {
  json j = json::array();
  for (const auto& event : events) {
    j.push_back(
        {{"t", event.t}, {"signal", event.signal}, {"value", event.value}});
  }
  return j.dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path);
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write file: " + path);
  }
  out << text;
}

}  // namespace mlstab
