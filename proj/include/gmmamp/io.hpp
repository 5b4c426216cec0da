#pragma once

// File artifacts: CSV tables, JSON params and manifests, instance
// directories. Doubles are printed with the shortest representation that
// round-trips, so parsing a file and rewriting it reproduces it byte for
// byte. Every write lands in a temp file in the target directory and is
// renamed into place.

#include "json.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "gmmamp/errors.hpp"
#include "gmmamp/model.hpp"
#include "gmmamp/version.hpp"

namespace gmmamp {

inline std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::invalid_argument("parse_double: bad number '" + std::string(text) + "'");
  return value;
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

// header may be empty for raw numeric tables.
inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const Eigen::MatrixXd& data) {
  std::string out;
  out.reserve(static_cast<size_t>(data.size()) * 12 + 64);
  if (!header.empty()) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (i) out += ',';
      out += header[i];
    }
    out += '\n';
  }
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (j) out += ',';
      out += format_double(data(i, j));
    }
    out += '\n';
  }
  write_text_atomic(path, out);
}

// Reads a CSV of doubles; a non-numeric first line is taken as the header.
inline Eigen::MatrixXd read_csv(const std::filesystem::path& path,
                                std::vector<std::string>* header = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read failed: " + path.string());
  if (header != nullptr) header->clear();
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      const size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (first) {
      first = false;
      double probe;
      const auto res =
          std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), probe);
      const bool numeric =
          res.ec == std::errc() && res.ptr == fields[0].data() + fields[0].size();
      if (!numeric) {
        if (header != nullptr) *header = fields;
        continue;
      }
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_double(f));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("read_csv: ragged rows in " + path.string());
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd data(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) data(i, j) = rows[i][j];
  return data;
}

inline nlohmann::json params_to_json(const ModelParams& p) {
  return nlohmann::json{{"n", p.n},     {"m", p.m},         {"r", p.r},
                        {"rho", p.rho}, {"delta", p.delta}, {"seed", p.seed}};
}

inline ModelParams params_from_json(const nlohmann::json& j) {
  ModelParams p;
  p.n = j.at("n").get<int>();
  p.m = j.at("m").get<int>();
  p.r = j.at("r").get<int>();
  p.rho = j.at("rho").get<double>();
  p.delta = j.at("delta").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.validate();
  return p;
}

inline void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read failed: " + path.string());
  return nlohmann::json::parse(in);
}

// Instance directory layout: params.json, X.csv (n rows of m reals),
// labels.csv (one 1-based label per line), centers.csv (n rows of r reals).
inline void write_instance(const std::filesystem::path& dir, const GmmInstance& inst) {
  std::filesystem::create_directories(dir);
  write_json_atomic(dir / "params.json", params_to_json(inst.params));
  write_csv(dir / "X.csv", {}, inst.X);
  write_csv(dir / "centers.csv", {}, inst.centers);
  std::string labels;
  for (Eigen::Index j = 0; j < inst.labels.size(); ++j) {
    labels += std::to_string(inst.labels(j) + 1);
    labels += '\n';
  }
  write_text_atomic(dir / "labels.csv", labels);
}

inline GmmInstance read_instance(const std::filesystem::path& dir) {
  GmmInstance inst;
  inst.params = params_from_json(read_json(dir / "params.json"));
  inst.X = read_csv(dir / "X.csv");
  inst.centers = read_csv(dir / "centers.csv");
  if (inst.X.rows() != inst.params.n || inst.X.cols() != inst.params.m)
    throw std::invalid_argument("read_instance: X shape does not match params");
  std::ifstream in(dir / "labels.csv");
  if (!in) throw std::runtime_error("read failed: " + (dir / "labels.csv").string());
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const int one_based = std::stoi(line);
    if (one_based < 1 || one_based > inst.params.r)
      throw std::invalid_argument("read_instance: label out of range");
    labels.push_back(one_based - 1);
  }
  if (static_cast<int>(labels.size()) != inst.params.m)
    throw std::invalid_argument("read_instance: label count does not match params");
  inst.labels = Eigen::Map<Eigen::VectorXi>(labels.data(), labels.size());
  return inst;
}

// Every CLI run drops a manifest recording what produced the directory.
inline nlohmann::json make_manifest(const std::string& subcommand,
                                    const nlohmann::json& config) {
  return nlohmann::json{
      {"tool", "gmmamp"}, {"version", kVersion}, {"subcommand", subcommand},
      {"config", config}};
}

}  // namespace gmmamp
