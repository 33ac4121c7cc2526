#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "pseudosup/mlp.hpp"

namespace pseudosup {

// Text checkpoint:
//   mlp <d0> <d1> ... <dk>
//   one parameter per line, layer by layer, weights row-major then biases.

inline std::string format_real(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Parses a full token as a double; returns false on trailing junk or empty input.
inline bool parse_real(const std::string& token, double& out) {
  if (token.empty()) return false;
  const char* begin = token.data();
  const char* end = begin + token.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

template <typename Scalar>
void save_checkpoint(std::ostream& os, const MlpModel<Scalar>& model) {
  os << "mlp";
  for (auto d : model.layer_dims()) os << ' ' << d;
  os << '\n';
  auto emit = [&os](const auto& block) {
    for (Eigen::Index i = 0; i < block.size(); ++i) os << format_real(static_cast<double>(block.data()[i])) << '\n';
  };
  for (std::size_t k = 0; k < model.num_layers(); ++k) {
    emit(model.weights[k]);
    emit(model.biases[k]);
  }
}

template <typename Scalar>
MlpModel<Scalar> load_checkpoint(std::istream& is) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line)) throw ParseError("empty checkpoint", line_no);
  std::istringstream header(line);
  std::string tag;
  header >> tag;
  if (tag != "mlp") throw ParseError("expected 'mlp' header", line_no);
  std::vector<Eigen::Index> dims;
  for (long long d; header >> d;) dims.push_back(static_cast<Eigen::Index>(d));
  if (!header.eof()) throw ParseError("malformed layer dimension", line_no);
  MlpModel<Scalar> model;
  try {
    model = make_zero_mlp<Scalar>(dims);
  } catch (const InvalidInput& e) {
    throw ParseError(e.what(), line_no);
  }
  auto fill = [&](auto& block) {
    for (Eigen::Index i = 0; i < block.size(); ++i) {
      ++line_no;
      if (!std::getline(is, line)) throw ParseError("checkpoint truncated", line_no);
      double v = 0;
      if (!parse_real(line, v) || !std::isfinite(v)) throw ParseError("bad parameter value '" + line + "'", line_no);
      block.data()[i] = static_cast<Scalar>(v);
    }
  };
  for (std::size_t k = 0; k < model.num_layers(); ++k) {
    fill(model.weights[k]);
    fill(model.biases[k]);
  }
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) throw ParseError("trailing data after parameters", line_no);
  }
  return model;
}

template <typename Scalar>
void save_checkpoint(const std::string& path, const MlpModel<Scalar>& model) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  save_checkpoint(os, model);
  if (!os) throw std::runtime_error("write failed: " + path);
}

template <typename Scalar>
MlpModel<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_checkpoint<Scalar>(is);
}

}  // namespace pseudosup
