#include "pseudosup/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "pseudosup/checkpoint.hpp"

namespace pseudosup {

namespace {

constexpr const char* kMagic = "gdp-synth v1";

void write_rows(std::ostream& os, const char* tag, const std::vector<Sample>& rows, bool hidden) {
  for (const auto& s : rows) {
    os << tag << ' ' << s.id << ' ';
    const auto& label = hidden ? s.hidden_label : s.label;
    if (label) {
      os << *label;
    } else {
      os << '?';
    }
    for (Eigen::Index j = 0; j < s.features.size(); ++j) os << ' ' << format_real(s.features[j]);
    os << '\n';
  }
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

bool parse_int(const std::string& s, long long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

void save_dataset(std::ostream& os, const DatasetSplits& splits) {
  Eigen::Index n_features = -1;
  std::optional<GridDims> grid;
  bool first = true;
  for (const auto* part : {&splits.labeled_train, &splits.unlabeled_train, &splits.validation, &splits.test}) {
    for (const auto& s : *part) {
      if (first) {
        n_features = s.features.size();
        grid = s.grid;
        first = false;
      } else if (s.features.size() != n_features || s.grid != grid) {
        throw InvalidInput("all samples in a dataset file must share feature length and grid");
      }
    }
  }
  os << kMagic << '\n';
  os << "n_features " << (n_features < 0 ? 0 : n_features) << '\n';
  if (grid) os << "grid " << grid->height << ' ' << grid->width << '\n';
  write_rows(os, "trainL", splits.labeled_train, false);
  write_rows(os, "trainU", splits.unlabeled_train, true);
  write_rows(os, "val", splits.validation, false);
  write_rows(os, "test", splits.test, false);
}

DatasetSplits load_dataset(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  };

  if (!next_line() || line != kMagic) throw ParseError("expected header '" + std::string(kMagic) + "'", line_no);
  if (!next_line()) throw ParseError("missing n_features line", line_no);
  auto toks = tokenize(line);
  long long n_features = 0;
  if (toks.size() != 2 || toks[0] != "n_features" || !parse_int(toks[1], n_features) || n_features < 0)
    throw ParseError("expected 'n_features <n>'", line_no);

  std::optional<GridDims> grid;
  DatasetSplits splits;
  std::set<std::string> ids;
  bool have_row = next_line();
  if (have_row) {
    toks = tokenize(line);
    if (!toks.empty() && toks[0] == "grid") {
      long long h = 0, w = 0;
      if (toks.size() != 3 || !parse_int(toks[1], h) || !parse_int(toks[2], w) || h < 1 || w < 1)
        throw ParseError("expected 'grid <h> <w>'", line_no);
      if (h * w > n_features) throw ParseError("grid larger than n_features", line_no);
      grid = GridDims{h, w};
      have_row = next_line();
    }
  }

  for (; have_row; have_row = next_line()) {
    toks = tokenize(line);
    if (toks.size() != static_cast<std::size_t>(3 + n_features))
      throw ParseError("expected " + std::to_string(3 + n_features) + " fields, found " +
                           std::to_string(toks.size()),
                       line_no);
    const std::string& tag = toks[0];
    std::vector<Sample>* target = nullptr;
    if (tag == "trainL") target = &splits.labeled_train;
    else if (tag == "trainU") target = &splits.unlabeled_train;
    else if (tag == "val") target = &splits.validation;
    else if (tag == "test") target = &splits.test;
    else throw ParseError("unknown split tag '" + tag + "'", line_no);

    Sample s;
    s.id = toks[1];
    if (!ids.insert(s.id).second) throw ParseError("duplicate id '" + s.id + "'", line_no);
    s.grid = grid;
    if (toks[2] != "?") {
      long long y = 0;
      if (!parse_int(toks[2], y) || y < 0) throw ParseError("bad label '" + toks[2] + "'", line_no);
      if (tag == "trainU") s.hidden_label = static_cast<int>(y);
      else s.label = static_cast<int>(y);
    } else if (tag != "trainU") {
      throw ParseError("split '" + tag + "' requires a label", line_no);
    }
    s.features.resize(n_features);
    for (long long j = 0; j < n_features; ++j) {
      const auto& tok = toks[static_cast<std::size_t>(3 + j)];
      double v = 0;
      if (!parse_real(tok, v) || !std::isfinite(v))
        throw ParseError("non-numeric feature '" + tok + "'", line_no);
      s.features[j] = v;
    }
    target->push_back(std::move(s));
  }
  return splits;
}

void save_dataset(const std::string& path, const DatasetSplits& splits) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  save_dataset(os, splits);
  if (!os) throw std::runtime_error("write failed: " + path);
}

DatasetSplits load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_dataset(is);
}

std::string serialize_dataset(const DatasetSplits& splits) {
  std::ostringstream os;
  save_dataset(os, splits);
  return os.str();
}

std::uint64_t split_hash(const DatasetSplits& splits) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : serialize_dataset(splits)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace pseudosup
