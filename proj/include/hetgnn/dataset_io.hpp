#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetgnn/error.hpp"
#include "hetgnn/graph.hpp"
#include "hetgnn/splits.hpp"

namespace hetgnn {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Writes via a temporary sibling and renames into place.
inline void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

struct DatasetMeta {
  std::string name;
  std::size_t n_nodes = 0;
  std::size_t n_classes = 0;
  std::size_t d_f = 0;
  bool directed = false;
};

struct LoadedDataset {
  Graph graph;
  Graph::BuildReport report;
  std::vector<Split> splits;  // empty when the directory has no splits/
};

namespace detail {

template <typename T>
T parse_number(std::string_view tok, const fs::path& file, std::size_t line) {
  T v{};
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  if constexpr (std::is_floating_point_v<T>) {
    // std::from_chars for doubles is available in libstdc++ 11.
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) throw ParseError(file.string(), line, "bad number '" + std::string(tok) + "'");
  } else {
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) throw ParseError(file.string(), line, "bad integer '" + std::string(tok) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == '\t' || s[i] == ' ' || s[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != '\t' && s[i] != ' ' && s[i] != '\r') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

template <typename Fn>
void for_each_line(const fs::path& file, Fn&& fn) {
  const std::string text = read_file(file);
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line(text.data() + pos, end - pos);
    const auto toks = split_ws(line);
    if (!toks.empty()) fn(toks, line_no);
    pos = end + 1;
  }
}

inline std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace detail

inline DatasetMeta load_meta(const fs::path& dir) {
  const fs::path p = dir / "meta.json";
  const json j = read_json(p);
  DatasetMeta m;
  try {
    m.name = j.at("name").get<std::string>();
    m.n_nodes = j.at("n_nodes").get<std::size_t>();
    m.n_classes = j.at("n_classes").get<std::size_t>();
    m.d_f = j.at("d_f").get<std::size_t>();
    m.directed = j.at("directed").get<bool>();
  } catch (const json::exception& e) {
    throw ParseError(p.string(), 0, e.what());
  }
  return m;
}

/// Binary feature file: "GF32", rows (u64 LE), cols (u64 LE), row-major f32 LE.
inline Matrix read_features_f32(const fs::path& file) {
  const std::string raw = read_file(file);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < 20 || std::memcmp(raw.data(), "GF32", 4) != 0)
    throw ParseError(file.string(), 0, "missing GF32 header");
  const std::uint64_t rows = detail::read_u64_le(p + 4);
  const std::uint64_t cols = detail::read_u64_le(p + 12);
  if (raw.size() != 20 + rows * cols * 4)
    throw ParseError(file.string(), 0, "payload size does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  Matrix x(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    const unsigned char* q = p + 20 + 4 * i;
    const std::uint32_t bits = static_cast<std::uint32_t>(q[0]) | (static_cast<std::uint32_t>(q[1]) << 8) |
                               (static_cast<std::uint32_t>(q[2]) << 16) | (static_cast<std::uint32_t>(q[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    x.data()[i] = static_cast<double>(f);
  }
  return x;
}

inline std::string encode_features_f32(const Matrix& x) {
  std::string out = "GF32";
  detail::append_u64_le(out, x.rows());
  detail::append_u64_le(out, x.cols());
  out.reserve(out.size() + 4 * x.size());
  for (double v : x.data()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  return out;
}

inline Split split_from_json(const json& j, const fs::path& origin) {
  Split s;
  try {
    s.train = j.at("train").get<std::vector<std::size_t>>();
    s.valid = j.at("valid").get<std::vector<std::size_t>>();
    s.test = j.at("test").get<std::vector<std::size_t>>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError(origin.string(), 0, e.what());
  }
  return s;
}

inline json split_to_json(const Split& s) {
  return json{{"train", s.train}, {"valid", s.valid}, {"test", s.test}, {"seed", s.seed}};
}

inline std::vector<Split> load_splits(const fs::path& dir, std::size_t n_nodes) {
  std::vector<Split> out;
  const fs::path sd = dir / "splits";
  if (!fs::is_directory(sd)) return out;
  for (std::size_t k = 0;; ++k) {
    const fs::path p = sd / ("split_" + std::to_string(k) + ".json");
    if (!fs::exists(p)) break;
    Split s = split_from_json(read_json(p), p);
    try {
      s.validate(n_nodes);
    } catch (const Error& e) {
      throw ParseError(p.string(), 0, e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline void save_splits(const fs::path& dir, const std::vector<Split>& splits) {
  for (std::size_t k = 0; k < splits.size(); ++k)
    write_file_atomic(dir / "splits" / ("split_" + std::to_string(k) + ".json"), split_to_json(splits[k]).dump());
}

inline LoadedDataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ParseError(dir.string(), 0, "dataset directory not found");
  const DatasetMeta meta = load_meta(dir);

  std::vector<Edge> edges;
  const fs::path ep = dir / "edges.tsv";
  detail::for_each_line(ep, [&](const auto& toks, std::size_t line) {
    if (toks.size() != 2) throw ParseError(ep.string(), line, "expected 'u<TAB>v'");
    const auto u = detail::parse_number<std::size_t>(toks[0], ep, line);
    const auto v = detail::parse_number<std::size_t>(toks[1], ep, line);
    if (u >= meta.n_nodes || v >= meta.n_nodes)
      throw ParseError(ep.string(), line, "node id outside [0, " + std::to_string(meta.n_nodes) + ")");
    edges.emplace_back(u, v);
  });

  std::vector<int> labels;
  const fs::path lp = dir / "labels.tsv";
  detail::for_each_line(lp, [&](const auto& toks, std::size_t line) {
    if (toks.size() != 1) throw ParseError(lp.string(), line, "expected one integer label");
    const int y = detail::parse_number<int>(toks[0], lp, line);
    if (y != kUnlabeled && (y < 0 || static_cast<std::size_t>(y) >= meta.n_classes))
      throw RangeError(lp.string() + ":" + std::to_string(line) + ": label " + std::to_string(y) + " >= K=" +
                       std::to_string(meta.n_classes));
    labels.push_back(y);
  });
  if (labels.size() != meta.n_nodes)
    throw ShapeError(lp.string() + " has " + std::to_string(labels.size()) + " labels, meta says " +
                     std::to_string(meta.n_nodes) + " nodes");

  Matrix features;
  if (fs::exists(dir / "features.f32")) {
    features = read_features_f32(dir / "features.f32");
  } else {
    const fs::path fp = dir / "features.tsv";
    std::vector<double> vals;
    std::size_t rows = 0;
    detail::for_each_line(fp, [&](const auto& toks, std::size_t line) {
      if (toks.size() != meta.d_f)
        throw ShapeError(fp.string() + ":" + std::to_string(line) + ": " + std::to_string(toks.size()) +
                         " columns, meta says d_f=" + std::to_string(meta.d_f));
      for (auto t : toks) vals.push_back(detail::parse_number<double>(t, fp, line));
      ++rows;
    });
    features = Matrix(rows, meta.d_f, std::move(vals));
  }
  if (features.rows() != meta.n_nodes || features.cols() != meta.d_f)
    throw ShapeError("features " + features.shape_str() + " do not match meta (" + std::to_string(meta.n_nodes) +
                     "x" + std::to_string(meta.d_f) + ")");

  LoadedDataset ds;
  ds.graph = Graph::from_edges(meta.name, meta.n_nodes, edges, std::move(features), std::move(labels),
                               meta.n_classes, meta.directed, &ds.report);
  ds.splits = load_splits(dir, meta.n_nodes);
  return ds;
}

/// Writes a graph in the dataset directory format. Undirected edges are
/// written once with u < v.
inline void save_dataset(const fs::path& dir, const Graph& g, const std::vector<Split>& splits = {},
                         bool binary_features = false) {
  fs::create_directories(dir);
  const json meta{{"name", g.name()},
                  {"n_nodes", g.n_nodes()},
                  {"n_classes", g.n_classes()},
                  {"d_f", g.n_features()},
                  {"directed", g.directed()}};
  write_file_atomic(dir / "meta.json", meta.dump(2));

  std::string edges;
  for (const auto& [u, v] : g.edge_list()) edges += std::to_string(u) + "\t" + std::to_string(v) + "\n";
  write_file_atomic(dir / "edges.tsv", edges);

  std::string labels;
  for (int y : g.labels()) labels += std::to_string(y) + "\n";
  write_file_atomic(dir / "labels.tsv", labels);

  if (binary_features) {
    write_file_atomic(dir / "features.f32", encode_features_f32(g.features()));
  } else {
    std::ostringstream ss;
    ss.precision(17);
    for (std::size_t i = 0; i < g.n_nodes(); ++i) {
      const auto r = g.features().row(i);
      for (std::size_t j = 0; j < r.size(); ++j) ss << (j ? "\t" : "") << r[j];
      ss << "\n";
    }
    write_file_atomic(dir / "features.tsv", ss.str());
  }
  if (!splits.empty()) save_splits(dir, splits);
}

}  // namespace hetgnn
