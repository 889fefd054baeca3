#include "ctxtag/embeddings.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ctxtag/error.hpp"

namespace ctxtag {

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

double parse_double(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw DataError("embedding line " + std::to_string(line_no) + ": '" + std::string(field) +
                    "' is not a number");
  }
  return value;
}

}  // namespace

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read embeddings " + path.string());
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_spaces(line);
    if (fields.empty()) continue;
    const std::size_t dim = fields.size() - 1;
    if (table.dim == 0) {
      if (dim == 0) throw DataError("embedding line " + std::to_string(line_no) + ": no vector values");
      table.dim = dim;
    } else if (dim != table.dim) {
      throw DataError("embedding line " + std::to_string(line_no) + ": expected " + std::to_string(table.dim) +
                      " values, found " + std::to_string(dim));
    }
    const std::string word(fields[0]);
    std::vector<double> vec(dim);
    for (std::size_t i = 0; i < dim; ++i) vec[i] = parse_double(fields[i + 1], line_no);
    if (vocab.contains(word) && word != kPadToken) table.vectors.emplace(word, std::move(vec));
  }
  if (table.dim == 0) throw DataError("embedding file " + path.string() + " is empty");
  return table;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table, const Vocab& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embeddings " + path.string());
  char buf[32];
  for (const std::string& word : vocab.tokens()) {
    auto it = table.vectors.find(word);
    if (it == table.vectors.end()) continue;
    out << word;
    for (double v : it->second) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      out << buf;
    }
    out << '\n';
  }
}

Tensor pretrained_matrix(const EmbeddingTable& table, const Vocab& vocab) {
  if (table.dim == 0) throw DataError("embedding table has zero dimension");
  std::vector<double> values(vocab.size() * table.dim, 0.0);
  for (std::size_t id = 1; id < vocab.size(); ++id) {
    auto it = table.vectors.find(vocab.token(static_cast<TokenId>(id)));
    if (it != table.vectors.end()) std::copy(it->second.begin(), it->second.end(), values.begin() + id * table.dim);
  }
  return Tensor::matrix(vocab.size(), table.dim, std::move(values), false);
}

EmbeddingTable random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed) {
  EmbeddingTable table;
  table.dim = dim;
  Rng rng(seed);
  for (std::size_t id = 1; id < vocab.size(); ++id) {
    std::vector<double> vec(dim);
    for (double& v : vec) v = 0.5 * rng.normal();
    table.vectors.emplace(vocab.token(static_cast<TokenId>(id)), std::move(vec));
  }
  return table;
}

}  // namespace ctxtag
