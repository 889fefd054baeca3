#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxtag/rng.hpp"
#include "ctxtag/tensor.hpp"
#include "ctxtag/text.hpp"

namespace ctxtag {

/// Pretrained word vectors, restricted to the words a vocabulary knows.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
};

// Reads "word f1 f2 ... fd" lines (GloVe text format). Every line must carry
// the same number of floats as the first one.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocab& vocab);

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table, const Vocab& vocab);

// V x dim frozen matrix; words missing from the table and the PAD row are zero.
Tensor pretrained_matrix(const EmbeddingTable& table, const Vocab& vocab);

// Stand-in table of N(0, 0.5^2) vectors for every non-PAD word, for runs
// without a pretrained file.
EmbeddingTable random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed);

}  // namespace ctxtag
