#pragma once

// Planted-concept fixtures: the construction is its own oracle.

#include <cstdint>
#include <string>
#include <vector>

#include "conceptlens/types.hpp"

namespace conceptlens::testing {

struct Planted {
  Matrix atoms;  // B x K, unit norm, pairwise |cos| < max_coherence
  Matrix codes;  // K x M, sparse, non-negative
  Matrix reps;   // atoms * codes + noise
};

// Random unit atoms with pairwise |cos| below `max_coherence`.
Matrix planted_atoms(int k, int dim, double max_coherence, std::uint64_t seed);

// Each sample activates one or two atoms with magnitudes in [1, 3].
Planted make_planted(int k, int dim, int m, double noise, std::uint64_t seed, double max_coherence = 0.3);

// Five English words per concept, disjoint across concepts (up to 8 concepts).
const std::vector<std::vector<std::string>>& concept_words();

struct PlantedBundle {
  Planted planted;
  RepresentationBundle bundle;
};

// Bundle around a planted factorization with an unembedding where each atom
// decodes to its five words followed by ten tokens the word filter rejects.
// Captions literally contain the words of each sample's active concepts.
PlantedBundle make_planted_bundle(int k, int dim, int m, double noise, std::uint64_t seed);

// Samples [begin, end) of a bundle as a bundle of their own (id cleared).
RepresentationBundle slice_bundle(const RepresentationBundle& b, int begin, int end);

// Gives every sample rows*cols visual tokens: scaled copies of its
// representation plus small seeded noise.
void attach_visual_tokens(RepresentationBundle& b, Grid grid, std::uint64_t seed);

// Word-count vector over the planted vocabulary, plus a constant coordinate
// so that no text maps to zero. Stands in for a text/image encoder.
Vector bag_of_words(const std::string& text);

// Absolute cosine similarity after greedy one-to-one matching of learned to
// true atoms; returns matched true index per learned atom.
std::vector<int> greedy_match(const Matrix& learned, const Matrix& truth, std::vector<double>* abs_cos = nullptr);

double pearson(const Vector& a, const Vector& b);

}  // namespace conceptlens::testing
