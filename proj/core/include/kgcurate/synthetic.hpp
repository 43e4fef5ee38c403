#pragma once

// ChEBI-shaped synthetic ontologies for tests, benchmarks and desk-scale runs.

#include <cstdint>
#include <string>

#include "kgcurate/ontology.hpp"

namespace kgc {

struct SyntheticOptions {
  std::size_t chemicals = 150;
  std::size_t classes = 30;
  std::size_t roles = 15;
  std::size_t obsolete_terms = 2;
  /// Emit both directions for conjugate acid/base pairs, as ChEBI does.
  bool conjugate_pairs = true;
  std::uint64_t seed = 1;
};

/// OBO text with ChEBI's three sub-ontology roots, a class hierarchy, role
/// terms and compositional chemical names. Includes obsolete terms and
/// `is_conjugate_acid_of` links so ingestion has something to remove.
std::string synthetic_obo(const SyntheticOptions& options);

/// parse_obo(synthetic_obo(options)).graph
KnowledgeGraph synthetic_ontology(const SyntheticOptions& options);

}  // namespace kgc
