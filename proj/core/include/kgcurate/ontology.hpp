#pragma once

// OBO ingestion and the immutable knowledge graph G = (V, T, L).

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kgc {

enum class SubOntology { Chemical, Role, SubatomicParticle, Unknown };

std::string_view to_string(SubOntology s);

struct Entity {
  std::string id;
  std::string name;
  SubOntology sub_ontology = SubOntology::Unknown;

  bool operator==(const Entity&) const = default;
};

struct Triple {
  std::string subject;
  std::string relation;
  std::string object;

  auto operator<=>(const Triple&) const = default;
  bool operator==(const Triple&) const = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept;
};

inline constexpr std::string_view kIsA = "is a";
inline constexpr std::string_view kIsConjugateAcidOf = "is conjugate acid of";
inline constexpr std::string_view kIsTautomerOf = "is tautomer of";

/// Maps an OBO relation id (`has_role`) to its label (`has role`). Known ids
/// go through a fixed table; anything else has underscores replaced.
std::string normalize_relation(std::string_view raw);
/// Inverse of normalize_relation for serialization (`has role` -> `has_role`).
std::string relation_id(std::string_view label);
bool is_known_relation(std::string_view label);

/// Root ids used to classify entities into sub-ontologies by is_a ancestry.
struct SubOntologyRoots {
  std::map<std::string, SubOntology> roots = {
      {"CHEBI:24431", SubOntology::Chemical},
      {"CHEBI:50906", SubOntology::Role},
      {"CHEBI:36342", SubOntology::SubatomicParticle},
  };
};

struct OntologyStats {
  std::size_t entity_count = 0;
  std::size_t triple_count = 0;
  std::map<std::string, std::size_t> per_relation;
  std::map<SubOntology, std::size_t> per_sub_ontology;
};

class KnowledgeGraph {
 public:
  using Index = std::uint32_t;
  using RelIndex = std::uint32_t;

  struct Edge {
    Index subject;
    RelIndex relation;
    Index object;
  };

  KnowledgeGraph() = default;

  /// Validates and canonicalizes: entities sorted by id, triples sorted and
  /// de-duplicated. Triples whose endpoints do not resolve are dropped and
  /// reported through `warnings` when given. Entity sub-ontologies are
  /// recomputed from is_a ancestry unless `roots` is empty.
  static KnowledgeGraph build(std::vector<Entity> entities, std::vector<Triple> triples,
                              std::vector<std::string>* warnings = nullptr,
                              const SubOntologyRoots& roots = {});

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t triple_count() const { return triples_.size(); }

  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Triple>& triples() const { return triples_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::string>& relations() const { return relation_labels_; }

  const Entity& entity(std::string_view id) const;
  const Entity& entity_at(Index i) const { return entities_[i]; }
  const Entity* find(std::string_view id) const;
  std::optional<Index> index_of(std::string_view id) const;
  std::optional<RelIndex> relation_index(std::string_view label) const;
  const std::string& relation_label(RelIndex r) const { return relation_labels_[r]; }

  bool contains(const Triple& t) const;
  bool contains(Index s, RelIndex r, Index o) const;

  /// Objects of is_a triples whose subject is `id`, sorted. Throws Lookup.
  std::vector<std::string> parents(std::string_view id) const;
  /// Every x != id sharing at least one is_a parent with id, sorted. Throws Lookup.
  std::vector<std::string> siblings(std::string_view id) const;

  const std::vector<Index>& parent_indices(Index i) const { return parents_[i]; }
  const std::vector<Index>& child_indices(Index i) const { return children_[i]; }
  std::vector<Index> sibling_indices(Index i) const;

  Triple to_triple(const Edge& e) const;

  bool operator==(const KnowledgeGraph& other) const {
    return entities_ == other.entities_ && triples_ == other.triples_;
  }

 private:
  static std::uint64_t pack(Index s, RelIndex r, Index o) {
    return (static_cast<std::uint64_t>(s) << 36) | (static_cast<std::uint64_t>(r) << 28) | o;
  }
  Index require(std::string_view id) const;

  std::vector<Entity> entities_;
  std::unordered_map<std::string, Index> index_;
  std::vector<std::string> relation_labels_;
  std::vector<Triple> triples_;
  std::vector<Edge> edges_;
  std::unordered_set<std::uint64_t> edge_keys_;
  std::vector<std::vector<Index>> parents_;
  std::vector<std::vector<Index>> children_;
};

struct OboParseResult {
  KnowledgeGraph graph;
  std::vector<std::string> warnings;
  std::size_t obsolete_terms = 0;
};

/// Parses a flat OBO document. Throws ParseError for a [Term] stanza without
/// an id, or a live term without a name.
OboParseResult parse_obo(std::istream& in, const SubOntologyRoots& roots = {});
OboParseResult parse_obo_file(const std::string& path, const SubOntologyRoots& roots = {});

/// Writes the graph back out as OBO (one [Term] per entity).
void write_obo(const KnowledgeGraph& kg, std::ostream& out);

/// Copy of `kg` without triples of `relation`; entities are kept.
KnowledgeGraph remove_relation(const KnowledgeGraph& kg, std::string_view relation);

OntologyStats graph_stats(const KnowledgeGraph& kg);

}  // namespace kgc
