#include "kgcurate/ontology.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <utility>

#include "kgcurate/common.hpp"

namespace kgc {

namespace {

// OBO relation id -> label. Covers ChEBI's nine retained relations plus the
// removed inverse relation.
constexpr std::array<std::pair<std::string_view, std::string_view>, 10> kRelationTable = {{
    {"is_a", "is a"},
    {"has_part", "has part"},
    {"is_conjugate_base_of", "is conjugate base of"},
    {"is_conjugate_acid_of", "is conjugate acid of"},
    {"is_tautomer_of", "is tautomer of"},
    {"is_enantiomer_of", "is enantiomer of"},
    {"has_functional_parent", "has functional parent"},
    {"has_parent_hydride", "has parent hydride"},
    {"is_substituent_group_from", "is substituent group from"},
    {"has_role", "has role"},
}};

// Drops a trailing `! comment` and any `{qualifier}` block from a tag value.
std::string_view strip_value(std::string_view value) {
  if (const auto bang = value.find(" !"); bang != std::string_view::npos) value = value.substr(0, bang);
  if (!value.empty() && value.front() == '!') value = {};
  if (const auto brace = value.find('{'); brace != std::string_view::npos) value = value.substr(0, brace);
  return trim(value);
}

struct RawTerm {
  std::size_t line = 0;
  std::string id;
  std::string name;
  bool obsolete = false;
  std::vector<std::pair<std::string, std::string>> links;  // (relation label, target id)
};

}  // namespace

std::string_view to_string(SubOntology s) {
  switch (s) {
    case SubOntology::Chemical: return "chemical";
    case SubOntology::Role: return "role";
    case SubOntology::SubatomicParticle: return "subatomic_particle";
    case SubOntology::Unknown: return "unknown";
  }
  return "unknown";
}

std::size_t TripleHash::operator()(const Triple& t) const noexcept {
  auto h = fnv1a64(t.subject);
  h = fnv1a64("\t", h);
  h = fnv1a64(t.relation, h);
  h = fnv1a64("\t", h);
  return static_cast<std::size_t>(fnv1a64(t.object, h));
}

std::string normalize_relation(std::string_view raw) {
  for (const auto& [id, label] : kRelationTable) {
    if (raw == id || raw == label) return std::string(label);
  }
  std::string out(raw);
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

std::string relation_id(std::string_view label) {
  for (const auto& [id, known] : kRelationTable) {
    if (label == known || label == id) return std::string(id);
  }
  std::string out(label);
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

bool is_known_relation(std::string_view label) {
  return std::any_of(kRelationTable.begin(), kRelationTable.end(),
                     [&](const auto& p) { return p.second == label; });
}

KnowledgeGraph KnowledgeGraph::build(std::vector<Entity> entities, std::vector<Triple> triples,
                                     std::vector<std::string>* warnings,
                                     const SubOntologyRoots& roots) {
  KnowledgeGraph kg;
  std::sort(entities.begin(), entities.end(),
            [](const Entity& a, const Entity& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (entities[i].id.empty()) throw Error(ErrorKind::InvalidArgument, "entity with empty id");
    if (entities[i].name.empty())
      throw Error(ErrorKind::InvalidArgument, "entity " + entities[i].id + " has an empty name");
    if (i > 0 && entities[i].id == entities[i - 1].id)
      throw Error(ErrorKind::InvalidArgument, "duplicate entity id " + entities[i].id);
  }
  if (entities.size() >= (std::size_t{1} << 28))
    throw Error(ErrorKind::InvalidArgument, "too many entities");
  kg.entities_ = std::move(entities);
  kg.index_.reserve(kg.entities_.size());
  for (std::size_t i = 0; i < kg.entities_.size(); ++i)
    kg.index_.emplace(kg.entities_[i].id, static_cast<Index>(i));

  std::vector<Triple> kept;
  kept.reserve(triples.size());
  for (auto& t : triples) {
    if (!kg.index_.contains(t.subject) || !kg.index_.contains(t.object)) {
      if (warnings) {
        warnings->push_back("dangling reference dropped: (" + t.subject + ", " + t.relation +
                            ", " + t.object + ")");
      }
      continue;
    }
    kept.push_back(std::move(t));
  }
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());

  std::set<std::string> labels;
  for (const auto& t : kept) labels.insert(t.relation);
  if (labels.size() >= 256) throw Error(ErrorKind::InvalidArgument, "too many relation labels");
  kg.relation_labels_.assign(labels.begin(), labels.end());

  kg.triples_ = std::move(kept);
  kg.edges_.reserve(kg.triples_.size());
  kg.edge_keys_.reserve(kg.triples_.size() * 2);
  kg.parents_.assign(kg.entities_.size(), {});
  kg.children_.assign(kg.entities_.size(), {});
  const auto is_a = kg.relation_index(kIsA);
  for (const auto& t : kg.triples_) {
    const Edge e{kg.index_.at(t.subject), *kg.relation_index(t.relation), kg.index_.at(t.object)};
    kg.edges_.push_back(e);
    kg.edge_keys_.insert(pack(e.subject, e.relation, e.object));
    if (is_a && e.relation == *is_a) {
      kg.parents_[e.subject].push_back(e.object);
      kg.children_[e.object].push_back(e.subject);
    }
  }
  for (auto& v : kg.parents_) std::sort(v.begin(), v.end());
  for (auto& v : kg.children_) std::sort(v.begin(), v.end());

  // Sub-ontology: nearest root reached by breadth-first is_a ancestry. With
  // no roots configured the caller's labels are kept.
  if (roots.roots.empty()) return kg;
  std::unordered_map<Index, SubOntology> root_index;
  for (const auto& [id, kind] : roots.roots) {
    if (auto it = kg.index_.find(id); it != kg.index_.end()) root_index.emplace(it->second, kind);
  }
  std::vector<char> seen(kg.entities_.size(), 0);
  std::vector<Index> touched;
  for (Index i = 0; i < kg.entities_.size(); ++i) {
    SubOntology found = SubOntology::Unknown;
    std::deque<Index> queue{i};
    touched.clear();
    seen[i] = 1;
    touched.push_back(i);
    while (!queue.empty()) {
      const Index cur = queue.front();
      queue.pop_front();
      if (auto it = root_index.find(cur); it != root_index.end()) {
        found = it->second;
        break;
      }
      for (Index p : kg.parents_[cur]) {
        if (!seen[p]) {
          seen[p] = 1;
          touched.push_back(p);
          queue.push_back(p);
        }
      }
    }
    for (Index t : touched) seen[t] = 0;
    kg.entities_[i].sub_ontology = found;
  }
  return kg;
}

const Entity& KnowledgeGraph::entity(std::string_view id) const { return entities_[require(id)]; }

const Entity* KnowledgeGraph::find(std::string_view id) const {
  const auto idx = index_of(id);
  return idx ? &entities_[*idx] : nullptr;
}

std::optional<KnowledgeGraph::Index> KnowledgeGraph::index_of(std::string_view id) const {
  if (auto it = index_.find(std::string(id)); it != index_.end()) return it->second;
  return std::nullopt;
}

std::optional<KnowledgeGraph::RelIndex> KnowledgeGraph::relation_index(std::string_view label) const {
  const auto it = std::lower_bound(relation_labels_.begin(), relation_labels_.end(), label);
  if (it == relation_labels_.end() || *it != label) return std::nullopt;
  return static_cast<RelIndex>(it - relation_labels_.begin());
}

KnowledgeGraph::Index KnowledgeGraph::require(std::string_view id) const {
  const auto idx = index_of(id);
  if (!idx) throw Error(ErrorKind::Lookup, "unknown entity id " + std::string(id));
  return *idx;
}

bool KnowledgeGraph::contains(const Triple& t) const {
  const auto s = index_of(t.subject);
  const auto o = index_of(t.object);
  const auto r = relation_index(t.relation);
  return s && o && r && contains(*s, *r, *o);
}

bool KnowledgeGraph::contains(Index s, RelIndex r, Index o) const {
  return edge_keys_.contains(pack(s, r, o));
}

std::vector<std::string> KnowledgeGraph::parents(std::string_view id) const {
  std::vector<std::string> out;
  for (Index p : parents_[require(id)]) out.push_back(entities_[p].id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<KnowledgeGraph::Index> KnowledgeGraph::sibling_indices(Index i) const {
  std::vector<Index> out;
  for (Index p : parents_[i]) {
    for (Index c : children_[p]) {
      if (c != i) out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> KnowledgeGraph::siblings(std::string_view id) const {
  std::vector<std::string> out;
  for (Index s : sibling_indices(require(id))) out.push_back(entities_[s].id);
  std::sort(out.begin(), out.end());
  return out;
}

Triple KnowledgeGraph::to_triple(const Edge& e) const {
  return {entities_[e.subject].id, relation_labels_[e.relation], entities_[e.object].id};
}

OboParseResult parse_obo(std::istream& in, const SubOntologyRoots& roots) {
  OboParseResult result;
  std::vector<RawTerm> terms;
  std::optional<RawTerm> current;
  bool in_term = false;
  std::set<std::string> unknown_relations;

  const auto finish = [&]() {
    if (!current) return;
    if (current->id.empty()) throw ParseError(current->line, "[Term] stanza without id");
    if (current->name.empty() && !current->obsolete)
      throw ParseError(current->line, "term " + current->id + " has no name");
    terms.push_back(std::move(*current));
    current.reset();
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '!') continue;
    if (text.front() == '[') {
      finish();
      in_term = text == "[Term]";
      if (in_term) {
        current.emplace();
        current->line = line_no;
      }
      continue;
    }
    if (!in_term) continue;
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) continue;
    const auto tag = trim(text.substr(0, colon));
    const auto value = trim(text.substr(colon + 1));
    if (tag == "id") {
      current->id = std::string(strip_value(value));
    } else if (tag == "name") {
      current->name = std::string(value);
    } else if (tag == "is_obsolete") {
      current->obsolete = strip_value(value) == "true";
    } else if (tag == "is_a") {
      const auto target = strip_value(value);
      if (target.empty()) throw ParseError(line_no, "is_a without target");
      current->links.emplace_back(std::string(kIsA), std::string(target));
    } else if (tag == "relationship") {
      const auto body = strip_value(value);
      const auto space = body.find(' ');
      if (space == std::string_view::npos) throw ParseError(line_no, "relationship without target");
      const auto rel = trim(body.substr(0, space));
      const auto target = trim(body.substr(space + 1));
      auto label = normalize_relation(rel);
      if (!is_known_relation(label)) unknown_relations.insert(std::string(rel));
      current->links.emplace_back(std::move(label), std::string(target));
    }
  }
  finish();

  for (const auto& rel : unknown_relations)
    result.warnings.push_back("relation id not in the fixed table: " + rel);

  std::unordered_set<std::string> obsolete;
  std::vector<Entity> entities;
  std::vector<Triple> triples;
  for (const auto& t : terms) {
    if (t.obsolete) {
      obsolete.insert(t.id);
      ++result.obsolete_terms;
      continue;
    }
    entities.push_back({t.id, t.name, SubOntology::Unknown});
  }
  for (auto& t : terms) {
    if (t.obsolete) continue;
    for (auto& [rel, target] : t.links) {
      // Links into obsolete terms go away with the term.
      if (obsolete.contains(target)) continue;
      triples.push_back({t.id, std::move(rel), std::move(target)});
    }
  }
  result.graph = KnowledgeGraph::build(std::move(entities), std::move(triples), &result.warnings, roots);
  return result;
}

OboParseResult parse_obo_file(const std::string& path, const SubOntologyRoots& roots) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open ontology " + path);
  return parse_obo(in, roots);
}

void write_obo(const KnowledgeGraph& kg, std::ostream& out) {
  out << "format-version: 1.2\n";
  std::vector<std::vector<std::size_t>> by_subject(kg.entity_count());
  for (std::size_t i = 0; i < kg.edges().size(); ++i) by_subject[kg.edges()[i].subject].push_back(i);
  for (KnowledgeGraph::Index i = 0; i < kg.entity_count(); ++i) {
    const auto& e = kg.entity_at(i);
    out << "\n[Term]\nid: " << e.id << "\nname: " << e.name << '\n';
    for (auto idx : by_subject[i]) {
      const auto& t = kg.triples()[idx];
      if (t.relation == kIsA) out << "is_a: " << t.object << '\n';
    }
    for (auto idx : by_subject[i]) {
      const auto& t = kg.triples()[idx];
      if (t.relation != kIsA) out << "relationship: " << relation_id(t.relation) << ' ' << t.object << '\n';
    }
  }
}

KnowledgeGraph remove_relation(const KnowledgeGraph& kg, std::string_view relation) {
  std::vector<Triple> kept;
  kept.reserve(kg.triple_count());
  for (const auto& t : kg.triples()) {
    if (t.relation != relation) kept.push_back(t);
  }
  if (kept.size() == kg.triple_count()) return kg;
  // Sub-ontology labels are kept as computed on the source graph.
  SubOntologyRoots keep;
  keep.roots.clear();
  return KnowledgeGraph::build(kg.entities(), std::move(kept), nullptr, keep);
}

OntologyStats graph_stats(const KnowledgeGraph& kg) {
  OntologyStats stats;
  stats.entity_count = kg.entity_count();
  stats.triple_count = kg.triple_count();
  for (const auto& t : kg.triples()) ++stats.per_relation[t.relation];
  for (const auto& e : kg.entities()) ++stats.per_sub_ontology[e.sub_ontology];
  return stats;
}

}  // namespace kgc
