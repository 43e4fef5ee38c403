#include "kgcurate/synthetic.hpp"

#include <array>
#include <cmath>
#include <set>
#include <sstream>
#include <string_view>
#include <vector>

#include "kgcurate/common.hpp"

namespace kgc {

namespace {

constexpr std::array<std::string_view, 28> kStems = {
    "androsta", "pregna",  "benzo",    "pyran",     "furan",    "indol",     "quinolin",
    "naphthal", "purin",   "pyrimidin", "cholest",  "estra",    "glucopyran", "galactopyran",
    "oxan",     "thiophen", "imidazol", "piperidin", "morpholin", "azepin",   "flavon",
    "coumarin", "xanthen", "pteridin", "chromen",   "pyrrol",   "azulen",    "carbazol"};

constexpr std::array<std::string_view, 20> kSubstituents = {
    "methyl", "hydroxy",  "hydroxymethyl", "amino",  "oxo",    "methoxy",   "acetamido",
    "phenyl", "chloro",   "fluoro",        "ethyl",  "carboxy", "nitro",    "sulfo",
    "dihydroxy", "trihydroxy", "acetyl",   "benzyl", "propyl", "hydroxypropan"};

constexpr std::array<std::string_view, 13> kSuffixes = {
    "diene-3,17-dione", "ol",   "one",       "oic acid", "amide", "ate",   "yl phosphate",
    "trien",            "dione", "carboxylic acid", "amine", "acid", "yl acetate"};

constexpr std::array<std::string_view, 12> kClassHeads = {
    "compound", "derivative", "acid", "ester", "alcohol", "amide",
    "steroid",  "alkaloid",   "ether", "lactam", "glycoside", "peptide"};

constexpr std::array<std::string_view, 10> kRoleHeads = {
    "inhibitor", "agonist", "antagonist", "metabolite", "agent",
    "modulator", "donor",   "acceptor",   "drug",       "toxin"};

constexpr std::array<std::string_view, 10> kRoleStems = {
    "EC 3.4.21", "plant", "human", "antibacterial", "androgen",
    "estrogen",  "Escherichia coli", "fungal", "radical", "cyclooxygenase"};

constexpr std::array<std::string_view, 4> kParticles = {"electron", "proton", "neutron", "photon"};

template <typename Arr>
std::string_view pick(Rng& rng, const Arr& arr) {
  return arr[rng.below(arr.size())];
}

// Skewed toward low indices so a few targets are popular, as in real ontologies.
std::size_t skewed(Rng& rng, std::size_t n) {
  const double u = rng.uniform01();
  return std::min(n - 1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * u * u)));
}

std::string locant(Rng& rng) { return std::to_string(1 + rng.below(12)); }

std::string stereo(Rng& rng) {
  const auto n = 1 + rng.below(3);
  std::string out = "(";
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i) out += ',';
    out += locant(rng);
    out += rng.below(2) ? 'R' : 'S';
  }
  return out + ")-";
}

std::string chemical_name(Rng& rng) {
  std::string name;
  if (rng.uniform01() < 0.4) name += stereo(rng);
  const auto subs = rng.below(3);
  for (std::uint64_t i = 0; i < subs; ++i) {
    name += locant(rng);
    name += '-';
    name += pick(rng, kSubstituents);
    name += '-';
  }
  name += pick(rng, kStems);
  if (rng.uniform01() < 0.3) name += "-" + locant(rng) + "," + locant(rng) + "(" + locant(rng) + ")";
  name += '-';
  name += pick(rng, kSuffixes);
  if (rng.uniform01() < 0.2) name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
  return name;
}

struct Term {
  std::string id;
  std::string name;
  std::vector<std::string> is_a;
  std::vector<std::pair<std::string, std::string>> rels;  // (relation id, target)
  bool obsolete = false;
};

}  // namespace

std::string synthetic_obo(const SyntheticOptions& options) {
  Rng rng(mix_seed(options.seed, "synthetic_obo"));
  std::vector<Term> terms;
  std::size_t next_id = 100000;
  const auto new_id = [&] { return "CHEBI:" + std::to_string(next_id++); };

  terms.push_back({"CHEBI:24431", "chemical entity", {}, {}, false});
  terms.push_back({"CHEBI:50906", "role", {}, {}, false});
  terms.push_back({"CHEBI:36342", "subatomic particle", {}, {}, false});
  terms.push_back({"CHEBI:23367", "molecular entity", {"CHEBI:24431"}, {}, false});

  for (auto particle : kParticles) terms.push_back({new_id(), std::string(particle), {"CHEBI:36342"}, {}, false});

  // Role hierarchy: three branches then leaves.
  std::vector<std::string> role_branches;
  for (auto name : {"biological role", "application", "chemical role"}) {
    terms.push_back({new_id(), name, {"CHEBI:50906"}, {}, false});
    role_branches.push_back(terms.back().id);
  }
  std::vector<std::string> roles;
  std::set<std::string> used_names;
  for (std::size_t i = 0; i < options.roles; ++i) {
    std::string name;
    do {
      name = std::string(pick(rng, kRoleStems)) + " " + std::string(pick(rng, kRoleHeads));
    } while (!used_names.insert(name).second && used_names.size() < kRoleStems.size() * kRoleHeads.size());
    terms.push_back({new_id(), name, {role_branches[rng.below(role_branches.size())]}, {}, false});
    roles.push_back(terms.back().id);
  }

  // Chemical class tree under "molecular entity".
  std::vector<std::string> classes;
  for (std::size_t i = 0; i < options.classes; ++i) {
    std::string name;
    const auto style = rng.below(3);
    if (style == 0) name = std::string(pick(rng, kStems)) + "ic " + std::string(pick(rng, kClassHeads));
    else if (style == 1) name = std::string(pick(rng, kSubstituents)) + " " + std::string(pick(rng, kClassHeads));
    else name = "organic " + std::string(pick(rng, kStems)) + " " + std::string(pick(rng, kClassHeads));
    const std::string parent = classes.empty() || rng.uniform01() < 0.2 ? "CHEBI:23367" : classes[skewed(rng, classes.size())];
    terms.push_back({new_id(), name, {parent}, {}, false});
    classes.push_back(terms.back().id);
  }
  if (classes.empty()) classes.push_back("CHEBI:23367");
  if (roles.empty()) roles.push_back(role_branches.front());

  std::vector<std::size_t> chem_terms;
  const auto add_chemical = [&](std::string name) {
    terms.push_back({new_id(), std::move(name), {}, {}, false});
    chem_terms.push_back(terms.size() - 1);
    return terms.size() - 1;
  };

  for (std::size_t i = 0; i < options.chemicals; ++i) {
    const auto idx = add_chemical(chemical_name(rng));
    auto& t = terms[idx];
    t.is_a.push_back(classes[skewed(rng, classes.size())]);
    if (rng.uniform01() < 0.3) {
      const auto& extra = classes[skewed(rng, classes.size())];
      if (extra != t.is_a.front()) t.is_a.push_back(extra);
    }
    const double u = rng.uniform01();
    const std::size_t n_roles = u < 0.4 ? 0 : (u < 0.8 ? 1 : 2);
    for (std::size_t r = 0; r < n_roles; ++r) t.rels.emplace_back("has_role", roles[skewed(rng, roles.size())]);
  }

  // Links between chemicals, drawn after all chemicals exist.
  const std::size_t base_chemicals = chem_terms.size();
  for (std::size_t k = 0; k < base_chemicals; ++k) {
    const auto idx = chem_terms[k];
    const auto other = [&] { return terms[chem_terms[rng.below(base_chemicals)]].id; };
    if (base_chemicals < 2) break;
    if (rng.uniform01() < 0.15) terms[idx].rels.emplace_back("has_functional_parent", other());
    if (rng.uniform01() < 0.05) terms[idx].rels.emplace_back("has_part", other());
    if (rng.uniform01() < 0.04) terms[idx].rels.emplace_back("has_parent_hydride", other());
    if (rng.uniform01() < 0.02) terms[idx].rels.emplace_back("is_substituent_group_from", other());
    if (rng.uniform01() < 0.03) terms[idx].rels.emplace_back("is_enantiomer_of", other());
    if (rng.uniform01() < 0.03) {
      // Symmetric: stored in both directions.
      const auto j = chem_terms[rng.below(base_chemicals)];
      if (j != idx) {
        terms[idx].rels.emplace_back("is_tautomer_of", terms[j].id);
        terms[j].rels.emplace_back("is_tautomer_of", terms[idx].id);
      }
    }
    if (rng.uniform01() < 0.12) {
      const auto acid = idx;
      const auto base = add_chemical(terms[acid].name + "(1-)");
      terms[base].is_a.push_back(classes[skewed(rng, classes.size())]);
      terms[base].rels.emplace_back("is_conjugate_base_of", terms[acid].id);
      if (options.conjugate_pairs) terms[acid].rels.emplace_back("is_conjugate_acid_of", terms[base].id);
    }
  }

  for (std::size_t i = 0; i < options.obsolete_terms; ++i) {
    terms.push_back({new_id(), "obsolete " + chemical_name(rng), {classes.front()}, {}, true});
    if (!chem_terms.empty()) {
      // A live term pointing at the obsolete one; ingestion drops the link.
      terms[chem_terms[rng.below(chem_terms.size())]].rels.emplace_back("has_part", terms.back().id);
    }
  }

  std::ostringstream out;
  out << "format-version: 1.2\nontology: synthetic\n";
  for (const auto& t : terms) {
    out << "\n[Term]\nid: " << t.id << "\nname: " << t.name << '\n';
    for (const auto& p : t.is_a) out << "is_a: " << p << " ! parent\n";
    for (const auto& [rel, target] : t.rels) out << "relationship: " << rel << ' ' << target << '\n';
    if (t.obsolete) out << "is_obsolete: true\n";
  }
  out << "\n[Typedef]\nid: has_role\nname: has role\n";
  return out.str();
}

KnowledgeGraph synthetic_ontology(const SyntheticOptions& options) {
  std::istringstream in(synthetic_obo(options));
  return parse_obo(in).graph;
}

}  // namespace kgc
