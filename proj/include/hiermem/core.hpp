#pragma once
// Core data model: units, unit graphs, groupings, coarsening results and
// hierarchies, plus the structural operations shared by every other module.
//
// A hierarchy is level 0 (the atoms) plus a stack of coarsened unit graphs.
// Coarsening = a grouping over the previous level's nodes plus one
// representative unit per group. Hierarchies are immutable once built.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hiermem/errors.hpp"
#include "hiermem/parallel.hpp"
#include "hiermem/tokenize.hpp"

namespace hiermem {

// ---------------------------------------------------------------------------
// Unit

struct Unit {
    std::string id;
    std::string content;
    std::vector<double> embedding;         // empty = not embedded yet
    std::optional<std::int64_t> timestamp; // seconds
    std::set<std::string> entities;
    std::vector<std::string> path;
    std::size_t token_count = 0;

    // token_count is always recomputed from content on construction.
    static Unit make(std::string id, std::string content,
                     const Tokenizer& tok = default_tokenizer()) {
        Unit u;
        u.id = std::move(id);
        u.content = std::move(content);
        u.token_count = count_tokens(u.content, tok);
        return u;
    }

    void recount(const Tokenizer& tok = default_tokenizer()) {
        token_count = count_tokens(content, tok);
    }
};

enum class EdgeKind { none, sequential, relation };

inline std::string to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::sequential: return "sequential";
        case EdgeKind::relation: return "relation";
        default: return "none";
    }
}

inline EdgeKind edge_kind_from_string(std::string_view s) {
    if (s == "sequential") return EdgeKind::sequential;
    if (s == "relation") return EdgeKind::relation;
    if (s == "none") return EdgeKind::none;
    throw InvalidEdge("unknown edge kind '" + std::string(s) + "'");
}

struct Edge {
    std::string source;
    std::string target;
    double weight = 1.0;                  // in [0, 1]
    double existence_probability = 1.0;   // in (0, 1]
    EdgeKind kind = EdgeKind::none;
};

// ---------------------------------------------------------------------------
// UnitGraph

class UnitGraph {
public:
    UnitGraph() = default;

    void add_unit(Unit u) {
        if (index_.count(u.id)) {
            throw DuplicateUnit("unit id '" + u.id + "' already in graph");
        }
        if (!u.embedding.empty()) {
            const std::size_t dim = embedding_dim();
            if (dim != 0 && u.embedding.size() != dim) {
                throw DimensionMismatch("unit '" + u.id + "' has dim " +
                                        std::to_string(u.embedding.size()) +
                                        ", corpus dim " + std::to_string(dim));
            }
        }
        index_.emplace(u.id, units_.size());
        units_.push_back(std::move(u));
    }

    void add_edge(Edge e) {
        if (!index_.count(e.source) || !index_.count(e.target)) {
            throw InvalidEdge("edge endpoints '" + e.source + "'->'" + e.target +
                              "' not in graph");
        }
        if (e.weight < 0.0 || e.weight > 1.0) {
            throw InvalidEdge("weight " + std::to_string(e.weight) + " outside [0,1]");
        }
        if (e.existence_probability <= 0.0 || e.existence_probability > 1.0) {
            throw InvalidEdge("existence probability " +
                              std::to_string(e.existence_probability) + " outside (0,1]");
        }
        edges_.push_back(std::move(e));
    }

    const std::vector<Unit>& units() const { return units_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t size() const { return units_.size(); }
    bool empty() const { return units_.empty(); }

    const Unit* find(std::string_view id) const {
        auto it = index_.find(std::string(id));
        return it == index_.end() ? nullptr : &units_[it->second];
    }

    Unit* find_mut(std::string_view id) {
        auto it = index_.find(std::string(id));
        return it == index_.end() ? nullptr : &units_[it->second];
    }

    bool contains(std::string_view id) const { return index_.count(std::string(id)) > 0; }

    // First non-empty embedding defines the corpus dimension.
    std::size_t embedding_dim() const {
        for (const auto& u : units_) {
            if (!u.embedding.empty()) return u.embedding.size();
        }
        return 0;
    }

    std::vector<std::string> sorted_ids() const {
        std::vector<std::string> ids;
        ids.reserve(units_.size());
        for (const auto& u : units_) ids.push_back(u.id);
        std::sort(ids.begin(), ids.end());
        return ids;
    }

private:
    std::vector<Unit> units_;
    std::vector<Edge> edges_;
    std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Grouping

// Soft membership allowed: a unit may map to several group indices, which
// makes the resulting hierarchy a DAG instead of a tree.
struct Grouping {
    int m = 0;
    std::map<std::string, std::set<int>> assignment;

    // Members per group, ids sorted, index j -> group j.
    std::vector<std::vector<std::string>> members() const {
        std::vector<std::vector<std::string>> out(static_cast<std::size_t>(m));
        for (const auto& [id, groups] : assignment) {
            for (int g : groups) {
                if (g >= 0 && g < m) out[static_cast<std::size_t>(g)].push_back(id);
            }
        }
        return out;  // std::map iteration is already id-sorted
    }

    // Throws if the grouping is not total over the graph's units, points at
    // unknown units/indices, or leaves a group empty.
    void validate(const UnitGraph& graph) const {
        for (const auto& [id, groups] : assignment) {
            if (!graph.contains(id)) {
                throw NonSurjectiveGrouping("assignment names unknown unit '" + id + "'");
            }
            if (groups.empty()) {
                throw NonSurjectiveGrouping("unit '" + id + "' has no group");
            }
            for (int g : groups) {
                if (g < 0 || g >= m) {
                    throw NonSurjectiveGrouping("unit '" + id + "' assigned to index " +
                                                std::to_string(g) + " outside [0," +
                                                std::to_string(m) + ")");
                }
            }
        }
        for (const auto& u : graph.units()) {
            if (!assignment.count(u.id)) {
                throw NonSurjectiveGrouping("unit '" + u.id + "' not covered");
            }
        }
        std::vector<int> sizes(static_cast<std::size_t>(m), 0);
        for (const auto& [id, groups] : assignment) {
            for (int g : groups) ++sizes[static_cast<std::size_t>(g)];
        }
        for (int g = 0; g < m; ++g) {
            if (sizes[static_cast<std::size_t>(g)] == 0) {
                throw EmptyGroup("group " + std::to_string(g) + " is empty");
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Coarsening

enum class SsClass { high, mid, low };

inline std::string to_string(SsClass c) {
    switch (c) {
        case SsClass::high: return "high";
        case SsClass::mid: return "mid";
        default: return "low";
    }
}

inline SsClass ss_class_from_string(std::string_view s) {
    if (s == "high") return SsClass::high;
    if (s == "mid") return SsClass::mid;
    if (s == "low") return SsClass::low;
    throw ConfigError("unknown ss class '" + std::string(s) + "'");
}

// The representative strategy as seen by the core: a content summarizer plus
// its declared self-sufficiency class. Concrete strategies live in coarsen.
// The summarizer receives the new representative's id so external generators
// can tie requests to groups.
struct RhoStrategy {
    std::function<std::string(const std::string&, const std::vector<const Unit*>&)> content;
    SsClass declared = SsClass::high;
    std::string tag = "concat";
};

struct CoarseningResult {
    Grouping grouping;
    std::vector<Unit> representatives;
    SsClass declared_ss_class = SsClass::high;
};

using EmbedFn = std::function<std::vector<double>(const std::string&)>;

struct CoarsenOptions {
    std::string id_prefix = "g";
    EmbedFn embed;   // applied to each representative when set
    int threads = 1; // groups are independent, so reps may build in parallel
};

inline std::vector<std::string> longest_common_prefix(
    const std::vector<const Unit*>& members) {
    if (members.empty()) return {};
    std::vector<std::string> lcp = members.front()->path;
    for (const Unit* u : members) {
        std::size_t k = 0;
        while (k < lcp.size() && k < u->path.size() && lcp[k] == u->path[k]) ++k;
        lcp.resize(k);
    }
    return lcp;
}

// Feature lifting for a representative: path = LCP of members, timestamp =
// max over members, entities = union. The union rule for entities is a
// convention, not sourced from any particular system.
inline void lift_features(const std::vector<const Unit*>& members, Unit& rep) {
    rep.path = longest_common_prefix(members);
    rep.timestamp.reset();
    for (const Unit* u : members) {
        if (u->timestamp && (!rep.timestamp || *u->timestamp > *rep.timestamp)) {
            rep.timestamp = u->timestamp;
        }
        rep.entities.insert(u->entities.begin(), u->entities.end());
    }
}

inline CoarseningResult apply_coarsening(const UnitGraph& graph, const Grouping& grouping,
                                         const RhoStrategy& rho,
                                         const CoarsenOptions& opts = {}) {
    grouping.validate(graph);
    if (grouping.m >= static_cast<int>(graph.size())) {
        throw NoCompression("m=" + std::to_string(grouping.m) + " >= |U|=" +
                            std::to_string(graph.size()));
    }
    const auto members = grouping.members();
    CoarseningResult result;
    result.grouping = grouping;
    result.declared_ss_class = rho.declared;
    result.representatives.resize(members.size());

    parallel_for(members.size(), [&](std::size_t j) {
        std::vector<const Unit*> group;
        group.reserve(members[j].size());
        for (const auto& id : members[j]) group.push_back(graph.find(id));
        const std::string rep_id = opts.id_prefix + std::to_string(j);
        Unit rep = Unit::make(rep_id, rho.content(rep_id, group));
        lift_features(group, rep);
        if (opts.embed) rep.embedding = opts.embed(rep.content);
        result.representatives[j] = std::move(rep);
    }, opts.threads);

    return result;
}

// ---------------------------------------------------------------------------
// Hierarchy

struct LevelProvenance {
    std::string grouping = "atoms";
    std::string rho = "none";
    SsClass ss_class = SsClass::high;
};

struct LevelSpec {
    std::function<Grouping(const UnitGraph&)> group;
    RhoStrategy rho;
    std::string grouping_tag = "custom";
};

struct Violation {
    int level = 0;
    std::string node_id;
    std::string message;
};

class Hierarchy {
public:
    Hierarchy() = default;

    explicit Hierarchy(UnitGraph atoms) {
        levels_.push_back(std::move(atoms));
        child_edges_.emplace_back();
        provenance_.push_back(LevelProvenance{});
        reindex();
    }

    int depth() const { return static_cast<int>(levels_.size()) - 1; }
    const std::vector<UnitGraph>& levels() const { return levels_; }
    const UnitGraph& level(int l) const { return levels_.at(static_cast<std::size_t>(l)); }
    const std::vector<LevelProvenance>& provenance() const { return provenance_; }

    // child map for level l (>= 1): parent id -> child ids at level l-1
    const std::map<std::string, std::vector<std::string>>& child_map(int l) const {
        return child_edges_.at(static_cast<std::size_t>(l));
    }

    void push_level(UnitGraph graph, std::map<std::string, std::vector<std::string>> children,
                    LevelProvenance prov) {
        levels_.push_back(std::move(graph));
        child_edges_.push_back(std::move(children));
        provenance_.push_back(std::move(prov));
        reindex();
    }

    // (level, unit) for an id anywhere in the hierarchy.
    std::pair<int, const Unit*> find(std::string_view id) const {
        auto it = locator_.find(std::string(id));
        if (it == locator_.end()) {
            throw UnknownNode("no node '" + std::string(id) + "' in hierarchy");
        }
        return {it->second, levels_[static_cast<std::size_t>(it->second)].find(id)};
    }

    bool contains(std::string_view id) const { return locator_.count(std::string(id)) > 0; }

    std::vector<const Unit*> children_of(std::string_view id) const {
        auto [lvl, unit] = find(id);
        std::vector<const Unit*> out;
        if (lvl == 0) return out;
        const auto& cm = child_edges_[static_cast<std::size_t>(lvl)];
        auto it = cm.find(std::string(id));
        if (it == cm.end()) return out;
        const auto& below = levels_[static_cast<std::size_t>(lvl - 1)];
        out.reserve(it->second.size());
        for (const auto& cid : it->second) out.push_back(below.find(cid));
        return out;
    }

    // Transitive closure down to level 0. Set semantics: an atom reachable
    // through two parents appears once. For an atom, returns itself.
    std::vector<std::string> atoms_under(std::string_view id) const {
        auto [lvl, unit] = find(id);
        std::set<std::string> atoms;
        collect_atoms(std::string(id), lvl, atoms);
        return {atoms.begin(), atoms.end()};
    }

private:
    void reindex() {
        locator_.clear();
        for (std::size_t l = 0; l < levels_.size(); ++l) {
            for (const auto& u : levels_[l].units()) {
                locator_[u.id] = static_cast<int>(l);
            }
        }
    }

    void collect_atoms(const std::string& id, int lvl, std::set<std::string>& out) const {
        if (lvl == 0) {
            out.insert(id);
            return;
        }
        const auto& cm = child_edges_[static_cast<std::size_t>(lvl)];
        auto it = cm.find(id);
        if (it == cm.end()) return;
        for (const auto& cid : it->second) collect_atoms(cid, lvl - 1, out);
    }

    std::vector<UnitGraph> levels_;
    std::vector<std::map<std::string, std::vector<std::string>>> child_edges_;
    std::vector<LevelProvenance> provenance_;
    std::map<std::string, int> locator_;
};

struct BuildOptions {
    EmbedFn embed;
    int threads = 1;
    // runs on each finished level before it is pushed; `below` is the level the
    // representatives were built from (e.g. to embed reps from member geometry)
    std::function<void(UnitGraph& level,
                       const std::map<std::string, std::vector<std::string>>& children,
                       const UnitGraph& below)>
        post_level;
};

// Edges between coarse nodes are lifted from cross-group member edges; the
// strongest expected weight (w * p) wins so the result stays in [0, 1].
inline void lift_level_edges(const UnitGraph& below, const Grouping& grouping,
                             UnitGraph& above, const std::string& id_prefix) {
    std::map<std::pair<int, int>, double> best;
    for (const auto& e : below.edges()) {
        auto su = grouping.assignment.find(e.source);
        auto tu = grouping.assignment.find(e.target);
        if (su == grouping.assignment.end() || tu == grouping.assignment.end()) continue;
        const double w = e.weight * e.existence_probability;
        for (int a : su->second) {
            for (int b : tu->second) {
                if (a == b) continue;
                auto key = std::minmax(a, b);
                auto [it, inserted] = best.emplace(std::make_pair(key.first, key.second), w);
                if (!inserted && w > it->second) it->second = w;
            }
        }
    }
    for (const auto& [pair, w] : best) {
        Edge e;
        e.source = id_prefix + std::to_string(pair.first);
        e.target = id_prefix + std::to_string(pair.second);
        e.weight = w;
        e.kind = EdgeKind::relation;
        above.add_edge(std::move(e));
    }
}

inline Hierarchy build_hierarchy(const UnitGraph& graph,
                                 const std::vector<LevelSpec>& level_specs,
                                 const BuildOptions& opts = {}) {
    if (level_specs.empty()) {
        throw ConfigError("build_hierarchy needs at least one level spec");
    }
    Hierarchy h(graph);
    for (std::size_t l = 1; l <= level_specs.size(); ++l) {
        const auto& spec = level_specs[l - 1];
        const std::string prefix = "L" + std::to_string(l) + ":g";
        try {
            Grouping grouping = spec.group(h.level(static_cast<int>(l) - 1));
            CoarsenOptions copts;
            copts.id_prefix = prefix;
            copts.embed = opts.embed;
            copts.threads = opts.threads;
            CoarseningResult cr =
                apply_coarsening(h.level(static_cast<int>(l) - 1), grouping, spec.rho, copts);

            UnitGraph level_graph;
            for (auto& rep : cr.representatives) level_graph.add_unit(std::move(rep));
            lift_level_edges(h.level(static_cast<int>(l) - 1), cr.grouping, level_graph, prefix);

            std::map<std::string, std::vector<std::string>> children;
            const auto members = cr.grouping.members();
            for (std::size_t j = 0; j < members.size(); ++j) {
                children[prefix + std::to_string(j)] = members[j];
            }
            if (opts.post_level) {
                opts.post_level(level_graph, children, h.level(static_cast<int>(l) - 1));
            }
            LevelProvenance prov{spec.grouping_tag, spec.rho.tag, spec.rho.declared};
            h.push_level(std::move(level_graph), std::move(children), std::move(prov));
        } catch (Error& e) {
            e.add_context("level " + std::to_string(l) + ": ");
            throw;
        }
    }
    return h;
}

// Violations are data, not errors: an empty list means all invariants hold.
inline std::vector<Violation> validate_hierarchy(const Hierarchy& h) {
    std::vector<Violation> out;
    const auto& levels = h.levels();
    if (levels.empty()) {
        out.push_back({0, "", "hierarchy has no levels"});
        return out;
    }
    std::set<std::string> seen_ids;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        for (const auto& u : levels[l].units()) {
            if (!seen_ids.insert(u.id).second) {
                out.push_back({static_cast<int>(l), u.id, "duplicate node id across hierarchy"});
            }
        }
    }
    for (std::size_t l = 1; l < levels.size(); ++l) {
        if (levels[l].size() >= levels[l - 1].size()) {
            out.push_back({static_cast<int>(l), "",
                           "level does not strictly shrink: |V_" + std::to_string(l) + "|=" +
                               std::to_string(levels[l].size()) + " >= |V_" +
                               std::to_string(l - 1) + "|=" + std::to_string(levels[l - 1].size())});
        }
        const auto& cm = h.child_map(static_cast<int>(l));
        std::set<std::string> covered_children;
        for (const auto& u : levels[l].units()) {
            auto it = cm.find(u.id);
            if (it == cm.end() || it->second.empty()) {
                out.push_back({static_cast<int>(l), u.id, "node has no children"});
                continue;
            }
            for (const auto& cid : it->second) {
                if (!levels[l - 1].contains(cid)) {
                    out.push_back({static_cast<int>(l), u.id,
                                   "child '" + cid + "' not at level " + std::to_string(l - 1)});
                } else {
                    covered_children.insert(cid);
                }
            }
        }
        // every node below the top must have at least one parent
        for (const auto& u : levels[l - 1].units()) {
            if (!covered_children.count(u.id)) {
                out.push_back({static_cast<int>(l - 1), u.id, "node has no parent"});
            }
        }
    }
    return out;
}

}  // namespace hiermem
