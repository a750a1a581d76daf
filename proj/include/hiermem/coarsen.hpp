#pragma once
// Coarsening: pairwise affinities, grouping maps (clustering), representative
// construction across the fidelity spectrum, and the coherence gap that
// scores a grouping against an affinity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hiermem/core.hpp"
#include "hiermem/errors.hpp"
#include "hiermem/rng.hpp"
#include "hiermem/tokenize.hpp"

namespace hiermem {

// ---------------------------------------------------------------------------
// Affinities

// Symmetric pairwise affinity over a fixed id order, values in [0, 1].
struct AffinityMatrix {
    std::vector<std::string> ids;  // sorted
    std::vector<double> values;    // row-major n x n
    std::string tag;

    std::size_t size() const { return ids.size(); }

    double at(std::size_t i, std::size_t j) const { return values[i * ids.size() + j]; }

    double& at(std::size_t i, std::size_t j) { return values[i * ids.size() + j]; }

    std::size_t index_of(const std::string& id) const {
        auto it = std::lower_bound(ids.begin(), ids.end(), id);
        if (it == ids.end() || *it != id) throw UnknownNode("'" + id + "' not in affinity");
        return static_cast<std::size_t>(it - ids.begin());
    }
};

inline AffinityMatrix make_affinity(const UnitGraph& graph, const std::string& tag) {
    AffinityMatrix w;
    w.ids = graph.sorted_ids();
    w.values.assign(w.ids.size() * w.ids.size(), 0.0);
    w.tag = tag;
    for (std::size_t i = 0; i < w.ids.size(); ++i) w.at(i, i) = 1.0;
    return w;
}

// Cosine of embeddings, clamped at zero so the matrix stays in [0, 1].
inline AffinityMatrix affinity_cosine(const UnitGraph& graph) {
    AffinityMatrix w = make_affinity(graph, "cosine");
    std::vector<const Unit*> us;
    for (const auto& id : w.ids) us.push_back(graph.find(id));
    for (const auto* u : us) {
        if (u->embedding.empty()) throw MissingFeature("'" + u->id + "' has no embedding");
    }
    for (std::size_t i = 0; i < us.size(); ++i) {
        for (std::size_t j = i + 1; j < us.size(); ++j) {
            const auto& a = us[i]->embedding;
            const auto& b = us[j]->embedding;
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t d = 0; d < a.size(); ++d) {
                dot += a[d] * b[d];
                na += a[d] * a[d];
                nb += b[d] * b[d];
            }
            double c = (na > 0.0 && nb > 0.0) ? dot / std::sqrt(na * nb) : 0.0;
            w.at(i, j) = w.at(j, i) = std::max(0.0, c);
        }
    }
    return w;
}

// Expected edge weight (weight x existence probability); parallel edges take
// the max. Direction is ignored.
inline AffinityMatrix affinity_connectivity(const UnitGraph& graph) {
    AffinityMatrix w = make_affinity(graph, "connectivity");
    for (const auto& e : graph.edges()) {
        const std::size_t i = w.index_of(e.source);
        const std::size_t j = w.index_of(e.target);
        const double v = e.weight * e.existence_probability;
        w.at(i, j) = std::max(w.at(i, j), v);
        w.at(j, i) = w.at(i, j);
    }
    return w;
}

// Shared-path-prefix length normalized by the longer path.
inline AffinityMatrix affinity_path_lcp(const UnitGraph& graph) {
    AffinityMatrix w = make_affinity(graph, "path-lcp");
    std::vector<const Unit*> us;
    for (const auto& id : w.ids) us.push_back(graph.find(id));
    for (const auto* u : us) {
        if (u->path.empty()) throw MissingFeature("'" + u->id + "' has no path");
    }
    for (std::size_t i = 0; i < us.size(); ++i) {
        for (std::size_t j = i + 1; j < us.size(); ++j) {
            const auto& a = us[i]->path;
            const auto& b = us[j]->path;
            std::size_t lcp = 0;
            while (lcp < a.size() && lcp < b.size() && a[lcp] == b[lcp]) ++lcp;
            w.at(i, j) = w.at(j, i) =
                static_cast<double>(lcp) / static_cast<double>(std::max(a.size(), b.size()));
        }
    }
    return w;
}

// exp(-|dt| / scale); the scale defaults to the median gap between
// consecutive timestamps so it adapts to the log's tempo.
inline AffinityMatrix affinity_temporal(const UnitGraph& graph,
                                        std::optional<double> scale = std::nullopt) {
    AffinityMatrix w = make_affinity(graph, "temporal");
    std::vector<std::int64_t> ts;
    for (const auto& id : w.ids) {
        const Unit* u = graph.find(id);
        if (!u->timestamp) throw MissingFeature("'" + id + "' has no timestamp");
        ts.push_back(*u->timestamp);
    }
    double tau = scale.value_or(0.0);
    if (!scale) {
        std::vector<std::int64_t> sorted = ts;
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> gaps;
        for (std::size_t i = 1; i < sorted.size(); ++i) {
            gaps.push_back(static_cast<double>(sorted[i] - sorted[i - 1]));
        }
        if (!gaps.empty()) {
            std::sort(gaps.begin(), gaps.end());
            tau = gaps[gaps.size() / 2];
        }
    }
    if (tau <= 0.0) tau = 1.0;  // all-equal timestamps: any gap is "far"
    for (std::size_t i = 0; i < ts.size(); ++i) {
        for (std::size_t j = i + 1; j < ts.size(); ++j) {
            const double dt = std::abs(static_cast<double>(ts[i] - ts[j]));
            w.at(i, j) = w.at(j, i) = std::exp(-dt / tau);
        }
    }
    return w;
}

// Convex combination of already-computed affinities over the same ids.
inline AffinityMatrix affinity_composite(
    const std::vector<std::pair<AffinityMatrix, double>>& parts) {
    if (parts.empty()) throw ConfigError("composite affinity needs components");
    double total = 0.0;
    for (const auto& [m, c] : parts) {
        if (c < 0.0) throw ConfigError("composite coefficients must be >= 0");
        total += c;
    }
    if (total <= 0.0) throw ConfigError("composite coefficients sum to zero");
    AffinityMatrix w;
    w.ids = parts.front().first.ids;
    w.values.assign(w.ids.size() * w.ids.size(), 0.0);
    w.tag = "composite";
    for (const auto& [m, c] : parts) {
        if (m.ids != w.ids) throw DimensionMismatch("composite components over different ids");
        for (std::size_t k = 0; k < w.values.size(); ++k) {
            w.values[k] += (c / total) * m.values[k];
        }
    }
    return w;
}

// ---------------------------------------------------------------------------
// Grouping maps

// k-means++ over embeddings. Deterministic for a fixed seed: ties in
// assignment go to the lower centroid index, empty clusters are repaired by
// stealing the farthest point from the largest cluster. With overlap_eps > 0
// a unit joins every centroid within (1 + eps) of its nearest distance.
inline Grouping group_kmeans(const UnitGraph& graph, int k, std::uint64_t seed,
                             double overlap_eps = 0.0, int max_iters = 100) {
    if (k < 1) throw ConfigError("k must be >= 1");
    const std::vector<std::string> ids = graph.sorted_ids();
    const std::size_t n = ids.size();
    if (static_cast<std::size_t>(k) >= n) {
        throw TooFewUnits(std::to_string(n) + " units cannot form " + std::to_string(k) +
                          " strictly smaller groups");
    }
    std::vector<const std::vector<double>*> x;
    for (const auto& id : ids) {
        const Unit* u = graph.find(id);
        if (u->embedding.empty()) throw MissingFeature("'" + id + "' has no embedding");
        x.push_back(&u->embedding);
    }
    const std::size_t dim = x.front()->size();

    auto sqdist = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = a[d] - b[d];
            s += diff * diff;
        }
        return s;
    };

    // k-means++ seeding
    SeededRng rng(seed);
    std::vector<std::vector<double>> centroids;
    std::vector<bool> chosen(n, false);
    const std::size_t first = rng.uniform_int(n);
    centroids.push_back(*x[first]);
    chosen[first] = true;
    std::vector<double> best(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) best[i] = sqdist(*x[i], centroids[0]);
    while (centroids.size() < static_cast<std::size_t>(k)) {
        double total = std::accumulate(best.begin(), best.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = rng.next_double() * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cum += best[i];
                if (cum > r) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {  // numeric edge: take last with positive mass
                for (std::size_t i = n; i-- > 0;) {
                    if (best[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        }
        if (pick == n) {  // all points coincide with a centroid: lowest unchosen id
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            }
        }
        chosen[pick] = true;
        centroids.push_back(*x[pick]);
        for (std::size_t i = 0; i < n; ++i) best[i] = std::min(best[i], sqdist(*x[i], centroids.back()));
    }

    // Lloyd iterations
    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int a = 0;
            double d = sqdist(*x[i], centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double dc = sqdist(*x[i], centroids[c]);
                if (dc < d) {
                    d = dc;
                    a = c;
                }
            }
            if (a != assign[i]) {
                assign[i] = a;
                changed = true;
            }
        }
        // Repair empty clusters before the update step.
        for (int c = 0; c < k; ++c) {
            if (std::count(assign.begin(), assign.end(), c) > 0) continue;
            int donor = 0;
            std::ptrdiff_t donor_size = 0;
            for (int c2 = 0; c2 < k; ++c2) {
                const auto sz = std::count(assign.begin(), assign.end(), c2);
                if (sz > donor_size) {
                    donor_size = sz;
                    donor = c2;
                }
            }
            std::size_t steal = n;
            double far = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (assign[i] != donor) continue;
                const double d = sqdist(*x[i], centroids[donor]);
                if (d > far) {
                    far = d;
                    steal = i;
                }
            }
            assign[steal] = c;
            changed = true;
        }
        for (int c = 0; c < k; ++c) {
            std::vector<double> mean(dim, 0.0);
            std::size_t count = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (assign[i] != c) continue;
                for (std::size_t d = 0; d < dim; ++d) mean[d] += (*x[i])[d];
                ++count;
            }
            for (std::size_t d = 0; d < dim; ++d) mean[d] /= static_cast<double>(count);
            centroids[c] = std::move(mean);
        }
        if (!changed) break;
    }

    Grouping grouping;
    grouping.m = k;
    for (std::size_t i = 0; i < n; ++i) {
        std::set<int> groups{assign[i]};
        if (overlap_eps > 0.0) {
            double dmin = std::sqrt(sqdist(*x[i], centroids[assign[i]]));
            for (int c = 0; c < k; ++c) {
                if (std::sqrt(sqdist(*x[i], centroids[c])) <= (1.0 + overlap_eps) * dmin) {
                    groups.insert(c);
                }
            }
        }
        grouping.assignment[ids[i]] = std::move(groups);
    }
    return grouping;
}

namespace detail {

// Contracted weighted graph used by the modularity clusterer.
struct ModGraph {
    std::size_t n = 0;
    std::vector<std::map<std::size_t, double>> adj;  // undirected, no self key
    std::vector<double> self_loop;                   // internal weight after contraction
};

inline double node_strength(const ModGraph& g, std::size_t v) {
    double s = g.self_loop[v];
    for (const auto& [u, w] : g.adj[v]) s += w;
    return s;
}

}  // namespace detail

// Greedy modularity clustering (local moves + contraction, repeated to a
// fixpoint). Edge weights are weight x existence probability. A seeded
// shuffle fixes the sweep order; move ties go to the lower community id.
inline Grouping group_modularity(const UnitGraph& graph, std::uint64_t seed,
                                 double resolution = 1.0) {
    if (resolution <= 0.0) throw ConfigError("resolution must be > 0");
    if (graph.edges().empty()) throw NoEdges("modularity clustering needs edges");
    const std::vector<std::string> ids = graph.sorted_ids();
    const std::size_t n = ids.size();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index[ids[i]] = i;

    detail::ModGraph g;
    g.n = n;
    g.adj.resize(n);
    g.self_loop.assign(n, 0.0);
    for (const auto& e : graph.edges()) {
        const std::size_t i = index.at(e.source);
        const std::size_t j = index.at(e.target);
        const double w = e.weight * e.existence_probability;
        if (w <= 0.0) continue;
        if (i == j) {
            g.self_loop[i] += w;
        } else {
            g.adj[i][j] += w;
            g.adj[j][i] += w;
        }
    }

    // community of each original unit, updated after every contraction
    std::vector<std::size_t> membership(n);
    for (std::size_t i = 0; i < n; ++i) membership[i] = i;

    SeededRng rng(seed);
    while (true) {
        const std::size_t m_nodes = g.n;
        double two_m = 0.0;
        for (std::size_t v = 0; v < m_nodes; ++v) two_m += detail::node_strength(g, v);
        if (two_m <= 0.0) break;

        std::vector<std::size_t> comm(m_nodes);
        std::vector<double> comm_tot(m_nodes);
        std::vector<double> strength(m_nodes);
        for (std::size_t v = 0; v < m_nodes; ++v) {
            comm[v] = v;
            strength[v] = detail::node_strength(g, v);
            comm_tot[v] = strength[v];
        }

        std::vector<std::size_t> order(m_nodes);
        for (std::size_t v = 0; v < m_nodes; ++v) order[v] = v;
        rng.shuffle(order);

        bool any_move = false;
        bool moved = true;
        while (moved) {
            moved = false;
            for (std::size_t v : order) {
                const std::size_t home = comm[v];
                std::map<std::size_t, double> links;  // community -> weight to v
                links[home];  // staying put is always an option
                for (const auto& [u, w] : g.adj[v]) links[comm[u]] += w;
                comm_tot[home] -= strength[v];
                std::size_t best_c = home;
                double best_gain = links[home] - resolution * comm_tot[home] * strength[v] / two_m;
                for (const auto& [c, w_vc] : links) {
                    const double gain = w_vc - resolution * comm_tot[c] * strength[v] / two_m;
                    if (gain > best_gain + 1e-12 ||
                        (std::abs(gain - best_gain) <= 1e-12 && c < best_c)) {
                        best_gain = gain;
                        best_c = c;
                    }
                }
                comm[v] = best_c;
                comm_tot[best_c] += strength[v];
                if (best_c != home) {
                    moved = true;
                    any_move = true;
                }
            }
        }
        if (!any_move) break;

        // contract communities into supernodes
        std::map<std::size_t, std::size_t> renum;
        for (std::size_t v = 0; v < m_nodes; ++v) {
            if (!renum.count(comm[v])) {
                const std::size_t next = renum.size();
                renum[comm[v]] = next;
            }
        }
        detail::ModGraph h;
        h.n = renum.size();
        h.adj.resize(h.n);
        h.self_loop.assign(h.n, 0.0);
        for (std::size_t v = 0; v < m_nodes; ++v) {
            const std::size_t cv = renum.at(comm[v]);
            h.self_loop[cv] += g.self_loop[v];
            for (const auto& [u, w] : g.adj[v]) {
                const std::size_t cu = renum.at(comm[u]);
                if (cu == cv) {
                    h.self_loop[cv] += w / 2.0;  // each undirected edge visited twice
                } else {
                    h.adj[cv][cu] += w / 2.0;
                    h.adj[cu][cv] += w / 2.0;
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i) membership[i] = renum.at(comm[membership[i]]);
        if (h.n == g.n) break;
        g = std::move(h);
    }

    // renumber groups by smallest member id so labels are stable
    std::map<std::size_t, std::string> smallest;
    for (std::size_t i = 0; i < n; ++i) {
        auto it = smallest.find(membership[i]);
        if (it == smallest.end() || ids[i] < it->second) smallest[membership[i]] = ids[i];
    }
    std::vector<std::pair<std::string, std::size_t>> order_by_id;
    for (const auto& [c, id] : smallest) order_by_id.emplace_back(id, c);
    std::sort(order_by_id.begin(), order_by_id.end());
    std::map<std::size_t, int> final_label;
    for (std::size_t r = 0; r < order_by_id.size(); ++r) {
        final_label[order_by_id[r].second] = static_cast<int>(r);
    }

    Grouping grouping;
    grouping.m = static_cast<int>(order_by_id.size());
    for (std::size_t i = 0; i < n; ++i) {
        grouping.assignment[ids[i]] = {final_label.at(membership[i])};
    }
    if (grouping.m >= static_cast<int>(n)) {
        throw NoCompression("modularity clustering found no groups to merge");
    }
    return grouping;
}

// Group by the first `depth` path components.
inline Grouping group_by_path_prefix(const UnitGraph& graph, std::size_t depth) {
    if (depth < 1) throw ConfigError("path prefix depth must be >= 1");
    std::map<std::vector<std::string>, std::vector<std::string>> buckets;
    for (const auto& u : graph.units()) {
        if (u.path.empty()) throw MissingFeature("'" + u.id + "' has no path");
        std::vector<std::string> key(u.path.begin(),
                                     u.path.begin() + std::min(depth, u.path.size()));
        buckets[key].push_back(u.id);
    }
    Grouping grouping;
    grouping.m = static_cast<int>(buckets.size());
    int g = 0;
    for (const auto& [key, members] : buckets) {
        for (const auto& id : members) grouping.assignment[id] = {g};
        ++g;
    }
    return grouping;
}

// Split a timeline wherever consecutive units are more than gap apart.
inline Grouping group_temporal(const UnitGraph& graph, double gap_seconds) {
    if (gap_seconds <= 0.0) throw ConfigError("gap must be > 0");
    std::vector<std::pair<std::int64_t, std::string>> line;
    for (const auto& u : graph.units()) {
        if (!u.timestamp) throw MissingFeature("'" + u.id + "' has no timestamp");
        line.emplace_back(*u.timestamp, u.id);
    }
    std::sort(line.begin(), line.end());
    Grouping grouping;
    int g = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (i > 0 && static_cast<double>(line[i].first - line[i - 1].first) > gap_seconds) ++g;
        grouping.assignment[line[i].second] = {g};
    }
    grouping.m = g + 1;
    return grouping;
}

// ---------------------------------------------------------------------------
// Representatives

struct GenRequest {
    std::string group_id;
    std::string concat_text;
    int max_tokens = 64;
};

struct GenResponse {
    std::string text;
};

// Abstract summary generator; implementations live behind process or HTTP
// boundaries and must surface failures as GeneratorUnavailable.
class GeneratorClient {
  public:
    virtual ~GeneratorClient() = default;
    virtual GenResponse generate(const GenRequest& req) = 0;
};

enum class RhoKind { concat, truncate, keywords, label, external };

inline std::string to_string(RhoKind k) {
    switch (k) {
        case RhoKind::concat: return "concat";
        case RhoKind::truncate: return "truncate";
        case RhoKind::keywords: return "keywords";
        case RhoKind::label: return "label";
        default: return "external";
    }
}

inline RhoKind rho_kind_from_string(std::string_view s) {
    if (s == "concat") return RhoKind::concat;
    if (s == "truncate") return RhoKind::truncate;
    if (s == "keywords") return RhoKind::keywords;
    if (s == "label") return RhoKind::label;
    if (s == "external") return RhoKind::external;
    throw ConfigError("unknown representative kind '" + std::string(s) + "'");
}

struct RhoSpec {
    RhoKind kind = RhoKind::concat;
    int k = 8;                                 // token budget for truncate/keywords
    int max_tokens = 64;                       // request cap for external
    SsClass external_class = SsClass::high;    // declared class of the external generator
};

// Document frequencies for keyword scoring. Optional: without stats the
// score is plain term frequency.
struct CorpusStats {
    std::map<std::string, std::size_t> doc_freq;
    std::size_t n_docs = 0;
};

inline CorpusStats corpus_stats(const UnitGraph& graph,
                                const Tokenizer& tok = default_tokenizer()) {
    CorpusStats stats;
    stats.n_docs = graph.size();
    for (const auto& u : graph.units()) {
        std::set<std::string> seen;
        for (const auto& t : tok(u.content)) seen.insert(t);
        for (const auto& t : seen) ++stats.doc_freq[t];
    }
    return stats;
}

namespace detail {

inline std::string join_contents(const std::vector<const Unit*>& members) {
    std::string out;
    for (const auto* u : members) {
        if (!out.empty() && !u->content.empty()) out += ' ';
        out += u->content;
    }
    return out;
}

// Top-k terms by tf (x idf when stats are given); ties go to the
// lexicographically smaller term. Returned in rank order.
inline std::vector<std::string> top_keywords(const std::vector<const Unit*>& members, int k,
                                             const CorpusStats* stats, const Tokenizer& tok) {
    std::map<std::string, double> score;
    for (const auto* u : members) {
        for (const auto& t : tok(u->content)) score[t] += 1.0;
    }
    if (stats && stats->n_docs > 0) {
        for (auto& [term, s] : score) {
            auto it = stats->doc_freq.find(term);
            const double df = (it == stats->doc_freq.end()) ? 1.0
                                                            : static_cast<double>(it->second);
            s *= std::log(static_cast<double>(stats->n_docs) / df);
        }
    }
    std::vector<std::pair<std::string, double>> ranked(score.begin(), score.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    for (const auto& [term, s] : ranked) {
        if (static_cast<int>(out.size()) >= k) break;
        out.push_back(term);
    }
    return out;
}

}  // namespace detail

// Build one representative's content for a group, members in id order.
inline std::string representative_content(const std::vector<const Unit*>& members,
                                          const RhoSpec& spec, const std::string& group_id,
                                          GeneratorClient* generator = nullptr,
                                          const CorpusStats* stats = nullptr,
                                          const Tokenizer& tok = default_tokenizer()) {
    if (members.empty()) throw EmptyGroup("group '" + group_id + "' has no members");
    switch (spec.kind) {
        case RhoKind::concat:
            return detail::join_contents(members);
        case RhoKind::truncate: {
            if (spec.k < 1) throw ConfigError("truncate needs k >= 1");
            const auto toks = tok(detail::join_contents(members));
            std::string out;
            for (std::size_t i = 0; i < std::min<std::size_t>(toks.size(), spec.k); ++i) {
                if (i > 0) out += ' ';
                out += toks[i];
            }
            return out;
        }
        case RhoKind::keywords: {
            if (spec.k < 1) throw ConfigError("keywords needs k >= 1");
            const auto kws = detail::top_keywords(members, spec.k, stats, tok);
            std::string out;
            for (std::size_t i = 0; i < kws.size(); ++i) {
                if (i > 0) out += ' ';
                out += kws[i];
            }
            return out;
        }
        case RhoKind::label: {
            std::map<std::string, std::size_t> counts;
            for (const auto* u : members) {
                for (const auto& e : u->entities) ++counts[e];
            }
            std::string best;
            std::size_t best_count = 0;
            for (const auto& [e, c] : counts) {
                if (c > best_count) {  // map order makes ties lexicographic
                    best = e;
                    best_count = c;
                }
            }
            if (!best.empty()) return best;
            const auto kws = detail::top_keywords(members, 1, stats, tok);
            return kws.empty() ? std::string() : kws.front();
        }
        case RhoKind::external: {
            if (!generator) throw GeneratorUnavailable("no generator configured");
            GenRequest req{group_id, detail::join_contents(members), spec.max_tokens};
            return generator->generate(req).text;
        }
    }
    throw ConfigError("unhandled representative kind");
}

inline SsClass declared_class(const RhoSpec& spec) {
    switch (spec.kind) {
        case RhoKind::concat: return SsClass::high;
        case RhoKind::truncate:
        case RhoKind::keywords: return SsClass::mid;
        case RhoKind::label: return SsClass::low;
        default: return spec.external_class;
    }
}

inline std::string rho_tag(const RhoSpec& spec) {
    switch (spec.kind) {
        case RhoKind::truncate:
        case RhoKind::keywords:
            return to_string(spec.kind) + "(" + std::to_string(spec.k) + ")";
        default:
            return to_string(spec.kind);
    }
}

// Package a spec as the strategy consumed by apply_coarsening. The stats
// pointer (if any) must outlive the strategy; the generator likewise.
inline RhoStrategy rho_from_spec(const RhoSpec& spec, const CorpusStats* stats = nullptr,
                                 GeneratorClient* generator = nullptr,
                                 const Tokenizer& tok = default_tokenizer()) {
    RhoStrategy strat;
    strat.declared = declared_class(spec);
    strat.tag = rho_tag(spec);
    strat.content = [spec, stats, generator, tok](const std::string& group_id,
                                                  const std::vector<const Unit*>& members) {
        return representative_content(members, spec, group_id, generator, stats, tok);
    };
    return strat;
}

// ---------------------------------------------------------------------------
// Coherence

// Mean within-group affinity minus mean between-group affinity over all
// unordered pairs. "Within" means sharing at least one group.
inline double coherence_gap(const AffinityMatrix& w, const Grouping& grouping) {
    const std::size_t n = w.size();
    if (n < 2) throw DegeneratePartition("need at least two units");
    double within_sum = 0.0, between_sum = 0.0;
    std::size_t within_n = 0, between_n = 0;
    std::vector<const std::set<int>*> groups;
    groups.reserve(n);
    for (const auto& id : w.ids) {
        auto it = grouping.assignment.find(id);
        if (it == grouping.assignment.end()) {
            throw DegeneratePartition("'" + id + "' is not assigned to any group");
        }
        groups.push_back(&it->second);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& a = *groups[i];
            const auto& b = *groups[j];
            bool shared = false;
            for (int ga : a) {
                if (b.count(ga)) {
                    shared = true;
                    break;
                }
            }
            if (shared) {
                within_sum += w.at(i, j);
                ++within_n;
            } else {
                between_sum += w.at(i, j);
                ++between_n;
            }
        }
    }
    if (within_n == 0 || between_n == 0) {
        throw DegeneratePartition("grouping has no within or no between pairs");
    }
    return within_sum / static_cast<double>(within_n) -
           between_sum / static_cast<double>(between_n);
}

}  // namespace hiermem
