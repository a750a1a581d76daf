#pragma once
// Traversal: budgeted retrieval over a hierarchy. Four algorithms share one
// cost unit (relevance evaluations = scorer invocations) and one budget rule
// (tokens of collected atoms never exceed B). Ties always break by ascending
// id so every algorithm is a pure function of (hierarchy, query).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hiermem/coarsen.hpp"
#include "hiermem/core.hpp"
#include "hiermem/errors.hpp"
#include "hiermem/tokenize.hpp"

namespace hiermem {

// ---------------------------------------------------------------------------
// Query and result

struct Query {
    std::string text;
    std::vector<double> embedding;      // semantic view input
    std::vector<std::string> terms;     // lexical view input (multiset)
    // symbolic predicates; all present ones must pass
    std::optional<std::pair<std::int64_t, std::int64_t>> time_range;
    std::set<std::string> entities;     // every listed entity must be present
    std::vector<std::string> path_prefix;

    std::size_t budget = 0;             // B, in tokens
    std::vector<int> beams;             // per-level widths k_L..k_0, top first
    int k = 4;                          // pool take for collapsed search
    int d = 4;                          // per-view candidate limit input
    int max_steps = 32;                 // navigation step bound

    static Query from_text(std::string text, const EmbedFn& embed,
                           const Tokenizer& tok = default_tokenizer()) {
        Query q;
        q.terms = tok(text);
        q.embedding = embed(text);
        q.text = std::move(text);
        return q;
    }
};

struct Visit {
    int level = 0;
    std::string id;
    bool operator==(const Visit&) const = default;
};

struct RetrievalResult {
    std::vector<std::string> atoms;   // selection order
    std::size_t tokens_used = 0;
    std::size_t relevance_evals = 0;
    std::vector<Visit> visit_trace;
};

// ---------------------------------------------------------------------------
// Scoring

enum class ViewKind { semantic, lexical, symbolic };

inline std::string to_string(ViewKind v) {
    switch (v) {
        case ViewKind::semantic: return "semantic";
        case ViewKind::lexical: return "lexical";
        default: return "symbolic";
    }
}

struct EvalCounter {
    std::size_t count = 0;
};

namespace detail {

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

}  // namespace detail

// One relevance evaluation. Semantic = clamped cosine, lexical = multiset
// token F1, symbolic = 1 iff every predicate on the query passes.
inline double score(const Query& q, const Unit& u, ViewKind kind, EvalCounter& ev) {
    ++ev.count;
    switch (kind) {
        case ViewKind::semantic: {
            if (q.embedding.empty()) throw MissingFeature("query has no embedding");
            if (u.embedding.empty()) throw MissingFeature("'" + u.id + "' has no embedding");
            if (q.embedding.size() != u.embedding.size()) {
                throw DimensionMismatch("query dim " + std::to_string(q.embedding.size()) +
                                        " vs unit dim " + std::to_string(u.embedding.size()));
            }
            return std::max(0.0, detail::cosine(q.embedding, u.embedding));
        }
        case ViewKind::lexical: {
            if (q.terms.empty()) throw MissingFeature("query has no lexical terms");
            std::map<std::string, int> want;
            for (const auto& t : q.terms) ++want[t];
            const auto toks = whitespace_tokenize(u.content);
            if (toks.empty()) return 0.0;
            int overlap = 0;
            std::map<std::string, int> have;
            for (const auto& t : toks) ++have[t];
            for (const auto& [t, c] : want) {
                auto it = have.find(t);
                if (it != have.end()) overlap += std::min(c, it->second);
            }
            if (overlap == 0) return 0.0;
            const double precision = overlap / static_cast<double>(toks.size());
            const double recall = overlap / static_cast<double>(q.terms.size());
            return 2.0 * precision * recall / (precision + recall);
        }
        case ViewKind::symbolic: {
            if (q.time_range) {
                if (!u.timestamp) return 0.0;
                if (*u.timestamp < q.time_range->first || *u.timestamp > q.time_range->second) {
                    return 0.0;
                }
            }
            for (const auto& e : q.entities) {
                if (!u.entities.count(e)) return 0.0;
            }
            if (!q.path_prefix.empty()) {
                if (u.path.size() < q.path_prefix.size()) return 0.0;
                for (std::size_t i = 0; i < q.path_prefix.size(); ++i) {
                    if (u.path[i] != q.path_prefix[i]) return 0.0;
                }
            }
            return 1.0;
        }
    }
    throw ConfigError("unhandled view kind");
}

// ---------------------------------------------------------------------------
// Budget truncation

struct ScoredAtom {
    std::string id;
    double relevance = 0.0;
    std::size_t tokens = 0;
};

struct Selection {
    std::vector<std::string> atoms;
    std::size_t tokens_used = 0;
};

// First-fit-decreasing: greedy by (score desc, id asc); an atom that does
// not fit is skipped and scanning continues.
inline Selection budget_truncate(std::vector<ScoredAtom> candidates, std::size_t budget) {
    for (const auto& c : candidates) {
        if (!std::isfinite(c.relevance)) {
            throw ConfigError("non-finite score for '" + c.id + "'");
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (a.relevance != b.relevance) return a.relevance > b.relevance;
        return a.id < b.id;
    });
    Selection sel;
    for (const auto& c : candidates) {
        if (sel.tokens_used + c.tokens <= budget) {
            sel.atoms.push_back(c.id);
            sel.tokens_used += c.tokens;
        }
    }
    return sel;
}

namespace detail {

// (score desc, id asc) over (id, score) pairs
inline void rank(std::vector<std::pair<std::string, double>>& scored) {
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Algorithm 1: top-down beam refinement

// Beam widths come from query.beams, ordered top level first; the final
// level-0 beam is budget-truncated.
inline RetrievalResult traverse_top_down(const Hierarchy& h, const Query& q) {
    const int top = h.depth();
    if (static_cast<int>(q.beams.size()) != top + 1) {
        throw BeamWidthMismatch("need " + std::to_string(top + 1) + " beam widths, got " +
                                std::to_string(q.beams.size()));
    }
    for (int w : q.beams) {
        if (w < 1) throw BeamWidthMismatch("beam widths must be >= 1");
    }

    EvalCounter ev;
    RetrievalResult res;
    std::vector<std::string> candidates = h.level(top).sorted_ids();
    std::vector<std::pair<std::string, double>> scored;
    for (int lvl = top;; --lvl) {
        scored.clear();
        for (const auto& id : candidates) {
            const double s = score(q, *h.level(lvl).find(id), ViewKind::semantic, ev);
            res.visit_trace.push_back({lvl, id});
            scored.emplace_back(id, s);
        }
        detail::rank(scored);
        const std::size_t width = static_cast<std::size_t>(q.beams[top - lvl]);
        if (scored.size() > width) scored.resize(width);
        if (lvl == 0) {
            std::vector<ScoredAtom> finalists;
            for (const auto& [id, s] : scored) {
                finalists.push_back({id, s, h.level(0).find(id)->token_count});
            }
            const Selection sel = budget_truncate(std::move(finalists), q.budget);
            res.atoms = sel.atoms;
            res.tokens_used = sel.tokens_used;
            res.relevance_evals = ev.count;
            return res;
        }
        std::set<std::string> next;
        for (const auto& [id, s] : scored) {
            for (const Unit* c : h.children_of(id)) next.insert(c->id);
        }
        candidates.assign(next.begin(), next.end());
    }
}

// ---------------------------------------------------------------------------
// Algorithm 2: collapsed search

// Scores every node of every level, takes the top k, expands non-leaves to
// the atoms beneath them (which inherit the expanding node's score), dedupes
// keeping the best-ranked occurrence, then budget-truncates.
inline RetrievalResult traverse_collapsed(const Hierarchy& h, const Query& q, int k) {
    if (k < 1) throw ConfigError("k must be >= 1");
    EvalCounter ev;
    RetrievalResult res;
    struct PoolEntry {
        std::string id;
        int level;
        double relevance;
    };
    std::vector<PoolEntry> pool;
    for (int lvl = h.depth(); lvl >= 0; --lvl) {
        for (const auto& id : h.level(lvl).sorted_ids()) {
            const double s = score(q, *h.level(lvl).find(id), ViewKind::semantic, ev);
            res.visit_trace.push_back({lvl, id});
            pool.push_back({id, lvl, s});
        }
    }
    std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
        if (a.relevance != b.relevance) return a.relevance > b.relevance;
        return a.id < b.id;
    });
    if (pool.size() > static_cast<std::size_t>(k)) pool.resize(static_cast<std::size_t>(k));

    std::vector<ScoredAtom> candidates;
    std::set<std::string> seen;
    for (const auto& entry : pool) {
        if (entry.level == 0) {
            if (seen.insert(entry.id).second) {
                candidates.push_back({entry.id, entry.relevance,
                                      h.level(0).find(entry.id)->token_count});
            }
            continue;
        }
        for (const auto& atom : h.atoms_under(entry.id)) {
            if (seen.insert(atom).second) {
                candidates.push_back({atom, entry.relevance,
                                      h.level(0).find(atom)->token_count});
            }
        }
    }
    const Selection sel = budget_truncate(std::move(candidates), q.budget);
    res.atoms = sel.atoms;
    res.tokens_used = sel.tokens_used;
    res.relevance_evals = ev.count;
    return res;
}

// ---------------------------------------------------------------------------
// Algorithm 3: reasoning navigation

// The "reasoning" step is a policy over the current frontier. The default is
// greedy-by-semantic-score with per-node caching, so each frontier node costs
// one evaluation no matter how long it lingers.
class NavigationPolicy {
  public:
    virtual ~NavigationPolicy() = default;
    // frontier holds the not-yet-chosen node ids; returns one of them
    virtual std::string choose(const Query& q, const Hierarchy& h,
                               const std::vector<std::string>& frontier, EvalCounter& ev) = 0;
};

class GreedyPolicy : public NavigationPolicy {
  public:
    std::string choose(const Query& q, const Hierarchy& h,
                       const std::vector<std::string>& frontier, EvalCounter& ev) override {
        std::string best;
        double best_score = -1.0;
        for (const auto& id : frontier) {
            auto it = cache_.find(id);
            if (it == cache_.end()) {
                it = cache_.emplace(id, score(q, *h.find(id).second, ViewKind::semantic, ev))
                         .first;
            }
            if (it->second > best_score || (it->second == best_score && id < best)) {
                best = id;
                best_score = it->second;
            }
        }
        return best;
    }

  private:
    std::map<std::string, double> cache_;
};

// Delegates the choice to an external generator: the request text carries the
// query and the numbered frontier; the response must be one frontier id.
class ExternalPolicy : public NavigationPolicy {
  public:
    explicit ExternalPolicy(GeneratorClient* client) : client_(client) {}

    std::string choose(const Query& q, const Hierarchy& h,
                       const std::vector<std::string>& frontier, EvalCounter&) override {
        if (!client_) throw GeneratorUnavailable("no navigation client configured");
        std::string prompt = "query: " + q.text + "\n";
        for (const auto& id : frontier) {
            prompt += id + ": " + h.find(id).second->content + "\n";
        }
        GenRequest req{"navigate", prompt, 16};
        std::string choice = client_->generate(req).text;
        while (!choice.empty() && std::isspace(static_cast<unsigned char>(choice.back()))) {
            choice.pop_back();
        }
        return choice;
    }

  private:
    GeneratorClient* client_;
};

// Budget charges only collected atoms (context tokens are free); navigation
// itself is bounded by max_steps. Atoms that do not fit are skipped but
// still consume a step.
inline RetrievalResult traverse_navigate(const Hierarchy& h, const Query& q,
                                         NavigationPolicy* policy = nullptr) {
    GreedyPolicy fallback;
    if (!policy) policy = &fallback;
    RetrievalResult res;
    EvalCounter ev;
    std::vector<std::string> frontier = h.level(h.depth()).sorted_ids();
    std::set<std::string> in_frontier(frontier.begin(), frontier.end());
    std::set<std::string> chosen;
    for (int step = 0; step < q.max_steps; ++step) {
        if (q.budget > 0 && res.tokens_used >= q.budget) break;
        std::vector<std::string> open;
        for (const auto& id : frontier) {
            if (!chosen.count(id)) open.push_back(id);
        }
        if (open.empty()) break;
        const std::string pick = policy->choose(q, h, open, ev);
        if (std::find(open.begin(), open.end(), pick) == open.end()) {
            throw PolicyStalled("policy chose '" + pick + "' which is not an open node");
        }
        chosen.insert(pick);
        const auto [lvl, unit] = h.find(pick);
        res.visit_trace.push_back({lvl, pick});
        if (lvl > 0) {
            for (const Unit* c : h.children_of(pick)) {
                if (in_frontier.insert(c->id).second) frontier.push_back(c->id);
            }
        } else if (res.tokens_used + unit->token_count <= q.budget) {
            res.atoms.push_back(pick);
            res.tokens_used += unit->token_count;
        }
    }
    res.relevance_evals = ev.count;
    return res;
}

// ---------------------------------------------------------------------------
// Algorithm 4: multi-view parallel retrieval

// Three independent top-n retrievals over the atoms (n = max(1, d)); a view
// never proposes zero-score candidates. Union keeps each atom's best score;
// views merge in fixed order so assembly is deterministic.
inline RetrievalResult traverse_multiview(const Hierarchy& h, const Query& q) {
    const std::size_t n = static_cast<std::size_t>(std::max(1, q.d));
    EvalCounter ev;
    RetrievalResult res;
    const std::vector<std::string> atoms = h.level(0).sorted_ids();

    std::map<std::string, double> best;
    std::vector<std::string> merge_order;
    for (ViewKind view : {ViewKind::semantic, ViewKind::lexical, ViewKind::symbolic}) {
        std::vector<std::pair<std::string, double>> scored;
        for (const auto& id : atoms) {
            const double s = score(q, *h.level(0).find(id), view, ev);
            if (s > 0.0) scored.emplace_back(id, s);
        }
        detail::rank(scored);
        if (scored.size() > n) scored.resize(n);
        for (const auto& [id, s] : scored) {
            res.visit_trace.push_back({0, id});
            auto it = best.find(id);
            if (it == best.end()) {
                best.emplace(id, s);
                merge_order.push_back(id);
            } else if (s > it->second) {
                it->second = s;
            }
        }
    }
    std::vector<ScoredAtom> candidates;
    for (const auto& id : merge_order) {
        candidates.push_back({id, best.at(id), h.level(0).find(id)->token_count});
    }
    const Selection sel = budget_truncate(std::move(candidates), q.budget);
    res.atoms = sel.atoms;
    res.tokens_used = sel.tokens_used;
    res.relevance_evals = ev.count;
    return res;
}

// ---------------------------------------------------------------------------
// Flat baseline: score every atom, truncate. The O(n) comparison point.
inline RetrievalResult retrieve_flat(const Hierarchy& h, const Query& q) {
    EvalCounter ev;
    RetrievalResult res;
    std::vector<ScoredAtom> candidates;
    for (const auto& id : h.level(0).sorted_ids()) {
        const Unit* u = h.level(0).find(id);
        const double s = score(q, *u, ViewKind::semantic, ev);
        res.visit_trace.push_back({0, id});
        candidates.push_back({id, s, u->token_count});
    }
    const Selection sel = budget_truncate(std::move(candidates), q.budget);
    res.atoms = sel.atoms;
    res.tokens_used = sel.tokens_used;
    res.relevance_evals = ev.count;
    return res;
}

}  // namespace hiermem
