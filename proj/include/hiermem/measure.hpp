#pragma once
// Measurement: exact entropy/MI over enumerable joints, the self-sufficiency
// family, level monotonicity checks, Fano-style capacity bounds, and the
// routing-monotonicity validator. Everything here is an oracle: exact
// enumeration, no sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hiermem/errors.hpp"
#include "hiermem/tokenize.hpp"

namespace hiermem {

inline constexpr std::size_t kMaxEnumerableOutcomes = std::size_t(1) << 20;

// ---------------------------------------------------------------------------
// Joint tables

struct JointTable {
    std::vector<std::string> variables;
    std::vector<std::pair<std::vector<int>, double>> rows;  // outcome tuple, probability

    // Kahan sum so the 1e-12 mass tolerance is meaningful on large supports.
    void validate() const {
        if (variables.empty()) throw InvalidTable("no variables");
        double sum = 0.0, comp = 0.0;
        std::set<std::vector<int>> seen;
        for (const auto& [outcome, p] : rows) {
            if (outcome.size() != variables.size()) {
                throw InvalidTable("outcome arity " + std::to_string(outcome.size()) +
                                   " != " + std::to_string(variables.size()) + " variables");
            }
            if (!(p >= 0.0)) throw InvalidTable("negative or NaN probability");
            if (!seen.insert(outcome).second) throw InvalidTable("duplicate outcome");
            const double y = p - comp;
            const double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw InvalidTable("probabilities sum to " + std::to_string(sum));
        }
    }

    std::vector<std::size_t> var_indices(const std::vector<std::string>& vars) const {
        std::vector<std::size_t> idx;
        for (const auto& v : vars) {
            auto it = std::find(variables.begin(), variables.end(), v);
            if (it == variables.end()) throw UnknownVariable("'" + v + "'");
            idx.push_back(static_cast<std::size_t>(it - variables.begin()));
        }
        return idx;
    }
};

namespace detail {

inline std::vector<int> project(const std::vector<int>& outcome,
                                const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(outcome[i]);
    return out;
}

inline std::map<std::vector<int>, double> marginal(const JointTable& t,
                                                   const std::vector<std::size_t>& idx) {
    std::map<std::vector<int>, double> dist;
    for (const auto& [outcome, p] : t.rows) {
        if (p > 0.0) dist[project(outcome, idx)] += p;
    }
    return dist;
}

inline double entropy_of(const std::map<std::vector<int>, double>& dist) {
    double h = 0.0;
    for (const auto& [outcome, p] : dist) {
        if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
}

// union of two index lists, first-occurrence order
inline std::vector<std::size_t> index_union(const std::vector<std::size_t>& a,
                                            const std::vector<std::size_t>& b) {
    std::vector<std::size_t> u = a;
    for (std::size_t i : b) {
        if (std::find(u.begin(), u.end(), i) == u.end()) u.push_back(i);
    }
    return u;
}

}  // namespace detail

// Shannon entropy (bits) of the marginal over vars; 0 log 0 = 0.
inline double entropy(const JointTable& t, const std::vector<std::string>& vars) {
    return detail::entropy_of(detail::marginal(t, t.var_indices(vars)));
}

// I(A;B) = H(A) + H(B) - H(A,B); tiny negatives from rounding clamp to 0.
inline double mutual_information(const JointTable& t, const std::vector<std::string>& vars_a,
                                 const std::vector<std::string>& vars_b) {
    const auto ia = t.var_indices(vars_a);
    const auto ib = t.var_indices(vars_b);
    const double i = detail::entropy_of(detail::marginal(t, ia)) +
                     detail::entropy_of(detail::marginal(t, ib)) -
                     detail::entropy_of(detail::marginal(t, detail::index_union(ia, ib)));
    return std::abs(i) < 1e-12 ? 0.0 : i;
}

// Extend the table with a variable computed from a projection of each
// outcome. Deterministic maps only: this is how ρ enters the algebra.
inline JointTable with_derived(const JointTable& t, const std::string& name,
                               const std::vector<std::string>& input_vars,
                               const std::function<int(const std::vector<int>&)>& fn) {
    if (std::find(t.variables.begin(), t.variables.end(), name) != t.variables.end()) {
        throw InvalidTable("variable '" + name + "' already present");
    }
    const auto idx = t.var_indices(input_vars);
    JointTable out;
    out.variables = t.variables;
    out.variables.push_back(name);
    out.rows.reserve(t.rows.size());
    for (const auto& [outcome, p] : t.rows) {
        std::vector<int> ext = outcome;
        ext.push_back(fn(detail::project(outcome, idx)));
        out.rows.emplace_back(std::move(ext), p);
    }
    return out;
}

// Error of the best (maximum a posteriori) estimator of target from obs:
// 1 - Σ_o max_t p(t, o). The yardstick Fano's bound is compared against.
inline double bayes_error(const JointTable& t, const std::vector<std::string>& target_vars,
                          const std::vector<std::string>& obs_vars) {
    const auto it = t.var_indices(target_vars);
    const auto io = t.var_indices(obs_vars);
    std::map<std::vector<int>, double> best;  // per obs outcome, best joint mass
    std::map<std::vector<int>, std::map<std::vector<int>, double>> joint;
    for (const auto& [outcome, p] : t.rows) {
        if (p > 0.0) joint[detail::project(outcome, io)][detail::project(outcome, it)] += p;
    }
    double correct = 0.0;
    for (const auto& [o, dist] : joint) {
        double m = 0.0;
        for (const auto& [z, p] : dist) m = std::max(m, p);
        correct += m;
    }
    return 1.0 - correct;
}

// ---------------------------------------------------------------------------
// Self-sufficiency (exact, enumerable worlds)

using OutcomeMap = std::function<int(const std::vector<int>&)>;

// SS = I(G; ρ(G)) / H(G); 1 when H(G) = 0.
inline double ss_exact(const JointTable& t, const std::vector<std::string>& group_vars,
                       const OutcomeMap& rho) {
    const double hg = entropy(t, group_vars);
    if (hg < 1e-12) return 1.0;
    const JointTable ext = with_derived(t, "__rho", group_vars, rho);
    return mutual_information(ext, group_vars, {"__rho"}) / hg;
}

struct SsQReport {
    double ss = 1.0;
    double ss_q = 1.0;
    double r_q = 0.0;
    std::optional<double> bound;  // 1 - (1 - ss)/r_q, absent when r_q = 0
};

// SS_Q = I(Q; ρ(G)) / I(Q; G); 1 by convention when I(Q;G) = 0. The Markov
// chain Q - G - ρ(G) forces SS_Q into [0,1]; a violation beyond tolerance
// means the table is inconsistent.
inline SsQReport ss_q_exact(const JointTable& t, const std::vector<std::string>& group_vars,
                            const OutcomeMap& rho, const std::vector<std::string>& query_vars) {
    SsQReport rep;
    rep.ss = ss_exact(t, group_vars, rho);
    const double hg = entropy(t, group_vars);
    const double iqg = mutual_information(t, query_vars, group_vars);
    rep.r_q = (hg < 1e-12) ? 0.0 : iqg / hg;
    if (rep.r_q > 1e-12) rep.bound = 1.0 - (1.0 - rep.ss) / rep.r_q;
    if (iqg < 1e-12) {
        rep.ss_q = 1.0;
        return rep;
    }
    const JointTable ext = with_derived(t, "__rho", group_vars, rho);
    rep.ss_q = mutual_information(ext, query_vars, {"__rho"}) / iqg;
    if (rep.ss_q < -1e-9 || rep.ss_q > 1.0 + 1e-9) {
        throw InvalidTable("ss_q = " + std::to_string(rep.ss_q) + " outside [0,1]");
    }
    rep.ss_q = std::min(1.0, std::max(0.0, rep.ss_q));
    return rep;
}

// ---------------------------------------------------------------------------
// SS_theta: cross-entropy proxy on text

// Add-one-smoothed bigram model. Conditioning on a representative works as a
// cache: the prefix's own bigrams are added to the corpus counts, then the
// group text is scored starting from the separator token. A useless prefix
// leaves the score unchanged; a prefix sharing the group's transitions
// lowers it.
class BigramModel {
  public:
    explicit BigramModel(const std::vector<std::string>& corpus,
                         Tokenizer tok = default_tokenizer())
        : tok_(std::move(tok)) {
        for (const auto& doc : corpus) {
            for (const auto& t : tok_(doc)) intern(t);
        }
        vocab_size_ = next_id_;  // includes <s>, <sep>, <unk>
        for (const auto& doc : corpus) {
            int prev = kBos;
            for (const auto& t : tok_(doc)) {
                const int id = lookup(t);
                counts_[{prev, id}] += 1.0;
                row_total_[prev] += 1.0;
                prev = id;
            }
        }
    }

    // -log2 P(text), chain started at <s>
    double cross_entropy(const std::string& text) const {
        const auto ids = to_ids(text);
        if (ids.empty()) throw EmptyContent("cannot score empty text");
        return chain_bits(ids, kBos, {}, {});
    }

    // -log2 P(text | prefix <sep>), with the prefix's bigrams cached in
    double conditional_cross_entropy(const std::string& text, const std::string& prefix) const {
        const auto ids = to_ids(text);
        if (ids.empty()) throw EmptyContent("cannot score empty text");
        std::map<std::pair<int, int>, double> cache;
        std::map<int, double> cache_row;
        int prev = kBos;
        for (const auto& t : tok_(prefix)) {
            const int id = lookup(t);
            cache[{prev, id}] += 1.0;
            cache_row[prev] += 1.0;
            prev = id;
        }
        cache[{prev, kSep}] += 1.0;
        cache_row[prev] += 1.0;
        return chain_bits(ids, kSep, cache, cache_row);
    }

    std::size_t vocab_size() const { return static_cast<std::size_t>(vocab_size_); }

    static constexpr int kBos = 0;
    static constexpr int kSep = 1;
    static constexpr int kUnk = 2;

  private:
    int intern(const std::string& t) {
        auto it = vocab_.find(t);
        if (it != vocab_.end()) return it->second;
        const int id = next_id_++;
        vocab_.emplace(t, id);
        return id;
    }

    int lookup(const std::string& t) const {
        auto it = vocab_.find(t);
        return it == vocab_.end() ? kUnk : it->second;
    }

    std::vector<int> to_ids(const std::string& text) const {
        std::vector<int> ids;
        for (const auto& t : tok_(text)) ids.push_back(lookup(t));
        return ids;
    }

    double chain_bits(const std::vector<int>& ids, int start,
                      const std::map<std::pair<int, int>, double>& cache,
                      const std::map<int, double>& cache_row) const {
        double bits = 0.0;
        int prev = start;
        for (int id : ids) {
            double c = 1.0;  // add-one
            auto it = counts_.find({prev, id});
            if (it != counts_.end()) c += it->second;
            auto ic = cache.find({prev, id});
            if (ic != cache.end()) c += ic->second;
            double total = static_cast<double>(vocab_size_);
            auto rt = row_total_.find(prev);
            if (rt != row_total_.end()) total += rt->second;
            auto rc = cache_row.find(prev);
            if (rc != cache_row.end()) total += rc->second;
            bits -= std::log2(c / total);
            prev = id;
        }
        return bits;
    }

    Tokenizer tok_;
    std::map<std::string, int> vocab_;
    int next_id_ = 3;  // 0,1,2 reserved
    int vocab_size_ = 3;
    std::map<std::pair<int, int>, double> counts_;
    std::map<int, double> row_total_;
};

// 1 - CE(G | rho) / CE(G), G = member contents joined in the given order.
// Negative values mean the representative misleads the model; they are
// reported as-is.
inline double ss_theta(const std::vector<std::string>& group_contents,
                       const std::string& rho_text, const BigramModel& lm) {
    std::string g;
    for (const auto& c : group_contents) {
        if (!g.empty() && !c.empty()) g += ' ';
        g += c;
    }
    const double ce = lm.cross_entropy(g);
    const double ce_cond = lm.conditional_cross_entropy(g, rho_text);
    return 1.0 - ce_cond / ce;
}

// Degenerate-ratio flag (the denominator CE can get arbitrarily small on
// trivial text; consumers should surface such values rather than trust them).
inline bool ss_theta_extreme(double v) { return std::abs(v) > 10.0; }

// ---------------------------------------------------------------------------
// Level monotonicity

// One coarsening step: maps a level's outcome tuple to the next level's.
struct CoarseningMap {
    std::string name;
    std::function<std::vector<int>(const std::vector<int>&)> apply;
};

struct MonotonicityReport {
    std::vector<double> h;     // H(V_0) .. H(V_L)
    std::vector<double> i_q;   // I(Q; V_0) .. I(Q; V_L)
    std::vector<bool> lossy;   // step l: map V_{l-1} -> V_l non-injective on support
    bool entropy_ok = true;    // strict decrease at every lossy step, equality else
    bool dpi_ok = true;        // I(Q; V_l) non-increasing
    std::vector<std::string> notes;

    bool ok() const { return entropy_ok && dpi_ok; }
};

// Walk the level stack by enumeration: exact H per level, exact I(Q; .) per
// level, per-step injectivity on the support.
inline MonotonicityReport check_monotonicity(const JointTable& table,
                                             const std::vector<std::string>& atom_vars,
                                             const std::vector<CoarseningMap>& maps,
                                             const std::vector<std::string>& query_vars,
                                             double tol = 1e-9) {
    if (table.rows.size() > kMaxEnumerableOutcomes) {
        throw TooLargeToEnumerate(std::to_string(table.rows.size()) + " outcomes");
    }
    const auto atom_idx = table.var_indices(atom_vars);
    const auto query_idx = table.var_indices(query_vars);

    // per-row tuples for the current level, walked in step
    std::vector<std::vector<int>> level_tuple;
    std::vector<double> prob;
    std::vector<std::vector<int>> query_tuple;
    for (const auto& [outcome, p] : table.rows) {
        if (p <= 0.0) continue;
        level_tuple.push_back(detail::project(outcome, atom_idx));
        query_tuple.push_back(detail::project(outcome, query_idx));
        prob.push_back(p);
    }

    MonotonicityReport rep;
    std::map<std::vector<int>, double> qdist;
    for (std::size_t r = 0; r < prob.size(); ++r) qdist[query_tuple[r]] += prob[r];
    const double hq = detail::entropy_of(qdist);

    auto push_level = [&]() {
        std::map<std::vector<int>, double> vdist;
        std::map<std::vector<int>, double> qvdist;
        for (std::size_t r = 0; r < prob.size(); ++r) {
            vdist[level_tuple[r]] += prob[r];
            std::vector<int> qv = query_tuple[r];
            qv.insert(qv.end(), level_tuple[r].begin(), level_tuple[r].end());
            qvdist[qv] += prob[r];
        }
        rep.h.push_back(detail::entropy_of(vdist));
        double i = hq + rep.h.back() - detail::entropy_of(qvdist);
        if (std::abs(i) < 1e-12) i = 0.0;
        rep.i_q.push_back(i);
    };

    push_level();
    for (std::size_t step = 0; step < maps.size(); ++step) {
        std::map<std::vector<int>, std::set<std::vector<int>>> fibers;  // next -> prev set
        std::vector<std::vector<int>> next_tuple(prob.size());
        for (std::size_t r = 0; r < prob.size(); ++r) {
            next_tuple[r] = maps[step].apply(level_tuple[r]);
            fibers[next_tuple[r]].insert(level_tuple[r]);
        }
        bool lossy = false;
        for (const auto& [next, prevs] : fibers) {
            if (prevs.size() > 1) {
                lossy = true;
                break;
            }
        }
        rep.lossy.push_back(lossy);
        level_tuple = std::move(next_tuple);
        push_level();

        const double dh = rep.h[step] - rep.h[step + 1];
        if (lossy) {
            if (dh <= tol) {
                rep.entropy_ok = false;
                rep.notes.push_back("level " + std::to_string(step + 1) + " ('" +
                                    maps[step].name + "') is lossy but H did not drop");
            }
        } else {
            if (std::abs(dh) > tol) {
                rep.entropy_ok = false;
                rep.notes.push_back("level " + std::to_string(step + 1) + " ('" +
                                    maps[step].name + "') is injective but H changed");
            } else {
                rep.notes.push_back("level " + std::to_string(step + 1) + " ('" +
                                    maps[step].name + "') is non-lossy (relabeling)");
            }
        }
        if (rep.i_q[step + 1] > rep.i_q[step] + tol) {
            rep.dpi_ok = false;
            rep.notes.push_back("level " + std::to_string(step + 1) +
                                " increased I(Q;V), violating the data-processing chain");
        }
    }
    return rep;
}

// Common coarsening steps for binary/categorical tuple worlds.
inline CoarseningMap xor_pairs_map() {
    return {"xor-pairs", [](const std::vector<int>& in) {
                std::vector<int> out;
                std::size_t i = 0;
                for (; i + 1 < in.size(); i += 2) out.push_back(in[i] ^ in[i + 1]);
                if (i < in.size()) out.push_back(in[i]);
                return out;
            }};
}

inline CoarseningMap group_xor_map(std::vector<std::vector<std::size_t>> groups) {
    return {"group-xor", [groups = std::move(groups)](const std::vector<int>& in) {
                std::vector<int> out;
                for (const auto& g : groups) {
                    int v = 0;
                    for (std::size_t i : g) v ^= in.at(i);
                    out.push_back(v);
                }
                return out;
            }};
}

inline CoarseningMap group_first_map(std::vector<std::vector<std::size_t>> groups) {
    return {"group-first", [groups = std::move(groups)](const std::vector<int>& in) {
                std::vector<int> out;
                for (const auto& g : groups) out.push_back(in.at(g.front()));
                return out;
            }};
}

// Bijective relabeling: adds 1 mod arity per position. Never lossy.
inline CoarseningMap relabel_map(std::vector<int> arities) {
    return {"relabel", [arities = std::move(arities)](const std::vector<int>& in) {
                std::vector<int> out(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) {
                    out[i] = (in[i] + 1) % arities.at(i);
                }
                return out;
            }};
}

// ---------------------------------------------------------------------------
// Capacity bounds

// Largest group count consistent with B bits of routing evidence at error
// tolerance epsilon: 2^{(B+1)/(1-eps)}.
inline double fano_max_groups(double b_bits, double epsilon) {
    if (epsilon < 0.0 || epsilon >= 1.0) {
        throw InvalidEpsilon("epsilon must be in [0,1), got " + std::to_string(epsilon));
    }
    if (b_bits < 0.0) throw ConfigError("evidence bits must be >= 0");
    return std::pow(2.0, (b_bits + 1.0) / (1.0 - epsilon));
}

// Lower bound on routing error given I(Z;O) bits over n_k groups.
inline double fano_error_lower_bound(double i_bits, double n_k) {
    if (n_k < 2.0) throw InvalidGroupCount("need n_k >= 2, got " + std::to_string(n_k));
    return std::max(0.0, 1.0 - (i_bits + 1.0) / std::log2(n_k));
}

struct BranchingChoice {
    int b_star = 2;
    int l_star = 0;
};

namespace detail {

// ceil with a guard for exact-boundary floating point (log10(100) == 2)
inline int ceil_guarded(double x) { return static_cast<int>(std::ceil(x - 1e-9)); }

}  // namespace detail

// Integer minimizer of b / ln b (cost per resolved nat), optionally capped
// by a Fano group limit; and the resulting tree depth for n_atoms.
inline BranchingChoice optimal_branching(double n_atoms,
                                         std::optional<double> fano_cap = std::nullopt) {
    if (n_atoms < 2.0) throw ConfigError("need at least 2 atoms");
    int b_max = 64;
    if (fano_cap) b_max = std::min(b_max, static_cast<int>(std::floor(*fano_cap)));
    if (b_max < 2) b_max = 2;
    int best = 2;
    double best_cost = 2.0 / std::log(2.0);
    for (int b = 3; b <= b_max; ++b) {
        const double cost = b / std::log(static_cast<double>(b));
        if (cost < best_cost) {
            best_cost = cost;
            best = b;
        }
    }
    BranchingChoice c;
    c.b_star = best;
    c.l_star = std::max(1, detail::ceil_guarded(std::log(n_atoms) / std::log(best)));
    return c;
}

// Minimum depth for the top level to fit a context of C tokens when each
// level compresses by factor r.
inline int min_depth(double n_tokens, double c_tokens, double r_ratio) {
    if (r_ratio <= 1.0) throw InvalidRatio("compression ratio must exceed 1");
    if (n_tokens < 1.0 || c_tokens < 1.0) throw ConfigError("token counts must be >= 1");
    if (n_tokens <= c_tokens) return 0;
    return std::max(0, detail::ceil_guarded(std::log(n_tokens / c_tokens) / std::log(r_ratio)));
}

// ---------------------------------------------------------------------------
// Routing monotonicity

// Partial order over tier names, stored as its reflexive-transitive
// "dominates" relation. Incomparable pairs are NOT ge in either direction.
class TierOrder {
  public:
    static TierOrder chain(const std::vector<std::string>& ascending) {
        TierOrder o;
        for (std::size_t i = 0; i < ascending.size(); ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                o.dominates_[ascending[i]].insert(ascending[j]);
            }
        }
        return o;
    }

    // covers: (higher, lower) pairs; closure computed here
    static TierOrder from_covers(const std::vector<std::string>& tiers,
                                 const std::vector<std::pair<std::string, std::string>>& covers) {
        TierOrder o;
        for (const auto& t : tiers) o.dominates_[t].insert(t);
        for (const auto& [hi, lo] : covers) {
            if (!o.dominates_.count(hi) || !o.dominates_.count(lo)) {
                throw ConfigError("cover references unknown tier");
            }
            o.dominates_[hi].insert(lo);
        }
        bool changed = true;
        while (changed) {
            changed = false;
            for (auto& [hi, lows] : o.dominates_) {
                std::set<std::string> add;
                for (const auto& mid : lows) {
                    const auto& below = o.dominates_.at(mid);
                    for (const auto& lo : below) {
                        if (!lows.count(lo)) add.insert(lo);
                    }
                }
                if (!add.empty()) {
                    lows.insert(add.begin(), add.end());
                    changed = true;
                }
            }
        }
        return o;
    }

    bool known(const std::string& t) const { return dominates_.count(t) > 0; }

    bool ge(const std::string& a, const std::string& b) const {
        auto it = dominates_.find(a);
        if (it == dominates_.end()) throw ConfigError("unknown tier '" + a + "'");
        if (!known(b)) throw ConfigError("unknown tier '" + b + "'");
        return it->second.count(b) > 0;
    }

  private:
    std::map<std::string, std::set<std::string>> dominates_;
};

// Every ancestor/descendant pair (t, t') must satisfy R(t) >= R(t');
// incomparable tiers count as violations. Returns the offending pairs,
// sorted, one entry per ancestor pair.
inline std::vector<std::pair<std::string, std::string>> check_routing_monotonicity(
    const std::vector<std::pair<std::string, std::string>>& task_edges, const TierOrder& tiers,
    const std::map<std::string, std::string>& assignment) {
    std::set<std::string> tasks;
    std::map<std::string, std::vector<std::string>> children;
    for (const auto& [from, to] : task_edges) {
        tasks.insert(from);
        tasks.insert(to);
        children[from].push_back(to);
    }
    for (const auto& [t, tier] : assignment) tasks.insert(t);

    // cycle check + transitive descendants by DFS with colors
    std::map<std::string, int> color;  // 0 unvisited, 1 on stack, 2 done
    std::map<std::string, std::set<std::string>> desc;
    std::function<void(const std::string&)> dfs = [&](const std::string& v) {
        color[v] = 1;
        for (const auto& c : children[v]) {
            if (color[c] == 1) throw CyclicTaskGraph("cycle through '" + c + "'");
            if (color[c] == 0) dfs(c);
            desc[v].insert(c);
            desc[v].insert(desc[c].begin(), desc[c].end());
        }
        color[v] = 2;
    };
    for (const auto& t : tasks) {
        if (color[t] == 0) dfs(t);
    }

    std::vector<std::pair<std::string, std::string>> violations;
    for (const auto& t : tasks) {
        auto rt = assignment.find(t);
        if (rt == assignment.end()) throw ConfigError("no tier assigned to '" + t + "'");
        for (const auto& d : desc[t]) {
            const auto rd = assignment.find(d);
            if (rd == assignment.end()) throw ConfigError("no tier assigned to '" + d + "'");
            if (!tiers.ge(rt->second, rd->second)) violations.emplace_back(t, d);
        }
    }
    std::sort(violations.begin(), violations.end());
    return violations;
}

// ---------------------------------------------------------------------------
// Joint table text format: `outcome_tuple<TAB>probability` per line, tuples
// comma-separated; optional "# vars: a,b,c" header, other # lines ignored.

inline JointTable parse_joint_table_text(const std::string& text) {
    JointTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string key = "# vars:";
            if (line.rfind(key, 0) == 0) {
                std::string names = line.substr(key.size());
                std::size_t start = 0;
                while (start <= names.size()) {
                    std::size_t comma = names.find(',', start);
                    if (comma == std::string::npos) comma = names.size();
                    std::string name = names.substr(start, comma - start);
                    while (!name.empty() && name.front() == ' ') name.erase(name.begin());
                    while (!name.empty() && name.back() == ' ') name.pop_back();
                    if (!name.empty()) t.variables.push_back(name);
                    start = comma + 1;
                }
            }
            continue;
        }
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw InvalidTable("line " + std::to_string(lineno) + ": no tab separator");
        }
        std::vector<int> outcome;
        const std::string tuple = line.substr(0, tab);
        std::size_t start = 0;
        while (start <= tuple.size()) {
            std::size_t comma = tuple.find(',', start);
            if (comma == std::string::npos) comma = tuple.size();
            try {
                outcome.push_back(std::stoi(tuple.substr(start, comma - start)));
            } catch (const std::exception&) {
                throw InvalidTable("line " + std::to_string(lineno) + ": bad outcome tuple");
            }
            start = comma + 1;
        }
        double p = 0.0;
        try {
            p = std::stod(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw InvalidTable("line " + std::to_string(lineno) + ": bad probability");
        }
        t.rows.emplace_back(std::move(outcome), p);
    }
    if (t.variables.empty() && !t.rows.empty()) {
        for (std::size_t i = 0; i < t.rows.front().first.size(); ++i) {
            t.variables.push_back("x" + std::to_string(i));
        }
    }
    t.validate();
    return t;
}

inline std::string joint_table_to_text(const JointTable& t) {
    std::string out = "# vars: ";
    for (std::size_t i = 0; i < t.variables.size(); ++i) {
        if (i > 0) out += ',';
        out += t.variables[i];
    }
    out += '\n';
    char buf[64];
    for (const auto& [outcome, p] : t.rows) {
        std::string tuple;
        for (std::size_t i = 0; i < outcome.size(); ++i) {
            if (i > 0) tuple += ',';
            tuple += std::to_string(outcome[i]);
        }
        std::snprintf(buf, sizeof(buf), "%.17g", p);
        out += tuple + "\t" + buf + "\n";
    }
    return out;
}

inline JointTable load_joint_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_joint_table_text(ss.str());
}

inline void save_joint_table(const JointTable& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << joint_table_to_text(t);
}

}  // namespace hiermem
