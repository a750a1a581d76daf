#pragma once
// Synthetic ground truth: discrete latent-tree worlds with exactly
// enumerable joints, planted-block embedding corpora, an engineered
// disjoint-label corpus for the coupling experiment, and quantized routing
// channels. Everything is a pure function of (spec, seed).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hiermem/core.hpp"
#include "hiermem/errors.hpp"
#include "hiermem/extract.hpp"
#include "hiermem/measure.hpp"
#include "hiermem/rng.hpp"

namespace hiermem {

// ---------------------------------------------------------------------------
// Discrete latent-tree worlds

struct WorldSpec {
    std::vector<int> arities;     // latent alphabet per level, root level first
    std::vector<int> branchings;  // children per node between consecutive levels
    double emission_entropy = 0.0;  // bits of noise per atom (two-point mass, <= 1)
    int emission_symbols = 0;       // atom alphabet; 0 = leaf arity
    std::uint64_t seed = 0;
};

struct WorldQuery {
    std::string variable;                 // latent variable acting as the query
    int level = 0;
    std::vector<std::size_t> relevant_atoms;  // leaf indices in its subtree
};

struct DiscreteWorld {
    WorldSpec spec;
    std::vector<int> level_sizes;                       // variables per latent level
    std::vector<std::vector<std::vector<double>>> cond; // cond[d][parent][child], d >= 1
    std::vector<std::vector<double>> emission;          // emission[topic][symbol]
    int emission_symbols = 2;
    std::vector<std::vector<std::string>> latent_vars;  // names per level
    std::vector<std::string> atom_vars;
    std::vector<WorldQuery> queries;
    JointTable joint;  // variables: all latents (level order), then atoms
};

namespace detail {

// binary entropy, p in [0,1]
inline double h2(double p) {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log2(p);
    if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

// invert h2 on [0.5, 1]: the dominant-mass probability with entropy target
inline double h2_inverse(double target) {
    double lo = 0.5, hi = 1.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (h2(mid) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

inline DiscreteWorld gen_world(const WorldSpec& spec) {
    if (spec.arities.empty()) throw ConfigError("world needs at least one level");
    for (int a : spec.arities) {
        if (a < 2) throw ConfigError("latent arities must be >= 2");
    }
    if (spec.branchings.size() + 1 != spec.arities.size()) {
        throw ConfigError("need one branching per level transition");
    }
    for (int b : spec.branchings) {
        if (b < 1) throw ConfigError("branchings must be >= 1");
    }
    if (spec.emission_entropy < 0.0 || spec.emission_entropy > 1.0) {
        throw ConfigError("emission entropy must lie in [0,1] (two-point emission)");
    }

    DiscreteWorld w;
    w.spec = spec;
    const std::size_t depth = spec.arities.size();
    w.level_sizes.assign(depth, 1);
    for (std::size_t d = 1; d < depth; ++d) {
        w.level_sizes[d] = w.level_sizes[d - 1] * spec.branchings[d - 1];
    }
    const int n_atoms = w.level_sizes.back();
    const int leaf_arity = spec.arities.back();
    w.emission_symbols = spec.emission_symbols > 0 ? spec.emission_symbols : leaf_arity;
    const bool noisy = spec.emission_entropy > 0.0;
    if (noisy && w.emission_symbols < 2) {
        throw ConfigError("noisy emission needs at least 2 symbols");
    }

    // support estimate in log2; actual support can only be smaller
    double log2_support = 0.0;
    for (std::size_t d = 0; d < depth; ++d) {
        log2_support += w.level_sizes[d] * std::log2(static_cast<double>(spec.arities[d]));
    }
    if (noisy) log2_support += n_atoms;  // two-point spread per atom
    if (log2_support > 20.0 + 1e-9) {
        throw TooLargeToEnumerate("world support ~2^" + std::to_string(log2_support));
    }

    SeededRng rng(spec.seed);
    w.cond.resize(depth);
    for (std::size_t d = 1; d < depth; ++d) {
        auto& table = w.cond[d];
        table.assign(spec.arities[d - 1], std::vector<double>(spec.arities[d], 0.0));
        for (auto& row : table) {
            double sum = 0.0;
            for (double& v : row) {
                v = 0.25 + rng.next_double();
                sum += v;
            }
            for (double& v : row) v /= sum;
        }
    }

    const double p_major = noisy ? detail::h2_inverse(spec.emission_entropy) : 1.0;
    w.emission.assign(leaf_arity, std::vector<double>(w.emission_symbols, 0.0));
    for (int t = 0; t < leaf_arity; ++t) {
        const int a = t % w.emission_symbols;
        const int b = (t + 1) % w.emission_symbols;
        w.emission[t][a] += p_major;
        w.emission[t][b] += 1.0 - p_major;
    }

    // variable names and query family
    int total_latents = 0;
    w.latent_vars.resize(depth);
    for (std::size_t d = 0; d < depth; ++d) {
        for (int i = 0; i < w.level_sizes[d]; ++i) {
            w.latent_vars[d].push_back("z" + std::to_string(d) + "_" + std::to_string(i));
            ++total_latents;
        }
    }
    for (int i = 0; i < n_atoms; ++i) w.atom_vars.push_back("a" + std::to_string(i));
    for (std::size_t d = 0; d < depth; ++d) {
        int span = 1;
        for (std::size_t dd = d; dd + 1 < depth; ++dd) span *= spec.branchings[dd];
        for (int i = 0; i < w.level_sizes[d]; ++i) {
            WorldQuery q;
            q.variable = w.latent_vars[d][i];
            q.level = static_cast<int>(d);
            for (int a = i * span; a < (i + 1) * span; ++a) {
                q.relevant_atoms.push_back(static_cast<std::size_t>(a));
            }
            w.queries.push_back(std::move(q));
        }
    }

    w.joint.variables.reserve(static_cast<std::size_t>(total_latents + n_atoms));
    for (const auto& lvl : w.latent_vars) {
        for (const auto& v : lvl) w.joint.variables.push_back(v);
    }
    for (const auto& v : w.atom_vars) w.joint.variables.push_back(v);

    // enumerate latent configurations (odometer over all latent variables),
    // then fan out the per-atom two-point emissions
    std::vector<int> latent(total_latents, 0);
    std::vector<std::size_t> level_offset(depth, 0);
    for (std::size_t d = 1; d < depth; ++d) {
        level_offset[d] = level_offset[d - 1] + static_cast<std::size_t>(w.level_sizes[d - 1]);
    }
    auto var_level = [&](std::size_t g) {
        std::size_t d = depth - 1;
        while (level_offset[d] > g) --d;
        return d;
    };

    std::vector<int> atom_sym(n_atoms, 0);
    std::function<void(int, double)> emit = [&](int atom, double p) {
        if (p <= 0.0) return;
        if (atom == n_atoms) {
            std::vector<int> outcome = latent;
            outcome.insert(outcome.end(), atom_sym.begin(), atom_sym.end());
            w.joint.rows.emplace_back(std::move(outcome), p);
            return;
        }
        const int topic = latent[level_offset[depth - 1] + static_cast<std::size_t>(atom)];
        std::map<int, double> spread;  // collapse the two-point mass if symbols coincide
        spread[topic % w.emission_symbols] += p_major;
        spread[(topic + 1) % w.emission_symbols] += 1.0 - p_major;
        for (const auto& [sym, mass] : spread) {
            atom_sym[atom] = sym;
            emit(atom + 1, p * mass);
        }
    };

    std::size_t g = 0;
    std::function<void(std::size_t, double)> walk = [&](std::size_t gi, double p) {
        if (gi == latent.size()) {
            emit(0, p);
            return;
        }
        const std::size_t d = var_level(gi);
        const int arity = spec.arities[d];
        for (int v = 0; v < arity; ++v) {
            latent[gi] = v;
            double factor;
            if (d == 0) {
                factor = 1.0 / arity;
            } else {
                const std::size_t i = gi - level_offset[d];
                const std::size_t parent =
                    level_offset[d - 1] + i / static_cast<std::size_t>(spec.branchings[d - 1]);
                factor = w.cond[d][static_cast<std::size_t>(latent[parent])]
                                  [static_cast<std::size_t>(v)];
            }
            walk(gi + 1, p * factor);
        }
    };
    (void)g;
    walk(0, 1.0);

    // Kahan-normalize so the table passes the strict mass check
    double sum = 0.0, comp = 0.0;
    for (const auto& [o, p] : w.joint.rows) {
        const double y = p - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    for (auto& [o, p] : w.joint.rows) p /= sum;
    w.joint.validate();
    return w;
}

// Coarsening stack induced by the world's own tree: XOR the siblings under
// each internal node, level by level. Only meaningful for binary symbols.
inline std::vector<CoarseningMap> tree_xor_maps(const DiscreteWorld& w) {
    std::vector<CoarseningMap> maps;
    const auto& b = w.spec.branchings;
    for (std::size_t d = b.size(); d-- > 0;) {
        const int groups = w.level_sizes[d];
        const int size = b[d];
        std::vector<std::vector<std::size_t>> idx;
        for (int j = 0; j < groups; ++j) {
            std::vector<std::size_t> members;
            for (int m = 0; m < size; ++m) {
                members.push_back(static_cast<std::size_t>(j * size + m));
            }
            idx.push_back(std::move(members));
        }
        maps.push_back(group_xor_map(std::move(idx)));
    }
    return maps;
}

// ---------------------------------------------------------------------------
// Planted-block embedding corpora

struct PlantedQuery {
    std::string text;
    std::vector<double> embedding;
    std::set<std::string> relevant;  // atom ids
};

struct PlantedCorpus {
    UnitGraph atoms;
    Grouping truth;
    std::vector<PlantedQuery> queries;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::string padded(int v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace detail

// Blocks sit on mutually orthogonal unit centroids; units are noisy copies
// renormalized to the sphere. Query i's relevant set is exactly block i.
inline PlantedCorpus gen_planted_corpus(int blocks, int units_per_block, int dim, double noise,
                                        std::uint64_t seed) {
    if (blocks < 2) throw ConfigError("need at least 2 blocks");
    if (units_per_block < 1) throw ConfigError("need at least 1 unit per block");
    if (dim < 2) throw ConfigError("dim must be >= 2");
    if (dim < blocks) {
        throw DimTooSmall("dim " + std::to_string(dim) + " cannot hold " +
                          std::to_string(blocks) + " orthogonal centroids");
    }
    if (noise < 0.0) throw ConfigError("noise must be >= 0");

    PlantedCorpus pc;
    pc.seed = seed;
    pc.truth.m = blocks;
    SeededRng rng(seed);
    for (int b = 0; b < blocks; ++b) {
        PlantedQuery q;
        q.text = "block " + std::to_string(b);
        q.embedding.assign(static_cast<std::size_t>(dim), 0.0);
        q.embedding[static_cast<std::size_t>(b)] = 1.0;
        for (int j = 0; j < units_per_block; ++j) {
            std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
            v[static_cast<std::size_t>(b)] = 1.0;
            for (auto& x : v) x += noise * rng.gaussian();
            double norm = 0.0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 0.0) {
                for (double& x : v) x /= norm;
            }
            Unit u = Unit::make("b" + std::to_string(b) + "u" + detail::padded(j, 2),
                                "block " + std::to_string(b) + " unit " + std::to_string(j));
            u.embedding = std::move(v);
            u.entities = {"blk" + std::to_string(b)};
            const std::string id = u.id;
            pc.atoms.add_unit(std::move(u));
            pc.truth.assignment[id] = {b};
            q.relevant.insert(id);
        }
        pc.queries.push_back(std::move(q));
    }
    return pc;
}

// ---------------------------------------------------------------------------
// Disjoint-label coupling fixture

// An engineered corpus where the coupling of representative fidelity and
// traversal style is decided by construction:
//   - each block has `visible` atoms carrying the block's topic word and
//     `silent` atoms of pure filler (no query-visible token),
//   - entity labels come from a vocabulary disjoint from every query, so a
//     label representative scores exactly 0 against every query,
//   - all atoms have identical token counts, making budget selection a pure
//     rank prefix.
// Under label representatives, collapsed search can only surface the
// individually visible atoms, while top-down expansion reaches the silent
// ones; under concat representatives collapsed search expands whole blocks.
struct CtFixture {
    UnitGraph atoms;  // hashed-BOW embeddings over content
    Grouping blocks;
    std::vector<PlantedQuery> queries;  // one per block, text = topic word
    std::vector<std::string> labels;    // per-block entity label (disjoint vocab)
    int visible = 0, silent = 0;
    std::size_t atom_tokens = 0;
    std::size_t corpus_tokens = 0;
};

inline CtFixture gen_ct_fixture(int blocks = 4, int visible = 3, int silent = 3,
                                std::size_t dim = kDefaultEmbeddingDim) {
    if (blocks < 2 || visible < 1 || silent < 1) {
        throw ConfigError("fixture needs >= 2 blocks and >= 1 visible and silent atom each");
    }
    CtFixture fx;
    fx.visible = visible;
    fx.silent = silent;
    const EmbedFn embed = hashed_bow_embedder(dim);

    // fillers must stay invisible to every query: skip any filler token whose
    // hash bucket collides with a topic token's bucket
    std::vector<std::vector<double>> topic_vecs;
    for (int b = 0; b < blocks; ++b) {
        topic_vecs.push_back(embed("topic" + std::to_string(b)));
    }
    int filler = 0;
    auto next_filler = [&]() {
        for (;;) {
            const std::string tok = "filler" + std::to_string(filler++);
            const std::vector<double> v = embed(tok);
            bool clean = true;
            for (const auto& tv : topic_vecs) {
                double d = 0.0;
                for (std::size_t i = 0; i < v.size(); ++i) d += v[i] * tv[i];
                if (d != 0.0) {
                    clean = false;
                    break;
                }
            }
            if (clean) return tok;
        }
    };
    for (int b = 0; b < blocks; ++b) {
        const std::string topic = "topic" + std::to_string(b);
        const std::string label = "tag" + std::to_string(b);
        fx.labels.push_back(label);
        PlantedQuery q;
        q.text = topic;
        q.embedding = embed(topic);
        for (int j = 0; j < visible + silent; ++j) {
            std::string content;
            if (j < visible) {
                content = topic;
                for (int f = 0; f < 3; ++f) content += ' ' + next_filler();
            } else {
                content = next_filler();
                for (int f = 0; f < 3; ++f) content += ' ' + next_filler();
            }
            Unit u = Unit::make("b" + std::to_string(b) + "u" + detail::padded(j, 2), content);
            u.embedding = embed(u.content);
            u.entities = {label};
            fx.atom_tokens = u.token_count;
            fx.corpus_tokens += u.token_count;
            const std::string id = u.id;
            fx.atoms.add_unit(std::move(u));
            fx.blocks.assignment[id] = {b};
            q.relevant.insert(id);
        }
        fx.queries.push_back(std::move(q));
    }
    fx.blocks.m = blocks;
    return fx;
}

// ---------------------------------------------------------------------------
// Routing channels (Fano testbed)

struct RoutingTask {
    JointTable table;  // variables Z (group index) and O (observed evidence)
    int n_k = 0;
    int symbols = 0;   // |range(O)|
    double i_zo = 0.0;
};

// Z uniform over n_k groups; O quantizes Z to min(2^bits, n_k) symbols, then
// an optional uniform-noise channel replaces O with probability `noise`.
inline RoutingTask gen_routing_task(int n_k, int representative_bits, double noise = 0.0) {
    if (n_k < 2) throw InvalidGroupCount("need n_k >= 2");
    if (representative_bits < 0) throw ConfigError("bits must be >= 0");
    if (noise < 0.0 || noise >= 1.0) throw ConfigError("noise must be in [0,1)");
    RoutingTask task;
    task.n_k = n_k;
    long long m = 1;
    for (int i = 0; i < representative_bits && m < n_k; ++i) m *= 2;
    task.symbols = static_cast<int>(std::min<long long>(m, n_k));
    task.table.variables = {"Z", "O"};
    for (int z = 0; z < n_k; ++z) {
        const int det = static_cast<int>(static_cast<long long>(z) * task.symbols / n_k);
        for (int o = 0; o < task.symbols; ++o) {
            double p = noise / task.symbols;
            if (o == det) p += 1.0 - noise;
            p /= n_k;
            if (p > 0.0) task.table.rows.push_back({{z, o}, p});
        }
    }
    task.table.validate();
    task.i_zo = mutual_information(task.table, {"Z"}, {"O"});
    return task;
}

// ---------------------------------------------------------------------------
// Fixed text corpus for the cross-entropy proxy

// Small grouped corpus with repeated within-group phrasing and per-group
// labels from a vocabulary that never appears in the sentences.
struct BigramFixture {
    std::vector<std::string> corpus;                 // all sentences
    std::vector<std::vector<std::string>> groups;    // member contents, id order
    std::vector<std::string> labels;                 // one out-of-corpus label per group
};

inline BigramFixture bigram_fixture() {
    BigramFixture fx;
    fx.groups = {
        {"the red fox runs through the quiet forest",
         "the red fox sleeps near the old oak",
         "a young red fox hunts in the forest"},
        {"a blue whale swims across the open sea",
         "the blue whale dives below the cold waves",
         "one blue whale sings under the sea"},
        {"green turtles crawl along the warm sand",
         "the green turtles rest upon the sunny rocks",
         "small green turtles hatch near the warm shore"},
    };
    fx.labels = {"tagfox", "tagwhale", "tagturtle"};
    for (const auto& g : fx.groups) {
        for (const auto& s : g) fx.corpus.push_back(s);
    }
    fx.corpus.push_back("rivers flow and seasons turn while animals wander far");
    fx.corpus.push_back("every creature keeps its own small corner of the world");
    return fx;
}

}  // namespace hiermem
