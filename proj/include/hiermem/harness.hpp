#pragma once
// User-facing surface: JSON configs, the build/query/experiment/measure
// runners behind the CLI subcommands, CSV metrics, and report assembly.
// All outputs are deterministic functions of (inputs, config, seed); CSV
// bytes are stable across runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiermem/coarsen.hpp"
#include "hiermem/core.hpp"
#include "hiermem/errors.hpp"
#include "hiermem/extract.hpp"
#include "hiermem/generator_client.hpp"
#include "hiermem/measure.hpp"
#include "hiermem/parallel.hpp"
#include "hiermem/serialize.hpp"
#include "hiermem/synthworld.hpp"
#include "hiermem/traverse.hpp"

namespace hiermem {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Small helpers

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << content;
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("bad " + what + ": " + e.what());
    }
}

inline json load_json_file(const std::string& path) {
    return parse_json(read_text_file(path), path);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("field '" + key + "': " + e.what());
    }
}

inline std::string csv_float(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Grouping and rho configuration

struct GroupingCfg {
    std::string kind = "kmeans";  // kmeans|modularity|path_prefix|temporal|truth
    int k = 0;                    // kmeans cluster count (0: use divide)
    int divide = 4;               // kmeans k = max(2, n/divide) when k == 0
    double overlap_eps = 0.0;
    double resolution = 1.0;      // modularity
    std::size_t depth = 1;        // path_prefix
    double gap = 3600.0;          // temporal, seconds
};

inline GroupingCfg grouping_cfg_from_json(const json& j) {
    GroupingCfg g;
    g.kind = get_or<std::string>(j, "kind", "kmeans");
    g.k = get_or<int>(j, "k", 0);
    g.divide = get_or<int>(j, "divide", 4);
    g.overlap_eps = get_or<double>(j, "overlap_eps", 0.0);
    g.resolution = get_or<double>(j, "resolution", 1.0);
    g.depth = get_or<std::size_t>(j, "depth", 1);
    g.gap = get_or<double>(j, "gap", 3600.0);
    return g;
}

// `truth` is resolved by the caller (preset corpora only).
inline std::function<Grouping(const UnitGraph&)> make_grouping_fn(const GroupingCfg& cfg,
                                                                  std::uint64_t seed) {
    if (cfg.kind == "kmeans") {
        return [cfg, seed](const UnitGraph& g) {
            int k = cfg.k;
            if (k <= 0) k = std::max(2, static_cast<int>(g.size()) / std::max(1, cfg.divide));
            return group_kmeans(g, k, seed, cfg.overlap_eps);
        };
    }
    if (cfg.kind == "modularity") {
        return [cfg, seed](const UnitGraph& g) { return group_modularity(g, seed, cfg.resolution); };
    }
    if (cfg.kind == "path_prefix") {
        return [cfg](const UnitGraph& g) { return group_by_path_prefix(g, cfg.depth); };
    }
    if (cfg.kind == "temporal") {
        return [cfg](const UnitGraph& g) { return group_temporal(g, cfg.gap); };
    }
    throw ConfigError("unknown grouping kind '" + cfg.kind + "'");
}

inline RhoSpec rho_spec_from_json(const json& j) {
    RhoSpec spec;
    spec.kind = rho_kind_from_string(get_or<std::string>(j, "kind", "concat"));
    spec.k = get_or<int>(j, "k", 8);
    spec.max_tokens = get_or<int>(j, "max_tokens", 64);
    spec.external_class = ss_class_from_string(get_or<std::string>(j, "external_class", "high"));
    return spec;
}

// Owns whatever client the endpoint config asks for.
inline std::unique_ptr<GeneratorClient> make_generator(const json& j) {
    if (j.contains("http")) {
        const json& h = j.at("http");
        return std::make_unique<HttpGeneratorClient>(
            get_or<std::string>(h, "host", "127.0.0.1"), get_or<int>(h, "port", 8080),
            get_or<std::string>(h, "path", "/generate"), get_or<int>(h, "timeout_seconds", 5));
    }
    if (j.contains("command")) {
        return std::make_unique<CommandGeneratorClient>(j.at("command").get<std::string>());
    }
    throw ConfigError("external rho needs an 'endpoint' with 'http' or 'command'");
}

// ---------------------------------------------------------------------------
// Corpus loading

struct CorpusBundle {
    UnitGraph atoms;
    std::optional<Grouping> truth;     // preset ground truth when available
    std::vector<PlantedQuery> queries; // preset or spec-supplied evaluation queries
};

inline UnitGraph merge_graphs(std::vector<UnitGraph> parts) {
    UnitGraph out;
    for (auto& g : parts) {
        for (const auto& u : g.units()) out.add_unit(u);
        for (const auto& e : g.edges()) out.add_edge(e);
    }
    return out;
}

inline UnitGraph extract_files(const std::vector<std::string>& paths,
                               const std::string& extractor, int chunk_tokens) {
    if (paths.empty()) throw ConfigError("no input paths");
    std::vector<UnitGraph> parts;
    if (extractor == "trace") {
        if (paths.size() != 1) throw ConfigError("trace extraction takes exactly one file");
        return segment_trace(parse_trace_text(read_text_file(paths[0])));
    }
    for (const auto& p : paths) {
        RawDocument doc;
        doc.source_id = p.substr(p.find_last_of('/') + 1);
        doc.text = read_text_file(p);
        if (extractor == "chunk") {
            parts.push_back(chunk_fixed(doc, chunk_tokens));
        } else if (extractor == "structural") {
            doc.structure_hints = parse_structure_hints_json(read_text_file(p + ".hints.json"));
            parts.push_back(parse_structural(doc));
        } else {
            throw ConfigError("unknown extractor '" + extractor + "'");
        }
    }
    return merge_graphs(std::move(parts));
}

inline CorpusBundle load_corpus(const json& j, std::uint64_t seed) {
    CorpusBundle bundle;
    const std::string kind = get_or<std::string>(j, "kind", "files");
    if (kind == "preset") {
        const std::string preset = get_or<std::string>(j, "preset", "two-block");
        if (preset == "two-block") {
            PlantedCorpus pc = gen_planted_corpus(
                get_or<int>(j, "blocks", 2), get_or<int>(j, "units_per_block", 8),
                get_or<int>(j, "dim", 16), get_or<double>(j, "noise", 0.05), seed);
            bundle.atoms = std::move(pc.atoms);
            bundle.truth = std::move(pc.truth);
            bundle.queries = std::move(pc.queries);
        } else if (preset == "ct-fixture") {
            CtFixture fx = gen_ct_fixture(get_or<int>(j, "blocks", 4),
                                          get_or<int>(j, "visible", 3),
                                          get_or<int>(j, "silent", 3));
            bundle.atoms = std::move(fx.atoms);
            bundle.truth = std::move(fx.blocks);
            bundle.queries = std::move(fx.queries);
        } else {
            throw ConfigError("unknown preset '" + preset + "'");
        }
        return bundle;
    }
    if (kind != "files") throw ConfigError("corpus kind must be 'files' or 'preset'");
    bundle.atoms = extract_files(get_or<std::vector<std::string>>(j, "paths", {}),
                                 get_or<std::string>(j, "extractor", "chunk"),
                                 get_or<int>(j, "chunk_tokens", 100));
    if (j.contains("queries")) {
        for (const auto& q : j.at("queries")) {
            PlantedQuery pq;
            pq.text = q.at("text").get<std::string>();
            for (const auto& r : q.value("relevant", json::array())) {
                pq.relevant.insert(r.get<std::string>());
            }
            bundle.queries.push_back(std::move(pq));
        }
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// build

struct BuildReport {
    std::vector<std::size_t> level_sizes;
    std::vector<std::string> gammas;  // printable per-level coherence gap (or n/a)
    int required_depth = 0;
    bool depth_ok = true;
    std::vector<std::string> lines;   // human-readable log
};

struct BuildOutputs {
    Hierarchy hierarchy;
    BuildReport report;
};

// Gives every coarse node the mean of its children's embeddings, level by
// level as the build proceeds. Used when the atoms carry embeddings that are
// not functions of their text, so the usual content embedder would land
// representatives in the wrong space (and later levels could not cluster).
inline auto centroid_post_level() {
    return [](UnitGraph& level, const std::map<std::string, std::vector<std::string>>& children,
              const UnitGraph& below) {
        const std::size_t dim = below.embedding_dim();
        if (dim == 0) return;
        for (const auto& [parent, kids] : children) {
            std::vector<double> c(dim, 0.0);
            std::size_t n = 0;
            for (const auto& cid : kids) {
                const Unit* u = below.find(cid);
                if (u == nullptr || u->embedding.size() != dim) continue;
                for (std::size_t i = 0; i < dim; ++i) c[i] += u->embedding[i];
                ++n;
            }
            Unit* rep = level.find_mut(parent);
            if (n > 0 && rep != nullptr) {
                for (double& x : c) x /= static_cast<double>(n);
                rep->embedding = std::move(c);
            }
        }
    };
}

// Reconstructs the grouping a level was built from (parents in id order).
inline Grouping grouping_of_level(const Hierarchy& h, int level) {
    const auto& cm = h.child_map(level);
    Grouping g;
    g.m = static_cast<int>(cm.size());
    int idx = 0;
    for (const auto& [parent, children] : cm) {
        for (const auto& c : children) g.assignment[c].insert(idx);
        ++idx;
    }
    return g;
}

inline BuildOutputs run_build(const json& cfg, std::optional<std::uint64_t> seed_override) {
    const std::uint64_t seed = seed_override.value_or(get_or<std::uint64_t>(cfg, "seed", 0));
    CorpusBundle corpus = load_corpus(cfg.contains("input") ? cfg.at("input") : json::object(),
                                      seed);

    const int dim = get_or<int>(cfg, "embed_dim", static_cast<int>(kDefaultEmbeddingDim));
    const EmbedFn embedder = hashed_bow_embedder(static_cast<std::size_t>(dim));
    if (corpus.atoms.embedding_dim() == 0) {
        corpus.atoms = embed_units(std::move(corpus.atoms), embedder);
    }
    const auto dictionary = get_or<std::vector<std::string>>(cfg, "entity_dictionary", {});
    if (!dictionary.empty()) {
        apply_entity_dictionary(corpus.atoms,
                                std::set<std::string>(dictionary.begin(), dictionary.end()));
    }

    if (!cfg.contains("levels") || cfg.at("levels").empty()) {
        throw ConfigError("config has zero levels");
    }
    CorpusStats stats = corpus_stats(corpus.atoms);
    std::vector<std::unique_ptr<GeneratorClient>> clients;
    std::vector<LevelSpec> specs;
    for (const auto& lvl : cfg.at("levels")) {
        LevelSpec spec;
        GroupingCfg gcfg = grouping_cfg_from_json(lvl.value("grouping", json::object()));
        if (gcfg.kind == "truth") {
            if (!corpus.truth) throw ConfigError("'truth' grouping needs a preset corpus");
            Grouping truth = *corpus.truth;
            spec.group = [truth](const UnitGraph&) { return truth; };
        } else {
            spec.group = make_grouping_fn(gcfg, seed);
        }
        spec.grouping_tag = gcfg.kind;
        RhoSpec rspec = rho_spec_from_json(lvl.value("rho", json::object()));
        GeneratorClient* client = nullptr;
        if (rspec.kind == RhoKind::external) {
            clients.push_back(make_generator(lvl.value("endpoint", json::object())));
            client = clients.back().get();
        }
        spec.rho = rho_from_spec(rspec, &stats, client);
        specs.push_back(std::move(spec));
    }

    // representatives live in the same space as the atoms: either embed their
    // content (text-derived spaces) or average their members (geometric ones)
    const std::string rep_embed = get_or<std::string>(cfg, "rep_embed", "content");
    BuildOptions bopts;
    if (rep_embed == "content") {
        bopts.embed = corpus.atoms.embedding_dim() == static_cast<std::size_t>(dim)
                          ? embedder
                          : hashed_bow_embedder(corpus.atoms.embedding_dim());
    } else if (rep_embed == "centroid") {
        bopts.post_level = centroid_post_level();
    } else {
        throw ConfigError("rep_embed must be 'content' or 'centroid'");
    }
    bopts.threads = resolve_threads(get_or<int>(cfg, "threads", 0));

    BuildOutputs out{build_hierarchy(corpus.atoms, specs, bopts), {}};

    auto& rep = out.report;
    for (int l = 0; l <= out.hierarchy.depth(); ++l) {
        rep.level_sizes.push_back(out.hierarchy.level(l).size());
    }
    for (int l = 1; l <= out.hierarchy.depth(); ++l) {
        std::string gamma = "n/a";
        try {
            const AffinityMatrix w = affinity_cosine(out.hierarchy.level(l - 1));
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f",
                          coherence_gap(w, grouping_of_level(out.hierarchy, l)));
            gamma = buf;
        } catch (const Error&) {
        }
        rep.gammas.push_back(gamma);
    }

    std::size_t n_tokens = 0;
    for (const auto& u : out.hierarchy.level(0).units()) n_tokens += u.token_count;
    const int context = get_or<int>(cfg, "context_tokens", 1024);
    const int depth = out.hierarchy.depth();
    if (depth >= 1) {
        const double ratio =
            std::pow(static_cast<double>(out.hierarchy.level(0).size()) /
                         static_cast<double>(out.hierarchy.level(depth).size()),
                     1.0 / depth);
        if (ratio > 1.0 && n_tokens >= 1) {
            rep.required_depth = min_depth(static_cast<double>(std::max<std::size_t>(1, n_tokens)),
                                           static_cast<double>(std::max(1, context)), ratio);
            rep.depth_ok = depth >= rep.required_depth;
        }
    }

    rep.lines.push_back("levels: " + std::to_string(depth + 1));
    for (std::size_t l = 0; l < rep.level_sizes.size(); ++l) {
        std::string line = "  V_" + std::to_string(l) + ": " +
                           std::to_string(rep.level_sizes[l]) + " nodes";
        if (l >= 1) line += ", gamma=" + rep.gammas[l - 1];
        rep.lines.push_back(line);
    }
    if (!rep.depth_ok) {
        rep.lines.push_back("warning: depth " + std::to_string(depth) +
                            " < required min depth " + std::to_string(rep.required_depth) +
                            " for context " + std::to_string(context));
    }
    return out;
}

// ---------------------------------------------------------------------------
// query

inline Query query_from_json(const json& j, const Hierarchy& h) {
    Query q;
    q.text = get_or<std::string>(j, "text", "");
    q.terms = whitespace_tokenize(q.text);
    const std::size_t dim = h.level(0).embedding_dim();
    if (dim > 0) q.embedding = hashed_bow_embedder(dim)(q.text);
    if (j.contains("filters")) {
        const json& f = j.at("filters");
        for (const auto& e : f.value("entities", json::array())) {
            q.entities.insert(e.get<std::string>());
        }
        if (f.contains("time")) {
            const auto& t = f.at("time");
            if (!t.is_array() || t.size() != 2) throw ConfigError("filters.time must be [lo, hi]");
            q.time_range = {t[0].get<std::int64_t>(), t[1].get<std::int64_t>()};
        }
        for (const auto& p : f.value("path_prefix", json::array())) {
            q.path_prefix.push_back(p.get<std::string>());
        }
    }
    q.budget = get_or<std::size_t>(j, "budget", 256);
    q.k = get_or<int>(j, "k", 4);
    q.d = get_or<int>(j, "d", 4);
    q.max_steps = get_or<int>(j, "max_steps", 32);
    q.beams = get_or<std::vector<int>>(j, "beams", {});
    if (q.beams.empty()) {
        for (int l = h.depth(); l >= 0; --l) {
            q.beams.push_back(static_cast<int>(h.level(l).size()));
        }
    }
    return q;
}

inline RetrievalResult dispatch_traversal(const Hierarchy& h, const Query& q,
                                          const std::string& algorithm) {
    if (algorithm == "topdown") return traverse_top_down(h, q);
    if (algorithm == "collapsed") return traverse_collapsed(h, q, q.k);
    if (algorithm == "navigate") return traverse_navigate(h, q);
    if (algorithm == "multiview") return traverse_multiview(h, q);
    throw UnknownAlgorithm("'" + algorithm + "' (want topdown|collapsed|navigate|multiview)");
}

inline json result_to_json(const RetrievalResult& r, const std::string& algorithm) {
    json trace = json::array();
    for (const auto& v : r.visit_trace) trace.push_back({{"level", v.level}, {"id", v.id}});
    return json{{"algorithm", algorithm},
                {"atoms", r.atoms},
                {"tokens_used", r.tokens_used},
                {"relevance_evals", r.relevance_evals},
                {"visit_trace", trace}};
}

inline json run_query(const Hierarchy& h, const json& query_json) {
    const std::string algorithm = get_or<std::string>(query_json, "algorithm", "topdown");
    const Query q = query_from_json(query_json, h);
    return result_to_json(dispatch_traversal(h, q, algorithm), algorithm);
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentCell {
    std::string rho;
    std::string tau;
    std::size_t budget = 0;
    double recall = 0.0;
    double precision = 0.0;
    double tokens_used = 0.0;
    double relevance_evals = 0.0;
};

struct ExperimentOutputs {
    std::vector<ExperimentCell> cells;
    std::string csv;
    json summary;
};

inline ExperimentOutputs run_experiment(const json& spec,
                                        std::optional<std::uint64_t> seed_override) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::uint64_t> seeds = get_or<std::vector<std::uint64_t>>(spec, "seeds", {0});
    if (seed_override) seeds = {*seed_override};
    if (seeds.empty()) throw ConfigError("need at least one seed");

    std::vector<RhoSpec> rhos;
    for (const auto& r : spec.value("rhos", json::array())) rhos.push_back(rho_spec_from_json(r));
    std::vector<std::string> taus = get_or<std::vector<std::string>>(spec, "taus", {});
    if (rhos.empty() || taus.empty()) throw ConfigError("need at least one rho and one tau");

    // budgets: absolute list, or fractions of the corpus token count
    std::vector<std::size_t> budgets = get_or<std::vector<std::size_t>>(spec, "budgets", {});
    const std::vector<double> fractions = get_or<std::vector<double>>(spec, "budget_fractions", {});

    const json corpus_cfg = spec.contains("corpus") ? spec.at("corpus") : json::object();
    std::vector<GroupingCfg> gcfgs;
    for (const auto& g : spec.value("groupings", json::array())) {
        gcfgs.push_back(grouping_cfg_from_json(g));
    }
    if (gcfgs.empty()) gcfgs.push_back(GroupingCfg{.kind = "truth"});

    struct Acc {
        double recall = 0, precision = 0, tokens = 0, evals = 0;
        std::size_t n = 0;
    };
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, Acc> acc;  // rho, tau, budget

    for (const std::uint64_t seed : seeds) {
        CorpusBundle corpus = load_corpus(corpus_cfg, seed);
        if (corpus.queries.empty()) throw ConfigError("experiment corpus has no queries");
        if (corpus.atoms.embedding_dim() == 0) {
            corpus.atoms = embed_units(
                std::move(corpus.atoms),
                hashed_bow_embedder(get_or<std::size_t>(spec, "embed_dim", kDefaultEmbeddingDim)));
        }
        std::size_t corpus_tokens = 0;
        for (const auto& u : corpus.atoms.units()) corpus_tokens += u.token_count;
        std::vector<std::size_t> cell_budgets = budgets;
        for (double f : fractions) {
            cell_budgets.push_back(static_cast<std::size_t>(f * corpus_tokens));
        }
        if (cell_budgets.empty()) throw ConfigError("need budgets or budget_fractions");
        for (std::size_t i = 0; i < cell_budgets.size(); ++i) {
            if (cell_budgets[i] == 0 || (i > 0 && cell_budgets[i] <= cell_budgets[i - 1])) {
                throw ConfigError("budgets must be positive and ascending");
            }
        }

        CorpusStats stats = corpus_stats(corpus.atoms);
        for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
            std::vector<LevelSpec> specs;
            for (const auto& gcfg : gcfgs) {
                LevelSpec ls;
                if (gcfg.kind == "truth") {
                    if (!corpus.truth) throw ConfigError("'truth' grouping needs a preset corpus");
                    Grouping truth = *corpus.truth;
                    ls.group = [truth](const UnitGraph&) { return truth; };
                } else {
                    ls.group = make_grouping_fn(gcfg, seed);
                }
                ls.grouping_tag = gcfg.kind;
                ls.rho = rho_from_spec(rhos[ri], &stats);
                specs.push_back(std::move(ls));
            }
            const std::string rep_embed = get_or<std::string>(spec, "rep_embed", "content");
            BuildOptions bopts;
            if (rep_embed == "content") {
                bopts.embed = hashed_bow_embedder(corpus.atoms.embedding_dim());
            } else if (rep_embed == "centroid") {
                bopts.post_level = centroid_post_level();
            } else {
                throw ConfigError("rep_embed must be 'content' or 'centroid'");
            }
            bopts.threads = resolve_threads(0);
            Hierarchy h = build_hierarchy(corpus.atoms, specs, bopts);

            for (std::size_t ti = 0; ti < taus.size(); ++ti) {
                for (std::size_t bi = 0; bi < cell_budgets.size(); ++bi) {
                    Acc& a = acc[{ri, ti, bi}];
                    for (const auto& pq : corpus.queries) {
                        Query q;
                        q.text = pq.text;
                        q.terms = whitespace_tokenize(pq.text);
                        q.embedding = pq.embedding.empty()
                                          ? hashed_bow_embedder(corpus.atoms.embedding_dim())(pq.text)
                                          : pq.embedding;
                        q.budget = cell_budgets[bi];
                        q.k = get_or<int>(spec, "k", 3);
                        q.d = get_or<int>(spec, "d", 4);
                        q.max_steps = get_or<int>(spec, "max_steps", 32);
                        q.beams = get_or<std::vector<int>>(spec, "beams", {});
                        if (q.beams.empty()) {
                            for (int l = h.depth(); l >= 0; --l) {
                                q.beams.push_back(static_cast<int>(h.level(l).size()));
                            }
                        }
                        const RetrievalResult res = dispatch_traversal(h, q, taus[ti]);
                        std::size_t hit = 0;
                        for (const auto& id : res.atoms) {
                            if (pq.relevant.count(id)) ++hit;
                        }
                        a.recall += pq.relevant.empty()
                                        ? 0.0
                                        : static_cast<double>(hit) / pq.relevant.size();
                        a.precision += res.atoms.empty()
                                           ? 0.0
                                           : static_cast<double>(hit) / res.atoms.size();
                        a.tokens += static_cast<double>(res.tokens_used);
                        a.evals += static_cast<double>(res.relevance_evals);
                        ++a.n;
                    }
                }
            }
        }
    }

    // assemble, ordered by (rho, tau, budget) spec order
    ExperimentOutputs out;
    std::string csv = "rho,tau,budget,recall,precision,tokens_used,relevance_evals\n";
    // resolve printable budget values once (same across seeds by construction)
    std::vector<std::size_t> budget_values;
    {
        CorpusBundle corpus = load_corpus(corpus_cfg, seeds.front());
        std::size_t corpus_tokens = 0;
        for (const auto& u : corpus.atoms.units()) corpus_tokens += u.token_count;
        budget_values = budgets;
        for (double f : fractions) {
            budget_values.push_back(static_cast<std::size_t>(f * corpus_tokens));
        }
    }
    for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
        for (std::size_t ti = 0; ti < taus.size(); ++ti) {
            for (std::size_t bi = 0; bi < budget_values.size(); ++bi) {
                const Acc& a = acc.at({ri, ti, bi});
                ExperimentCell cell;
                cell.rho = rho_tag(rhos[ri]);
                cell.tau = taus[ti];
                cell.budget = budget_values[bi];
                const double n = static_cast<double>(std::max<std::size_t>(1, a.n));
                cell.recall = a.recall / n;
                cell.precision = a.precision / n;
                cell.tokens_used = a.tokens / n;
                cell.relevance_evals = a.evals / n;
                csv += cell.rho + "," + cell.tau + "," + std::to_string(cell.budget) + "," +
                       csv_float(cell.recall) + "," + csv_float(cell.precision) + "," +
                       csv_float(cell.tokens_used) + "," + csv_float(cell.relevance_evals) + "\n";
                out.cells.push_back(std::move(cell));
            }
        }
    }
    out.csv = std::move(csv);

    // summary: does the matched pairing dominate the mismatched one?
    auto find_cell = [&](const std::string& rho, const std::string& tau,
                         std::size_t budget) -> const ExperimentCell* {
        for (const auto& c : out.cells) {
            if (c.rho == rho && c.tau == tau && c.budget == budget) return &c;
        }
        return nullptr;
    };
    std::string high_rho, low_rho;
    for (const auto& r : rhos) {
        if (high_rho.empty() && declared_class(r) == SsClass::high) high_rho = rho_tag(r);
        if (low_rho.empty() && declared_class(r) == SsClass::low) low_rho = rho_tag(r);
    }
    json per_budget = json::array();
    const bool have_pair = !high_rho.empty() && !low_rho.empty() &&
                           std::count(taus.begin(), taus.end(), "topdown") &&
                           std::count(taus.begin(), taus.end(), "collapsed");
    for (std::size_t budget : budget_values) {
        json entry{{"budget", budget}};
        if (have_pair) {
            const auto* hc = find_cell(high_rho, "collapsed", budget);
            const auto* ht = find_cell(high_rho, "topdown", budget);
            const auto* lc = find_cell(low_rho, "collapsed", budget);
            const auto* lt = find_cell(low_rho, "topdown", budget);
            if (hc && ht && lc && lt) {
                entry["matched"] = {{"high_collapsed_recall", hc->recall},
                                    {"low_topdown_recall", lt->recall}};
                entry["mismatched"] = {{"high_topdown_recall", ht->recall},
                                       {"low_collapsed_recall", lc->recall}};
                entry["high_ss_prefers_collapsed"] = hc->recall >= ht->recall;
                entry["low_ss_needs_topdown"] = lt->recall >= lc->recall;
            }
        }
        per_budget.push_back(std::move(entry));
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.summary = json{{"cells", out.cells.size()},
                       {"seeds", seeds},
                       {"per_budget", per_budget},
                       {"wall_time_seconds", wall}};
    return out;
}

// ---------------------------------------------------------------------------
// measure

inline std::vector<CoarseningMap> maps_from_json(const json& arr, const DiscreteWorld* world) {
    std::vector<CoarseningMap> maps;
    for (const auto& m : arr) {
        const std::string kind = get_or<std::string>(m, "kind", "xor_pairs");
        if (kind == "tree_xor") {
            if (!world) throw ConfigError("tree_xor maps need a generated world");
            for (auto& tm : tree_xor_maps(*world)) maps.push_back(std::move(tm));
        } else if (kind == "xor_pairs") {
            maps.push_back(xor_pairs_map());
        } else if (kind == "group_xor" || kind == "group_first") {
            std::vector<std::vector<std::size_t>> groups;
            for (const auto& g : m.value("groups", json::array())) {
                groups.push_back(g.get<std::vector<std::size_t>>());
            }
            if (groups.empty()) throw ConfigError("'" + kind + "' needs groups");
            maps.push_back(kind == "group_xor" ? group_xor_map(std::move(groups))
                                               : group_first_map(std::move(groups)));
        } else if (kind == "relabel") {
            std::vector<int> arities = get_or<std::vector<int>>(m, "arities", {});
            if (arities.empty() && world) {
                arities.assign(world->atom_vars.size(), world->emission_symbols);
            }
            if (arities.empty()) throw ConfigError("'relabel' needs arities");
            maps.push_back(relabel_map(std::move(arities)));
        } else {
            throw ConfigError("unknown map kind '" + kind + "'");
        }
    }
    return maps;
}

struct MeasureOutputs {
    json report;
    bool ok = true;
};

inline MeasureOutputs run_measure(const json& cfg, std::optional<std::uint64_t> seed_override) {
    MeasureOutputs out;
    out.report = json::object();

    std::optional<DiscreteWorld> world;
    JointTable table;
    std::vector<std::string> atom_vars, query_vars;
    if (cfg.contains("world")) {
        const json& wj = cfg.at("world");
        WorldSpec spec;
        spec.arities = get_or<std::vector<int>>(wj, "arities", {2, 2});
        spec.branchings = get_or<std::vector<int>>(wj, "branchings", {4});
        spec.emission_entropy = get_or<double>(wj, "emission_entropy", 0.0);
        spec.emission_symbols = get_or<int>(wj, "emission_symbols", 0);
        spec.seed = seed_override.value_or(get_or<std::uint64_t>(wj, "seed", 0));
        world = gen_world(spec);
        table = world->joint;
        atom_vars = world->atom_vars;
        query_vars = {get_or<std::string>(cfg, "query_var", world->latent_vars[0][0])};
    } else if (cfg.contains("table")) {
        table = load_joint_table(cfg.at("table").get<std::string>());
        atom_vars = get_or<std::vector<std::string>>(cfg, "atom_vars", table.variables);
        query_vars = get_or<std::vector<std::string>>(cfg, "query_vars", {table.variables.front()});
    } else {
        throw ConfigError("measure config needs 'world' or 'table'");
    }

    if (cfg.contains("maps") || world) {
        json maps_json = cfg.value("maps", json::array({{{"kind", "tree_xor"}}}));
        const auto maps = maps_from_json(maps_json, world ? &*world : nullptr);
        const MonotonicityReport rep =
            check_monotonicity(table, atom_vars, maps, query_vars);
        out.report["monotonicity"] = {{"h", rep.h},          {"i_q", rep.i_q},
                                      {"lossy", rep.lossy},  {"entropy_ok", rep.entropy_ok},
                                      {"dpi_ok", rep.dpi_ok}, {"notes", rep.notes}};
        if (!rep.ok()) out.ok = false;
    }

    if (cfg.contains("fano")) {
        const json& f = cfg.at("fano");
        const double b = get_or<double>(f, "b_bits", 3.0);
        const double eps = get_or<double>(f, "epsilon", 0.0);
        out.report["fano"] = {{"b_bits", b},
                              {"epsilon", eps},
                              {"max_groups", fano_max_groups(b, eps)}};
    }

    if (cfg.contains("routing")) {
        const json& r = cfg.at("routing");
        const RoutingTask task =
            gen_routing_task(get_or<int>(r, "n_k", 8), get_or<int>(r, "bits", 3),
                             get_or<double>(r, "noise", 0.0));
        const double err = bayes_error(task.table, {"Z"}, {"O"});
        const double bound = fano_error_lower_bound(task.i_zo, task.n_k);
        const bool consistent = err >= bound - 1e-9;
        out.report["routing"] = {{"n_k", task.n_k},         {"symbols", task.symbols},
                                 {"i_zo", task.i_zo},       {"bayes_error", err},
                                 {"fano_lower_bound", bound}, {"consistent", consistent}};
        if (!consistent) out.ok = false;
    }

    if (cfg.contains("branching")) {
        const json& b = cfg.at("branching");
        std::optional<double> cap;
        if (b.contains("fano_cap") && !b.at("fano_cap").is_null()) {
            cap = b.at("fano_cap").get<double>();
        }
        const BranchingChoice c = optimal_branching(get_or<double>(b, "n_atoms", 1000.0), cap);
        out.report["branching"] = {{"b_star", c.b_star}, {"l_star", c.l_star}};
    }

    if (cfg.contains("depth")) {
        const json& d = cfg.at("depth");
        out.report["depth"] = {
            {"min_depth", min_depth(get_or<double>(d, "n_tokens", 1.0),
                                    get_or<double>(d, "c_tokens", 1.0),
                                    get_or<double>(d, "ratio", 2.0))}};
    }

    out.report["ok"] = out.ok;
    return out;
}

}  // namespace hiermem
