#pragma once
// Extraction: raw documents, conversation logs and execution traces become
// unit graphs of self-contained atoms. All extractors are pure functions of
// their inputs and configuration.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hiermem/core.hpp"
#include "hiermem/errors.hpp"

namespace hiermem {

// ---------------------------------------------------------------------------
// Inputs

struct StructureHint {
    int level = 1;        // heading depth, 1 = outermost
    std::size_t offset = 0;  // byte offset of the heading line
};

struct RawDocument {
    std::string source_id;
    std::string text;
    std::optional<std::vector<StructureHint>> structure_hints;
};

enum class TraceKind { thought, action, observation };

inline std::string to_string(TraceKind k) {
    switch (k) {
        case TraceKind::thought: return "thought";
        case TraceKind::action: return "action";
        default: return "observation";
    }
}

inline TraceKind trace_kind_from_string(std::string_view s) {
    if (s == "thought") return TraceKind::thought;
    if (s == "action") return TraceKind::action;
    if (s == "observation") return TraceKind::observation;
    throw ConfigError("unknown trace kind '" + std::string(s) + "'");
}

struct TraceEvent {
    int step = 0;
    TraceKind kind = TraceKind::thought;
    std::string payload;
    std::set<int> depends_on;  // strictly earlier steps
};

// ---------------------------------------------------------------------------
// Extractors

// Fixed-size chunking. Chunks never split tokens; the final chunk may be
// short. Adjacent chunks are linked by sequential edges.
inline UnitGraph chunk_fixed(const RawDocument& doc, int chunk_tokens,
                             const Tokenizer& tok = default_tokenizer()) {
    if (chunk_tokens < 1) throw ConfigError("chunk_tokens must be >= 1");
    const std::vector<std::string> tokens = tok(doc.text);
    if (tokens.empty()) throw EmptyDocument("'" + doc.source_id + "' has no tokens");

    UnitGraph g;
    std::vector<std::string> ids;
    for (std::size_t start = 0, ordinal = 0; start < tokens.size();
         start += chunk_tokens, ++ordinal) {
        const std::size_t end = std::min(tokens.size(), start + chunk_tokens);
        std::string content;
        for (std::size_t i = start; i < end; ++i) {
            if (i > start) content += ' ';
            content += tokens[i];
        }
        Unit u = Unit::make(doc.source_id + "#" + std::to_string(ordinal), content, tok);
        u.path = {doc.source_id, std::to_string(ordinal)};
        ids.push_back(u.id);
        g.add_unit(std::move(u));
    }
    for (std::size_t i = 1; i < ids.size(); ++i) {
        g.add_edge({ids[i - 1], ids[i], 1.0, 1.0, EdgeKind::sequential});
    }
    return g;
}

// Structural parse: one unit per leaf section, path = heading trail,
// sequential edges between leaf siblings under the same parent.
inline UnitGraph parse_structural(const RawDocument& doc) {
    if (!doc.structure_hints || doc.structure_hints->empty()) {
        throw MissingStructure("'" + doc.source_id + "' has no structure hints");
    }
    const auto& hints = *doc.structure_hints;
    for (std::size_t i = 0; i < hints.size(); ++i) {
        if (hints[i].offset >= doc.text.size()) {
            throw MissingStructure("hint offset " + std::to_string(hints[i].offset) +
                                   " outside text");
        }
        if (i > 0 && hints[i].offset <= hints[i - 1].offset) {
            throw MissingStructure("hint offsets not strictly increasing");
        }
        if (hints[i].level < 1) throw MissingStructure("heading level must be >= 1");
    }

    auto heading_title = [&](std::size_t offset) {
        std::size_t eol = doc.text.find('\n', offset);
        if (eol == std::string::npos) eol = doc.text.size();
        std::string title = doc.text.substr(offset, eol - offset);
        while (!title.empty() && std::isspace(static_cast<unsigned char>(title.back()))) {
            title.pop_back();
        }
        while (!title.empty() && std::isspace(static_cast<unsigned char>(title.front()))) {
            title.erase(title.begin());
        }
        return title;
    };

    UnitGraph g;
    std::vector<std::pair<int, std::string>> stack;  // (level, title) of open sections
    std::string prev_leaf_id;
    std::vector<std::string> prev_leaf_parent;
    std::size_t leaf_count = 0;
    for (std::size_t i = 0; i < hints.size(); ++i) {
        while (!stack.empty() && stack.back().first >= hints[i].level) stack.pop_back();
        const bool is_leaf = (i + 1 >= hints.size()) || (hints[i + 1].level <= hints[i].level);
        std::vector<std::string> parent_path;
        for (const auto& [lvl, title] : stack) parent_path.push_back(title);
        stack.emplace_back(hints[i].level, heading_title(hints[i].offset));
        if (!is_leaf) continue;

        const std::size_t end =
            (i + 1 < hints.size()) ? hints[i + 1].offset : doc.text.size();
        std::string content = doc.text.substr(hints[i].offset, end - hints[i].offset);
        while (!content.empty() && std::isspace(static_cast<unsigned char>(content.back()))) {
            content.pop_back();
        }
        Unit u = Unit::make(doc.source_id + "#s" + std::to_string(leaf_count++), content);
        u.path = parent_path;
        u.path.push_back(stack.back().second);
        const std::string id = u.id;
        g.add_unit(std::move(u));
        if (!prev_leaf_id.empty() && parent_path == prev_leaf_parent) {
            g.add_edge({prev_leaf_id, id, 1.0, 1.0, EdgeKind::sequential});
        }
        prev_leaf_id = id;
        prev_leaf_parent = parent_path;
    }
    return g;
}

// Trace segmentation: one unit per event, relation edges along depends_on
// (stored earlier -> later), content prefixed by the event kind.
inline UnitGraph segment_trace(const std::vector<TraceEvent>& events) {
    if (events.empty()) throw EmptyDocument("trace has no events");
    std::set<int> seen;
    UnitGraph g;
    for (const auto& ev : events) {
        if (!seen.insert(ev.step).second) {
            throw ConfigError("duplicate step index " + std::to_string(ev.step));
        }
        Unit u = Unit::make("t" + std::to_string(ev.step),
                            to_string(ev.kind) + ": " + ev.payload);
        g.add_unit(std::move(u));
    }
    for (const auto& ev : events) {
        for (int dep : ev.depends_on) {
            if (dep >= ev.step || !seen.count(dep)) {
                throw DanglingDependency("step " + std::to_string(ev.step) +
                                         " depends on " + std::to_string(dep));
            }
            g.add_edge({"t" + std::to_string(dep), "t" + std::to_string(ev.step), 1.0, 1.0,
                        EdgeKind::relation});
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Embedding

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Deterministic hashed bag-of-words, L2 normalized. Not a semantic model,
// but well-behaved: identical texts map to identical vectors and disjoint
// vocabularies are orthogonal up to hash collisions.
inline constexpr std::size_t kDefaultEmbeddingDim = 256;

inline EmbedFn hashed_bow_embedder(std::size_t dim = kDefaultEmbeddingDim,
                                   const Tokenizer& tok = default_tokenizer()) {
    return [dim, tok](const std::string& text) {
        std::vector<double> v(dim, 0.0);
        for (const auto& t : tok(text)) {
            v[fnv1a64(t) % dim] += 1.0;
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
        }
        return v;
    };
}

inline UnitGraph embed_units(UnitGraph graph, const EmbedFn& embedder) {
    std::size_t dim = 0;
    for (const auto& u : graph.units()) {
        Unit* mu = graph.find_mut(u.id);
        mu->embedding = embedder(mu->content);
        if (dim == 0) {
            dim = mu->embedding.size();
        } else if (mu->embedding.size() != dim) {
            throw DimensionMismatch("embedder returned dim " +
                                    std::to_string(mu->embedding.size()) + " for '" +
                                    u.id + "', expected " + std::to_string(dim));
        }
    }
    return graph;
}

// Dictionary entity matcher (stands in for NER): a unit's entities are the
// dictionary terms that appear among its tokens.
inline void apply_entity_dictionary(UnitGraph& graph, const std::set<std::string>& dictionary,
                                    const Tokenizer& tok = default_tokenizer()) {
    for (const auto& u : graph.units()) {
        Unit* mu = graph.find_mut(u.id);
        for (const auto& t : tok(mu->content)) {
            if (dictionary.count(t)) mu->entities.insert(t);
        }
    }
}

inline void apply_entity_regex(UnitGraph& graph, const std::string& pattern) {
    const std::regex re(pattern);
    for (const auto& u : graph.units()) {
        Unit* mu = graph.find_mut(u.id);
        auto begin = std::sregex_iterator(mu->content.begin(), mu->content.end(), re);
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            mu->entities.insert(it->str());
        }
    }
}

// ---------------------------------------------------------------------------
// File formats

// Line-oriented trace format: index<TAB>kind<TAB>deps(comma-sep)<TAB>payload
inline std::vector<TraceEvent> parse_trace_text(const std::string& text) {
    std::vector<TraceEvent> events;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        for (int c = 0; c < 3; ++c) {
            std::size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                throw ConfigError("trace line " + std::to_string(lineno) +
                                  ": expected 4 tab-separated columns");
            }
            cols.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        cols.push_back(line.substr(start));
        TraceEvent ev;
        try {
            ev.step = std::stoi(cols[0]);
        } catch (const std::exception&) {
            throw ConfigError("trace line " + std::to_string(lineno) + ": bad index '" +
                              cols[0] + "'");
        }
        ev.kind = trace_kind_from_string(cols[1]);
        if (!cols[2].empty()) {
            std::size_t dstart = 0;
            while (dstart <= cols[2].size()) {
                std::size_t comma = cols[2].find(',', dstart);
                if (comma == std::string::npos) comma = cols[2].size();
                std::string tok = cols[2].substr(dstart, comma - dstart);
                if (!tok.empty()) ev.depends_on.insert(std::stoi(tok));
                dstart = comma + 1;
            }
        }
        ev.payload = cols[3];
        events.push_back(std::move(ev));
    }
    return events;
}

// Structure hints sidecar: JSON array of {"level": int, "offset": int}.
inline std::vector<StructureHint> parse_structure_hints_json(const std::string& json_text) {
    std::vector<StructureHint> hints;
    try {
        nlohmann::json j = nlohmann::json::parse(json_text);
        for (const auto& h : j) {
            hints.push_back({h.at("level").get<int>(), h.at("offset").get<std::size_t>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw MissingStructure(std::string("bad hints sidecar: ") + e.what());
    }
    return hints;
}

}  // namespace hiermem
