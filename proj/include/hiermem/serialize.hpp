#pragma once
// JSON persistence for hierarchies. One self-describing document:
// {version, levels, child_edges, provenance}. Ids are strings; floats are
// written by nlohmann's shortest round-trip formatter, so values reload
// bit-identically.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hiermem/core.hpp"
#include "hiermem/errors.hpp"

namespace hiermem {

inline constexpr int kHierarchyFormatVersion = 1;

inline nlohmann::json unit_to_json(const Unit& u) {
    nlohmann::json j;
    j["id"] = u.id;
    j["content"] = u.content;
    j["embedding"] = u.embedding;
    if (u.timestamp) {
        j["timestamp"] = *u.timestamp;
    } else {
        j["timestamp"] = nullptr;
    }
    j["entities"] = u.entities;
    j["path"] = u.path;
    j["token_count"] = u.token_count;
    return j;
}

inline Unit unit_from_json(const nlohmann::json& j) {
    Unit u = Unit::make(j.at("id").get<std::string>(), j.at("content").get<std::string>());
    u.embedding = j.at("embedding").get<std::vector<double>>();
    if (!j.at("timestamp").is_null()) u.timestamp = j.at("timestamp").get<std::int64_t>();
    for (const auto& e : j.at("entities")) u.entities.insert(e.get<std::string>());
    u.path = j.at("path").get<std::vector<std::string>>();
    if (j.contains("token_count") &&
        j.at("token_count").get<std::size_t>() != u.token_count) {
        throw InvalidHierarchyFile("stored token_count for '" + u.id +
                                   "' disagrees with recount");
    }
    return u;
}

inline nlohmann::json graph_to_json(const UnitGraph& g) {
    nlohmann::json j;
    j["units"] = nlohmann::json::array();
    for (const auto& u : g.units()) j["units"].push_back(unit_to_json(u));
    j["edges"] = nlohmann::json::array();
    for (const auto& e : g.edges()) {
        j["edges"].push_back({{"source", e.source},
                              {"target", e.target},
                              {"weight", e.weight},
                              {"p", e.existence_probability},
                              {"kind", to_string(e.kind)}});
    }
    return j;
}

inline UnitGraph graph_from_json(const nlohmann::json& j) {
    UnitGraph g;
    for (const auto& uj : j.at("units")) g.add_unit(unit_from_json(uj));
    for (const auto& ej : j.at("edges")) {
        Edge e;
        e.source = ej.at("source").get<std::string>();
        e.target = ej.at("target").get<std::string>();
        e.weight = ej.at("weight").get<double>();
        e.existence_probability = ej.at("p").get<double>();
        e.kind = edge_kind_from_string(ej.at("kind").get<std::string>());
        g.add_edge(std::move(e));
    }
    return g;
}

inline nlohmann::json hierarchy_to_json(const Hierarchy& h) {
    nlohmann::json j;
    j["version"] = kHierarchyFormatVersion;
    j["levels"] = nlohmann::json::array();
    for (const auto& lvl : h.levels()) j["levels"].push_back(graph_to_json(lvl));
    j["child_edges"] = nlohmann::json::array();
    for (int l = 0; l <= h.depth(); ++l) {
        nlohmann::json cm = nlohmann::json::object();
        if (l >= 1) {
            for (const auto& [parent, kids] : h.child_map(l)) cm[parent] = kids;
        }
        j["child_edges"].push_back(cm);
    }
    j["provenance"] = nlohmann::json::array();
    for (const auto& p : h.provenance()) {
        j["provenance"].push_back({{"grouping", p.grouping},
                                   {"rho", p.rho},
                                   {"ss_class", to_string(p.ss_class)}});
    }
    return j;
}

inline Hierarchy hierarchy_from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<int>() != kHierarchyFormatVersion) {
            throw InvalidHierarchyFile("unsupported version " +
                                       j.at("version").dump());
        }
        const auto& levels = j.at("levels");
        const auto& child_edges = j.at("child_edges");
        const auto& provenance = j.at("provenance");
        if (levels.empty() || levels.size() != child_edges.size() ||
            levels.size() != provenance.size()) {
            throw InvalidHierarchyFile("levels / child_edges / provenance lengths disagree");
        }
        Hierarchy h(graph_from_json(levels[0]));
        for (std::size_t l = 1; l < levels.size(); ++l) {
            std::map<std::string, std::vector<std::string>> cm;
            for (auto it = child_edges[l].begin(); it != child_edges[l].end(); ++it) {
                cm[it.key()] = it.value().get<std::vector<std::string>>();
            }
            LevelProvenance prov;
            prov.grouping = provenance[l].at("grouping").get<std::string>();
            prov.rho = provenance[l].at("rho").get<std::string>();
            prov.ss_class = ss_class_from_string(provenance[l].at("ss_class").get<std::string>());
            h.push_level(graph_from_json(levels[l]), std::move(cm), std::move(prov));
        }
        return h;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidHierarchyFile(e.what());
    }
}

inline void save_hierarchy(const Hierarchy& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << hierarchy_to_json(h).dump(2) << "\n";
}

inline Hierarchy load_hierarchy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidHierarchyFile("cannot read '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidHierarchyFile(std::string("parse error: ") + e.what());
    }
    return hierarchy_from_json(j);
}

}  // namespace hiermem
