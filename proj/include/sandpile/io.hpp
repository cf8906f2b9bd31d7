#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sandpile/distribution.hpp"
#include "sandpile/dynamics.hpp"
#include "sandpile/errors.hpp"
#include "sandpile/graph.hpp"

namespace sandpile {

using json = nlohmann::json;

// {"n": <int>, "edges": [[u, v], ...]}, sink = index n.
inline json graph_to_json(const GraphTopology& graph) {
    json edges = json::array();
    for (int x = 0; x < graph.vertex_count(); ++x)
        for (int y : graph.neighbors(x))
            if (y >= x) edges.push_back({x, y});
    return json{{"n", graph.vertex_count()}, {"edges", edges}};
}

inline GraphTopology graph_from_json(const json& j) {
    if (!j.contains("n") || !j.contains("edges"))
        throw BadParameter("graph json needs fields \"n\" and \"edges\"");
    EdgeList edges;
    for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2)
            throw BadParameter("graph edges must be [u, v] pairs");
        edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    }
    return build_graph(j.at("n").get<int>(), edges);
}

inline GraphTopology load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw BadParameter("cannot open graph file " + path);
    json j;
    in >> j;
    return graph_from_json(j);
}

// {"k": <int>, "eta": [...], "h": [...]}
inline json config_to_json(const Config& cfg) {
    return json{{"k", cfg.threshold}, {"eta", cfg.eta}, {"h", cfg.h_residue}};
}

inline Config config_from_json(const json& j) {
    Config cfg;
    cfg.threshold = j.at("k").get<int>();
    cfg.eta = j.at("eta").get<std::vector<int>>();
    cfg.h_residue = j.at("h").get<std::vector<int>>();
    if (cfg.h_residue.size() != cfg.eta.size())
        throw BadParameter("config eta and h lengths differ");
    return cfg;
}

inline json report_to_json(const StabilizationReport& report) {
    return json{{"final", config_to_json(report.final)},
                {"odometer", report.odometer},
                {"sink_exits", report.sink_exits},
                {"steps", report.steps}};
}

inline json distribution_to_json(const Distribution<ConfigKey>& dist, int threshold) {
    json out = json::array();
    for (size_t i = 0; i < dist.support.size(); ++i) {
        const Config cfg = key_to_config(dist.support[i], threshold);
        out.push_back(json{{"state", json{{"eta", cfg.eta}, {"h", cfg.h_residue}}},
                           {"probability", dist.mass[i]}});
    }
    return out;
}

inline json distribution_to_json(const Distribution<int64_t>& dist) {
    json out = json::array();
    for (size_t i = 0; i < dist.support.size(); ++i)
        out.push_back(json{{"state", dist.support[i]}, {"probability", dist.mass[i]}});
    return out;
}

// CSV with '#'-prefixed metadata lines, then a header row. Metadata echoes
// the full resolved run configuration so outputs are reproducible.
class CsvWriter {
  public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void metadata(const std::string& key, const std::string& value) {
        out_ << "# " << key << "=" << value << "\n";
    }
    void metadata(const json& object) {
        for (const auto& [key, value] : object.items())
            out_ << "# " << key << "=" << (value.is_string() ? value.get<std::string>() : value.dump())
                 << "\n";
    }
    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ",";
            out_ << cells[i];
        }
        out_ << "\n";
    }

  private:
    std::ostream& out_;
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace sandpile
