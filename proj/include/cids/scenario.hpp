#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cids/agents.hpp"
#include "cids/trm.hpp"

namespace cids {

// Full description of one experiment: node census, behaviours, TRM
// parameters and the seed. Loaded from a JSON file; field names match the
// schema documented in the README.
struct ScenarioConfig {
    std::uint64_t seed = 0;
    TrmParams trm;
    int byzantine_budget = 0;
    std::vector<AgentProfile> agents;
    int rounds = 1;
    std::string corpus_path;
    std::string output_path;
    double regular_threshold = 0.5;

    // Throws Error(config) with a field-level message; runs before any
    // execution.
    void validate() const;

    static ScenarioConfig from_json_text(const std::string& text);
    static ScenarioConfig load(const std::string& path);  // Error(io) on unreadable file
};

// Fixture rule corpus, split into ground-truth-valid and invalid rules.
// Files are read in sorted filename order so draws are reproducible.
struct Corpus {
    std::vector<std::string> valid;
    std::vector<std::string> invalid;

    static Corpus load(const std::string& dir);  // Error(config) when missing or empty
};

}  // namespace cids
