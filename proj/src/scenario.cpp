#include "cids/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cids/errors.hpp"
#include "cids/rulestore.hpp"

namespace cids {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ScoreDist dist_from_json(const json& j) {
    ScoreDist d;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") {
        d.kind = ScoreDist::Kind::constant;
        d.a = j.at("a").get<double>();
        d.b = d.a;
    } else if (kind == "uniform") {
        d.kind = ScoreDist::Kind::uniform;
        d.a = j.at("a").get<double>();
        d.b = j.at("b").get<double>();
    } else {
        throw Error(ErrorCategory::config, "unknown score distribution kind: " + kind);
    }
    return d;
}

AgentProfile agent_from_json(const json& j) {
    AgentProfile agent;
    agent.name = j.at("name").get<std::string>();
    agent.role = role_from_string(j.at("role").get<std::string>());
    agent.behavior.kind = behavior_from_string(j.at("behavior").get<std::string>());
    agent.behavior.switch_at = j.value("switch_at", 0);
    agent.behavior.rejoin_at = j.value("rejoin_at", 0);
    agent.behavior.target = j.value("target", std::string());
    agent.key_seed = j.at("key_seed").get<std::uint64_t>();
    if (j.contains("score_policy")) {
        const json& sp = j.at("score_policy");
        if (sp.contains("valid")) agent.score_policy.valid = dist_from_json(sp.at("valid"));
        if (sp.contains("invalid")) agent.score_policy.invalid = dist_from_json(sp.at("invalid"));
    }
    return agent;
}

}  // namespace

void ScenarioConfig::validate() const {
    trm.validate(byzantine_budget);
    if (rounds < 1) {
        throw Error(ErrorCategory::config, "rounds must be >= 1");
    }
    if (corpus_path.empty()) {
        throw Error(ErrorCategory::config, "corpus_path is required");
    }
    if (!(regular_threshold >= 0.0 && regular_threshold <= 1.0)) {
        throw Error(ErrorCategory::config, "regular_threshold must lie in [0, 1]");
    }
    if (agents.empty()) {
        throw Error(ErrorCategory::config, "scenario declares no agents");
    }

    std::set<std::string> names;
    std::set<std::uint64_t> key_seeds;
    int validator_count = 0;
    for (const AgentProfile& agent : agents) {
        if (agent.name.empty()) {
            throw Error(ErrorCategory::config, "agent name is empty");
        }
        if (!names.insert(agent.name).second) {
            throw Error(ErrorCategory::config, "duplicate agent name: " + agent.name);
        }
        if (!key_seeds.insert(agent.key_seed).second) {
            throw Error(ErrorCategory::config,
                        "duplicate key_seed (keys would collide): " + agent.name);
        }
        if (agent.role == Role::validator) {
            ++validator_count;
            agent.score_policy.validate();
        }

        const Behavior& b = agent.behavior;
        switch (b.kind) {
            case BehaviorKind::turncoat:
                if (agent.role != Role::contributor || b.switch_at < 1) {
                    throw Error(ErrorCategory::config,
                                "turncoat needs a contributor role and switch_at >= 1: " +
                                    agent.name);
                }
                break;
            case BehaviorKind::whitewasher:
                if (agent.role != Role::contributor || b.rejoin_at < 2) {
                    throw Error(ErrorCategory::config,
                                "whitewasher needs a contributor role and rejoin_at >= 2: " +
                                    agent.name);
                }
                break;
            case BehaviorKind::ballot_stuffer:
            case BehaviorKind::self_promoter:
                if (agent.role != Role::contributor) {
                    throw Error(ErrorCategory::config,
                                "behavior requires a contributor role: " + agent.name);
                }
                break;
            case BehaviorKind::bad_mouther:
                if (agent.role != Role::validator || b.target.empty()) {
                    throw Error(ErrorCategory::config,
                                "bad_mouther needs a validator role and a target: " + agent.name);
                }
                break;
            default:
                break;
        }
    }

    if (validator_count < trm.n_validators) {
        throw Error(ErrorCategory::config,
                    "scenario declares " + std::to_string(validator_count) +
                        " validator agents but trm.n_validators = " +
                        std::to_string(trm.n_validators));
    }

    for (const AgentProfile& agent : agents) {
        if (agent.behavior.kind == BehaviorKind::bad_mouther) {
            auto it = std::find_if(agents.begin(), agents.end(), [&](const AgentProfile& a) {
                return a.name == agent.behavior.target && a.role == Role::contributor;
            });
            if (it == agents.end()) {
                throw Error(ErrorCategory::config,
                            "bad_mouther target is not a contributor agent: " +
                                agent.behavior.target);
            }
        }
    }
}

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCategory::config, std::string("scenario is not valid JSON: ") + e.what());
    }
    try {
        ScenarioConfig config;
        config.seed = j.at("seed").get<std::uint64_t>();
        const json& trm = j.at("trm");
        config.trm.delta_val = trm.at("delta_val").get<double>();
        config.trm.delta_inv = trm.at("delta_inv").get<double>();
        config.trm.gamma = trm.at("gamma").get<double>();
        config.trm.q_threshold = trm.value("q_threshold", 0.5);
        config.trm.n_validators = trm.at("n_validators").get<int>();
        config.byzantine_budget = j.value("byzantine_budget", 0);
        config.rounds = j.at("rounds").get<int>();
        config.corpus_path = j.at("corpus_path").get<std::string>();
        config.output_path = j.value("output_path", std::string());
        config.regular_threshold = j.value("regular_threshold", 0.5);
        for (const json& agent : j.at("agents")) {
            config.agents.push_back(agent_from_json(agent));
        }
        return config;
    } catch (const json::exception& e) {
        throw Error(ErrorCategory::config, std::string("scenario field error: ") + e.what());
    }
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCategory::io, "cannot read scenario file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

namespace {

std::vector<std::string> load_rule_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCategory::config, "corpus directory missing: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".rule") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<std::string> rules;
    for (const fs::path& file : files) {
        std::ifstream in(file);
        if (!in) {
            throw Error(ErrorCategory::io, "cannot read rule file: " + file.string());
        }
        std::string line;
        while (std::getline(in, line)) {
            // First non-empty line is the rule; the rest is ignored.
            if (line.find_first_not_of(" \t") != std::string::npos) {
                rules.push_back(line);
                break;
            }
        }
    }
    if (rules.empty()) {
        throw Error(ErrorCategory::config, "corpus directory has no rules: " + dir.string());
    }
    return rules;
}

}  // namespace

Corpus Corpus::load(const std::string& dir) {
    Corpus corpus;
    corpus.valid = load_rule_dir(fs::path(dir) / "valid");
    corpus.invalid = load_rule_dir(fs::path(dir) / "invalid");
    return corpus;
}

}  // namespace cids
