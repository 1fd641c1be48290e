#include "cids/harness.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cids/errors.hpp"

namespace cids {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) {
        throw Error(ErrorCategory::invariant, "double formatting failed");
    }
    return std::string(buf, ptr);
}

Simulation::Simulation(ScenarioConfig config) : config_(std::move(config)) {
    config_.validate();
    corpus_ = Corpus::load(config_.corpus_path);

    // Per-agent RNG streams derived from the scenario seed in declaration
    // order.
    std::uint64_t seed_state = config_.seed;
    std::vector<std::uint64_t> rng_seeds;
    rng_seeds.reserve(config_.agents.size());
    for (std::size_t i = 0; i < config_.agents.size(); ++i) {
        rng_seeds.push_back(splitmix64(seed_state));
    }

    std::set<std::string> ground_truth;
    for (const std::string& text : corpus_.valid) {
        ground_truth.insert(canonicalize_rule(text));
    }

    // Contributors draw from disjoint corpus slices so fresh draws never
    // collide across agents.
    std::vector<std::size_t> contributor_slots;
    for (std::size_t i = 0; i < config_.agents.size(); ++i) {
        if (config_.agents[i].role == Role::contributor) contributor_slots.push_back(i);
    }
    auto slice_for = [](const std::vector<std::string>& pool, std::size_t slot,
                        std::size_t stride) {
        std::vector<std::string> out;
        for (std::size_t i = slot; i < pool.size(); i += stride) out.push_back(pool[i]);
        return out;
    };

    registry_ = std::make_unique<NodeRegistry>();
    store_ = std::make_unique<RuleStore>(*registry_);

    GenesisConfig genesis;
    genesis.trm = config_.trm;
    genesis.byzantine_budget = config_.byzantine_budget;

    int validator_index = 0;
    std::size_t contributor_rank = 0;
    for (std::size_t i = 0; i < config_.agents.size(); ++i) {
        const AgentProfile& profile = config_.agents[i];
        NodeKeyPair key = generate_keypair(seed_from_u64(profile.key_seed));
        switch (profile.role) {
            case Role::validator:
                // The first n_validators validator agents form the
                // validator set; later ones are inert.
                if (validator_index < config_.trm.n_validators) {
                    genesis.validators.push_back(key.public_key);
                    validators_.emplace_back(profile, key, validator_index, ground_truth,
                                             rng_seeds[i]);
                    validator_keys_.push_back(key);
                    ++validator_index;
                }
                break;
            case Role::contributor: {
                CorpusSlice valid(slice_for(corpus_.valid, contributor_rank,
                                            contributor_slots.size()));
                CorpusSlice invalid(slice_for(corpus_.invalid, contributor_rank,
                                              contributor_slots.size()));
                contributors_.emplace_back(profile, key, std::move(valid), std::move(invalid),
                                           rng_seeds[i]);
                if (profile.behavior.kind == BehaviorKind::whitewasher) {
                    std::uint64_t state = profile.key_seed ^ 0xfe5c1d195ab8cc4dULL;
                    rejoin_seeds_[profile.name] = splitmix64(state);
                }
                ++contributor_rank;
                break;
            }
            case Role::regular:
                regulars_.emplace_back(profile, key, config_.regular_threshold);
                break;
        }
    }

    RuleStore* store = store_.get();
    chain_ = std::make_unique<Chain>(std::move(genesis), *registry_,
                                     [store](const ContentAddress& a) { return store->contains(a); });

    // Resolve bad-mouthing targets to contributor keys.
    for (ValidatorAgent& validator : validators_) {
        if (validator.profile().behavior.kind != BehaviorKind::bad_mouther) continue;
        for (const ContributorAgent& contributor : contributors_) {
            if (contributor.profile().name == validator.profile().behavior.target) {
                validator.set_target_key(contributor.key().public_key);
            }
        }
    }

    // Trajectory slots for the initial contributor identities.
    for (const ContributorAgent& contributor : contributors_) {
        std::string key_hex = to_hex(contributor.key().public_key);
        trajectory_index_[key_hex] = artifacts_.trajectories.size();
        artifacts_.trajectories.push_back(TrustTrajectory{contributor.label(), key_hex, {}});
        artifacts_.identity_of[key_hex] = contributor.label();
    }
}

void Simulation::register_agents() {
    const Bytes& approver = validator_keys_.front().public_key;
    int host = 2;
    auto register_one = [&](const NodeKeyPair& key, const std::string& name, Role role) {
        std::string attributes = "ip=10.0.0." + std::to_string(host++) + ";id=" + name;
        RegistrationRequest request =
            RegistrationRequest::make(key, attributes, role, chain_->now());
        RegistrationResponse response = chain_->register_node(request, approver);
        if (!response.accepted) {
            throw Error(ErrorCategory::invariant,
                        "setup registration rejected for " + name + ": " +
                            to_string(response.reject));
        }
    };
    for (const ContributorAgent& c : contributors_) {
        register_one(c.key(), c.profile().name, Role::contributor);
    }
    for (const RegularAgent& r : regulars_) {
        register_one(r.key(), r.profile().name, Role::regular);
    }
}

std::string Simulation::fresh_identity_label(const ContributorAgent& agent, int round) const {
    return agent.profile().name + "@r" + std::to_string(round);
}

void Simulation::contributor_turn(ContributorAgent& agent, int round) {
    if (agent.wants_rejoin(round)) {
        NodeKeyPair fresh = generate_keypair(seed_from_u64(rejoin_seeds_.at(agent.profile().name)));
        std::string label = fresh_identity_label(agent, round);
        RegistrationRequest request = RegistrationRequest::make(
            fresh, "ip=10.0.9.9;id=" + label, Role::contributor, chain_->now());
        RegistrationResponse response =
            chain_->register_node(request, validator_keys_.front().public_key);
        if (!response.accepted) {
            throw Error(ErrorCategory::invariant, "whitewash re-registration rejected");
        }
        agent.adopt_identity(fresh, label);
        std::string key_hex = to_hex(agent.key().public_key);
        trajectory_index_[key_hex] = artifacts_.trajectories.size();
        artifacts_.trajectories.push_back(TrustTrajectory{label, key_hex, {}});
        artifacts_.identity_of[key_hex] = label;
    }

    std::optional<RuleBundle> bundle = agent.step(round, chain_->now());
    if (!bundle) return;

    ContentAddress address;
    try {
        address = store_->put_bundle(*bundle, agent.key().public_key);
    } catch (const Error&) {
        artifacts_.rejections.push_back(
            RejectionRecord{round, agent.label(), "put_bundle", RejectCode::auth});
        return;
    }

    ChainTransaction submission =
        ChainTransaction::make_submission(agent.key(), address, chain_->now());
    SubmitResult submitted = chain_->submit_rule(submission);
    if (!submitted.accepted) {
        artifacts_.rejections.push_back(
            RejectionRecord{round, agent.label(), "submit_rule", submitted.reject});
        return;
    }

    if (agent.profile().behavior.kind == BehaviorKind::self_promoter) {
        ChainTransaction self_vote =
            ChainTransaction::make_vote(agent.key(), 1, 1.0, address, chain_->now());
        SubmitResult vote_result = chain_->submit_vote(self_vote);
        artifacts_.rejections.push_back(
            RejectionRecord{round, agent.label(), "self_vote", vote_result.reject});
        if (vote_result.accepted) {
            throw Error(ErrorCategory::invariant, "self-vote was accepted by the chain");
        }
    }

    std::vector<ChainEvent> confirmations;
    for (ValidatorAgent& validator : validators_) {
        RuleBundle stored = store_->get_bundle(address, validator.key().public_key);
        ValidationVerdict verdict = validator.verdict(stored);
        artifacts_.vote_audit.push_back(VoteRecord{round, address.hex(),
                                                   validator.profile().name, verdict.phi,
                                                   verdict.s, verdict.rationale});
        ChainTransaction vote = ChainTransaction::make_vote(validator.key(), verdict.phi,
                                                            verdict.s, address, chain_->now());
        SubmitResult result = chain_->submit_vote(vote);
        if (!result.accepted) {
            throw Error(ErrorCategory::invariant,
                        std::string("validator vote rejected: ") + to_string(result.reject));
        }
        confirmations.insert(confirmations.end(), result.events.begin(), result.events.end());
    }

    const ValidationOutcome& outcome = chain_->outcomes().back();
    if (!(outcome.address == address)) {
        throw Error(ErrorCategory::invariant, "outcome does not match the submitted rule");
    }
    double reputation_after = chain_->query_reputation(agent.key().public_key).T;
    TrustTrajectory& trajectory =
        artifacts_.trajectories[trajectory_index_.at(to_hex(agent.key().public_key))];
    trajectory.series.push_back(TrajectoryPoint{round, outcome.t, reputation_after});

    for (const ChainEvent& event : confirmations) {
        for (RegularAgent& regular : regulars_) {
            RegularAgent::UpdateStatus status = regular.on_confirmed(event, *chain_, *store_);
            artifacts_.regular_updates.push_back(RegularUpdateRecord{
                round, regular.profile().name, event.rule_address.hex(), status});
        }
    }
}

void Simulation::run_round(int round) {
    for (ContributorAgent& contributor : contributors_) {
        contributor_turn(contributor, round);
    }
}

const RunArtifacts& Simulation::run() {
    if (ran_) return artifacts_;
    ran_ = true;

    register_agents();
    for (int round = 1; round <= config_.rounds; ++round) {
        run_round(round);
    }

    for (const TrustTrajectory& trajectory : artifacts_.trajectories) {
        ContributorReputation rep =
            chain_->query_reputation(from_hex(trajectory.key_hex));
        artifacts_.final_T[trajectory.contributor] = rep.T;
    }
    for (const RegularAgent& regular : regulars_) {
        artifacts_.r_loc_sizes[regular.profile().name] = regular.local_rules().size();
    }
    artifacts_.r_db_size = chain_->r_db().size();
    store_->audit();
    artifacts_.state_hash = chain_->state_hash();
    return artifacts_;
}

RunArtifacts run_scenario(const ScenarioConfig& config) {
    Simulation simulation(config);
    return simulation.run();
}

// --- artifact files ---

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCategory::io, "cannot write " + path.string());
    }
    return out;
}

json tx_to_json(const ChainTransaction& tx) {
    json j;
    j["type"] = to_string(tx.kind);
    switch (tx.kind) {
        case TxKind::rule_submission:
            j["address"] = std::get<RuleSubmissionPayload>(tx.payload).address.hex();
            break;
        case TxKind::validation_vote: {
            const auto& vote = std::get<VotePayload>(tx.payload);
            j["rule"] = vote.rule_address.hex();
            j["phi"] = vote.phi;
            j["s"] = vote.s;
            break;
        }
        case TxKind::rule_confirmation: {
            const auto& conf = std::get<ConfirmationPayload>(tx.payload);
            j["address"] = conf.address.hex();
            j["t"] = conf.t;
            break;
        }
    }
    j["timestamp"] = tx.timestamp;
    if (!tx.sender.empty()) j["sender"] = to_hex(tx.sender);
    if (!tx.signature.empty()) j["signature"] = to_hex(tx.signature);
    return j;
}

ChainTransaction tx_from_json(const json& j) {
    ChainTransaction tx;
    std::string type = j.at("type").get<std::string>();
    if (type == "tx_r") {
        tx.kind = TxKind::rule_submission;
        tx.payload =
            RuleSubmissionPayload{ContentAddress::from_hex(j.at("address").get<std::string>())};
    } else if (type == "tx_c") {
        tx.kind = TxKind::validation_vote;
        tx.payload = VotePayload{j.at("phi").get<int>(), j.at("s").get<double>(),
                                 ContentAddress::from_hex(j.at("rule").get<std::string>())};
    } else if (type == "tx_f") {
        tx.kind = TxKind::rule_confirmation;
        tx.payload = ConfirmationPayload{
            ContentAddress::from_hex(j.at("address").get<std::string>()),
            j.at("t").get<double>()};
    } else {
        throw Error(ErrorCategory::invariant, "unknown transaction type: " + type);
    }
    tx.timestamp = j.at("timestamp").get<std::uint64_t>();
    if (j.contains("sender")) tx.sender = from_hex(j.at("sender").get<std::string>());
    if (j.contains("signature")) tx.signature = from_hex(j.at("signature").get<std::string>());
    return tx;
}

json registration_to_json(const RegistrationRecord& record) {
    json j;
    j["type"] = "registration";
    j["public_key"] = to_hex(record.request.public_key);
    j["attributes"] = record.request.attributes;
    j["role"] = to_string(record.request.role);
    j["timestamp"] = record.request.timestamp;
    j["signature"] = to_hex(record.request.signature);
    j["approver"] = to_hex(record.approver);
    return j;
}

RegistrationRecord registration_from_json(const json& j) {
    RegistrationRecord record;
    record.request.public_key = from_hex(j.at("public_key").get<std::string>());
    record.request.attributes = j.at("attributes").get<std::string>();
    record.request.role = role_from_string(j.at("role").get<std::string>());
    record.request.timestamp = j.at("timestamp").get<std::uint64_t>();
    record.request.signature = from_hex(j.at("signature").get<std::string>());
    record.approver = from_hex(j.at("approver").get<std::string>());
    return record;
}

}  // namespace

void export_log(const Chain& chain, std::ostream& out) {
    const GenesisConfig& genesis = chain.genesis();
    json g;
    g["type"] = "genesis";
    g["trm"] = {{"delta_val", genesis.trm.delta_val},
                {"delta_inv", genesis.trm.delta_inv},
                {"gamma", genesis.trm.gamma},
                {"q_threshold", genesis.trm.q_threshold},
                {"n_validators", genesis.trm.n_validators}};
    g["byzantine_budget"] = genesis.byzantine_budget;
    json validators = json::array();
    for (const Bytes& key : genesis.validators) validators.push_back(to_hex(key));
    g["validators"] = validators;
    out << g.dump() << "\n";

    for (const LogRecord& record : chain.log()) {
        if (const auto* reg = std::get_if<RegistrationRecord>(&record)) {
            out << registration_to_json(*reg).dump() << "\n";
        } else {
            out << tx_to_json(std::get<ChainTransaction>(record)).dump() << "\n";
        }
    }

    json tail;
    tail["type"] = "state";
    tail["hash"] = chain.state_hash();
    tail["records"] = chain.log().size();
    out << tail.dump() << "\n";
}

ParsedLog parse_log(std::istream& in) {
    ParsedLog parsed;
    std::string line;
    bool have_genesis = false;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorCategory::invariant,
                        std::string("transaction log line is not valid JSON: ") + e.what());
        }
        std::string type = j.at("type").get<std::string>();
        if (type == "genesis") {
            parsed.genesis.trm.delta_val = j.at("trm").at("delta_val").get<double>();
            parsed.genesis.trm.delta_inv = j.at("trm").at("delta_inv").get<double>();
            parsed.genesis.trm.gamma = j.at("trm").at("gamma").get<double>();
            parsed.genesis.trm.q_threshold = j.at("trm").at("q_threshold").get<double>();
            parsed.genesis.trm.n_validators = j.at("trm").at("n_validators").get<int>();
            parsed.genesis.byzantine_budget = j.at("byzantine_budget").get<int>();
            for (const json& key : j.at("validators")) {
                parsed.genesis.validators.push_back(from_hex(key.get<std::string>()));
            }
            have_genesis = true;
        } else if (type == "registration") {
            parsed.records.push_back(registration_from_json(j));
        } else if (type == "state") {
            parsed.recorded_state_hash = j.at("hash").get<std::string>();
        } else {
            parsed.records.push_back(tx_from_json(j));
        }
    }
    if (!have_genesis) {
        throw Error(ErrorCategory::invariant, "transaction log has no genesis record");
    }
    return parsed;
}

ParsedLog load_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCategory::io, "cannot read transaction log: " + path);
    }
    return parse_log(in);
}

std::string replay_and_verify(const ParsedLog& log) {
    NodeRegistry registry;
    Chain chain = replay_log(log.genesis, log.records, registry);
    std::string hash = chain.state_hash();
    if (!log.recorded_state_hash.empty() && hash != log.recorded_state_hash) {
        throw Error(ErrorCategory::invariant,
                    "replayed state hash " + hash + " differs from recorded " +
                        log.recorded_state_hash);
    }
    return hash;
}

std::size_t verify_log_bounds(const ParsedLog& log) {
    const TrmParams& params = log.genesis.trm;
    params.validate(log.genesis.byzantine_budget);
    Bounds t_bounds = rule_trust_bounds(params);
    const double tol = 1e-12;

    auto validator_index = [&](const Bytes& key) {
        for (std::size_t i = 0; i < log.genesis.validators.size(); ++i) {
            if (log.genesis.validators[i] == key) return static_cast<int>(i);
        }
        throw Error(ErrorCategory::invariant, "vote from a key outside the validator set");
    };

    struct OpenRule {
        Bytes contributor;
        std::vector<VoteScore> votes;
    };
    struct RepFold {
        int m = 0;
        double T = 0.0;
    };
    std::map<std::string, OpenRule> open;
    std::map<std::string, double> computed_t;
    std::map<std::string, int> computed_decision;
    std::map<std::string, RepFold> reputations;
    std::size_t checked = 0;

    for (const LogRecord& record : log.records) {
        const auto* tx = std::get_if<ChainTransaction>(&record);
        if (tx == nullptr) continue;
        switch (tx->kind) {
            case TxKind::rule_submission: {
                const auto& payload = std::get<RuleSubmissionPayload>(tx->payload);
                open[payload.address.hex()] = OpenRule{tx->sender, {}};
                break;
            }
            case TxKind::validation_vote: {
                const auto& payload = std::get<VotePayload>(tx->payload);
                std::string hex = payload.rule_address.hex();
                auto it = open.find(hex);
                if (it == open.end()) {
                    throw Error(ErrorCategory::invariant, "vote for an unsubmitted rule " + hex);
                }
                VoteScore vote;
                try {
                    vote = VoteScore::make(payload.phi, payload.s, validator_index(tx->sender));
                } catch (const Error& e) {
                    throw Error(ErrorCategory::invariant,
                                std::string("recorded vote violates the score contract: ") +
                                    e.what());
                }
                it->second.votes.push_back(vote);
                if (static_cast<int>(it->second.votes.size()) == params.n_validators) {
                    std::vector<VoteScore> votes = it->second.votes;
                    std::sort(votes.begin(), votes.end(), [](const VoteScore& a, const VoteScore& b) {
                        return a.validator_index < b.validator_index;
                    });
                    double t = aggregate_rule_trust(votes, params);
                    if (!within_bounds(t, t_bounds, tol)) {
                        throw Error(ErrorCategory::invariant,
                                    "rule trust " + format_double(t) + " violates its bounds");
                    }
                    ++checked;
                    computed_t[hex] = t;
                    computed_decision[hex] = decide_validity(votes, params);

                    RepFold& rep = reputations[to_hex(it->second.contributor)];
                    rep.m += 1;
                    rep.T = params.gamma * rep.T + (1.0 - params.gamma) * t;
                    if (!within_bounds(rep.T, reputation_bounds(params, rep.m), tol)) {
                        throw Error(ErrorCategory::invariant,
                                    "reputation " + format_double(rep.T) +
                                        " violates its bounds at m=" + std::to_string(rep.m));
                    }
                    ++checked;
                    open.erase(it);
                }
                break;
            }
            case TxKind::rule_confirmation: {
                const auto& payload = std::get<ConfirmationPayload>(tx->payload);
                std::string hex = payload.address.hex();
                auto t_it = computed_t.find(hex);
                if (t_it == computed_t.end()) {
                    throw Error(ErrorCategory::invariant,
                                "confirmation without a completed vote round: " + hex);
                }
                if (payload.t != t_it->second) {
                    throw Error(ErrorCategory::invariant,
                                "confirmed t differs from the recomputed value for " + hex);
                }
                if (computed_decision.at(hex) != 1) {
                    throw Error(ErrorCategory::invariant,
                                "confirmation recorded for a rejected rule " + hex);
                }
                ++checked;
                break;
            }
        }
    }
    return checked;
}

std::size_t audit_run_dir(const std::string& run_dir) {
    fs::path bundles = fs::path(run_dir) / "bundles";
    if (!fs::is_directory(bundles)) {
        throw Error(ErrorCategory::io, "no bundles directory under " + run_dir);
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(bundles)) {
        if (entry.is_regular_file() && entry.path().extension() == ".bundle") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
        std::ifstream in(file, std::ios::binary);
        if (!in) {
            throw Error(ErrorCategory::io, "cannot read " + file.string());
        }
        std::ostringstream buffer;
        buffer << in.rdbuf();
        Bytes data = to_bytes(buffer.str());
        std::string expected = file.stem().string();
        if (content_address(data).hex() != expected) {
            throw Error(ErrorCategory::invariant,
                        "bundle bytes do not hash to their address: " + file.string());
        }
        RuleBundle::deserialize(data);  // must still parse
    }
    return files.size();
}

void Simulation::write_artifacts(const std::string& dir) const {
    if (!ran_) {
        throw Error(ErrorCategory::contract, "write_artifacts before run");
    }
    fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root / "bundles", ec);
    if (ec) {
        throw Error(ErrorCategory::io, "cannot create output directory " + root.string());
    }

    {
        std::ofstream out = open_out(root / "trust_trajectories.csv");
        out << "round,contributor,t,T\n";
        for (const TrustTrajectory& trajectory : artifacts_.trajectories) {
            for (const TrajectoryPoint& point : trajectory.series) {
                out << point.round << "," << trajectory.contributor << ","
                    << format_double(point.t) << "," << format_double(point.T_after) << "\n";
            }
        }
    }

    {
        std::ofstream out = open_out(root / "decisions.csv");
        out << "rule_address,contributor,decision,vote_vector\n";
        for (const ValidationOutcome& outcome : chain_->outcomes()) {
            std::string votes;
            for (std::size_t i = 0; i < outcome.votes.size(); ++i) {
                if (i) votes += "|";
                votes += (outcome.votes[i].phi > 0 ? "+1:" : "-1:");
                votes += format_double(outcome.votes[i].s);
            }
            std::string label = artifacts_.identity_of.count(to_hex(outcome.contributor))
                                    ? artifacts_.identity_of.at(to_hex(outcome.contributor))
                                    : to_hex(outcome.contributor);
            out << outcome.address.hex() << "," << label << ","
                << (outcome.decision > 0 ? "+1" : "-1") << "," << votes << "\n";
        }
    }

    {
        std::ofstream out = open_out(root / "summary.csv");
        out << "metric,subject,value\n";
        for (const TrustTrajectory& trajectory : artifacts_.trajectories) {
            out << "final_T," << trajectory.contributor << ","
                << format_double(artifacts_.final_T.at(trajectory.contributor)) << "\n";
        }
        out << "r_db_size,," << artifacts_.r_db_size << "\n";
        for (const auto& [agent, size] : artifacts_.r_loc_sizes) {
            out << "r_loc_size," << agent << "," << size << "\n";
        }
    }

    {
        std::ofstream out = open_out(root / "txlog.jsonl");
        export_log(*chain_, out);
    }

    for (const auto& [address_hex, data] : store_->catalog()) {
        std::ofstream out = open_out(root / "bundles" / (address_hex + ".bundle"));
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size()));
    }
}

}  // namespace cids
