#pragma once

// Experiment runs: grid x plays, replay of invalid answers in rounds, adaptive
// verifier relaxation, append-only logging and resume.
//
// Run directory layout:
//   config.json   the RunConfig, written once
//   state.json    RunState after the last committed round (atomic rename)
//   plays.jsonl   one line per attempt plus event lines, schema_version 1
//   matrix.csv    cooperation matrix, written on completion
//   summary.json  status, rounds, per-game bypass fractions

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dyadlab/agents.hpp"
#include "dyadlab/error.hpp"
#include "dyadlab/game.hpp"
#include "dyadlab/llm/fake_model.hpp"
#include "dyadlab/llm/http_client.hpp"
#include "dyadlab/matrix.hpp"
#include "dyadlab/phenotypes.hpp"

namespace dyadlab {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::uint32_t kDefaultMaxAttemptsPerSlot = 50;

using nlohmann::json;

// ---- configuration -------------------------------------------------------

struct EndpointSpec {
  std::string url;
  std::string model;
  std::string api_key_env;  // variable name only; the key itself is never stored
  int timeout_s = 120;
};

enum class AgentKind { Nash, Phenotype, Mixture, Scripted, Llm, Mock };

inline std::string_view to_string(AgentKind k) {
  switch (k) {
    case AgentKind::Nash: return "nash";
    case AgentKind::Phenotype: return "phenotype";
    case AgentKind::Mixture: return "mixture";
    case AgentKind::Scripted: return "scripted";
    case AgentKind::Llm: return "llm";
    case AgentKind::Mock: return "mock";
  }
  return "nash";
}

inline AgentKind parse_agent_kind(std::string_view s) {
  for (auto k : {AgentKind::Nash, AgentKind::Phenotype, AgentKind::Mixture, AgentKind::Scripted, AgentKind::Llm,
                 AgentKind::Mock})
    if (to_string(k) == s) return k;
  throw specification_error("unknown agent kind '" + std::string(s) + "'");
}

struct AgentSpec {
  AgentKind kind = AgentKind::Nash;
  double x0 = 0.5;                                        // nash
  Phenotype phenotype = Phenotype::Trustful;              // phenotype
  MixtureWeights weights = MixtureWeights::human_population();  // mixture
  double scripted_default = 1.0;                          // scripted
  std::map<std::pair<Points, Points>, double> scripted_cells;
  llm::Stage stage = llm::Stage::Verified;                // llm, mock
  std::optional<EndpointSpec> tested, extractor, verifier;  // llm
  llm::FakePolicy policy = llm::FakePolicy::Cooperate;    // mock
  bool force_identity_labels = false;
  bool send_seed = true;
};

struct RunConfig {
  GridSpec grid = GridSpec::original();
  AgentSpec agent;
  std::uint32_t plays_per_game = 20;
  std::uint64_t seed = 0;
  std::uint32_t concurrency = 1;
  std::string output_dir;
  std::uint32_t max_attempts_per_slot = kDefaultMaxAttemptsPerSlot;
};

inline void validate(const RunConfig& c) {
  validate(c.grid);
  if (c.plays_per_game < 1) throw specification_error("plays_per_game must be >= 1");
  if (c.concurrency < 1) throw specification_error("concurrency must be >= 1");
  if (c.max_attempts_per_slot < 1) throw specification_error("max_attempts_per_slot must be >= 1");
  if (c.output_dir.empty()) throw specification_error("output_dir is required");
  const AgentSpec& a = c.agent;
  if (a.kind == AgentKind::Llm) {
    if (!a.tested) throw specification_error("llm agent needs a tested endpoint");
    if (a.stage != llm::Stage::Simple && !a.extractor) throw specification_error("llm agent needs an extractor endpoint");
    if (a.stage == llm::Stage::Verified && !a.verifier)
      throw specification_error("stage verified needs a verifier endpoint");
  }
  if (a.kind == AgentKind::Mixture) validate(a.weights);
}

inline json to_json(const GridSpec& g) {
  return {{"s_min", g.s_min}, {"s_max", g.s_max}, {"t_min", g.t_min}, {"t_max", g.t_max},
          {"step", g.step},   {"R", g.R},         {"P", g.P}};
}

inline GridSpec grid_from_json(const json& j) {
  if (j.is_string()) return parse_grid(j.get<std::string>());
  if (!j.is_object()) throw specification_error("grid must be a name or an object");
  GridSpec g;
  g.s_min = j.value("s_min", g.s_min);
  g.s_max = j.value("s_max", g.s_max);
  g.t_min = j.value("t_min", g.t_min);
  g.t_max = j.value("t_max", g.t_max);
  g.step = j.value("step", g.step);
  g.R = j.value("R", g.R);
  g.P = j.value("P", g.P);
  validate(g);
  return g;
}

inline json to_json(const EndpointSpec& e) {
  return {{"url", e.url}, {"model", e.model}, {"api_key_env", e.api_key_env}, {"timeout_s", e.timeout_s}};
}

inline EndpointSpec endpoint_from_json(const json& j) {
  if (!j.is_object() || !j.contains("url") || !j.contains("model"))
    throw specification_error("endpoint needs url and model");
  EndpointSpec e;
  e.url = j.at("url").get<std::string>();
  e.model = j.at("model").get<std::string>();
  e.api_key_env = j.value("api_key_env", std::string());
  e.timeout_s = j.value("timeout_s", 120);
  return e;
}

inline json weights_to_json(const MixtureWeights& w) {
  json j = json::object();
  for (Phenotype p : kAllPhenotypes) j[std::string(to_string(p))] = w[p];
  return j;
}

inline json to_json(const AgentSpec& a) {
  json j{{"kind", to_string(a.kind)}};
  switch (a.kind) {
    case AgentKind::Nash: j["x0"] = a.x0; break;
    case AgentKind::Phenotype: j["phenotype"] = to_string(a.phenotype); break;
    case AgentKind::Mixture: j["weights"] = weights_to_json(a.weights); break;
    case AgentKind::Scripted: {
      j["default"] = a.scripted_default;
      json cells = json::array();
      for (const auto& [k, p] : a.scripted_cells) cells.push_back({{"S", k.first}, {"T", k.second}, {"p", p}});
      j["cells"] = cells;
      break;
    }
    case AgentKind::Llm:
      j["stage"] = llm::to_string(a.stage);
      if (a.tested) j["tested"] = to_json(*a.tested);
      if (a.extractor) j["extractor"] = to_json(*a.extractor);
      if (a.verifier) j["verifier"] = to_json(*a.verifier);
      j["force_identity_labels"] = a.force_identity_labels;
      j["send_seed"] = a.send_seed;
      break;
    case AgentKind::Mock:
      j["stage"] = llm::to_string(a.stage);
      j["policy"] = llm::to_string(a.policy);
      j["force_identity_labels"] = a.force_identity_labels;
      break;
  }
  return j;
}

inline AgentSpec agent_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw specification_error("agent needs a kind");
  AgentSpec a;
  a.kind = parse_agent_kind(j.at("kind").get<std::string>());
  a.x0 = j.value("x0", a.x0);
  if (j.contains("phenotype")) {
    const auto p = parse_phenotype(j.at("phenotype").get<std::string>());
    if (!p) throw specification_error("unknown phenotype " + j.at("phenotype").dump());
    a.phenotype = *p;
  }
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    if (w.is_string()) {
      a.weights = parse_weights(w.get<std::string>());
    } else {
      a.weights = MixtureWeights{};
      for (const auto& [name, v] : w.items()) {
        const auto p = parse_phenotype(name);
        if (!p) throw specification_error("unknown phenotype '" + name + "' in weights");
        a.weights[*p] = v.get<double>();
      }
    }
  }
  a.scripted_default = j.value("default", a.scripted_default);
  if (j.contains("cells"))
    for (const auto& c : j.at("cells"))
      a.scripted_cells[{c.at("S").get<Points>(), c.at("T").get<Points>()}] = c.at("p").get<double>();
  if (j.contains("stage")) {
    const auto s = llm::parse_stage(j.at("stage").get<std::string>());
    if (!s) throw specification_error("unknown stage " + j.at("stage").dump());
    a.stage = *s;
  }
  if (j.contains("tested")) a.tested = endpoint_from_json(j.at("tested"));
  if (j.contains("extractor")) a.extractor = endpoint_from_json(j.at("extractor"));
  if (j.contains("verifier")) a.verifier = endpoint_from_json(j.at("verifier"));
  if (j.contains("policy")) {
    const auto p = llm::parse_fake_policy(j.at("policy").get<std::string>());
    if (!p) throw specification_error("unknown mock policy " + j.at("policy").dump());
    a.policy = *p;
  }
  a.force_identity_labels = j.value("force_identity_labels", false);
  a.send_seed = j.value("send_seed", true);
  return a;
}

inline json to_json(const RunConfig& c) {
  return {{"grid", to_json(c.grid)},
          {"agent", to_json(c.agent)},
          {"plays_per_game", c.plays_per_game},
          {"seed", c.seed},
          {"concurrency", c.concurrency},
          {"output_dir", c.output_dir},
          {"max_attempts_per_slot", c.max_attempts_per_slot}};
}

inline RunConfig config_from_json(const json& j) {
  try {
    RunConfig c;
    if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
    if (j.contains("agent")) c.agent = agent_from_json(j.at("agent"));
    c.plays_per_game = j.value("plays_per_game", c.plays_per_game);
    c.seed = j.value("seed", c.seed);
    c.concurrency = j.value("concurrency", c.concurrency);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.max_attempts_per_slot = j.value("max_attempts_per_slot", c.max_attempts_per_slot);
    return c;
  } catch (const json::exception& e) {
    throw specification_error(std::string("bad run config: ") + e.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCategory::Io, "cannot open " + path);
  const json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw specification_error(path + " is not valid JSON");
  return config_from_json(j);
}

// ---- agents from specs -----------------------------------------------------

inline std::shared_ptr<llm::ChatClient> make_http_client(const EndpointSpec& e) {
  llm::HttpEndpointConfig cfg;
  cfg.url = e.url;
  cfg.api_key_env = e.api_key_env;
  cfg.timeout = std::chrono::seconds(e.timeout_s);
  return std::make_shared<llm::HttpChatClient>(cfg);
}

inline std::unique_ptr<Agent> make_agent(const AgentSpec& a) {
  switch (a.kind) {
    case AgentKind::Nash: return std::make_unique<NashAgent>(a.x0);
    case AgentKind::Phenotype: return std::make_unique<PhenotypeAgent>(a.phenotype);
    case AgentKind::Mixture: return std::make_unique<MixtureAgent>(a.weights);
    case AgentKind::Scripted: return std::make_unique<ScriptedAgent>(a.scripted_default, a.scripted_cells);
    case AgentKind::Llm: {
      LlmAgent::Models m;
      m.tested_client = make_http_client(*a.tested);
      m.tested_model = a.tested->model;
      if (a.extractor) {
        m.extractor_client = make_http_client(*a.extractor);
        m.extractor_model = a.extractor->model;
      }
      if (a.verifier) {
        m.verifier_client = make_http_client(*a.verifier);
        m.verifier_model = a.verifier->model;
      }
      return std::make_unique<LlmAgent>(std::move(m), a.stage, a.force_identity_labels, a.send_seed);
    }
    case AgentKind::Mock: {
      auto fake = std::make_shared<llm::FakeChatModel>(a.policy);
      LlmAgent::Models m{fake, "mock-tested", fake, "mock-extractor", fake, "mock-verifier"};
      return std::make_unique<LlmAgent>(std::move(m), a.stage, a.force_identity_labels, a.send_seed);
    }
  }
  throw specification_error("unknown agent kind");
}

// ---- play records ----------------------------------------------------------

struct PlayRecord {
  Game game;
  std::size_t game_index = 0;
  llm::LabelMapping mapping;
  std::optional<llm::Stage> stage;
  std::string long_answer;
  std::optional<llm::Verdict> verdict;
  llm::Extracted extracted = llm::Extracted::Invalid;
  std::optional<Choice> choice;
  bool verifier_bypassed = false;
  InvalidReason invalid_reason = InvalidReason::None;
  std::uint32_t round = 0;
  PlaySeed seed;
  std::string started_at, finished_at;
  std::vector<llm::CallRecord> calls;

  bool valid() const { return choice.has_value(); }
};

namespace detail {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

template <class E, class Parse>
E parse_enum(const json& j, const char* field, Parse parse) {
  const auto v = parse(j.at(field).get<std::string>());
  if (!v) throw Error(ErrorCategory::State, std::string("bad ") + field + " in play record");
  return *v;
}

inline std::optional<llm::Extracted> parse_extracted(std::string_view s) {
  if (s == "A") return llm::Extracted::A;
  if (s == "B") return llm::Extracted::B;
  if (s == "invalid") return llm::Extracted::Invalid;
  return std::nullopt;
}

inline std::optional<llm::Verdict> parse_verdict_name(std::string_view s) {
  if (s == "good") return llm::Verdict::Good;
  if (s == "bad") return llm::Verdict::Bad;
  if (s == "unparseable") return llm::Verdict::Unparseable;
  return std::nullopt;
}

inline std::optional<InvalidReason> parse_invalid_reason(std::string_view s) {
  for (auto r : {InvalidReason::None, InvalidReason::Verifier, InvalidReason::Extraction})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

}  // namespace detail

inline json to_json(const PlayRecord& r) {
  json calls = json::array();
  for (const auto& c : r.calls) calls.push_back({{"role", c.role}, {"request", c.request}, {"response", c.response}});
  return {{"schema_version", kSchemaVersion},
          {"event", "play"},
          {"game", {{"R", r.game.R}, {"S", r.game.S}, {"T", r.game.T}, {"P", r.game.P}}},
          {"game_index", r.game_index},
          {"mapping", {{"cooperate", std::string(1, llm::to_char(r.mapping.cooperate))},
                       {"defect", std::string(1, llm::to_char(r.mapping.defect()))}}},
          {"stage", r.stage ? json(llm::to_string(*r.stage)) : json(nullptr)},
          {"long_answer", r.long_answer},
          {"verdict", r.verdict ? json(llm::to_string(*r.verdict)) : json(nullptr)},
          {"extracted", r.extracted == llm::Extracted::Invalid ? "invalid" : std::string(llm::to_string(r.extracted))},
          {"choice", r.choice ? json(*r.choice == Choice::Cooperate ? "cooperate" : "defect") : json(nullptr)},
          {"verifier_bypassed", r.verifier_bypassed},
          {"invalid_reason", to_string(r.invalid_reason)},
          {"round", r.round},
          {"slot", r.seed.slot},
          {"attempt", r.seed.attempt},
          {"seed", {{"run", r.seed.run}, {"S", r.seed.s}, {"T", r.seed.t}, {"slot", r.seed.slot},
                    {"attempt", r.seed.attempt}, {"value", r.seed.value()}}},
          {"started_at", r.started_at},
          {"finished_at", r.finished_at},
          {"calls", calls}};
}

inline PlayRecord record_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion)
      throw Error(ErrorCategory::State, "unsupported play log schema_version " + j.at("schema_version").dump());
    PlayRecord r;
    const json& g = j.at("game");
    r.game = Game{g.at("R").get<Points>(), g.at("S").get<Points>(), g.at("T").get<Points>(), g.at("P").get<Points>()};
    r.game_index = j.at("game_index").get<std::size_t>();
    const auto coop = llm::parse_label(j.at("mapping").at("cooperate").get<std::string>());
    if (!coop) throw Error(ErrorCategory::State, "bad mapping in play record");
    r.mapping = llm::LabelMapping{*coop};
    if (!j.at("stage").is_null()) r.stage = detail::parse_enum<llm::Stage>(j, "stage", llm::parse_stage);
    r.long_answer = j.at("long_answer").get<std::string>();
    if (!j.at("verdict").is_null())
      r.verdict = detail::parse_enum<llm::Verdict>(j, "verdict", detail::parse_verdict_name);
    r.extracted = detail::parse_enum<llm::Extracted>(j, "extracted", detail::parse_extracted);
    if (auto l = llm::as_label(r.extracted)) r.choice = r.mapping.decode(*l);
    r.verifier_bypassed = j.at("verifier_bypassed").get<bool>();
    r.invalid_reason = detail::parse_enum<InvalidReason>(j, "invalid_reason", detail::parse_invalid_reason);
    r.round = j.at("round").get<std::uint32_t>();
    const json& s = j.at("seed");
    r.seed = PlaySeed{s.at("run").get<std::uint64_t>(), s.at("S").get<std::int64_t>(), s.at("T").get<std::int64_t>(),
                      s.at("slot").get<std::uint64_t>(), s.at("attempt").get<std::uint64_t>()};
    r.started_at = j.value("started_at", std::string());
    r.finished_at = j.value("finished_at", std::string());
    for (const auto& c : j.value("calls", json::array()))
      r.calls.push_back({c.at("role").get<std::string>(), c.at("request"), c.at("response")});
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::State, std::string("malformed play record: ") + e.what());
  }
}

// Play records of a log; event lines other than "play" are skipped.
inline std::vector<PlayRecord> read_play_log(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCategory::Io, "cannot open " + path);
  std::vector<PlayRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw Error(ErrorCategory::State, path + ":" + std::to_string(lineno) + " is not valid JSON");
    if (j.value("event", std::string()) == "play") out.push_back(record_from_json(j));
  }
  return out;
}

// Mean cooperation over each game's valid plays. Invalid records are ignored.
inline CooperationMatrix aggregate_matrix(const std::vector<PlayRecord>& records, const GridSpec& grid) {
  validate(grid);
  std::vector<std::size_t> coop(grid.size(), 0), valid(grid.size(), 0);
  for (const auto& r : records) {
    if (!r.valid() || !grid.contains(r.game.S, r.game.T)) continue;
    const std::size_t i = grid.index_of(r.game.S, r.game.T);
    ++valid[i];
    if (*r.choice == Choice::Cooperate) ++coop[i];
  }
  std::vector<std::string> missing;
  std::vector<double> cells(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (valid[i] == 0) missing.push_back(describe_cell(grid.s_at(i), grid.t_at(i)));
    else cells[i] = static_cast<double>(coop[i]) / static_cast<double>(valid[i]);
  }
  if (!missing.empty()) {
    std::string msg = "no valid plays for";
    for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 20); ++k) msg += (k ? ", " : " ") + missing[k];
    if (missing.size() > 20) msg += ", ... (" + std::to_string(missing.size()) + " cells)";
    throw Error(ErrorCategory::Incomplete, msg);
  }
  return CooperationMatrix(grid, std::move(cells));
}

// ---- run state ---------------------------------------------------------------

struct GameState {
  std::vector<std::uint32_t> attempts;  // per slot
  std::vector<bool> filled;             // per slot
  std::uint32_t valid = 0;
  std::uint32_t cooperate = 0;
  std::uint32_t bypassed = 0;           // valid plays that skipped the verifier
  std::uint32_t invalid_attempts = 0;
  std::uint32_t stuck_rounds = 0;       // consecutive rounds ending with missing plays
  bool relaxed = false;
  std::optional<std::uint32_t> relaxed_at_round;
};

enum class RunStatus { Running, Completed, Interrupted, Suspended, Aborted };

inline std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Running: return "running";
    case RunStatus::Completed: return "completed";
    case RunStatus::Interrupted: return "interrupted";
    case RunStatus::Suspended: return "suspended";
    case RunStatus::Aborted: return "aborted";
  }
  return "running";
}

inline std::optional<RunStatus> parse_run_status(std::string_view s) {
  for (auto v : {RunStatus::Running, RunStatus::Completed, RunStatus::Interrupted, RunStatus::Suspended,
                 RunStatus::Aborted})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

struct RunState {
  std::uint32_t rounds_completed = 0;
  std::optional<std::size_t> last_invalid_games;  // after the previous round
  std::uint64_t log_bytes = 0;                    // committed length of plays.jsonl
  RunStatus status = RunStatus::Running;
  std::vector<GameState> games;

  static RunState fresh(const RunConfig& c) {
    RunState s;
    GameState g;
    g.attempts.assign(c.plays_per_game, 0);
    g.filled.assign(c.plays_per_game, false);
    s.games.assign(c.grid.size(), g);
    return s;
  }

  std::size_t invalid_games() const {
    return static_cast<std::size_t>(
        std::count_if(games.begin(), games.end(), [](const GameState& g) { return g.valid < g.filled.size(); }));
  }
  bool complete() const { return invalid_games() == 0; }
};

inline json to_json(const RunState& s) {
  json games = json::array();
  for (const auto& g : s.games) {
    json filled = json::array();
    for (bool f : g.filled) filled.push_back(f ? 1 : 0);
    games.push_back({{"attempts", g.attempts},
                     {"filled", filled},
                     {"valid", g.valid},
                     {"cooperate", g.cooperate},
                     {"bypassed", g.bypassed},
                     {"invalid_attempts", g.invalid_attempts},
                     {"stuck_rounds", g.stuck_rounds},
                     {"relaxed", g.relaxed},
                     {"relaxed_at_round", g.relaxed_at_round ? json(*g.relaxed_at_round) : json(nullptr)}});
  }
  return {{"schema_version", kSchemaVersion},
          {"rounds_completed", s.rounds_completed},
          {"last_invalid_games", s.last_invalid_games ? json(*s.last_invalid_games) : json(nullptr)},
          {"log_bytes", s.log_bytes},
          {"status", to_string(s.status)},
          {"games", games}};
}

inline RunState state_from_json(const json& j, const RunConfig& c) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw Error(ErrorCategory::State, "unsupported state schema");
    RunState s;
    s.rounds_completed = j.at("rounds_completed").get<std::uint32_t>();
    if (!j.at("last_invalid_games").is_null()) s.last_invalid_games = j.at("last_invalid_games").get<std::size_t>();
    s.log_bytes = j.at("log_bytes").get<std::uint64_t>();
    const auto status = parse_run_status(j.at("status").get<std::string>());
    if (!status) throw Error(ErrorCategory::State, "bad run status");
    s.status = *status;
    for (const auto& gj : j.at("games")) {
      GameState g;
      g.attempts = gj.at("attempts").get<std::vector<std::uint32_t>>();
      for (int f : gj.at("filled").get<std::vector<int>>()) g.filled.push_back(f != 0);
      g.valid = gj.at("valid").get<std::uint32_t>();
      g.cooperate = gj.at("cooperate").get<std::uint32_t>();
      g.bypassed = gj.at("bypassed").get<std::uint32_t>();
      g.invalid_attempts = gj.at("invalid_attempts").get<std::uint32_t>();
      g.stuck_rounds = gj.at("stuck_rounds").get<std::uint32_t>();
      g.relaxed = gj.at("relaxed").get<bool>();
      if (!gj.at("relaxed_at_round").is_null()) g.relaxed_at_round = gj.at("relaxed_at_round").get<std::uint32_t>();
      const auto filled = static_cast<std::uint32_t>(std::count(g.filled.begin(), g.filled.end(), true));
      if (g.attempts.size() != c.plays_per_game || g.filled.size() != c.plays_per_game || filled != g.valid ||
          g.cooperate > g.valid || g.bypassed > g.valid)
        throw Error(ErrorCategory::State, "inconsistent game entry in state file");
      s.games.push_back(std::move(g));
    }
    if (s.games.size() != c.grid.size()) throw Error(ErrorCategory::State, "state does not match the grid size");
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::State, std::string("corrupt state file: ") + e.what());
  }
}

// ---- run directory -----------------------------------------------------------

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path config() const { return dir / "config.json"; }
  std::filesystem::path state() const { return dir / "state.json"; }
  std::filesystem::path plays() const { return dir / "plays.jsonl"; }
  std::filesystem::path matrix() const { return dir / "matrix.csv"; }
  std::filesystem::path summary() const { return dir / "summary.json"; }
};

namespace detail {

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCategory::Io, "cannot write " + tmp.string());
    os << content;
    os.flush();
    if (!os) throw Error(ErrorCategory::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCategory::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

inline json read_json_file(const std::filesystem::path& path, ErrorCategory on_error) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(on_error, "cannot open " + path.string());
  const json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw Error(on_error, path.string() + " is not valid JSON");
  return j;
}

}  // namespace detail

inline RunState load_state(const RunPaths& paths, const RunConfig& config) {
  return state_from_json(detail::read_json_file(paths.state(), ErrorCategory::State), config);
}

// ---- running -----------------------------------------------------------------

struct RunOptions {
  std::optional<std::uint32_t> max_rounds;  // stop after this many rounds in this invocation
};

struct GameSummary {
  Points s = 0, t = 0;
  std::uint32_t valid = 0;
  std::uint32_t attempts = 0;
  std::uint32_t bypassed = 0;
  double bypass_fraction = 0.0;
  bool relaxed = false;
  std::optional<std::uint32_t> relaxed_at_round;
};

struct RunResult {
  RunStatus status = RunStatus::Running;
  std::uint32_t rounds = 0;
  std::optional<CooperationMatrix> matrix;  // present when completed
  std::vector<GameSummary> games;
  std::filesystem::path dir;
  std::size_t records = 0;
};

inline std::vector<GameSummary> summarize(const RunConfig& c, const RunState& s) {
  std::vector<GameSummary> out;
  for (std::size_t i = 0; i < s.games.size(); ++i) {
    const GameState& g = s.games[i];
    GameSummary gs;
    gs.s = c.grid.s_at(i);
    gs.t = c.grid.t_at(i);
    gs.valid = g.valid;
    for (auto a : g.attempts) gs.attempts += a;
    gs.bypassed = g.bypassed;
    gs.bypass_fraction = g.valid ? static_cast<double>(g.bypassed) / g.valid : 0.0;
    gs.relaxed = g.relaxed;
    gs.relaxed_at_round = g.relaxed_at_round;
    out.push_back(gs);
  }
  return out;
}

inline json summary_json(const RunConfig& c, const RunState& s, const std::string& message = {}) {
  json games = json::array();
  double max_bypass = 0.0;
  std::size_t relaxed = 0;
  for (const auto& g : summarize(c, s)) {
    max_bypass = std::max(max_bypass, g.bypass_fraction);
    relaxed += g.relaxed;
    games.push_back({{"S", g.s},
                     {"T", g.t},
                     {"valid", g.valid},
                     {"attempts", g.attempts},
                     {"bypassed", g.bypassed},
                     {"bypass_fraction", g.bypass_fraction},
                     {"relaxed", g.relaxed},
                     {"relaxed_at_round", g.relaxed_at_round ? json(*g.relaxed_at_round) : json(nullptr)}});
  }
  json j{{"schema_version", kSchemaVersion},
         {"status", to_string(s.status)},
         {"rounds", s.rounds_completed},
         {"invalid_games", s.invalid_games()},
         {"relaxed_games", relaxed},
         {"max_bypass_fraction", max_bypass},
         {"games", games}};
  if (!message.empty()) j["message"] = message;
  return j;
}

namespace detail {

struct Task {
  std::size_t game_index;
  std::uint32_t slot;
};

struct TaskResult {
  PlayOutcome outcome;
  std::string started_at, finished_at;
  std::exception_ptr error;
};

// Runs every task on up to `cap` threads. Results are indexed by task, so the
// caller commits them in a fixed order whatever the completion order.
inline std::vector<TaskResult> execute_round(const Agent& agent, const std::vector<PlayContext>& contexts,
                                             std::uint32_t cap) {
  std::vector<TaskResult> results(contexts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < contexts.size(); i = next++) {
      results[i].started_at = utc_timestamp();
      try {
        results[i].outcome = agent.play(contexts[i]);
      } catch (...) {
        results[i].error = std::current_exception();
      }
      results[i].finished_at = utc_timestamp();
    }
  };
  const std::size_t n = std::min<std::size_t>(cap, contexts.size());
  if (n <= 1) {
    worker();
    return results;
  }
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (std::size_t k = 0; k < n; ++k) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return results;
}

class Run {
 public:
  Run(RunConfig config, RunState state, RunPaths paths, std::unique_ptr<Agent> agent)
      : config_(std::move(config)), state_(std::move(state)), paths_(std::move(paths)), agent_(std::move(agent)) {}

  RunResult go(const RunOptions& opt) {
    truncate_log_to_committed();
    state_.status = RunStatus::Running;
    std::uint32_t rounds_here = 0;
    while (!state_.complete()) {
      if (opt.max_rounds && rounds_here >= *opt.max_rounds) {
        state_.status = RunStatus::Interrupted;
        persist();
        return result();
      }
      round();
      ++rounds_here;
    }
    state_.status = RunStatus::Completed;
    persist();
    const auto records = read_play_log(paths_.plays().string());
    auto matrix = aggregate_matrix(records, config_.grid);
    save_csv(paths_.matrix().string(), matrix);
    RunResult r = result();
    r.matrix = std::move(matrix);
    r.records = records.size();
    return r;
  }

 private:
  void round() {
    const std::uint32_t round_no = state_.rounds_completed + 1;
    std::vector<PlayContext> contexts;
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < state_.games.size(); ++i) {
      const GameState& g = state_.games[i];
      for (std::uint32_t slot = 0; slot < g.filled.size(); ++slot) {
        if (g.filled[slot]) continue;
        if (g.attempts[slot] >= config_.max_attempts_per_slot) abort_run(i, slot);
        const Game game = config_.grid.game_at(i);
        contexts.push_back({game, PlaySeed{config_.seed, game.S, game.T, slot, g.attempts[slot]}, g.relaxed});
        tasks.push_back({i, slot});
      }
    }

    auto results = execute_round(*agent_, contexts, config_.concurrency);
    for (const auto& r : results)
      if (r.error) suspend(round_no, r.error);

    std::string lines;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      GameState& g = state_.games[tasks[k].game_index];
      const PlayOutcome& o = results[k].outcome;
      PlayRecord rec;
      rec.game = contexts[k].game;
      rec.game_index = tasks[k].game_index;
      rec.mapping = o.mapping;
      rec.stage = o.stage;
      rec.long_answer = o.long_answer;
      rec.verdict = o.verdict;
      rec.extracted = o.extracted;
      rec.choice = o.choice();
      rec.verifier_bypassed = o.verifier_bypassed;
      rec.invalid_reason = o.invalid_reason;
      rec.round = round_no;
      rec.seed = contexts[k].seed;
      rec.started_at = results[k].started_at;
      rec.finished_at = results[k].finished_at;
      rec.calls = o.calls;
      lines += to_json(rec).dump() + "\n";

      ++g.attempts[tasks[k].slot];
      if (rec.valid()) {
        g.filled[tasks[k].slot] = true;
        ++g.valid;
        if (*rec.choice == Choice::Cooperate) ++g.cooperate;
        if (rec.verifier_bypassed) ++g.bypassed;
      } else {
        ++g.invalid_attempts;
      }
    }

    const std::size_t invalid = state_.invalid_games();
    std::vector<std::size_t> newly_relaxed;
    const bool verifier_in_use = agent_->stage() == llm::Stage::Verified;
    for (std::size_t i = 0; i < state_.games.size(); ++i) {
      GameState& g = state_.games[i];
      g.stuck_rounds = g.valid < g.filled.size() ? g.stuck_rounds + 1 : 0;
    }
    // Unchanged count of games still missing plays between consecutive rounds
    // relaxes exactly those games. Relaxation is permanent.
    if (verifier_in_use && invalid > 0 && state_.last_invalid_games && *state_.last_invalid_games == invalid) {
      for (std::size_t i = 0; i < state_.games.size(); ++i) {
        GameState& g = state_.games[i];
        if (g.valid < g.filled.size() && !g.relaxed) {
          g.relaxed = true;
          g.relaxed_at_round = round_no;
          newly_relaxed.push_back(i);
        }
      }
    }
    if (!newly_relaxed.empty()) {
      json cells = json::array();
      for (std::size_t i : newly_relaxed) cells.push_back({{"S", config_.grid.s_at(i)}, {"T", config_.grid.t_at(i)}});
      lines += json{{"schema_version", kSchemaVersion}, {"event", "relaxed"}, {"round", round_no},
                    {"invalid_games", invalid}, {"games", cells}}.dump() + "\n";
    }
    state_.last_invalid_games = invalid;
    state_.rounds_completed = round_no;
    append_log(lines);
    persist();
  }

  [[noreturn]] void suspend(std::uint32_t round_no, const std::exception_ptr& error) {
    ErrorCategory category = ErrorCategory::Transport;
    std::string message;
    try {
      std::rethrow_exception(error);
    } catch (const Error& e) {
      category = e.category();
      message = e.what();
    } catch (const std::exception& e) {
      message = e.what();
    }
    // The uncommitted round is dropped; resuming replays it with the same seeds.
    append_log(json{{"schema_version", kSchemaVersion}, {"event", "suspended"}, {"round", round_no},
                    {"category", to_string(category)}, {"error", message}}.dump() + "\n");
    state_.status = RunStatus::Suspended;
    persist(message);
    throw Error(category, "run suspended in round " + std::to_string(round_no) + ": " + message +
                              "; resume with --resume " + paths_.dir.string());
  }

  [[noreturn]] void abort_run(std::size_t game_index, std::uint32_t slot) {
    const std::string msg = "game " + describe_cell(config_.grid.s_at(game_index), config_.grid.t_at(game_index)) +
                            " slot " + std::to_string(slot) + " reached " +
                            std::to_string(config_.max_attempts_per_slot) + " attempts without a valid answer";
    append_log(json{{"schema_version", kSchemaVersion}, {"event", "aborted"}, {"round", state_.rounds_completed + 1},
                    {"error", msg}}.dump() + "\n");
    state_.status = RunStatus::Aborted;
    persist(msg);
    throw Error(ErrorCategory::Aborted, msg + "; see " + paths_.summary().string());
  }

  void truncate_log_to_committed() {
    std::error_code ec;
    const auto size = std::filesystem::exists(paths_.plays()) ? std::filesystem::file_size(paths_.plays()) : 0;
    if (size < state_.log_bytes) throw Error(ErrorCategory::State, "play log is shorter than the committed state");
    if (size > state_.log_bytes) {
      std::filesystem::resize_file(paths_.plays(), state_.log_bytes, ec);
      if (ec) throw Error(ErrorCategory::Io, "cannot truncate " + paths_.plays().string() + ": " + ec.message());
    }
  }

  void append_log(const std::string& lines) {
    std::ofstream os(paths_.plays(), std::ios::binary | std::ios::app);
    if (!os) throw Error(ErrorCategory::Io, "cannot append to " + paths_.plays().string());
    os << lines;
    os.flush();
    if (!os) throw Error(ErrorCategory::Io, "write failed for " + paths_.plays().string());
    state_.log_bytes += lines.size();
  }

  void persist(const std::string& message = {}) {
    detail::write_file_atomic(paths_.state(), to_json(state_).dump(1) + "\n");
    detail::write_file_atomic(paths_.summary(), summary_json(config_, state_, message).dump(2) + "\n");
  }

  RunResult result() const {
    RunResult r;
    r.status = state_.status;
    r.rounds = state_.rounds_completed;
    r.games = summarize(config_, state_);
    r.dir = paths_.dir;
    return r;
  }

  RunConfig config_;
  RunState state_;
  RunPaths paths_;
  std::unique_ptr<Agent> agent_;
};

}  // namespace detail

// Starts a run in config.output_dir, which must not already hold a run. The
// agent defaults to the one described by config.agent.
inline RunResult run_experiment(const RunConfig& config, const RunOptions& opt = {},
                                std::unique_ptr<Agent> agent = nullptr) {
  validate(config);
  RunPaths paths{config.output_dir};
  std::error_code ec;
  std::filesystem::create_directories(paths.dir, ec);
  if (ec) throw Error(ErrorCategory::Io, "cannot create " + paths.dir.string() + ": " + ec.message());
  if (std::filesystem::exists(paths.state()) || std::filesystem::exists(paths.plays()))
    throw Error(ErrorCategory::State, paths.dir.string() + " already holds a run; use --resume");
  if (!agent) agent = make_agent(config.agent);
  detail::write_file_atomic(paths.config(), to_json(config).dump(2) + "\n");
  std::ofstream(paths.plays(), std::ios::binary | std::ios::trunc).flush();
  return detail::Run(config, RunState::fresh(config), paths, std::move(agent)).go(opt);
}

inline RunConfig load_run_config(const std::filesystem::path& dir) {
  return config_from_json(detail::read_json_file(RunPaths{dir}.config(), ErrorCategory::State));
}

// Continues a run from its directory. A completed run is re-aggregated only.
inline RunResult resume_experiment(const std::filesystem::path& dir, const RunOptions& opt = {},
                                   std::unique_ptr<Agent> agent = nullptr) {
  RunPaths paths{dir};
  RunConfig config = load_run_config(dir);
  config.output_dir = dir.string();
  validate(config);
  RunState state = load_state(paths, config);
  if (!agent) agent = make_agent(config.agent);
  return detail::Run(std::move(config), std::move(state), paths, std::move(agent)).go(opt);
}

}  // namespace dyadlab
