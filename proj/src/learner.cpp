#include "crsfd/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <utility>

#include "crsfd/rng.hpp"
#include "crsfd/serialize.hpp"
#include "crsfd/shaping.hpp"

namespace crsfd {

std::string algo_name(Algo algo) {
  switch (algo) {
    case Algo::kCrsfd: return "crsfd";
    case Algo::kSacfd: return "sacfd";
    case Algo::kSac: return "sac";
    case Algo::kSqil: return "sqil";
    case Algo::kBc: return "bc";
  }
  throw std::logic_error("unhandled algo enum value");
}

Algo algo_from_name(const std::string& name) {
  if (name == "crsfd") return Algo::kCrsfd;
  if (name == "sacfd") return Algo::kSacfd;
  if (name == "sac") return Algo::kSac;
  if (name == "sqil") return Algo::kSqil;
  if (name == "bc") return Algo::kBc;
  throw std::invalid_argument("unknown algorithm: " + name +
                              " (expected crsfd, sacfd, sac, sqil, or bc)");
}

void LearnerConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("discount must lie in (0, 1)");
  if (temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("polyak step must lie in (0, 1]");
  if (target_period <= 0) throw std::invalid_argument("target period must be positive");
  if (ratio_decay_period <= 0) throw std::invalid_argument("ratio decay period must be positive");
  if (batch <= 0) throw std::invalid_argument("batch size must be positive");
  if (critic_lr <= 0.0) throw std::invalid_argument("critic learning rate must be positive");
  if (critic_lr_decay < 0.0) throw std::invalid_argument("learning rate decay must be non-negative");
  if (mlp_lr <= 0.0) throw std::invalid_argument("mlp learning rate must be positive");
  if (total_env_steps <= 0) throw std::invalid_argument("total environment steps must be positive");
  if (updates_per_episode < 0) throw std::invalid_argument("updates per episode must be non-negative");
  if (expert_ratio < 0.0 || expert_ratio > 1.0)
    throw std::invalid_argument("expert ratio must lie in [0, 1]");
  if (ratio_decay < 0.0) throw std::invalid_argument("ratio decay must be non-negative");
  if (pretrain_updates < 0) throw std::invalid_argument("pretraining updates must be non-negative");
  if (eval_period <= 0) throw std::invalid_argument("evaluation period must be positive");
  if (eval_episodes <= 0) throw std::invalid_argument("evaluation episode count must be positive");
  if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
  if (agent_capacity == 0) throw std::invalid_argument("agent replay capacity must be positive");
  if (bc_updates <= 0) throw std::invalid_argument("bc update count must be positive");
  for (int h : mlp_hidden)
    if (h <= 0) throw std::invalid_argument("mlp hidden widths must be positive");
}

// --- SoftQAgent --------------------------------------------------------------

SoftQAgent::SoftQAgent(const LearnerConfig& cfg, const Env& env, std::uint64_t seed)
    : cfg_(cfg), env_(&env), n_states_(env.n_states()), n_actions_(env.n_actions()) {
  cfg_.validate();
  if (n_states_ <= 0 || n_actions_ <= 0)
    throw std::invalid_argument("agent needs a non-empty state and action space");
  if (cfg_.backend == CriticBackend::kTabular) {
    q_.assign(static_cast<std::size_t>(n_states_) * static_cast<std::size_t>(n_actions_),
              cfg_.q_init);
    q_target_ = q_;
  } else {
    const int in_dim = static_cast<int>(env.features(0).size());
    net_ = MlpNet::make(in_dim, cfg_.mlp_hidden, n_actions_, mix64(seed ^ 0x9a617c3b2d1f0e55ULL));
    net_target_ = net_;
  }
}

std::vector<double> SoftQAgent::features_of(int state) const { return env_->features(state); }

std::vector<double> SoftQAgent::q_row(int state) const {
  if (state < 0 || state >= n_states_) throw std::out_of_range("state index out of range");
  if (cfg_.backend == CriticBackend::kTabular) {
    const std::size_t base = static_cast<std::size_t>(state) * static_cast<std::size_t>(n_actions_);
    return std::vector<double>(q_.begin() + base, q_.begin() + base + n_actions_);
  }
  return net_.forward(features_of(state));
}

std::vector<double> SoftQAgent::target_q_row(int state) const {
  if (state < 0 || state >= n_states_) throw std::out_of_range("state index out of range");
  if (cfg_.backend == CriticBackend::kTabular) {
    const std::size_t base = static_cast<std::size_t>(state) * static_cast<std::size_t>(n_actions_);
    return std::vector<double>(q_target_.begin() + base, q_target_.begin() + base + n_actions_);
  }
  return net_target_.forward(features_of(state));
}

int SoftQAgent::act(int state, std::mt19937_64& rng) const {
  const std::vector<double> q = q_row(state);
  double best = -std::numeric_limits<double>::infinity();
  for (double v : q) best = std::max(best, v);
  std::vector<double> probs(q.size());
  double z = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) {
    probs[a] = std::exp((q[a] - best) / cfg_.temperature);
    z += probs[a];
  }
  for (double& p : probs) p /= z;
  return rand_categorical(rng, probs);
}

int SoftQAgent::greedy_action(int state) const {
  const std::vector<double> q = q_row(state);
  int best = 0;
  for (int a = 1; a < n_actions_; ++a)
    if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
  return best;
}

double SoftQAgent::current_lr() const {
  const double lr = cfg_.backend == CriticBackend::kTabular ? cfg_.critic_lr : cfg_.mlp_lr;
  return lr / (1.0 + cfg_.critic_lr_decay * static_cast<double>(updates_));
}

double SoftQAgent::td_update(const std::vector<const ReplayEntry*>& batch) {
  if (batch.empty()) throw std::invalid_argument("td update needs a non-empty batch");
  const double lr = current_lr();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;

  auto target_of = [&](const Transition& t) {
    double y = t.reward;
    if (!t.done) {
      const std::vector<double> qn = target_q_row(t.next_state);
      y += cfg_.gamma * soft_max_value(qn.data(), n_actions_, cfg_.temperature);
    }
    return y;
  };

  if (cfg_.backend == CriticBackend::kTabular) {
    // Batch gradient of the mean squared error at the pre-update table: read
    // all errors first, then apply, so duplicates within a batch see the same
    // parameter values.
    std::vector<std::pair<std::size_t, double>> grads;
    grads.reserve(batch.size());
    for (const ReplayEntry* e : batch) {
      const Transition& t = e->t;
      const double y = target_of(t);
      const std::size_t idx =
          static_cast<std::size_t>(t.state) * static_cast<std::size_t>(n_actions_) +
          static_cast<std::size_t>(t.action);
      const double err = q_[idx] - y;
      loss += err * err * inv_b;
      grads.emplace_back(idx, 2.0 * err * inv_b);
    }
    for (const auto& [idx, g] : grads) q_[idx] -= lr * g;
  } else {
    MlpNet grad = MlpNet::zeros_like(net_);
    for (const ReplayEntry* e : batch) {
      const Transition& t = e->t;
      const double y = target_of(t);
      MlpNet::Tape tape;
      const std::vector<double> out = net_.forward(features_of(t.state), tape);
      const double err = out[static_cast<std::size_t>(t.action)] - y;
      loss += err * err * inv_b;
      std::vector<double> out_grad(static_cast<std::size_t>(n_actions_), 0.0);
      out_grad[static_cast<std::size_t>(t.action)] = 2.0 * err * inv_b;
      net_.backward(tape, out_grad, grad);
    }
    net_.axpy(-lr, grad);
  }
  if (!std::isfinite(loss))
    throw std::runtime_error("td loss diverged; lower the learning rate or check reward scales");
  ++updates_;
  return loss;
}

void SoftQAgent::polyak_update() {
  if (cfg_.backend == CriticBackend::kTabular) {
    for (std::size_t i = 0; i < q_.size(); ++i) q_target_[i] += cfg_.tau * (q_[i] - q_target_[i]);
  } else {
    net_target_.polyak_from(net_, cfg_.tau);
  }
}

void SoftQAgent::hard_sync() {
  if (cfg_.backend == CriticBackend::kTabular) {
    q_target_ = q_;
  } else {
    net_target_ = net_;
  }
}

const std::vector<double>& SoftQAgent::table() const {
  if (cfg_.backend != CriticBackend::kTabular) throw std::logic_error("agent has no table: mlp backend");
  return q_;
}

const std::vector<double>& SoftQAgent::target_table() const {
  if (cfg_.backend != CriticBackend::kTabular) throw std::logic_error("agent has no table: mlp backend");
  return q_target_;
}

std::vector<double>& SoftQAgent::mutable_table() {
  if (cfg_.backend != CriticBackend::kTabular) throw std::logic_error("agent has no table: mlp backend");
  return q_;
}

void SoftQAgent::restore_tabular(std::vector<double> online, std::vector<double> target) {
  if (cfg_.backend != CriticBackend::kTabular) throw std::logic_error("agent has no table: mlp backend");
  const std::size_t want = static_cast<std::size_t>(n_states_) * static_cast<std::size_t>(n_actions_);
  if (online.size() != want || target.size() != want)
    throw std::invalid_argument("restored table size does not match the environment");
  q_ = std::move(online);
  q_target_ = std::move(target);
}

const MlpNet& SoftQAgent::net() const {
  if (cfg_.backend != CriticBackend::kMlp) throw std::logic_error("agent has no net: tabular backend");
  return net_;
}

const MlpNet& SoftQAgent::target_net() const {
  if (cfg_.backend != CriticBackend::kMlp) throw std::logic_error("agent has no net: tabular backend");
  return net_target_;
}

void SoftQAgent::restore_mlp(MlpNet online, MlpNet target) {
  if (cfg_.backend != CriticBackend::kMlp) throw std::logic_error("agent has no net: tabular backend");
  if (online.output_dim != n_actions_ || target.output_dim != n_actions_)
    throw std::invalid_argument("restored net output width does not match the action space");
  net_ = std::move(online);
  net_target_ = std::move(target);
}

// --- evaluation ---------------------------------------------------------------

EvalRow evaluate_policy(Env& env, const SoftQAgent& agent, int episodes, int horizon,
                        std::mt19937_64& rng) {
  if (episodes <= 0) throw std::invalid_argument("evaluation needs at least one episode");
  const ActionSampler greedy = [&agent](int state, std::mt19937_64&) {
    return agent.greedy_action(state);
  };
  EvalRow row;
  double successes = 0.0;
  double returns = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    const Trajectory traj = rollout(env, greedy, horizon, rng);
    returns += traj.total_reward();
    if (!traj.transitions.empty() && traj.transitions.back().done) successes += 1.0;
  }
  row.success_rate = successes / static_cast<double>(episodes);
  row.mean_return = returns / static_cast<double>(episodes);
  return row;
}

// --- snapshots ------------------------------------------------------------------

json agent_snapshot_json(const SoftQAgent& agent) {
  json j;
  j["updates"] = agent.update_count();
  if (agent.backend() == CriticBackend::kTabular) {
    j["backend"] = "tabular";
    j["online"] = agent.table();
    j["target"] = agent.target_table();
  } else {
    j["backend"] = "mlp";
    j["online"] = mlp_to_json(agent.net());
    j["target"] = mlp_to_json(agent.target_net());
  }
  return j;
}

void agent_restore_snapshot(SoftQAgent& agent, const json& j) {
  const std::string backend = j.at("backend").get<std::string>();
  const std::string want = agent.backend() == CriticBackend::kTabular ? "tabular" : "mlp";
  if (backend != want)
    throw std::runtime_error("critic snapshot backend (" + backend + ") does not match the run");
  if (agent.backend() == CriticBackend::kTabular) {
    agent.restore_tabular(j.at("online").get<std::vector<double>>(),
                          j.at("target").get<std::vector<double>>());
  } else {
    agent.restore_mlp(mlp_from_json(j.at("online")), mlp_from_json(j.at("target")));
  }
  agent.set_update_count(j.at("updates").get<long>());
}

// --- training loop --------------------------------------------------------------

namespace {

struct LoopState {
  long env_steps = 0;
  long episodes = 0;
  long train_successes = 0;
  long eval_idx = 0;
  long push_counter = 0;
  double loss_sum = 0.0;
  long loss_count = 0;
};

json config_to_json(const LearnerConfig& cfg) {
  json j;
  j["backend"] = cfg.backend == CriticBackend::kTabular ? "tabular" : "mlp";
  j["gamma"] = cfg.gamma;
  j["temperature"] = cfg.temperature;
  j["tau"] = cfg.tau;
  j["target_period"] = cfg.target_period;
  j["batch"] = cfg.batch;
  j["critic_lr"] = cfg.critic_lr;
  j["critic_lr_decay"] = cfg.critic_lr_decay;
  j["total_env_steps"] = cfg.total_env_steps;
  j["updates_per_episode"] = cfg.updates_per_episode;
  j["expert_ratio"] = cfg.expert_ratio;
  j["ratio_decay"] = cfg.ratio_decay;
  j["ratio_decay_period"] = cfg.ratio_decay_period;
  j["pretrain_updates"] = cfg.pretrain_updates;
  j["eval_period"] = cfg.eval_period;
  j["eval_episodes"] = cfg.eval_episodes;
  j["horizon"] = cfg.horizon;
  j["agent_capacity"] = cfg.agent_capacity;
  j["mlp_hidden"] = cfg.mlp_hidden;
  j["mlp_lr"] = cfg.mlp_lr;
  j["bc_updates"] = cfg.bc_updates;
  return j;
}

json entry_to_json(const ReplayEntry& e) {
  return json::array(
      {e.t.state, e.t.action, e.t.reward, e.t.next_state, e.t.done, e.t.truncated, e.raw_reward});
}

ReplayEntry entry_from_json(const json& j) {
  if (!j.is_array() || j.size() != 7) throw std::runtime_error("replay entry must be a 7-element array");
  ReplayEntry e;
  e.t.state = j.at(0).get<int>();
  e.t.action = j.at(1).get<int>();
  e.t.reward = j.at(2).get<double>();
  e.t.next_state = j.at(3).get<int>();
  e.t.done = j.at(4).get<bool>();
  e.t.truncated = j.at(5).get<bool>();
  e.raw_reward = j.at(6).get<double>();
  return e;
}

ReplayEntry shaped_entry(const Transition& t, Algo algo, const PotentialFn* phi, double gamma_k,
                         bool is_expert) {
  ReplayEntry e;
  e.t = t;
  e.raw_reward = t.reward;
  switch (algo) {
    case Algo::kCrsfd:
      e.t.reward =
          shape_reward(t.reward, phi->value(t.state), phi->value(t.next_state), gamma_k, t.done);
      break;
    case Algo::kSqil:
      e.t.reward = is_expert ? 1.0 : 0.0;
      break;
    default:
      break;  // sacfd and sac train on raw rewards
  }
  return e;
}

void save_checkpoint(const std::string& path, Algo algo, std::uint64_t seed,
                     const std::string& env_id, const std::string& config_digest,
                     const std::string& demo_digest, const LoopState& st,
                     const std::mt19937_64& rng_env, const std::mt19937_64& rng_act,
                     const std::mt19937_64& rng_update, const SoftQAgent& agent,
                     const DualReplayBuffer& buffer, const RunResult& result) {
  json j = make_versioned("crsfd/checkpoint");
  j["algo"] = algo_name(algo);
  j["seed"] = seed;
  j["env_id"] = env_id;
  j["config_digest"] = config_digest;
  j["demo_digest"] = demo_digest;
  j["env_steps"] = st.env_steps;
  j["episodes"] = st.episodes;
  j["train_successes"] = st.train_successes;
  j["eval_idx"] = st.eval_idx;
  j["push_counter"] = st.push_counter;
  j["loss_sum"] = st.loss_sum;
  j["loss_count"] = st.loss_count;
  j["rng_env"] = rng_state_string(rng_env);
  j["rng_act"] = rng_state_string(rng_act);
  j["rng_update"] = rng_state_string(rng_update);
  j["agent"] = agent_snapshot_json(agent);
  json pool = json::array();
  for (const ReplayEntry& e : buffer.agent_entries()) pool.push_back(entry_to_json(e));
  j["buffer"] = json{{"agent", std::move(pool)},
                     {"next", buffer.agent_next()},
                     {"decay_ticks", buffer.decay_ticks()}};
  json curves = json::array();
  for (const EvalRow& row : result.curves)
    curves.push_back(json::array({row.step, row.success_rate, row.mean_return, row.td_loss}));
  j["curves"] = std::move(curves);
  j["warnings"] = result.warnings;
  write_text_file(path, j.dump());
}

void restore_checkpoint(const std::string& path, Algo algo, std::uint64_t seed,
                        const std::string& env_id, const std::string& config_digest,
                        const std::string& demo_digest, LoopState& st, std::mt19937_64& rng_env,
                        std::mt19937_64& rng_act, std::mt19937_64& rng_update, SoftQAgent& agent,
                        DualReplayBuffer& buffer, RunResult& result) {
  const json j = read_json_file(path);
  check_schema(j, "crsfd/checkpoint");
  if (j.at("algo").get<std::string>() != algo_name(algo))
    throw std::runtime_error("checkpoint belongs to a different algorithm");
  if (j.at("seed").get<std::uint64_t>() != seed)
    throw std::runtime_error("checkpoint belongs to a different seed");
  if (j.at("env_id").get<std::string>() != env_id)
    throw std::runtime_error("checkpoint belongs to a different environment");
  if (j.at("config_digest").get<std::string>() != config_digest)
    throw std::runtime_error("checkpoint belongs to a different learner configuration");
  if (j.at("demo_digest").get<std::string>() != demo_digest)
    throw std::runtime_error("checkpoint belongs to a different demonstration set");

  st.env_steps = j.at("env_steps").get<long>();
  st.episodes = j.at("episodes").get<long>();
  if (j.contains("train_successes")) st.train_successes = j.at("train_successes").get<long>();
  st.eval_idx = j.at("eval_idx").get<long>();
  st.push_counter = j.at("push_counter").get<long>();
  st.loss_sum = j.at("loss_sum").get<double>();
  st.loss_count = j.at("loss_count").get<long>();
  rng_state_restore(rng_env, j.at("rng_env").get<std::string>());
  rng_state_restore(rng_act, j.at("rng_act").get<std::string>());
  rng_state_restore(rng_update, j.at("rng_update").get<std::string>());
  agent_restore_snapshot(agent, j.at("agent"));

  const json& buf = j.at("buffer");
  std::vector<ReplayEntry> pool;
  pool.reserve(buf.at("agent").size());
  for (const auto& e : buf.at("agent")) pool.push_back(entry_from_json(e));
  buffer.restore_agent(std::move(pool), buf.at("next").get<std::size_t>());
  buffer.restore_decay_ticks(buf.at("decay_ticks").get<long>());

  result.curves.clear();
  for (const auto& row : j.at("curves")) {
    EvalRow r;
    r.step = row.at(0).get<long>();
    r.success_rate = row.at(1).get<double>();
    r.mean_return = row.at(2).get<double>();
    r.td_loss = row.at(3).get<double>();
    result.curves.push_back(r);
  }
  result.warnings = j.at("warnings").get<std::vector<std::string>>();
}

RunResult run_loop(Algo algo, Env& env, Env& eval_env, const DemoSet* demos,
                   const PotentialFn* phi, double gamma_k, const LearnerConfig& cfg,
                   std::uint64_t seed, const RunOptions& opts) {
  cfg.validate();
  const bool demos_ignored = (algo == Algo::kSac && demos != nullptr);
  if (demos_ignored) demos = nullptr;

  RunResult result;
  result.agent = std::make_shared<SoftQAgent>(cfg, env, seed);
  SoftQAgent& agent = *result.agent;

  const int horizon = cfg.horizon > 0 ? cfg.horizon : env.default_horizon();
  if (horizon <= 0)
    throw std::invalid_argument(
        "training needs a horizon: set LearnerConfig::horizon or use an env with a default");

  DualReplayBuffer buffer(cfg.agent_capacity, cfg.expert_ratio, cfg.ratio_decay);
  if (demos != nullptr) {
    std::vector<ReplayEntry> expert;
    for (const auto& traj : demos->trajectories)
      for (const auto& t : traj.transitions)
        expert.push_back(shaped_entry(t, algo, phi, gamma_k, true));
    if (expert.empty()) throw std::invalid_argument("demonstration set has no transitions");
    buffer.load_expert(std::move(expert));
  }

  std::mt19937_64 rng_env = make_rng(seed, 1);
  std::mt19937_64 rng_act = make_rng(seed, 2);
  std::mt19937_64 rng_update = make_rng(seed, 3);

  LoopState st;
  const std::string config_digest = sha1_hex(config_to_json(cfg).dump());
  const std::string demo_digest = demos != nullptr ? sha1_hex(demos_to_json(*demos).dump()) : "";

  bool restored = false;
  if (!opts.checkpoint_path.empty() && opts.resume &&
      std::filesystem::exists(opts.checkpoint_path)) {
    restore_checkpoint(opts.checkpoint_path, algo, seed, env.id(), config_digest, demo_digest, st,
                       rng_env, rng_act, rng_update, agent, buffer, result);
    restored = true;
    result.resumed = true;
  }

  if (demos_ignored) {
    const std::string note = "sac ignores demonstrations; the provided demo set was not used";
    if (std::find(result.warnings.begin(), result.warnings.end(), note) == result.warnings.end())
      result.warnings.push_back(note);
  }

  auto do_update = [&]() {
    const auto batch = buffer.sample(cfg.batch, rng_update);
    st.loss_sum += agent.td_update(batch);
    ++st.loss_count;
    if (agent.update_count() % cfg.target_period == 0) agent.polyak_update();
    if (agent.update_count() % cfg.ratio_decay_period == 0) buffer.decay_ratio();
  };

  if (!restored && cfg.pretrain_updates > 0) {
    if (buffer.expert_size() == 0) {
      result.warnings.push_back("pretraining skipped: no demonstrations loaded");
    } else {
      for (int k = 0; k < cfg.pretrain_updates; ++k) do_update();
    }
  }

  auto maybe_checkpoint = [&](bool force) {
    if (opts.checkpoint_path.empty()) return;
    if (!force && st.episodes % std::max(1, opts.checkpoint_period_episodes) != 0) return;
    save_checkpoint(opts.checkpoint_path, algo, seed, env.id(), config_digest, demo_digest, st,
                    rng_env, rng_act, rng_update, agent, buffer, result);
  };

  while (st.env_steps < cfg.total_env_steps) {
    std::vector<Transition> raw;
    const ResetResult r0 = env.reset(rng_env);
    if (r0.done) throw std::runtime_error("environment reported done at reset");
    int s = r0.state;
    for (int t = 0; t < horizon; ++t) {
      const int a = agent.act(s, rng_act);
      const StepResult sr = env.step(a, rng_env);
      Transition tr;
      tr.state = s;
      tr.action = a;
      tr.reward = sr.reward;
      tr.next_state = sr.next_state;
      tr.done = sr.done;
      tr.truncated = !sr.done && (t + 1 == horizon);
      raw.push_back(tr);

      ReplayEntry e = shaped_entry(tr, algo, phi, gamma_k, false);
      ++st.push_counter;
      if (algo == Algo::kCrsfd && st.push_counter % 100 == 0) {
        // 1% audit: the stored reward must re-derive from the raw one.
        const double again = shape_reward(tr.reward, phi->value(tr.state),
                                          phi->value(tr.next_state), gamma_k, tr.done);
        if (std::abs(again - e.t.reward) > 1e-12)
          throw std::runtime_error("shaped reward failed its consistency recheck");
      }
      buffer.push(e);
      ++st.env_steps;
      s = sr.next_state;
      if (sr.done) {
        ++st.train_successes;
        break;
      }
    }
    ++st.episodes;

    if (algo == Algo::kCrsfd && st.episodes % 100 == 0 && !raw.empty()) {
      // Spot-check the telescoping identity on the raw episode.
      Trajectory traj;
      traj.transitions = raw;
      traj.task_id = env.id();
      const ShapedReturnIdentity ident = shaped_return_identity(traj, *phi, gamma_k);
      const double scale = std::max(1.0, std::abs(ident.rhs));
      if (std::abs(ident.lhs - ident.rhs) > 1e-9 * scale)
        throw std::runtime_error("telescoping identity violated by a training episode");
    }

    const long n_up =
        cfg.updates_per_episode > 0 ? cfg.updates_per_episode : static_cast<long>(raw.size());
    for (long u = 0; u < n_up; ++u) do_update();

    while ((st.eval_idx + 1) * cfg.eval_period <= st.env_steps) {
      ++st.eval_idx;
      std::mt19937_64 eval_rng = make_rng(seed, 1000 + static_cast<std::uint64_t>(st.eval_idx));
      EvalRow row = evaluate_policy(eval_env, agent, cfg.eval_episodes, horizon, eval_rng);
      row.step = st.eval_idx * cfg.eval_period;
      row.td_loss = st.loss_count > 0 ? st.loss_sum / static_cast<double>(st.loss_count) : 0.0;
      st.loss_sum = 0.0;
      st.loss_count = 0;
      result.curves.push_back(row);
    }

    maybe_checkpoint(st.env_steps >= cfg.total_env_steps);
  }

  result.env_steps = st.env_steps;
  result.updates = agent.update_count();
  result.episodes = st.episodes;
  result.train_successes = st.train_successes;
  return result;
}

RunResult run_bc(Env& env, Env& eval_env, const DemoSet& demos, const LearnerConfig& cfg,
                 std::uint64_t seed) {
  cfg.validate();
  RunResult result;
  result.agent = std::make_shared<SoftQAgent>(cfg, env, seed);
  SoftQAgent& agent = *result.agent;

  const int horizon = cfg.horizon > 0 ? cfg.horizon : env.default_horizon();
  if (horizon <= 0)
    throw std::invalid_argument(
        "evaluation needs a horizon: set LearnerConfig::horizon or use an env with a default");

  const int n_states = env.n_states();
  const int n_actions = env.n_actions();
  std::vector<std::pair<int, int>> pairs;
  for (const auto& traj : demos.trajectories)
    for (const auto& t : traj.transitions) pairs.emplace_back(t.state, t.action);
  if (pairs.empty()) throw std::invalid_argument("demonstration set has no transitions");

  double final_loss = 0.0;
  if (cfg.backend == CriticBackend::kTabular) {
    // The cross-entropy optimum of a tabular softmax is the empirical action
    // distribution; Laplace smoothing keeps unseen actions at finite logits.
    const double alpha = 0.1;
    std::vector<double> counts(static_cast<std::size_t>(n_states) * n_actions, 0.0);
    for (const auto& [s, a] : pairs)
      counts[static_cast<std::size_t>(s) * n_actions + static_cast<std::size_t>(a)] += 1.0;
    std::vector<double> logits(counts.size(), 0.0);
    for (int s = 0; s < n_states; ++s) {
      double total = 0.0;
      for (int a = 0; a < n_actions; ++a) total += counts[static_cast<std::size_t>(s) * n_actions + a];
      if (total == 0.0) continue;  // unseen state keeps a uniform policy
      for (int a = 0; a < n_actions; ++a) {
        const std::size_t idx = static_cast<std::size_t>(s) * n_actions + static_cast<std::size_t>(a);
        logits[idx] = std::log((counts[idx] + alpha) / (total + alpha * n_actions));
      }
    }
    for (const auto& [s, a] : pairs)
      final_loss -= logits[static_cast<std::size_t>(s) * n_actions + static_cast<std::size_t>(a)];
    final_loss /= static_cast<double>(pairs.size());
    agent.restore_tabular(logits, logits);
  } else {
    MlpNet net = MlpNet::make(static_cast<int>(env.features(0).size()), cfg.mlp_hidden, n_actions,
                              mix64(seed ^ 0xbc5a11e3d7f09621ULL));
    std::mt19937_64 rng = make_rng(seed, 4);
    for (int step = 0; step < cfg.bc_updates; ++step) {
      MlpNet grad = MlpNet::zeros_like(net);
      double loss = 0.0;
      const double inv_b = 1.0 / static_cast<double>(cfg.batch);
      for (int i = 0; i < cfg.batch; ++i) {
        const auto& [s, a] = pairs[static_cast<std::size_t>(rand_int(rng, static_cast<int>(pairs.size())))];
        MlpNet::Tape tape;
        const std::vector<double> logits = net.forward(env.features(s), tape);
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        double z = 0.0;
        for (double v : logits) z += std::exp(v - mx);
        loss += (std::log(z) + mx - logits[static_cast<std::size_t>(a)]) * inv_b;
        std::vector<double> out_grad(static_cast<std::size_t>(n_actions));
        for (int j = 0; j < n_actions; ++j) {
          const double p = std::exp(logits[static_cast<std::size_t>(j)] - mx) / z;
          out_grad[static_cast<std::size_t>(j)] = (p - (j == a ? 1.0 : 0.0)) * inv_b;
        }
        net.backward(tape, out_grad, grad);
      }
      net.axpy(-cfg.mlp_lr, grad);
      final_loss = loss;
    }
    agent.restore_mlp(net, net);
    result.updates = cfg.bc_updates;
  }

  std::mt19937_64 eval_rng = make_rng(seed, 1001);
  EvalRow row = evaluate_policy(eval_env, agent, cfg.eval_episodes, horizon, eval_rng);
  row.step = 0;
  row.td_loss = final_loss;
  result.curves.push_back(row);
  result.warnings.push_back(
      "bc stores policy logits in the critic slot; they are not value estimates");
  return result;
}

}  // namespace

RunResult run_crsfd(Env& env, Env& eval_env, const DemoSet& demos, const PotentialFn& potential,
                    const LearnerConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  if (!(cfg.gamma > demos.gamma0))
    throw std::invalid_argument(
        "shaping discount must strictly exceed the discount the demos were scored with");
  return run_loop(Algo::kCrsfd, env, eval_env, &demos, &potential, cfg.gamma, cfg, seed, opts);
}

RunResult run_baseline(Algo algo, Env& env, Env& eval_env, const DemoSet* demos,
                       const LearnerConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  switch (algo) {
    case Algo::kCrsfd:
      throw std::invalid_argument("run_crsfd handles the shaped learner");
    case Algo::kBc:
      if (demos == nullptr) throw std::invalid_argument("behavior cloning requires demonstrations");
      return run_bc(env, eval_env, *demos, cfg, seed);
    case Algo::kSacfd:
    case Algo::kSqil:
      if (demos == nullptr)
        throw std::invalid_argument(algo_name(algo) + " requires demonstrations");
      return run_loop(algo, env, eval_env, demos, nullptr, 0.0, cfg, seed, opts);
    case Algo::kSac:
      return run_loop(algo, env, eval_env, demos, nullptr, 0.0, cfg, seed, opts);
  }
  throw std::logic_error("unhandled algo enum value");
}

}  // namespace crsfd
