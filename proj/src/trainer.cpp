#include "sibe/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

#include "sibe/checkpoint.hpp"
#include "sibe/losses.hpp"

namespace sibe {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// ---- RunConfig --------------------------------------------------------------

void RunConfig::validate() const {
    task_from_string(task);
    distractor_from_string(distractor);
    if (total_env_steps < 0) throw ConfigError("total_env_steps must be nonnegative");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (chunk_len < 1) throw ConfigError("chunk_len must be positive");
    if (alpha < 0.0) throw ConfigError("alpha must be nonnegative");
    if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (lr_model <= 0.0 || lr_actor_critic <= 0.0) throw ConfigError("learning rates must be positive");
    if (initial_steps < 0) throw ConfigError("initial_steps must be nonnegative");
    if (eval_interval < 1) throw ConfigError("eval_interval must be positive");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be positive");
    if (replay_capacity < 1) throw ConfigError("replay_capacity must be positive");
    if (d_c < 1 || d_z < 1 || d_f < 1 || hidden_dim < 1 || ac_hidden_dim < 1)
        throw ConfigError("model dims must be positive");
    if (init_temperature <= 0.0) throw ConfigError("init_temperature must be positive");
    if (!(critic_ema > 0.0 && critic_ema <= 1.0)) throw ConfigError("critic_ema must lie in (0, 1]");
    if (critic_target_interval < 1) throw ConfigError("critic_target_interval must be positive");
    env_config().validate();
}

EnvConfig RunConfig::env_config() const {
    EnvConfig ec;
    ec.task = task_from_string(task);
    ec.distractor = distractor_from_string(distractor);
    ec.distractor_dim = distractor_dim;
    ec.frame_stack = frame_stack;
    ec.action_repeat = action_repeat;
    ec.episode_len = episode_len;
    ec.seed = seed;
    ec.goal_override = goal_override;
    return ec;
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["task"] = task;
    j["distractor"] = distractor;
    j["seed"] = seed;
    j["total_env_steps"] = total_env_steps;
    j["batch_size"] = batch_size;
    j["chunk_len"] = chunk_len;
    j["alpha"] = alpha;
    j["lambda"] = lambda;
    j["tau"] = tau;
    j["gamma"] = gamma;
    j["lr_model"] = lr_model;
    j["lr_actor_critic"] = lr_actor_critic;
    j["initial_steps"] = initial_steps;
    j["eval_interval"] = eval_interval;
    j["eval_episodes"] = eval_episodes;
    j["no_intrinsic_reward"] = no_intrinsic_reward;
    j["no_compression"] = no_compression;
    j["out_dir"] = out_dir;
    j["distractor_dim"] = distractor_dim;
    j["frame_stack"] = frame_stack;
    j["action_repeat"] = action_repeat;
    j["episode_len"] = episode_len;
    j["replay_capacity"] = replay_capacity;
    j["d_c"] = d_c;
    j["d_z"] = d_z;
    j["d_f"] = d_f;
    j["hidden_dim"] = hidden_dim;
    j["ac_hidden_dim"] = ac_hidden_dim;
    j["init_temperature"] = init_temperature;
    j["critic_ema"] = critic_ema;
    j["critic_target_interval"] = critic_target_interval;
    if (goal_override)
        j["goal_override"] = std::vector<double>{(*goal_override)[0], (*goal_override)[1]};
    else
        j["goal_override"] = nullptr;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig cfg;
    nlohmann::ordered_json known = cfg.to_json();
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key()))
            throw ConfigError("unknown config key '" + it.key() + "'");
    auto get = [&j](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("task", cfg.task);
    get("distractor", cfg.distractor);
    get("seed", cfg.seed);
    get("total_env_steps", cfg.total_env_steps);
    get("batch_size", cfg.batch_size);
    get("chunk_len", cfg.chunk_len);
    get("alpha", cfg.alpha);
    get("lambda", cfg.lambda);
    get("tau", cfg.tau);
    get("gamma", cfg.gamma);
    get("lr_model", cfg.lr_model);
    get("lr_actor_critic", cfg.lr_actor_critic);
    get("initial_steps", cfg.initial_steps);
    get("eval_interval", cfg.eval_interval);
    get("eval_episodes", cfg.eval_episodes);
    get("no_intrinsic_reward", cfg.no_intrinsic_reward);
    get("no_compression", cfg.no_compression);
    get("out_dir", cfg.out_dir);
    get("distractor_dim", cfg.distractor_dim);
    get("frame_stack", cfg.frame_stack);
    get("action_repeat", cfg.action_repeat);
    get("episode_len", cfg.episode_len);
    get("replay_capacity", cfg.replay_capacity);
    get("d_c", cfg.d_c);
    get("d_z", cfg.d_z);
    get("d_f", cfg.d_f);
    get("hidden_dim", cfg.hidden_dim);
    get("ac_hidden_dim", cfg.ac_hidden_dim);
    get("init_temperature", cfg.init_temperature);
    get("critic_ema", cfg.critic_ema);
    get("critic_target_interval", cfg.critic_target_interval);
    if (j.contains("goal_override") && !j.at("goal_override").is_null()) {
        auto v = j.at("goal_override").get<std::vector<double>>();
        if (v.size() != 2) throw ConfigError("goal_override must hold exactly two coordinates");
        cfg.goal_override = std::array<double, 2>{v[0], v[1]};
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

// ---- metrics ----------------------------------------------------------------

namespace {

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct StepStatsData {
    double sibe_total = 0, kl_term = 0, nce_term = 0, mean_r_star = 0;
    double actor_loss = 0, critic_loss = 0, alpha_t = 0;
};

class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path) : out_(path) {
        if (!out_) throw ConfigError("cannot open metrics file '" + path + "'");
        out_ << "env_step,episode_return,eval_return_mean,eval_return_std,sibe_total,kl_term,"
                "nce_term,mean_r_star,actor_loss,critic_loss,alpha_T,wall_seconds\n";
    }

    void row(std::int64_t env_step, std::optional<double> episode_return,
             std::optional<EvalResult> eval, const StepStatsData* stats, double wall) {
        out_ << env_step << ',';
        if (episode_return) out_ << fmt6(*episode_return);
        out_ << ',';
        if (eval) out_ << fmt6(eval->mean_return);
        out_ << ',';
        if (eval) out_ << fmt6(eval->std_return);
        out_ << ',';
        if (stats)
            out_ << fmt6(stats->sibe_total) << ',' << fmt6(stats->kl_term) << ','
                 << fmt6(stats->nce_term) << ',' << fmt6(stats->mean_r_star) << ','
                 << fmt6(stats->actor_loss) << ',' << fmt6(stats->critic_loss) << ','
                 << fmt6(stats->alpha_t);
        else
            out_ << ",,,,,,";
        out_ << ',' << fmt6(wall) << '\n';
    }

private:
    std::ofstream out_;
};

std::string batch_stats_diagnostic(const ChunkBatch& b) {
    auto minmax = [](const std::vector<double>& v) {
        double lo = v.empty() ? 0 : v[0], hi = lo;
        for (double x : v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        return " [" + fmt6(lo) + ", " + fmt6(hi) + "]";
    };
    return "; offending batch: B=" + std::to_string(b.num_chunks) +
           " L=" + std::to_string(b.chunk_len) + ", obs range" + minmax(b.obs) +
           ", action range" + minmax(b.actions) + ", reward range" + minmax(b.rewards);
}

}  // namespace

// ---- Trainer ----------------------------------------------------------------

struct Trainer::StepStats : StepStatsData {};

Trainer::Trainer(RunConfig cfg, Options opts)
    : cfg_(std::move(cfg)), opts_(std::move(opts)), root_(cfg_.seed),
      warmup_rng_(root_.fork("warmup")), policy_rng_(root_.fork("policy")),
      replay_rng_(root_.fork("replay")), update_rng_(root_.fork("update")),
      eval_root_(root_.fork("eval")) {
    cfg_.validate();
    env_ = std::make_unique<EnvInstance>(cfg_.env_config(), root_.fork("env"));

    ModelDims md;
    md.obs = env_->obs_dim();
    md.action = env_->action_dim();
    md.d_c = cfg_.d_c;
    md.d_z = cfg_.d_z;
    md.d_f = cfg_.d_f;
    md.hidden = cfg_.hidden_dim;
    ModelCoeffs mc;
    mc.alpha = cfg_.no_compression ? 0.0 : cfg_.alpha;
    mc.lambda = cfg_.lambda;
    mc.tau = cfg_.tau;
    Rng model_rng = root_.fork("model");
    model_ = std::make_unique<SibeModel>(md, mc, model_rng);

    SacDims sd{cfg_.d_c, env_->action_dim(), cfg_.ac_hidden_dim};
    SacConfig sc;
    sc.gamma = cfg_.gamma;
    sc.init_temperature = cfg_.init_temperature;
    sc.critic_ema = cfg_.critic_ema;
    sc.critic_target_interval = cfg_.critic_target_interval;
    Rng sac_rng = root_.fork("sac");
    agent_ = std::make_unique<SacAgent>(sd, sc, sac_rng);

    buffer_ = std::make_unique<ReplayBuffer>(cfg_.replay_capacity);

    model_opt_ = std::make_unique<Adam>(model_->trainable_parameters(), AdamConfig{.lr = cfg_.lr_model});
    // The critic optimizer also owns the online deterministic encoder:
    // critic gradients backpropagate through it at the actor-critic rate.
    std::vector<Tensor> critic_params = agent_->critic_parameters();
    for (const auto& p : model_->eta_online()) critic_params.push_back(p);
    critic_opt_ = std::make_unique<Adam>(std::move(critic_params), AdamConfig{.lr = cfg_.lr_actor_critic});
    actor_opt_ = std::make_unique<Adam>(agent_->policy_parameters(), AdamConfig{.lr = cfg_.lr_actor_critic});
    temp_opt_ = std::make_unique<Adam>(std::vector<Tensor>{agent_->log_alpha()},
                                       AdamConfig{.lr = cfg_.lr_actor_critic});

    reward_cfg_.lambda = cfg_.lambda;
    reward_cfg_.use_intrinsic = !cfg_.no_intrinsic_reward;
}

FlatBatch Trainer::flatten(const ChunkBatch& batch, const std::vector<double>& r_aug) const {
    FlatBatch fb;
    fb.size = batch.samples();
    fb.obs = Tensor::from_data({fb.size, batch.obs_dim}, batch.obs);
    fb.actions = Tensor::from_data({fb.size, batch.action_dim}, batch.actions);
    fb.next_obs = Tensor::from_data({fb.size, batch.obs_dim}, batch.next_obs);
    fb.r_aug = r_aug;
    fb.terminal = batch.terminal;
    fb.truncated = batch.truncated;
    return fb;
}

void Trainer::gradient_step(StepStats& st) {
    ChunkBatch batch = buffer_->sample_chunks(cfg_.batch_size, cfg_.chunk_len, replay_rng_);
    try {
        // Representation update.
        model_opt_->zero_grad();
        LossReport report;
        {
            Tape tape;
            TapeScope scope(tape);
            report = sibe_loss(*model_, batch, update_rng_);
            if (!std::isfinite(report.total_value))
                throw NumericError("sibe loss is non-finite");
            tape.backward(report.total);
        }

        // Intrinsic rewards are relabeled from the current per-sample
        // terms; nothing is ever written back to the buffer.
        std::vector<double> r_aug;
        double mean_r_star = 0.0;
        if (opts_.bypass_reward_module) {
            r_aug = batch.rewards;
        } else {
            std::vector<double> r_star = intrinsic_reward(report.per_sample_nce, reward_cfg_);
            for (double r : r_star) {
                min_r_star_ = std::min(min_r_star_, r);
                mean_r_star += r;
            }
            mean_r_star /= static_cast<double>(r_star.size());
            r_aug = augment(batch.rewards, r_star);
        }
        model_opt_->step();

        FlatBatch fb = flatten(batch, r_aug);

        // Critic (gradients reach the online deterministic encoder).
        std::vector<double> targets = agent_->critic_targets(*model_, fb, update_rng_);
        critic_opt_->zero_grad();
        double critic_loss_value = 0.0;
        {
            Tape tape;
            TapeScope scope(tape);
            Tensor cl = agent_->critic_loss(*model_, fb, targets);
            critic_loss_value = cl.item();
            tape.backward(cl);
        }
        critic_opt_->step();

        // Actor (encoder gradient severed).
        actor_opt_->zero_grad();
        Tensor logp_detached;
        double actor_loss_value = 0.0;
        {
            Tape tape;
            TapeScope scope(tape);
            auto [al, logp] = agent_->actor_loss(*model_, fb, update_rng_);
            actor_loss_value = al.item();
            tape.backward(al);
            logp_detached = logp.detach();
        }
        actor_opt_->step();

        // Temperature.
        temp_opt_->zero_grad();
        {
            Tape tape;
            TapeScope scope(tape);
            Tensor tl = agent_->temperature_loss(logp_detached);
            tape.backward(tl);
        }
        temp_opt_->step();

        // Target maintenance: encoders/heads every step, critics on the
        // configured interval.
        model_->ema_update();
        if (agent_->end_update_step()) ++critic_target_events_;
        ++gradient_steps_;

        st.sibe_total = report.total_value;
        st.kl_term = report.kl_term;
        st.nce_term = report.nce_term;
        st.mean_r_star = mean_r_star;
        st.actor_loss = actor_loss_value;
        st.critic_loss = critic_loss_value;
        st.alpha_t = agent_->alpha();
    } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + batch_stats_diagnostic(batch));
    }
}

TrainResult Trainer::train() {
    auto t0 = Clock::now();
    fs::create_directories(cfg_.out_dir);
    std::string metrics_path = cfg_.out_dir + "/metrics.csv";
    MetricsWriter metrics(metrics_path);
    auto elapsed = [&t0]() {
        return std::chrono::duration<double>(Clock::now() - t0).count();
    };

    TrainResult result;
    result.metrics_path = metrics_path;

    std::vector<double> obs = env_->reset();
    double episode_return = 0.0;
    std::int64_t episode_id = 0, episode_step = 0;
    StepStats stats;
    bool have_stats = false;

    for (std::int64_t step = 1; step <= cfg_.total_env_steps; ++step) {
        std::vector<double> action(static_cast<std::size_t>(env_->action_dim()));
        if (step <= cfg_.initial_steps) {
            for (auto& a : action) a = warmup_rng_.uniform(-1.0, 1.0);
        } else {
            Tensor s = Tensor::from_data({env_->obs_dim()}, obs);
            Tensor c = model_->det_encode(s, Branch::online);
            action = agent_->act(c.value(), ActMode::stochastic, policy_rng_);
        }

        StepResult sr = env_->step(action);
        Transition tr;
        tr.obs = obs;
        tr.action = action;
        tr.reward = sr.reward;
        tr.next_obs = sr.obs;
        tr.terminal = sr.done && !sr.truncated;
        tr.truncated = sr.done && sr.truncated;
        tr.episode_id = episode_id;
        tr.step_index = episode_step;
        buffer_->push(std::move(tr));
        episode_return += sr.reward;
        ++episode_step;
        bool done = sr.done;
        if (!done) obs = sr.obs;

        if (step > cfg_.initial_steps) {
            gradient_step(stats);
            have_stats = true;
        }

        if (done) {
            metrics.row(step, episode_return, std::nullopt, have_stats ? &stats : nullptr,
                        elapsed());
            ++result.episodes;
            obs = env_->reset();
            ++episode_id;
            episode_step = 0;
            episode_return = 0.0;
        }

        if (step % cfg_.eval_interval == 0) {
            EvalResult er = evaluate(cfg_.eval_episodes, static_cast<std::uint64_t>(step));
            metrics.row(step, std::nullopt, er, have_stats ? &stats : nullptr, elapsed());
            result.eval_steps.push_back(step);
            result.eval_means.push_back(er.mean_return);
            result.eval_stds.push_back(er.std_return);
        }

        if (opts_.probe) opts_.probe(step, *this);
    }

    if (!result.eval_means.empty()) {
        result.final_eval_mean = result.eval_means.back();
        result.final_eval_std = result.eval_stds.back();
    }
    result.gradient_steps = gradient_steps_;
    result.critic_target_events = critic_target_events_;
    result.min_r_star = min_r_star_;
    result.checkpoint_path = cfg_.out_dir + "/checkpoint.bin";
    save_checkpoint_file(result.checkpoint_path);
    result.wall_seconds = elapsed();
    return result;
}

EvalResult Trainer::evaluate(std::int64_t n_episodes, std::uint64_t stream_key) const {
    Rng stream = eval_root_.fork("step", stream_key);
    EnvConfig ec = cfg_.env_config();
    Rng unused(0);  // deterministic mode draws nothing
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(n_episodes));
    for (std::int64_t ep = 0; ep < n_episodes; ++ep) {
        EnvInstance env(ec, stream.fork("ep", static_cast<std::uint64_t>(ep)));
        std::vector<double> obs = env.reset();
        double ret = 0.0;
        while (true) {
            Tensor s = Tensor::from_data({env.obs_dim()}, obs);
            Tensor c = model_->det_encode(s, Branch::online);
            std::vector<double> a = agent_->act(c.value(), ActMode::deterministic, unused);
            StepResult sr = env.step(a);
            ret += sr.reward;  // environment reward only
            if (sr.done) break;
            obs = sr.obs;
        }
        returns.push_back(ret);
    }
    EvalResult out;
    for (double r : returns) out.mean_return += r;
    out.mean_return /= static_cast<double>(returns.size());
    double var = 0.0;
    for (double r : returns) var += (r - out.mean_return) * (r - out.mean_return);
    out.std_return = std::sqrt(var / static_cast<double>(returns.size()));
    return out;
}

std::vector<std::pair<std::string, Tensor>> Trainer::all_named_parameters() const {
    auto out = model_->named_parameters();
    auto sac = agent_->named_parameters();
    out.insert(out.end(), sac.begin(), sac.end());
    return out;
}

void Trainer::save_checkpoint_file(const std::string& path) const {
    nlohmann::ordered_json meta;
    nlohmann::ordered_json dims;
    dims["obs"] = env_->obs_dim();
    dims["action"] = env_->action_dim();
    dims["d_c"] = cfg_.d_c;
    dims["d_z"] = cfg_.d_z;
    dims["d_f"] = cfg_.d_f;
    dims["hidden"] = cfg_.hidden_dim;
    dims["ac_hidden"] = cfg_.ac_hidden_dim;
    meta["dims"] = dims;
    meta["config"] = cfg_.to_json();
    save_checkpoint(path, meta, all_named_parameters());
}

// ---- checkpoint loading -------------------------------------------------------

LoadedRun load_run(const std::string& checkpoint_path) {
    CheckpointData ckpt = load_checkpoint(checkpoint_path);
    LoadedRun run;
    run.cfg = RunConfig::from_json(ckpt.header.at("config"));

    EnvInstance probe_env(run.cfg.env_config());
    ModelDims md;
    md.obs = probe_env.obs_dim();
    md.action = probe_env.action_dim();
    md.d_c = run.cfg.d_c;
    md.d_z = run.cfg.d_z;
    md.d_f = run.cfg.d_f;
    md.hidden = run.cfg.hidden_dim;
    ModelCoeffs mc{run.cfg.alpha, run.cfg.lambda, run.cfg.tau};
    Rng model_rng(run.cfg.seed);
    run.model = std::make_unique<SibeModel>(md, mc, model_rng);

    SacDims sd{run.cfg.d_c, probe_env.action_dim(), run.cfg.ac_hidden_dim};
    SacConfig sc;
    sc.gamma = run.cfg.gamma;
    sc.init_temperature = run.cfg.init_temperature;
    Rng sac_rng(run.cfg.seed + 1);
    run.agent = std::make_unique<SacAgent>(sd, sc, sac_rng);

    auto named = run.model->named_parameters();
    auto sac_named = run.agent->named_parameters();
    named.insert(named.end(), sac_named.begin(), sac_named.end());
    assign_parameters(ckpt, named);
    return run;
}

EvalResult LoadedRun::evaluate(std::int64_t n_episodes, std::uint64_t stream_key,
                               const std::string& dump_path) const {
    Rng stream = Rng(cfg.seed).fork("eval").fork("step", stream_key);
    EnvConfig ec = cfg.env_config();
    Rng unused(0);
    std::vector<double> returns;
    std::unique_ptr<TrajectoryWriter> dump;
    for (std::int64_t ep = 0; ep < n_episodes; ++ep) {
        EnvInstance env(ec, stream.fork("ep", static_cast<std::uint64_t>(ep)));
        if (!dump_path.empty() && ep == 0)
            dump = std::make_unique<TrajectoryWriter>(dump_path, env.obs_dim(), env.action_dim());
        std::vector<double> obs = env.reset();
        double ret = 0.0;
        std::int64_t t = 0;
        while (true) {
            Tensor s = Tensor::from_data({env.obs_dim()}, obs);
            Tensor c = model->det_encode(s, Branch::online);
            std::vector<double> a = agent->act(c.value(), ActMode::deterministic, unused);
            StepResult sr = env.step(a);
            if (dump && ep == 0) dump->append(t, sr.reward, sr.done, sr.obs, a);
            ret += sr.reward;
            ++t;
            if (sr.done) break;
            obs = sr.obs;
        }
        returns.push_back(ret);
    }
    EvalResult out;
    for (double r : returns) out.mean_return += r;
    out.mean_return /= static_cast<double>(returns.size());
    double var = 0.0;
    for (double r : returns) var += (r - out.mean_return) * (r - out.mean_return);
    out.std_return = std::sqrt(var / static_cast<double>(returns.size()));
    return out;
}

// ---- ablation suite -----------------------------------------------------------

RunConfig apply_variant(RunConfig cfg, const std::string& variant) {
    if (variant == "full") return cfg;
    if (variant == "no_intrinsic_reward") {
        cfg.no_intrinsic_reward = true;
        cfg.lambda = 0.0;
        return cfg;
    }
    if (variant == "no_compression") {
        cfg.no_compression = true;
        cfg.alpha = 0.0;
        return cfg;
    }
    throw ConfigError("unknown ablation variant '" + variant + "'");
}

void parallel_run(std::vector<std::function<void()>> jobs, int workers) {
    if (workers <= 0)
        workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min<int>(workers, static_cast<int>(jobs.size()));
    if (workers <= 1) {
        for (auto& j : jobs) j();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                jobs[i]();
            }
        });
    for (auto& t : pool) t.join();
}

std::vector<AblationRun> run_ablation_suite(const RunConfig& base, const AblationOptions& opts) {
    if (opts.num_seeds < 1) throw ConfigError("ablation needs at least one seed");
    if (opts.variants.empty()) throw ConfigError("ablation needs at least one variant");
    std::vector<std::int64_t> chunk_lens =
        opts.chunk_lens.empty() ? std::vector<std::int64_t>{base.chunk_len} : opts.chunk_lens;
    std::string out_dir = opts.out_dir.empty() ? base.out_dir : opts.out_dir;
    fs::create_directories(out_dir);

    std::vector<AblationRun> runs;
    for (const auto& variant : opts.variants)
        for (auto L : chunk_lens)
            for (std::int64_t s = 0; s < opts.num_seeds; ++s) {
                AblationRun r;
                r.variant = variant;
                r.chunk_len = L;
                r.seed = base.seed + static_cast<std::uint64_t>(s);
                runs.push_back(std::move(r));
            }

    std::vector<std::function<void()>> jobs;
    jobs.reserve(runs.size());
    for (auto& run : runs)
        jobs.push_back([&run, &base, &out_dir]() {
            RunConfig cfg = apply_variant(base, run.variant);
            cfg.chunk_len = run.chunk_len;
            cfg.seed = run.seed;
            cfg.out_dir = out_dir + "/" + run.variant + "_L" + std::to_string(run.chunk_len) +
                          "_seed" + std::to_string(run.seed);
            Trainer trainer(cfg);
            run.result = trainer.train();
        });
    parallel_run(std::move(jobs), opts.jobs);

    // runs.csv: one row per run.
    const std::vector<std::int64_t>& grid =
        runs.empty() ? std::vector<std::int64_t>{} : runs.front().result.eval_steps;
    {
        std::ofstream out(out_dir + "/runs.csv");
        out << "variant,chunk_len,seed";
        for (auto s : grid) out << ",return_at_" << s;
        out << ",final_return\n";
        for (const auto& r : runs) {
            out << r.variant << ',' << r.chunk_len << ',' << r.seed;
            for (std::size_t i = 0; i < grid.size(); ++i)
                out << ',' << fmt6(i < r.result.eval_means.size() ? r.result.eval_means[i] : 0.0);
            out << ',' << fmt6(r.result.final_eval_mean) << '\n';
        }
    }
    // summary.csv: mean +- stderr across seeds.
    {
        std::ofstream out(out_dir + "/summary.csv");
        out << "variant,chunk_len,seeds";
        for (auto s : grid) out << ",mean_at_" << s << ",stderr_at_" << s;
        out << ",final_mean,final_stderr\n";
        for (const auto& variant : opts.variants)
            for (auto L : chunk_lens) {
                std::vector<const AblationRun*> group;
                for (const auto& r : runs)
                    if (r.variant == variant && r.chunk_len == L) group.push_back(&r);
                if (group.empty()) continue;
                auto mean_stderr = [&group](auto getter) {
                    double m = 0.0;
                    for (auto* r : group) m += getter(*r);
                    m /= static_cast<double>(group.size());
                    double var = 0.0;
                    for (auto* r : group) {
                        double d = getter(*r) - m;
                        var += d * d;
                    }
                    double se = group.size() > 1
                                    ? std::sqrt(var / static_cast<double>(group.size() - 1)) /
                                          std::sqrt(static_cast<double>(group.size()))
                                    : 0.0;
                    return std::make_pair(m, se);
                };
                out << variant << ',' << L << ',' << group.size();
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    auto [m, se] = mean_stderr([i](const AblationRun& r) {
                        return i < r.result.eval_means.size() ? r.result.eval_means[i] : 0.0;
                    });
                    out << ',' << fmt6(m) << ',' << fmt6(se);
                }
                auto [fm, fse] =
                    mean_stderr([](const AblationRun& r) { return r.result.final_eval_mean; });
                out << ',' << fmt6(fm) << ',' << fmt6(fse) << '\n';
            }
    }
    return runs;
}

}  // namespace sibe
