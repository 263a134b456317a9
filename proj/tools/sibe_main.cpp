#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sibe/alloc_tuning.hpp"
#include "sibe/trainer.hpp"

namespace {

void print_eval_curve(const sibe::TrainResult& res) {
    for (std::size_t i = 0; i < res.eval_steps.size(); ++i)
        std::printf("eval @ %8lld : %.3f +- %.3f\n",
                    static_cast<long long>(res.eval_steps[i]), res.eval_means[i],
                    res.eval_stds[i]);
}

}  // namespace

int main(int argc, char** argv) {
    sibe::tune_allocator_for_training();
    CLI::App app{"Sequential-bottleneck exploration agent on simulated noisy control tasks"};
    app.require_subcommand(1);

    // ---- train ----
    auto* train = app.add_subcommand("train", "Train one agent");
    std::string config_path, task, distractor, out_dir;
    std::uint64_t seed = 0;
    std::int64_t steps = 0, chunk_len = 0, batch_size = 0, eval_interval = 0, distractor_dim = 0;
    double alpha = 0, lambda = 0;
    bool no_intrinsic = false, no_compression = false;
    train->add_option("--config", config_path, "JSON config file; flags override its values");
    auto* t_task = train->add_option("--task", task)->check(CLI::IsMember({"pointmass", "pendulum", "pendulum-sparse"}));
    auto* t_distractor = train->add_option("--distractor", distractor)->check(CLI::IsMember({"clean", "noise", "natural"}));
    auto* t_seed = train->add_option("--seed", seed);
    auto* t_steps = train->add_option("--steps", steps);
    auto* t_chunk = train->add_option("--chunk-len", chunk_len);
    auto* t_batch = train->add_option("--batch-size", batch_size);
    auto* t_eval = train->add_option("--eval-interval", eval_interval);
    auto* t_dn = train->add_option("--distractor-dim", distractor_dim);
    auto* t_alpha = train->add_option("--alpha", alpha);
    auto* t_lambda = train->add_option("--lambda", lambda);
    auto* t_noir = train->add_flag("--no-intrinsic-reward", no_intrinsic);
    auto* t_nocomp = train->add_flag("--no-compression", no_compression);
    auto* t_out = train->add_option("--out", out_dir);

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string ckpt_path, dump_path;
    std::int64_t episodes = 10;
    std::uint64_t eval_key = 0;
    eval->add_option("--checkpoint", ckpt_path)->required();
    eval->add_option("--episodes", episodes);
    eval->add_option("--stream-key", eval_key);
    eval->add_option("--dump-traj", dump_path, "CSV trajectory dump of the first episode");

    // ---- ablate ----
    auto* ablate = app.add_subcommand("ablate", "Run the ablation grid");
    std::string ab_config, ab_out;
    std::int64_t ab_seeds = 5;
    int ab_jobs = 0;
    std::vector<std::int64_t> ab_chunks;
    std::vector<std::string> ab_variants;
    ablate->add_option("--config", ab_config)->required();
    ablate->add_option("--seeds", ab_seeds);
    ablate->add_option("--chunk-lens", ab_chunks, "e.g. 1 2 4 8");
    ablate->add_option("--variants", ab_variants,
                       "subset of full/no_intrinsic_reward/no_compression");
    ablate->add_option("--jobs", ab_jobs);
    ablate->add_option("--out", ab_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            sibe::RunConfig cfg;
            if (!config_path.empty()) cfg = sibe::RunConfig::from_file(config_path);
            if (*t_task) cfg.task = task;
            if (*t_distractor) cfg.distractor = distractor;
            if (*t_seed) cfg.seed = seed;
            if (*t_steps) cfg.total_env_steps = steps;
            if (*t_chunk) cfg.chunk_len = chunk_len;
            if (*t_batch) cfg.batch_size = batch_size;
            if (*t_eval) cfg.eval_interval = eval_interval;
            if (*t_dn) cfg.distractor_dim = distractor_dim;
            if (*t_alpha) cfg.alpha = alpha;
            if (*t_lambda) cfg.lambda = lambda;
            if (*t_noir) {
                cfg.no_intrinsic_reward = true;
                cfg.lambda = 0.0;
            }
            if (*t_nocomp) {
                cfg.no_compression = true;
                cfg.alpha = 0.0;
            }
            if (*t_out) cfg.out_dir = out_dir;
            sibe::Trainer trainer(cfg);
            sibe::TrainResult res = trainer.train();
            print_eval_curve(res);
            std::printf("final eval return: %.3f +- %.3f over %lld episodes/eval\n",
                        res.final_eval_mean, res.final_eval_std,
                        static_cast<long long>(cfg.eval_episodes));
            std::printf("metrics: %s\ncheckpoint: %s\n", res.metrics_path.c_str(),
                        res.checkpoint_path.c_str());
        } else if (*eval) {
            sibe::LoadedRun run = sibe::load_run(ckpt_path);
            sibe::EvalResult res = run.evaluate(episodes, eval_key, dump_path);
            std::printf("eval return over %lld episodes: %.3f +- %.3f\n",
                        static_cast<long long>(episodes), res.mean_return, res.std_return);
            if (!dump_path.empty()) std::printf("trajectory: %s\n", dump_path.c_str());
        } else if (*ablate) {
            sibe::RunConfig base = sibe::RunConfig::from_file(ab_config);
            sibe::AblationOptions opts;
            opts.num_seeds = ab_seeds;
            opts.jobs = ab_jobs;
            if (!ab_chunks.empty()) opts.chunk_lens = ab_chunks;
            if (!ab_variants.empty()) opts.variants = ab_variants;
            opts.out_dir = ab_out.empty() ? base.out_dir : ab_out;
            auto runs = sibe::run_ablation_suite(base, opts);
            std::printf("%-22s %-3s %-6s %s\n", "variant", "L", "seed", "final");
            for (const auto& r : runs)
                std::printf("%-22s %-3lld %-6llu %.3f\n", r.variant.c_str(),
                            static_cast<long long>(r.chunk_len),
                            static_cast<unsigned long long>(r.seed), r.result.final_eval_mean);
            std::printf("tables: %s/runs.csv, %s/summary.csv\n", opts.out_dir.c_str(),
                        opts.out_dir.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
