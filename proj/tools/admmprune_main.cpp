// admmprune command line: train a small CNN baseline, sparsify it along a
// regularization path, evaluate checkpoints, and re-render result tables.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "admmprune/admm.hpp"
#include "admmprune/checkpoint.hpp"
#include "admmprune/config.hpp"

namespace {

using namespace admmprune;

struct CommonFlags {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    std::string penalty;
    std::string csv;
};

RunConfig load_effective_config(const CommonFlags& fl) {
    RunConfig cfg = load_config(fl.config_path);
    if (fl.seed_set) {
        cfg.seed = fl.seed;
        cfg.options.seed = fl.seed;
    }
    if (!fl.out.empty()) cfg.options.out_dir = fl.out;
    if (!fl.penalty.empty()) cfg.penalty = parse_penalty(fl.penalty);
    return cfg;
}

Network train_baseline_net(const RunConfig& cfg, const Dataset& train) {
    NetworkSpec spec = parse_arch(cfg.arch, cfg.in_maps, cfg.in_h, cfg.in_w);
    Pcg32 rng(cfg.seed, 0);
    Network net = build_network<float>(spec, rng);
    int64_t serial = 0;
    return fine_tune(net, Mask{}, train, cfg.baseline_epochs, cfg.schedule, cfg.options, serial);
}

int cmd_train_baseline(const CommonFlags& fl) {
    RunConfig cfg = load_effective_config(fl);
    auto [train, test] = load_datasets(cfg);
    Network net = train_baseline_net(cfg, train);
    double acc = evaluate_accuracy(net, test.images, test.labels, cfg.options.eval_batch,
                                   cfg.options.backend);
    std::string dir = cfg.options.out_dir.empty() ? "." : cfg.options.out_dir;
    std::filesystem::create_directories(dir);
    std::string path = dir + "/baseline.ckpt";
    save_checkpoint(net, path);
    std::printf("baseline accuracy_pct %.2f checkpoint %s\n", acc, path.c_str());
    return 0;
}

int cmd_sparsify(const CommonFlags& fl, const std::string& baseline_path) {
    RunConfig cfg = load_effective_config(fl);
    auto [train, test] = load_datasets(cfg);

    Network baseline = baseline_path.empty() ? train_baseline_net(cfg, train)
                                             : load_checkpoint(baseline_path);

    AdmmOptions opt = cfg.options;
    opt.data_descriptor = data_descriptor(cfg);
    PathResult res = run_path(baseline, train, test, cfg.schedule, cfg.penalty, opt);

    std::string table = render_table(res.rows);
    std::fputs(table.c_str(), stdout);

    if (!opt.out_dir.empty()) {
        std::ofstream tf(opt.out_dir + "/results.txt", std::ios::binary);
        tf << table;
        export_csv(res.rows, opt.out_dir + "/results.csv");
    }
    if (!fl.csv.empty()) export_csv(res.rows, fl.csv);

    if (res.aborted) {
        std::cerr << "error: divergence: " << res.abort_reason << "\n";
        return 2;
    }
    return 0;
}

int cmd_evaluate(const CommonFlags& fl, const std::string& ckpt, const std::string& split) {
    RunConfig cfg = load_effective_config(fl);
    auto [train, test] = load_datasets(cfg);
    const Dataset& ds = split == "train" ? train : test;
    Network net = load_checkpoint(ckpt);
    double acc =
        evaluate_accuracy(net, ds.images, ds.labels, cfg.options.eval_batch, cfg.options.backend);
    std::printf("accuracy_pct %.2f\n", acc);
    return 0;
}

int cmd_report(const CommonFlags& fl, const std::string& manifest_path, bool recompute) {
    RunManifest m = read_manifest(manifest_path);
    std::filesystem::path dir = std::filesystem::path(manifest_path).parent_path();

    std::vector<ReportRow> rows;
    for (const ManifestEntry& e : m.entries) rows.push_back(e.row);

    if (recompute) {
        // Re-derive everything the artifacts determine: pruned counts,
        // sparsity, and speedup come from the stored mask and checkpoint;
        // accuracy additionally needs the dataset, so it refreshes only when
        // a config was given.
        std::optional<Dataset> test;
        std::optional<RunConfig> cfg;
        if (!fl.config_path.empty()) {
            cfg = load_effective_config(fl);
            test = load_datasets(*cfg).second;
        }
        for (size_t i = 0; i < m.entries.size(); ++i) {
            const ManifestEntry& e = m.entries[i];
            Network net = load_checkpoint((dir / e.checkpoint).string());
            Mask mask;
            if (!e.mask.empty()) mask = read_mask((dir / e.mask).string());
            for (const BlockId& b : mask.pruned) {
                int pi = param_index(net.spec, b.layer);
                BlockSpan sp = block_span(net.spec, b);
                const Tensor& w = net.params[static_cast<size_t>(pi)].weight;
                for (int64_t k = 0; k < sp.len; ++k)
                    if (w[sp.offset + k] != 0.0f)
                        throw std::runtime_error(
                            "report: checkpoint " + e.checkpoint +
                            " has nonzero weights in a pruned block (layer " +
                            std::to_string(b.layer) + ")");
            }
            SparsityStats stats = sparsity_stats(mask, net.spec, m.include);
            auto [dense, sparse] =
                mac_counts(net.spec, net.spec.in_maps, net.spec.in_h, net.spec.in_w, mask);
            rows[i].pruned_per_layer = stats.pruned_per_layer;
            rows[i].sparsity_pct = stats.sparsity_pct;
            rows[i].speedup =
                sparse > 0 ? static_cast<double>(dense) / static_cast<double>(sparse)
                           : std::numeric_limits<double>::infinity();
            if (test)
                rows[i].accuracy_pct = evaluate_accuracy(net, test->images, test->labels,
                                                         cfg->options.eval_batch,
                                                         cfg->options.backend);
        }
    }

    std::fputs(render_table(rows).c_str(), stdout);
    if (!fl.csv.empty()) export_csv(rows, fl.csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"group-sparse CNN filter pruning via ADMM"};
    app.require_subcommand(1);

    CommonFlags fl;
    std::string baseline_path, checkpoint_path, manifest_path, split = "test";
    bool recompute = false;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", fl.config_path, "run configuration file");
        if (config_required) c->required();
        sub->add_option("--seed", fl.seed, "override the config's seed")
            ->each([&](const std::string&) { fl.seed_set = true; });
        sub->add_option("--out", fl.out, "override the config's output directory");
        sub->add_option("--penalty", fl.penalty, "block penalty")
            ->check(CLI::IsMember({"l0", "l1"}));
        sub->add_option("--csv", fl.csv, "also write rows as CSV here");
    };

    CLI::App* tb = app.add_subcommand("train-baseline", "train and checkpoint a dense baseline");
    add_common(tb, true);

    CLI::App* sp = app.add_subcommand("sparsify", "run the regularization path");
    add_common(sp, true);
    sp->add_option("--baseline", baseline_path, "reuse this baseline checkpoint");

    CLI::App* ev = app.add_subcommand("evaluate", "score a checkpoint on the configured data");
    add_common(ev, true);
    ev->add_option("--checkpoint", checkpoint_path, "checkpoint to score")->required();
    ev->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));

    CLI::App* rp = app.add_subcommand("report", "re-render tables from a run manifest");
    add_common(rp, false);
    rp->add_option("--manifest", manifest_path, "manifest written by sparsify")->required();
    rp->add_flag("--recompute", recompute, "re-derive stats from checkpoints and masks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (tb->parsed()) return cmd_train_baseline(fl);
        if (sp->parsed()) return cmd_sparsify(fl, baseline_path);
        if (ev->parsed()) return cmd_evaluate(fl, checkpoint_path, split);
        if (rp->parsed()) return cmd_report(fl, manifest_path, recompute);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
