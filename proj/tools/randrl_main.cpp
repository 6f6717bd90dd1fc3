#include <cstdint>
#include <string>

#include "CLI11.hpp"
#include "randrl/cli.hpp"

// Thin argv adapter; all behavior lives in the library so it stays testable.
int main(int argc, char** argv) {
    CLI::App app{"network-randomization RL laboratory"};
    app.require_subcommand(1);

    randrl::CliOptions opt;
    uint64_t seed = 0;
    int envs = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--manifest", opt.manifest_path, "experiment manifest (JSON)");
        sub->add_option("--checkpoint", opt.checkpoint_path, "checkpoint file");
        sub->add_option("--out", opt.out_override, "output directory override");
        sub->add_option("--seed", seed, "seed override")->check(CLI::NonNegativeNumber);
        sub->add_option("--envs", envs, "parallel env count override")
            ->check(CLI::PositiveNumber);
        sub->add_option("--method", opt.method_override,
                        "training method override (vanilla, rand, rand_fm, cutout, grayout, "
                        "invert, jitter, domrand)");
    };

    CLI::App* train = app.add_subcommand("train", "run training from a manifest");
    add_common(train);
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd);
    CLI::App* ablate = app.add_subcommand("ablate", "sweep one axis (alpha, placement, M)");
    ablate->add_option("axis", opt.axis, "sweep axis")->required();
    add_common(ablate);
    CLI::App* exportf =
        app.add_subcommand("export-features", "dump trajectory features as TSV");
    add_common(exportf);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;  // usage errors are validation errors
    }

    CLI::App* chosen = app.get_subcommands().front();
    opt.command = chosen->get_name();
    if (chosen->count("--seed") > 0) opt.seed_override = seed;
    if (chosen->count("--envs") > 0) opt.envs_override = envs;

    return randrl::run_command(opt);
}
