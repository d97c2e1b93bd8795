// Command-line front end: train, explain, perturb, audit, gen-synth, report.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "xaudit/app.hpp"

namespace {

using namespace xaudit;

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string models;
    bool quiet = false;
};

std::vector<ModelKind> parse_model_list(const std::string& list) {
    std::vector<ModelKind> kinds;
    std::istringstream in(list);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) kinds.push_back(parse_model_kind(item));
    return kinds;
}

app::RunConfig resolve(const Options& o) {
    app::RunConfig c = o.config_path.empty() ? app::RunConfig{} : app::load_run_config(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (!o.out.empty()) c.output_dir = o.out;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Static vs dynamic feature-importance audit for tabular classifiers"};
    cli.require_subcommand(1);
    Options o;
    bool models_given = false;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "Run config (JSON)");
        sub->add_option("--seed", o.seed, "Master seed; overrides the config");
        sub->add_option("--out", o.out, "Output directory; overrides the config");
        sub->add_option("--models", o.models, "Comma-separated model list; overrides the config")
            ->each([&](const std::string&) { models_given = true; });
        sub->add_flag("--quiet", o.quiet, "Only report errors");
    };
    const std::vector<std::pair<const char*, const char*>> commands{
        {"train", "Train the enabled models, write model JSON and accuracy.csv"},
        {"explain", "Static importance rankings for trained models"},
        {"perturb", "What-if perturbation curves and dynamic rankings"},
        {"report", "Consistency report from explain and perturb outputs"},
        {"audit", "train, explain, perturb and report in one run"},
        {"gen-synth", "Write the configured synthetic population as CSV"}};
    for (const auto& [name, help] : commands) add_common(cli.add_subcommand(name, help));

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        app::RunConfig config = resolve(o);
        if (models_given) config.models = parse_model_list(o.models);
        app::Run run(std::move(config), app::Logger(o.quiet));
        const std::string cmd = cli.get_subcommands().front()->get_name();
        if (cmd == "gen-synth") {
            run.gen_synth();
            return 0;
        }
        app::validate(run.config());
        if (cmd == "audit") {
            run.audit();
            return 0;
        }
        const app::PreparedData data = app::prepare_data(run.config());
        if (cmd == "train") {
            run.write_run_config(data);
            run.train(data);
        } else if (cmd == "explain") {
            run.explain(data, run.load_models(data));
        } else if (cmd == "perturb") {
            run.perturb(data, run.load_models(data));
        } else if (cmd == "report") {
            run.report_from_disk(data);
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "xaudit: error: " << e.what() << "\n";
        return app::exit_code_for(e);
    }
}
