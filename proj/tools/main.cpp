#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "jsq/cli.hpp"

using namespace jsq::cli;

namespace {

struct Overrides {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> D;
    std::optional<int> L_max;
    std::optional<int> max_iters;
    bool rational = false;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "JSON run configuration")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--d", o.D, "background truncation D");
    sub->add_option("--lmax", o.L_max, "level truncation L_max");
    sub->add_option("--max-iters", o.max_iters, "domain iteration cap");
    sub->add_flag("--rational", o.rational, "exact rational invariant-vector check");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical analysis of join-the-shortest-queue tail asymptotics"};
    app.set_version_flag("--version", JSQ_VERSION);
    app.require_subcommand(1);
    Overrides o;
    for (const char* name : {"verify", "decay", "domain", "simulate", "export-kernel"}) add_common(app.add_subcommand(name), o);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitInvalidConfig;
    }
    std::string command = app.get_subcommands().front()->get_name();
    try {
        RunConfig c = load_config(o.config);
        if (o.seed) c.seed = *o.seed;
        if (o.D) {
            c.D = *o.D;
            c.grid_D.clear();
        }
        if (o.L_max) {
            c.L_max = *o.L_max;
            c.grid_L.clear();
        }
        if (o.max_iters) c.max_iters = *o.max_iters;
        if (o.rational) c.rational = true;
        CommandResult r = run_command(command, c);
        write_outputs(r, o.out);
        std::cout << command << ": " << (r.exit_code == kExitPass ? "pass" : "FAIL") << " (hash " << config_hash(c) << ", "
                  << o.out << ")\n";
        if (r.report.contains("checks"))
            for (const auto& chk : r.report["checks"])
                if (!chk["pass"].get<bool>()) std::cout << "  failed: " << chk["name"].get<std::string>() << '\n';
        if (r.report.contains("error")) std::cout << "  error: " << r.report["error"].get<std::string>() << '\n';
        return r.exit_code;
    } catch (const InvalidConfig& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return kExitInvalidConfig;
    }
}
