#include "prlm/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

prlm::experiment::ExperimentConfig load(const std::string& path, const std::string& out,
                                        const std::optional<std::uint64_t>& seed) {
    auto cfg = prlm::experiment::load_config(path);
    if (!out.empty()) cfg.output = out;
    if (seed) cfg.seed = *seed;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic iteration for coupled port-Hamiltonian systems"};
    app.require_subcommand(1);
    std::string out;
    std::optional<std::uint64_t> seed;
    app.add_option("--out", out, "Output directory (overrides the config)");
    app.add_option("--seed", seed, "Random seed (overrides the config)");

    std::string run_path, check_path;
    auto* run = app.add_subcommand("run", "Run the splitting sweep and write reports");
    run->add_option("config", run_path, "Config file")->required()->check(CLI::ExistingFile);
    auto* check = app.add_subcommand("check", "Assembly certificates only, no iteration");
    check->add_option("config", check_path, "Config file")->required()->check(CLI::ExistingFile);
    run->fallthrough();
    check->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto cfg = load(run_path, out, seed);
            const auto res = prlm::experiment::run_experiment(cfg);
            std::ifstream summary(std::filesystem::path(cfg.output) / "summary.txt");
            std::cout << summary.rdbuf();
            return res.exit_status;
        }
        const auto cfg = load(check_path, out, seed);
        prlm::experiment::CertificateReport rep;
        try {
            rep = prlm::experiment::certify(prlm::experiment::build_parts(cfg), cfg.seed);
        } catch (const prlm::Error& e) {
            rep.error = e.what();
        }
        std::cout << prlm::experiment::format_certificates(rep);
        return rep.ok() ? 0 : 1;
    } catch (const prlm::Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
}
