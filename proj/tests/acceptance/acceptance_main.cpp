// Full acceptance battery: one PASS/FAIL line per criterion 1-10.
// Options: --smoke (reduced sizes), --threads k, --criterion i (repeatable),
// --out dir.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "filterlab/acceptance.hpp"

int main(int argc, char** argv)
{
    filterlab::AcceptanceOptions opts;
    std::vector<int> ids;
    std::filesystem::path out = "acceptance_out";
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--smoke") opts.sizes = filterlab::AcceptanceSizes::smoke();
        else if (a == "--threads" && i + 1 < argc) opts.threads = std::atoi(argv[++i]);
        else if (a == "--criterion" && i + 1 < argc) ids.push_back(std::atoi(argv[++i]));
        else if (a == "--out" && i + 1 < argc) out = argv[++i];
        else {
            std::cerr << "usage: acceptance_tests [--smoke] [--threads k] [--criterion i]... [--out dir]\n";
            return 2;
        }
    }
    opts.scratch = out / "scratch";
    try {
        return filterlab::run_acceptance("full", opts, ids, std::cout, out) ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
