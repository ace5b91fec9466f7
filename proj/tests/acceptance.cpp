// Runs `ltsm verify` twice (one and two worker threads), prints one line per
// acceptance criterion and exits nonzero if any criterion fails.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int run_verify(const fs::path& dir, unsigned threads) {
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    std::ostringstream cmd;
    cmd << '"' << LTSM_CLI_PATH << "\" --seed 42 --threads " << threads << " --out-dir \"" << dir.string()
        << "\" verify > \"" << dir.string() << ".log\" 2>&1";
    std::cout << "running: " << cmd.str() << std::endl;
    const int rc = std::system(cmd.str().c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string describe(const json& test) {
    std::ostringstream os;
    os << test["name"].get<std::string>() << " " << (test["pass"].get<bool>() ? "ok" : "FAILED")
       << " (statistic " << test["statistic"].get<double>() << ", threshold " << test["threshold"].get<double>() << ")";
    return os.str();
}

}  // namespace

int main() {
    const fs::path work(LTSM_WORK_DIR);
    const fs::path a = work / "threads1";
    const fs::path b = work / "threads2";

    const int rc_a = run_verify(a, 1);
    const int rc_b = run_verify(b, 2);
    std::cout << "exit codes: " << rc_a << ", " << rc_b << "\n";

    bool all = true;
    if (!fs::exists(a / "report.json")) {
        std::cout << "no report produced; see " << a.string() << ".log\n";
        return 1;
    }
    const json report = json::parse(slurp(a / "report.json"));
    for (const auto& c : report["criteria"]) {
        const bool pass = c["pass"].get<bool>();
        all = all && pass;
        std::cout << c["id"].get<std::string>() << " " << (pass ? "PASS" : "FAIL") << "  "
                  << c["title"].get<std::string>() << "\n";
        for (const auto& t : c["tests"]) std::cout << "      " << describe(t) << "\n";
    }

    // Determinism: every file of the two runs must match byte for byte.
    std::set<std::string> names;
    for (const auto* dir : {&a, &b})
        if (fs::exists(*dir))
            for (const auto& e : fs::directory_iterator(*dir)) names.insert(e.path().filename().string());
    std::size_t differing = 0;
    for (const auto& n : names) {
        if (!fs::exists(a / n) || !fs::exists(b / n) || slurp(a / n) != slurp(b / n)) {
            std::cout << "      differs: " << n << "\n";
            ++differing;
        }
    }
    const bool det = !names.empty() && differing == 0;
    all = all && det;
    std::cout << "C12 " << (det ? "PASS" : "FAIL") << "  determinism across runs and thread counts (" << names.size()
              << " files, " << differing << " differing)\n";
    std::cout << (all ? "all criteria pass" : "some criteria fail") << "\n";
    return all ? 0 : 1;
}
