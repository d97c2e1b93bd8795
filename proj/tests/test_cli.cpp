#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "xaudit/app.hpp"
#include "xaudit/csv.hpp"

using namespace xaudit;
using xaudit::io::Json;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "xaudit_test_cli";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Json small_config(std::uint64_t seed = 5) {
    return {{"seed", seed},
            {"data", {{"sample_size", 1200}, {"synthetic", {{"n_rows", 4000}}}}},
            {"models",
             {{"random_forest", {{"n_trees", 15}, {"max_depth", 6}}},
              {"gradient_boosting", {{"n_stages", 20}}},
              {"mlp", {{"epochs", 2}, {"widths", {16, 8, 8, 4}}}}}},
            {"explain",
             {{"instances", 8}, {"background", 10}, {"lime_samples", 300}, {"shap_coalitions", 0}}},
            {"perturbation", {{"repeats", 2}}}};
}

fs::path write_config(const std::string& name, const Json& j) {
    fs::create_directories(kRoot);
    const fs::path p = kRoot / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

struct Result {
    int code;
    std::string err;
};

Result run_cli(const std::string& args) {
    const fs::path err = kRoot / "stderr.txt";
    const std::string cmd = std::string(XAUDIT_CLI) + " " + args + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::map<std::string, std::string> tree_contents(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> record;
    while (csv::read_record(in, record)) rows.push_back(record);
    return rows;
}

/// Object key paths, with arrays collapsed to "[]".
void key_paths(const Json& j, const std::string& prefix, std::set<std::string>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            out.insert(prefix + "." + k);
            key_paths(v, prefix + "." + k, out);
        }
    } else if (j.is_array()) {
        for (const auto& v : j) key_paths(v, prefix + "[]", out);
    }
}

/// Runs one audit per seed at most once per test binary.
const fs::path& audited(std::uint64_t seed) {
    static std::map<std::uint64_t, fs::path> done;
    auto it = done.find(seed);
    if (it != done.end()) return it->second;
    const fs::path out = kRoot / ("audit_" + std::to_string(seed));
    fs::remove_all(out);
    const auto cfg = write_config("audit_" + std::to_string(seed) + ".json", small_config(seed));
    const auto r = run_cli("audit --quiet --config " + cfg.string() + " --out " + out.string());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return done.emplace(seed, out).first->second;
}

}  // namespace

TEST_CASE("train writes one accuracy row per model and is reproducible") {
    const auto cfg = write_config("train.json", small_config());
    const fs::path a = kRoot / "train_a", b = kRoot / "train_b";
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(run_cli("train --quiet --config " + cfg.string() + " --out " + a.string()).code == 0);
    REQUIRE(run_cli("train --quiet --config " + cfg.string() + " --out " + b.string()).code == 0);
    const auto rows = read_csv(a / "accuracy.csv");
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        double acc = -1;
        REQUIRE(csv::parse_double(rows[i][1], acc));
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
    }
    CHECK(tree_contents(a) == tree_contents(b));
    for (const char* m : {"logistic", "random_forest", "gradient_boosting", "mlp"})
        CHECK(fs::exists(a / "models" / (std::string(m) + ".json")));
}

TEST_CASE("exit codes") {
    const auto cfg = write_config("codes.json", small_config());
    auto r = run_cli("train --config " + cfg.string() + " --models \"\" --out " + (kRoot / "none").string());
    CHECK(r.code == 1);
    CHECK(r.err.find("no models enabled") != std::string::npos);

    Json disabled = small_config();
    disabled["models"]["enabled"] = Json::array();
    r = run_cli("train --config " + write_config("disabled.json", disabled).string());
    CHECK(r.code == 1);
    CHECK(r.err.find("no models enabled") != std::string::npos);

    Json typo = small_config();
    typo["explain"]["instancs"] = 3;
    CHECK(run_cli("train --config " + write_config("typo.json", typo).string()).code == 1);
    CHECK(run_cli("train --models svm --config " + cfg.string()).code == 1);
    CHECK(run_cli("frobnicate").code == 1);

    Json missing = small_config();
    missing["data"]["source"] = "csv";
    missing["data"]["path"] = (kRoot / "does_not_exist.csv").string();
    r = run_cli("train --config " + write_config("missing.json", missing).string());
    CHECK(r.code == 2);

    r = run_cli("explain --config " + cfg.string() + " --out " + (kRoot / "never_trained").string());
    CHECK(r.code == 2);
    CHECK(r.err.find("run train first") != std::string::npos);

    CHECK(app::exit_code_for(NumericError("x")) == 3);
    CHECK(app::exit_code_for(DataError("x")) == 2);
    CHECK(app::exit_code_for(ConfigError("x")) == 1);
}

TEST_CASE("explain emits the expected rankings") {
    const Json rankings = Json::parse(slurp(audited(5) / "rankings.json"));
    std::set<std::pair<std::string, std::string>> present;
    for (const auto& r : rankings.at("rankings"))
        present.emplace(r.at("model").get<std::string>(), r.at("technique").get<std::string>());
    CHECK(present.count({"logistic", "shap"}));
    CHECK(present.count({"logistic", "logit_coefficient"}));
    CHECK(present.count({"random_forest", "impurity"}));
    CHECK(present.count({"gradient_boosting", "impurity"}));
    CHECK_FALSE(present.count({"logistic", "impurity"}));
    CHECK_FALSE(present.count({"mlp", "impurity"}));
    CHECK_FALSE(present.count({"mlp", "logit_coefficient"}));
    const auto skipped = rankings.at("skipped").get<std::vector<std::string>>();
    CHECK(skipped == std::vector<std::string>{"impurity importance skipped for logistic: model has no trees",
                                              "impurity importance skipped for mlp: model has no trees"});
}

TEST_CASE("GAM cluster proportions sum to one") {
    for (const char* m : {"logistic", "random_forest", "gradient_boosting", "mlp"}) {
        const Json gam = Json::parse(slurp(audited(5) / "gam" / (std::string(m) + ".json")));
        for (const char* mode : {"label_forced", "unsupervised"}) {
            double total = 0.0;
            std::size_t members = 0;
            for (const auto& c : gam.at(mode).at("clusters")) {
                total += c.at("proportion").get<double>();
                members += c.at("members").size();
            }
            CHECK(std::abs(total - 1.0) <= 1e-9);
            CHECK(members == 8);
        }
    }
}

TEST_CASE("every output file carries the config hash and seed") {
    const fs::path out = audited(5);
    const Json run = Json::parse(slurp(out / "run_config.json")).at("run");
    const std::string hash = run.at("config_hash").get<std::string>();
    CHECK(hash.size() == 16);
    CHECK(run.at("seed") == 5);
    std::size_t files = 0;
    for (const auto& [rel, text] : tree_contents(out)) {
        CAPTURE(rel);
        ++files;
        if (rel.size() > 5 && rel.substr(rel.size() - 5) == ".json") {
            const Json j = Json::parse(text);
            CHECK(j.at("run").at("config_hash") == hash);
            CHECK(j.at("run").at("seed") == 5);
        } else if (rel.size() > 4 && rel.substr(rel.size() - 4) == ".csv") {
            const auto rows = read_csv(out / rel);
            REQUIRE(rows.size() >= 2);
            const auto& head = rows[0];
            REQUIRE(head.size() >= 2);
            CHECK(head[head.size() - 2] == "config_hash");
            CHECK(head.back() == "seed");
            CHECK(rows[1][head.size() - 2] == hash);
            CHECK(rows[1].back() == "5");
        } else {
            CHECK(text.find(hash) != std::string::npos);
            CHECK(text.find("seed 5") != std::string::npos);
        }
    }
    CHECK(files == 29);
}

TEST_CASE("a different master seed changes the data but not the file schemas") {
    const auto a = tree_contents(audited(5));
    const auto b = tree_contents(audited(6));
    std::set<std::string> names_a, names_b;
    for (const auto& [k, v] : a) names_a.insert(k);
    for (const auto& [k, v] : b) names_b.insert(k);
    REQUIRE(names_a == names_b);
    CHECK(a.at("attributions/logistic_shap.csv") != b.at("attributions/logistic_shap.csv"));
    for (const auto& name : names_a) {
        CAPTURE(name);
        if (name.substr(name.size() - 4) == ".csv") {
            CHECK(read_csv(audited(5) / name).front() == read_csv(audited(6) / name).front());
        } else if (name.substr(name.size() - 5) == ".json") {
            std::set<std::string> ka, kb;
            key_paths(Json::parse(a.at(name)), "", ka);
            key_paths(Json::parse(b.at(name)), "", kb);
            CHECK(ka == kb);
        }
    }
}

TEST_CASE("staged subcommands reproduce the audit byte for byte") {
    const auto cfg = write_config("staged.json", small_config(5));
    const fs::path out = kRoot / "staged";
    fs::remove_all(out);
    for (const char* cmd : {"train", "explain", "perturb", "report"})
        REQUIRE(run_cli(std::string(cmd) + " --quiet --config " + cfg.string() + " --out " + out.string()).code == 0);
    CHECK(tree_contents(out) == tree_contents(audited(5)));
}

TEST_CASE("gen-synth output reloads through the csv path") {
    Json j = small_config(9);
    j["data"]["synthetic"]["n_rows"] = 3000;
    const auto cfg = write_config("synth.json", j);
    const fs::path out = kRoot / "synth";
    fs::remove_all(out);
    REQUIRE(run_cli("gen-synth --quiet --config " + cfg.string() + " --out " + out.string()).code == 0);
    const auto reload = app::load_run_config(out / "synthetic_config.json");
    CHECK(reload.data.source == "csv");
    const auto data = app::prepare_data(reload);
    CHECK(data.train.size() + data.holdout.size() == 1200);

    app::RunConfig direct = app::parse_run_config(j);
    const auto generated = generate_synthetic(direct.data.synthetic, app::module_seed(direct, "synthetic")).data;
    auto loaded = load_csv((out / "synthetic.csv").string(), reload.data.schema);
    CHECK(loaded.report.kept == 3000);
    CHECK(loaded.data.rows() == generated.rows());
    CHECK(loaded.data.labels() == generated.labels());
}
