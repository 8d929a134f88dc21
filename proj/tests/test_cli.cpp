#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include "cli_run.hpp"

using namespace tdti::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kSmallConfig = R"(# small world
[data]
n_drugs = 40
n_targets = 12
drug_dim = 8
protein_dim = 10
[model]
hidden_dim = 16
output_dim = 8
latent_dim = 4
max_len = 24
[train]
lr = 0.003
max_epochs = 4
batch_size = 64
)";

bool first_line_is(const std::string& out, const std::string& prefix) { return out.rfind(prefix, 0) == 0; }

}  // namespace

TEST_CASE("gen-synth is reproducible", "[cli]") {
    const auto dir = scratch("cli_gen");
    spit(dir / "c.ini", kSmallConfig);
    for (const char* sub : {"a", "b"}) {
        const auto r = run_cli({"gen-synth", "--config", (dir / "c.ini").string(), "--out", (dir / sub).string(), "--seed", "4"});
        INFO(r.output);
        REQUIRE(r.status == 0);
    }
    for (const char* f : {"drugs.emb", "proteins.emb", "interactions.tsv", "smiles.tsv"}) {
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    const json ma = json::parse(slurp(dir / "a" / "manifest.json"));
    const json mb = json::parse(slurp(dir / "b" / "manifest.json"));
    CHECK(ma["config_hash"] == mb["config_hash"]);
    CHECK(ma["command"] == "gen-synth");
    CHECK(ma["seeds"] == json::array({4}));
    CHECK(ma["config"]["n_drugs"] == mb["config"]["n_drugs"]);
}

TEST_CASE("error classes and exit codes", "[cli]") {
    const auto dir = scratch("cli_err");
    auto r = run_cli({"gen-synth", "--out", dir.string(), "--bogus"});
    CHECK(r.status == 2);
    CHECK(first_line_is(r.output, "USAGE_ERROR"));

    r = run_cli({});
    CHECK(r.status == 2);
    CHECK(first_line_is(r.output, "USAGE_ERROR"));

    spit(dir / "bad.ini", "no_such_key = 3\n");
    r = run_cli({"gen-synth", "--config", (dir / "bad.ini").string(), "--out", (dir / "o").string()});
    CHECK(r.status == 1);
    CHECK(first_line_is(r.output, "CONFIG_ERROR"));

    spit(dir / "scores.tsv", "compound_id\tmethod\tscore\nA\tglide\t-9\nB\tglide\t-7\n");
    spit(dir / "act.tsv", "compound_id\nA\n");
    r = run_cli({"enrich", "--data", (dir / "scores.tsv").string(), "--actives", (dir / "act.tsv").string(), "--ranking",
                 "two_key", "--out", (dir / "e").string()});
    CHECK(r.status == 1);
    CHECK(first_line_is(r.output, "MISSING_COLUMN"));

    r = run_cli({"enrich", "--data", (dir / "scores.tsv").string(), "--actives", (dir / "act.tsv").string(), "--ranking",
                 "docking", "--trials", "100", "--out", (dir / "e").string()});
    INFO(r.output);
    CHECK(r.status == 0);

    r = run_cli({"train", "--data", (dir / "missing.tsv").string(), "--out", (dir / "t").string()});
    CHECK(r.status == 1);
    CHECK(first_line_is(r.output, "IO_ERROR"));
}

TEST_CASE("end-to-end pipeline on a small world", "[cli]") {
    const auto dir = scratch("cli_e2e");
    spit(dir / "c.ini", kSmallConfig);
    const std::string cfg = (dir / "c.ini").string();
    auto step = [&](std::vector<std::string> args) {
        const auto r = run_cli(args);
        INFO(args.front() << ": " << r.output);
        REQUIRE(r.status == 0);
    };
    step({"gen-synth", "--config", cfg, "--out", (dir / "syn").string()});
    step({"split", "--config", cfg, "--data", (dir / "syn").string(), "--strategy", "unseen_target", "--out",
          (dir / "split").string()});
    step({"train", "--config", cfg, "--data", (dir / "split").string(), "--embeddings", (dir / "syn").string(), "--out",
          (dir / "train").string()});
    step({"predict", "--data", (dir / "split").string(), "--embeddings", (dir / "syn").string(), "--model",
          (dir / "train").string(), "--split", "test", "--out", (dir / "pred").string()});

    const json report = json::parse(slurp(dir / "train" / "train_report.json"));
    CHECK(report["runs"].size() == 1u);
    const json met = json::parse(slurp(dir / "pred" / "metrics.json"));
    CHECK(met.contains("aupr"));

    // Rank against one held-out target.
    std::istringstream preds(slurp(dir / "pred" / "predictions.tsv"));
    std::string line;
    std::getline(preds, line);
    std::getline(preds, line);
    const std::string target = line.substr(line.find('\t') + 1, line.find('\t', line.find('\t') + 1) - line.find('\t') - 1);
    step({"rank", "--data", (dir / "pred" / "predictions.tsv").string(), "--ranking", "two_key", "--target", target,
          "--out", (dir / "rank").string()});
    step({"enrich", "--data", (dir / "rank" / "ranked.tsv").string(), "--truth", (dir / "split" / "interactions.tsv").string(),
          "--target", target, "--trials", "200", "--out", (dir / "enrich").string()});
    const json e = json::parse(slurp(dir / "enrich" / "enrichment.json"));
    CHECK(e["k_grid"] == json::array({1.0, 5.0, 20.0, 50.0, 100.0}));
    CHECK(e["methods"].size() == 1u);

    step({"report", "--data", (dir / "pred" / "predictions.tsv").string(), "--truth",
          (dir / "split" / "interactions.tsv").string(), "--out", (dir / "report").string()});
    const json rep = json::parse(slurp(dir / "report" / "report.json"));
    CHECK(rep.contains("confusion_confidence"));
    CHECK(rep["metrics"].contains("f1"));

    step({"rank", "--data", (dir / "pred" / "predictions.tsv").string(), "--target", target, "--unf-threshold", "5.0",
          "--out", (dir / "rank_f").string()});
    const json census = json::parse(slurp(dir / "rank_f" / "census.json"));
    CHECK(census["docked"].get<int>() >= census["unf_below_threshold"].get<int>());
    CHECK(census["unf_below_threshold"].get<int>() > 0);
    const auto none = run_cli({"rank", "--data", (dir / "pred" / "predictions.tsv").string(), "--target", target,
                               "--unf-threshold", "0", "--out", (dir / "rank_0").string()});
    CHECK(none.status == 1);
    CHECK(first_line_is(none.output, "DATA_ERROR"));

    // Same seed, same ranked output.
    step({"train", "--config", cfg, "--data", (dir / "split").string(), "--embeddings", (dir / "syn").string(), "--out",
          (dir / "train2").string()});
    CHECK(slurp(dir / "train" / "train_report.json") == slurp(dir / "train2" / "train_report.json"));
    CHECK(slurp(dir / "train" / "model.ckpt") == slurp(dir / "train2" / "model.ckpt"));
}
