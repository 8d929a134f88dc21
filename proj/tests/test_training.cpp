#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "tdti/data/pipeline.hpp"
#include "tdti/error.hpp"
#include "tdti/io/synthetic.hpp"
#include "tdti/model/checkpoint.hpp"
#include "tdti/train/trainer.hpp"
#include "tdti/util/rng.hpp"

using namespace tdti;
using namespace tdti::train;
namespace fs = std::filesystem;

namespace {

io::SyntheticConfig small_synth(io::TaskMode mode = io::TaskMode::Classification) {
    io::SyntheticConfig c;
    c.n_drugs = 40;
    c.n_targets = 12;
    c.drug_dim = 8;
    c.protein_dim = 10;
    c.seed = 3;
    c.mode = mode;
    return c;
}

Dataset split_data(const io::SyntheticConfig& sc, std::uint64_t seed = 0) {
    Dataset d = from_synthetic(io::gen_synthetic(sc));
    data::SplitSpec s;
    s.seed = seed;
    d.records = data::split(d.records, s);
    return d;
}

model::ModelConfig model_for(const io::SyntheticConfig& sc) {
    model::ModelConfig mc;
    mc.drug_dim = sc.drug_dim;
    mc.protein_dim = sc.protein_dim;
    mc.hidden_dim = 16;
    mc.output_dim = 8;
    mc.max_len = 24;
    mc.latent_dim = 4;
    mc.mode = sc.mode;
    return mc;
}

TrainConfig quick(io::TaskMode mode = io::TaskMode::Classification) {
    TrainConfig tc = TrainConfig::defaults(mode);
    tc.lr = 3e-3;
    tc.max_epochs = 5;
    tc.batch_size = 64;
    return tc;
}

}  // namespace

TEST_CASE("config defaults and validation", "[training]") {
    const TrainConfig dti = TrainConfig::defaults(io::TaskMode::Classification);
    CHECK(dti.lr == 5e-5);
    CHECK(dti.weight_decay == 1e-5);
    CHECK(dti.max_epochs == 1000);
    CHECK(dti.eval_metric == EvalMetric::Aupr);
    const TrainConfig dta = TrainConfig::defaults(io::TaskMode::Regression);
    CHECK(dta.lr == 1e-4);
    CHECK(dta.eval_metric == EvalMetric::Pcc);
    TrainConfig bad = dti;
    bad.eval_metric = EvalMetric::Pcc;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = dti;
    bad.lr = -1;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("lr = 0 leaves parameters untouched", "[training]") {
    const auto sc = small_synth();
    const Dataset d = split_data(sc);
    const auto mc = model_for(sc);
    TrainConfig tc = quick();
    tc.lr = 0.0;
    tc.max_epochs = 3;
    const TrainResult r = train::train(mc, d, tc, 7);
    const model::Model init(mc, derive_seed(7, 0));
    const auto a = r.model.parameters();
    const auto b = init.parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].get().value == b[i].get().value);
    REQUIRE(r.report.epochs.size() == 3u);
    for (const auto& e : r.report.epochs) CHECK(e.valid_metric == r.report.epochs.front().valid_metric);
}

TEST_CASE("training is deterministic under a seed", "[training]") {
    const auto sc = small_synth();
    const Dataset d = split_data(sc);
    const auto mc = model_for(sc);
    const TrainResult a = train::train(mc, d, quick(), 11);
    const TrainResult b = train::train(mc, d, quick(), 11);
    CHECK(to_json(a.report).dump() == to_json(b.report).dump());
    const TrainResult c = train::train(mc, d, quick(), 12);
    CHECK(to_json(a.report).dump() != to_json(c.report).dump());
    CHECK(a.report.test.has_value());
    CHECK(a.report.best_epoch >= 1);
    CHECK(a.report.best_epoch <= 5);
}

TEST_CASE("multi-seed aggregate", "[training]") {
    const auto sc = small_synth();
    const Dataset d = split_data(sc);
    TrainConfig tc = quick();
    tc.max_epochs = 2;
    tc.seeds = {0, 1, 2, 3, 4};
    const auto [m1, rep1] = train_seeds(model_for(sc), d, tc, 1);
    const auto [m2, rep2] = train_seeds(model_for(sc), d, tc, 3);
    REQUIRE(rep1.runs.size() == 5u);
    for (const auto& [k, v] : rep1.sd) CHECK(v >= 0.0);
    CHECK(rep1.mean.count("test_aupr"));
    CHECK(rep1.sd.count("best_valid_metric"));
    CHECK(to_json(rep1).dump() == to_json(rep2).dump());
}

TEST_CASE("regression learns planted linear affinities", "[training]") {
    auto sc = small_synth(io::TaskMode::Regression);
    sc.n_drugs = 80;
    sc.affinity_bilinear = 0.0;
    const Dataset d = split_data(sc, 1);
    TrainConfig tc = quick(io::TaskMode::Regression);
    tc.max_epochs = 150;
    tc.lr = 3e-3;
    tc.batch_size = 32;
    const TrainResult r = train::train(model_for(sc), d, tc, 0);
    REQUIRE(r.report.test.has_value());
    REQUIRE(r.report.test->pcc.has_value());
    CHECK(*r.report.test->pcc > 0.99);
    CHECK(r.report.test->rmse.has_value());
}

TEST_CASE("constant regression predictor flags PCC", "[training]") {
    const auto sc = small_synth(io::TaskMode::Regression);
    Dataset d = split_data(sc);
    model::Model m(model_for(sc), 0);
    for (auto* l : {&m.classifier().first, &m.classifier().second}) {
        l->weight.value.setZero();
        l->bias.value.setZero();
    }
    const Evaluation ev = evaluate(m, d, d.records, false);
    CHECK_FALSE(ev.metrics.pcc.has_value());
    CHECK(ev.metrics.rmse.has_value());
    REQUIRE_FALSE(ev.metrics.errors.empty());
    CHECK(ev.metrics.errors.front().find("pcc") != std::string::npos);
}

TEST_CASE("evaluation through a checkpoint and prediction TSV", "[training]") {
    const auto sc = small_synth();
    const Dataset d = split_data(sc);
    TrainResult r = train::train(model_for(sc), d, quick(), 0);
    const fs::path dir = fs::temp_directory_path() / "tdti_test_training";
    fs::create_directories(dir);
    model::save_checkpoint(r.model, (dir / "m.ckpt").string());
    model::Model back = model::load_checkpoint((dir / "m.ckpt").string());

    const Evaluation a = evaluate(r.model, d, d.records);
    const Evaluation b = evaluate(back, d, d.records);
    REQUIRE(a.predictions.size() == d.records.size());
    for (std::size_t i = 0; i < a.predictions.size(); ++i) {
        CHECK(a.predictions[i].logit == b.predictions[i].logit);
        CHECK(a.predictions[i].confidence == b.predictions[i].confidence);
        CHECK(a.predictions[i].unfamiliarity == b.predictions[i].unfamiliarity);
    }
    CHECK(a.metrics.aupr == b.metrics.aupr);
    CHECK(a.predictions.front().unfamiliarity.has_value());

    save_predictions(a.predictions, (dir / "p.tsv").string());
    const auto loaded = load_predictions((dir / "p.tsv").string());
    REQUIRE(loaded.size() == a.predictions.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].drug_id == a.predictions[i].drug_id);
        CHECK(loaded[i].logit == a.predictions[i].logit);
        CHECK(loaded[i].pred_label == a.predictions[i].pred_label);
    }

    std::vector<io::InteractionRecord> missing{{"nope", d.records.front().target_id, {}, 1, {}, io::Split::Test}};
    CHECK_THROWS_AS(evaluate(r.model, d, missing), Error);
}

TEST_CASE("empty split is an error", "[training]") {
    const auto sc = small_synth();
    Dataset d = split_data(sc);
    for (auto& rec : d.records) {
        if (rec.split == io::Split::Valid) rec.split = io::Split::Train;
    }
    CHECK_THROWS_AS(train::train(model_for(sc), d, quick(), 0), Error);
}
