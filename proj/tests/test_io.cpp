#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tdti/error.hpp"
#include "tdti/io/embeddings.hpp"
#include "tdti/io/interactions.hpp"
#include "tdti/io/projections.hpp"
#include "tdti/io/synthetic.hpp"
#include "tdti/metrics.hpp"
#include "tdti/model/model.hpp"

using namespace tdti;
using namespace tdti::io;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "tdti_test_io";
    fs::create_directories(dir);
    return (dir / name).string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Usage;
}

}  // namespace

TEST_CASE("JSONL store with two 4-wide drug vectors") {
    const std::string p = tmp_path("two.jsonl");
    write_file(p, R"({"id":"a","kind":"drug","vec":[1,2,3,4]}
{"id":"b","kind":"drug","vec":[0.5,-1,0,2]}
)");
    const EmbeddingStore s = load_embeddings(p, Modality::Drug);
    CHECK(s.size() == 2);
    CHECK(s.width() == 4);
    CHECK(s.at("b")(1) == -1.0);
}

TEST_CASE("embedding loading rejects bad records") {
    const std::string p = tmp_path("bad.jsonl");
    write_file(p, R"({"id":"a","kind":"drug","vec":[1,2,3,4]}
{"id":"b","kind":"drug","vec":[1,2,3]}
)");
    try {
        load_embeddings(p, Modality::Drug);
        FAIL("width mismatch accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Format);
        CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }

    EmbeddingStore s(Modality::Drug);
    Eigen::VectorXd v(2);
    v << 1.0, std::nan("");
    CHECK(kind_of([&] { s.add("x", v); }) == ErrorKind::Format);

    write_file(p, R"({"id":"a","kind":"protein","vec":[1,2]})" "\n");
    CHECK(kind_of([&] { load_embeddings(p, Modality::Drug); }) == ErrorKind::Format);
    CHECK(kind_of([&] { load_embeddings(tmp_path("missing.jsonl"), Modality::Drug); }) == ErrorKind::Io);
}

TEST_CASE("binary format round-trips bit-exactly with JSONL content") {
    SyntheticConfig c;
    c.n_drugs = 20;
    c.n_targets = 5;
    c.noise = 0.3;
    const SyntheticDataset d = gen_synthetic(c);
    const std::string jp = tmp_path("drugs.jsonl");
    const std::string bp = tmp_path("drugs.bin");
    save_embeddings_jsonl(d.drugs, jp);
    save_embeddings_binary(d.drugs, bp);
    const EmbeddingStore from_text = load_embeddings(jp, Modality::Drug);
    const EmbeddingStore from_bin = load_embeddings(bp, Modality::Drug);
    CHECK(from_text == d.drugs);
    CHECK(from_bin == d.drugs);
    CHECK(from_bin == from_text);

    // Byte layout: magic, u32 width, then u16 id length.
    const std::string bytes = read_bytes(bp);
    REQUIRE(bytes.size() > 14);
    CHECK(bytes.substr(0, 8) == "TDTIEMB1");
    std::uint32_t width;
    std::memcpy(&width, bytes.data() + 8, 4);
    CHECK(width == static_cast<std::uint32_t>(c.drug_dim));
    std::uint16_t idlen;
    std::memcpy(&idlen, bytes.data() + 12, 2);
    CHECK(idlen == d.drugs.records().front().id.size());
    const std::size_t per_record = 2 + idlen + 4 * width;
    CHECK(bytes.size() == 12 + per_record * d.drugs.size());

    // write(read(write(S))) is byte-identical.
    const std::string bp2 = tmp_path("drugs2.bin");
    save_embeddings_binary(from_bin, bp2);
    CHECK(read_bytes(bp2) == bytes);
}

TEST_CASE("interaction TSV round-trip with absent fields") {
    std::vector<InteractionRecord> recs{
        {"D1", "T1", std::nullopt, 1, std::nullopt, Split::Train},
        {"D2", "T1", std::string("P1"), 0, 6.25, Split::Test},
        {"D3", "T2", std::nullopt, std::nullopt, 7.5, Split::Unassigned},
    };
    const std::string p = tmp_path("inter.tsv");
    save_interactions(recs, p);
    CHECK(load_interactions(p) == recs);
    const std::string text = read_bytes(p);
    CHECK(text.rfind("drug_id\ttarget_id\tpocket_id\tlabel\taffinity\tsplit\n", 0) == 0);
}

TEST_CASE("interaction ids must resolve") {
    EmbeddingStore drugs(Modality::Drug), targets(Modality::Protein);
    drugs.add("D1", Eigen::VectorXd::Ones(2));
    targets.add("T1", Eigen::VectorXd::Ones(3));
    std::vector<InteractionRecord> recs{{"D1", "T1", {}, 1, {}, Split::Train}, {"D9", "T1", {}, 0, {}, Split::Train}};
    try {
        validate_ids(recs, drugs, targets);
        FAIL("unresolved id accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Data);
        CHECK(std::string(e.what()).find("D9") != std::string::npos);
    }
    CHECK(kind_of([&] { check_mode({{"D1", "T1", {}, std::nullopt, 5.0, Split::Train}}, TaskMode::Classification); }) ==
          ErrorKind::Data);
}

TEST_CASE("gen_synthetic is a pure function of its config") {
    SyntheticConfig c;
    c.seed = 7;
    c.pocket_dim = 6;
    const std::string a = tmp_path("s1.bin"), b = tmp_path("s2.bin");
    const SyntheticDataset d1 = gen_synthetic(c);
    const SyntheticDataset d2 = gen_synthetic(c);
    save_embeddings_binary(d1.proteins, a);
    save_embeddings_binary(d2.proteins, b);
    CHECK(read_bytes(a) == read_bytes(b));
    CHECK(d1.drugs == d2.drugs);
    CHECK(*d1.pockets == *d2.pockets);
    CHECK(d1.interactions == d2.interactions);
    CHECK(d1.smiles == d2.smiles);
    c.seed = 8;
    CHECK_FALSE(gen_synthetic(c).drugs == d1.drugs);
}

TEST_CASE("planted labels follow the factor dot product") {
    SyntheticConfig c;
    c.n_drugs = 40;
    c.n_targets = 10;
    const SyntheticDataset d = gen_synthetic(c);
    REQUIRE(d.interactions.size() == 400u);
    // Linear probe on the per-pair factor features u*v with unit weights.
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < c.n_drugs; ++i) {
        for (int t = 0; t < c.n_targets; ++t) {
            const auto& r = d.interactions[static_cast<std::size_t>(i * c.n_targets + t)];
            REQUIRE(r.drug_id == synthetic_drug_id(i));
            REQUIRE(r.target_id == synthetic_target_id(t));
            const double dot = d.drug_factors.col(i).dot(d.target_factors.col(t));
            CHECK(*r.label == (dot > 0 ? 1 : 0));
            scores.push_back(dot);
            labels.push_back(*r.label);
        }
    }
    CHECK(metrics::aupr(scores, labels) == 1.0);
}

TEST_CASE("default synthetic config has a balanced positive rate") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SyntheticConfig c;
        c.seed = seed;
        const SyntheticDataset d = gen_synthetic(c);
        double pos = 0;
        for (const auto& r : d.interactions) pos += *r.label;
        const double rate = pos / static_cast<double>(d.interactions.size());
        CHECK(rate >= 0.35);
        CHECK(rate <= 0.65);
    }
}

TEST_CASE("synthetic config validation") {
    SyntheticConfig c;
    c.n_drugs = 1;
    CHECK_THROWS_AS(gen_synthetic(c), Error);
    c.n_drugs = 10;
    c.noise = -1;
    CHECK_THROWS_AS(gen_synthetic(c), Error);
}

TEST_CASE("projection export through identity encoders") {
    model::ModelConfig mc;
    mc.drug_dim = 4;
    mc.protein_dim = 4;
    mc.hidden_dim = 4;
    mc.output_dim = 4;
    mc.max_len = 8;
    mc.latent_dim = 2;
    model::Model m(mc, 1);
    model::identity_init(m.drug_encoder());

    EmbeddingStore drugs(Modality::Drug);
    Eigen::VectorXd v(4);
    v << 0.5, 1.0, 2.0, 0.25;
    drugs.add("d", v);
    const std::string p = tmp_path("proj.tsv");
    export_projections(m, drugs, p);
    const EmbeddingStore back = load_projections(p, Modality::Drug);
    CHECK(back.width() == mc.output_dim);
    CHECK(back.at("d") == v);

    EmbeddingStore wrong(Modality::Protein);
    wrong.add("t", Eigen::VectorXd::Ones(3));
    CHECK(kind_of([&] { export_projections(m, wrong, p); }) == ErrorKind::Shape);
}

TEST_CASE("exported width equals the encoder output dim") {
    model::ModelConfig mc;
    mc.drug_dim = 64;
    mc.protein_dim = 32;
    mc.hidden_dim = 16;
    mc.output_dim = 256;
    mc.max_len = 8;
    mc.latent_dim = 4;
    model::Model m(mc, 3);
    EmbeddingStore prot(Modality::Protein);
    prot.add("t1", Eigen::VectorXd::Ones(32));
    prot.add("t2", Eigen::VectorXd::LinSpaced(32, -1, 1));
    const std::string p = tmp_path("proj_p.tsv");
    export_projections(m, prot, p);
    const EmbeddingStore back = load_projections(p, Modality::Protein);
    CHECK(back.size() == 2);
    CHECK(back.width() == 256);
}
