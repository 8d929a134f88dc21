#include "tdti/model/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tdti/error.hpp"

namespace tdti::model {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
public:
    template <typename T>
    void put(T v) {
        buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void put_string(const std::string& s) {
        put(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    void put_bytes(const std::string& s) { buf_.append(s); }
    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return v;
    }
    std::string get_string() {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string get_bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) fail(ErrorKind::Format, path_ + ": truncated checkpoint");
    }
    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string encode_config(const ModelConfig& c) {
    Writer w;
    for (int v : {c.drug_dim, c.protein_dim, c.pocket_dim, c.hidden_dim, c.output_dim, c.max_len, c.latent_dim}) {
        w.put(static_cast<std::int32_t>(v));
    }
    for (double v : {c.lambda_protein, c.lambda_pocket, c.weights.cls, c.weights.con, c.weights.conf, c.weights.recon,
                     c.margin, c.triplet_margin, c.unfamiliarity_eps, c.regression_error_scale}) {
        w.put(v);
    }
    w.put(static_cast<std::uint8_t>(c.mode == io::TaskMode::Classification ? 0 : 1));
    w.put(static_cast<std::uint8_t>(c.contrastive == ContrastiveVariant::CosineMargin ? 0 : 1));
    w.put_string(c.vocab.chars());
    return w.bytes();
}

ModelConfig decode_config(Reader& r) {
    ModelConfig c;
    for (int* v : {&c.drug_dim, &c.protein_dim, &c.pocket_dim, &c.hidden_dim, &c.output_dim, &c.max_len, &c.latent_dim}) {
        *v = r.get<std::int32_t>();
    }
    for (double* v : {&c.lambda_protein, &c.lambda_pocket, &c.weights.cls, &c.weights.con, &c.weights.conf,
                      &c.weights.recon, &c.margin, &c.triplet_margin, &c.unfamiliarity_eps, &c.regression_error_scale}) {
        *v = r.get<double>();
    }
    c.mode = r.get<std::uint8_t>() == 0 ? io::TaskMode::Classification : io::TaskMode::Regression;
    c.contrastive = r.get<std::uint8_t>() == 0 ? ContrastiveVariant::CosineMargin : ContrastiveVariant::TripletL2;
    c.vocab = Vocabulary(r.get_string());
    return c;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    Writer w;
    w.put_bytes(std::string(kCheckpointMagic));
    w.put(kCheckpointVersion);
    w.put_string(encode_config(model.config()));
    const auto params = model.parameters();
    w.put(static_cast<std::uint32_t>(params.size()));
    for (const Parameter& p : params) {
        w.put(static_cast<std::uint32_t>(p.value.rows()));
        w.put(static_cast<std::uint32_t>(p.value.cols()));
        for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p.value.cols(); ++j) w.put(p.value(i, j));
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));

    std::ofstream side(path + ".json");
    if (!side) fail(ErrorKind::Io, "cannot write '" + path + ".json'");
    side << config_to_json(model.config()).dump(2) << '\n';
}

Model load_checkpoint(const std::string& path, const std::optional<ModelConfig>& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    Reader r(ss.str(), path);

    if (r.get_bytes(kCheckpointMagic.size()) != kCheckpointMagic) fail(ErrorKind::Format, path + ": not a checkpoint (bad magic)");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        fail(ErrorKind::Format, path + ": unsupported checkpoint version " + std::to_string(version));
    }
    Reader block(r.get_string(), path);
    ModelConfig config = decode_config(block);
    if (!block.done()) fail(ErrorKind::Format, path + ": trailing bytes in config block");
    try {
        config.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Format, path + ": invalid stored config: " + e.what());
    }
    if (expected && !(*expected == config)) fail(ErrorKind::Format, path + ": stored config differs from the expected config");

    Model model(config);
    auto params = model.parameters();
    const auto count = r.get<std::uint32_t>();
    if (count != params.size()) {
        fail(ErrorKind::Format, path + ": " + std::to_string(count) + " tensors stored, model declares " +
                                    std::to_string(params.size()));
    }
    for (Parameter& p : params) {
        const auto rows = r.get<std::uint32_t>();
        const auto cols = r.get<std::uint32_t>();
        if (rows != p.value.rows() || cols != p.value.cols()) {
            fail(ErrorKind::Format, path + ": tensor '" + p.name + "' stored as (" + std::to_string(rows) + "x" +
                                        std::to_string(cols) + "), declared " + nn::shape_string(p.value));
        }
        for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p.value.cols(); ++j) p.value(i, j) = r.get<double>();
        }
    }
    if (!r.done()) fail(ErrorKind::Format, path + ": trailing bytes after parameters");
    return model;
}

nlohmann::json config_to_json(const ModelConfig& c) {
    return {
        {"drug_dim", c.drug_dim},
        {"protein_dim", c.protein_dim},
        {"pocket_dim", c.pocket_dim},
        {"hidden_dim", c.hidden_dim},
        {"output_dim", c.output_dim},
        {"lambda_protein", c.lambda_protein},
        {"lambda_pocket", c.lambda_pocket},
        {"mode", std::string(io::to_string(c.mode))},
        {"max_len", c.max_len},
        {"vocab", c.vocab.chars()},
        {"latent_dim", c.latent_dim},
        {"alpha_cls", c.weights.cls},
        {"alpha_con", c.weights.con},
        {"alpha_conf", c.weights.conf},
        {"alpha_recon", c.weights.recon},
        {"contrastive", std::string(to_string(c.contrastive))},
        {"margin", c.margin},
        {"triplet_margin", c.triplet_margin},
        {"unfamiliarity_eps", c.unfamiliarity_eps},
        {"regression_error_scale", c.regression_error_scale},
    };
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.drug_dim = j.at("drug_dim").get<int>();
        c.protein_dim = j.at("protein_dim").get<int>();
        c.pocket_dim = j.at("pocket_dim").get<int>();
        c.hidden_dim = j.at("hidden_dim").get<int>();
        c.output_dim = j.at("output_dim").get<int>();
        c.lambda_protein = j.at("lambda_protein").get<double>();
        c.lambda_pocket = j.at("lambda_pocket").get<double>();
        c.mode = io::parse_task_mode(j.at("mode").get<std::string>());
        c.max_len = j.at("max_len").get<int>();
        c.vocab = Vocabulary(j.at("vocab").get<std::string>());
        c.latent_dim = j.at("latent_dim").get<int>();
        c.weights = {j.at("alpha_cls").get<double>(), j.at("alpha_con").get<double>(), j.at("alpha_conf").get<double>(),
                     j.at("alpha_recon").get<double>()};
        c.contrastive = parse_contrastive(j.at("contrastive").get<std::string>());
        c.margin = j.at("margin").get<double>();
        c.triplet_margin = j.at("triplet_margin").get<double>();
        c.unfamiliarity_eps = j.at("unfamiliarity_eps").get<double>();
        c.regression_error_scale = j.at("regression_error_scale").get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

}  // namespace tdti::model
