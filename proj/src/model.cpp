#include "pdl/model.hpp"

#include <cmath>

#include "io.hpp"
#include "pdl/error.hpp"
#include "pdl/rng.hpp"

namespace pdl {

bool ModelParams::all_finite() const {
    return embedding.allFinite() && projection.allFinite() && bias.allFinite();
}

void ModelParams::validate() const {
    const auto v = bias.size();
    if (context_size < 1 || embed_dim < 1) fail(ErrorKind::Data, "model dimensions must be >= 1");
    if (embedding.rows() != v || embedding.cols() != embed_dim ||
        projection.rows() != static_cast<Eigen::Index>(context_size) * embed_dim || projection.cols() != v)
        fail(ErrorKind::Data, "model parameter shapes are inconsistent");
}

bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.context_size == b.context_size && a.embed_dim == b.embed_dim &&
           a.embedding.rows() == b.embedding.rows() && a.embedding.cols() == b.embedding.cols() &&
           a.projection.rows() == b.projection.rows() && a.projection.cols() == b.projection.cols() &&
           a.bias.size() == b.bias.size() && a.embedding == b.embedding &&
           a.projection == b.projection && a.bias == b.bias;
}

ModelParams zero_params(std::size_t vocab_size, int context_size, int embed_dim) {
    if (context_size < 1 || embed_dim < 1) fail(ErrorKind::Config, "context_size and embed_dim must be >= 1");
    const auto v = static_cast<Eigen::Index>(vocab_size);
    ModelParams p;
    p.context_size = context_size;
    p.embed_dim = embed_dim;
    p.embedding = Matrix::Zero(v, embed_dim);
    p.projection = Matrix::Zero(static_cast<Eigen::Index>(context_size) * embed_dim, v);
    p.bias = Vector::Zero(v);
    return p;
}

ModelParams init_params(std::size_t vocab_size, int context_size, int embed_dim, std::uint64_t seed) {
    ModelParams p = zero_params(vocab_size, context_size, embed_dim);
    Rng rng(derive_seed(seed, 2));
    for (Eigen::Index i = 0; i < p.embedding.size(); ++i) p.embedding.data()[i] = rng.uniform(-0.05, 0.05);
    for (Eigen::Index i = 0; i < p.projection.size(); ++i) p.projection.data()[i] = rng.uniform(-0.05, 0.05);
    return p;
}

namespace {

void check_contexts(const ModelParams& params, const Contexts& contexts) {
    if (contexts.cols() != params.context_size)
        fail(ErrorKind::Data, "context width " + std::to_string(contexts.cols()) + " != model context size " +
                                  std::to_string(params.context_size));
    const auto v = static_cast<TokenId>(params.vocab_size());
    for (Eigen::Index i = 0; i < contexts.size(); ++i) {
        const TokenId id = contexts.data()[i];
        if (id < 0 || id >= v)
            fail(ErrorKind::Data, "context id " + std::to_string(id) + " at row " +
                                      std::to_string(i / contexts.cols()) + " outside vocab of size " +
                                      std::to_string(v));
    }
}

Matrix gather(const ModelParams& params, const Contexts& contexts) {
    const int d = params.embed_dim;
    Matrix x(contexts.rows(), static_cast<Eigen::Index>(params.context_size) * d);
    for (Eigen::Index b = 0; b < contexts.rows(); ++b)
        for (int j = 0; j < params.context_size; ++j)
            x.block(b, static_cast<Eigen::Index>(j) * d, 1, d) = params.embedding.row(contexts(b, j));
    return x;
}

}  // namespace

Matrix forward(const ModelParams& params, const Contexts& contexts) {
    check_contexts(params, contexts);
    Matrix logits = gather(params, contexts) * params.projection;
    logits.rowwise() += params.bias.transpose();
    return logits;
}

ModelGrads backward(const ModelParams& params, const Contexts& contexts, const Matrix& dlogits) {
    check_contexts(params, contexts);
    if (dlogits.rows() != contexts.rows() || dlogits.cols() != params.bias.size())
        fail(ErrorKind::Data, "dlogits shape does not match the batch");
    ModelGrads g = zero_params(params.vocab_size(), params.context_size, params.embed_dim);
    const Matrix x = gather(params, contexts);
    g.projection.noalias() = x.transpose() * dlogits;
    g.bias = dlogits.colwise().sum().transpose();
    const Matrix dx = dlogits * params.projection.transpose();
    const int d = params.embed_dim;
    for (Eigen::Index b = 0; b < contexts.rows(); ++b)
        for (int j = 0; j < params.context_size; ++j)
            g.embedding.row(contexts(b, j)) += dx.block(b, static_cast<Eigen::Index>(j) * d, 1, d);
    return g;
}

void sgd_step(ModelParams& params, const ModelGrads& grads, double learning_rate) {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        fail(ErrorKind::Config, "learning rate must be finite and >= 0");
    if (!grads.all_finite()) {
        const auto count = [](const auto& m) { return (!m.array().isFinite()).count(); };
        fail(ErrorKind::Numeric, "non-finite gradient: embedding=" + std::to_string(count(grads.embedding)) +
                                     " projection=" + std::to_string(count(grads.projection)) +
                                     " bias=" + std::to_string(count(grads.bias)) + " bad entries");
    }
    params.embedding -= learning_rate * grads.embedding;
    params.projection -= learning_rate * grads.projection;
    params.bias -= learning_rate * grads.bias;
}

namespace {

void write_rows(std::ostream& out, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ' ';
            out << io::format_double(m(r, c));
        }
        out << '\n';
    }
}

void read_rows(const std::vector<std::string>& lines, std::size_t& next, Matrix& m, const std::string& tag,
               const std::string& source) {
    if (next >= lines.size() || lines[next] != tag) fail_parse(source, next + 1, "expected '" + tag + "'");
    ++next;
    for (Eigen::Index r = 0; r < m.rows(); ++r, ++next) {
        if (next >= lines.size()) fail_parse(source, next + 1, "unexpected end of file in " + tag);
        const auto fields = io::split(lines[next], ' ');
        if (static_cast<Eigen::Index>(fields.size()) != m.cols())
            fail_parse(source, next + 1, "expected " + std::to_string(m.cols()) + " values");
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double x = io::parse_double(fields[static_cast<std::size_t>(c)], source, next + 1);
            if (!std::isfinite(x)) fail_parse(source, next + 1, "non-finite parameter");
            m(r, c) = x;
        }
    }
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path, const HeaderFields& extra) {
    params.validate();
    auto out = io::open_output(path);
    out << "#model v1 vocab_size=" << params.vocab_size() << " n=" << params.context_size
        << " d=" << params.embed_dim;
    for (const auto& [key, value] : extra) out << ' ' << key << '=' << value;
    out << "\n#embedding\n";
    write_rows(out, params.embedding);
    out << "#projection\n";
    write_rows(out, params.projection);
    out << "#bias\n";
    write_rows(out, Matrix(params.bias.transpose()));
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    const std::string source = path.string();
    const auto lines = io::read_lines(path);
    if (lines.empty()) fail_parse(source, 1, "empty file");
    const auto header = io::parse_header(lines[0], "model", source);
    const auto v = io::parse_int(io::require_key(header, "vocab_size", source), source, 1);
    const auto n = io::parse_int(io::require_key(header, "n", source), source, 1);
    const auto d = io::parse_int(io::require_key(header, "d", source), source, 1);
    if (v < 1 || n < 1 || d < 1) fail_parse(source, 1, "model dimensions must be >= 1");

    ModelParams p = zero_params(static_cast<std::size_t>(v), static_cast<int>(n), static_cast<int>(d));
    std::size_t next = 1;
    read_rows(lines, next, p.embedding, "#embedding", source);
    read_rows(lines, next, p.projection, "#projection", source);
    Matrix bias(1, v);
    read_rows(lines, next, bias, "#bias", source);
    p.bias = bias.row(0).transpose();
    if (next != lines.size()) fail_parse(source, next + 1, "trailing content");
    return p;
}

}  // namespace pdl

namespace pdl {

ExampleSet make_examples(const EncodedCorpus& corpus, int context_size) {
    if (context_size < 1) fail(ErrorKind::Config, "context_size must be >= 1");
    corpus.validate();
    std::size_t count = 0;
    for (const auto& seq : corpus.sequences) count += seq.size() - 1;

    ExampleSet set;
    set.contexts.resize(static_cast<Eigen::Index>(count), context_size);
    set.targets.reserve(count);
    set.previous.reserve(count);
    Eigen::Index row = 0;
    for (const auto& seq : corpus.sequences) {
        for (std::size_t k = 1; k < seq.size(); ++k, ++row) {
            for (int j = 0; j < context_size; ++j) {
                const auto offset = static_cast<std::ptrdiff_t>(k) - context_size + j;
                set.contexts(row, j) = offset < 0 ? kBos : seq[static_cast<std::size_t>(offset)];
            }
            set.targets.push_back(seq[k]);
            set.previous.push_back(seq[k - 1]);
        }
    }
    return set;
}

ExampleSet ExampleSet::select(std::span<const std::size_t> indices) const {
    ExampleSet out;
    out.contexts.resize(static_cast<Eigen::Index>(indices.size()), contexts.cols());
    out.targets.reserve(indices.size());
    out.previous.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.contexts.row(static_cast<Eigen::Index>(i)) = contexts.row(static_cast<Eigen::Index>(indices[i]));
        out.targets.push_back(targets[indices[i]]);
        out.previous.push_back(previous[indices[i]]);
    }
    return out;
}

ExampleSet ExampleSet::slice(std::size_t begin, std::size_t end) const {
    ExampleSet out;
    out.contexts = contexts.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    out.targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(begin),
                       targets.begin() + static_cast<std::ptrdiff_t>(end));
    out.previous.assign(previous.begin() + static_cast<std::ptrdiff_t>(begin),
                        previous.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

}  // namespace pdl
