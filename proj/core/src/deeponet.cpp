#include "auki/deeponet.hpp"

#include "auki/field_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace auki {
namespace {

using ConstMatMap = Eigen::Map<const Matrix>;
using MatMap = Eigen::Map<Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;
using VecMap = Eigen::Map<Vector>;

std::size_t mlp_weight_count(const std::vector<std::size_t>& dims) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l + 1] * dims[l] + dims[l + 1];
    return n;
}

/// In-place tanh through the vectorized exponential.
void tanh_inplace(Matrix& z) { z.array() = 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0); }

/// Forward pass of a tanh MLP with a linear last layer into acts, where
/// acts[0] already holds the input and acts[l] receives the output of layer l.
/// Buffers keep their storage between calls of the same shape.
void mlp_forward(const double* w, const std::vector<std::size_t>& dims, std::vector<Matrix>& acts) {
    const std::size_t layers = dims.size() - 1;
    acts.resize(layers + 1);
    const Eigen::Index cols = acts[0].cols();
    for (std::size_t l = 0; l < layers; ++l) {
        const auto out = static_cast<Eigen::Index>(dims[l + 1]), in = static_cast<Eigen::Index>(dims[l]);
        ConstMatMap W(w, out, in);
        w += out * in;
        ConstVecMap b(w, out);
        w += out;
        Matrix& z = acts[l + 1];
        z.resize(out, cols);
        z.noalias() = W * acts[l];
        z.colwise() += b;
        if (l + 1 < layers) tanh_inplace(z);
    }
}

Matrix mlp_output(const double* w, const std::vector<std::size_t>& dims, Matrix x) {
    std::vector<Matrix> acts(1);
    acts[0] = std::move(x);
    mlp_forward(w, dims, acts);
    return std::move(acts.back());
}

/// Accumulates d(loss)/d(weights) into g. delta holds d(loss)/d(output) on
/// entry and is used as scratch together with spare.
void mlp_backward(const double* w, double* g, const std::vector<std::size_t>& dims, const std::vector<Matrix>& acts,
                  Matrix& delta, Matrix& spare) {
    const std::size_t layers = dims.size() - 1;
    std::vector<std::size_t> offsets(layers);
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        offsets[l] = off;
        off += dims[l + 1] * dims[l] + dims[l + 1];
    }
    for (std::size_t l = layers; l-- > 0;) {
        const auto out = static_cast<Eigen::Index>(dims[l + 1]), in = static_cast<Eigen::Index>(dims[l]);
        if (l + 1 < layers) delta.array() *= 1.0 - acts[l + 1].array().square();
        MatMap gW(g + offsets[l], out, in);
        VecMap gb(g + offsets[l] + out * in, out);
        gW.noalias() += delta * acts[l].transpose();
        gb += delta.rowwise().sum();
        if (l > 0) {
            ConstMatMap W(w + offsets[l], out, in);
            spare.resize(in, delta.cols());
            spare.noalias() = W.transpose() * delta;
            std::swap(delta, spare);
        }
    }
}

Matrix normalize_columns(const Matrix& x, const Vector& shift, const Vector& scale) {
    return ((x.colwise() - shift).array().colwise() / scale.array()).matrix();
}

std::vector<std::size_t> dims_of(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    std::vector<std::size_t> d{in};
    d.insert(d.end(), hidden.begin(), hidden.end());
    d.push_back(out);
    return d;
}

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return ConstVecMap(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

std::vector<std::size_t> NetArch::branch_dims() const { return dims_of(branch_in, branch_hidden, p); }
std::vector<std::size_t> NetArch::trunk_dims() const { return dims_of(trunk_in, trunk_hidden, p); }

std::size_t NetArch::weight_count() const {
    return mlp_weight_count(branch_dims()) + mlp_weight_count(trunk_dims()) + 1;
}

void NetArch::validate() const {
    if (branch_in == 0 || trunk_in == 0 || p == 0) throw Error("NetArch: zero-width input or latent layer");
    for (auto w : branch_hidden)
        if (w == 0) throw Error("NetArch: zero-width branch layer");
    for (auto w : trunk_hidden)
        if (w == 0) throw Error("NetArch: zero-width trunk layer");
}

std::size_t Encoder::width(std::size_t parameter_dim) const {
    return kind == Kind::parameters ? parameter_dim : nodes.size();
}

Encoder Encoder::lattice(const Grid2D& grid, std::size_t s) {
    if (s < 2 || s > grid.nx || s > grid.ny) throw Error("Encoder::lattice: lattice size must be in [2, grid size]");
    Encoder e;
    e.kind = Kind::field_nodes;
    auto pick = [s](std::size_t n, std::size_t k) {
        return static_cast<std::size_t>(std::lround(static_cast<double>(k) * static_cast<double>(n - 1) /
                                                    static_cast<double>(s - 1)));
    };
    for (std::size_t b = 0; b < s; ++b)
        for (std::size_t a = 0; a < s; ++a) e.nodes.push_back(grid.index(pick(grid.nx, a), pick(grid.ny, b)));
    return e;
}

Encoder Encoder::identity() {
    Encoder e;
    e.kind = Kind::parameters;
    return e;
}

Vector encode(const Field& m, const Encoder& encoder) {
    if (encoder.kind != Encoder::Kind::field_nodes) throw Error("encode: encoder does not read fields");
    Vector out(static_cast<Eigen::Index>(encoder.nodes.size()));
    for (std::size_t k = 0; k < encoder.nodes.size(); ++k) {
        if (encoder.nodes[k] >= m.grid.size()) throw Error("encode: sensor node outside the grid");
        out[static_cast<Eigen::Index>(k)] = m.values[static_cast<Eigen::Index>(encoder.nodes[k])];
    }
    return out;
}

Normalization Normalization::identity(const NetArch& arch) {
    Normalization n;
    const auto bi = static_cast<Eigen::Index>(arch.branch_in), ti = static_cast<Eigen::Index>(arch.trunk_in);
    n.branch_shift = Vector::Zero(bi);
    n.branch_scale = Vector::Ones(bi);
    n.trunk_shift = Vector::Zero(ti);
    n.trunk_scale = Vector::Ones(ti);
    return n;
}

Surrogate::Surrogate(NetArch arch, Encoder encoder, std::uint64_t init_seed)
    : arch_(std::move(arch)), encoder_(std::move(encoder)), init_seed_(init_seed) {
    arch_.validate();
    norm_ = Normalization::identity(arch_);
    weights_ = Vector::Zero(static_cast<Eigen::Index>(arch_.weight_count()));
    // Glorot-normal weights, zero biases.
    Rng rng(init_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double* w = weights_.data();
    for (const auto& dims : {arch_.branch_dims(), arch_.trunk_dims()}) {
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const double sd = std::sqrt(2.0 / static_cast<double>(dims[l] + dims[l + 1]));
            for (std::size_t k = 0; k < dims[l] * dims[l + 1]; ++k) *w++ = sd * normal(rng);
            w += dims[l + 1];
        }
    }
}

void Surrogate::set_normalization(Normalization n) {
    if (static_cast<std::size_t>(n.branch_shift.size()) != arch_.branch_in ||
        static_cast<std::size_t>(n.branch_scale.size()) != arch_.branch_in ||
        static_cast<std::size_t>(n.trunk_shift.size()) != arch_.trunk_in ||
        static_cast<std::size_t>(n.trunk_scale.size()) != arch_.trunk_in)
        throw Error("Surrogate: normalization width mismatch");
    if ((n.branch_scale.array() <= 0).any() || (n.trunk_scale.array() <= 0).any() || !(n.out_scale > 0))
        throw Error("Surrogate: normalization scales must be positive");
    norm_ = std::move(n);
}

Matrix Surrogate::branch(const Matrix& encoded) const {
    if (static_cast<std::size_t>(encoded.rows()) != arch_.branch_in)
        throw Error("Surrogate: encoded input has width " + std::to_string(encoded.rows()) + ", branch expects " +
                    std::to_string(arch_.branch_in));
    return mlp_output(weights_.data(), arch_.branch_dims(),
                      normalize_columns(encoded, norm_.branch_shift, norm_.branch_scale));
}

Matrix Surrogate::trunk(const Matrix& queries) const {
    if (static_cast<std::size_t>(queries.rows()) != arch_.trunk_in) throw Error("Surrogate: query width mismatch");
    const std::size_t off = mlp_weight_count(arch_.branch_dims());
    return mlp_output(weights_.data() + off, arch_.trunk_dims(),
                      normalize_columns(queries, norm_.trunk_shift, norm_.trunk_scale));
}

Matrix Surrogate::combine(const Matrix& branch_out, const Matrix& trunk_out) const {
    const double b0 = weights_[weights_.size() - 1];
    Matrix o = branch_out.transpose() * trunk_out;
    o.array() += b0;
    return ((o.array() * norm_.out_scale) + norm_.out_shift).matrix();
}

Matrix Surrogate::evaluate(const Matrix& encoded, const Matrix& queries) const {
    return combine(branch(encoded), trunk(queries));
}

Vector Surrogate::evaluate(const Vector& encoded, const Matrix& queries) const {
    return evaluate(Matrix(encoded), queries).row(0).transpose();
}

Vector surrogate_eval(const Surrogate& s, const Vector& encoded, const Matrix& queries) {
    return s.evaluate(encoded, queries);
}

std::size_t TrainingSet::count(SampleTag tag) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [tag](const TrainingEntry& e) { return e.tag == tag; }));
}

Matrix TrainingSet::encoded_matrix() const {
    if (entries.empty()) return {};
    Matrix m(entries.front().encoded.size(), static_cast<Eigen::Index>(entries.size()));
    for (std::size_t k = 0; k < entries.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = entries[k].encoded;
    return m;
}

Matrix TrainingSet::target_matrix() const {
    if (entries.empty()) return {};
    Matrix m(static_cast<Eigen::Index>(entries.size()), entries.front().target.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        if (entries[k].target.size() != queries.cols()) throw Error("TrainingSet: target length != query count");
        m.row(static_cast<Eigen::Index>(k)) = entries[k].target.transpose();
    }
    return m;
}

Normalization fit_normalization(const NetArch& arch, const TrainingSet& data) {
    if (data.empty()) throw Error("fit_normalization: empty training set");
    Normalization n = Normalization::identity(arch);
    const Matrix enc = data.encoded_matrix();
    n.branch_shift = enc.rowwise().mean();
    for (Eigen::Index r = 0; r < enc.rows(); ++r) {
        const double sd = std::sqrt((enc.row(r).array() - n.branch_shift[r]).square().mean());
        n.branch_scale[r] = sd > 1e-12 ? sd : 1.0;
    }
    for (Eigen::Index r = 0; r < data.queries.rows(); ++r) {
        const double lo = data.queries.row(r).minCoeff(), hi = data.queries.row(r).maxCoeff();
        n.trunk_shift[r] = 0.5 * (lo + hi);
        n.trunk_scale[r] = hi > lo ? 0.5 * (hi - lo) : 1.0;
    }
    const Matrix tgt = data.target_matrix();
    n.out_shift = tgt.mean();
    const double sd = std::sqrt((tgt.array() - n.out_shift).square().mean());
    n.out_scale = sd > 1e-12 ? sd : 1.0;
    return n;
}

namespace {

/// Buffers reused across training iterations.
struct LossWorkspace {
    std::vector<Matrix> bacts{1}, tacts{1};
    Matrix resid, delta, spare;
    bool queries_ready = false;
};

/// Loss (and gradient) with the normalized branch input already in ws.bacts[0]
/// and the normalized queries in ws.tacts[0].
double loss_grad_ws(const Surrogate& s, const Matrix& targets, LossWorkspace& ws, Vector* gradient) {
    const NetArch& arch = s.arch();
    const Normalization& nrm = s.normalization();
    const auto bdims = arch.branch_dims(), tdims = arch.trunk_dims();
    const std::size_t toff = mlp_weight_count(bdims);
    const double* w = s.weights().data();
    const double b0 = w[s.weights().size() - 1];

    mlp_forward(w, bdims, ws.bacts);
    mlp_forward(w + toff, tdims, ws.tacts);
    const Matrix& beta = ws.bacts.back();
    const Matrix& basis = ws.tacts.back();
    ws.resid.resize(beta.cols(), basis.cols());
    ws.resid.noalias() = beta.transpose() * basis;
    ws.resid.array() = (ws.resid.array() + b0) * nrm.out_scale + nrm.out_shift - targets.array();
    const double count = static_cast<double>(targets.size());
    const double loss = ws.resid.squaredNorm() / count;
    if (!gradient) return loss;

    gradient->setZero(s.weights().size());
    ws.resid *= 2.0 * nrm.out_scale / count; // d(loss)/d(inner product), N x Nx
    (*gradient)[gradient->size() - 1] = ws.resid.sum();
    ws.delta.resize(basis.rows(), ws.resid.rows());
    ws.delta.noalias() = basis * ws.resid.transpose();
    mlp_backward(w, gradient->data(), bdims, ws.bacts, ws.delta, ws.spare);
    ws.delta.resize(beta.rows(), ws.resid.cols());
    ws.delta.noalias() = beta * ws.resid;
    mlp_backward(w + toff, gradient->data() + toff, tdims, ws.tacts, ws.delta, ws.spare);
    return loss;
}

void set_inputs(const Surrogate& s, const Matrix& encoded, const Matrix& queries, LossWorkspace& ws) {
    const Normalization& nrm = s.normalization();
    ws.bacts.resize(1);
    ws.bacts[0] = normalize_columns(encoded, nrm.branch_shift, nrm.branch_scale);
    if (!ws.queries_ready) {
        ws.tacts.resize(1);
        ws.tacts[0] = normalize_columns(queries, nrm.trunk_shift, nrm.trunk_scale);
        ws.queries_ready = true;
    }
}

} // namespace

double loss_and_gradient(const Surrogate& s, const Matrix& encoded, const Matrix& queries, const Matrix& targets,
                         Vector* gradient) {
    if (encoded.cols() != targets.rows() || queries.cols() != targets.cols())
        throw Error("loss_and_gradient: shape mismatch");
    if (static_cast<std::size_t>(encoded.rows()) != s.arch().branch_in ||
        static_cast<std::size_t>(queries.rows()) != s.arch().trunk_in)
        throw Error("loss_and_gradient: input width mismatch");
    LossWorkspace ws;
    set_inputs(s, encoded, queries, ws);
    return loss_grad_ws(s, targets, ws, gradient);
}

double empirical_loss(const Surrogate& s, const TrainingSet& data) {
    if (data.empty()) throw Error("empirical_loss: empty training set");
    return loss_and_gradient(s, data.encoded_matrix(), data.queries, data.target_matrix(), nullptr);
}

double StepSchedule::at(std::size_t iteration) const {
    if (decay_rate == 1.0 || decay_steps == 0) return learning_rate;
    return learning_rate * std::pow(decay_rate, static_cast<double>(iteration) / static_cast<double>(decay_steps));
}

TrainResult train(Surrogate& s, const TrainingSet& data, const TrainOptions& options) {
    if (data.empty()) throw Error("train: empty training set");
    const Matrix enc = data.encoded_matrix();
    const Matrix tgt = data.target_matrix();
    const auto n = static_cast<std::size_t>(enc.cols());
    const bool full = options.batch_size == 0 || options.batch_size >= n;

    TrainResult result;
    result.initial_loss = loss_and_gradient(s, enc, data.queries, tgt, nullptr);
    if (!std::isfinite(result.initial_loss)) throw Error("train: non-finite initial loss");
    result.final_loss = result.initial_loss;
    if (options.iterations == 0) return result;

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const Eigen::Index nw = s.weights().size();
    Vector m1 = Vector::Zero(nw), m2 = Vector::Zero(nw), grad(nw);
    Vector best = s.weights();
    double best_loss = result.initial_loss;

    Rng rng(options.seed);
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::size_t cursor = n;
    Matrix benc, btgt;
    LossWorkspace ws;
    if (full) set_inputs(s, enc, data.queries, ws);

    result.history.reserve(options.iterations);
    for (std::size_t it = 0; it < options.iterations; ++it) {
        double loss;
        if (full) {
            loss = loss_grad_ws(s, tgt, ws, &grad);
            if (loss < best_loss) {
                best_loss = loss;
                best = s.weights();
            }
        } else {
            const std::size_t bs = options.batch_size;
            if (cursor + bs > n) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            benc.resize(enc.rows(), static_cast<Eigen::Index>(bs));
            btgt.resize(static_cast<Eigen::Index>(bs), tgt.cols());
            for (std::size_t k = 0; k < bs; ++k) {
                benc.col(static_cast<Eigen::Index>(k)) = enc.col(order[cursor + k]);
                btgt.row(static_cast<Eigen::Index>(k)) = tgt.row(order[cursor + k]);
            }
            cursor += bs;
            set_inputs(s, benc, data.queries, ws);
            loss = loss_grad_ws(s, btgt, ws, &grad);
        }
        if (!std::isfinite(loss) || !grad.allFinite())
            throw Error("train: non-finite loss at iteration " + std::to_string(it));
        result.history.push_back(loss);

        const double lr = options.schedule.at(it);
        const double t = static_cast<double>(it + 1);
        m1 = beta1 * m1 + (1 - beta1) * grad;
        m2 = beta2 * m2 + (1 - beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 / (1.0 - std::pow(beta1, t)), c2 = 1.0 / (1.0 - std::pow(beta2, t));
        s.weights().array() -= lr * (m1.array() * c1) / ((m2.array() * c2).sqrt() + eps);
    }

    result.final_loss = loss_and_gradient(s, enc, data.queries, tgt, nullptr);
    // Mini-batch runs only track the starting point as a fallback.
    if (result.final_loss > best_loss) {
        s.weights() = best;
        result.final_loss = best_loss;
    }
    s.add_iterations(options.iterations);
    s.loss_history().insert(s.loss_history().end(), result.history.begin(), result.history.end());
    return result;
}

TrainResult fine_tune(Surrogate& s, const TrainingSet& data, std::size_t iterations, double learning_rate,
                      std::uint64_t seed) {
    TrainOptions opt;
    opt.iterations = iterations;
    opt.schedule.learning_rate = learning_rate;
    opt.seed = seed;
    return train(s, data, opt);
}

SurrogateMap::SurrogateMap(const Surrogate& s, const KLBasis* basis, const Matrix& output_queries)
    : surrogate_(&s) {
    if (s.encoder().kind == Encoder::Kind::parameters) {
        encode_ = Matrix::Identity(static_cast<Eigen::Index>(s.arch().branch_in),
                                   static_cast<Eigen::Index>(s.arch().branch_in));
    } else {
        if (!basis) throw Error("SurrogateMap: field encoder needs a KL basis");
        const auto& nodes = s.encoder().nodes;
        encode_.resize(static_cast<Eigen::Index>(nodes.size()), basis->synthesis().cols());
        for (std::size_t k = 0; k < nodes.size(); ++k)
            encode_.row(static_cast<Eigen::Index>(k)) = basis->synthesis().row(static_cast<Eigen::Index>(nodes[k]));
    }
    trunk_ = s.trunk(output_queries);
}

Matrix SurrogateMap::evaluate(const Matrix& params) const {
    if (params.rows() != encode_.cols()) throw Error("SurrogateMap: parameter dimension mismatch");
    return surrogate_->combine(surrogate_->branch(encode_ * params), trunk_).transpose();
}

Vector SurrogateMap::evaluate(const Vector& params) const { return evaluate(Matrix(params)).col(0); }

Matrix grid_queries(const Grid2D& grid, const std::vector<double>& frame_times, std::size_t trunk_in) {
    if (trunk_in != 2 && trunk_in != 3) throw Error("grid_queries: trunk input must be 2 or 3");
    if (trunk_in == 2 && frame_times.size() != 1) throw Error("grid_queries: multiple frames need a time coordinate");
    const auto n = static_cast<Eigen::Index>(grid.size());
    Matrix q(static_cast<Eigen::Index>(trunk_in), n * static_cast<Eigen::Index>(frame_times.size()));
    for (std::size_t f = 0; f < frame_times.size(); ++f)
        for (std::size_t j = 0; j < grid.ny; ++j)
            for (std::size_t i = 0; i < grid.nx; ++i) {
                const auto c = static_cast<Eigen::Index>(f) * n + static_cast<Eigen::Index>(grid.index(i, j));
                q(0, c) = grid.x(i);
                q(1, c) = grid.y(j);
                if (trunk_in == 3) q(2, c) = frame_times[f];
            }
    return q;
}

Matrix sensor_queries(const SensorArray& sensors, const std::vector<double>& frame_times, std::size_t trunk_in) {
    if (trunk_in != 2 && trunk_in != 3) throw Error("sensor_queries: trunk input must be 2 or 3");
    if (trunk_in == 2 && frame_times.size() != 1) throw Error("sensor_queries: multiple frames need a time coordinate");
    const auto ns = static_cast<Eigen::Index>(sensors.size());
    Matrix q(static_cast<Eigen::Index>(trunk_in), ns * static_cast<Eigen::Index>(frame_times.size()));
    for (std::size_t f = 0; f < frame_times.size(); ++f)
        for (Eigen::Index k = 0; k < ns; ++k) {
            const auto c = static_cast<Eigen::Index>(f) * ns + k;
            q(0, c) = sensors.locations[static_cast<std::size_t>(k)][0];
            q(1, c) = sensors.locations[static_cast<std::size_t>(k)][1];
            if (trunk_in == 3) q(2, c) = frame_times[f];
        }
    return q;
}

Vector surrogate_forward_map(const Surrogate& s, const KLBasis* basis, const Vector& params, const SensorArray& sensors,
                             const std::vector<double>& frame_times) {
    Vector enc;
    if (s.encoder().kind == Encoder::Kind::parameters) {
        enc = params;
    } else {
        if (!basis) throw Error("surrogate_forward_map: field encoder needs a KL basis");
        enc = encode(sample_field(*basis, params), s.encoder());
    }
    return s.evaluate(enc, sensor_queries(sensors, frame_times, s.arch().trunk_in));
}

void save_checkpoint(const Surrogate& s, const std::filesystem::path& prefix) {
    nlohmann::json j;
    const auto& a = s.arch();
    j["format"] = "auki-deeponet-1";
    j["arch"] = {{"branch_in", a.branch_in},
                 {"branch_hidden", a.branch_hidden},
                 {"trunk_in", a.trunk_in},
                 {"trunk_hidden", a.trunk_hidden},
                 {"p", a.p}};
    j["encoder"] = {{"kind", s.encoder().kind == Encoder::Kind::parameters ? "parameters" : "field_nodes"},
                    {"nodes", s.encoder().nodes}};
    const auto& n = s.normalization();
    j["normalization"] = {{"branch_shift", vec_json(n.branch_shift)}, {"branch_scale", vec_json(n.branch_scale)},
                          {"trunk_shift", vec_json(n.trunk_shift)},   {"trunk_scale", vec_json(n.trunk_scale)},
                          {"out_shift", n.out_shift},                 {"out_scale", n.out_scale}};
    j["seed"] = s.init_seed();
    j["iterations"] = s.iterations();
    j["weight_count"] = s.weights().size();

    auto json_path = prefix;
    json_path += ".json";
    auto bin_path = prefix;
    bin_path += ".bin";
    std::ofstream js(json_path);
    if (!js) throw Error("cannot open " + json_path.string());
    js << j.dump(2) << '\n';
    std::ofstream bs(bin_path, std::ios::binary);
    if (!bs) throw Error("cannot open " + bin_path.string());
    write_f64_le(bs, s.weights().data(), static_cast<std::size_t>(s.weights().size()));
    if (!bs) throw Error("write failed: " + bin_path.string());
}

Surrogate load_checkpoint(const std::filesystem::path& prefix) {
    auto json_path = prefix;
    json_path += ".json";
    auto bin_path = prefix;
    bin_path += ".bin";
    std::ifstream js(json_path);
    if (!js) throw Error("cannot open " + json_path.string());
    const auto j = nlohmann::json::parse(js);
    if (j.value("format", "") != "auki-deeponet-1") throw Error("unknown checkpoint format in " + json_path.string());
    NetArch a;
    a.branch_in = j["arch"]["branch_in"];
    a.branch_hidden = j["arch"]["branch_hidden"].get<std::vector<std::size_t>>();
    a.trunk_in = j["arch"]["trunk_in"];
    a.trunk_hidden = j["arch"]["trunk_hidden"].get<std::vector<std::size_t>>();
    a.p = j["arch"]["p"];
    Encoder e;
    e.kind = j["encoder"]["kind"] == "parameters" ? Encoder::Kind::parameters : Encoder::Kind::field_nodes;
    e.nodes = j["encoder"]["nodes"].get<std::vector<std::size_t>>();

    Surrogate s(a, e, j["seed"].get<std::uint64_t>());
    Normalization n;
    const auto& jn = j["normalization"];
    n.branch_shift = json_vec(jn["branch_shift"]);
    n.branch_scale = json_vec(jn["branch_scale"]);
    n.trunk_shift = json_vec(jn["trunk_shift"]);
    n.trunk_scale = json_vec(jn["trunk_scale"]);
    n.out_shift = jn["out_shift"];
    n.out_scale = jn["out_scale"];
    s.set_normalization(std::move(n));
    if (j["weight_count"].get<Eigen::Index>() != s.weights().size())
        throw Error("checkpoint weight count does not match architecture");
    std::ifstream bs(bin_path, std::ios::binary);
    if (!bs) throw Error("cannot open " + bin_path.string());
    read_f64_le(bs, s.weights().data(), static_cast<std::size_t>(s.weights().size()));
    s.add_iterations(j["iterations"].get<std::size_t>());
    return s;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& history) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string());
    os << "iteration,loss\n" << std::setprecision(17);
    for (std::size_t k = 0; k < history.size(); ++k) os << k << ',' << history[k] << '\n';
}

} // namespace auki
