#pragma once

// DeepONet-style operator surrogate: an encoder reads the input function at
// fixed sensors, a branch net maps the encoding to p coefficients, a trunk
// net maps a query coordinate to p basis values, and the reconstruction is
//
//     F(m)(x) = out_shift + out_scale * (sum_i beta_i(m) t_i(x) + b0).
//
// Both nets are tanh MLPs with linear output layers. The affine input and
// output normalizations are fixed when the offline training set is first
// seen and are never trained.

#include "auki/grf.hpp"
#include "auki/observe.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace auki {

struct NetArch {
    std::size_t branch_in = 0;
    std::vector<std::size_t> branch_hidden;
    std::size_t trunk_in = 2;
    std::vector<std::size_t> trunk_hidden;
    std::size_t p = 40;

    std::vector<std::size_t> branch_dims() const;
    std::vector<std::size_t> trunk_dims() const;
    /// All branch and trunk weights and biases plus the scalar output bias.
    std::size_t weight_count() const;
    void validate() const;
};

/// What the branch net reads. Field encoders sample the parameter field at
/// grid nodes; parameter encoders pass the parameter vector through.
struct Encoder {
    enum class Kind { field_nodes, parameters };
    Kind kind = Kind::field_nodes;
    std::vector<std::size_t> nodes;

    std::size_t width(std::size_t parameter_dim) const;

    /// s x s lattice of grid nodes, evenly spread including the boundary.
    static Encoder lattice(const Grid2D& grid, std::size_t s);
    static Encoder identity();
};

/// Pointwise readout of a field at the encoder nodes.
Vector encode(const Field& m, const Encoder& encoder);

struct Normalization {
    Vector branch_shift, branch_scale;
    Vector trunk_shift, trunk_scale;
    double out_shift = 0.0;
    double out_scale = 1.0;

    static Normalization identity(const NetArch& arch);
};

class Surrogate {
public:
    Surrogate() = default;
    Surrogate(NetArch arch, Encoder encoder, std::uint64_t init_seed);

    const NetArch& arch() const noexcept { return arch_; }
    const Encoder& encoder() const noexcept { return encoder_; }
    const Normalization& normalization() const noexcept { return norm_; }
    void set_normalization(Normalization n);

    const Vector& weights() const noexcept { return weights_; }
    Vector& weights() noexcept { return weights_; }
    double& output_bias() { return weights_[weights_.size() - 1]; }

    std::uint64_t init_seed() const noexcept { return init_seed_; }
    std::size_t iterations() const noexcept { return iterations_; }
    void add_iterations(std::size_t n) noexcept { iterations_ += n; }
    std::vector<double>& loss_history() noexcept { return loss_history_; }
    const std::vector<double>& loss_history() const noexcept { return loss_history_; }

    /// Branch coefficients, p x N, for encoded inputs given as columns.
    Matrix branch(const Matrix& encoded) const;
    /// Trunk basis values, p x Nx, for query coordinates given as columns.
    Matrix trunk(const Matrix& queries) const;
    /// Reconstruction from precomputed branch/trunk outputs: N x Nx.
    Matrix combine(const Matrix& branch_out, const Matrix& trunk_out) const;

    /// N x Nx predictions.
    Matrix evaluate(const Matrix& encoded, const Matrix& queries) const;
    Vector evaluate(const Vector& encoded, const Matrix& queries) const;

private:
    NetArch arch_;
    Encoder encoder_;
    Normalization norm_;
    Vector weights_;
    std::uint64_t init_seed_ = 0;
    std::size_t iterations_ = 0;
    std::vector<double> loss_history_;
};

/// output(x) at each query column for one encoded input.
Vector surrogate_eval(const Surrogate& s, const Vector& encoded, const Matrix& queries);

enum class SampleTag { prior, adaptive };

struct TrainingEntry {
    Vector params;
    Vector encoded;
    Vector target; // solution at the set's query points
    SampleTag tag = SampleTag::prior;
};

/// Pairs of (parameter, full-order solution) sharing one set of query points.
struct TrainingSet {
    Matrix queries; // trunk_in x Nx
    std::vector<TrainingEntry> entries;

    std::size_t size() const noexcept { return entries.size(); }
    bool empty() const noexcept { return entries.empty(); }
    std::size_t count(SampleTag tag) const noexcept;

    Matrix encoded_matrix() const; // branch_in x N
    Matrix target_matrix() const;  // N x Nx
};

/// Branch/trunk/output normalization fitted to a training set.
Normalization fit_normalization(const NetArch& arch, const TrainingSet& data);

/// Mean squared error over entries and query points.
double empirical_loss(const Surrogate& s, const TrainingSet& data);

/// Loss and its gradient with respect to weights() on explicit matrices.
double loss_and_gradient(const Surrogate& s, const Matrix& encoded, const Matrix& queries, const Matrix& targets,
                         Vector* gradient);

struct StepSchedule {
    double learning_rate = 1e-3;
    double decay_rate = 1.0; // multiplicative factor per decay_steps
    std::size_t decay_steps = 1000;

    double at(std::size_t iteration) const;
};

struct TrainOptions {
    std::size_t iterations = 1000;
    StepSchedule schedule{};
    std::size_t batch_size = 0; // 0 = full set
    std::uint64_t seed = 0;
};

struct TrainResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> history;
};

/// Adam on the empirical loss. Returns the best weights seen, so the final
/// training loss never exceeds the initial one.
TrainResult train(Surrogate& s, const TrainingSet& data, const TrainOptions& options);

/// Warm-started training on the (union) set with the online step size.
TrainResult fine_tune(Surrogate& s, const TrainingSet& data, std::size_t iterations, double learning_rate = 5e-4,
                      std::uint64_t seed = 0);

/// Cached surrogate parameter-to-output map for a fixed set of output points.
/// For field encoders the encoding is linear in the KL coefficients, so it is
/// applied as a precomputed matrix.
class SurrogateMap {
public:
    SurrogateMap(const Surrogate& s, const KLBasis* basis, const Matrix& output_queries);

    /// Outputs for parameter vectors given as columns: Ny x N.
    Matrix evaluate(const Matrix& params) const;
    Vector evaluate(const Vector& params) const;

    std::size_t parameter_dim() const noexcept { return static_cast<std::size_t>(encode_.cols()); }

private:
    const Surrogate* surrogate_;
    Matrix encode_; // branch_in x parameter_dim
    Matrix trunk_;  // p x Ny
};

/// Query coordinates: every grid node for each frame; frame time is appended
/// as a third coordinate when trunk_in == 3.
Matrix grid_queries(const Grid2D& grid, const std::vector<double>& frame_times, std::size_t trunk_in);

/// Query coordinates at sensor locations, frame-major.
Matrix sensor_queries(const SensorArray& sensors, const std::vector<double>& frame_times, std::size_t trunk_in);

/// O(F_theta(m)) at the sensors; no full-order evaluations.
Vector surrogate_forward_map(const Surrogate& s, const KLBasis* basis, const Vector& params, const SensorArray& sensors,
                             const std::vector<double>& frame_times = {0.0});

/// Checkpoint = <prefix>.json header (arch, encoder, normalization, seed,
/// iteration count) + <prefix>.bin little-endian float64 weights.
void save_checkpoint(const Surrogate& s, const std::filesystem::path& prefix);
Surrogate load_checkpoint(const std::filesystem::path& prefix);
void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& history);

} // namespace auki
