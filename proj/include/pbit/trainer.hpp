#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbit/data.hpp"
#include "pbit/graph.hpp"
#include "pbit/model.hpp"
#include "pbit/sampler.hpp"

namespace pbit {

enum class CdMode { cd, pcd };

CdMode parse_cd_mode(const std::string& text);
std::string to_string(CdMode mode);

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 10;
    /// 0 uses every full batch of the training set.
    std::size_t n_batches = 0;
    std::size_t sweeps_per_image = 1000;
    /// 0 means sweeps_per_image * batch_size.
    std::size_t negative_sweeps = 0;
    double learning_rate = 0.003;
    double momentum = 0.6;
    double weight_decay = 0.0;
    CdMode cd_mode = CdMode::cd;
    Engine engine = Engine::chromatic;
    unsigned workers = 1;
    double beta = 1.0;
    std::uint64_t master_seed = 1;
    PrecisionSpec precision;
    double init_sigma = 0.01;
    double clip_delta = 1e-4;
    /// Accuracy is measured every eval_every epochs and after the last one.
    std::size_t eval_every = 1;
    std::size_t eval_sweeps = 1000;
    /// Leading images of each split used for monitoring; 0 skips the split.
    std::size_t eval_train_images = 100;
    std::size_t eval_test_images = 0;

    [[nodiscard]] std::size_t effective_negative_sweeps() const {
        return negative_sweeps ? negative_sweeps : sweeps_per_image * batch_size;
    }
    /// Throws ConfigError on non-positive counts, ε <= 0, α outside [0,1), λ < 0 or β < 0.
    void validate() const;
};

/// Sets one field from its key; throws ConfigError on an unknown key or a bad value.
void set_train_key(TrainConfig& config, const std::string& key, const std::string& value);
/// Every field as key=value text, in a fixed order.
std::vector<std::pair<std::string, std::string>> train_config_entries(const TrainConfig& config);
const std::vector<std::string>& train_config_keys();

/// Flat "key = value" file; '#' starts a comment. Throws ParseError on
/// malformed or repeated keys.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);
std::map<std::string, std::string> parse_key_values(std::string_view text);

struct DatasetStats {
    /// On-proportion per visible unit, in visible_ids order.
    std::vector<double> pixel_on;
    /// Frequency of each class, applied to its label units.
    std::vector<double> class_freq;
};
DatasetStats dataset_stats(const Dataset& binarized_train);

/// J ~ N(0, sigma^2) per edge, hidden biases 0, visible and label biases
/// log(p / (1 - p)) with p clipped to [delta, 1 - delta].
Model init_model(std::shared_ptr<const SparseGraph> graph, const RoleAssignment& roles, const DatasetStats& stats,
                 std::uint64_t seed, double sigma = 0.01, double delta = 1e-4);

/// Per-edge <m_u m_v> and per-node <m_i> averaged over recorded sweeps.
struct PhaseStats {
    std::vector<double> corr;
    std::vector<double> mean;
    std::uint64_t samples = 0;
};

/// Integer running sums of m_u m_v and m_i over sweeps.
class CorrelationAccumulator {
public:
    explicit CorrelationAccumulator(const SparseGraph& graph);
    void add(std::span<const std::int8_t> state);
    void reset();
    [[nodiscard]] PhaseStats stats() const;
    [[nodiscard]] std::uint64_t samples() const noexcept { return samples_; }

private:
    std::vector<NodeId> eu_;
    std::vector<NodeId> ev_;
    std::vector<std::int64_t> pair_;
    std::vector<std::int64_t> single_;
    std::uint64_t samples_ = 0;
};

struct TrainingExample {
    std::vector<std::uint8_t> bits;
    std::size_t label = 0;
};

/// For each example: clamp visible and all label replicas, randomize the rest,
/// run sweeps_per_image sweeps and accumulate every sweep. Normalized by N x B.
/// Throws DimensionError or std::invalid_argument on malformed examples.
PhaseStats positive_phase(Sampler& sampler, const RoleAssignment& roles, std::span<const TrainingExample> batch,
                          const TrainConfig& config, std::uint64_t seed);

/// Free-running chain of effective_negative_sweeps() sweeps. CD starts from a
/// fresh uniform random state seeded by `seed`; PCD continues `persistent`
/// (which must be given).
PhaseStats negative_phase(Sampler& sampler, const TrainConfig& config, std::uint64_t seed,
                          ChainState* persistent = nullptr);

/// Momentum memory for the update rule.
struct MomentumState {
    std::vector<double> delta_j;
    std::vector<double> delta_h;
};

/// dJ = ε(<mm>_data - <mm>_model) - ελJ + α dJ_prev, dh likewise without decay.
/// Updates `model` (float64 master weights) in place and returns mean |dJ|.
double apply_update(Model& model, const PhaseStats& data, const PhaseStats& model_stats, const TrainConfig& config,
                    MomentumState& momentum);

struct EpochMetrics {
    std::size_t epoch = 0;
    std::optional<double> train_acc;
    std::optional<double> test_acc;
    double mean_abs_dj = 0.0;
    double wallclock_s = 0.0;
};

struct TrainCallbacks {
    std::function<void(const EpochMetrics&, const Model&)> on_epoch;
};

struct TrainResult {
    Model model;
    std::vector<EpochMetrics> log;
    std::size_t weight_updates = 0;
};

/// Binary images and labels from a binarized dataset.
std::vector<TrainingExample> make_examples(const Dataset& ds);

/// Nested epoch / batch loop: positive phase, negative phase, update. Batches
/// come from a seeded shuffle per epoch. With a non-empty checkpoint_dir the
/// model is saved as epoch_<k>.pbm plus final.pbm, and the metrics log as
/// metrics.tsv.
TrainResult train(const Model& initial, const RoleAssignment& roles, const std::vector<TrainingExample>& train_set,
                  const std::vector<TrainingExample>& test_set, const TrainConfig& config,
                  const std::filesystem::path& checkpoint_dir = {}, const TrainCallbacks& callbacks = {});

void write_metrics(const std::filesystem::path& path, const std::vector<EpochMetrics>& log);

/// Fully visible model, exact expectations over all 2^n states.
/// data_distribution[s] is the probability of state s (bit i set = node i on).
/// Returns beta * (<mm>_data - <mm>_model) per edge and beta * (<m>_data - <m>_model)
/// per node, i.e. the negative gradient of KL(data || model).
struct KlGradient {
    std::vector<double> d_j;
    std::vector<double> d_h;
};
KlGradient exact_kl_gradient(const Model& model, std::span<const double> data_distribution, double beta = 1.0);
double kl_divergence(const Model& model, std::span<const double> data_distribution, double beta = 1.0);

}  // namespace pbit
