#pragma once

#include "allocnas/rng.hpp"
#include "allocnas/tensor.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace allocnas {

enum class DomainKind { SyntheticShapes, IdxFile };

enum class ShapeType { Disk, Square, Triangle, Ring, Cross, Bars };
inline constexpr int kShapeTypes = 6;
std::string to_string(ShapeType shape);

/// Parametric description of one image domain.
///
/// Synthetic images show one textured shape on a noisy background. The
/// generator class g in [0, shapes * bands) renders shape g / bands with
/// texture band g % bands; band b has spatial frequency
/// texture_frequency * (1 + b * band_spacing) cycles per 8 pixels.
/// class_subset maps task label -> generator class (empty = identity).
struct DomainSpec {
    DomainKind kind = DomainKind::SyntheticShapes;
    int image_extent = 16;
    int channels = 1;
    int n_classes = 12;
    std::size_t n_samples = 1000;
    std::uint64_t seed = 1;

    int shapes = 4;
    int bands = 3;
    std::vector<int> class_subset;
    double rotation_min = 0.0; // degrees
    double rotation_max = 0.0;
    double scale_min = 0.5; // shape radius as a fraction of half the extent
    double scale_max = 0.8;
    double texture_frequency = 1.0;
    double band_spacing = 1.0;
    double texture_contrast = 0.5;
    double noise = 0.05;
    /// Maximum center offset as a fraction of half the extent.
    double jitter = 0.15;

    std::string images_path;
    std::string labels_path;

    void validate() const;
};

/// Immutable labeled images [N, C, E, E] with values in [0, 1].
struct Dataset {
    Tensor images;
    std::vector<int> labels;
    int n_classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t channels() const { return images.dim(1); }
    std::size_t extent() const { return images.dim(2); }
};

struct TaskSpec {
    DomainSpec domain;
    int label_space = 0;
    std::shared_ptr<const Dataset> data;
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;

    /// Throws ContractError if splits overlap, indices are out of range or
    /// a label falls outside [0, label_space).
    void validate() const;
};

/// Renders the synthetic domain; a pure function of (spec, rng state).
TaskSpec synth_task(const DomainSpec& spec, Rng& rng);
/// Same, seeded from spec.seed.
TaskSpec synth_task(const DomainSpec& spec);

/// Big-endian IDX pair: images magic 0x00000803, labels magic 0x00000801.
TaskSpec load_idx(const std::string& images_path, const std::string& labels_path);
/// Writes images (scaled to u8) and labels; channels must be 1.
void save_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path);

/// Stratified split of all samples into train/val.
TaskSpec split(const TaskSpec& task, double val_fraction, Rng& rng);

/// Stacks the selected samples into a batch.
Tensor gather_images(const Dataset& data, std::span<const std::size_t> indices);
std::vector<int> gather_labels(const Dataset& data, std::span<const std::size_t> indices);

/// Named source/target domain pairs.
struct DomainPreset {
    std::string name;
    DomainSpec source;
    DomainSpec target;
    double source_val_fraction = 0.1;
    double target_val_fraction = 0.5;
};

/// "default": 20,000 source / 1,000 target images.
/// "stage-biased": large-shape source, fine-texture target whose classes
/// hinge on high-frequency detail (early-stage capacity), desk sized.
/// "shape-biased": the mirror image; the target needs large, rotated
/// shapes recognized (late-stage capacity).
DomainPreset domain_preset(const std::string& name);
std::vector<std::string> domain_preset_names();

} // namespace allocnas
