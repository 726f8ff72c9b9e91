#include "allocnas/data.hpp"

#include "allocnas/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

namespace allocnas {

std::string to_string(ShapeType shape)
{
    switch (shape) {
    case ShapeType::Disk: return "disk";
    case ShapeType::Square: return "square";
    case ShapeType::Triangle: return "triangle";
    case ShapeType::Ring: return "ring";
    case ShapeType::Cross: return "cross";
    case ShapeType::Bars: return "bars";
    }
    return "?";
}

void DomainSpec::validate() const
{
    if (image_extent < 1 || channels < 1 || n_samples < 1)
        throw ContractError("domain: extent, channels and sample count must be >= 1");
    if (kind == DomainKind::IdxFile) {
        if (images_path.empty() || labels_path.empty())
            throw ContractError("domain: idx-file domains need images and labels paths");
        return;
    }
    if (shapes < 1 || shapes > kShapeTypes || bands < 1)
        throw ContractError("domain: shapes must be in [1," + std::to_string(kShapeTypes) + "] and bands >= 1");
    const int generator_classes = shapes * bands;
    if (class_subset.empty()) {
        if (n_classes != generator_classes)
            throw ContractError("domain: n_classes " + std::to_string(n_classes) + " != shapes*bands " +
                                std::to_string(generator_classes));
    } else {
        if (static_cast<int>(class_subset.size()) != n_classes)
            throw ContractError("domain: class_subset has " + std::to_string(class_subset.size()) + " entries for " +
                                std::to_string(n_classes) + " classes");
        auto sorted = class_subset;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ContractError("domain: class_subset repeats a generator class");
        if (sorted.front() < 0 || sorted.back() >= generator_classes)
            throw ContractError("domain: class_subset entry outside [0, shapes*bands)");
    }
    if (n_classes < 2)
        throw ContractError("domain: need at least two classes");
    if (!(rotation_min <= rotation_max))
        throw ContractError("domain: rotation range is inverted");
    if (!(scale_min > 0.0 && scale_min <= scale_max))
        throw ContractError("domain: scale range must satisfy 0 < min <= max");
    if (!(texture_frequency > 0.0) || !(band_spacing >= 0.0))
        throw ContractError("domain: texture frequency must be positive and band spacing non-negative");
    if (!(texture_contrast >= 0.0 && texture_contrast <= 0.5))
        throw ContractError("domain: texture contrast must lie in [0, 0.5]");
    if (!(noise >= 0.0) || !(jitter >= 0.0 && jitter < 1.0))
        throw ContractError("domain: noise must be >= 0 and jitter in [0, 1)");
}

void TaskSpec::validate() const
{
    if (!data)
        throw ContractError("task has no data");
    std::vector<char> seen(data->size(), 0);
    for (const auto* part : {&train, &val})
        for (auto i : *part) {
            if (i >= data->size())
                throw ContractError("task split index " + std::to_string(i) + " out of range");
            if (seen[i]++)
                throw ContractError("task splits overlap at index " + std::to_string(i));
        }
    for (int y : data->labels)
        if (y < 0 || y >= label_space)
            throw ContractError("label " + std::to_string(y) + " outside [0, " + std::to_string(label_space) + ")");
}

namespace {

bool inside(ShapeType shape, double u, double v)
{
    const double au = std::abs(u), av = std::abs(v);
    switch (shape) {
    case ShapeType::Disk: return u * u + v * v <= 1.0;
    case ShapeType::Square: return au <= 0.8 && av <= 0.8;
    case ShapeType::Triangle: return v >= -0.5 && v <= 1.0 - std::numbers::sqrt3 * au;
    case ShapeType::Ring: {
        const double r2 = u * u + v * v;
        return r2 <= 1.0 && r2 >= 0.55 * 0.55;
    }
    case ShapeType::Cross: return (au <= 0.3 && av <= 1.0) || (av <= 0.3 && au <= 1.0);
    case ShapeType::Bars: return av <= 1.0 && au >= 0.3 && au <= 0.75;
    }
    return false;
}

void render(const DomainSpec& spec, int generator_class, Rng& rng, float* out)
{
    const int e = spec.image_extent;
    const auto shape = static_cast<ShapeType>(generator_class / spec.bands);
    const int band = generator_class % spec.bands;
    const double half = 0.5 * e;
    const double cx = half + rng.uniform(-spec.jitter, spec.jitter) * half;
    const double cy = half + rng.uniform(-spec.jitter, spec.jitter) * half;
    const double radius = rng.uniform(spec.scale_min, spec.scale_max) * half;
    const double theta = rng.uniform(spec.rotation_min, spec.rotation_max) * std::numbers::pi / 180.0;
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
    const double freq = spec.texture_frequency * (1.0 + band * spec.band_spacing) / 8.0;
    const double alpha = rng.uniform(0.0, std::numbers::pi);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double kx = 2.0 * std::numbers::pi * freq * std::cos(alpha);
    const double ky = 2.0 * std::numbers::pi * freq * std::sin(alpha);
    const double background = 0.2;
    const std::size_t plane = static_cast<std::size_t>(e) * e;
    for (int y = 0; y < e; ++y)
        for (int x = 0; x < e; ++x) {
            // 2x2 supersampled coverage
            double cover = 0.0;
            for (int sy = 0; sy < 2; ++sy)
                for (int sx = 0; sx < 2; ++sx) {
                    const double px = x + 0.25 + 0.5 * sx - cx;
                    const double py = y + 0.25 + 0.5 * sy - cy;
                    const double u = (cos_t * px + sin_t * py) / radius;
                    const double v = (-sin_t * px + cos_t * py) / radius;
                    cover += inside(shape, u, v) ? 0.25 : 0.0;
                }
            const double tex = 0.5 + spec.texture_contrast * std::sin(kx * (x + 0.5) + ky * (y + 0.5) + phase);
            const double base = background + cover * (tex - background);
            for (int c = 0; c < spec.channels; ++c) {
                const double value = base + spec.noise * rng.normal();
                out[c * plane + static_cast<std::size_t>(y) * e + x] = static_cast<float>(std::clamp(value, 0.0, 1.0));
            }
        }
}

std::vector<unsigned char> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& path)
{
    if (offset + 4 > bytes.size())
        throw IdxTruncatedError("'" + path + "': header truncated");
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v)
{
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8), static_cast<char>(v)};
    out.write(b, 4);
}

} // namespace

TaskSpec synth_task(const DomainSpec& spec, Rng& rng)
{
    spec.validate();
    if (spec.kind != DomainKind::SyntheticShapes)
        throw ContractError("synth_task needs a synthetic-shapes domain");
    auto data = std::make_shared<Dataset>();
    const auto n = spec.n_samples;
    const auto e = static_cast<std::size_t>(spec.image_extent);
    const auto ch = static_cast<std::size_t>(spec.channels);
    data->n_classes = spec.n_classes;
    data->images = Tensor({n, ch, e, e});
    data->labels.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        data->labels[i] = static_cast<int>(i % static_cast<std::size_t>(spec.n_classes));
    rng.shuffle(std::span<int>(data->labels));
    for (std::size_t i = 0; i < n; ++i) {
        const int label = data->labels[i];
        const int g = spec.class_subset.empty() ? label : spec.class_subset[static_cast<std::size_t>(label)];
        render(spec, g, rng, data->images.ptr() + i * ch * e * e);
    }
    TaskSpec task;
    task.domain = spec;
    task.label_space = spec.n_classes;
    task.data = std::move(data);
    task.train.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        task.train[i] = i;
    return task;
}

TaskSpec synth_task(const DomainSpec& spec)
{
    Rng rng(derive_seed(spec.seed, "synth"));
    return synth_task(spec, rng);
}

TaskSpec load_idx(const std::string& images_path, const std::string& labels_path)
{
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);
    const auto img_magic = read_be32(img, 0, images_path);
    if (img_magic != 0x00000803u)
        throw IdxMagicError("'" + images_path + "': image magic " + std::to_string(img_magic) + ", expected 0x00000803");
    const auto lab_magic = read_be32(lab, 0, labels_path);
    if (lab_magic != 0x00000801u)
        throw IdxMagicError("'" + labels_path + "': label magic " + std::to_string(lab_magic) + ", expected 0x00000801");
    const std::size_t n = read_be32(img, 4, images_path);
    const std::size_t rows = read_be32(img, 8, images_path);
    const std::size_t cols = read_be32(img, 12, images_path);
    const std::size_t n_labels = read_be32(lab, 4, labels_path);
    if (n != n_labels)
        throw IdxCountMismatchError(std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");
    if (n == 0 || rows == 0 || cols == 0)
        throw IdxTruncatedError("'" + images_path + "': empty image set");
    if (img.size() < 16 + n * rows * cols)
        throw IdxTruncatedError("'" + images_path + "': payload truncated");
    if (lab.size() < 8 + n)
        throw IdxTruncatedError("'" + labels_path + "': payload truncated");

    auto data = std::make_shared<Dataset>();
    data->images = Tensor({n, 1, rows, cols});
    for (std::size_t i = 0; i < n * rows * cols; ++i)
        data->images[i] = static_cast<float>(img[16 + i]) / 255.0f;
    data->labels.resize(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        data->labels[i] = lab[8 + i];
        max_label = std::max(max_label, data->labels[i]);
    }
    data->n_classes = max_label + 1;

    TaskSpec task;
    task.domain.kind = DomainKind::IdxFile;
    task.domain.images_path = images_path;
    task.domain.labels_path = labels_path;
    task.domain.image_extent = static_cast<int>(rows);
    task.domain.n_samples = n;
    task.domain.n_classes = data->n_classes;
    task.label_space = data->n_classes;
    task.data = std::move(data);
    task.train.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        task.train[i] = i;
    return task;
}

void save_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path)
{
    if (data.channels() != 1)
        throw ContractError("save_idx: only single-channel images can be written");
    const std::size_t n = data.size(), rows = data.images.dim(2), cols = data.images.dim(3);
    std::ofstream img(images_path, std::ios::binary);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!img || !lab)
        throw IoError("save_idx: cannot write '" + images_path + "' / '" + labels_path + "'");
    write_be32(img, 0x00000803u);
    write_be32(img, static_cast<std::uint32_t>(n));
    write_be32(img, static_cast<std::uint32_t>(rows));
    write_be32(img, static_cast<std::uint32_t>(cols));
    std::vector<char> pixels(n * rows * cols);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        pixels[i] = static_cast<char>(std::lround(std::clamp(data.images[i], 0.0f, 1.0f) * 255.0f));
    img.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
    write_be32(lab, 0x00000801u);
    write_be32(lab, static_cast<std::uint32_t>(n));
    for (int y : data.labels) {
        if (y < 0 || y > 255)
            throw ContractError("save_idx: label " + std::to_string(y) + " does not fit in a byte");
        lab.put(static_cast<char>(y));
    }
    if (!img || !lab)
        throw IoError("save_idx: write failed");
}

TaskSpec split(const TaskSpec& task, double val_fraction, Rng& rng)
{
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ContractError("split: val_fraction must lie in (0, 1)");
    if (!task.data)
        throw ContractError("split: task has no data");
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(task.label_space));
    for (std::size_t i = 0; i < task.data->size(); ++i)
        by_class.at(static_cast<std::size_t>(task.data->labels[i])).push_back(i);
    TaskSpec out = task;
    out.train.clear();
    out.val.clear();
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (members.size() < 2)
            throw ContractError("split: class " + std::to_string(c) + " has fewer than 2 samples");
        rng.shuffle(std::span<std::size_t>(members));
        auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(members.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, members.size() - 1);
        out.val.insert(out.val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
        out.train.insert(out.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    return out;
}

Tensor gather_images(const Dataset& data, std::span<const std::size_t> indices)
{
    if (indices.empty())
        throw ContractError("gather_images: empty selection");
    const auto& s = data.images.shape();
    const std::size_t per = s[1] * s[2] * s[3];
    auto out = Tensor::uninitialized({indices.size(), s[1], s[2], s[3]});
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= data.size())
            throw ContractError("gather_images: index out of range");
        std::copy_n(data.images.ptr() + indices[k] * per, per, out.ptr() + k * per);
    }
    return out;
}

std::vector<int> gather_labels(const Dataset& data, std::span<const std::size_t> indices)
{
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices)
        out.push_back(data.labels.at(i));
    return out;
}

DomainPreset domain_preset(const std::string& name)
{
    DomainPreset p;
    p.name = name;
    if (name == "default") {
        p.source.image_extent = 32;
        p.source.n_samples = 20000;
        p.source.seed = 11;
        p.target = p.source;
        p.target.shapes = 6;
        p.target.n_classes = 6;
        p.target.class_subset = {9, 10, 11, 12, 13, 14};
        p.target.rotation_max = 45.0;
        p.target.n_samples = 1000;
        p.target.seed = 12;
        p.source_val_fraction = 0.2;
        p.target_val_fraction = 0.2;
        return p;
    }
    if (name == "stage-biased" || name == "shape-biased") {
        DomainSpec fine;
        fine.image_extent = 16;
        fine.shapes = 4;
        fine.bands = 3;
        fine.n_classes = 12;
        fine.scale_min = 0.45;
        fine.scale_max = 0.7;
        fine.texture_frequency = 2.0;
        fine.band_spacing = 0.5;
        DomainSpec coarse = fine;
        coarse.shapes = 6;
        coarse.bands = 1;
        coarse.n_classes = 6;
        coarse.scale_min = 0.7;
        coarse.scale_max = 1.0;
        coarse.rotation_min = -30.0;
        coarse.rotation_max = 30.0;
        coarse.texture_frequency = 1.0;
        const bool late = name == "shape-biased";
        p.source = late ? fine : coarse;
        p.target = late ? coarse : fine;
        p.source.n_samples = 6000;
        p.source.seed = 21;
        p.target.n_samples = 600;
        p.target.seed = 22;
        return p;
    }
    throw ConfigError("unknown domain preset '" + name + "'");
}

std::vector<std::string> domain_preset_names() { return {"default", "stage-biased", "shape-biased"}; }

} // namespace allocnas
