#include "allocnas/config.hpp"

#include "allocnas/errors.hpp"
#include "allocnas/report.hpp"
#include "allocnas/toml.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace allocnas {

TrainSchedule desk_schedule(const std::string& phase)
{
    TrainSchedule s;
    s.weight_decay = 1e-4;
    s.momentum = 0.9;
    s.batch_size = 32;
    s.label_smoothing = 0.1;
    if (phase == "supernet_source") {
        s.epochs = 6;
        s.base_lr = 0.05;
        s.lr_drop_epochs = {4};
        s.warmup_epochs = 1;
    } else if (phase == "supernet_target" || phase == "child_target") {
        s.epochs = 10;
        s.base_lr = 0.02;
        s.lr_drop_epochs = {7};
    } else if (phase == "child_source") {
        s.epochs = 2;
        s.base_lr = 0.01;
    } else {
        throw ConfigError("unknown schedule phase '" + phase + "'");
    }
    return s;
}

ExperimentConfig default_config(const std::string& preset)
{
    ExperimentConfig c;
    const auto p = domain_preset(preset);
    c.preset = preset;
    auto& t = c.transfer;
    t.source = p.source;
    t.target = p.target;
    t.source_val_fraction = p.source_val_fraction;
    t.target_val_fraction = p.target_val_fraction;
    t.supernet_source = desk_schedule("supernet_source");
    t.supernet_target = desk_schedule("supernet_target");
    t.child_source = desk_schedule("child_source");
    t.child_target = desk_schedule("child_target");
    for (const char* a : {"2,2,2,2", "4,2,1,1", "1,1,2,4", "1,4,2,1", "1,2,4,1"})
        c.sweep_allocations.push_back(Allocation::parse(a));
    c.sweep_seeds = {1, 2, 3};
    return c;
}

namespace {

class Reader {
public:
    explicit Reader(toml::Table table) : table_(std::move(table)) {}

    const toml::Value* find(const std::string& key)
    {
        auto it = table_.find(key);
        if (it == table_.end())
            return nullptr;
        used_.insert(key);
        return &it->second;
    }

    [[noreturn]] static void bad(const std::string& key, const toml::Value& v, const std::string& want)
    {
        throw ConfigError("config line " + std::to_string(v.line) + ": '" + key + "' must be " + want);
    }

    static double as_number(const std::string& key, const toml::Value& v)
    {
        if (v.is_int())
            return static_cast<double>(std::get<std::int64_t>(v.data));
        if (!v.is_number())
            bad(key, v, "a number");
        return std::get<double>(v.data);
    }

    static std::int64_t as_int(const std::string& key, const toml::Value& v, std::int64_t lo = 0)
    {
        if (!v.is_int())
            bad(key, v, "an integer");
        const auto i = std::get<std::int64_t>(v.data);
        if (i < lo)
            bad(key, v, ">= " + std::to_string(lo));
        return i;
    }

    void number(const std::string& key, double& out)
    {
        if (auto* v = find(key))
            out = as_number(key, *v);
    }
    template <typename Int>
    void integer(const std::string& key, Int& out, std::int64_t lo = 0)
    {
        if (auto* v = find(key))
            out = static_cast<Int>(as_int(key, *v, lo));
    }
    void boolean(const std::string& key, bool& out)
    {
        if (auto* v = find(key)) {
            if (!v->is_bool())
                bad(key, *v, "true or false");
            out = std::get<bool>(v->data);
        }
    }
    void string(const std::string& key, std::string& out)
    {
        if (auto* v = find(key)) {
            if (!v->is_string())
                bad(key, *v, "a string");
            out = std::get<std::string>(v->data);
        }
    }
    void allocation(const std::string& key, Allocation& out)
    {
        if (auto* v = find(key)) {
            try {
                if (v->is_string()) {
                    out = Allocation::parse(std::get<std::string>(v->data));
                } else if (v->is_array()) {
                    std::vector<int> counts;
                    for (const auto& item : std::get<toml::Array>(v->data))
                        counts.push_back(static_cast<int>(as_int(key, item, 1)));
                    out = Allocation(counts);
                } else {
                    bad(key, *v, "an allocation such as \"3,4,6,3\"");
                }
            } catch (const ContractError& e) {
                throw ConfigError("config line " + std::to_string(v->line) + ": " + e.what());
            }
        }
    }
    void range(const std::string& key, double& lo, double& hi)
    {
        if (auto* v = find(key)) {
            if (!v->is_array() || std::get<toml::Array>(v->data).size() != 2)
                bad(key, *v, "a [lo, hi] pair");
            const auto& a = std::get<toml::Array>(v->data);
            lo = as_number(key, a[0]);
            hi = as_number(key, a[1]);
        }
    }
    template <typename Int>
    void int_list(const std::string& key, std::vector<Int>& out, std::int64_t lo = 0)
    {
        if (auto* v = find(key)) {
            if (!v->is_array())
                bad(key, *v, "a list of integers");
            out.clear();
            for (const auto& item : std::get<toml::Array>(v->data))
                out.push_back(static_cast<Int>(as_int(key, item, lo)));
        }
    }

    void reject_unused() const
    {
        for (const auto& [key, v] : table_)
            if (!used_.contains(key))
                throw ConfigError("config line " + std::to_string(v.line) + ": unknown key '" + key + "'");
    }

private:
    toml::Table table_;
    std::set<std::string> used_;
};

void read_domain(Reader& r, const std::string& s, DomainSpec& d, double& val_fraction)
{
    std::string kind;
    r.string(s + ".kind", kind);
    if (kind == "idx-file")
        d.kind = DomainKind::IdxFile;
    else if (kind == "synthetic-shapes")
        d.kind = DomainKind::SyntheticShapes;
    else if (!kind.empty())
        throw ConfigError("'" + s + ".kind' must be synthetic-shapes or idx-file, got '" + kind + "'");
    r.integer(s + ".extent", d.image_extent, 1);
    r.integer(s + ".channels", d.channels, 1);
    r.integer(s + ".classes", d.n_classes, 2);
    r.integer(s + ".samples", d.n_samples, 1);
    r.integer(s + ".shapes", d.shapes, 1);
    r.integer(s + ".bands", d.bands, 1);
    r.int_list(s + ".class_subset", d.class_subset);
    r.range(s + ".rotation", d.rotation_min, d.rotation_max);
    r.range(s + ".scale", d.scale_min, d.scale_max);
    r.number(s + ".texture_frequency", d.texture_frequency);
    r.number(s + ".band_spacing", d.band_spacing);
    r.number(s + ".texture_contrast", d.texture_contrast);
    r.number(s + ".noise", d.noise);
    r.number(s + ".jitter", d.jitter);
    r.string(s + ".images", d.images_path);
    r.string(s + ".labels", d.labels_path);
    r.number(s + ".val_fraction", val_fraction);
}

void read_schedule(Reader& r, const std::string& s, TrainSchedule& t)
{
    r.integer(s + ".epochs", t.epochs);
    r.number(s + ".base_lr", t.base_lr);
    r.int_list(s + ".lr_drop_epochs", t.lr_drop_epochs);
    r.number(s + ".lr_drop_factor", t.lr_drop_factor);
    r.number(s + ".weight_decay", t.weight_decay);
    r.number(s + ".momentum", t.momentum);
    r.integer(s + ".batch_size", t.batch_size, 1);
    r.integer(s + ".warmup_epochs", t.warmup_epochs);
    r.number(s + ".label_smoothing", t.label_smoothing);
}

nlohmann::ordered_json domain_json(const DomainSpec& d, double val_fraction)
{
    nlohmann::ordered_json j;
    j["kind"] = d.kind == DomainKind::IdxFile ? "idx-file" : "synthetic-shapes";
    j["extent"] = d.image_extent;
    j["channels"] = d.channels;
    j["classes"] = d.n_classes;
    j["samples"] = d.n_samples;
    j["shapes"] = d.shapes;
    j["bands"] = d.bands;
    j["class_subset"] = d.class_subset;
    j["rotation"] = {d.rotation_min, d.rotation_max};
    j["scale"] = {d.scale_min, d.scale_max};
    j["texture_frequency"] = d.texture_frequency;
    j["band_spacing"] = d.band_spacing;
    j["texture_contrast"] = d.texture_contrast;
    j["noise"] = d.noise;
    j["jitter"] = d.jitter;
    j["images"] = d.images_path;
    j["labels"] = d.labels_path;
    j["val_fraction"] = val_fraction;
    return j;
}

nlohmann::ordered_json schedule_json(const TrainSchedule& s)
{
    nlohmann::ordered_json j;
    j["epochs"] = s.epochs;
    j["base_lr"] = s.base_lr;
    j["lr_drop_epochs"] = s.lr_drop_epochs;
    j["lr_drop_factor"] = s.lr_drop_factor;
    j["weight_decay"] = s.weight_decay;
    j["momentum"] = s.momentum;
    j["batch_size"] = s.batch_size;
    j["warmup_epochs"] = s.warmup_epochs;
    j["label_smoothing"] = s.label_smoothing;
    return j;
}

} // namespace

std::string ExperimentConfig::canonical_json() const
{
    const auto& t = transfer;
    nlohmann::ordered_json j;
    j["run"] = {{"seed", t.seed}, {"preset", preset}};
    j["source"] = domain_json(t.source, t.source_val_fraction);
    j["target"] = domain_json(t.target, t.target_val_fraction);
    j["supernet"] = {{"alloc", t.super_alloc.to_string()},
                     {"family", to_string(t.kind.family)},
                     {"base_width", t.kind.base_width},
                     {"expansion", t.kind.expansion}};
    j["search"] = {{"budget", t.budget},
                   {"weights", t.weighted ? "flops" : "unit"},
                   {"default_reference", t.default_reference.to_string()},
                   {"random_allocations", t.random_allocations},
                   {"all_budgets", t.weight_search_all_budgets},
                   {"from_scratch", t.from_scratch},
                   {"baseline", t.run_baseline}};
    j["schedule"] = {{"supernet_source", schedule_json(t.supernet_source)},
                     {"supernet_target", schedule_json(t.supernet_target)},
                     {"child_source", schedule_json(t.child_source)},
                     {"child_target", schedule_json(t.child_target)}};
    std::vector<std::string> allocs;
    for (const auto& a : sweep_allocations)
        allocs.push_back(a.to_string());
    j["sweep"] = {{"allocations", allocs}, {"seeds", sweep_seeds}};
    return j.dump();
}

std::string ExperimentConfig::hash() const { return sha256_hex(canonical_json()); }

ExperimentConfig parse_config(const std::string& toml_text)
{
    Reader r(toml::parse(toml_text));
    std::string preset = "stage-biased";
    r.string("run.preset", preset);
    ExperimentConfig c;
    try {
        c = default_config(preset);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("run.preset: ") + e.what());
    }
    auto& t = c.transfer;
    const auto* seed = r.find("run.seed");
    if (!seed)
        throw ConfigError("config: run.seed is required");
    t.seed = static_cast<std::uint64_t>(Reader::as_int("run.seed", *seed));
    r.string("run.out", c.out_dir);
    r.integer("run.threads", t.threads);

    read_domain(r, "source", t.source, t.source_val_fraction);
    read_domain(r, "target", t.target, t.target_val_fraction);

    r.allocation("supernet.alloc", t.super_alloc);
    std::string family;
    r.string("supernet.family", family);
    if (!family.empty()) {
        try {
            t.kind.family = parse_block_family(family);
        } catch (const Error& e) {
            throw ConfigError(std::string("supernet.family: ") + e.what());
        }
    }
    r.integer("supernet.base_width", t.kind.base_width, 1);
    r.number("supernet.expansion", t.kind.expansion);

    r.number("search.budget", t.budget);
    std::string weights;
    r.string("search.weights", weights);
    if (weights == "flops")
        t.weighted = true;
    else if (weights == "unit" || weights.empty())
        t.weighted = false;
    else
        throw ConfigError("search.weights must be \"unit\" or \"flops\", got '" + weights + "'");
    r.allocation("search.default_reference", t.default_reference);
    r.integer("search.random_allocations", t.random_allocations);
    r.boolean("search.all_budgets", t.weight_search_all_budgets);
    r.boolean("search.from_scratch", t.from_scratch);
    r.boolean("search.baseline", t.run_baseline);

    read_schedule(r, "schedule.supernet_source", t.supernet_source);
    read_schedule(r, "schedule.supernet_target", t.supernet_target);
    read_schedule(r, "schedule.child_source", t.child_source);
    read_schedule(r, "schedule.child_target", t.child_target);

    if (const auto* v = r.find("sweep.allocations")) {
        if (!v->is_array())
            Reader::bad("sweep.allocations", *v, "a list of allocation strings");
        c.sweep_allocations.clear();
        for (const auto& item : std::get<toml::Array>(v->data)) {
            if (!item.is_string())
                Reader::bad("sweep.allocations", item, "a list of allocation strings");
            try {
                c.sweep_allocations.push_back(Allocation::parse(std::get<std::string>(item.data)));
            } catch (const ContractError& e) {
                throw ConfigError(std::string("sweep.allocations: ") + e.what());
            }
        }
    }
    r.int_list("sweep.seeds", c.sweep_seeds);
    r.reject_unused();

    for (const auto* d : {&t.source, &t.target})
        if (d->kind == DomainKind::IdxFile)
            for (const auto* path : {&d->images_path, &d->labels_path})
                if (path->empty() || !std::filesystem::exists(*path))
                    throw ConfigError("config: input file '" + *path + "' does not exist");
    try {
        t.validate();
    } catch (const ContractError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

} // namespace allocnas
