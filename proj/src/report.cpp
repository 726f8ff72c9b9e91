#include "allocnas/report.hpp"

#include "allocnas/checkpoint.hpp"
#include "allocnas/errors.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace allocnas {

namespace {

using ojson = nlohmann::ordered_json;

std::string hex(const unsigned char* digest, unsigned len)
{
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += digits[digest[i] >> 4];
        out += digits[digest[i] & 15];
    }
    return out;
}

std::string fmt(double v)
{
    if (std::isnan(v))
        return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

ojson metrics_json_obj(const Metrics& m)
{
    return ojson{{"loss", m.loss}, {"top1_accuracy", m.top1_accuracy}, {"n_examples", m.n_examples}};
}

ojson phase_json(const PhaseLog& p)
{
    return ojson{{"phase", p.phase},
                 {"before", metrics_json_obj(p.before)},
                 {"after", metrics_json_obj(p.after)},
                 {"iterations", p.iterations},
                 {"head_reinitialized", p.head_reinitialized},
                 {"epoch_losses", p.epoch_losses}};
}

ojson tuned_json(const WeightSearchResult& r)
{
    return ojson{{"phases", {phase_json(r.source_phase), phase_json(r.target_phase)}},
                 {"final", metrics_json_obj(r.final_metrics)}};
}

std::string phases_csv(const TransferReport& r)
{
    std::ostringstream os;
    os << "phase,allocation,before_loss,before_acc,after_loss,after_acc,iterations\n";
    auto row = [&](const PhaseLog& p, const std::string& alloc) {
        os << p.phase << ',' << alloc << ',' << fmt(p.before.loss) << ',' << fmt(p.before.top1_accuracy) << ','
           << fmt(p.after.loss) << ',' << fmt(p.after.top1_accuracy) << ',' << p.iterations << '\n';
    };
    if (r.supernet_source)
        row(*r.supernet_source, "super");
    if (r.supernet_target)
        row(*r.supernet_target, "super");
    for (const auto& b : r.per_budget) {
        row(b.tuned.source_phase, b.alloc.to_string());
        row(b.tuned.target_phase, b.alloc.to_string());
    }
    if (r.baseline) {
        row(r.baseline->scratch_phase, r.baseline->alloc.to_string());
        row(r.baseline->tuned.source_phase, r.baseline->alloc.to_string());
        row(r.baseline->tuned.target_phase, r.baseline->alloc.to_string());
    }
    return os.str();
}

} // namespace

std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    return hex(digest, len);
}

std::string file_sha256(const std::string& path)
{
    const auto bytes = read_bytes(path);
    return sha256_hex(std::string(bytes.begin(), bytes.end()));
}

void ensure_dir(const std::string& out_dir)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
        throw IoError("cannot create output directory '" + out_dir + "'");
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out)
        throw IoError("write to '" + path + "' failed");
}

std::string phase_log_json(const PhaseLog& log) { return phase_json(log).dump(2) + "\n"; }

std::string metrics_json(const Metrics& m) { return metrics_json_obj(m).dump(2) + "\n"; }

std::string report_json(const TransferReport& r)
{
    ojson j;
    j["status"] = r.complete ? "complete" : "partial";
    if (r.complete)
        j["failure"] = nullptr;
    else
        j["failure"] = {{"phase", r.failed_phase}, {"message", r.failure}};
    j["phase_order"] = r.phase_order;
    j["seeds"] = r.seeds;
    j["data"] = {{"source_train", r.source_train},
                 {"source_val", r.source_val},
                 {"target_train", r.target_train},
                 {"target_val", r.target_val}};
    j["supernet_source"] = r.supernet_source ? phase_json(*r.supernet_source) : ojson(nullptr);
    j["supernet_target"] = r.supernet_target ? phase_json(*r.supernet_target) : ojson(nullptr);
    if (r.trace) {
        ojson chain = ojson::array();
        for (std::size_t k = 0; k < r.trace->chain.size(); ++k)
            chain.push_back({{"step", k},
                             {"budget", r.trace->budgets[k]},
                             {"allocation", r.trace->chain[k].to_string()},
                             {"score", r.trace->scores[k]},
                             {"evals_so_far", r.trace->evals_so_far[k]}});
        j["search"] = {{"cost_weights", r.cost_weights},
                       {"eval_count", r.trace->eval_count},
                       {"tie_breaks", r.trace->tie_breaks},
                       {"checksum_before", r.checksum_before_search},
                       {"checksum_after", r.checksum_after_search},
                       {"chain", chain}};
    } else {
        j["search"] = nullptr;
    }
    ojson budgets = ojson::array();
    for (const auto& b : r.per_budget)
        budgets.push_back({{"budget", b.budget},
                           {"allocation", b.alloc.to_string()},
                           {"search_score", b.search_score},
                           {"inherited", metrics_json_obj(b.inherited)},
                           {"weight_search", tuned_json(b.tuned)}});
    j["per_budget"] = budgets;
    ojson random = ojson::array();
    for (const auto& a : r.random)
        random.push_back({{"allocation", a.alloc.to_string()},
                          {"inherited", metrics_json_obj(a.inherited)},
                          {"final", metrics_json_obj(a.final_metrics)}});
    j["random"] = random;
    if (r.baseline)
        j["baseline"] = {{"allocation", r.baseline->alloc.to_string()},
                         {"scratch", phase_json(r.baseline->scratch_phase)},
                         {"weight_search", tuned_json(r.baseline->tuned)}};
    else
        j["baseline"] = nullptr;
    return j.dump(2) + "\n";
}

std::vector<std::string> emit_report(const TransferReport& r, const std::string& out_dir)
{
    ensure_dir(out_dir);
    const std::filesystem::path dir(out_dir);
    std::vector<std::string> files;
    auto put = [&](const std::string& name, const std::string& text) {
        write_text((dir / name).string(), text);
        files.push_back(name);
    };
    put("report.json", report_json(r));
    {
        std::ostringstream os;
        if (r.trace)
            r.trace->write_csv(os);
        else
            os << "step,budget,allocation,score,evals_so_far\n";
        put("trace.csv", os.str());
    }
    put("phases.csv", phases_csv(r));
    {
        std::ostringstream os;
        os << "budget,allocation,search_score,inherited_acc,final_loss,final_acc\n";
        for (const auto& b : r.per_budget)
            os << fmt(b.budget) << ',' << b.alloc.to_string() << ',' << fmt(b.search_score) << ','
               << fmt(b.inherited.top1_accuracy) << ',' << fmt(b.tuned.final_metrics.loss) << ','
               << fmt(b.tuned.final_metrics.top1_accuracy) << '\n';
        put("per_budget.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "allocation,inherited_acc,final_loss,final_acc\n";
        for (const auto& a : r.random)
            os << a.alloc.to_string() << ',' << fmt(a.inherited.top1_accuracy) << ',' << fmt(a.final_metrics.loss) << ','
               << fmt(a.final_metrics.top1_accuracy) << '\n';
        put("random.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "allocation,final_loss,final_acc\n";
        if (r.baseline)
            os << r.baseline->alloc.to_string() << ',' << fmt(r.baseline->tuned.final_metrics.loss) << ','
               << fmt(r.baseline->tuned.final_metrics.top1_accuracy) << '\n';
        put("baseline.csv", os.str());
    }
    ojson t(r.seconds);
    write_text((dir / "timings.json").string(), t.dump(2) + "\n");
    return files;
}

void write_manifest(const std::string& out_dir, const std::string& config_hash,
                    const std::map<std::string, std::uint64_t>& seeds, const std::vector<std::string>& artifacts)
{
    const std::filesystem::path dir(out_dir);
    ojson j;
    j["config_hash"] = config_hash;
    j["seeds"] = seeds;
    ojson digests = ojson::object();
    for (const auto& name : artifacts)
        digests[name] = file_sha256((dir / name).string());
    j["artifacts"] = digests;
    write_text((dir / "manifest.json").string(), j.dump(2) + "\n");
}

} // namespace allocnas
