#include "allocnas/checkpoint.hpp"

#include "allocnas/errors.hpp"

#include <json.hpp>
#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace allocnas {

namespace {

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v)
    {
        for (int i = 0; i < 2; ++i)
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float f)
    {
        std::uint32_t v;
        std::memcpy(&v, &f, 4);
        u32(v);
    }
    void raw(const void* p, std::size_t n)
    {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes_.insert(bytes_.end(), b, b + n);
    }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    void need(std::size_t n) const
    {
        if (pos_ + n > bytes_.size())
            throw CheckpointFormatError("checkpoint truncated at byte " + std::to_string(pos_));
    }
    std::uint8_t u8()
    {
        need(1);
        return bytes_[pos_++];
    }
    std::uint16_t u16()
    {
        need(2);
        const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32()
    {
        const auto v = u32();
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    std::string text(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

} // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParameterStore& params, const std::string& metadata)
{
    Writer w;
    w.raw("SPNW", 4);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(metadata.size()));
    w.raw(metadata.data(), metadata.size());
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, var] : params) {
        if (name.size() > 0xffff)
            throw CheckpointFormatError("parameter name too long: " + name.substr(0, 40) + "...");
        const auto& shape = var.shape();
        if (shape.size() > 0xff)
            throw CheckpointFormatError("tensor rank too large for '" + name + "'");
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.raw(name.data(), name.size());
        w.u8(0);
        w.u8(static_cast<std::uint8_t>(shape.size()));
        for (auto d : shape)
            w.u32(static_cast<std::uint32_t>(d));
        for (float f : var.value().data())
            w.f32(f);
    }
    const auto crc = crc_of(w.bytes());
    w.u32(crc);
    return std::move(w.bytes());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "SPNW", 4) != 0)
        throw CheckpointMagicError("not a checkpoint: magic bytes are not 'SPNW'");
    if (bytes.size() < 8)
        throw CheckpointFormatError("checkpoint truncated in the header");
    Reader header(bytes.subspan(4));
    const auto version = header.u32();
    if (version != kCheckpointVersion)
        throw CheckpointVersionError("unsupported checkpoint version " + std::to_string(version));
    if (bytes.size() < 8 + 4 + 4 + 4)
        throw CheckpointFormatError("checkpoint truncated");
    const auto body = bytes.first(bytes.size() - 4);
    Reader tail(bytes.subspan(bytes.size() - 4));
    const auto stored = tail.u32();
    const auto actual = crc_of(body);
    if (stored != actual)
        throw CheckpointCrcError("checkpoint CRC mismatch (stored " + std::to_string(stored) + ", computed " +
                                 std::to_string(actual) + ")");

    Reader r(body);
    r.text(8);
    Checkpoint out;
    out.metadata = r.text(r.u32());
    const auto count = r.u32();
    for (std::uint32_t e = 0; e < count; ++e) {
        const auto name = r.text(r.u16());
        const auto dtype = r.u8();
        if (dtype != 0)
            throw CheckpointFormatError("tensor '" + name + "' has unknown dtype " + std::to_string(dtype));
        const auto rank = r.u8();
        Shape shape;
        std::size_t numel = 1;
        for (int i = 0; i < rank; ++i) {
            shape.push_back(r.u32());
            if (shape.back() == 0)
                throw CheckpointFormatError("tensor '" + name + "' has a zero extent");
            numel *= shape.back();
        }
        r.need(numel * 4);
        auto t = Tensor::uninitialized(shape);
        for (std::size_t i = 0; i < numel; ++i)
            t[i] = r.f32();
        if (out.params.contains(name))
            throw CheckpointFormatError("duplicate tensor name '" + name + "'");
        out.params.add(name, std::move(t));
    }
    if (r.pos() != body.size())
        throw CheckpointFormatError("trailing bytes after the tensor table");
    return out;
}

std::vector<std::uint8_t> read_bytes(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write to '" + path + "' failed");
}

void save_checkpoint(const std::string& path, const ParameterStore& params, const std::string& metadata)
{
    write_bytes(path, encode_checkpoint(params, metadata));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_bytes(path)); }

std::string supernet_metadata(const SuperNet& net, std::uint64_t seed, const std::string& phase)
{
    nlohmann::ordered_json j;
    j["allocation"] = net.alloc().to_string();
    j["block_kind"] = {{"family", to_string(net.kind().family)},
                       {"base_width", net.kind().base_width},
                       {"expansion", net.kind().expansion}};
    j["in_channels"] = net.geometry().in_channels;
    j["input_extent"] = net.geometry().input_extent;
    j["num_classes"] = net.num_classes();
    j["seed"] = seed;
    j["phase"] = phase;
    return j.dump();
}

void save_supernet(const std::string& path, const SuperNet& net, std::uint64_t seed, const std::string& phase)
{
    save_checkpoint(path, net.params(), supernet_metadata(net, seed, phase));
}

SuperNet supernet_from_checkpoint(const Checkpoint& ckpt)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ckpt.metadata);
        const auto alloc = Allocation::parse(j.at("allocation").get<std::string>());
        BlockKind kind{parse_block_family(j.at("block_kind").at("family").get<std::string>()),
                       j.at("block_kind").at("base_width").get<int>(), j.at("block_kind").at("expansion").get<double>()};
        NetGeometry geometry{j.at("in_channels").get<int>(), j.at("input_extent").get<int>()};
        SuperNet net(alloc, kind, j.at("num_classes").get<int>(), 0, geometry);
        if (net.params().size() != ckpt.params.size())
            throw CheckpointFormatError("checkpoint holds " + std::to_string(ckpt.params.size()) + " tensors, network needs " +
                                        std::to_string(net.params().size()));
        for (auto& [name, var] : net.params()) {
            if (!ckpt.params.contains(name))
                throw CheckpointFormatError("checkpoint lacks tensor '" + name + "'");
            const auto& src = ckpt.params.at(name).value();
            if (src.shape() != var.shape())
                throw CheckpointFormatError("tensor '" + name + "' has shape " + shape_to_string(src.shape()) +
                                            ", network needs " + shape_to_string(var.shape()));
            var.mutable_value() = src;
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointFormatError(std::string("bad checkpoint metadata: ") + e.what());
    }
}

SuperNet load_supernet(const std::string& path) { return supernet_from_checkpoint(load_checkpoint(path)); }

} // namespace allocnas
