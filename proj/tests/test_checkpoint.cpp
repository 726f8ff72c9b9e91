#include "allocnas/checkpoint.hpp"
#include "allocnas/errors.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace allocnas;
using allocnas::testing::random_tensor;
using allocnas::testing::scratch_dir;

namespace {

// bitwise reflected CRC-32 (polynomial 0xEDB88320)
std::uint32_t reference_crc(const std::vector<std::uint8_t>& bytes, std::size_t n)
{
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) {
        crc ^= bytes[i];
        for (int k = 0; k < 8; ++k)
            crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
    return ~crc;
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

ParameterStore sample_store()
{
    Rng rng(5);
    ParameterStore s;
    s.add("a.w", random_tensor({2, 3}, rng));
    s.add("b", random_tensor({4}, rng));
    s.add("scalar", Tensor({1}, 3.5f));
    return s;
}

} // namespace

TEST(Checkpoint, RoundTrip)
{
    auto store = sample_store();
    auto bytes = encode_checkpoint(store, R"({"k":1})");
    auto back = decode_checkpoint(bytes);
    EXPECT_EQ(back.metadata, R"({"k":1})");
    EXPECT_EQ(back.params.checksum(), store.checksum());
    EXPECT_EQ(back.params.names(), store.names());
}

TEST(Checkpoint, HandBuiltBytes)
{
    std::vector<std::uint8_t> b = {'S', 'P', 'N', 'W'};
    put32(b, 1);
    put32(b, 2);
    b.push_back('{');
    b.push_back('}');
    put32(b, 1);
    b.push_back(1);
    b.push_back(0);
    b.push_back('x');
    b.push_back(0); // f32
    b.push_back(1); // rank
    put32(b, 2);
    const float vals[2] = {1.5f, -2.0f};
    std::uint32_t bits[2];
    std::memcpy(bits, vals, sizeof vals);
    put32(b, bits[0]);
    put32(b, bits[1]);
    put32(b, reference_crc(b, b.size()));

    auto ck = decode_checkpoint(b);
    EXPECT_EQ(ck.metadata, "{}");
    ASSERT_TRUE(ck.params.contains("x"));
    EXPECT_EQ(ck.params.at("x").value(), Tensor({2}, {1.5f, -2.0f}));

    ParameterStore same;
    same.add("x", Tensor({2}, {1.5f, -2.0f}));
    EXPECT_EQ(encode_checkpoint(same, "{}"), b);
}

TEST(Checkpoint, CrcCoversEveryPrecedingByte)
{
    auto bytes = encode_checkpoint(sample_store(), "{}");
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= static_cast<std::uint32_t>(bytes[body + static_cast<std::size_t>(i)]) << (8 * i);
    EXPECT_EQ(stored, reference_crc(bytes, body));
}

TEST(Checkpoint, FlippedByteIsDetected)
{
    const auto good = encode_checkpoint(sample_store(), "{}");
    for (std::size_t pos : {std::size_t{9}, good.size() / 2, good.size() - 5, good.size() - 1}) {
        auto bad = good;
        bad[pos] ^= 0x10;
        EXPECT_THROW(decode_checkpoint(bad), CheckpointCrcError) << pos;
    }
}

TEST(Checkpoint, MagicVersionAndLength)
{
    auto bytes = encode_checkpoint(sample_store(), "{}");
    auto magic = bytes;
    magic[0] = 'X';
    EXPECT_THROW(decode_checkpoint(magic), CheckpointMagicError);
    auto version = bytes;
    version[4] = 2;
    EXPECT_THROW(decode_checkpoint(version), CheckpointVersionError);
    std::vector<std::uint8_t> tiny(bytes.begin(), bytes.begin() + 6);
    EXPECT_THROW(decode_checkpoint(tiny), Error);
}

TEST(Checkpoint, SupernetFile)
{
    auto dir = scratch_dir("checkpoint");
    auto net = build_supernet(Allocation({2, 1}), BlockKind{BlockFamily::InvertedResidual, 8, 2.0}, 5, 3, {1, 8});
    net.params().at("stem.w").mutable_value()[0] = 0.25f;
    const auto path = (dir / "net.spnw").string();
    save_supernet(path, net, 3, "unit");
    auto back = load_supernet(path);
    EXPECT_EQ(back.alloc(), net.alloc());
    EXPECT_EQ(back.kind(), net.kind());
    EXPECT_EQ(back.geometry(), net.geometry());
    EXPECT_EQ(back.num_classes(), 5);
    EXPECT_EQ(back.params().checksum(), net.params().checksum());
    EXPECT_THROW(load_checkpoint((dir / "missing.spnw").string()), IoError);
}
