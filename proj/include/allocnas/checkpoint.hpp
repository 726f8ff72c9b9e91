#pragma once

#include "allocnas/params.hpp"
#include "allocnas/supernet.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace allocnas {

/// Binary layout, all integers little-endian:
///   "SPNW"  u32 version (1)
///   u32 metadata length, metadata bytes (UTF-8 JSON)
///   u32 tensor count, then per tensor:
///     u16 name length, name, u8 dtype (0 = f32), u8 rank, rank x u32 dims,
///     payload (f32 LE)
///   u32 CRC32 of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ParameterStore params;
    std::string metadata;
};

std::vector<std::uint8_t> encode_checkpoint(const ParameterStore& params, const std::string& metadata);
/// Verifies magic, version and CRC before parsing the table.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const ParameterStore& params, const std::string& metadata);
Checkpoint load_checkpoint(const std::string& path);

/// Metadata JSON of a super-network: allocation, block kind, geometry,
/// classes, seed and phase.
std::string supernet_metadata(const SuperNet& net, std::uint64_t seed, const std::string& phase);
void save_supernet(const std::string& path, const SuperNet& net, std::uint64_t seed, const std::string& phase);
/// Rebuilds the network described by the metadata and loads its tensors.
SuperNet load_supernet(const std::string& path);
SuperNet supernet_from_checkpoint(const Checkpoint& ckpt);

std::vector<std::uint8_t> read_bytes(const std::string& path);
void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

} // namespace allocnas
