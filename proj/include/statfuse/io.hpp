#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "statfuse/core.hpp"

namespace statfuse::io {

// Tensor container layout (all little-endian):
//   bytes 0..7   magic "SFTENS01"
//   bytes 8..11  rank, uint32
//   then rank    dims, uint64 each
//   then 1 byte  dtype: 1 = float32, 2 = uint16
//   then payload, row-major
// Score tensors are rank 3, (class, height, width), float32.
// Label tensors are rank 2, (height, width), uint16.
inline constexpr char kTensorMagic[8] = {'S', 'F', 'T', 'E', 'N', 'S', '0', '1'};
inline constexpr std::uint8_t kDtypeFloat32 = 1;
inline constexpr std::uint8_t kDtypeUint16 = 2;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_tensor(const std::filesystem::path& path, const ScoreMap& map);
void write_tensor(const std::filesystem::path& path, const LabelMap& map);

/// Reads either tensor kind, dispatching on rank/dtype.
std::variant<ScoreMap, LabelMap> read_tensor(const std::filesystem::path& path);

/// Rank-3 float32 tensor, validated against the simplex invariant
/// (tolerance 1e-3 before the clip), then clipped and renormalized.
ScoreMap read_score_map(const std::filesystem::path& path);

/// Rank-2 uint16 tensor.
LabelMap read_label_map(const std::filesystem::path& path);

// Manifest: plain-text lines `expert_id<TAB>scores_dir` plus exactly one
// `gt<TAB>labels_dir` line. Files pair across directories by basename.
struct Manifest {
  struct ExpertEntry {
    std::string id;
    std::filesystem::path dir;
  };
  std::vector<ExpertEntry> experts;
  std::filesystem::path gt_dir;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

/// Sorted basenames of the gt directory; throws FormatError when any expert
/// directory lacks a file for some basename.
std::vector<std::string> matched_basenames(const Manifest& m);

FusionModel load_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const FusionModel& model);

}  // namespace statfuse::io
