#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "elegance/mlp.hpp"

namespace elegance::numerics {

// Checkpoint format: one JSON document with a header (layer dims, activation)
// followed by row-major weight/bias arrays. Doubles are emitted with
// shortest-round-trip formatting, so load(save(p)) == p bit for bit.
void save_mlp(const std::filesystem::path& path, const MlpParams& params,
              const std::map<std::string, std::string>& meta = {});

struct LoadedMlp {
  MlpParams params;
  std::map<std::string, std::string> meta;
};

LoadedMlp load_mlp(const std::filesystem::path& path);

}  // namespace elegance::numerics
