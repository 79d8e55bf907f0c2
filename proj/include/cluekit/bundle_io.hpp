#pragma once

#include "cluekit/io.hpp"
#include "cluekit/models.hpp"

namespace cluekit {

/// Writes dir/manifest.json and one raw float64 file per tensor under
/// dir/tensors, in manifest order. `meta` is stored verbatim under "meta".
void save_bundle(const ModelBundle& bundle, const fs::path& dir, const nlohmann::json& meta = nlohmann::json::object());
ModelBundle load_bundle(const fs::path& dir);
nlohmann::json load_bundle_meta(const fs::path& dir);

/// Files written by save_bundle, relative to dir, in write order.
std::vector<std::string> bundle_files(const fs::path& dir);

}  // namespace cluekit
