#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "safeaug/nn/models.hpp"
#include "safeaug/nn/optimizer.hpp"

namespace safeaug {

/// Checkpoint = model descriptor + catalog mapping + config hash + all
/// weights, batch-norm running statistics and optimizer state, with a
/// SHA-256 trailer. Round trips are bit-exact.
struct LoadedCheckpoint {
    std::unique_ptr<nn::Model> model;
    nn::OptimizerSpec optimizer_spec;
    std::vector<double> optimizer_blob;  // empty if none was saved
    std::string config_hash;
    std::map<std::string, std::string> meta;

    /// Rebuild an optimizer positioned exactly where training left off.
    std::unique_ptr<nn::Optimizer> make_optimizer() const;
};

void save_checkpoint(const std::string& path, nn::Model& model, const nn::Optimizer* optimizer,
                     const std::string& config_hash,
                     const std::map<std::string, std::string>& meta = {});

LoadedCheckpoint load_checkpoint(const std::string& path);

/// Refuses to proceed when the checkpoint's label mapping differs from the
/// catalog in use (label semantics would silently change otherwise).
void require_mapping_match(const LoadedCheckpoint& ckpt, const std::vector<std::string>& current_mapping);

}  // namespace safeaug
