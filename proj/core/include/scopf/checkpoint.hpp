#pragma once

#include <filesystem>
#include <string>

#include "scopf/train.hpp"

namespace scopf {

/// Everything needed to resume or evaluate a run. Serialized as a single JSON
/// document (format tag "scopf-checkpoint", version 1); doubles are written
/// with round-trip precision.
struct Checkpoint {
    TrainResult run;
    int n_gen = 0;
    int n_load = 0;
    int n_gen_contingencies = 0;
};

std::string checkpoint_to_text(const Checkpoint& ck);
Checkpoint checkpoint_from_text(const std::string& text);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws DataError naming expected and actual sizes when the checkpoint was
/// trained on a different case shape.
void check_compatible(const Checkpoint& ck, const GridModel& model);

std::string trainer_config_to_json(const TrainerConfig& config);

}  // namespace scopf
