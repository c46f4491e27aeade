#pragma once

// Plain-text key=value run configuration mirroring the model, trainer and
// weight-mask settings. Precedence: CLI flag > config file > default.

#include <stdexcept>
#include <string>

#include "litenext/model.hpp"
#include "litenext/trainer.hpp"

namespace litenext {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ModelConfig model;
  TrainerConfig trainer;

  // Applies one key=value assignment; unknown keys throw ConfigError.
  void apply(const std::string& key, const std::string& value);

  // Parses a key=value file ('#' starts a comment) over the current values.
  void load_file(const std::string& path);

  // Writes every setting as key=value lines, suitable for load_file.
  void write_file(const std::string& path) const;

  std::string loss_name() const;
};

}  // namespace litenext
