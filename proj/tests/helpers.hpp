#pragma once

#include <filesystem>
#include <string>

#include "arqopt/model.hpp"
#include "arqopt/scenario.hpp"

namespace arqopt::test {

inline std::filesystem::path scenario_path(const std::string& name) {
    return std::filesystem::path(ARQOPT_SCENARIO_DIR) / name;
}

/// Two sources, B=1, F=5, alpha=0.95, failure 0.2 alone / 0.4 interfered.
inline NetworkConfig two_source_config() {
    NetworkConfig cfg;
    cfg.buffer_size = 1;
    cfg.max_service_time = 5;
    cfg.sources = {SourceConfig{0.95}, SourceConfig{0.95}};
    cfg.interference = InterferenceModel::symmetric({0.8, 0.6});
    return cfg;
}

/// Single source, arbitrary B/F/alpha/success.
inline NetworkConfig single_source_config(int buffer, int service, double alpha,
                                          double success) {
    NetworkConfig cfg;
    cfg.buffer_size = buffer;
    cfg.max_service_time = service;
    cfg.sources = {SourceConfig{alpha}};
    cfg.interference = InterferenceModel::symmetric({success});
    return cfg;
}

}  // namespace arqopt::test
