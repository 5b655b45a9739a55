#pragma once

#include <stdexcept>
#include <string>

namespace vidsplice {

// Error taxonomy used across the library. Config problems exit the CLI with
// code 2, everything else with 3.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

struct shape_error : error {
    explicit shape_error(const std::string& msg) : error("shape error: " + msg) {}
};

struct config_error : error {
    explicit config_error(const std::string& msg) : error("config error: " + msg) {}
};

struct contract_error : error {
    explicit contract_error(const std::string& msg) : error("contract error: " + msg) {}
};

struct format_error : error {
    explicit format_error(const std::string& msg) : error("format error: " + msg) {}
};

struct generation_error : error {
    explicit generation_error(const std::string& msg) : error("generation error: " + msg) {}
};

struct training_error : error {
    explicit training_error(const std::string& msg) : error("training error: " + msg) {}
};

struct inference_error : error {
    explicit inference_error(const std::string& msg) : error("inference error: " + msg) {}
};

struct metric_error : error {
    explicit metric_error(const std::string& msg) : error("metric error: " + msg) {}
};

struct io_error : error {
    explicit io_error(const std::string& msg) : error("io error: " + msg) {}
};

}  // namespace vidsplice
