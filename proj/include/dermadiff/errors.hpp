#ifndef DERMADIFF_ERRORS_HPP
#define DERMADIFF_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace dermadiff {

// Exit-code mapping used by the CLI: config_error -> 2, solver_error -> 3,
// io_error -> 4. Precondition violations on individual operations throw
// std::domain_error / std::invalid_argument and map to 2 as well.

class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

class meshing_error : public std::runtime_error {
public:
    explicit meshing_error(const std::string& msg) : std::runtime_error(msg) {}
};

class assembly_error : public std::runtime_error {
public:
    explicit assembly_error(const std::string& msg) : std::runtime_error(msg) {}
};

class solver_error : public std::runtime_error {
public:
    explicit solver_error(const std::string& msg,
                          std::vector<double> residual_history = {})
        : std::runtime_error(msg), residuals(std::move(residual_history)) {}
    std::vector<double> residuals;
};

class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace dermadiff

#endif
