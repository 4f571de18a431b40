#pragma once

#include <string>
#include <vector>

namespace lidint {

/// Entry point of the command-line tool; argv-style arguments without the
/// program name. Returns 0 on success, 1 on usage/validation errors, 2 on
/// runtime failures. Successful subcommands print a JSON summary on stdout.
int run_cli(const std::vector<std::string>& args);

}  // namespace lidint
