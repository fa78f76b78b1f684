#pragma once

#include <iostream>

namespace fp {

// Entry point of the fpfuse tool. Returns 0 on success, 1 on a usage error
// and 2 on a data error; diagnostics go to err.
int cli_dispatch(int argc, const char *const *argv, std::ostream &out = std::cout,
                 std::ostream &err = std::cerr);

} // namespace fp
