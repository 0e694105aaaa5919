#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace ihmm {

/// Entry point of the ihmmw tool. args[0] is the program name. Returns 0 on
/// success, 2 on usage errors and 1 on any other failure.
int cli_main(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace ihmm
