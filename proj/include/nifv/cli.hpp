// include/nifv/cli.hpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef NIFV_CLI_HPP_
#define NIFV_CLI_HPP_

#include <string>
#include <vector>

namespace nifv {

// Dispatches one subcommand. `args` excludes the program name. Returns 0 on
// success, 2 on a usage error, 1 on a runtime failure.
int RunCli(const std::vector<std::string>& args);

}  // namespace nifv

#endif  // NIFV_CLI_HPP_
