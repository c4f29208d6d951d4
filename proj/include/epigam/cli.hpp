/*
* Copyright (C) 2026 The epigam Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
*/
#ifndef EPIGAM_CLI_HPP
#define EPIGAM_CLI_HPP

#include <string>
#include <vector>

namespace epigam
{

/// Exit codes: 0 success, 1 pipeline or input error, 2 usage error.
int cli_dispatch(int argc, const char* const* argv);
/// Same, with the arguments after the program name.
int cli_dispatch(const std::vector<std::string>& args);

} // namespace epigam

#endif // EPIGAM_CLI_HPP
