// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace fusebox::cli {

/// Runs the fusebox command line: subcommands generate | evolve | eval |
/// synth. Exit codes: 0 success, 1 internal error, 2 input error.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace fusebox::cli
