// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/cli.hpp"

int main(int argc, char** argv) { return fusebox::cli::run(argc, argv); }
