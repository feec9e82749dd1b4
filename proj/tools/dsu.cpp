// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsu/cli.hpp"

int main(int argc, char** argv) { return dsu::cli::run(argc, argv); }
