// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "gpm_app/cli.hpp"

int main(int argc, char** argv) { return gpm::app::run_cli(argc, argv, std::cout, std::cerr); }
