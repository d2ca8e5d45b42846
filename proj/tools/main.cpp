// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "ckplug/cli.hpp"

int main(int argc, char** argv) { return ckplug::run_cli(argc, argv, std::cout, std::cerr); }
