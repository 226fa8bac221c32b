// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "riskeig/cli.hpp"

int main(int argc, char **argv)
{
  return riskeig::cli::run(argc, argv, std::cout, std::cerr);
}
