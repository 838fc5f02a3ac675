// SPDX-License-Identifier: Apache-2.0
#include "bootdiag/cli.hpp"

int main(int argc, char** argv) { return bootdiag::cli::main_entry(argc, argv); }
