// SPDX-License-Identifier: Apache-2.0
#include "semsplat/commands.hpp"

int main(int argc, char** argv) { return semsplat::run_cli(argc, argv); }
