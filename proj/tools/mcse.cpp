// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/cli.hpp"

int main(int argc, char** argv) { return mcse::run_cli(argc, argv); }
