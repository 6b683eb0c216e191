// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

namespace mcse {

// Entry point of the `mcse` command-line tool. Parses one of the
// simulate / train-vae / train-ego / enhance / evaluate subcommands
// (options may also come from an INI file via --config) and maps errors
// to exit codes: 0 success, 2 config error, 3 data error, 4 numerical
// failure, 1 anything unexpected.
int run_cli(int argc, const char* const* argv);

}  // namespace mcse
