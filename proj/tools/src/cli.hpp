#pragma once

namespace brc::cli {

/// Parses argv, runs one subcommand and maps failures to exit codes:
/// 2 configuration, 3 data, 4 convergence (--strict only), 1 anything else.
int run(int argc, char** argv);

}  // namespace brc::cli
