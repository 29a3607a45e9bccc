#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace umbra::cli {

/// Parses args (program name excluded), runs the selected subcommand, and
/// returns the process exit code. Human-readable results go to out,
/// diagnostics to err.
///
/// Subcommands: simulate, ingest, analyze, game. A JSON config file passed
/// via --config supplies per-command defaults; explicit flags win. Every
/// artifact a command writes embeds a reproducibility manifest (tool,
/// version, command, seed, chain, config hash), so a rerun with the same
/// inputs yields byte-identical files.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace umbra::cli
