#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cloze::cli {

// Exit codes: 0 success, 1 validation/runtime error, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

// Environment variable consulted for --seed when the flag is absent.
inline constexpr const char* kSeedEnvVar = "CLOZE_SEED";

// argv[0] is the program name. Subcommands: stats, synth, build-vocab, train,
// score, ensemble, eval, analyze.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace cloze::cli
