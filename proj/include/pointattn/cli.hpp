#pragma once

namespace pointattn::cli {

// Batch entry point for the synth / train / predict / eval / gradcheck
// subcommands. Exit codes: 0 ok, 1 runtime failure, 2 usage error.
int run(int argc, const char* const* argv);

}  // namespace pointattn::cli
