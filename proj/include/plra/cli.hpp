#pragma once

namespace plra::cli {

// Entry point behind the binary: 0 success, 1 config/usage error, 2 runtime
// error. All errors go to stderr, human readable.
int run(int argc, const char* const* argv);

}  // namespace plra::cli
