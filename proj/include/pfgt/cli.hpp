#pragma once

namespace pfgt {

// Entry point behind the pfgt binary; exposed so tests can drive subcommands
// in-process. Returns the process exit status.
int cli_main(int argc, const char* const* argv);

}  // namespace pfgt
