#ifndef TGAN_CLI_HPP
#define TGAN_CLI_HPP

namespace tgan::cli {

// Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric failure.
int run(int argc, const char* const* argv);

} // namespace tgan::cli

#endif
