#ifndef AUTOPHOTO_CLI_HPP_
#define AUTOPHOTO_CLI_HPP_

namespace autophoto::cli {

inline constexpr const char* kVersion = "autophoto 1.0.0";

// Exit codes: 0 success, 1 config error, 2 runtime failure.
int cli_main(int argc, char** argv);

}  // namespace autophoto::cli

#endif  // AUTOPHOTO_CLI_HPP_
