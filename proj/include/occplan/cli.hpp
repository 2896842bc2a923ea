#pragma once

namespace occplan {

enum ExitCode { kExitOk = 0, kExitValidation = 1, kExitCollision = 2, kExitAcceptance = 3 };

/// Entry point of the `occplan` executable.
int cli_main(int argc, char** argv);

}  // namespace occplan
