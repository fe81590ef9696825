#pragma once

namespace traitlab {

// Batch experiment runner. Subcommands: check | simulate | mean | hj |
// compare | sweep. Exit codes: 0 success, 2 assumption failure, 3 numerical
// diagnostic (CFL, stiffness, caps), 4 I/O or validation error.
int run_cli(int argc, char** argv);

}  // namespace traitlab
