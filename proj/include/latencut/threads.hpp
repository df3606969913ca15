#pragma once

namespace latencut {

// Number of OpenMP threads the kernels may use. Defaults to 1 so results are
// reproducible run-to-run unless the caller opts in; initialised once from the
// LATENCUT_THREADS environment variable (values < 1 are clamped to 1).
int kernel_threads();

// Override the thread cap at runtime (takes precedence over the environment).
void set_kernel_threads(int n);

} // namespace latencut
