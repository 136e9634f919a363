#pragma once

namespace qgw::parallel {

/// Sets the worker count for all parallel kernels. 1 forces the serial
/// reference path everywhere (the mode the determinism tests rely on).
void set_threads(int n);

int threads();

int hardware_threads();

} // namespace qgw::parallel
