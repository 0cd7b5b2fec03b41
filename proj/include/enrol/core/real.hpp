// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace enrol {

#ifdef ENROL_REAL_FLOAT
using Real = float;
#else
using Real = double;
#endif

}  // namespace enrol
