// SPDX-License-Identifier: Apache-2.0
#include "tsegformer/version.hpp"

namespace tseg {

const char* version_string() { return TSEG_VERSION_STRING; }

}  // namespace tseg
