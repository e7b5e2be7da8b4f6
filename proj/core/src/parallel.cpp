#include "hclt/parallel.hpp"

#include <cstdlib>
#include <string>

namespace hclt {

unsigned default_workers() {
  if (const char* env = std::getenv("HCLT_WORKERS")) {
    try {
      const long value = std::stol(env);
      if (value > 0) return static_cast<unsigned>(value);
    } catch (...) {
    }
  }
  return 1;
}

}  // namespace hclt
