#include <stdexcept>

#include "umbra/group.hpp"

namespace umbra {

const Group& find_group(const std::string& name) {
  if (name == "production") return production_group();
  if (name == "toy101") return toy101_group();
  throw std::invalid_argument("unknown group '" + name + "' (expected \"production\" or \"toy101\")");
}

}  // namespace umbra
