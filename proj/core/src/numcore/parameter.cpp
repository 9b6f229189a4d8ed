#include "mbridge/numcore/parameter.hpp"

#include <set>

#include "mbridge/numcore/errors.hpp"

namespace mbridge {

void Parameter::init_uniform(Rng& rng, double bound) {
  for (auto& v : value.data()) v = rng.uniform(-bound, bound);
}

void zero_grads(const ParameterList& params) {
  for (auto* p : params) p->zero_grad();
}

void check_unique_names(const ParameterList& params) {
  std::set<std::string> seen;
  for (const auto* p : params) {
    if (!seen.insert(p->name).second) throw InputError("duplicate parameter name: " + p->name);
  }
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

}  // namespace mbridge
