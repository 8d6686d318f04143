#pragma once

// ============================================================================
// mlstab/compose.hpp
//
// Interconnection of CPN1 models: block-diagonal stacking plus one algebraic
// link equation 0 = source - target per connection.  A linked input stops
// being free and is reclassified as an algebraic variable of the composite,
// so the composite stays square (N_phi and the unknown count grow together).
// ============================================================================

#include <string>
#include <utility>
#include <vector>

#include "mlstab/model.hpp"

namespace mlstab {

/// One connection: drive input `target` with signal `source`.
struct Link {
  std::string source;  ///< any signal of any part (state, output, algebraic)
  std::string target;  ///< an input of exactly one part
};

/// Composes the given parts under the links.  Signal names must be disjoint
/// across parts; violations raise std::invalid_argument naming the clash, an
/// unknown id, or a doubly-linked input.
[[nodiscard]] Cpn1Model compose(const std::vector<const Cpn1Model*>& models,
                                const std::vector<Link>& links);

/// Convenience overload for value sequences.
[[nodiscard]] Cpn1Model compose(const std::vector<Cpn1Model>& models,
                                const std::vector<Link>& links);

}  // namespace mlstab
