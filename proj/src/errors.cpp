#include "divtree/errors.hpp"

namespace divtree {

const char* errc_name(errc code) {
  switch (code) {
    case errc::invalid_argument: return "invalid-argument";
    case errc::invalid_weight: return "invalid-weight";
    case errc::malformed_tree: return "malformed-tree";
    case errc::cover_gap: return "cover-gap";
    case errc::degenerate_connector: return "degenerate-connector";
    case errc::mean_violation: return "mean-violation";
    case errc::containment: return "containment";
    case errc::profile_violation: return "profile-violation";
    case errc::disconnected: return "disconnected";
    case errc::empty_domain: return "empty-domain";
    case errc::invalid_map: return "invalid-map";
    case errc::unsupported: return "unsupported";
    case errc::io_error: return "io-error";
  }
  return "unknown";
}

}  // namespace divtree
