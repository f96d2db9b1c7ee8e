#pragma once

#include <stdexcept>
#include <string>

namespace divtree {

// Failure classes surfaced to callers and mapped to CLI exit codes.
enum class errc {
  invalid_argument,
  invalid_weight,        // weight not strictly positive on a masked cell
  malformed_tree,        // parent map is not a rooted tree
  cover_gap,             // condition (a) violated on the grid
  degenerate_connector,  // some B_t resolves to zero cells; refine the grid
  mean_violation,        // nonzero mean where a zero mean is required
  containment,           // ball or box not inside the region it must lie in
  profile_violation,     // declared profile constants fail sampling checks
  disconnected,          // face graph does not reach every cube
  empty_domain,
  invalid_map,           // affine map not invertible or grids incompatible
  unsupported,
  io_error,
};

const char* errc_name(errc code);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) {
  throw Error(code, std::string(errc_name(code)) + ": " + what);
}

}  // namespace divtree
