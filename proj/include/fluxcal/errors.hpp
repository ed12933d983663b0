#pragma once

#include <stdexcept>
#include <string>

namespace fxc {

/// Error categories carried by every fxc::Error. The numeric values are part
/// of the C API contract (see fluxcal.h) and must not be reordered.
enum class ErrorCode : int {
    config = 2,
    stage = 3,
    contract = 10,
    numeric = 11,
    detection = 12,
    insufficient_range = 13,
    insufficient_lattice = 14,
    low_confidence = 15,
    over_coupling = 16,
    io = 17,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond)
        throw Error(code, what);
}

inline void require_contract(bool cond, const std::string& what) {
    require(cond, ErrorCode::contract, what);
}

}  // namespace fxc
