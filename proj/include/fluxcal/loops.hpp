#pragma once

#include <string>
#include <vector>

#include "fluxcal/errors.hpp"

namespace fxc {

/// Every unit cell has three control loops: the main (z) and secondary (x)
/// loops of the qubit or coupler, and the readout rf-SQUID loop (r).
enum class LoopKind : int { z = 0, x = 1, r = 2 };

constexpr int kLoopsPerCell = 3;

inline char loop_kind_char(LoopKind k) {
    switch (k) {
        case LoopKind::z: return 'z';
        case LoopKind::x: return 'x';
        case LoopKind::r: return 'r';
    }
    return '?';
}

LoopKind loop_kind_from_char(char c);

/// (cell, kind) pair identifying one loop. Cells are 1-based.
struct LoopIndex {
    int cell = 1;
    LoopKind kind = LoopKind::z;

    bool operator==(const LoopIndex&) const = default;
};

/// Cell-major flattening, kind order z, x, r.  Returns a 0-based index in
/// [0, 3m).  The ordering is fixed so matrix files are interchangeable
/// between runs.
inline int flat_index(const LoopIndex& li, int cell_count) {
    require_contract(li.cell >= 1 && li.cell <= cell_count, "loop cell out of range");
    return (li.cell - 1) * kLoopsPerCell + static_cast<int>(li.kind);
}

inline LoopIndex loop_from_flat(int idx, int cell_count) {
    require_contract(idx >= 0 && idx < cell_count * kLoopsPerCell, "flat loop index out of range");
    return LoopIndex{idx / kLoopsPerCell + 1, static_cast<LoopKind>(idx % kLoopsPerCell)};
}

/// Flux-quantum step that leaves circuit properties invariant when applied
/// to a single loop.  The x loop works on a doubled lattice, so its step is
/// two flux quanta; z and r use one.
inline double periodic_step(LoopKind kind) {
    return kind == LoopKind::x ? 2.0 : 1.0;
}

inline double periodic_step(const LoopIndex& li) {
    return periodic_step(li.kind);
}

/// Loop labels like "q1z" used in CSV headers; cell names come from the
/// device topology.
std::string loop_label(const std::vector<std::string>& cell_names, int flat_idx);
std::vector<std::string> loop_labels(const std::vector<std::string>& cell_names);
int loop_from_label(const std::vector<std::string>& cell_names, const std::string& label);

}  // namespace fxc
