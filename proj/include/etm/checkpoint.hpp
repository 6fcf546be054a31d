#pragma once

#include <string>

#include "etm/model.hpp"

namespace etm {

// Checkpoint layout (all integers and floats little-endian):
//   magic   "ETMCKPT\n" (8 bytes)
//   u32     format version (currently 1)
//   u8      mode (0 = labeled, 1 = joint)
//   u8      rho trainable flag
//   u16     reserved (0)
//   u64     V, K, L, hidden width
//   u64     vocabulary hash
//   f64[]   parameter blocks, in order:
//           rho (L*V), alpha (K*L),
//           w1 (V*H), b1 (H), w2 (H*H), b2 (H), w3 (H*H), b3 (H),
//           w_mu (H*K), b_mu (K), w_lv (H*K), b_lv (K)
// Matrices are row-major. Throws VersionMismatch on an unknown version
// and CorruptFile on bad magic, truncation, or trailing bytes.
void save_checkpoint(const EtmModel& model, const std::string& path);
EtmModel load_checkpoint(const std::string& path);

}  // namespace etm
