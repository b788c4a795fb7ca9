#ifndef MEMLAYOUT_CONFIG_MMU_CONFIG_HPP
#define MEMLAYOUT_CONFIG_MMU_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "layout/layout.hpp"
#include "pagetable/pagetable.hpp"
#include "tlb/tlb.hpp"

namespace memlayout {

// A generated MMU configuration artifact: either a set of fixed TLB entry
// sequences (MLTC) or page-table images with ASID plan and warm-up lists
// (MLPT).  The byte image is the source of truth; the parsed views are
// derived from it at construction.
struct MmuConfig {
  MmuModel::Kind kind = MmuModel::Kind::TlbFixed;
  std::vector<std::uint8_t> bytes;
  std::vector<MltcSequence> tlb_sequences;   // kind == TlbFixed
  std::optional<MlptArtifact> pagetable;     // kind == PageTable

  bool is_tlb() const { return kind == MmuModel::Kind::TlbFixed; }

  // Parses an artifact; throws FormatError on anything structurally wrong.
  static MmuConfig from_bytes(std::vector<std::uint8_t> bytes);
  static MmuConfig load(const std::string& path);
  void save(const std::string& path) const;
};

struct GeneratedConfig {
  MmuConfig config;
  std::string manifest;  // canonical interchange form
};

// Runs the backend selected by the layout's MMU model.  Byte-identical
// output for identical layouts.
GeneratedConfig generate_config(const MemoryLayout& layout);

}  // namespace memlayout

#endif
